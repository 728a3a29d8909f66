"""Second-order convergence at eps = 1.

With eps = 1 nothing oscillates fast, so the filters are close to 1 and the
consistency relation is not needed: tau and h are chosen directly. We measure
the max-norm error at T = 1 against a Strang-splitting Fourier reference on a
grid that contains every scheme grid as a subsample.
"""
from oscifd import GaussianEnvelope, PhysicalSetup, fit_order
from oscifd.experiments import MeshRule, convergence_row

setup = PhysicalSetup(epsilon=1.0, kappa=1.0, lam=1.0, domain_left=-4.0, domain_right=4.0,
                      final_time=1.0, envelope=GaussianEnvelope())
reference = {"m_ref": 2560, "tau_ref": 1e-4}
hs = [0.4, 0.2, 0.1, 0.05]

for scheme, rule, label in [("leapfrog", MeshRule(tau_over_h2=0.25), "tau = h^2/4"),
                            ("crank_nicolson", MeshRule(tau_over_h=1 / 8), "tau = h/8")]:
    print(f"{scheme} ({label})")
    rows = [convergence_row(scheme, setup, h, rule, reference=reference) for h in hs]
    for r in rows:
        print(f"  h = {r['h']:.3f}  M = {r['M']:4d}  N = {r['N']:5d}  "
              f"error = {r['err_vs_reference']:.3e}")
    order = fit_order([r["h"] for r in rows], [r["err_vs_reference"] for r in rows])
    print(f"  fitted order {order:.2f}\n")
