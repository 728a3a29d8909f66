"""Linear stability of the filtered leapfrog scheme.

Each Fourier mode obeys z^2 - 2 i mu_k z - 1 = 0. For |mu_k| < 1 both roots
lie on the unit circle; once the bound crosses 1 the worst mode grows like
|lambda|^n with |lambda| = |mu| + sqrt(mu^2 - 1).
"""
import numpy as np

from oscifd import Discretization, GaussianEnvelope, PhysicalSetup, run, sample_initial_data
from oscifd.diagnostics import fourier_coefficients
from oscifd.planner import stability_report

setup = PhysicalSetup(1.0, 1.0, 0.0, -4.0, 4.0, 40.0, GaussianEnvelope())
for tau in (0.06, 0.08):
    disc = Discretization.direct(setup, 0.4, tau)
    st = stability_report(disc)
    print(f"tau = {disc.tau:.4f}: mu_max = {st.mu_max:.4f}, max |lambda| = "
          f"{st.eigen_moduli_max:.6f}")
    j = np.arange(-(disc.M // 2), -(disc.M // 2) + disc.M)
    k = int(j[np.argmax(np.abs(st.mu))]) % disc.M
    amp = {}
    res = run("leapfrog", sample_initial_data(setup, disc), setup, disc, blowup_factor=None,
              observer=lambda n, u: amp.__setitem__(n, abs(fourier_coefficients(u)[k])))
    if st.mu_max > 1:
        print(f"  mode {k}: growth over steps 20..220 = {amp[220] / amp[20]:.4e}, "
              f"|lambda|^200 = {st.eigen_moduli_max ** 200:.4e}")
    else:
        print(f"  mode {k}: amplitude stays within [{min(amp.values()):.2e}, "
              f"{max(amp.values()):.2e}] over {res.steps_taken} steps")
