"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are repeated in the pytest terminal summary ("acceptance criteria").
"""
import math
import time
import warnings

import mpmath
import numpy as np
import pytest

from oscifd import (CnConfig, ConstantEnvelope, Discretization, GaussianEnvelope, PhysicalSetup,
                    PlanRequest, fit_order, max_error, phi, plan, psi, run,
                    sample_initial_data, sinc, stability_report, tanc, two_level_wiener_norm,
                    wiener_norm)
from oscifd.cli import main as cli_main
from oscifd.core import SERIES_THRESHOLD
from oscifd.diagnostics import fourier_coefficients
from oscifd.experiments import MeshRule, conservation_rows, convergence_row, defect_row
from oscifd.modulation import dominant_grid_function
from oscifd.spectral import run_reference

mpmath.mp.dps = 40

# Small-eps mesh family: alpha branches n = 1..4 with tau/h close to 0.6, so
# tau and h shrink together. At eps = 1e-2 these are the only consistent
# meshes with h of order 0.1 (h >= 4.49 eps, tau >= 2 pi eps).
SMALL_EPS = 1e-2
FAMILY_RATIO = 0.6
FAMILY_H = [2 * math.pi * SMALL_EPS * n / FAMILY_RATIO for n in (1, 2, 3, 4)]
FAMILY_RULE = MeshRule(mode="planner", rho=4.0, alpha_branch=None, tau_over_h=FAMILY_RATIO,
                       theta_max=0.95)


def small_eps_setup(lam=1.0):
    return PhysicalSetup(SMALL_EPS, 1.0, lam, -4.0, 4.0, 1.0, GaussianEnvelope())


# --------------------------------------------------------------------------
# 1


def _lhs_exact(z):
    z = mpmath.mpf(z)
    return 1.5 * mpmath.sin(z) / z - 1.5 * mpmath.cos(z)


def test_criterion_1_filter_identity(report):
    t0 = time.perf_counter()
    zs = np.logspace(-8, 1, 1000)
    rhs = psi(zs) * zs * zs / 2
    worst = 0.0
    for z, r in zip(zs, rhs):
        exact = _lhs_exact(float(z))
        worst = max(worst, float(abs((r - exact) / exact)))
    # branch crossovers: values just below and above every switch point
    jumps = []
    for f, edge in [(sinc, SERIES_THRESHOLD), (psi, SERIES_THRESHOLD), (psi, 1.0),
                    (phi, SERIES_THRESHOLD), (tanc, SERIES_THRESHOLD)]:
        below = np.nextafter(edge, 0.0)
        jumps.append(abs(f(below) - f(edge)))
    crossover = max(jumps)
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-12 and crossover <= 1e-12 and elapsed < 1.0
    report(1, ok, f"identity rel err {worst:.2e} (<=1e-12), crossover {crossover:.2e} "
                  f"(<=1e-12), {elapsed:.2f}s (<1s)")
    assert ok


# --------------------------------------------------------------------------
# 2


def test_criterion_2_plane_wave(report):
    t0 = time.perf_counter()
    # the carrier is grid periodic on [0, 2 pi] since kappa/eps = 1000; the
    # snap policy keeps that period
    setup = PhysicalSetup(1e-3, 1.0, 0.0, 0.0, 2 * math.pi, 1.0, ConstantEnvelope(1.0))
    errors = {}
    for scheme in ("leapfrog", "crank_nicolson"):
        pr = plan(PlanRequest(setup, rho_target=4.0, alpha_branch=1, scheme=scheme,
                              grid="snap"))
        disc = pr.disc.with_tau(pr.disc.tau, N=1000)
        s = setup.replace(final_time=disc.final_time)
        res = run(scheme, sample_initial_data(s, disc), s, disc,
                  CnConfig(fixed_point_tol=1e-14), bootstrap_method="dominant_term")
        exact = dominant_grid_function(s, disc, disc.final_time)
        assert res.steps_taken == 1000
        errors[scheme] = max_error(res.final, exact)
    elapsed = time.perf_counter() - t0
    ok = max(errors.values()) <= 1e-10 and elapsed < 5
    report(2, ok, "max rel err leapfrog {leapfrog:.2e}, CN {crank_nicolson:.2e} (<=1e-10), "
                  .format(**errors) + f"{elapsed:.2f}s (<5s)")
    assert ok


# --------------------------------------------------------------------------
# 3


def test_criterion_3_conservation(report):
    t0 = time.perf_counter()
    setup = PhysicalSetup(1e-3, 1.0, 1.0, -4.0, 4.0, 1.0, GaussianEnvelope())
    pr = plan(PlanRequest(setup, rho_target=4.0, alpha_branch=1, scheme="crank_nicolson"))
    rows, res = conservation_rows("crank_nicolson", pr.setup, pr.disc,
                                  CnConfig(fixed_point_tol=1e-14), bootstrap_method="auto")
    assert not res.blew_up
    assert abs(rows[-1]["t"] - 1.0) <= 0.5 * pr.disc.tau
    dm = max(r["rel_mass_drift"] for r in rows)
    de = max(r["rel_energy_drift"] for r in rows)
    elapsed = time.perf_counter() - t0
    ok = dm <= 1e-11 and de <= 1e-9 and elapsed < 30
    report(3, ok, f"mass drift {dm:.2e} (<=1e-11), energy drift {de:.2e} (<=1e-9), "
                  f"{elapsed:.2f}s (<30s)")
    assert ok


@pytest.mark.slow
def test_criterion_3_long_horizon():
    # the t = 100 companion run; coarser mesh to keep it short
    setup = PhysicalSetup(1e-3, 1.0, 1.0, -4.0, 4.0, 100.0, GaussianEnvelope())
    pr = plan(PlanRequest(setup, rho_target=4.0, alpha_branch=1, target_M=400,
                          scheme="crank_nicolson"))
    rows, res = conservation_rows("crank_nicolson", pr.setup, pr.disc,
                                  CnConfig(fixed_point_tol=1e-14), stride=50)
    assert not res.blew_up
    assert max(r["rel_mass_drift"] for r in rows) <= 1e-8
    assert max(r["rel_energy_drift"] for r in rows) <= 1e-8


# --------------------------------------------------------------------------
# 4


def test_criterion_4_fig51(report):
    t0 = time.perf_counter()
    setup = PhysicalSetup(1.0, 1.0, 1.0, -4.0, 4.0, 1.0, GaussianEnvelope())
    hs = [0.4, 0.2, 0.1, 0.05]
    ref = {"m_ref": 2560, "tau_ref": 1e-4}
    orders = {}
    for scheme, rule in [("leapfrog", MeshRule(tau_over_h2=0.25)),
                         ("crank_nicolson", MeshRule(tau_over_h=1 / 8))]:
        rows = [convergence_row(scheme, setup, h, rule, reference=ref) for h in hs]
        assert all(r["error"] == "" for r in rows)
        orders[scheme] = fit_order([r["h"] for r in rows], [r["err_vs_reference"] for r in rows])
    elapsed = time.perf_counter() - t0
    ok = all(1.8 <= o <= 2.2 for o in orders.values()) and elapsed < 300
    report(4, ok, "fitted order leapfrog {leapfrog:.3f}, CN {crank_nicolson:.3f} "
                  "(in [1.8, 2.2]), ".format(**orders) + f"{elapsed:.1f}s (<300s)")
    assert ok


# --------------------------------------------------------------------------
# 5


def _family_errors(scheme):
    rows = [convergence_row(scheme, small_eps_setup(), h, FAMILY_RULE,
                            bootstrap_method="dominant_term") for h in FAMILY_H]
    assert all(r["error"] == "" for r in rows), [r["error"] for r in rows]
    assert len({r["M"] for r in rows}) == len(rows)
    return [r["h"] for r in rows], [r["err_vs_dominant_term"] for r in rows]


def test_criterion_5_small_eps_scaling(report):
    t0 = time.perf_counter()
    hs, errs = _family_errors("leapfrog")
    order = fit_order(hs, errs)
    floor = min(errs)
    c = floor / SMALL_EPS
    by_h = [e for _, e in sorted(zip(hs, errs))]
    decreasing = all(a < b for a, b in zip(by_h, by_h[1:]))
    elapsed = time.perf_counter() - t0
    ok = 1.6 <= order <= 2.4 and c <= 10 and decreasing and elapsed < 120
    report(5, ok, f"leapfrog, 4 planned meshes: order {order:.3f} (in [1.6, 2.4]), floor "
                  f"{floor:.3e} = {c:.2f} eps (C<=10), {elapsed:.2f}s (<120s)")
    assert ok


@pytest.mark.xfail(strict=True, reason="pre-asymptotic at eps = 1e-2; see decisions ledger")
def test_criterion_5_crank_nicolson_same_family(report):
    hs, errs = _family_errors("crank_nicolson")
    order = fit_order(hs, errs)
    print(f"criterion 5 (CN, same family): order {order:.3f}, floor {min(errs):.3e}")
    assert 1.6 <= order <= 2.4


# --------------------------------------------------------------------------
# 6


def _family_defects(scheme):
    rows = [defect_row(scheme, small_eps_setup(), h, FAMILY_RULE, t=0.5) for h in FAMILY_H]
    assert all(r["error"] == "" for r in rows), [r["error"] for r in rows]
    x = [r["tau"] ** 2 + r["h"] ** 2 for r in rows]
    return x, rows


def test_criterion_6_defect_decay(report):
    t0 = time.perf_counter()
    x, rows = _family_defects("leapfrog")
    # the O(eps) floor field is removed before fitting against tau^2 + h^2
    s_max = fit_order(x, [r["reduced_max"] for r in rows])
    s_w = fit_order(x, [r["reduced_wiener"] for r in rows])
    floor = max(r["floor_max"] for r in rows)
    elapsed = time.perf_counter() - t0
    ok = 0.8 <= s_max <= 1.2 and 0.8 <= s_w <= 1.2 and elapsed < 60
    report(6, ok, f"leapfrog defect slope max {s_max:.3f}, Wiener {s_w:.3f} (in [0.8, 1.2]) "
                  f"above floor {floor:.2e}, {elapsed:.2f}s (<60s)")
    assert ok


@pytest.mark.xfail(strict=True, reason="pre-asymptotic at eps = 1e-2; see decisions ledger")
def test_criterion_6_crank_nicolson_same_family():
    x, rows = _family_defects("crank_nicolson")
    s_max = fit_order(x, [r["reduced_max"] for r in rows])
    s_w = fit_order(x, [r["reduced_wiener"] for r in rows])
    print(f"criterion 6 (CN, same family): slopes {s_max:.3f}, {s_w:.3f}")
    assert 0.8 <= s_max <= 1.2 and 0.8 <= s_w <= 1.2


# --------------------------------------------------------------------------
# 7


def test_criterion_7_linear_stability(report):
    t0 = time.perf_counter()
    theta = 0.9
    setup = PhysicalSetup(1e-3, 1.0, 0.0, -4.0, 4.0, 1.0, GaussianEnvelope())
    pr = plan(PlanRequest(setup, rho_target=4.0, alpha_branch=1, theta_max=theta,
                          target_M=800, scheme="leapfrog"))
    assert pr.accepted and pr.stability.mu_max <= theta
    s = pr.setup.replace(final_time=1e4 * pr.disc.tau)
    disc = pr.disc.with_tau(pr.disc.tau, N=10_000)
    rng = np.random.default_rng(7)
    u0 = sample_initial_data(s, disc)
    u0 = type(u0)(u0.values + 0.1 * (rng.standard_normal(disc.M)
                                     + 1j * rng.standard_normal(disc.M)), 0.0)
    with warnings.catch_warnings():
        # the linear spectral flow is exact on any grid
        warnings.simplefilter("ignore")
        u1 = run_reference(u0, s, disc.tau, disc.tau)
    start = two_level_wiener_norm(u1.values, u0.values)
    worst = [0.0]

    def watch(n, u):
        worst[0] = max(worst[0], wiener_norm(u))

    res = run("leapfrog", u0, s, disc, observer=watch, u1=u1)
    assert res.steps_taken == 10_000 and not res.blew_up
    bound = 2 / math.sqrt(2 * (1 - theta))
    lf_ratio = worst[0] / start

    # CN: all Fourier moduli constant along each chain of the two-step map
    pc = plan(PlanRequest(setup, rho_target=4.0, alpha_branch=2, scheme="crank_nicolson"))
    sc = pc.setup.replace(final_time=200 * pc.disc.tau)
    dc = pc.disc.with_tau(pc.disc.tau, N=200)
    v0 = type(u0)(rng.standard_normal(dc.M) + 1j * rng.standard_normal(dc.M), 0.0)
    moduli = {}

    def keep(n, u):
        moduli[n] = np.abs(fourier_coefficients(u))

    run("crank_nicolson", v0, sc, dc, observer=keep, bootstrap_method="cn_half")
    cn_dev = max(float(np.max(np.abs(moduli[n] - moduli[n % 2]) / moduli[n % 2]))
                 for n in moduli)

    eig_dev = 0.0
    for target in (200, 400, 600, 800):
        p = plan(PlanRequest(setup, rho_target=4.0, alpha_branch=1, theta_max=0.95,
                             target_M=target, scheme="leapfrog"))
        if p.stability.mu_max < 1:
            eig_dev = max(eig_dev, stability_report(p.disc).eigen_moduli_max_deviation)
    elapsed = time.perf_counter() - t0
    ok = lf_ratio <= bound and cn_dev <= 1e-11 and eig_dev <= 1e-12 and elapsed < 60
    report(7, ok, f"leapfrog Wiener growth {lf_ratio:.3f} (<= {bound:.2f}), CN |u_k| rel dev "
                  f"{cn_dev:.2e} (<=1e-11), eigenvalue dev {eig_dev:.1e} (<=1e-12), "
                  f"{elapsed:.2f}s (<60s)")
    assert ok


# --------------------------------------------------------------------------
# 8

_UNSTABLE_TOML = """
[physics]
epsilon = 1.0
kappa = 1.0
lambda = 0.0
domain = [-4.0, 4.0]
final_time = 40.0
envelope = {{ kind = "gaussian" }}

[discretization]
mode = "direct"
h = 0.4
tau = 0.08

[scheme]
name = "leapfrog"

[output]
path = "{out}"
"""


def test_criterion_8_instability_witness(report, tmp_path):
    t0 = time.perf_counter()
    setup = PhysicalSetup(1.0, 1.0, 0.0, -4.0, 4.0, 40.0, GaussianEnvelope())
    disc = Discretization.direct(setup, 0.4, 0.08)
    st = stability_report(disc)
    assert st.bound_value > 1
    j = np.arange(-(disc.M // 2), -(disc.M // 2) + disc.M)
    k = int(j[np.argmax(np.abs(st.mu))]) % disc.M
    amp = {}

    def keep(n, u):
        amp[n] = abs(fourier_coefficients(u)[k])

    run("leapfrog", sample_initial_data(setup, disc), setup, disc, observer=keep,
        blowup_factor=None)
    observed = amp[220] / amp[20]
    predicted = st.eigen_moduli_max ** 200
    ratio = observed / predicted

    cfg = tmp_path / "unstable.toml"
    cfg.write_text(_UNSTABLE_TOML.format(out=(tmp_path / "final.csv").as_posix()))
    code = cli_main(["run", "--config", str(cfg), "--quiet"])
    elapsed = time.perf_counter() - t0
    ok = 0.5 <= ratio <= 2 and code == 3 and elapsed < 10
    report(8, ok, f"bound {st.bound_value:.4f} > 1, growth/|lambda|^200 = {ratio:.4f} "
                  f"(within x2), CLI exit code {code} (3), {elapsed:.2f}s (<10s)")
    assert ok


# --------------------------------------------------------------------------
# 9


def test_criterion_9_planner_contract(report):
    t0 = time.perf_counter()
    worst = 0.0
    accepted = 0
    for eps in (1e-2, 1e-3, 1e-4):
        setup = PhysicalSetup(eps, 1.0, 1.0, -4.0, 4.0, 1.0, GaussianEnvelope())
        for n in (1, 2):
            pr = plan(PlanRequest(setup, rho_target=4.0, alpha_branch=n), raise_on_reject=False)
            if not pr.accepted:
                continue
            accepted += 1
            d = pr.disc
            again = Discretization(M=d.M, N=d.N, h=d.h, tau=d.tau, epsilon=d.epsilon,
                                   kappa=d.kappa, rho_eff=d.rho_eff)
            assert again.consistency_residuals() == (pr.residual_alpha, pr.residual_beta)
            worst = max(worst, pr.residual_alpha / 4.0, pr.residual_beta / 4.0)
    elapsed = time.perf_counter() - t0
    ok = accepted == 6 and worst <= 1e-12 and elapsed < 1
    report(9, ok, f"{accepted}/6 plans accepted, worst residual {worst:.2e} rho (<=1e-12 rho), "
                  f"recomputation identical, {elapsed:.2f}s (<1s)")
    assert ok
