"""Experiment drivers shared by the command line and the test suite.

Each driver returns plain rows (dicts) so that callers can tabulate, assert or
write CSV without re-running anything.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from .core import Discretization, GridFunction, PhysicalSetup, sample_initial_data
from .diagnostics import discrete_energy, discrete_mass, fit_order, max_error, wiener_norm
from .errors import OscifdError
from .modulation import Envelope, defect_cn, defect_floor, defect_leapfrog, dominant_grid_function
from .planner import PlanRequest, PlanResult, one_step_form, plan, plan_direct
from .schemes import CnConfig, run
from .spectral import run_reference

__all__ = ["MeshRule", "realise_mesh", "convergence_row", "defect_row", "conservation_rows",
           "fit_rows"]


@dataclass(frozen=True)
class MeshRule:
    """How a target mesh width h becomes a Discretization.

    Direct mode: tau is ``tau`` if given, else ``tau_over_h * h`` or
    ``tau_over_h2 * h**2``. Planner mode: target_M = round(L / h) and the
    alpha branch is either fixed or (``alpha_branch=None``) the integer closest
    to tau_over_h * h / (2 pi eps / kappa^2), the spacing of the branches.
    """

    mode: str = "direct"
    tau: Optional[float] = None
    tau_over_h: Optional[float] = None
    tau_over_h2: Optional[float] = None
    rho: float = 4.0
    alpha_branch: Optional[int] = 1
    beta_branch: int = 1
    theta_max: float = 0.95
    grid: str = "stretch"

    def __post_init__(self):
        if self.mode not in ("direct", "planner"):
            raise ValueError(f"unknown discretization mode {self.mode!r}")
        given = [v is not None for v in (self.tau, self.tau_over_h, self.tau_over_h2)]
        if self.mode == "direct" and sum(given) != 1:
            raise ValueError("direct mode needs exactly one of tau, tau_over_h, tau_over_h2")
        if self.mode == "planner" and self.alpha_branch is None and self.tau_over_h is None:
            raise ValueError("automatic alpha branch needs tau_over_h")


def realise_mesh(setup: PhysicalSetup, h: Optional[float], rule: MeshRule,
                 scheme: str = "crank_nicolson", target_M: Optional[int] = None,
                 raise_on_reject: bool = False) -> PlanResult:
    if rule.mode == "direct":
        if h is None:
            raise ValueError("direct mode needs a mesh width")
        if rule.tau is not None:
            tau = rule.tau
        elif rule.tau_over_h is not None:
            tau = rule.tau_over_h * h
        else:
            tau = rule.tau_over_h2 * h * h
        return plan_direct(setup, h, tau)
    if target_M is None and h is not None:
        target_M = max(2, int(round(setup.length / h)))
    n = rule.alpha_branch
    if n is None:
        if h is None:
            raise ValueError("alpha_branch = 'auto' needs a mesh width h")
        spacing = 2 * math.pi * setup.epsilon / setup.kappa ** 2
        n = max(1, int(round(rule.tau_over_h * h / spacing)))
    req = PlanRequest(setup, rho_target=rule.rho, alpha_branch=n, beta_branch=rule.beta_branch,
                      theta_max=rule.theta_max, target_M=target_M, scheme=scheme,
                      grid=rule.grid)
    return plan(req, raise_on_reject=raise_on_reject)


def _final_state(scheme, setup, disc, cfg, bootstrap_method, blowup_factor):
    if scheme == "crank_nicolson" and cfg.form == "one_step":
        setup, disc = one_step_form(setup, disc)
    u0 = sample_initial_data(setup, disc)
    res = run(scheme, u0, setup, disc, cfg, bootstrap_method=bootstrap_method,
              blowup_factor=blowup_factor)
    return res, setup, disc


_REFERENCE_CACHE: Dict = {}


def _reference(setup: PhysicalSetup, m_ref: int, tau_ref: float, t: float):
    # rows of a sweep usually share one reference; unhashable envelopes skip the cache
    try:
        key = (setup, m_ref, tau_ref, t)
        hash(key)
    except TypeError:
        key = None
    if key is not None and key in _REFERENCE_CACHE:
        return _REFERENCE_CACHE[key]
    fine = Discretization(M=m_ref, N=1, h=setup.length / m_ref, tau=t,
                          epsilon=setup.epsilon, kappa=setup.kappa)
    ref = run_reference(sample_initial_data(setup, fine), setup, tau_ref, t)
    if key is not None:
        if len(_REFERENCE_CACHE) > 8:
            _REFERENCE_CACHE.clear()
        _REFERENCE_CACHE[key] = ref
    return ref


def convergence_row(scheme: str, setup: PhysicalSetup, h: Optional[float], rule: MeshRule,
                    cfg: Optional[CnConfig] = None, bootstrap_method: str = "auto",
                    reference: Optional[Dict] = None, blowup_factor: float = 1e6,
                    target_M: Optional[int] = None) -> Dict:
    """One row of an error-versus-h table.

    ``reference`` (optional) holds ``m_ref`` or ``m_ref_multiplier`` and
    ``tau_ref`` for the spectral comparison; the dominant-term error is always
    reported.
    """
    cfg = cfg or CnConfig()
    row = dict(scheme=scheme, h=None, tau=None, M=None, N=None, err_vs_reference=None,
               err_vs_dominant_term=None, error="")
    try:
        pr = realise_mesh(setup, h, rule, scheme, target_M=target_M)
        res, s, d = _final_state(scheme, pr.setup, pr.disc, cfg, bootstrap_method,
                                 blowup_factor)
        row.update(h=d.h, tau=d.tau, M=d.M, N=d.N)
        if rule.mode == "planner" and not pr.accepted:
            row["error"] = "plan rejected: " + "; ".join(pr.notes or ("stability bound",))
        if res.blew_up:
            row["error"] = f"blow-up at step {res.blowup_step}"
            return row
        t = d.final_time
        row["err_vs_dominant_term"] = max_error(res.final, dominant_grid_function(s, d, t))
        if reference:
            if "m_ref" in reference:
                m_ref = int(reference["m_ref"])
            else:
                m_ref = int(reference.get("m_ref_multiplier", 16)) * d.M
            ref = _reference(s, m_ref, float(reference.get("tau_ref", 1e-4)), t)
            row["err_vs_reference"] = max_error(res.final, ref)
    except (OscifdError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def fit_rows(rows: List[Dict], key: str) -> Optional[float]:
    pts = [(r["h"], r[key]) for r in rows if r.get(key) and r.get("h")]
    if len(pts) < 3:
        return None
    try:
        return fit_order([p[0] for p in pts], [p[1] for p in pts])
    except (OscifdError, ValueError):
        return None


def defect_row(scheme: str, setup: PhysicalSetup, h: Optional[float], rule: MeshRule,
               t: Optional[float] = None, target_M: Optional[int] = None) -> Dict:
    """Defect of the dominant term at t (default T/2) on one planned mesh.

    Besides the raw norms the row carries the max norm of the O(eps) floor
    field and the norms of the defect with that field removed.
    """
    row = dict(scheme=scheme, tau=None, h=None, defect_max=None, defect_wiener=None,
               floor_max=None, reduced_max=None, reduced_wiener=None, error="")
    try:
        pr = realise_mesh(setup, h, rule, scheme, target_M=target_M)
        s, d = pr.setup, pr.disc
        t = 0.5 * s.final_time if t is None else t
        env = Envelope.from_setup(s)
        fn = defect_leapfrog if scheme == "leapfrog" else defect_cn
        sample = fn(env, s, d, t)
        floor = defect_floor(env, s, d, t)
        reduced = sample.values - floor
        row.update(tau=d.tau, h=d.h, defect_max=sample.max_norm,
                   defect_wiener=sample.wiener_norm,
                   floor_max=float(np.max(np.abs(floor))),
                   reduced_max=float(np.max(np.abs(reduced))),
                   reduced_wiener=wiener_norm(reduced))
        if not sample.consistent:
            row["error"] = "mesh does not satisfy the consistency relation"
    except (OscifdError, ValueError) as exc:
        row["error"] = f"{type(exc).__name__}: {exc}"
    return row


def conservation_rows(scheme: str, setup: PhysicalSetup, disc: Discretization,
                      cfg: Optional[CnConfig] = None, stride: int = 1,
                      bootstrap_method: str = "auto", blowup_factor: float = 1e6):
    """Mass and energy along a run, sampled every ``stride`` steps.

    Returns (rows, run_result). Drift is relative to the first sample of the
    same parity for the two-step Crank-Nicolson map (it conserves the
    even and odd chains separately) and to step 0 otherwise.
    """
    cfg = cfg or CnConfig()
    if stride < 1:
        raise ValueError("stride must be positive")
    if scheme == "crank_nicolson" and cfg.form == "one_step":
        setup, disc = one_step_form(setup, disc)
    chains = 2 if (scheme == "crank_nicolson" and cfg.form == "two_step") else 1
    base_mass = {}
    base_energy = {}
    rows = []

    def observe(n: int, u: GridFunction):
        if n < chains:
            base_mass[n] = discrete_mass(u)
            base_energy[n] = discrete_energy(u, setup, disc)
        if n % stride:
            return
        m = discrete_mass(u)
        e = discrete_energy(u, setup, disc)
        m0 = base_mass[n % chains]
        e0 = base_energy[n % chains]
        rows.append(dict(
            t=n * disc.tau, mass=m, energy=e,
            rel_mass_drift=abs(m - m0) / abs(m0) if m0 else 0.0,
            rel_energy_drift=abs(e - e0) / abs(e0) if e0 else 0.0,
            weighted_mass=disc.h * m, weighted_energy=disc.h * e, event=""))

    u0 = sample_initial_data(setup, disc)
    res = run(scheme, u0, setup, disc, cfg, observer=observe,
              bootstrap_method=bootstrap_method, blowup_factor=blowup_factor)
    if res.blew_up:
        rows.append(dict(t=res.blowup_time, mass=None, energy=None, rel_mass_drift=None,
                         rel_energy_drift=None, weighted_mass=None, weighted_energy=None,
                         event=f"blow-up at step {res.blowup_step}"))
    return rows, res
