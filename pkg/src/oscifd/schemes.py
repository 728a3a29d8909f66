"""Filtered leapfrog and filtered Crank-Nicolson time steppers.

Both are written on periodic grids for

    i eps u_t + eps^2/2 u_xx = lam eps |u|^2 u.

Leapfrog, solved for the new level (s = sinc(alpha), and sinc/tanc = cos):

    u^{n+1} = u^{n-1} + i (eps tau s / (h^2 psi)) D u^n - 2 i lam tau cos(alpha) |u^n|^2 u^n

with D u_j = u_{j+1} - 2 phi(beta) u_j + u_{j-1}. Crank-Nicolson with
w = u^{n+1} + u^{n-1}:

    (I - i g D) w = 2 u^{n-1} - i (lam tau / 2) (|u^{n-1}|^2 + |u^{n+1}|^2) w,
    g = eps tau s / (2 h^2 psi cos(alpha)),

solved by fixed-point iteration with the nonlinear term lagged; the circulant
operator is inverted exactly by FFT in every sweep.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import Discretization, GridFunction, PhysicalSetup
from .errors import CosineTooSmall, FixedPointDivergence, NonFiniteState
from .modulation import dominant_grid_function
from .planner import COS_ALPHA_MIN

__all__ = [
    "TwoLevelState",
    "CnConfig",
    "RunResult",
    "leapfrog_step",
    "cn_step",
    "cn_one_step",
    "bootstrap",
    "run",
    "resolve_bootstrap",
]


@dataclass(frozen=True)
class TwoLevelState:
    u_prev: GridFunction
    u_curr: GridFunction
    step_index: int


@dataclass(frozen=True)
class CnConfig:
    fixed_point_tol: float = 1e-14
    max_iterations: int = 100
    predictor: str = "copy_prev"
    form: str = "two_step"

    def __post_init__(self):
        if not self.fixed_point_tol > 0:
            raise ValueError("fixed_point_tol must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")
        if self.predictor not in ("copy_prev", "leapfrog_predictor"):
            raise ValueError(f"unknown predictor {self.predictor!r}")
        if self.form not in ("two_step", "one_step"):
            raise ValueError(f"unknown CN form {self.form!r}")


def _second_difference(u, phi_beta):
    return np.roll(u, -1) - 2.0 * phi_beta * u + np.roll(u, 1)


def _check_finite(u, step_index):
    if not np.all(np.isfinite(u)):
        raise NonFiniteState(f"non-finite values at step {step_index}", step_index)


def leapfrog_step(state: TwoLevelState, setup: PhysicalSetup,
                  disc: Discretization) -> TwoLevelState:
    f = disc.filters
    eps, tau, h = setup.epsilon, disc.tau, disc.h
    um = state.u_prev.values
    u = state.u_curr.values
    lin = eps * tau * f.sinc_alpha / (h * h * f.psi_beta)
    up = um + 1j * lin * _second_difference(u, f.phi_beta)
    if setup.lam != 0:
        up = up - 2j * setup.lam * tau * f.cos_alpha * (u.real ** 2 + u.imag ** 2) * u
    n1 = state.step_index + 1
    _check_finite(up, n1)
    return TwoLevelState(state.u_curr, GridFunction(up, state.u_curr.time + tau), n1)


def _symbol(disc: Discretization, tau: float, f):
    j = np.arange(disc.M)
    d = 2.0 * (np.cos(2 * np.pi * j / disc.M) - f.phi_beta)
    g = disc.epsilon * tau * f.sinc_alpha / (2 * disc.h ** 2 * f.psi_beta * f.cos_alpha)
    return 1.0 / (1.0 - 1j * g * d)


def _cn_solve(um, setup, disc, tau, f, cfg, guess):
    if abs(f.cos_alpha) < COS_ALPHA_MIN:
        raise CosineTooSmall(f"|cos(alpha)| = {abs(f.cos_alpha):.3g} < {COS_ALPHA_MIN}; "
                             "the Crank-Nicolson average divides by cos(alpha)")
    inv = _symbol(disc, tau, f)
    lam = setup.lam
    dens_m = um.real ** 2 + um.imag ** 2
    up = guess
    iterations = 0
    for iterations in range(1, cfg.max_iterations + 1):
        w = up + um
        rhs = 2.0 * um
        if lam != 0:
            rhs = rhs - 0.5j * lam * tau * (dens_m + up.real ** 2 + up.imag ** 2) * w
        w_new = np.fft.ifft(inv * np.fft.fft(rhs))
        up_new = w_new - um
        if not np.all(np.isfinite(up_new)):
            raise FixedPointDivergence("fixed-point iterate became non-finite")
        diff = np.max(np.abs(up_new - up)) if up_new.size else 0.0
        up = up_new
        scale = np.max(np.abs(up)) if up.size else 0.0
        if diff <= max(cfg.fixed_point_tol, 16 * np.finfo(float).eps * scale):
            return up, iterations
        if lam == 0:
            # linear problem: the first sweep is exact
            return up, iterations
    raise FixedPointDivergence(
        f"fixed-point residual {diff:.3g} above {cfg.fixed_point_tol:g} after "
        f"{cfg.max_iterations} iterations")


def cn_step(state: TwoLevelState, setup: PhysicalSetup, disc: Discretization,
            cfg: Optional[CnConfig] = None) -> TwoLevelState:
    """Advance (u^{n-1}, u^n) to (u^n, u^{n+1}); the map u^{n-1} -> u^{n+1}
    spans 2 tau."""
    cfg = cfg or CnConfig()
    f = disc.filters
    um = state.u_prev.values
    if cfg.predictor == "leapfrog_predictor":
        guess = leapfrog_step(state, setup, disc).u_curr.values
    else:
        guess = um.copy()
    up, _ = _cn_solve(um, setup, disc, disc.tau, f, cfg, guess)
    n1 = state.step_index + 1
    return TwoLevelState(state.u_curr, GridFunction(up, state.u_curr.time + disc.tau), n1)


def cn_one_step(u: GridFunction, setup: PhysicalSetup, disc: Discretization,
                cfg: Optional[CnConfig] = None) -> GridFunction:
    """One step u^n -> u^{n+1} of size disc.tau: the two-step formula with
    tau/2 (alpha halved, filters re-evaluated)."""
    cfg = cfg or CnConfig()
    half = disc.with_tau(0.5 * disc.tau)
    up, _ = _cn_solve(u.values, setup, half, half.tau, half.filters, cfg, u.values.copy())
    return GridFunction(up, u.time + disc.tau)


def bootstrap(u0: GridFunction, setup: PhysicalSetup, disc: Discretization,
              method: str = "cn_half", cfg: Optional[CnConfig] = None) -> TwoLevelState:
    """Second starting level u^1 for the two-step schemes.

    ``dominant_term`` samples the exact geometric-optics term at t = tau;
    ``cn_half`` takes one Crank-Nicolson one-step of size tau.
    """
    if method == "dominant_term":
        u1 = dominant_grid_function(setup, disc, u0.time + disc.tau)
    elif method == "cn_half":
        try:
            u1 = cn_one_step(u0, setup, disc, cfg)
        except CosineTooSmall as exc:
            raise CosineTooSmall(f"{exc}; on odd alpha branches bootstrap with "
                                 "'dominant_term' or 'auto'") from exc
    else:
        raise ValueError(f"unknown bootstrap method {method!r}")
    return TwoLevelState(u0, u1, 1)


def resolve_bootstrap(method: str, disc: Discretization) -> str:
    """'auto' picks cn_half when the halved alpha keeps |cos| >= 0.5
    (e.g. even alpha branches) and the dominant term otherwise."""
    if method != "auto":
        return method
    half = disc.with_tau(0.5 * disc.tau)
    return "cn_half" if abs(half.filters.cos_alpha) >= COS_ALPHA_MIN else "dominant_term"


@dataclass
class RunResult:
    final: GridFunction
    steps_taken: int
    blowup_step: Optional[int] = None
    blowup_time: Optional[float] = None
    previous: Optional[GridFunction] = None
    message: str = ""

    @property
    def blew_up(self) -> bool:
        return self.blowup_step is not None


def run(scheme: str, u0: GridFunction, setup: PhysicalSetup, disc: Discretization,
        cfg: Optional[CnConfig] = None,
        observer: Optional[Callable[[int, GridFunction], None]] = None,
        bootstrap_method: str = "cn_half",
        blowup_factor: float = 1e6,
        u1: Optional[GridFunction] = None) -> RunResult:
    """Advance N = disc.N steps.

    ``observer(n, u^n)`` is called for n = 0..N. Blow-up (non-finite values or
    max |u| above ``blowup_factor`` times the initial max) stops the run and
    is reported in the result instead of raised.
    """
    cfg = cfg or CnConfig()
    if scheme not in ("leapfrog", "crank_nicolson"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if observer:
        observer(0, u0)
    if disc.N == 0:
        return RunResult(u0, 0)
    u0max = float(np.max(np.abs(u0.values))) if u0.M else 0.0
    ceiling = blowup_factor * u0max if (blowup_factor and u0max > 0) else np.inf

    def guard(u: GridFunction, n: int):
        if not np.all(np.isfinite(u.values)):
            raise NonFiniteState(f"non-finite values at step {n}", n)
        if np.max(np.abs(u.values)) > ceiling:
            raise NonFiniteState(f"max norm above {ceiling:.3g} at step {n}", n)

    if scheme == "crank_nicolson" and cfg.form == "one_step":
        u = u0
        n = 0
        try:
            for n in range(1, disc.N + 1):
                nxt = cn_one_step(u, setup, disc, cfg)
                guard(nxt, n)
                u = nxt
                if observer:
                    observer(n, u)
        except NonFiniteState as exc:
            return RunResult(u, n - 1, exc.step_index, exc.step_index * disc.tau, None, str(exc))
        return RunResult(u, disc.N)

    if u1 is not None:
        state = TwoLevelState(u0, u1, 1)
    else:
        state = bootstrap(u0, setup, disc, resolve_bootstrap(bootstrap_method, disc), cfg)
    step = leapfrog_step if scheme == "leapfrog" else (
        lambda s, su, d: cn_step(s, su, d, cfg))
    try:
        guard(state.u_curr, 1)
        if observer:
            observer(1, state.u_curr)
        while state.step_index < disc.N:
            nxt = step(state, setup, disc)
            guard(nxt.u_curr, nxt.step_index)
            state = nxt
            if observer:
                observer(state.step_index, state.u_curr)
    except NonFiniteState as exc:
        n = exc.step_index if exc.step_index is not None else state.step_index + 1
        return RunResult(state.u_curr, state.step_index, n, n * disc.tau, state.u_prev, str(exc))
    return RunResult(state.u_curr, state.step_index, previous=state.u_prev)
