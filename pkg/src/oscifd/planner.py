"""Parameter planning under the consistency relation

    eps / tanc(alpha) = eps * sinc(beta) / psi(beta) = rho

with alpha = kappa^2 tau / (2 eps), beta = kappa h / eps, plus the leapfrog
stability bound

    (eps tau / h^2) |sinc(alpha)| (1 + |phi(beta)|) / |psi(beta)| <= theta < 1.

Both scalar equations are solved with a bracketed Newton iteration that falls
back to bisection whenever a Newton step leaves the bracket.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .core import Discretization, PhysicalSetup, psi, sinc, tanc, filter_alpha, filter_beta
from .errors import (CosineTooSmall, NoConvergence, NoRootInBracket, PsiTooSmall,
                     StabilityViolation)

__all__ = [
    "newton_bisect",
    "solve_alpha",
    "solve_beta",
    "StabilityReport",
    "stability_report",
    "PlanRequest",
    "PlanResult",
    "plan",
    "plan_direct",
    "one_step_form",
]

RESIDUAL_RTOL = 1e-12
MAX_ITER = 200
PSI_GUARD = 1e-8
COS_ALPHA_MIN = 0.5


def newton_bisect(f: Callable[[float], float], df: Callable[[float], float],
                  a: float, b: float, x0: Optional[float] = None,
                  maxiter: int = MAX_ITER) -> float:
    """Root of ``f`` in [a, b] by Newton's method safeguarded with bisection.

    ``f(a)`` and ``f(b)`` must differ in sign. Iterates until the bracket
    collapses to a few ulps or ``f`` vanishes, then returns the float in the
    final neighbourhood with the smallest ``|f|``.
    """
    fa, fb = f(a), f(b)
    if fa == 0:
        return a
    if fb == 0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise NoRootInBracket(f"no sign change on [{a!r}, {b!r}]")
    if a > b:
        a, b, fa, fb = b, a, fb, fa
    x = x0 if (x0 is not None and a < x0 < b) else 0.5 * (a + b)
    for _ in range(maxiter):
        fx = f(x)
        if fx == 0:
            return x
        if np.sign(fx) == np.sign(fa):
            a, fa = x, fx
        else:
            b, fb = x, fx
        if b - a <= 4 * np.spacing(max(abs(a), abs(b))):
            break
        d = df(x)
        xn = x - fx / d if (d != 0 and np.isfinite(d)) else math.nan
        if not (a < xn < b):
            xn = 0.5 * (a + b)
        if abs(xn - x) <= 2 * np.spacing(abs(x)):
            # Newton has converged; the loop above tightens the bracket once more
            x = xn
            fx = f(x)
            break
        x = xn
    else:
        raise NoConvergence(f"no convergence after {maxiter} iterations")
    return _best_float(f, x)


def _best_float(f, x, span=4):
    best, fbest = x, abs(f(x))
    lo = hi = x
    for _ in range(span):
        lo = np.nextafter(lo, -np.inf)
        hi = np.nextafter(hi, np.inf)
        for y in (lo, hi):
            fy = abs(f(y))
            if fy < fbest:
                best, fbest = float(y), fy
    return float(best)


def _ulp_floor(df, x):
    # residual attainable by the nearest double to the exact root
    return 2.0 * abs(df(x)) * np.spacing(abs(x))


# --------------------------------------------------------------------------
# alpha


def _alpha_residual(epsilon, rho):
    def g(a):
        return epsilon * a * math.cos(a) / math.sin(a) - rho

    def dg(a):
        s = math.sin(a)
        return epsilon * (s * math.cos(a) - a) / (s * s)

    return g, dg


def solve_alpha(epsilon: float, rho: float, n: int) -> float:
    """Solve eps / tanc(alpha) = rho on the branch around n*pi.

    The root is unique in (n pi - pi/2, n pi + pi/2): it lies right of n pi
    when rho/n > 0 and left of it otherwise. Returns the double with the
    smallest residual; the residual is at most 1e-12 |rho| unless the spacing
    of doubles near the root is coarser than that.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if rho == 0:
        raise ValueError("rho must be nonzero")
    if int(n) != n or n == 0:
        raise ValueError("alpha branch n must be a nonzero integer")
    if n < 0:
        return -solve_alpha(epsilon, rho, -n)
    center = n * math.pi
    g, dg = _alpha_residual(epsilon, rho)
    # eps*alpha*cot(alpha) ~ eps*alpha/(alpha - n pi) near the pole
    delta0 = epsilon * center / abs(rho)
    if rho > 0:
        a = center + min(1e-3 * delta0, 0.25)
        b = center + 0.5 * math.pi
        x0 = center + delta0
    else:
        a = center - 0.5 * math.pi
        b = center - min(1e-3 * delta0, 0.25)
        x0 = center - delta0
    alpha = newton_bisect(g, dg, a, b, x0=x0 if a < x0 < b else None)
    resid = abs(epsilon / tanc(alpha) - rho)
    if resid > max(RESIDUAL_RTOL * abs(rho), _ulp_floor(dg, alpha)):
        raise NoConvergence(f"alpha residual {resid:.3g} above tolerance")
    if abs(math.cos(alpha)) < COS_ALPHA_MIN:
        raise CosineTooSmall(f"|cos(alpha)| = {abs(math.cos(alpha)):.3g} < {COS_ALPHA_MIN}")
    return alpha


# --------------------------------------------------------------------------
# beta


def _dsinc(b):
    if abs(b) < 1e-3:
        return -b / 3.0 + b ** 3 / 30.0
    return (math.cos(b) - sinc(b)) / b


def _dpsi(b):
    if abs(b) < 1e-3:
        return -b / 5.0 + b ** 3 / 70.0
    return 3.0 * math.sin(b) / (b * b) - 3.0 * psi(b) / b


def _beta_residual(epsilon, rho):
    # pole-free form of eps sinc/psi - rho
    def g(b):
        return epsilon * sinc(b) - rho * psi(b)

    def dg(b):
        return epsilon * _dsinc(b) - rho * _dpsi(b)

    return g, dg


def _scan_bracket(g, start, step, reach):
    """Nearest sign change of ``g`` to ``start`` on a grid, searched outwards."""
    g0 = g(start)
    if g0 == 0:
        return start, start
    left_x, left_g = start, g0
    right_x, right_g = start, g0
    nsteps = int(math.ceil(reach / step))
    for i in range(1, nsteps + 1):
        x = start + i * step
        gx = g(x)
        if np.sign(gx) != np.sign(right_g):
            return right_x, x
        right_x, right_g = x, gx
        x = start - i * step
        if x <= 0:
            continue
        gx = g(x)
        if np.sign(gx) != np.sign(left_g):
            return x, left_x
        left_x, left_g = x, gx
    raise NoRootInBracket(f"no root within {reach:g} of beta_start = {start:g}")


def solve_beta(epsilon: float, rho: float, beta_start: float,
               reach: Optional[float] = None) -> float:
    """Solve eps sinc(beta) / psi(beta) = rho for the root nearest ``beta_start``.

    The equation is rewritten as eps sinc(beta) - rho psi(beta) = 0, which has
    no poles; a grid scan outward from ``beta_start`` locates the nearest sign
    change and the safeguarded Newton iteration refines it.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if rho == 0:
        raise ValueError("rho must be nonzero")
    if beta_start == 0:
        raise ValueError("beta_start must be nonzero")
    sign = 1.0 if beta_start > 0 else -1.0
    start = abs(beta_start)
    g, dg = _beta_residual(epsilon, rho)
    step = 0.02 * max(1.0, min(start, 10.0))
    if reach is None:
        reach = 4 * math.pi + start
    a, b = _scan_bracket(g, start, step, reach)
    beta = a if a == b else newton_bisect(g, dg, a, b, x0=0.5 * (a + b))
    ps = psi(beta)
    if abs(ps) < PSI_GUARD:
        raise PsiTooSmall(f"|psi(beta)| = {abs(ps):.3g} below {PSI_GUARD:g}")

    def f(x):
        return epsilon * sinc(x) / psi(x) - rho

    beta = _best_float(f, beta)
    resid = abs(f(beta))
    floor = 2.0 * abs(dg(beta) / ps) * np.spacing(beta)
    if resid > max(RESIDUAL_RTOL * abs(rho), floor):
        raise NoConvergence(f"beta residual {resid:.3g} above tolerance")
    return sign * beta


# --------------------------------------------------------------------------
# stability


@dataclass(frozen=True, eq=False)
class StabilityReport:
    """Per-mode amplification data of the linear filtered leapfrog recursion.

    mu[k] = (eps tau/h^2) sinc(alpha) (cos(k h) - phi(beta)) / psi(beta); the
    two roots of z^2 - 2 i mu z - 1 are i mu +- sqrt(1 - mu^2).
    """

    wavenumbers: np.ndarray
    mu: np.ndarray
    mu_max: float
    bound_value: float
    eigen_moduli_max: float
    eigen_moduli_max_deviation: float
    marginal_modes: int

    @property
    def stable(self) -> bool:
        return self.mu_max < 1.0


def stability_report(disc: Discretization, length: Optional[float] = None) -> StabilityReport:
    if disc.M < 2:
        raise ValueError("stability report needs M >= 2")
    L = disc.length if length is None else length
    M = disc.M
    j = np.arange(-(M // 2), -(M // 2) + M)
    k = 2 * np.pi * j / L
    f = disc.filters
    factor = disc.epsilon * disc.tau / disc.h ** 2 * f.sinc_alpha / f.psi_beta
    mu = factor * (np.cos(2 * np.pi * j / M) - f.phi_beta)
    bound = abs(factor) * (1.0 + abs(f.phi_beta))
    root = np.sqrt((1.0 - mu * mu).astype(complex))
    lam_p = 1j * mu + root
    lam_m = 1j * mu - root
    moduli = np.concatenate([np.abs(lam_p), np.abs(lam_m)])
    marginal = int(np.count_nonzero(np.abs(np.abs(mu) - 1.0) <= 1e-12))
    return StabilityReport(
        wavenumbers=k,
        mu=mu,
        mu_max=float(np.max(np.abs(mu))),
        bound_value=float(bound),
        eigen_moduli_max=float(np.max(moduli)),
        eigen_moduli_max_deviation=float(np.max(np.abs(moduli - 1.0))),
        marginal_modes=marginal,
    )


# --------------------------------------------------------------------------
# planning


@dataclass(frozen=True)
class PlanRequest:
    """Planner inputs.

    ``target_M`` (when given) sets the starting value of beta from the desired
    mesh width L/target_M; otherwise beta starts at kappa tau / (m eps) with
    ``m = beta_branch``. ``grid`` selects how the solved mesh width is reconciled
    with an integer number of grid points:

    ``"stretch"``
        keep h and set the period to M h (domain re-centred); rho is exact.
    ``"snap"``
        keep the period, h = L/M, and pick M near the target so that the
        resulting rho_eff is closest to ``rho_target``.
    """

    setup: PhysicalSetup
    rho_target: float = 4.0
    alpha_branch: int = 1
    beta_branch: int = 1
    theta_max: float = 0.95
    target_M: Optional[int] = None
    scheme: str = "crank_nicolson"
    grid: str = "stretch"
    snap_window: float = 0.25

    def __post_init__(self):
        if self.rho_target == 0:
            raise ValueError("rho_target must be nonzero")
        if not 0 <= self.theta_max < 1:
            raise ValueError("theta_max must lie in [0, 1)")
        if int(self.alpha_branch) != self.alpha_branch or self.alpha_branch <= 0:
            raise ValueError("alpha_branch must be a positive integer")
        if int(self.beta_branch) != self.beta_branch or self.beta_branch == 0:
            raise ValueError("beta_branch must be a nonzero integer")
        if self.target_M is not None and self.target_M < 2:
            raise ValueError("target_M must be at least 2")
        if self.scheme not in ("leapfrog", "crank_nicolson"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.grid not in ("stretch", "snap"):
            raise ValueError(f"unknown grid policy {self.grid!r}")


@dataclass(frozen=True)
class PlanResult:
    setup: PhysicalSetup
    disc: Discretization
    residual_alpha: Optional[float]
    residual_beta: Optional[float]
    stability: StabilityReport
    accepted: bool
    rho_target: Optional[float] = None
    mode: str = "planned"
    notes: tuple = field(default_factory=tuple)


def _rho_alpha(epsilon, kappa, tau):
    return epsilon / tanc(filter_alpha(kappa, tau, epsilon))


def _rho_beta(epsilon, kappa, h):
    b = filter_beta(kappa, h, epsilon)
    return epsilon * sinc(b) / psi(b)


def _ulp_neighbours(x, span):
    out = [x]
    lo = hi = x
    for _ in range(span):
        lo = np.nextafter(lo, -np.inf)
        hi = np.nextafter(hi, np.inf)
        out.extend([lo, hi])
    return np.array(sorted(out))


def _polish(epsilon, kappa, tau, h, vary_h, span=40):
    """Pick (tau, h) among neighbouring doubles so that both sides of the
    consistency relation agree as closely as floating point allows."""
    taus = _ulp_neighbours(tau, span)
    ra = np.array([_rho_alpha(epsilon, kappa, t) for t in taus])
    if vary_h:
        hs = _ulp_neighbours(h, span)
    else:
        hs = np.array([h])
    rb = np.array([_rho_beta(epsilon, kappa, x) for x in hs])
    gap = np.abs(ra[:, None] - rb[None, :])
    i, j = np.unravel_index(np.argmin(gap), gap.shape)
    if vary_h:
        rho_eff = 0.5 * (ra[i] + rb[j])
    else:
        rho_eff = rb[j]
    return float(taus[i]), float(hs[j]), float(rho_eff)


def _snap_grid(req, epsilon, kappa, h0):
    setup = req.setup
    L = setup.length
    M0 = req.target_M if req.target_M is not None else max(2, int(round(L / h0)))
    lo = max(2, int(math.floor(M0 * (1 - req.snap_window))))
    hi = int(math.ceil(M0 * (1 + req.snap_window)))
    best = None
    for M in range(lo, hi + 1):
        h = L / M
        b = filter_beta(kappa, h, epsilon)
        ps = psi(b)
        if abs(ps) < PSI_GUARD:
            continue
        rho = epsilon * sinc(b) / ps
        if np.sign(rho) != np.sign(req.rho_target):
            continue
        try:
            alpha = solve_alpha(epsilon, rho, req.alpha_branch)
        except (CosineTooSmall, NoConvergence, NoRootInBracket):
            continue
        if req.scheme == "leapfrog":
            tau = 2 * alpha * epsilon / kappa ** 2
            trial = Discretization(M=M, N=1, h=h, tau=tau, epsilon=epsilon, kappa=kappa)
            if stability_report(trial, L).bound_value > req.theta_max:
                continue
        score = abs(math.log(abs(rho / req.rho_target)))
        if best is None or score < best[0]:
            best = (score, M, h, rho, alpha)
    if best is None:
        raise NoRootInBracket(f"no admissible M in [{lo}, {hi}] for the snap policy")
    return best[1:]


def plan(request: PlanRequest, raise_on_reject: bool = True) -> PlanResult:
    """Solve the consistency relation and build a Discretization.

    Steps: alpha on branch n for the target rho (provisional tau); beta from
    its starting value; integer grid (stretch or snap policy); tau and h
    polished at the ulp level so both sides of the relation agree; N =
    round(T / tau) with tau kept, so the realised final time is N tau; finally
    the stability report. Raises StabilityViolation for a leapfrog plan whose
    bound exceeds ``theta_max`` unless ``raise_on_reject`` is false.
    """
    setup = request.setup
    eps, kappa = setup.epsilon, setup.kappa
    akappa = abs(kappa)
    rho = request.rho_target
    notes = []

    alpha0 = solve_alpha(eps, rho, request.alpha_branch)
    tau0 = 2 * alpha0 * eps / kappa ** 2
    if request.target_M is not None:
        beta_start = akappa * setup.length / (request.target_M * eps)
    else:
        beta_start = akappa * tau0 / (request.beta_branch * eps)
    beta0 = abs(solve_beta(eps, rho, beta_start))
    h0 = beta0 * eps / akappa

    if request.grid == "stretch":
        M = max(2, int(round(setup.length / h0)))
        tau, h, rho_eff = _polish(eps, kappa, tau0, h0, vary_h=True)
        length = M * h
        center = 0.5 * (setup.domain_left + setup.domain_right)
        left = center - 0.5 * length
        new_setup = setup.replace(domain_left=left, domain_right=left + length)
        if abs(length - setup.length) > 0:
            notes.append(f"period adjusted from {setup.length:.17g} to {length:.17g}")
    else:
        M, h, rho_snap, alpha_snap = _snap_grid(request, eps, kappa, h0)
        tau_snap = 2 * alpha_snap * eps / kappa ** 2
        tau, h, rho_eff = _polish(eps, kappa, tau_snap, h, vary_h=False)
        new_setup = setup
        notes.append(f"rho_eff = {rho_eff:.17g} (target {rho:g})")

    N = max(1, int(round(setup.final_time / tau)))
    final_time = N * tau
    if final_time != setup.final_time:
        notes.append(f"final time realised as N*tau = {final_time:.17g}")
    new_setup = new_setup.replace(final_time=final_time)

    disc = Discretization(M=M, N=N, h=h, tau=tau, epsilon=eps, kappa=kappa,
                          rho_eff=rho_eff, theta_bound=request.theta_max)
    res_a, res_b = disc.consistency_residuals()
    stab = stability_report(disc, new_setup.length)
    tol = RESIDUAL_RTOL * abs(rho_eff)
    residual_ok = res_a <= tol and res_b <= tol
    if not residual_ok:
        notes.append("consistency residuals above 1e-12 relative")
    if abs(disc.filters.cos_alpha) < COS_ALPHA_MIN:
        raise CosineTooSmall(f"|cos(alpha)| = {abs(disc.filters.cos_alpha):.3g}")
    stable_ok = request.scheme != "leapfrog" or stab.bound_value <= request.theta_max
    result = PlanResult(setup=new_setup, disc=disc, residual_alpha=res_a, residual_beta=res_b,
                        stability=stab, accepted=residual_ok and stable_ok, rho_target=rho,
                        mode=request.grid, notes=tuple(notes))
    if not stable_ok and raise_on_reject:
        raise StabilityViolation(
            f"stability bound {stab.bound_value:.4g} exceeds theta_max = {request.theta_max:g}; "
            "decrease tau relative to h (smaller alpha branch n or coarser target_M)",
            result=result)
    return result


def plan_direct(setup: PhysicalSetup, h: float, tau: float) -> PlanResult:
    """Use (h, tau) as given (snapped to integer M, N); no consistency check."""
    disc = Discretization.direct(setup, h, tau)
    setup = setup.replace(final_time=disc.final_time)
    stab = stability_report(disc, setup.length)
    return PlanResult(setup=setup, disc=disc, residual_alpha=None, residual_beta=None,
                      stability=stab, accepted=True, mode="direct")


def one_step_form(setup: PhysicalSetup, disc: Discretization):
    """Discretization for the one-step Crank-Nicolson form.

    A one-step CN step of size 2*tau uses the filters of tau, so a planned
    two-step mesh maps to steps of size 2*tau with the same alpha; N is
    re-rounded and the final time re-realised.
    """
    tau1 = 2.0 * disc.tau
    N1 = max(1, int(round(setup.final_time / tau1)))
    d1 = Discretization(M=disc.M, N=N1, h=disc.h, tau=tau1, epsilon=disc.epsilon,
                        kappa=disc.kappa, rho_eff=disc.rho_eff, theta_bound=disc.theta_bound)
    return setup.replace(final_time=N1 * tau1), d1
