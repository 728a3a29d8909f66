"""Conserved quantities, norms, error measurement and order fitting."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .core import Discretization, GridFunction, PhysicalSetup
from .errors import DegenerateFit, GridMisaligned

__all__ = [
    "discrete_mass",
    "discrete_energy",
    "weighted_mass",
    "weighted_energy",
    "fourier_coefficients",
    "wiener_norm",
    "two_level_wiener_norm",
    "max_error",
    "fit_order",
    "ConservationSeries",
    "conservation_series",
]


def _values(u) -> np.ndarray:
    return u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=complex)


def discrete_mass(u) -> float:
    """sum_j |u_j|^2 (no h weight)."""
    v = _values(u)
    return float(np.sum(v.real ** 2 + v.imag ** 2))


def discrete_energy(u, setup: PhysicalSetup, disc: Discretization) -> float:
    """eps^2/2 sum |u_{j+1}-u_j|^2/(h^2 psi(beta)) + lam eps/2 sum |u_j|^4/tanc(alpha),
    with periodic wrap."""
    v = _values(u)
    f = disc.filters
    eps = setup.epsilon
    grad = np.roll(v, -1) - v
    kinetic = 0.5 * eps ** 2 * np.sum(np.abs(grad) ** 2) / (disc.h ** 2 * f.psi_beta)
    if setup.lam == 0:
        return float(kinetic)
    potential = 0.5 * setup.lam * eps * np.sum(np.abs(v) ** 4) / f.tanc_alpha
    return float(kinetic + potential)


def weighted_mass(u, disc: Discretization) -> float:
    """h * discrete_mass, the quadrature of the continuous mass."""
    return disc.h * discrete_mass(u)


def weighted_energy(u, setup: PhysicalSetup, disc: Discretization) -> float:
    return disc.h * discrete_energy(u, setup, disc)


def fourier_coefficients(u) -> np.ndarray:
    """u_hat_k = (1/M) sum_j u_j exp(-2 pi i j k / M), numpy ordering."""
    v = _values(u)
    return np.fft.fft(v) / v.size


def wiener_norm(u) -> float:
    """Discrete surrogate of the Wiener algebra norm: sum_k |u_hat_k|."""
    return float(np.sum(np.abs(fourier_coefficients(u))))


def two_level_wiener_norm(u_next, u_curr) -> float:
    """sum_k ||(u_hat_k^{n+1}, u_hat_k^n)||_2, the norm on pairs of levels."""
    a = fourier_coefficients(u_next)
    b = fourier_coefficients(u_curr)
    return float(np.sum(np.sqrt(np.abs(a) ** 2 + np.abs(b) ** 2)))


def max_error(u, reference: Union[GridFunction, np.ndarray, Callable], x=None) -> float:
    """max_j |u_j - ref(x_j)|.

    ``reference`` may be a grid function on a grid whose size is a multiple of
    len(u) (sharing the left endpoint; it is subsampled), or a callable
    evaluated at the nodes ``x``.
    """
    v = _values(u)
    if callable(reference) and not isinstance(reference, (GridFunction, np.ndarray)):
        if x is None:
            raise ValueError("an analytic reference needs the node coordinates x")
        ref = np.asarray(reference(np.asarray(x)), dtype=complex)
    else:
        r = _values(reference)
        if r.size % v.size != 0:
            raise GridMisaligned(f"reference size {r.size} is not a multiple of {v.size}")
        ref = r[:: r.size // v.size]
    return float(np.max(np.abs(v - ref))) if v.size else 0.0


def fit_order(hs: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h); needs three or more pairs."""
    hs = np.asarray(hs, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if hs.size != errors.size:
        raise ValueError("hs and errors must have equal length")
    if hs.size < 3:
        raise DegenerateFit("need at least three points")
    if np.any(hs <= 0) or np.any(errors <= 0):
        raise ValueError("hs and errors must be positive")
    lh = np.log(hs)
    if np.ptp(lh) == 0:
        raise DegenerateFit("all h values coincide")
    le = np.log(errors)
    lc = lh - lh.mean()
    return float(np.dot(lc, le - le.mean()) / np.dot(lc, lc))


@dataclass(frozen=True, eq=False)
class ConservationSeries:
    times: np.ndarray
    mass: np.ndarray
    energy: np.ndarray
    rel_mass_drift: float
    rel_energy_drift: float

    def rel_mass_error(self) -> np.ndarray:
        return np.abs(self.mass - self.mass[0]) / abs(self.mass[0])

    def rel_energy_error(self) -> np.ndarray:
        return np.abs(self.energy - self.energy[0]) / abs(self.energy[0])


def _drift(q, chains):
    q = np.asarray(q, dtype=float)
    if q.size == 0:
        return np.zeros(0), 0.0
    ref = np.empty_like(q)
    for c in range(chains):
        ref[c::chains] = q[c] if c < q.size else 0.0
    scale = np.abs(ref)
    with np.errstate(invalid="ignore", divide="ignore"):
        rel = np.where(scale > 0, np.abs(q - ref) / np.where(scale > 0, scale, 1.0), 0.0)
    return rel, float(np.max(rel))


def conservation_series(times, states, setup: PhysicalSetup, disc: Discretization,
                        chains: int = 1) -> ConservationSeries:
    """Mass and energy along a trajectory.

    ``chains=2`` measures drift separately along even and odd steps, which is
    what the two-step Crank-Nicolson map conserves.
    """
    times = np.asarray(times, dtype=float)
    mass = np.array([discrete_mass(u) for u in states])
    energy = np.array([discrete_energy(u, setup, disc) for u in states])
    _, dm = _drift(mass, chains)
    _, de = _drift(energy, chains)
    return ConservationSeries(times, mass, energy, dm, de)
