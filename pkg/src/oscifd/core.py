"""Problem data, mesh data, filter functions and initial-data sampling.

The four filter functions are

    sinc(z) = sin(z) / z
    tanc(z) = tan(z) / z
    phi(z)  = 3/2 sinc(z) - 1/2 cos(z)
    psi(z)  = (phi(z) - cos(z)) / (z**2 / 2)

All accept scalars or arrays and are even in ``z``.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import PoleError

__all__ = [
    "SERIES_THRESHOLD",
    "POLE_GUARD",
    "sinc",
    "tanc",
    "phi",
    "psi",
    "ConstantEnvelope",
    "GaussianEnvelope",
    "TabulatedEnvelope",
    "envelope_from_dict",
    "PhysicalSetup",
    "FilterValues",
    "Discretization",
    "GridFunction",
    "PeriodicityWarning",
    "nodes",
    "sample_initial_data",
]

SERIES_THRESHOLD = 1e-4
POLE_GUARD = 1e-8
# sin z - z cos z is summed as a power series below this |z|
_SINMZCOS_SERIES_LIMIT = 1.0

ArrayLike = Union[float, np.ndarray]


def _scalar_or_array(x, like):
    if np.ndim(like) == 0:
        return float(x)
    return x


def sinc(z: ArrayLike) -> ArrayLike:
    a = np.abs(np.asarray(z, dtype=float))
    small = a < SERIES_THRESHOLD
    safe = np.where(small, 1.0, a)
    z2 = a * a
    out = np.where(small, 1.0 - z2 / 6.0 + z2 * z2 / 120.0, np.sin(safe) / safe)
    return _scalar_or_array(out, z)


def tanc(z: ArrayLike) -> ArrayLike:
    """tan(z)/z; raises PoleError when |cos z| <= POLE_GUARD."""
    a = np.abs(np.asarray(z, dtype=float))
    c = np.cos(a)
    if np.any(np.abs(c) <= POLE_GUARD):
        raise PoleError(f"tanc evaluated within the pole guard (|cos z| <= {POLE_GUARD:g})")
    small = a < SERIES_THRESHOLD
    safe = np.where(small, 1.0, a)
    z2 = a * a
    out = np.where(small, 1.0 + z2 / 3.0 + 2.0 * z2 * z2 / 15.0, np.tan(safe) / safe)
    return _scalar_or_array(out, z)


def phi(z: ArrayLike) -> ArrayLike:
    a = np.abs(np.asarray(z, dtype=float))
    out = 1.5 * np.asarray(sinc(a)) - 0.5 * np.cos(a)
    return _scalar_or_array(out, z)


def _sin_minus_zcos(a: np.ndarray) -> np.ndarray:
    # sin z - z cos z = sum_{k>=1} (-1)^(k+1) 2k z^(2k+1) / (2k+1)!
    # The closed form loses digits to cancellation for small z.
    z2 = a * a
    term = a * z2 / 3.0  # k = 1
    total = term.copy()
    for k in range(2, 14):
        term = -term * z2 * (2 * k) / ((2 * k - 2) * (2 * k) * (2 * k + 1))
        total = total + term
    direct = np.sin(a) - a * np.cos(a)
    return np.where(a < _SINMZCOS_SERIES_LIMIT, total, direct)


def psi(z: ArrayLike) -> ArrayLike:
    a = np.abs(np.asarray(z, dtype=float))
    small = a < SERIES_THRESHOLD
    safe = np.where(small, 1.0, a)
    z2 = a * a
    series = 1.0 - z2 / 10.0 + z2 * z2 / 280.0
    # (phi - cos)/(z^2/2) = 3 (sin z - z cos z) / z^3
    direct = 3.0 * _sin_minus_zcos(safe) / (safe * safe * safe)
    out = np.where(small, series, direct)
    return _scalar_or_array(out, z)


# --------------------------------------------------------------------------
# envelope profiles a0(x)


@dataclass(frozen=True)
class ConstantEnvelope:
    value: complex = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.full(x.shape, complex(self.value))

    def to_dict(self):
        return {"kind": "constant", "value": complex(self.value).real}


@dataclass(frozen=True)
class GaussianEnvelope:
    """a0(x) = amplitude * exp(-sigma (x - center)**2)."""

    sigma: float = 1.0
    center: float = 0.0
    amplitude: float = 1.0

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return (self.amplitude * np.exp(-self.sigma * (x - self.center) ** 2)).astype(complex)

    def to_dict(self):
        return {"kind": "gaussian", "sigma": self.sigma, "center": self.center,
                "amplitude": self.amplitude}


@dataclass(frozen=True, eq=False)
class TabulatedEnvelope:
    """Samples on a uniform periodic grid over [left, right), evaluated off-grid
    by trigonometric interpolation."""

    values: np.ndarray
    left: float
    right: float

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("tabulated envelope needs a 1-D array of samples")
        object.__setattr__(self, "values", v)
        if not self.right > self.left:
            raise ValueError("tabulated envelope needs right > left")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        m = self.values.size
        length = self.right - self.left
        coef = np.fft.fft(self.values) / m
        j = np.fft.fftfreq(m, d=1.0 / m)
        if m % 2 == 0:
            # split the Nyquist coefficient symmetrically so real data stays real
            nyq = m // 2
            coef = np.concatenate([coef, [coef[nyq] / 2]])
            coef[nyq] /= 2
            j = np.concatenate([j, [nyq]])
        k = 2 * np.pi * j / length
        phase = np.exp(1j * np.multiply.outer(x.ravel() - self.left, k))
        return (phase @ coef).reshape(x.shape)

    def to_dict(self):
        return {"kind": "tabulated", "re": self.values.real.tolist(),
                "im": self.values.imag.tolist(), "left": self.left, "right": self.right}


def envelope_from_dict(spec: dict):
    """Build an envelope from a config mapping with a ``kind`` key."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "constant":
        allowed = {"value"}
        cls = ConstantEnvelope
    elif kind == "gaussian":
        allowed = {"sigma", "center", "amplitude"}
        cls = GaussianEnvelope
    elif kind == "tabulated":
        unknown = set(spec) - {"re", "im", "left", "right"}
        if unknown:
            raise ValueError(f"unknown envelope keys: {sorted(unknown)}")
        re = np.asarray(spec["re"], dtype=float)
        im = np.asarray(spec.get("im", np.zeros_like(re)), dtype=float)
        return TabulatedEnvelope(re + 1j * im, float(spec["left"]), float(spec["right"]))
    else:
        raise ValueError(f"unknown envelope kind {kind!r}")
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"unknown envelope keys: {sorted(unknown)}")
    return cls(**spec)


# --------------------------------------------------------------------------
# problem and mesh data


@dataclass(frozen=True)
class PhysicalSetup:
    """Data of i eps u_t + eps^2/2 u_xx = lam eps |u|^2 u on a periodic interval
    with u(0, x) = exp(i kappa x / eps) a0(x).

    ``lam = 0`` is accepted and gives the linear equation.
    """

    epsilon: float
    kappa: float
    lam: float
    domain_left: float
    domain_right: float
    final_time: float
    envelope: object = field(default_factory=lambda: GaussianEnvelope())

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.kappa == 0:
            raise ValueError("kappa must be nonzero")
        if not self.domain_right > self.domain_left:
            raise ValueError("domain_right must exceed domain_left")
        if not self.final_time > 0:
            raise ValueError("final_time must be positive")

    @property
    def length(self) -> float:
        return self.domain_right - self.domain_left

    def replace(self, **changes) -> "PhysicalSetup":
        kw = dict(epsilon=self.epsilon, kappa=self.kappa, lam=self.lam,
                  domain_left=self.domain_left, domain_right=self.domain_right,
                  final_time=self.final_time, envelope=self.envelope)
        kw.update(changes)
        return type(self)(**kw)


@dataclass(frozen=True)
class FilterValues:
    sinc_alpha: float
    tanc_alpha: float
    cos_alpha: float
    phi_beta: float
    psi_beta: float
    sinc_beta: float
    cos_beta: float

    @classmethod
    def evaluate(cls, alpha: float, beta: float) -> "FilterValues":
        """Filter values at (alpha, beta); tanc_alpha is NaN at a tan pole."""
        try:
            tc = tanc(alpha)
        except PoleError:
            tc = math.nan
        return cls(
            sinc_alpha=sinc(alpha),
            tanc_alpha=tc,
            cos_alpha=math.cos(alpha),
            phi_beta=phi(beta),
            psi_beta=psi(beta),
            sinc_beta=sinc(beta),
            cos_beta=math.cos(beta),
        )


def filter_alpha(kappa: float, tau: float, epsilon: float) -> float:
    return 0.5 * kappa * kappa * tau / epsilon


def filter_beta(kappa: float, h: float, epsilon: float) -> float:
    return kappa * h / epsilon


@dataclass(frozen=True)
class Discretization:
    """Mesh data. ``alpha`` and ``beta`` are always recomputed from ``tau`` and
    ``h`` with the same expression, so any copy reproduces them bitwise."""

    M: int
    N: int
    h: float
    tau: float
    epsilon: float
    kappa: float
    rho_eff: Optional[float] = None
    theta_bound: Optional[float] = None
    alpha: float = field(init=False)
    beta: float = field(init=False)
    filters: FilterValues = field(init=False, repr=False)

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 1:
            raise ValueError("M must be a positive integer")
        if int(self.N) != self.N or self.N < 0:
            raise ValueError("N must be a non-negative integer")
        if not (self.h > 0 and self.tau > 0):
            raise ValueError("h and tau must be positive")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N", int(self.N))
        a = filter_alpha(self.kappa, self.tau, self.epsilon)
        b = filter_beta(self.kappa, self.h, self.epsilon)
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "filters", FilterValues.evaluate(a, b))

    @classmethod
    def direct(cls, setup: PhysicalSetup, h: float, tau: float) -> "Discretization":
        """Mesh from user-given (h, tau), both snapped so that h*M = L and
        tau*N = T; no consistency condition is imposed."""
        M = max(1, int(round(setup.length / h)))
        N = max(1, int(round(setup.final_time / tau)))
        return cls(M=M, N=N, h=setup.length / M, tau=setup.final_time / N,
                   epsilon=setup.epsilon, kappa=setup.kappa)

    @property
    def final_time(self) -> float:
        return self.N * self.tau

    @property
    def length(self) -> float:
        return self.M * self.h

    def with_tau(self, tau: float, N: Optional[int] = None) -> "Discretization":
        return Discretization(M=self.M, N=self.N if N is None else N, h=self.h, tau=tau,
                              epsilon=self.epsilon, kappa=self.kappa,
                              rho_eff=self.rho_eff, theta_bound=self.theta_bound)

    def consistency_residuals(self):
        """(|eps/tanc(alpha) - rho|, |eps sinc(beta)/psi(beta) - rho|) with
        rho = rho_eff, or None when no target is stored."""
        if self.rho_eff is None:
            return None
        f = self.filters
        ra = abs(self.epsilon / f.tanc_alpha - self.rho_eff)
        rb = abs(self.epsilon * f.sinc_beta / f.psi_beta - self.rho_eff)
        return ra, rb


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Complex samples u_j at x_j = domain_left + j h, j = 0..M-1."""

    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.ndim != 1:
            raise ValueError("GridFunction values must be one-dimensional")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    @property
    def M(self) -> int:
        return self.values.size


class PeriodicityWarning(UserWarning):
    """Initial data is not continuous across the periodic wrap."""


def nodes(setup: PhysicalSetup, M: int) -> np.ndarray:
    h = setup.length / M
    return setup.domain_left + h * np.arange(M)


def sample_initial_data(setup: PhysicalSetup, disc: Discretization,
                        wrap_tol: float = 1e-8, support_tol: float = 1e-6) -> GridFunction:
    """Sample exp(i kappa x / eps) a0(x) on the grid of ``disc``.

    Warns with PeriodicityWarning if the carrier does not close over the
    period and the envelope is not negligible at the endpoints.
    """
    x = setup.domain_left + disc.h * np.arange(disc.M)
    a0 = setup.envelope(x)
    carrier = np.exp(1j * (setup.kappa / setup.epsilon) * x)
    mismatch = abs(np.exp(1j * setup.kappa * setup.length / setup.epsilon) - 1.0)
    edge = np.max(np.abs(setup.envelope(np.array([setup.domain_left, setup.domain_right]))))
    if mismatch > wrap_tol and edge > support_tol:
        warnings.warn(
            f"exp(i kappa L / eps) differs from 1 by {mismatch:.3g} and |a0| at the "
            f"boundary is {edge:.3g}; initial data is discontinuous at the wrap",
            PeriodicityWarning, stacklevel=2)
    return GridFunction(carrier * a0, 0.0)
