"""Fourier-collocation / Strang-splitting reference solver.

Sub-flows of i eps u_t + eps^2/2 u_xx = lam eps |u|^2 u:

    nonlinear:  u <- u exp(-i lam |u|^2 t)            (pointwise, |u| fixed)
    linear:     u_hat_k <- exp(-i eps k^2 t / 2) u_hat_k,   k = 2 pi j / L

A Strang step is half nonlinear, full linear, half nonlinear.
"""
from __future__ import annotations

import warnings

import numpy as np

from .core import GridFunction, PhysicalSetup
from .errors import UnsupportedGridSize

__all__ = ["wavenumbers", "strang_step", "run_reference", "ResolutionWarning",
           "points_per_wavelength"]


class ResolutionWarning(UserWarning):
    pass


def wavenumbers(M: int, length: float) -> np.ndarray:
    return 2 * np.pi * np.fft.fftfreq(M, d=length / M)


def points_per_wavelength(setup: PhysicalSetup, M: int) -> float:
    wavelength = 2 * np.pi * setup.epsilon / abs(setup.kappa)
    return wavelength / (setup.length / M)


def _check(u: GridFunction):
    if u.M < 2:
        raise UnsupportedGridSize(f"grid of size {u.M} is not supported")


def _nonlinear(v, lam, t):
    if lam == 0:
        return v
    return v * np.exp(-1j * lam * (v.real ** 2 + v.imag ** 2) * t)


def strang_step(u: GridFunction, setup: PhysicalSetup, tau_ref: float) -> GridFunction:
    _check(u)
    k = wavenumbers(u.M, setup.length)
    lin = np.exp(-0.5j * setup.epsilon * k * k * tau_ref)
    v = _nonlinear(u.values, setup.lam, 0.5 * tau_ref)
    v = np.fft.ifft(lin * np.fft.fft(v))
    v = _nonlinear(v, setup.lam, 0.5 * tau_ref)
    return GridFunction(v, u.time + tau_ref)


def run_reference(u0: GridFunction, setup: PhysicalSetup, tau_ref: float,
                  T: float) -> GridFunction:
    """Compose Strang steps up to time T.

    The step count is round(T / tau_ref) and the step is adjusted to
    T / count so the final time is hit exactly. Adjacent half nonlinear
    flows are merged.
    """
    _check(u0)
    if T == 0:
        return u0
    if not tau_ref > 0:
        raise ValueError("tau_ref must be positive")
    if points_per_wavelength(setup, u0.M) < 4:
        warnings.warn(
            f"reference grid resolves {points_per_wavelength(setup, u0.M):.2f} points per "
            "wavelength (< 4); the reference is not valid for this epsilon",
            ResolutionWarning, stacklevel=2)
    n = max(1, int(round(T / tau_ref)))
    dt = T / n
    k = wavenumbers(u0.M, setup.length)
    lin = np.exp(-0.5j * setup.epsilon * k * k * dt)
    lam = setup.lam
    v = _nonlinear(u0.values, lam, 0.5 * dt)
    for i in range(n):
        v = np.fft.ifft(lin * np.fft.fft(v))
        v = _nonlinear(v, lam, dt if i < n - 1 else 0.5 * dt)
    return GridFunction(v, u0.time + T)
