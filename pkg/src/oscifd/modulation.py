"""Geometric-optics oracle: exact envelope transport, dominant term, defects.

The envelope solves a_t + kappa a_x = -i lam |a|^2 a. Along characteristics
|a| is constant, so

    a(t, x) = a0(x - kappa t) exp(-i lam |a0(x - kappa t)|^2 t)

and the dominant term is v(t, x) = a(t, x) exp(i (kappa x - kappa^2 t / 2) / eps).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Discretization, GridFunction, PhysicalSetup
from .diagnostics import wiener_norm

__all__ = ["Envelope", "envelope_eval", "dominant_term", "DefectSample",
           "defect_leapfrog", "defect_cn", "dominant_grid_function", "defect_floor"]


@dataclass(frozen=True)
class Envelope:
    profile: object
    kappa: float
    lam: float
    period_left: float
    period: float

    @classmethod
    def from_setup(cls, setup: PhysicalSetup) -> "Envelope":
        return cls(setup.envelope, setup.kappa, setup.lam, setup.domain_left, setup.length)


def envelope_eval(env: Envelope, t: float, x):
    """a(t, x); characteristics are followed periodically."""
    x = np.asarray(x, dtype=float)
    foot = x - env.kappa * t
    foot = env.period_left + np.mod(foot - env.period_left, env.period)
    a0 = np.asarray(env.profile(foot), dtype=complex)
    if env.lam == 0 or t == 0:
        return a0
    return a0 * np.exp(-1j * env.lam * (a0.real ** 2 + a0.imag ** 2) * t)


def dominant_term(env: Envelope, epsilon: float, t: float, x):
    x = np.asarray(x, dtype=float)
    phase = (env.kappa * x - 0.5 * env.kappa ** 2 * t) / epsilon
    return envelope_eval(env, t, x) * np.exp(1j * phase)


def dominant_grid_function(setup: PhysicalSetup, disc: Discretization, t: float) -> GridFunction:
    x = setup.domain_left + disc.h * np.arange(disc.M)
    return GridFunction(dominant_term(Envelope.from_setup(setup), setup.epsilon, t, x), t)


@dataclass(frozen=True, eq=False)
class DefectSample:
    values: np.ndarray
    max_norm: float
    wiener_norm: float
    consistent: bool


def _is_consistent(disc: Discretization, rtol=1e-10):
    res = disc.consistency_residuals()
    if res is None:
        return False
    return max(res) <= rtol * abs(disc.rho_eff)


def _sample(values, disc):
    return DefectSample(values=values, max_norm=float(np.max(np.abs(values))),
                        wiener_norm=wiener_norm(values), consistent=_is_consistent(disc))


def defect_leapfrog(env: Envelope, setup: PhysicalSetup, disc: Discretization,
                    t: float) -> DefectSample:
    """Residual of the filtered leapfrog scheme with the exact dominant term
    inserted, at all grid nodes. ``consistent`` is False when the mesh does not
    satisfy the consistency relation; the defect is then O(1)."""
    eps, tau, h = setup.epsilon, disc.tau, disc.h
    f = disc.filters
    x = setup.domain_left + h * np.arange(disc.M)
    v = dominant_term(env, eps, t, x)
    vp = dominant_term(env, eps, t + tau, x)
    vm = dominant_term(env, eps, t - tau, x)
    vr = dominant_term(env, eps, t, x + h)
    vl = dominant_term(env, eps, t, x - h)
    d = (1j * eps * (vp - vm) / (2 * tau * f.sinc_alpha)
         + 0.5 * eps ** 2 * (vr - 2 * f.phi_beta * v + vl) / (h ** 2 * f.psi_beta)
         - setup.lam * eps * np.abs(v) ** 2 * v / f.tanc_alpha)
    return _sample(d, disc)


def defect_cn(env: Envelope, setup: PhysicalSetup, disc: Discretization,
              t: float) -> DefectSample:
    """Same as defect_leapfrog for the filtered Crank-Nicolson scheme, with
    v~ = (v(t+tau) + v(t-tau)) / (2 cos alpha)."""
    eps, tau, h = setup.epsilon, disc.tau, disc.h
    f = disc.filters
    x = setup.domain_left + h * np.arange(disc.M)

    def tilde(xx):
        return (dominant_term(env, eps, t + tau, xx)
                + dominant_term(env, eps, t - tau, xx)) / (2 * f.cos_alpha)

    vp = dominant_term(env, eps, t + tau, x)
    vm = dominant_term(env, eps, t - tau, x)
    vt = tilde(x)
    d = (1j * eps * (vp - vm) / (2 * tau * f.sinc_alpha)
         + 0.5 * eps ** 2 * (tilde(x + h) - 2 * f.phi_beta * vt + tilde(x - h))
         / (h ** 2 * f.psi_beta)
         - setup.lam * eps * (np.abs(vm) ** 2 + np.abs(vp) ** 2) * vt / (2 * f.tanc_alpha))
    return _sample(d, disc)


def _envelope_xx(env: Envelope, t: float, x, dx: float = 1e-3):
    # fourth-order central difference; a0 is smooth, round-off ~ 1e-10
    c = (-1.0, 16.0, -30.0, 16.0, -1.0)
    acc = 0.0
    for k, w in zip(range(-2, 3), c):
        acc = acc + w * envelope_eval(env, t, x + k * dx)
    return acc / (12.0 * dx * dx)


def defect_floor(env: Envelope, setup: PhysicalSetup, disc: Discretization,
                 t: float) -> np.ndarray:
    """The part of the defect that does not vanish with tau and h.

    Expanding the filtered space difference of the dominant term leaves

        eps^2 cos(beta) / (2 psi(beta)) a_xx exp(i theta),

    which under the consistency relation equals (rho/2) beta cot(beta) eps a_xx:
    an O(eps) term. The remaining defect is O(tau^2 + h^2).
    """
    eps = setup.epsilon
    f = disc.filters
    x = setup.domain_left + disc.h * np.arange(disc.M)
    phase = (env.kappa * x - 0.5 * env.kappa ** 2 * t) / eps
    return (eps ** 2 * f.cos_beta / (2 * f.psi_beta)) * _envelope_xx(env, t, x) * np.exp(1j * phase)
