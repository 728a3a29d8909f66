import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oscifd import (ConstantEnvelope, Discretization, GaussianEnvelope, PeriodicityWarning,
                    PhysicalSetup, TabulatedEnvelope, envelope_from_dict, phi, psi,
                    sample_initial_data, sinc, tanc)
from oscifd.core import FilterValues, filter_alpha, filter_beta
from oscifd.errors import PoleError

mpmath.mp.dps = 40


def mp_psi(z):
    z = mpmath.mpf(z)
    return 3 * (mpmath.sin(z) - z * mpmath.cos(z)) / z ** 3


# --- filter functions: spec examples ------------------------------------


def test_sinc_examples():
    assert sinc(0.0) == 1.0
    assert abs(sinc(math.pi)) < 1e-16
    assert sinc(math.pi / 2) == pytest.approx(2 / math.pi, rel=1e-15)


def test_tanc_examples():
    assert tanc(0.0) == 1.0
    assert tanc(math.pi / 4) == pytest.approx(4 / math.pi, rel=1e-15)
    with pytest.raises(PoleError):
        tanc(math.pi / 2)


def test_tanc_pole_is_a_value_error():
    with pytest.raises(ValueError):
        tanc(np.array([0.1, 3 * math.pi / 2]))


def test_phi_examples():
    assert phi(0.0) == 1.0
    assert phi(math.pi) == pytest.approx(0.5, rel=1e-15)
    # phi(z) = 1 - z^4/120 + O(z^6)
    assert phi(0.1) == pytest.approx(1 - 0.1 ** 4 / 120, abs=1e-9)
    assert phi(0.1) == pytest.approx(0.9999991670634094, rel=1e-15)


def test_psi_examples():
    assert psi(0.0) == 1.0
    assert psi(math.pi) == pytest.approx(3 / math.pi ** 2, rel=1e-15)
    assert psi(0.01) == pytest.approx(1 - 1e-4 / 10, rel=1e-10)


@pytest.mark.parametrize("z", [1e-7, 1e-4, 3e-3, 0.5, 0.999, 1.0, 1.001, 2.5, 4.4934, 7.7259])
def test_psi_matches_high_precision(z):
    assert psi(z) == pytest.approx(float(mp_psi(z)), rel=1e-14)


def test_filters_vectorise_and_keep_scalars():
    z = np.array([0.0, 0.5, 2.0])
    for f in (sinc, phi, psi, tanc):
        out = f(z)
        assert isinstance(out, np.ndarray) and out.shape == (3,)
        assert isinstance(f(0.5), float)
        np.testing.assert_array_equal(out, [f(x) for x in z])


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=0, max_value=50, allow_nan=False))
def test_filters_are_even(z):
    for f in (sinc, phi, psi):
        assert f(z) == f(-z)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-3, max_value=30))
def test_phi_minus_cos_identity(z):
    lhs = phi(z) - math.cos(z)
    rhs = psi(z) * z * z / 2
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-15)


def test_filter_values_invariants():
    f = FilterValues.evaluate(0.3, 2.0)
    assert f.phi_beta - f.cos_beta == pytest.approx(f.psi_beta * 2.0, rel=1e-14)
    assert abs(f.sinc_alpha) <= 1
    g = FilterValues.evaluate(math.pi / 2, 1.0)
    assert math.isnan(g.tanc_alpha)


# --- setup and mesh ----------------------------------------------------------


def test_setup_validation():
    with pytest.raises(ValueError):
        PhysicalSetup(0.0, 1.0, 1.0, -1, 1, 1)
    with pytest.raises(ValueError):
        PhysicalSetup(1.0, 0.0, 1.0, -1, 1, 1)
    with pytest.raises(ValueError):
        PhysicalSetup(1.0, 1.0, 1.0, 1, -1, 1)
    with pytest.raises(ValueError):
        PhysicalSetup(1.0, 1.0, 1.0, -1, 1, 0)
    linear = PhysicalSetup(1.0, 1.0, 0.0, -1, 1, 1)
    assert linear.lam == 0 and linear.length == 2
    assert linear.replace(lam=2.0).lam == 2.0


def test_discretization_invariants():
    s = PhysicalSetup(1e-3, 2.0, 1.0, -4.0, 4.0, 1.0)
    d = Discretization.direct(s, 0.01, 0.003)
    assert d.M == 800 and d.h * d.M == pytest.approx(8.0, rel=1e-15)
    assert d.N * d.tau == pytest.approx(1.0, rel=1e-15)
    assert d.alpha == filter_alpha(2.0, d.tau, 1e-3) == 0.5 * 4.0 * d.tau / 1e-3
    assert d.beta == filter_beta(2.0, d.h, 1e-3) == 2.0 * d.h / 1e-3
    copy = Discretization(M=d.M, N=d.N, h=d.h, tau=d.tau, epsilon=d.epsilon, kappa=d.kappa)
    assert copy == d
    assert d.consistency_residuals() is None
    with pytest.raises(ValueError):
        Discretization(M=0, N=1, h=1.0, tau=1.0, epsilon=1.0, kappa=1.0)


def test_with_tau_reevaluates_filters():
    d = Discretization(M=10, N=4, h=0.1, tau=0.2, epsilon=1.0, kappa=1.0)
    half = d.with_tau(0.1)
    assert half.alpha == pytest.approx(0.5 * d.alpha)
    assert half.filters.sinc_alpha == pytest.approx(sinc(half.alpha))


# --- envelopes and initial data -------------------------------------------


def test_envelopes():
    g = GaussianEnvelope()
    assert g(0.0) == 1.0
    np.testing.assert_allclose(g(np.array([1.0, -2.0])), np.exp([-1.0, -4.0]))
    assert ConstantEnvelope(2.0)(np.zeros(3)).tolist() == [2.0, 2.0, 2.0]
    x = np.linspace(0, 2 * np.pi, 16, endpoint=False)
    tab = TabulatedEnvelope(np.cos(x), 0.0, 2 * np.pi)
    y = np.array([0.3, 1.7, 5.0])
    np.testing.assert_allclose(tab(y), np.cos(y), atol=1e-13)


def test_envelope_from_dict():
    assert envelope_from_dict({"kind": "gaussian", "sigma": 2.0}) == GaussianEnvelope(sigma=2.0)
    assert envelope_from_dict({"kind": "constant", "value": 1.0}) == ConstantEnvelope(1.0)
    with pytest.raises(ValueError):
        envelope_from_dict({"kind": "gaussian", "sigm": 2.0})
    with pytest.raises(ValueError):
        envelope_from_dict({"kind": "boxcar"})


def test_sample_plane_wave_quarter_period():
    s = PhysicalSetup(1.0, 1.0, 1.0, 0.0, 2 * np.pi, 1.0, ConstantEnvelope(1.0))
    d = Discretization(M=4, N=1, h=np.pi / 2, tau=1.0, epsilon=1.0, kappa=1.0)
    u = sample_initial_data(s, d)
    np.testing.assert_allclose(u.values, [1, 1j, -1, -1j], atol=1e-15)
    assert u.time == 0


def test_sample_zero_and_gaussian():
    s = PhysicalSetup(1e-2, 1.0, 1.0, -4.0, 4.0, 1.0, ConstantEnvelope(0.0))
    d = Discretization.direct(s, 0.01, 0.1)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert not np.any(sample_initial_data(s, d).values)
    g = sample_initial_data(s.replace(envelope=GaussianEnvelope()), d)
    x = -4.0 + d.h * np.arange(d.M)
    np.testing.assert_allclose(np.abs(g.values), np.exp(-x ** 2), rtol=1e-14)


def test_periodicity_warning():
    s = PhysicalSetup(0.3, 1.0, 1.0, 0.0, 1.0, 1.0, ConstantEnvelope(1.0))
    d = Discretization.direct(s, 0.1, 0.1)
    with pytest.warns(PeriodicityWarning):
        sample_initial_data(s, d)


def test_grid_function_is_read_only():
    s = PhysicalSetup(1.0, 1.0, 1.0, 0.0, 2 * np.pi, 1.0, ConstantEnvelope(1.0))
    d = Discretization(M=4, N=1, h=np.pi / 2, tau=1.0, epsilon=1.0, kappa=1.0)
    u = sample_initial_data(s, d)
    with pytest.raises(ValueError):
        u.values[0] = 0
