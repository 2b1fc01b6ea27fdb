import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptwell.boundstates import (
    NotABoundStateError,
    alpha_r_small_vi,
    bound_density,
    bound_states,
    bound_wavefunction,
    d_function,
    edge_density_factor,
    make_bound_state,
    normalization_constant,
    wavefunction_derivative,
)
from ptwell.core import InvalidParameterError, WellParams, decompose_alpha
from ptwell.oracle import piecewise_integral
from ptwell.transport import bound_flux

from reference_values import J0_9_15_1_HALF, RHO0_9_15_1_HALF


@pytest.fixture(scope="module")
def states():
    return bound_states(WellParams(9.0, 15.0, 1.0, 0.5), 12.0)


def _potential(p, x):
    return np.where(x < -p.b, p.v0 + 1j * p.vI, np.where(x > p.b, p.v0 - 1j * p.vI, 0.0))


def test_density_at_origin_matches_frozen_values(states):
    rho0 = [float(bound_density(s, 0.0)) for s in states[:3]]
    np.testing.assert_allclose(rho0, RHO0_9_15_1_HALF, rtol=1e-10)


def test_flux_at_origin_matches_frozen_values(states):
    j0 = [float(bound_flux(s, 0.0)) for s in states[:3]]
    np.testing.assert_allclose(j0, J0_9_15_1_HALF, rtol=1e-10)


def test_density_integrates_to_one(states):
    for s in states:
        L = s.params.b + 40 / s.alpha.alpha_r
        total = piecewise_integral(lambda x: float(bound_density(s, x)), s.params, L, tol=1e-12)
        assert total == pytest.approx(1.0, abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(v0=st.floats(1.0, 20.0), vI=st.floats(0.5, 20.0), lam=st.floats(0.0, 3.0), b=st.floats(0.5, 2.0))
def test_normalization_holds_across_parameters(v0, vI, lam, b):
    p = WellParams(v0, vI, b, lam)
    for s in bound_states(p, 8.0)[:3]:
        L = b + 40 / s.alpha.alpha_r
        total = piecewise_integral(lambda x: float(bound_density(s, x)), p, L, tol=1e-11)
        assert total == pytest.approx(1.0, abs=1e-8)


def test_half_size_constant_normalizes_to_one_half(states):
    # 4 alpha_R k^3 / D is half of the correct constant
    s = states[0]
    p = s.params
    ratio = 4 * s.alpha.alpha_r * s.k**3 / d_function(p, s.k) / s.c1_sq
    assert ratio == pytest.approx(0.5, rel=1e-14)


def test_closed_density_equals_modulus_squared(states):
    x = np.linspace(-4, 4, 801)
    for s in states:
        psi = wavefunction_derivative(s, x)
        np.testing.assert_allclose(bound_density(s, x), np.abs(psi) ** 2, rtol=1e-11, atol=1e-15)


def test_wavefunction_is_continuous_at_the_edges(states):
    for s in states:
        b = s.params.b
        for edge in (-b, b):
            lo, hi = np.nextafter(edge, -np.inf), np.nextafter(edge, np.inf)
            for order in (0, 1):
                a, c = wavefunction_derivative(s, [lo, hi], order)
                assert abs(a - c) <= 1e-10 * (1 + abs(a))


def test_derivative_jump_at_the_delta(states):
    for s in states:
        psi0 = complex(wavefunction_derivative(s, 0.0))
        plus = complex(wavefunction_derivative(s, 0.0, 1, side=+1))
        minus = complex(wavefunction_derivative(s, 0.0, 1, side=-1))
        assert plus - minus == pytest.approx(s.params.Lambda * psi0, abs=1e-12)
        mean = complex(wavefunction_derivative(s, 0.0, 1))
        assert mean == pytest.approx(0.5 * (plus + minus), abs=1e-14)


def test_schrodinger_equation_is_satisfied(states):
    x = np.concatenate([np.linspace(-3, -0.01, 150), np.linspace(0.01, 3, 150)])
    for s in states:
        p = s.params
        psi = wavefunction_derivative(s, x)
        d2 = wavefunction_derivative(s, x, 2)
        residual = -d2 + _potential(p, x) * psi - s.E * psi
        scale = np.max(np.abs(d2)) + s.E * np.max(np.abs(psi))
        assert np.max(np.abs(residual)) <= 1e-12 * scale


def test_pt_symmetry_of_the_wavefunction(states):
    x = np.linspace(0, 4, 201)
    for s in states:
        np.testing.assert_allclose(
            wavefunction_derivative(s, -x), np.conj(wavefunction_derivative(s, x)), rtol=1e-12, atol=1e-15
        )


def test_edge_density_factor(states):
    for s in states:
        b = s.params.b
        assert float(bound_density(s, b)) == pytest.approx(s.c1_sq * edge_density_factor(s), rel=1e-13)


def test_bound_wavefunction_bundles_psi_and_derivative(states):
    s = states[1]
    sample = bound_wavefunction(s, [0.3, 2.0])
    np.testing.assert_array_equal(sample.psi, wavefunction_derivative(s, [0.3, 2.0]))
    np.testing.assert_array_equal(sample.dpsi, wavefunction_derivative(s, [0.3, 2.0], 1))


def test_large_x_evaluation_is_finite(states):
    s = states[-1]
    with np.errstate(over="raise", invalid="raise"):
        vals = wavefunction_derivative(s, np.array([-500.0, 500.0]), 2)
    assert np.all(np.isfinite(vals))


def test_normalization_rejects_complex_and_nonpositive_k(well):
    with pytest.raises(InvalidParameterError):
        normalization_constant(well, 2.0 + 0.1j)
    with pytest.raises(InvalidParameterError):
        normalization_constant(well, 0.0)


def test_non_roots_are_rejected(well):
    with pytest.raises(NotABoundStateError):
        make_bound_state(well, 2.0)
    assert isinstance(NotABoundStateError("x"), ValueError)


def test_unchecked_state_skips_root_test(well):
    s = make_bound_state(well, 1.4466117648541856, check=False)
    assert s.E == pytest.approx(s.k**2)


@pytest.mark.parametrize("k", [1.0, 5.0])
def test_small_vi_alpha_asymptotics_are_second_order(k):
    vis = np.array([1e-2, 2e-2, 4e-2, 8e-2])
    errs = []
    for vI in vis:
        exact = decompose_alpha(9.0, vI, k)[0]
        approx = alpha_r_small_vi(WellParams(9.0, vI, 1.0), k)
        errs.append(abs(exact - approx) / exact)
    slope = np.polyfit(np.log(vis), np.log(errs), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.05)


def test_small_vi_asymptotics_are_singular_at_the_edge():
    with pytest.raises(InvalidParameterError):
        alpha_r_small_vi(WellParams(9.0, 0.1, 1.0), 3.0)


def test_hermitian_state_is_real_and_normalized():
    p = WellParams(9.0, 0.0, 1.0, 0.5)
    states = bound_states(p, 2.99)
    assert states
    for s in states:
        psi = wavefunction_derivative(s, np.linspace(-3, 3, 61))
        assert np.max(np.abs(psi.imag)) == 0.0
        L = 1.0 + 40 / s.alpha.alpha_r
        total = piecewise_integral(lambda x: float(bound_density(s, x)), p, L, tol=1e-12)
        assert total == pytest.approx(1.0, abs=1e-10)
    assert math.isfinite(states[0].c1_sq)


def test_small_vi_alpha_error_is_bounded_by_the_expansion_parameter():
    for k in (0.5, 1.5, 2.5):
        d = 9.0 - k * k
        for vI in (1e-3, 1e-2, 1e-1):
            exact = decompose_alpha(9.0, vI, k)[0]
            rel = abs(exact - alpha_r_small_vi(WellParams(9.0, vI, 1.0), k)) / exact
            assert rel <= vI**2 / d**2


def test_normalization_persists_below_the_edge_as_vi_vanishes():
    # the even-parity state keeps its Hermitian normalization
    herm = bound_states(WellParams(9.0, 0.0, 1.0, 0.5), 2.99)[0]
    weak = bound_states(WellParams(9.0, 1e-6, 1.0, 0.5), 2.99)[0]
    L = 1.0 + 40 / herm.alpha.alpha_r
    c1_quad = 1 / piecewise_integral(lambda x: float(bound_density(herm, x)) / herm.c1_sq, herm.params, L, tol=1e-12)
    assert weak.c1_sq / c1_quad == pytest.approx(1.0, abs=1e-3)


def test_odd_state_amplitude_diverges_as_vi_vanishes():
    # w -> 0 for the odd-parity state, so |C1|^2 grows like vI^-2 while rho stays finite
    scaled = []
    for vI in (1e-4, 1e-3, 1e-2):
        s = bound_states(WellParams(9.0, vI, 1.0, 0.5), 2.99)[1]
        scaled.append(s.c1_sq * vI**2)
        L = 1.0 + 40 / s.alpha.alpha_r
        assert piecewise_integral(lambda x: float(bound_density(s, x)), s.params, L, tol=1e-12) == pytest.approx(1.0, abs=1e-6)
    np.testing.assert_allclose(scaled, scaled[-1], rtol=1e-3)


def test_interior_density_is_insensitive_to_vi():
    x = np.linspace(-1, 1, 201)
    profiles = [bound_density(bound_states(WellParams(10.0, vI, 1.0, 0.5), 3.1)[0], x) for vI in (0.5, 5.0, 10.0)]
    for prof in profiles[1:]:
        assert np.max(np.abs(prof - profiles[0])) <= 0.1 * np.max(profiles[0])
