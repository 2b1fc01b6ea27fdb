import dataclasses
import math

import numpy as np
import pytest

from ptwell.boundstates import WavefunctionSample, bound_density, bound_states, bound_wavefunction, wavefunction_derivative
from ptwell.core import InvalidParameterError, WellParams, alpha_pair
from ptwell.oracle import piecewise_integral
from ptwell.scattering import scattering_coefficients
from ptwell.transport import (
    bound_flux,
    bound_source_term,
    delta_point_mass,
    energy_density_1,
    energy_density_2,
    energy_density_2_closed,
    energy_flux,
    energy_flux_1_direct,
    energy_flux_2_direct,
    energy_source_term,
    flux_transmission,
    potential_imag,
    probability_flux,
    scattering_flux_numeric,
    scattering_fluxes,
    transport_profile,
    unitarity_from_flux,
)
from ptwell.validation import flux_vs_vi

X_AWAY = np.concatenate([np.linspace(-3.5, -1.05, 60), np.linspace(-0.95, -0.05, 30), np.linspace(0.05, 0.95, 30), np.linspace(1.05, 3.5, 60)])


@pytest.fixture(scope="module")
def states():
    return bound_states(WellParams(9.0, 15.0, 1.0, 0.5), 12.0)


def test_plane_wave_flux_is_two_k():
    x = np.linspace(-2, 2, 11)
    k = 1.7
    psi = np.exp(1j * k * x)
    assert probability_flux(WavefunctionSample(x, psi, 1j * k * psi)) == pytest.approx(np.full(11, 2 * k))


def test_real_wavefunction_carries_no_flux():
    x = np.linspace(-2, 2, 11)
    assert np.all(probability_flux(WavefunctionSample(x, np.cos(x), -np.sin(x))) == 0.0)


def test_closed_form_flux_matches_wavefunction(states):
    for s in states:
        numeric = probability_flux(bound_wavefunction(s, X_AWAY))
        np.testing.assert_allclose(bound_flux(s, X_AWAY), numeric, rtol=1e-10, atol=1e-14)


def test_flux_is_constant_and_positive_inside(states):
    x = np.linspace(-0.99, 0.99, 51)
    for s in states:
        J = bound_flux(s, x)
        assert np.ptp(J) == 0.0
        assert J[0] > 0


def test_source_is_antisymmetric_and_integrates_to_zero(states):
    x = np.linspace(0.0, 5.0, 101)
    for s in states:
        np.testing.assert_allclose(bound_source_term(s, -x), -bound_source_term(s, x), rtol=1e-12, atol=1e-15)
        L = 1.0 + 40 / s.alpha.alpha_r
        total = piecewise_integral(lambda t: float(bound_source_term(s, t)), s.params, L, tol=1e-11)
        assert abs(total) <= 1e-9


def test_stationary_continuity_equation(states):
    h = 1e-5
    for s in states:
        dJ = (bound_flux(s, X_AWAY + h) - bound_flux(s, X_AWAY - h)) / (2 * h)
        Q = bound_source_term(s, X_AWAY)
        assert np.max(np.abs(dJ - Q)) <= 1e-6 * (1 + np.max(np.abs(Q)))


def test_source_sign_follows_gain_and_loss(well):
    assert float(potential_imag(well, -2.0)) == well.vI
    assert float(potential_imag(well, 2.0)) == -well.vI
    assert float(potential_imag(well, 0.5)) == 0.0


def test_first_energy_density_is_e_rho(states):
    for s in states:
        np.testing.assert_allclose(energy_density_1(s, X_AWAY), s.k**2 * bound_density(s, X_AWAY), rtol=1e-15)


def test_second_energy_density_closed_form(states):
    x = np.append(X_AWAY, 0.0)
    for s in states:
        smooth, mass = energy_density_2(s, x)
        smooth_c, mass_c = energy_density_2_closed(s, x)
        np.testing.assert_allclose(smooth_c, smooth, rtol=1e-10, atol=1e-13)
        assert mass_c == pytest.approx(mass, rel=1e-12)
        assert mass == pytest.approx(s.params.Lambda * abs(complex(wavefunction_derivative(s, 0.0))) ** 2)


def test_second_energy_density_integrates_to_the_energy(states):
    for s in states:
        L = 1.0 + 40 / s.alpha.alpha_r
        smooth = piecewise_integral(lambda t: float(energy_density_2_closed(s, t)[0]), s.params, L, tol=1e-10)
        mass = delta_point_mass(s)
        assert mass > 0
        assert smooth + mass == pytest.approx(s.E, rel=1e-9)


def test_second_energy_density_jumps_by_v0_rho(states):
    for s in states:
        p = s.params
        for edge in (-p.b, p.b):
            inside = edge - math.copysign(1e-12, edge)
            smooth, _ = energy_density_2(s, np.array([inside, edge]))
            assert smooth[1] - smooth[0] == pytest.approx(p.v0 * float(bound_density(s, edge)), rel=1e-8)


def test_energy_fluxes_agree(states):
    for s in states:
        expected = energy_flux(s, X_AWAY)
        np.testing.assert_allclose(expected, s.k**2 * bound_flux(s, X_AWAY), rtol=1e-15)
        scale = np.max(np.abs(expected))
        np.testing.assert_allclose(energy_flux_1_direct(s, X_AWAY), expected, atol=1e-10 * scale)
        np.testing.assert_allclose(energy_flux_2_direct(s, X_AWAY), expected, atol=1e-10 * scale)


def test_energy_source_forms_agree(states):
    for s in states:
        Q_E = energy_source_term(s, X_AWAY)
        np.testing.assert_allclose(Q_E, s.k**2 * bound_source_term(s, X_AWAY), rtol=1e-15)
        np.testing.assert_allclose(Q_E, 2 * potential_imag(s.params, X_AWAY) * energy_density_1(s, X_AWAY), rtol=1e-14)


def test_hermitian_bound_states_carry_no_flux():
    for s in bound_states(WellParams(9.0, 0.0, 1.0, 0.5), 2.99):
        assert np.all(bound_flux(s, X_AWAY) == 0.0)
        assert np.all(energy_flux(s, X_AWAY) == 0.0)


def test_transport_profile_bundles_every_field(states):
    s = states[0]
    prof = transport_profile(s, X_AWAY)
    np.testing.assert_array_equal(prof.J_d, bound_flux(s, X_AWAY))
    np.testing.assert_array_equal(prof.rho_E2, energy_density_2(s, X_AWAY)[0])
    assert prof.delta_point_mass == delta_point_mass(s)


def test_complex_momentum_is_rejected(states):
    s = dataclasses.replace(states[0], k=states[0].k + 0.1j)
    with pytest.raises(InvalidParameterError):
        energy_density_1(s, 0.0)
    with pytest.raises(InvalidParameterError):
        energy_density_2(s, 0.0)


@pytest.mark.parametrize("direction", ["left_to_right", "right_to_left"])
def test_lead_fluxes_match_the_wavefunction(scatter_well, direction):
    x = np.concatenate([np.linspace(-3, -1, 21), np.linspace(1, 3, 21)])
    for k in (0.6, 2.5, 5.0, 8.0):
        closed = scattering_fluxes(scatter_well, k, direction, x)
        numeric = scattering_flux_numeric(scatter_well, k, direction, x)
        np.testing.assert_allclose(closed, numeric, rtol=1e-9, atol=1e-9 * np.max(np.abs(numeric)))


@pytest.mark.parametrize("direction", ["left_to_right", "right_to_left"])
def test_flux_is_conserved_across_the_well(scatter_well, direction):
    for k in (0.6, 2.5, 5.0, 8.0):
        left, right = scattering_fluxes(scatter_well, k, direction, [-1.0, 1.0])
        assert left == pytest.approx(right, rel=1e-9)


def test_hermitian_lead_fluxes():
    p = WellParams(9.0, 0.0, 1.0, 0.5)
    for k in (3.5, 5.0, 7.5):
        q = math.sqrt(k * k - 9.0)
        d = scattering_coefficients(p, k)
        left, right = scattering_fluxes(p, k, "left_to_right", [-2.0, 2.0])
        assert left == pytest.approx(2 * q * (1 - d.R_plus), rel=1e-12)
        assert right == pytest.approx(2 * q * d.T, rel=1e-12)


def test_right_to_left_transmitted_flux_points_left(scatter_well):
    for k in (0.6, 2.5, 5.0):
        assert float(scattering_fluxes(scatter_well, k, "right_to_left", -1.5)) < 0


def test_flux_based_unitarity(scatter_well):
    for k in np.linspace(0.2, 10.0, 50):
        assert unitarity_from_flux(scatter_well, k) <= 1e-9 * max(1.0, scattering_coefficients(scatter_well, k).T)


def test_lead_flux_helpers_validate_input(scatter_well):
    with pytest.raises(InvalidParameterError):
        scattering_fluxes(scatter_well, 2.0, "left_to_right", 0.5)
    with pytest.raises(InvalidParameterError):
        scattering_fluxes(scatter_well, 2.0, "sideways", 2.0)
    with pytest.raises(InvalidParameterError):
        flux_transmission(WellParams(9.0, 0.0, 1.0, 0.5), 2.0)


def test_flux_at_origin_is_monotone_in_vi():
    J = flux_vs_vi(np.linspace(0.5, 20.0, 40))
    assert np.all(J > 0)
    d = np.diff(J, axis=0)
    assert np.all(d > 0)


def test_flux_at_origin_turns_over_beyond_the_monotone_range():
    # the lowest state peaks near vI = 25.2, outside the range tested above
    J = flux_vs_vi(np.linspace(22.0, 30.0, 17), n_states=1)[:, 0]
    d = np.diff(J)
    assert np.any(d > 0) and np.any(d < 0)


def test_transmitted_side_closed_form(scatter_well):
    for k in (0.6, 2.5, 5.0):
        d = scattering_coefficients(scatter_well, k)
        ap = alpha_pair(scatter_well, k)
        expected = 2 * abs(d.t_minus) ** 2 * ap.alpha_i * math.exp(-2 * ap.alpha_r)
        assert float(scattering_flux_numeric(scatter_well, k, "left_to_right", 1.0)) == pytest.approx(expected, rel=1e-10)


def test_free_particle_lead_fluxes_are_two_k():
    p = WellParams(0.0, 0.0, 1.0, 0.5)
    for k in (0.5, 2.0, 6.0):
        d = scattering_coefficients(p, k)
        left, right = scattering_fluxes(p, k, "left_to_right", [-2.0, 2.0])
        assert left == pytest.approx(2 * k * (1 - d.R_plus), rel=1e-12)
        assert right == pytest.approx(2 * k * d.T, rel=1e-12)


def test_first_energy_density_integrates_to_the_energy(states):
    for s in states:
        L = 1.0 + 40 / s.alpha.alpha_r
        total = piecewise_integral(lambda t: float(energy_density_1(s, t)), s.params, L, tol=1e-10)
        assert total == pytest.approx(s.E, rel=1e-9)
