"""Probability and energy transport: densities, fluxes and source terms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundstates import BoundState, WavefunctionSample, bound_density, edge_density_factor, wavefunction_derivative
from .core import (
    ENERGY_FLUX_1_PREFACTOR,
    ENERGY_FLUX_2_PREFACTOR,
    FLUX_PREFACTOR,
    KINETIC_PREFACTOR,
    SOURCE_PREFACTOR,
    InvalidParameterError,
    WellParams,
    alpha_pair,
)
from .scattering import ScatterData, scattering_coefficients, scattering_sample


@dataclass(frozen=True)
class TransportProfile:
    grid: np.ndarray
    rho_d: np.ndarray
    J_d: np.ndarray
    Q_d: np.ndarray
    rho_E1: np.ndarray
    rho_E2: np.ndarray
    J_E: np.ndarray
    Q_E: np.ndarray
    delta_point_mass: float


def potential_real(p: WellParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) >= p.b, p.v0, 0.0)


def potential_imag(p: WellParams, x) -> np.ndarray:
    """V_I(x): +vI on the gain side x <= -b, -vI on the loss side x >= b."""
    x = np.asarray(x, dtype=float)
    return np.where(x <= -p.b, p.vI, np.where(x >= p.b, -p.vI, 0.0))


def probability_flux(psi: WavefunctionSample) -> np.ndarray:
    """(hbar/2mi)(psi* psi' - psi psi'*) = (hbar/m) Im(psi* psi')."""
    return FLUX_PREFACTOR * np.imag(np.conj(psi.psi) * psi.dpsi)


def bound_flux(s: BoundState, x) -> np.ndarray:
    """Closed-form J_d, constant inside the well and exponential outside."""
    p = s.params
    x = np.asarray(x, dtype=float)
    inner = FLUX_PREFACTOR * s.c1_sq * s.alpha.alpha_i * edge_density_factor(s)
    ar = s.alpha.alpha_r
    left = np.exp(2 * ar * (np.minimum(x, -p.b) + p.b))
    right = np.exp(-2 * ar * (np.maximum(x, p.b) - p.b))
    return inner * np.where(x <= -p.b, left, np.where(x >= p.b, right, 1.0))


def source_term(p: WellParams, rho, x) -> np.ndarray:
    """Q_d = 2 V_I rho / hbar for a density rho sampled at x."""
    return SOURCE_PREFACTOR * potential_imag(p, x) * np.asarray(rho)


def bound_source_term(s: BoundState, x) -> np.ndarray:
    return source_term(s.params, bound_density(s, x), x)


def _require_real_energy(s: BoundState) -> None:
    if np.iscomplexobj(s.k) and np.imag(s.k) != 0:
        raise InvalidParameterError("energy densities need a real-energy (PT-symmetric) state")


def energy_density_1(s: BoundState, x) -> np.ndarray:
    """Re(psi* H psi) = E rho_d for a stationary state."""
    _require_real_energy(s)
    return s.E * bound_density(s, x)


def delta_point_mass(s: BoundState) -> float:
    """Weight of delta(x) in rho_2^E: (hbar^2/2m) Lambda |psi(0)|^2."""
    psi0 = wavefunction_derivative(s, 0.0)
    return float(KINETIC_PREFACTOR * s.params.Lambda * abs(psi0) ** 2)


def energy_density_2(s: BoundState, x):
    """(smooth part, delta weight) of rho_2^E from its definition.

    The smooth part is (hbar^2/2m)|psi'|^2 + V_R |psi|^2; the delta in the
    real potential contributes Lambda |psi(0)|^2 delta(x), returned as a scalar.
    At x = 0 the mean of the one-sided |psi'|^2 is used.
    """
    _require_real_energy(s)
    x = np.asarray(x, dtype=float)
    d_plus = np.abs(wavefunction_derivative(s, x, 1, side=1)) ** 2
    d_minus = np.abs(wavefunction_derivative(s, x, 1, side=-1)) ** 2
    kinetic = np.where(x == 0, 0.5 * (d_plus + d_minus), d_plus)
    smooth = KINETIC_PREFACTOR * kinetic + potential_real(s.params, x) * bound_density(s, x)
    return smooth, delta_point_mass(s)


def energy_density_2_closed(s: BoundState, x):
    """Closed-form piecewise rho_2^E: (smooth part, delta weight)."""
    _require_real_energy(s)
    p = s.params
    x = np.asarray(x, dtype=float)
    k = s.k
    ar, ai = s.alpha.alpha_r, s.alpha.alpha_i
    c, sn = np.cos(k * p.b), np.sin(k * p.b)
    w = k * c + ar * sn
    e = c + p.Lambda / (2 * k) * sn
    sg = np.sign(x)
    bracket = (-np.sin(k * x) + p.Lambda / (2 * k) * sg * np.cos(k * x)) ** 2 * w**2 + ai**2 * e**2 * np.cos(k * x) ** 2
    inner = k**2 * bracket
    if np.any(x == 0):
        # symmetric mean of the one-sided limits at the delta
        at0 = k**2 * ((p.Lambda / (2 * k)) ** 2 * w**2 + ai**2 * e**2)
        inner = np.where(x == 0, at0, inner)
    outer = (2 * ar**2 + k**2) * k * w * e
    left = np.exp(2 * ar * (np.minimum(x, -p.b) + p.b)) * outer
    right = np.exp(-2 * ar * (np.maximum(x, p.b) - p.b)) * outer
    smooth = KINETIC_PREFACTOR * s.c1_sq * np.where(x <= -p.b, left, np.where(x >= p.b, right, inner))
    # the normalized delta weight is Lambda |psi(0)|^2 = Lambda |C1|^2 w^2
    return smooth, float(KINETIC_PREFACTOR * p.Lambda * s.c1_sq * w**2)


def energy_flux(s: BoundState, x) -> np.ndarray:
    """J^E = (hbar^2 k^2 / 2m) J_d, shared by both energy-density definitions."""
    return KINETIC_PREFACTOR * s.k**2 * bound_flux(s, x)


def energy_source_term(s: BoundState, x) -> np.ndarray:
    """Q_E = (hbar^2 k^2 / 2m) Q_d = 2 V_I rho_1^E / hbar."""
    return KINETIC_PREFACTOR * s.k**2 * bound_source_term(s, x)


def _h_psi(s: BoundState, x, side=None):
    """(H psi, d/dx H psi) away from the delta, from analytic derivatives."""
    p = s.params
    V = potential_real(p, x) + 1j * potential_imag(p, x)
    d = [wavefunction_derivative(s, x, n, side) for n in range(4)]
    h = -KINETIC_PREFACTOR * d[2] + V * d[0]
    dh = -KINETIC_PREFACTOR * d[3] + V * d[1]
    return d[0], d[1], h, dh


def energy_flux_1_direct(s: BoundState, x, side=None) -> np.ndarray:
    """J_1^E from its defining bilinear form in psi, psi', H psi, (H psi)'."""
    psi, dpsi, h, dh = _h_psi(s, np.asarray(x, dtype=float), side)
    bracket = np.conj(psi) * dh - psi * np.conj(dh) - np.conj(dpsi) * h + dpsi * np.conj(h)
    return np.real(ENERGY_FLUX_1_PREFACTOR * bracket / 1j)


def energy_flux_2_direct(s: BoundState, x, side=None) -> np.ndarray:
    psi, dpsi, h, _ = _h_psi(s, np.asarray(x, dtype=float), side)
    bracket = dpsi * np.conj(h) - np.conj(dpsi) * h
    return np.real(ENERGY_FLUX_2_PREFACTOR * bracket / 1j)


def transport_profile(s: BoundState, x) -> TransportProfile:
    x = np.asarray(x, dtype=float)
    rho = bound_density(s, x)
    rho_e2, point_mass = energy_density_2(s, x)
    return TransportProfile(
        grid=x,
        rho_d=rho,
        J_d=bound_flux(s, x),
        Q_d=bound_source_term(s, x),
        rho_E1=energy_density_1(s, x),
        rho_E2=rho_e2,
        J_E=energy_flux(s, x),
        Q_E=energy_source_term(s, x),
        delta_point_mass=point_mass,
    )


def scattering_fluxes(p: WellParams, k: float, direction: str, x, d: ScatterData | None = None) -> np.ndarray:
    """Closed-form lead fluxes with unit incident amplitude.

    x <= -b uses the gain-side form and x >= b the loss-side form. Points
    inside the well are rejected; use probability_flux on a scattering
    sample there. For right-to-left incidence the transmitted wave
    t+ e^{-alpha x} carries -(hbar/m)|t+|^2 alpha_I e^{-2 alpha_R x}.
    """
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(x) < p.b):
        raise InvalidParameterError("closed-form lead fluxes are defined for |x| >= b only")
    if d is None:
        d = scattering_coefficients(p, k)
    ap = alpha_pair(p, k)
    ar, ai = ap.alpha_r, ap.alpha_i
    pre = FLUX_PREFACTOR
    if direction == "left_to_right":
        r = d.r_plus
        incident = ai * (np.exp(2 * ar * x) - abs(r) ** 2 * np.exp(-2 * ar * x))
        interference = 1j * ar * (r * np.exp(-2j * ai * x) - np.conj(r) * np.exp(2j * ai * x))
        left = pre * np.real(incident + interference)
        right = pre * abs(d.t_minus) ** 2 * ai * np.exp(-2 * ar * x)
    elif direction == "right_to_left":
        r = d.r_minus
        incident = ai * (abs(r) ** 2 * np.exp(-2 * ar * x) - np.exp(2 * ar * x))
        interference = 1j * ar * (r * np.exp(2j * ai * x) - np.conj(r) * np.exp(-2j * ai * x))
        right = pre * np.real(incident + interference)
        left = -pre * abs(d.t_plus) ** 2 * ai * np.exp(-2 * ar * x)
    else:
        raise InvalidParameterError(f"unknown direction {direction!r}")
    return np.where(x <= -p.b, left, right)


def scattering_flux_numeric(p: WellParams, k: float, direction: str, x) -> np.ndarray:
    return probability_flux(scattering_sample(p, k, direction, x))


def flux_transmission(p: WellParams, k: float) -> float:
    """T recovered from the gain-side flux J_{d+}(-b) = (hbar/m) alpha_I e^{-2 alpha_R b} (1 -+ |r+ r-|)."""
    ap = alpha_pair(p, k)
    if ap.alpha_i == 0:
        raise InvalidParameterError("alpha_I = 0: lead flux vanishes identically")
    j = float(scattering_fluxes(p, k, "left_to_right", -p.b))
    return j / (FLUX_PREFACTOR * ap.alpha_i * np.exp(-2 * ap.alpha_r * p.b))


def unitarity_from_flux(p: WellParams, k: float) -> float:
    """|X - T| where X is the bracket extracted from the gain-side flux at -b."""
    d = scattering_coefficients(p, k)
    return abs(flux_transmission(p, k) - d.T)

