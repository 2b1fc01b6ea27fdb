"""Reduced units, well parameters and the decay-exponent algebra.

All computation uses hbar = 1 and m = 1/2, so that hbar^2/2m = 1 and the
energy of a state with pseudo-momentum k is simply E = k**2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Reduced-unit prefactors. Every formula that carries a physical prefactor
# pulls it from here so the mapping to hbar/m conventions stays auditable.
HBAR = 1.0
MASS = 0.5
FLUX_PREFACTOR = HBAR / MASS  # hbar/m in J_d
KINETIC_PREFACTOR = HBAR**2 / (2.0 * MASS)  # hbar^2/2m
SOURCE_PREFACTOR = 2.0 / HBAR  # 2/hbar in Q_d
ENERGY_FLUX_1_PREFACTOR = HBAR / (4.0 * MASS)  # hbar/4m in J_1^E
ENERGY_FLUX_2_PREFACTOR = HBAR / (2.0 * MASS)  # hbar/2m in J_2^E


class PTWellError(Exception):
    """Base class for errors raised by ptwell."""


class InvalidParameterError(PTWellError, ValueError):
    pass


class SingularParameterError(PTWellError, ZeroDivisionError):
    """A formula hits an exact singularity (e.g. alpha = 0)."""


@dataclass(frozen=True)
class WellParams:
    """Reduced parameters of the PT-symmetric square well with a central delta.

    Attributes:
        v0: real well depth 2 m V0 / hbar^2 of the outer regions.
        vI: magnitude of the imaginary part, gain on the left, loss on the right.
        b: half-width of the well.
        Lambda: delta strength 2 m lambda / hbar^2.
    """

    v0: float
    vI: float
    b: float
    Lambda: float = 0.0

    def __post_init__(self):
        for name in ("v0", "vI", "b", "Lambda"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidParameterError(f"{name} must be finite, got {value!r}")
        if self.b <= 0:
            raise InvalidParameterError(f"half-width b must be > 0, got {self.b}")
        if self.vI < 0:
            raise InvalidParameterError(f"vI must be >= 0, got {self.vI}")
        if self.Lambda < 0:
            raise InvalidParameterError(f"Lambda must be >= 0, got {self.Lambda}")

    def with_lambda(self, Lambda: float) -> "WellParams":
        return WellParams(self.v0, self.vI, self.b, Lambda)

    def with_vi(self, vI: float) -> "WellParams":
        return WellParams(self.v0, vI, self.b, self.Lambda)

    @property
    def potential_modulus(self) -> float:
        """sqrt(v0^2 + vI^2), the numerator of the large-k EP bound."""
        return math.hypot(self.v0, self.vI)


@dataclass(frozen=True)
class PhysicalParams:
    V0: float
    VI: float
    lambda_strength: float
    m: float = 1.0
    hbar: float = 1.0


@dataclass(frozen=True)
class AlphaPair:
    alpha: complex
    alpha_tilde: complex
    alpha_r: float
    alpha_i: float


def reduce(p: PhysicalParams, b: float) -> WellParams:
    """Convert physical parameters to the reduced (v0, vI, b, Lambda) set."""
    if p.m <= 0 or p.hbar <= 0:
        raise InvalidParameterError(
            f"mass and hbar must be positive, got m={p.m}, hbar={p.hbar}"
        )
    factor = 2.0 * p.m / p.hbar**2
    return WellParams(
        v0=factor * p.V0,
        vI=factor * p.VI,
        b=b,
        Lambda=factor * p.lambda_strength,
    )


def _positive_root(z):
    """Principal square root with the Re >= 0 convention enforced."""
    r = np.sqrt(np.asarray(z, dtype=complex))
    return np.where(r.real < 0, -r, r)


def alpha_values(p: WellParams, k):
    """Return (alpha, alpha_tilde) for scalar or array k (real or complex)."""
    k = np.asarray(k)
    k2 = k * k
    alpha = _positive_root(p.v0 + 1j * p.vI - k2)
    alpha_tilde = _positive_root(p.v0 - 1j * p.vI - k2)
    if alpha.ndim == 0:
        return complex(alpha), complex(alpha_tilde)
    return alpha, alpha_tilde


def decompose_alpha(v0: float, vI: float, k):
    """Real and imaginary parts of alpha for real k.

    Implements the closed forms

        alpha_R = sqrt((sqrt((v0-k^2)^2 + vI^2) + (v0-k^2)) / 2)
        alpha_I = sqrt((sqrt((v0-k^2)^2 + vI^2) - (v0-k^2)) / 2)

    evaluating the non-cancelling one directly and recovering the other from
    2 alpha_R alpha_I = vI, which is algebraically identical but avoids the
    catastrophic cancellation at large |v0 - k^2|.
    """
    k = np.asarray(k, dtype=float)
    d = v0 - k * k
    m = np.hypot(d, vI)
    big = np.sqrt((m + np.abs(d)) / 2.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        small = np.where(big > 0, vI / (2.0 * big), 0.0)
    # vI = 0 with d < 0 leaves big = sqrt(|d|), small = 0: correct on both sides.
    alpha_r = np.where(d >= 0, big, small)
    alpha_i = np.where(d >= 0, small, big)
    if alpha_r.ndim == 0:
        return float(alpha_r), float(alpha_i)
    return alpha_r, alpha_i


def alpha_pair(p: WellParams, k) -> AlphaPair:
    """Decay exponents at pseudo-momentum k.

    For complex k only alpha and alpha_tilde are meaningful; alpha_r and
    alpha_i are then Re(alpha) and |Im(alpha)|.
    """
    alpha, alpha_tilde = alpha_values(p, k)
    if np.iscomplexobj(k) and np.imag(k) != 0:
        return AlphaPair(alpha, alpha_tilde, alpha.real, abs(alpha.imag))
    alpha_r, alpha_i = decompose_alpha(p.v0, p.vI, float(np.real(k)))
    return AlphaPair(alpha, alpha_tilde, alpha_r, alpha_i)


def is_real_scalar(k, tol: float = 0.0) -> bool:
    return abs(np.imag(k)) <= tol
