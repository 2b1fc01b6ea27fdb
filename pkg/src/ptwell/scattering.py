"""Transfer matrix, reflection and transmission coefficients.

Exterior waves are e^{+-alpha x} on the gain side (x <= -b) and
e^{+-alpha* x} on the loss side (x >= b). M+ maps (A1, A2) to (B2, B1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .core import InvalidParameterError, PTWellError, SingularParameterError, WellParams, alpha_pair

DUAL_PATH_RTOL = 1e-10
SINGULAR_RTOL = 1e-8

Direction = Literal["left_to_right", "right_to_left"]


class DualPathMismatch(PTWellError, ArithmeticError):
    pass


@dataclass(frozen=True)
class TransferMatrix:
    m11: complex
    m12: complex
    m21: complex
    m22: complex
    det: complex

    def as_array(self) -> np.ndarray:
        return np.array([[self.m11, self.m12], [self.m21, self.m22]], dtype=complex)

    def inverse(self) -> np.ndarray:
        return np.array([[self.m22, -self.m12], [-self.m21, self.m11]], dtype=complex) / self.det


@dataclass(frozen=True)
class ScatterData:
    k: float
    r_plus: complex
    r_minus: complex
    t_plus: complex
    t_minus: complex
    T: float
    R_plus: float
    R_minus: float
    unitarity_residual: float
    sign_used: int
    singular: bool = False
    dual_path_error: float = 0.0


@dataclass(frozen=True)
class _Pieces:
    """Trigonometric and exponent scalars shared by all entries."""

    k: float
    alpha: complex
    ar: float
    ai: float
    mod2: float  # |alpha|^2
    s2: float
    c2: float


def _pieces(p: WellParams, k: float) -> _Pieces:
    k = float(k)
    if k == 0:
        raise SingularParameterError("k = 0 makes the 4 alpha* k^2 denominator vanish")
    ap = alpha_pair(p, k)
    alpha = complex(ap.alpha_r, ap.alpha_i)
    if alpha == 0:
        raise SingularParameterError("alpha = 0 (vI = 0 and k^2 = v0)")
    return _Pieces(
        k=k,
        alpha=alpha,
        ar=ap.alpha_r,
        ai=ap.alpha_i,
        mod2=ap.alpha_r**2 + ap.alpha_i**2,
        s2=math.sin(2 * k * p.b),
        c2=math.cos(2 * k * p.b),
    )


def _denominator_terms(L: float, q: _Pieces):
    """The three terms of the common denominator (m22 without phase and 4 alpha* k^2)."""
    k2 = q.k * q.k
    return (
        -2 * q.k * q.s2 * (q.mod2 + k2 + 1j * L * q.ai),
        q.c2 * (q.mod2 * L + k2 * (L - 4j * q.ai)),
        L * (k2 - q.mod2),
    )


def _numerators(L: float, q: _Pieces):
    """Phase-free numerators of m11, m12, m21 and the common denominator."""
    k2 = q.k * q.k
    n11 = (
        2 * q.k * q.s2 * ((q.mod2 + k2) - 1j * L * q.ai)
        - q.c2 * (q.mod2 * L + k2 * (4j * q.ai + L))
        - L * (k2 - q.mod2)
    )
    n12 = (
        2 * q.k * q.s2 * (L * q.ar - (q.mod2 - k2))
        + q.c2 * (q.mod2 * L + k2 * (4 * q.ar - L))
        - L * (k2 + q.mod2)
    )
    # Same polynomial as the r+ numerator, so r+ vanishes at bound states.
    n21 = (
        2 * q.k * q.s2 * (L * q.ar + (q.mod2 - k2))
        + q.c2 * (k2 * (4 * q.ar + L) - q.mod2 * L)
        + L * (k2 + q.mod2)
    )
    den = sum(_denominator_terms(L, q))
    return n11, n12, n21, den


def transfer_matrix(p: WellParams, k: float) -> TransferMatrix:
    """Entries of M+ in closed form.

    m11 uses |alpha|^2 + k^2 in its sine term and m21 carries a + sign on
    its sine term; with these the determinant is -alpha/alpha* and M+ agrees
    with direct numerical matching.
    """
    q = _pieces(p, k)
    n11, n12, n21, den = _numerators(p.Lambda, q)
    pref = 4 * q.alpha.conjugate() * q.k**2
    b = p.b
    m11 = np.exp(-2j * b * q.ai) * n11 / pref
    m12 = np.exp(2 * b * q.ar) * n12 / pref
    m21 = np.exp(-2 * b * q.ar) * n21 / pref
    m22 = np.exp(2j * b * q.ai) * den / pref
    return TransferMatrix(complex(m11), complex(m12), complex(m21), complex(m22), complex(m11 * m22 - m12 * m21))


def transfer_matrix_minus(p: WellParams, k: float) -> np.ndarray:
    """M- built from the coefficients; it maps (B2, B1) back to (A1, A2)."""
    t_plus, r_plus, r_minus, t_minus = explicit_coefficients(p, k)
    return np.array(
        [[1 / t_minus, -r_minus / t_minus], [r_plus / t_minus, t_plus - r_plus * r_minus / t_minus]],
        dtype=complex,
    )


def explicit_coefficients(p: WellParams, k: float):
    """(t+, r+, r-, t-) from the closed-form expressions.

    The transmission phase is e^{-2 i b alpha_I}, the reciprocal of the m22
    phase, so that t+ = 1/m22.
    """
    q = _pieces(p, k)
    _, n12, n21, den = _numerators(p.Lambda, q)
    a = q.alpha
    k2 = q.k * q.k
    phase = np.exp(-2j * p.b * q.ai)
    t_plus = 4 * a.conjugate() * k2 / den * phase
    r_minus = n12 / den * np.exp(2 * p.b * a.conjugate())
    r_plus = -n21 / den * np.exp(-2 * p.b * a)
    t_minus = -4 * a * k2 / den * phase
    return complex(t_plus), complex(r_plus), complex(r_minus), complex(t_minus)


def coefficients_from_matrix(m: TransferMatrix):
    t_plus = 1 / m.m22
    return t_plus, -m.m21 / m.m22, m.m12 / m.m22, m.det / m.m22


def is_spectral_singularity_candidate(p: WellParams, k: float, rtol: float = SINGULAR_RTOL) -> bool:
    q = _pieces(p, k)
    terms = _denominator_terms(p.Lambda, q)
    scale = sum(abs(t) for t in terms)
    return abs(sum(terms)) < rtol * scale


def unitarity_residual(T: float, r_plus: complex, r_minus: complex):
    """Return (residual, sign) for |t|^2 +- |r+ r-| = 1; sign -1 when T > 1."""
    sign = -1 if T > 1 else 1
    return abs(T + sign * abs(r_plus * r_minus) - 1), sign


def scattering_coefficients(p: WellParams, k: float, rtol: float = DUAL_PATH_RTOL) -> ScatterData:
    explicit = explicit_coefficients(p, k)
    matrix = coefficients_from_matrix(transfer_matrix(p, k))
    singular = is_spectral_singularity_candidate(p, k)
    err = max(abs(x - y) / max(abs(x), abs(y), 1e-300) for x, y in zip(explicit, matrix))
    if err > rtol and not singular:
        raise DualPathMismatch(f"closed form and transfer matrix disagree at k={k}: rel err {err:.3e}")
    t_plus, r_plus, r_minus, t_minus = explicit
    T = abs(t_plus) ** 2
    res, sign = unitarity_residual(T, r_plus, r_minus)
    return ScatterData(
        k=float(k),
        r_plus=r_plus,
        r_minus=r_minus,
        t_plus=t_plus,
        t_minus=t_minus,
        T=T,
        R_plus=abs(r_plus) ** 2,
        R_minus=abs(r_minus) ** 2,
        unitarity_residual=res,
        sign_used=sign,
        singular=singular,
        dual_path_error=err,
    )


def unitarity_check(d: ScatterData) -> float:
    return unitarity_residual(d.T, d.r_plus, d.r_minus)[0]


@dataclass(frozen=True)
class ScatteringSample:
    x: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    direction: str


def _check_direction(direction: str) -> None:
    if direction not in ("left_to_right", "right_to_left"):
        raise InvalidParameterError(f"direction must be left_to_right or right_to_left, got {direction!r}")


def scattering_sample(p: WellParams, k: float, direction: Direction, x, d: ScatterData | None = None) -> ScatteringSample:
    """psi and psi' of the unit-amplitude scattering state.

    The closed interior form from the outgoing side holds between that edge
    and the delta. On the other half of the well the solution is carried
    from the incoming side's exterior data, which keeps the delta jump
    psi'(0+) - psi'(0-) = Lambda psi(0) exact. At x = 0 the value of psi
    is continuous; psi' returns the mean of the one-sided limits.
    """
    _check_direction(direction)
    if k <= 0:
        raise InvalidParameterError(f"k must be > 0, got {k}")
    if d is None:
        d = scattering_coefficients(p, k)
    q = _pieces(p, k)
    a = q.alpha
    ac = a.conjugate()
    b = p.b
    x = np.asarray(x, dtype=float)
    xl = np.minimum(x, -b)
    xr = np.maximum(x, b)
    xi = np.clip(x, -b, b)
    if direction == "left_to_right":
        left = np.exp(a * xl) + d.r_plus * np.exp(-a * xl)
        dleft = a * (np.exp(a * xl) - d.r_plus * np.exp(-a * xl))
        right = d.t_minus * np.exp(-ac * xr)
        dright = -ac * right
        u0, du0 = np.exp(-a * b) + d.r_plus * np.exp(a * b), a * (np.exp(-a * b) - d.r_plus * np.exp(a * b))
        amp = d.t_minus * np.exp(-ac * b)
        near = amp * (np.cos(k * (b - xi)) + ac / k * np.sin(k * (b - xi)))
        dnear = amp * (k * np.sin(k * (b - xi)) - ac * np.cos(k * (b - xi)))
        far = u0 * np.cos(k * (xi + b)) + du0 / k * np.sin(k * (xi + b))
        dfar = -u0 * k * np.sin(k * (xi + b)) + du0 * np.cos(k * (xi + b))
        inner = np.where(xi > 0, near, far)
        dinner = np.where(xi > 0, dnear, np.where(xi < 0, dfar, 0.5 * (dnear + dfar)))
    else:
        left = d.t_plus * np.exp(-a * xl)
        dleft = -a * left
        right = np.exp(ac * xr) + d.r_minus * np.exp(-ac * xr)
        dright = ac * (np.exp(ac * xr) - d.r_minus * np.exp(-ac * xr))
        u0, du0 = np.exp(ac * b) + d.r_minus * np.exp(-ac * b), ac * (np.exp(ac * b) - d.r_minus * np.exp(-ac * b))
        amp = d.t_plus * np.exp(a * b)
        near = amp * (np.cos(k * (xi + b)) - a / k * np.sin(k * (xi + b)))
        dnear = amp * (-k * np.sin(k * (xi + b)) - a * np.cos(k * (xi + b)))
        far = u0 * np.cos(k * (b - xi)) - du0 / k * np.sin(k * (b - xi))
        dfar = u0 * k * np.sin(k * (b - xi)) + du0 * np.cos(k * (b - xi))
        inner = np.where(xi < 0, near, far)
        dinner = np.where(xi < 0, dnear, np.where(xi > 0, dfar, 0.5 * (dnear + dfar)))
    psi = np.where(x <= -b, left, np.where(x >= b, right, inner))
    dpsi = np.where(x <= -b, dleft, np.where(x >= b, dright, dinner))
    return ScatteringSample(x=x, psi=psi, dpsi=dpsi, direction=direction)


def scattering_wavefunction(p: WellParams, k: float, direction: Direction, x) -> np.ndarray:
    return scattering_sample(p, k, direction, x).psi


def scattering_one_sided_derivative(p: WellParams, k: float, direction: Direction, side: int) -> complex:
    """psi'(0+) for side=+1, psi'(0-) for side=-1."""
    eps = np.nextafter(0.0, side)
    return complex(scattering_sample(p, k, direction, eps).dpsi)
