"""Closed-form bound states in the PT-symmetric phase."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import AlphaPair, InvalidParameterError, PTWellError, WellParams, alpha_pair
from .spectrum import find_real_roots, secular_residual, secular_scale

ROOT_RTOL = 1e-9


class NotABoundStateError(PTWellError, ValueError):
    pass


@dataclass(frozen=True)
class BoundState:
    k: float
    E: float
    c1_sq: float
    params: WellParams
    alpha: AlphaPair


@dataclass(frozen=True)
class WavefunctionSample:
    x: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray


@dataclass(frozen=True)
class _Coefficients:
    """Scalars shared by every piece of the closed-form wavefunction."""

    k: float
    c: float  # cos kb
    s: float  # sin kb
    w: float  # k cos kb + alpha_R sin kb
    e: float  # cos kb + (Lambda/2k) sin kb
    alpha: complex
    alpha_r: float
    alpha_i: float


def _coefficients(p: WellParams, k: float) -> _Coefficients:
    ap = alpha_pair(p, k)
    c = math.cos(k * p.b)
    s = math.sin(k * p.b)
    return _Coefficients(
        k=k,
        c=c,
        s=s,
        w=k * c + ap.alpha_r * s,
        e=c + p.Lambda / (2 * k) * s,
        alpha=complex(ap.alpha_r, ap.alpha_i),
        alpha_r=ap.alpha_r,
        alpha_i=ap.alpha_i,
    )


def d_function(p: WellParams, k: float) -> float:
    """The four-term denominator D(k) of the normalization constant."""
    co = _coefficients(p, k)
    k2 = k * k
    L = p.Lambda
    ar, ai = co.alpha_r, co.alpha_i
    kb = k * p.b
    bracket = (
        2 * co.s * ((4 * k2 - L**2) * co.c + 4 * k * L * co.s) * co.w**2
        - 4 * k2 * ai**2 * math.sin(2 * kb) * co.e**2
        + 2 * kb * ((4 * k2 + L**2) * co.w**2 + 4 * k2 * ai**2 * co.e**2)
    )
    return ar * bracket + 8 * k2 * k2 * co.w * co.e


def normalization_constant(p: WellParams, k: float) -> float:
    """|C1|^2 such that the closed-form density integrates to one.

    |C1|^2 = 8 alpha_R k^3 / D(k). The integral of the unnormalized density
    is D(k) / (8 alpha_R k^3), verified against adaptive quadrature in the
    test suite.
    """
    if np.iscomplexobj(k) and np.imag(k) != 0:
        raise InvalidParameterError("normalization is defined for real k only")
    k = float(np.real(k))
    if k <= 0:
        raise InvalidParameterError(f"k must be > 0, got {k}")
    ar = alpha_pair(p, k).alpha_r
    D = d_function(p, k)
    if not D > 0 or not ar > 0:
        raise NotABoundStateError(f"D(k)={D:.6g}, alpha_R={ar:.3g} at k={k}: not a PT-phase bound state")
    return 8 * ar * k**3 / D


def make_bound_state(p: WellParams, k: float, check: bool = True) -> BoundState:
    k = float(k)
    if check:
        res = abs(secular_residual(p, k))
        if res > ROOT_RTOL * secular_scale(p, k):
            raise NotABoundStateError(f"k={k} is not a root (|f|={res:.3e})")
    return BoundState(k=k, E=k * k, c1_sq=normalization_constant(p, k), params=p, alpha=alpha_pair(p, k))


def bound_states(p: WellParams, k_max: float, n_seeds: Optional[int] = None) -> list:
    return [make_bound_state(p, k) for k in find_real_roots(p, k_max, n_seeds)]


def _sgn(x, side):
    sg = np.sign(x)
    if side is not None:
        sg = np.where(x == 0, float(side), sg)
    return sg


def wavefunction_derivative(s: BoundState, x, order: int = 0, side: Optional[int] = None) -> np.ndarray:
    """order-th spatial derivative of the normalized closed-form wavefunction.

    At x = 0 the one-sided limit is taken when ``side`` is +1 or -1; with
    side=None the mean of the two one-sided limits is returned. The outer
    pieces own the points x = -b and x = b.
    """
    p = s.params
    co = _coefficients(p, s.k)
    x = np.asarray(x, dtype=float)
    k = s.k
    amp = math.sqrt(s.c1_sq)
    phase = order * math.pi / 2
    d_cos = k**order * np.cos(k * x + phase)
    d_sin = k**order * np.sin(k * x + phase)
    sg = _sgn(x, side)
    inner = (d_cos + p.Lambda / (2 * k) * sg * d_sin) * co.w + 1j * co.alpha_i * co.e * d_sin

    a = co.alpha
    ac = a.conjugate()
    xl = np.minimum(x, -p.b)  # keep unused branches of np.where finite
    xr = np.maximum(x, p.b)
    left = a**order * np.exp(a * (xl + p.b)) * (k * co.c + ac * co.s) * co.e
    right = (-ac) ** order * np.exp(-ac * (xr - p.b)) * (k * co.c + a * co.s) * co.e
    out = np.where(x <= -p.b, left, np.where(x >= p.b, right, inner))
    return amp * out


def bound_wavefunction(s: BoundState, x, side: Optional[int] = None) -> WavefunctionSample:
    x = np.asarray(x, dtype=float)
    return WavefunctionSample(
        x=x,
        psi=wavefunction_derivative(s, x, 0, side),
        dpsi=wavefunction_derivative(s, x, 1, side),
    )


def bound_density(s: BoundState, x) -> np.ndarray:
    """Closed-form probability density, piecewise in x."""
    p = s.params
    co = _coefficients(p, s.k)
    x = np.asarray(x, dtype=float)
    k = s.k
    basis = np.cos(k * x) + p.Lambda / (2 * k) * np.sign(x) * np.sin(k * x)
    inner = basis**2 * co.w**2 + co.alpha_i**2 * co.e**2 * np.sin(k * x) ** 2
    edge = k * co.w * co.e
    left = np.exp(2 * co.alpha_r * (np.minimum(x, -p.b) + p.b)) * edge
    right = np.exp(-2 * co.alpha_r * (np.maximum(x, p.b) - p.b)) * edge
    return s.c1_sq * np.where(x <= -p.b, left, np.where(x >= p.b, right, inner))


def edge_density_factor(s: BoundState) -> float:
    """k (k cos kb + alpha_R sin kb)(cos kb + Lambda/2k sin kb): rho_D(+-b)/|C1|^2."""
    co = _coefficients(s.params, s.k)
    return s.k * co.w * co.e


def alpha_r_small_vi(p: WellParams, k: float) -> float:
    """Leading small-vI behaviour of alpha_R.

    sqrt|v0 - k^2| below the well edge, vI / (2 sqrt|v0 - k^2|) above it.
    """
    d = p.v0 - k * k
    if d == 0:
        raise InvalidParameterError("alpha_R asymptotics are singular at k^2 = v0")
    if d > 0:
        return math.sqrt(d)
    return p.vI / (2 * math.sqrt(-d))
