"""Independent numerical checks: finite-difference eigensolver and quadrature.

Nothing here calls the closed-form solvers except to pick box sizes and
shift targets, so agreement with them is a genuine cross-check.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse
import scipy.sparse.linalg
from scipy.integrate import IntegrationWarning, quad

from .core import InvalidParameterError, PTWellError, WellParams, alpha_pair

DENSE_MAX_N = 1500
TAIL_LENGTH = 14.0  # 2 alpha_R (L - b) = 28 gives a tail weight e^{-28} < 1e-12


class EigensolverError(PTWellError, RuntimeError):
    pass


class QuadratureError(PTWellError, ArithmeticError):
    pass


@dataclass(frozen=True)
class FDGrid:
    L: float
    N: int

    def __post_init__(self):
        if self.N < 3 or self.N % 2 == 0:
            raise InvalidParameterError(f"N must be odd and >= 3, got {self.N}")
        if not self.L > 0:
            raise InvalidParameterError(f"L must be > 0, got {self.L}")

    @property
    def h(self) -> float:
        return 2 * self.L / (self.N + 1)

    @property
    def delta_index(self) -> int:
        return (self.N - 1) // 2

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(1, self.N + 1)


def box_half_length(p: WellParams, ks) -> float:
    """Smallest L with e^{-2 alpha_R (L - b)} < 1e-12 for every k in ks."""
    ar = min(alpha_pair(p, float(k)).alpha_r for k in ks)
    if ar <= 0:
        raise InvalidParameterError("alpha_R = 0: state is not localized")
    return p.b + TAIL_LENGTH / ar


def _cell_average(p: WellParams, x: np.ndarray, h: float) -> np.ndarray:
    """Mean of the step potential over [x - h/2, x + h/2]."""
    lo, hi = x - h / 2, x + h / 2
    left = np.clip(np.minimum(hi, -p.b) - lo, 0, h)
    right = np.clip(hi - np.maximum(lo, p.b), 0, h)
    return (left * (p.v0 + 1j * p.vI) + right * (p.v0 - 1j * p.vI)) / h


def discretize(p: WellParams, g: FDGrid) -> scipy.sparse.csr_matrix:
    """Central-difference H = -d^2/dx^2 + V with Dirichlet walls at +-L."""
    h = g.h
    diag = 2 / h**2 + _cell_average(p, g.x, h)
    diag[g.delta_index] += p.Lambda / h
    off = np.full(g.N - 1, -1 / h**2, dtype=complex)
    return scipy.sparse.diags([off, diag, off], [-1, 0, 1], format="csr")


def _is_continuum(p: WellParams, E) -> np.ndarray:
    """Box-quantized outer-region modes: Re E > v0 and |Im E| near vI."""
    E = np.asarray(E)
    if p.vI == 0:
        return E.real > p.v0
    return (E.real > p.v0) & (np.abs(E.imag) >= p.vI / 2)


def _sparse_eigs(H, n, shift, return_vectors):
    try:
        return scipy.sparse.linalg.eigs(H.tocsc(), k=n, sigma=shift, which="LM", return_eigenvectors=return_vectors, tol=0)
    except scipy.sparse.linalg.ArpackError as exc:  # pragma: no cover - solver failure is rare
        raise EigensolverError(str(exc)) from exc


def oracle_eigenpairs(p: WellParams, g: FDGrid, count: int, method: str = "auto", shift: float = 0.0):
    """The count bound eigenpairs with smallest Re E, continuum modes removed.

    method='dense' diagonalizes the full matrix; 'sparse' uses shift-invert
    about ``shift`` and grows the subspace until the kept set is provably
    complete (its largest |E - shift| is below the largest one returned).
    """
    if count > g.N:
        raise InvalidParameterError("count exceeds grid size")
    H = discretize(p, g)
    if method == "auto":
        method = "dense" if g.N <= DENSE_MAX_N else "sparse"
    if method == "dense":
        try:
            E, V = scipy.linalg.eig(H.toarray())
        except np.linalg.LinAlgError as exc:  # pragma: no cover
            raise EigensolverError(str(exc)) from exc
        keep = ~_is_continuum(p, E)
        E, V = E[keep], V[:, keep]
        order = np.argsort(E.real)[:count]
        return E[order], V[:, order]
    if method != "sparse":
        raise InvalidParameterError(f"unknown method {method!r}")
    n = min(max(2 * count + 4, 12), g.N - 2)
    while True:
        E, V = _sparse_eigs(H, n, shift, True)
        keep = ~_is_continuum(p, E)
        Ek, Vk = E[keep], V[:, keep]
        order = np.argsort(Ek.real)[:count]
        complete = len(order) == count and np.abs(Ek[order] - shift).max() < np.abs(E - shift).max()
        if complete or n >= g.N - 2:
            return Ek[order], Vk[:, order]
        n = min(2 * n, g.N - 2)


def oracle_spectrum(p: WellParams, g: FDGrid, count: int, method: str = "auto") -> np.ndarray:
    return oracle_eigenpairs(p, g, count, method)[0]


def eigenvalues_near(p: WellParams, g: FDGrid, target: float, n: int = 6) -> np.ndarray:
    E = _sparse_eigs(discretize(p, g), n, target, False)
    return E[~_is_continuum(p, E)]


def _complexified(p: WellParams, g: FDGrid, target: float, radius: float, rel: float) -> bool:
    E = eigenvalues_near(p, g, target)
    near = E[np.abs(E - target) < radius]
    return bool(np.any(np.abs(near.imag) > rel * abs(target)))


def oracle_complexification_lambda(
    p: WellParams, g: FDGrid, k_star: float, lam_lo: float, lam_hi: float, rtol: float = 1e-5, rel_imag: float = 1e-6
) -> float:
    """Bisect the delta strength at which the FD pair near k*^2 turns complex."""
    target = k_star**2
    radius = math.pi * k_star / (2 * p.b)

    def broken(lam):
        return _complexified(p.with_lambda(lam), g, target, radius, rel_imag)

    if broken(lam_lo) or not broken(lam_hi):
        raise EigensolverError(f"complexification not bracketed by [{lam_lo}, {lam_hi}]")
    while lam_hi - lam_lo > rtol * lam_hi:
        mid = 0.5 * (lam_lo + lam_hi)
        if broken(mid):
            lam_hi = mid
        else:
            lam_lo = mid
    return 0.5 * (lam_lo + lam_hi)


def eigenvector_mismatch(v: np.ndarray, psi: np.ndarray) -> float:
    """min_c ||v - c psi|| / ||v||, the L2 misfit up to a complex scalar."""
    c = np.vdot(psi, v) / np.vdot(psi, psi)
    return float(np.linalg.norm(v - c * psi) / np.linalg.norm(v))


def adaptive_quadrature(f, a: float, b: float, tol: float = 1e-10, max_subdivisions: int = 200) -> float:
    """Globally adaptive Gauss-Kronrod integral with absolute tolerance tol.

    Raises QuadratureError when the subdivision limit is hit or the error
    estimate exceeds tol.
    """
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, err = quad(f, a, b, epsabs=tol, epsrel=0.0, limit=max_subdivisions)
        except IntegrationWarning as exc:
            raise QuadratureError(f"quadrature on [{a}, {b}] did not converge: {exc}") from exc
    if err > tol:
        raise QuadratureError(f"error estimate {err:.3e} exceeds tol {tol:.3e}")
    return value


def piecewise_integral(f, p: WellParams, L: float, tol: float = 1e-10) -> float:
    """Integral of f over [-L, L] split at the kinks -b, 0, b."""
    edges = [-L, -p.b, 0.0, p.b, L]
    return sum(adaptive_quadrature(f, lo, hi, tol / 4) for lo, hi in zip(edges[:-1], edges[1:]))
