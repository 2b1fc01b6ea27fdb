"""Bound-state spectrum: secular equation, real roots, continuation in Lambda
and exceptional points.

The secular function is linear in Lambda,

    f(k, Lambda) = Lambda * G(k) + H(k),

which the exceptional-point solver exploits for an exact d f / d Lambda.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from .core import PTWellError, InvalidParameterError, WellParams, alpha_values, decompose_alpha

DEDUP_TOL = 1e-8
IMAG_TOL = 1e-10


class ContinuationStall(PTWellError):
    """Newton corrector failed after all step halvings."""


class NoConvergence(PTWellError):
    pass


class NotAPairError(PTWellError):
    """Branches handed to the EP locator do not approach each other."""


@dataclass
class SpectralBranch:
    branch_id: int
    samples: list = field(default_factory=list)  # (Lambda, k) with k complex
    ep: Optional[tuple] = None  # (Lambda_star, k_star)
    chi: Optional[float] = None
    ep_residual: Optional[float] = None
    end_reason: Optional[str] = None

    @property
    def lambdas(self) -> np.ndarray:
        return np.array([s[0] for s in self.samples])

    @property
    def ks(self) -> np.ndarray:
        return np.array([s[1] for s in self.samples], dtype=complex)

    def real_samples(self, imag_tol: float = IMAG_TOL) -> list:
        return [(lam, k) for lam, k in self.samples if abs(k.imag) <= imag_tol]


@dataclass(frozen=True)
class EPRecord:
    Lambda_star: float
    k_star: float
    branch_pair: tuple
    residual: float
    kappa_bound: float


# -- secular equation -------------------------------------------------------

def _secular_parts(p: WellParams, k):
    """(G, H) with f = Lambda*G + H, for real or complex k (scalar or array)."""
    alpha, alpha_t = alpha_values(p, k)
    k = np.asarray(k) if not np.isscalar(k) else k
    k2 = k * k
    prod = alpha * alpha_t
    ssum = alpha + alpha_t
    c2 = np.cos(2 * k * p.b)
    s2 = np.sin(2 * k * p.b)
    G = (k2 + prod) + (k2 - prod) * c2 + k * ssum * s2
    H = 2 * k2 * ssum * c2 + 2 * k * (prod - k2) * s2
    return G, H


def secular_residual(p: WellParams, k):
    """Secular (transcendental) function whose zeros are the bound-state k.

    f(k) = (k^2 + a a~) L + (2k^2 (a + a~) + (k^2 - a a~) L) cos 2kb
           + k (2 (a a~ - k^2) + (a + a~) L) sin 2kb
    """
    G, H = _secular_parts(p, k)
    return p.Lambda * G + H


def secular_scale(p: WellParams, k) -> float:
    """Magnitude of the individual terms of f, used for relative tolerances."""
    k = complex(k)
    alpha, alpha_t = alpha_values(p, k)
    k2 = abs(k) ** 2
    prod = abs(alpha * alpha_t)
    ssum = abs(alpha + alpha_t)
    growth = math.exp(2 * abs(k.imag) * p.b)
    return max(1.0, (p.Lambda * (k2 + prod) + 2 * k2 * ssum + abs(k) * (2 * (prod + k2) + ssum * p.Lambda)) * growth)


def _require_real(k):
    if np.iscomplexobj(k) and np.any(np.imag(k) != 0):
        raise InvalidParameterError("pt_phase_residual is defined for real k only")
    return np.real(k).astype(float) if isinstance(k, np.ndarray) else float(np.real(k))


def pt_phase_parts(p: WellParams, k):
    """Return the (Hermitian, non-Hermitian) addends of the real PT-phase form."""
    k = _require_real(k)
    alpha_r, alpha_i = decompose_alpha(p.v0, p.vI, k)
    c = np.cos(k * p.b)
    s = np.sin(k * p.b)
    w = k * c + alpha_r * s
    hermitian = (2 * p.Lambda * w + 4 * k * (alpha_r * c - k * s)) * w
    non_hermitian = 2 * alpha_i**2 * s * (2 * k * c + p.Lambda * s)
    return hermitian, non_hermitian


def pt_phase_residual(p: WellParams, k):
    """Real-valued form of the secular equation valid for real k."""
    hermitian, non_hermitian = pt_phase_parts(p, k)
    return hermitian + non_hermitian


def default_seed_count(k_max: float, b: float) -> int:
    return max(400, int(math.ceil(40 * k_max * b)))


def find_real_roots(p: WellParams, k_max: float, n_seeds: Optional[int] = None) -> list:
    """All real roots of the PT-phase secular equation in (0, k_max].

    Sign changes on a uniform seed grid are polished with Brent's method.
    Roots with alpha_R = 0 (possible only for vI = 0, k^2 >= v0) are dropped:
    they are not normalizable.
    """
    if not k_max > 0:
        raise InvalidParameterError(f"k_max must be > 0, got {k_max}")
    n = default_seed_count(k_max, p.b) if n_seeds is None else int(n_seeds)
    if n < 2:
        raise InvalidParameterError("n_seeds must be >= 2")
    grid = np.linspace(k_max / n, k_max, n)
    values = pt_phase_residual(p, grid)
    roots = []

    def g(k):
        return float(pt_phase_residual(p, k))

    for i in range(n - 1):
        a, b_ = grid[i], grid[i + 1]
        fa, fb = values[i], values[i + 1]
        if fa == 0.0:
            roots.append(a)
        elif fa * fb < 0:
            roots.append(brentq(g, a, b_, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200))
    if values[-1] == 0.0:
        roots.append(grid[-1])

    roots.sort()
    unique = []
    for r in roots:
        if unique and r - unique[-1] <= DEDUP_TOL:
            continue
        unique.append(float(r))
    if p.vI == 0:
        unique = [r for r in unique if r * r < p.v0]
    return unique


# -- derivatives --------------------------------------------------------------

def dsecular_dk(p: WellParams, k, h: Optional[float] = None) -> complex:
    """Central-difference derivative of f along the real direction."""
    k = complex(k)
    if h is None:
        h = 1e-7 * (1 + abs(k))
    return (secular_residual(p, k + h) - secular_residual(p, k - h)) / (2 * h)


def _real_slope(p: WellParams, k: float) -> float:
    return float(np.real(dsecular_dk_exact(p, k)))


def _secular_parts_dk(p: WellParams, k):
    """Analytic d/dk of (G, H), using d alpha/dk = -k/alpha."""
    alpha, alpha_t = alpha_values(p, k)
    k2 = k * k
    P = alpha * alpha_t
    S = alpha + alpha_t
    # a^2 + a~^2 = 2 (v0 - k^2)
    dP = -2 * k * (p.v0 - k2) / P
    dS = -k * S / P
    b = p.b
    c2 = np.cos(2 * k * b)
    s2 = np.sin(2 * k * b)
    dG = (2 * k + dP) + (2 * k - dP) * c2 - 2 * b * (k2 - P) * s2 + (S + k * dS) * s2 + 2 * b * k * S * c2
    dH = (
        (4 * k * S + 2 * k2 * dS) * c2
        - 4 * b * k2 * S * s2
        + (2 * (P - k2) + 2 * k * (dP - 2 * k)) * s2
        + 4 * b * k * (P - k2) * c2
    )
    return dG, dH


def dsecular_dk_exact(p: WellParams, k):
    """Analytic derivative df/dk."""
    dG, dH = _secular_parts_dk(p, k)
    return p.Lambda * dG + dH


def dsecular_dk_cs(p: WellParams, k: float, h: float = 1e-6) -> float:
    """Complex-step derivative of f for real k.

    The step cannot be taken tiny: a a~ carries an O(eps) spurious imaginary
    part on the real axis which the 1/h division amplifies.
    """
    return float(np.imag(secular_residual(p, complex(k, h)))) / h


def _dG_dk(p: WellParams, k: float) -> float:
    dG, _ = _secular_parts_dk(p, k)
    return float(np.real(dG))


def _d2secular_dk2(p: WellParams, k: float) -> float:
    h = 1e-5 * (1 + abs(k))
    return float(np.real(dsecular_dk_exact(p, k + h) - dsecular_dk_exact(p, k - h))) / (2 * h)


# -- Newton corrector ------------------------------------------------------

def newton_root(p: WellParams, k0: complex, max_iter: int = 40, rtol: float = 1e-12):
    """Complex Newton on f(., Lambda) with finite-difference derivative.

    Returns the converged root or None.
    """
    k = complex(k0)
    for _ in range(max_iter):
        fk = secular_residual(p, k)
        dfk = dsecular_dk(p, k)
        if dfk == 0 or not cmath.isfinite(dfk):
            return None
        step = fk / dfk
        k = k - step
        if not cmath.isfinite(k):
            return None
        if abs(step) <= 1e-14 * (1 + abs(k)):
            if abs(secular_residual(p, k)) <= rtol * secular_scale(p, k):
                return k
    if abs(secular_residual(p, k)) <= rtol * secular_scale(p, k):
        return k
    return None


# -- exceptional points ------------------------------------------------------

def _double_root_system(p: WellParams, k: float, lam: float):
    q = p.with_lambda(lam)
    f = float(np.real(secular_residual(q, k)))
    fk = float(np.real(dsecular_dk_exact(q, k)))
    return f, fk


def solve_double_root(p: WellParams, k_seed: float, lam_seed: float, max_iter: int = 60, tol: float = 1e-10):
    """Damped Newton on f = 0, df/dk = 0 over real (k, Lambda).

    Iterates past ``tol`` while the residual still drops, so the returned
    point is polished to roundoff. Returns (k_star, Lambda_star, residual).
    """
    k, lam = float(k_seed), float(lam_seed)
    F = np.array(_double_root_system(p, k, lam))
    norm = float(np.hypot(*F))
    for _ in range(max_iter):
        if norm <= 1e-3 * tol:
            break
        G, _ = _secular_parts(p, k)
        J = np.array([
            [F[1], float(np.real(G))],
            [_d2secular_dk2(p.with_lambda(lam), k), _dG_dk(p, k)],
        ])
        try:
            delta = np.linalg.solve(J, -F)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"singular Jacobian at k={k}, Lambda={lam}") from exc
        t = 1.0
        while t > 1e-4:
            k_new, lam_new = k + t * delta[0], lam + t * delta[1]
            F_new = np.array(_double_root_system(p, k_new, lam_new))
            norm_new = float(np.hypot(*F_new))
            if norm_new < norm:
                break
            t *= 0.5
        else:
            break  # no further decrease: roundoff floor or a genuine stall
        k, lam, F, norm = k_new, lam_new, F_new, norm_new
    if not norm <= tol:
        raise NoConvergence(f"double-root residual {norm:.3e} > {tol:.1e} at k={k}, Lambda={lam}")
    return k, lam, norm


def ep_bound_curve(p: WellParams, Lambda: float) -> float:
    """kappa(Lambda) = sqrt(v0^2 + vI^2) / Lambda."""
    if Lambda == 0:
        raise ZeroDivisionError("kappa(Lambda) is undefined at Lambda = 0")
    return p.potential_modulus / Lambda


def asymptotic_sin2kb(p: WellParams, chi: float):
    """Large-k values of sin(2kb) on the curve Lambda = chi/k.

    Returns None when chi^2 > v0^2 + vI^2 (no real solution).
    """
    r2 = p.v0**2 + p.vI**2
    radicand = p.vI**2 * (r2 - chi**2)
    if radicand < 0:
        return None
    root = math.sqrt(radicand)
    return (p.v0 * chi + root) / r2, (p.v0 * chi - root) / r2


def locate_exceptional_point(
    p: WellParams,
    branch_a: SpectralBranch,
    branch_b: SpectralBranch,
    merge_window: Optional[float] = None,
) -> EPRecord:
    """Exceptional point where two real branches coalesce."""
    if merge_window is None:
        merge_window = math.pi / (2 * p.b)
    real_a = dict(branch_a.real_samples())
    real_b = dict(branch_b.real_samples())
    common = sorted(set(real_a) & set(real_b))
    if not common:
        raise NotAPairError("branches share no real Lambda samples")
    gap_first = abs(real_a[common[0]].real - real_b[common[0]].real)
    lam = common[-1]
    ka, kb = real_a[lam].real, real_b[lam].real
    gap_last = abs(ka - kb)
    if gap_last > merge_window or (len(common) > 1 and gap_last >= gap_first):
        raise NotAPairError(
            f"branches {branch_a.branch_id}, {branch_b.branch_id} do not approach "
            f"(gap {gap_last:.3g} at Lambda={lam:.6g})"
        )
    k_star, lam_star, residual = solve_double_root(p, 0.5 * (ka + kb), lam)
    if lam_star < lam - 1e-9 * (1 + lam):
        raise NoConvergence(f"EP solve moved backwards to Lambda={lam_star} < {lam}")
    return EPRecord(
        Lambda_star=lam_star,
        k_star=k_star,
        branch_pair=(branch_a.branch_id, branch_b.branch_id),
        residual=residual,
        kappa_bound=ep_bound_curve(p, lam_star),
    )


# -- continuation -----------------------------------------------------------

def _merge_distance(p: WellParams, k: float) -> float:
    """Estimated distance to the partner root, 2 |f_k / f_kk|."""
    fk = float(np.real(dsecular_dk_exact(p, k)))
    fkk = _d2secular_dk2(p, k)
    if fkk == 0:
        return math.inf
    return abs(2 * fk / fkk)


def _post_ep_seed(p: WellParams, k_star: float, lam_star: float, lam: float, sign: int) -> complex:
    """Seed for the complex root just past the EP from the local quadratic model."""
    q = p.with_lambda(lam_star)
    G, _ = _secular_parts(p, k_star)
    fkk = _d2secular_dk2(q, k_star)
    delta2 = -2 * float(np.real(G)) * (lam - lam_star) / fkk
    delta = cmath.sqrt(delta2)
    if delta.imag * sign < 0:
        delta = -delta
    return complex(k_star) + delta


def _on_cut(p: WellParams, k: complex, rel: float = 0.05) -> bool:
    """True if k sits near the branch cut of alpha or alpha_tilde.

    Crossing it means Re(alpha) would turn negative: the state stops being
    normalizable (Im E reaches +-vI, the edge of the outer continuum).
    """
    k2 = k * k
    for z in (p.v0 + 1j * p.vI - k2, p.v0 - 1j * p.vI - k2):
        if z.real < 0 and abs(z.imag) <= rel * abs(z):
            return True
    return False


class _Tracer:
    """Mutable state of one continuation run."""

    def __init__(self, p, branch, step, max_iter, imag_tol):
        self.p = p
        self.branch = branch
        self.step = step
        self.max_iter = max_iter
        self.imag_tol = imag_tol
        self.max_jump = math.pi / (4 * p.b)
        self.merge_window = 1e-3 * math.pi / (2 * p.b)
        self.lam, self.k = branch.samples[-1]
        self.prev = None
        self.complex_mode = abs(self.k.imag) > imag_tol
        self.slope_sign = 0 if self.complex_mode else np.sign(_real_slope(p.with_lambda(self.lam), self.k.real))

    def predict(self, lam_try):
        k = self.k
        if self.prev is not None and self.lam > self.prev[0]:
            k = k + (self.k - self.prev[1]) / (self.lam - self.prev[0]) * (lam_try - self.lam)
        return k if self.complex_mode else complex(k.real, 0.0)

    def correct(self, lam_try):
        """Newton from the predictor; returns the accepted root or None."""
        q = self.p.with_lambda(lam_try)
        k_new = newton_root(q, self.predict(lam_try), max_iter=self.max_iter)
        if k_new is None or abs(k_new - self.k) > self.max_jump:
            return None
        if self.complex_mode:
            if abs(k_new.imag) <= self.imag_tol or np.sign(k_new.imag) != np.sign(self.k.imag):
                return None
            return k_new
        if abs(k_new.imag) > self.imag_tol:
            return None
        k_new = complex(k_new.real, 0.0)
        # a flipped slope sign means Newton landed on the partner root
        if np.sign(_real_slope(q, k_new.real)) != self.slope_sign:
            return None
        return k_new

    def accept(self, lam, k):
        self.prev = (self.lam, self.k)
        self.lam, self.k = lam, k
        self.branch.samples.append((lam, k))
        if not self.complex_mode:
            self.slope_sign = np.sign(_real_slope(self.p.with_lambda(lam), k.real))

    def try_exceptional_point(self, lam_limit):
        """Locate an EP ahead of the current real sample; returns it or None."""
        if self.complex_mode or self.lam <= 0:
            return None
        try:
            k_star, lam_star, residual = solve_double_root(self.p, self.k.real, self.lam)
        except NoConvergence:
            return None
        if not (self.lam - 1e-9 <= lam_star <= lam_limit + 1e-9):
            return None
        if abs(k_star - self.k.real) > self.max_jump:
            return None
        return k_star, lam_star, residual

    def enter_complex(self, k_star, lam_star, residual, lam_next):
        br = self.branch
        br.ep = (lam_star, k_star)
        br.chi = lam_star * k_star
        br.ep_residual = residual
        sign = 1 if self.k.real <= k_star else -1
        lam_c = max(lam_next, lam_star + 1e-9 * (1 + lam_star))
        seed = _post_ep_seed(self.p, k_star, lam_star, lam_c, sign)
        k_c = newton_root(self.p.with_lambda(lam_c), seed, max_iter=self.max_iter)
        if k_c is None or abs(k_c.imag) <= self.imag_tol:
            raise ContinuationStall(
                f"branch {br.branch_id}: could not leave EP at Lambda*={lam_star:.12g}"
            )
        if np.sign(k_c.imag) != sign:
            k_c = k_c.conjugate()
        self.complex_mode = True
        self.lam, self.k = lam_star, complex(k_star)
        self.accept(lam_c, k_c)


def continue_branch(
    p: WellParams,
    k0: float,
    Lambda_range: tuple,
    step: float,
    branch_id: int = 0,
    max_iter: int = 40,
    imag_tol: float = IMAG_TOL,
) -> SpectralBranch:
    """Trace k(Lambda) from a root k0 at Lambda_range[0].

    Predictor: secant extrapolation. Corrector: complex Newton. Accepted
    samples always include the checkpoints start + n*step. The step is halved
    on corrector failure and doubled after 5 consecutive successes, never
    exceeding ``step``.

    When the branch merges with its partner the exceptional point is located
    and tracing continues in the complex plane, with Im k > 0 for the lower
    member of the pair and Im k < 0 for the upper one. A complex branch that
    reaches the branch cut of alpha (Im E = +-vI) leaves the bound spectrum;
    tracing stops there and ``end_reason`` is set to "continuum".
    """
    lam0, lam1 = float(Lambda_range[0]), float(Lambda_range[1])
    if not step > 0:
        raise InvalidParameterError("step must be > 0")
    if lam1 < lam0:
        raise InvalidParameterError("Lambda_range must be increasing")

    k = newton_root(p.with_lambda(lam0), complex(k0), max_iter=max_iter)
    if k is None:
        raise NoConvergence(f"k0={k0} is not a root at Lambda={lam0}")
    if abs(k.imag) <= imag_tol:
        k = complex(k.real, 0.0)
    branch = SpectralBranch(branch_id=branch_id, samples=[(lam0, k)])
    tr = _Tracer(p, branch, step, max_iter, imag_tol)

    n_checkpoints = int(math.floor((lam1 - lam0) / step + 1e-9))
    checkpoints = [lam0 + i * step for i in range(1, n_checkpoints + 1)]
    if not checkpoints or checkpoints[-1] < lam1 - 1e-12 * (1 + abs(lam1)):
        checkpoints.append(lam1)

    h, successes = step, 0
    for target in checkpoints:
        while tr.lam < target:
            halvings = 0
            while True:
                lam_try = tr.lam + h
                if lam_try > target - 1e-9 * step:  # snap so checkpoints are never doubled
                    lam_try = target
                k_new = tr.correct(lam_try)
                if k_new is not None or halvings == 3:
                    break
                halvings += 1
                h = 0.5 * (lam_try - tr.lam)
                successes = 0
            if k_new is not None:
                tr.accept(lam_try, k_new)
                successes += 1
                if successes >= 5:
                    h, successes = min(step, 2 * h), 0
                # pre-emptive EP search once the partner root is inside the merge window
                if not tr.complex_mode and _merge_distance(p.with_lambda(tr.lam), tr.k.real) <= tr.merge_window:
                    found = tr.try_exceptional_point(lam1)
                    if found is not None:
                        tr.enter_complex(*found, lam_next=min(found[1] + h, lam1))
                        h, successes = step, 0
                continue
            if tr.complex_mode and _on_cut(p, tr.predict(lam_try)):
                branch.end_reason = "continuum"
                return branch
            found = tr.try_exceptional_point(lam_try)
            if found is None:
                raise ContinuationStall(
                    f"branch {branch_id}: Newton failed near Lambda={tr.lam:.12g} after 3 step halvings"
                )
            tr.enter_complex(*found, lam_next=lam_try)
            h, successes = step, 0
    return branch


def pair_exceptional_points(p: WellParams, branches: list) -> list:
    """Match branches that ended at the same EP into EPRecords.

    Three-way near-coincidences are resolved by pairing the two closest.
    """
    with_ep = [br for br in branches if br.ep is not None]
    used = set()
    records = []
    for br in with_ep:
        if br.branch_id in used:
            continue
        lam_s, k_s = br.ep
        best, best_d = None, math.inf
        for other in with_ep:
            if other.branch_id == br.branch_id or other.branch_id in used:
                continue
            lam_o, k_o = other.ep
            d = math.hypot(lam_o - lam_s, k_o - k_s)
            if d < best_d:
                best, best_d = other, d
        if best is None or best_d > 1e-6 * (1 + abs(k_s) + abs(lam_s)):
            continue
        used.update({br.branch_id, best.branch_id})
        residual = max(br.ep_residual or 0.0, best.ep_residual or 0.0)
        records.append(EPRecord(
            Lambda_star=lam_s,
            k_star=k_s,
            branch_pair=tuple(sorted((br.branch_id, best.branch_id))),
            residual=residual,
            kappa_bound=ep_bound_curve(p, lam_s),
        ))
    records.sort(key=lambda r: r.k_star)
    return records


def _trace_one(args):
    p, k0, lam_range, step, branch_id = args
    try:
        return continue_branch(p, k0, lam_range, step, branch_id=branch_id), None
    except PTWellError as exc:
        return None, f"branch {branch_id}: {exc}"


def trace_spectrum(
    p: WellParams,
    Lambda_range: tuple,
    step: float,
    k_max: float,
    jobs: int = 1,
):
    """Continue every real root present at Lambda_range[0].

    Returns (branches, ep_records, failures); a stalled branch is reported in
    failures rather than aborting the sweep.
    """
    start = p.with_lambda(Lambda_range[0])
    roots = find_real_roots(start, k_max)
    tasks = [(start, k0, Lambda_range, step, i) for i, k0 in enumerate(roots)]
    if jobs > 1 and len(tasks) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_trace_one, tasks))
    else:
        results = [_trace_one(t) for t in tasks]
    branches = [br for br, _ in results if br is not None]
    failures = [msg for _, msg in results if msg is not None]
    eps = pair_exceptional_points(start, branches)
    return branches, eps, failures


def ep_branch_gap(p: WellParams, ep: EPRecord, eps: float, window: Optional[float] = None):
    """The two real roots at Lambda* - eps on either side of k*.

    The initial half-width is the quadratic estimate sqrt(2 G eps / |f_kk|);
    it doubles until each side brackets a sign change.
    """
    q = p.with_lambda(ep.Lambda_star - eps)
    limit = math.pi / (4 * p.b)
    k0 = ep.k_star
    if window is None:
        G, _ = _secular_parts(p, k0)
        fkk = abs(_d2secular_dk2(p.with_lambda(ep.Lambda_star), k0))
        window = 2 * math.sqrt(2 * abs(float(np.real(G))) * eps / fkk) if fkk > 0 else math.sqrt(eps)

    def g(k):
        return float(pt_phase_residual(q, k))

    g0 = g(k0)
    roots = []
    for direction in (-1, 1):
        w = min(window, limit)
        while np.sign(g(k0 + direction * w)) == np.sign(g0):
            if w >= limit:
                raise NoConvergence(f"no root within {limit:.3g} of k*={k0} at eps={eps}")
            w = min(2 * w, limit)
        a, b = sorted((k0, k0 + direction * w))
        roots.append(brentq(g, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    return roots[0], roots[1]


