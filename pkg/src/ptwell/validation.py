"""Acceptance checks shared by the test suite and ``ptwell validate``.

Each check returns a CriterionResult holding the measured residuals next
to their tolerances. Level "quick" skips every finite-difference eigensolve.
"""

from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .boundstates import (
    bound_states,
    bound_wavefunction,
    make_bound_state,
    normalization_constant,
    wavefunction_derivative,
)
from .core import WellParams, alpha_pair
from .oracle import (
    EigensolverError,
    FDGrid,
    adaptive_quadrature,
    box_half_length,
    eigenvector_mismatch,
    oracle_complexification_lambda,
    oracle_eigenpairs,
    piecewise_integral,
)
from .scattering import scattering_coefficients, scattering_sample, transfer_matrix, transfer_matrix_minus
from .spectrum import _on_cut, ep_branch_gap, find_real_roots, newton_root, trace_spectrum
from .transport import (
    bound_flux,
    energy_flux_1_direct,
    energy_flux_2_direct,
    flux_transmission,
    probability_flux,
    scattering_fluxes,
    source_term,
)

SPECTRUM_WELL = WellParams(v0=9.0, vI=15.0, b=1.0, Lambda=0.0)
SCATTER_WELL = WellParams(v0=10.0, vI=10.0, b=1.0, Lambda=0.5)
CRIT1_LAMBDAS = (0.0, 0.5, 1.0, 2.0)
CRIT1_COUNT = 6
CRIT1_N = 4001
EP_ORACLE_N = 8001
LEVELS = ("quick", "full")


@dataclass
class Metric:
    value: float
    tol: float
    upper: bool = True  # value <= tol passes; False means value >= tol

    @property
    def ok(self) -> bool:
        if not math.isfinite(self.value):
            return False
        return self.value <= self.tol if self.upper else self.value >= self.tol


@dataclass
class CriterionResult:
    number: int
    name: str
    metrics: dict = field(default_factory=dict)
    elapsed: float = 0.0
    skipped: bool = False
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(m.ok for m in self.metrics.values())

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        parts = []
        for name, m in self.metrics.items():
            op = "<=" if m.upper else ">="
            parts.append(f"{name}={m.value:.3g} ({op} {m.tol:.3g})")
        text = f"{status} [{self.number:2d}] {self.name}: " + ", ".join(parts)
        if self.notes:
            text += " | " + "; ".join(self.notes)
        return text + f" [{self.elapsed:.1f}s]"


def _timed(number: int, name: str):
    def wrap(fn: Callable[..., CriterionResult]):
        @functools.wraps(fn)
        def run(level: str = "full") -> CriterionResult:
            t0 = time.perf_counter()
            res = CriterionResult(number, name)
            fn(res, level)
            res.elapsed = time.perf_counter() - t0
            return res

        return run

    return wrap


# -- shared fixtures ---------------------------------------------------------


@functools.lru_cache(maxsize=None)
def reference_trace():
    """Continuation of SPECTRUM_WELL over Lambda in [0, 8]."""
    return trace_spectrum(SPECTRUM_WELL, (0.0, 8.0), 0.05, 20.0)


@functools.lru_cache(maxsize=None)
def criterion1_states():
    """{Lambda: lowest six bound states} for SPECTRUM_WELL."""
    out = {}
    for lam in CRIT1_LAMBDAS:
        p = SPECTRUM_WELL.with_lambda(lam)
        out[lam] = [make_bound_state(p, k) for k in find_real_roots(p, 12.0)[:CRIT1_COUNT]]
    return out


def _max(values, default=0.0) -> float:
    values = list(values)
    return float(max(values)) if values else default


# -- criteria ----------------------------------------------------------------


@_timed(1, "oracle spectral agreement")
def check_oracle_spectrum(res: CriterionResult, level: str) -> None:
    if level == "quick":
        res.skipped = True
        res.notes.append("finite-difference eigensolves skipped at quick level")
        return
    t0 = time.perf_counter()
    worst, vec, counts = 0.0, 0.0, []
    for lam, states in criterion1_states().items():
        p = SPECTRUM_WELL.with_lambda(lam)
        counts.append(len(states))
        g = FDGrid(box_half_length(p, [s.k for s in states]), CRIT1_N)
        E, V = oracle_eigenpairs(p, g, len(states))
        ref = np.array([s.E for s in states])
        if len(E) < len(ref):
            worst = math.inf
            continue
        worst = max(worst, float(np.max(np.abs(E - ref) / ref)))
        vec = max(vec, max(eigenvector_mismatch(V[:, i], wavefunction_derivative(s, g.x)) for i, s in enumerate(states)))
    res.metrics["max_rel_err"] = Metric(worst, 5e-3)
    res.metrics["eigvec_misfit"] = Metric(vec, 1e-2)
    res.metrics["states_per_lambda"] = Metric(min(counts), CRIT1_COUNT, upper=False)
    res.metrics["runtime_s"] = Metric(time.perf_counter() - t0, 60.0)


def _complex_root_scan(p: WellParams, k_max: float, step: float = 0.1) -> float:
    """Largest |Im k| among physical-sheet roots reached from off-axis seeds."""
    worst = 0.0
    for re in np.arange(step, k_max, step):
        for im in (-0.5, -0.1, 0.1, 0.5):
            k = newton_root(p, complex(re, im))
            if k is None or not 0 < k.real < k_max or _on_cut(p, k):
                continue
            worst = max(worst, abs(k.imag))
    return worst


@_timed(2, "no PT breaking at Lambda = 0")
def check_no_breaking(res: CriterionResult, level: str) -> None:
    worst_imag, worst_oracle = 0.0, 0.0
    for vI in (5.0, 15.0, 30.0):
        p = WellParams(9.0, vI, 1.0, 0.0)
        worst_imag = max(worst_imag, _complex_root_scan(p, 12.0))
        if level == "full":
            ks = find_real_roots(p, 12.0)[:CRIT1_COUNT]
            g = FDGrid(box_half_length(p, ks), 2001)
            E, _ = oracle_eigenpairs(p, g, len(ks))
            worst_oracle = max(worst_oracle, float(np.max(np.abs(E.imag) / np.abs(E))))
    res.metrics["max_abs_im_k"] = Metric(worst_imag, 1e-10)
    if level == "full":
        res.metrics["oracle_max_im_over_abs_E"] = Metric(worst_oracle, 1e-8)


@_timed(3, "exceptional points: existence, residual, bound")
def check_exceptional_points(res: CriterionResult, level: str) -> None:
    _, eps, failures = reference_trace()
    res.metrics["ep_count"] = Metric(len(eps), 4, upper=False)
    res.metrics["max_residual"] = Metric(_max((e.residual for e in eps), math.inf), 1e-10)
    k_cut = 3 * math.sqrt(SPECTRUM_WELL.v0)
    ratios = [e.k_star / e.kappa_bound for e in eps if e.k_star > k_cut]
    res.metrics["max_kstar_over_bound"] = Metric(_max(ratios), 1.10)
    res.metrics["stalled_branches"] = Metric(len(failures), 0)
    if level == "quick":
        res.notes.append("oracle complexification skipped at quick level")
        return
    worst = 0.0
    for e in eps:
        g = FDGrid(box_half_length(SPECTRUM_WELL, [e.k_star]), EP_ORACLE_N)
        try:
            lam = oracle_complexification_lambda(SPECTRUM_WELL, g, e.k_star, 0.97 * e.Lambda_star, 1.03 * e.Lambda_star)
        except EigensolverError:
            worst = math.inf
            continue
        worst = max(worst, abs(lam - e.Lambda_star) / e.Lambda_star)
    res.metrics["oracle_lambda_rel_dev"] = Metric(worst, 0.02)


def gap_exponents(eps_grid=None) -> list:
    if eps_grid is None:
        eps_grid = np.logspace(-5, -2, 12)
    out = []
    for e in reference_trace()[1]:
        gaps = [hi - lo for lo, hi in (ep_branch_gap(SPECTRUM_WELL, e, x) for x in eps_grid)]
        out.append(float(np.polyfit(np.log(eps_grid), np.log(gaps), 1)[0]))
    return out


@_timed(4, "square-root splitting at the EPs")
def check_sqrt_scaling(res: CriterionResult, level: str) -> None:
    exps = gap_exponents()
    res.metrics["max_abs_exponent_minus_half"] = Metric(_max((abs(x - 0.5) for x in exps), math.inf), 0.1)


def small_vi_exponents(vis=None, n_states: int = 3) -> list:
    """Log-log slope of |C1|^2 against vI for the lowest states with k^2 > v0."""
    if vis is None:
        vis = np.logspace(-4, -1, 10)
    rows = []
    for vI in vis:
        p = WellParams(9.0, vI, 1.0, 0.5)
        ks = [k for k in find_real_roots(p, 8.0) if k * k > p.v0][:n_states]
        rows.append([normalization_constant(p, k) for k in ks])
    width = min(len(r) for r in rows)
    data = np.array([r[:width] for r in rows])
    return [float(np.polyfit(np.log(vis), np.log(data[:, j]), 1)[0]) for j in range(width)]


def density_integral(s) -> float:
    """Quadrature of |psi|^2 out to b + 40/alpha_R plus the exact exponential tails beyond."""
    ar = s.alpha.alpha_r
    L = s.params.b + 40 / ar
    inner = piecewise_integral(lambda x: abs(complex(wavefunction_derivative(s, x))) ** 2, s.params, L, tol=1e-12)
    tails = float(np.sum(np.abs(wavefunction_derivative(s, np.array([-L, L]))) ** 2)) / (2 * ar)
    return inner + tails


@_timed(5, "normalization")
def check_normalization(res: CriterionResult, level: str) -> None:
    worst = 0.0
    for states in criterion1_states().values():
        for s in states:
            worst = max(worst, abs(density_integral(s) - 1))
    res.metrics["max_abs_norm_err"] = Metric(worst, 1e-8)
    exps = small_vi_exponents()
    res.metrics["small_vi_exponent_dev"] = Metric(_max((abs(x - 1) for x in exps), math.inf), 0.05)


@_timed(6, "generalized unitarity")
def check_unitarity(res: CriterionResult, level: str) -> None:
    ks = np.linspace(0.01, 10.0, 1000)
    data = [scattering_coefficients(SCATTER_WELL, k) for k in ks]
    res.metrics["max_residual"] = Metric(_max(d.unitarity_residual for d in data), 1e-9)
    res.metrics["anomalous_points"] = Metric(sum(d.T > 1 for d in data), 1, upper=False)
    herm = SCATTER_WELL.with_vi(0.0)
    k_edge = math.sqrt(herm.v0)
    ks_h = ks[ks > k_edge + 1e-6]
    hd = [scattering_coefficients(herm, k) for k in ks_h]
    res.metrics["hermitian_T_plus_R"] = Metric(_max(abs(d.T + d.R_plus - 1) for d in hd), 1e-12)


@_timed(7, "reflection zeros at bound states")
def check_reflection_zeros(res: CriterionResult, level: str) -> None:
    worst = 0.0
    for states in criterion1_states().values():
        for s in states:
            worst = max(worst, abs(scattering_coefficients(s.params, s.k).r_plus))
    for k in find_real_roots(SCATTER_WELL, 10.0):
        worst = max(worst, abs(scattering_coefficients(SCATTER_WELL, k).r_plus))
    res.metrics["max_abs_r_plus"] = Metric(worst, 1e-8)


@_timed(8, "transfer-matrix identities")
def check_transfer_matrix(res: CriterionResult, level: str) -> None:
    det_err, inv_err, t_err = 0.0, 0.0, 0.0
    for k in np.linspace(0.01, 10.0, 1000):
        m = transfer_matrix(SCATTER_WELL, k)
        ap = alpha_pair(SCATTER_WELL, k)
        a = complex(ap.alpha_r, ap.alpha_i)
        det_err = max(det_err, abs(m.det + a / a.conjugate()))
        inv_err = max(inv_err, float(np.abs(transfer_matrix_minus(SCATTER_WELL, k) @ m.as_array() - np.eye(2)).max()))
        d = scattering_coefficients(SCATTER_WELL, k)
        t_err = max(t_err, abs(abs(d.t_plus) - abs(d.t_minus)) / abs(d.t_plus))
    res.metrics["det_err"] = Metric(det_err, 1e-11)
    res.metrics["inverse_err"] = Metric(inv_err, 1e-11)
    res.metrics["abs_t_mismatch"] = Metric(t_err, 1e-12)


def transport_residuals(s, n_inner: int = 201, n_outer: int = 200, h: float = 1e-4) -> dict:
    p = s.params
    b = p.b
    x_in = np.linspace(-b, b, n_inner + 2)[1:-1]
    x_in = x_in[x_in != 0]
    J_in = probability_flux(bound_wavefunction(s, x_in))
    const = float(np.max(np.abs(J_in - J_in.mean())) / abs(J_in.mean()))

    L = box_half_length(p, [s.k])
    out = np.concatenate([np.linspace(-L, -b - 10 * h, n_outer), np.linspace(b + 10 * h, L, n_outer)])

    def flux(x):
        return probability_flux(bound_wavefunction(s, x))

    dJ = (flux(out + h) - flux(out - h)) / (2 * h)
    Q = source_term(p, np.abs(wavefunction_derivative(s, out)) ** 2, out)
    scale = max(float(np.max(np.abs(Q))), abs(float(J_in.mean())) / b)
    cont = float(np.max(np.abs(dJ - Q))) / scale

    def q(x):
        return float(source_term(p, abs(complex(wavefunction_derivative(s, x))) ** 2, x))

    q_int = piecewise_integral(q, p, L, tol=1e-10)
    # PT symmetry cancels the two sides exactly; each side alone must carry J_d
    J0 = float(J_in.mean())
    gain = adaptive_quadrature(q, -L, -b, tol=1e-12 * max(1.0, J0))
    loss = adaptive_quadrature(q, b, L, tol=1e-12 * max(1.0, J0))
    side = max(abs(gain - J0), abs(loss + J0)) / J0

    xs = np.concatenate([x_in, out])
    kJ = s.E * flux(xs)
    norm = float(np.max(np.abs(kJ)))
    e1 = float(np.max(np.abs(energy_flux_1_direct(s, xs) - kJ))) / norm
    e2 = float(np.max(np.abs(energy_flux_2_direct(s, xs) - kJ))) / norm
    closed = float(np.max(np.abs(bound_flux(s, xs) - flux(xs)))) / float(np.max(np.abs(flux(xs))))
    return {"J_const": const, "continuity": cont, "Q_integral": abs(q_int), "Q_side": side, "J1E": e1, "J2E": e2, "closed": closed}


@_timed(9, "bound-state transport")
def check_transport(res: CriterionResult, level: str) -> None:
    agg: dict = {}
    for states in criterion1_states().values():
        for s in states:
            for key, val in transport_residuals(s).items():
                agg[key] = max(agg.get(key, 0.0), val)
    res.metrics["J_inside_rel_spread"] = Metric(agg["J_const"], 1e-10)
    res.metrics["continuity_residual"] = Metric(agg["continuity"], 1e-6)
    res.metrics["abs_int_Q_d"] = Metric(agg["Q_integral"], 1e-8)
    res.metrics["one_sided_int_Q_vs_J"] = Metric(agg["Q_side"], 1e-8)
    res.metrics["J1E_vs_k2Jd"] = Metric(agg["J1E"], 1e-10)
    res.metrics["J2E_vs_k2Jd"] = Metric(agg["J2E"], 1e-10)
    res.metrics["closed_vs_numeric_J"] = Metric(agg["closed"], 1e-10)


def scattering_flux_residuals(p: WellParams, ks) -> dict:
    cons, closed, unit = 0.0, 0.0, 0.0
    edges = np.array([-p.b, p.b])
    for k in ks:
        d = scattering_coefficients(p, k)
        for direction in ("left_to_right", "right_to_left"):
            J = probability_flux(scattering_sample(p, k, direction, edges, d))
            cons = max(cons, abs(J[0] - J[1]) / max(abs(J[0]), abs(J[1])))
            Jc = scattering_fluxes(p, k, direction, edges, d)
            closed = max(closed, float(np.max(np.abs(Jc - J))) / float(np.max(np.abs(J))))
        X = flux_transmission(p, k)
        flux_res = abs(X + d.sign_used * abs(d.r_plus * d.r_minus) - 1)
        unit = max(unit, abs(flux_res - d.unitarity_residual) / max(1.0, d.T))
    return {"conservation": cons, "closed": closed, "unitarity": unit}


@_timed(10, "scattering flux conservation")
def check_scattering_flux(res: CriterionResult, level: str) -> None:
    ks = np.linspace(0.01, 10.0, 400)
    agg: dict = {}
    for p in (SCATTER_WELL, SPECTRUM_WELL.with_lambda(0.5)):
        for key, val in scattering_flux_residuals(p, ks).items():
            agg[key] = max(agg.get(key, 0.0), val)
    res.metrics["edge_flux_mismatch"] = Metric(agg["conservation"], 1e-10)
    res.metrics["closed_vs_numeric_flux"] = Metric(agg["closed"], 1e-10)
    res.metrics["flux_vs_algebraic_unitarity"] = Metric(agg["unitarity"], 1e-12)


def flux_vs_vi(vis, Lambda: float = 0.5, n_states: int = CRIT1_COUNT) -> np.ndarray:
    """J_d(0) of the lowest n_states bound states, one row per vI."""
    rows = []
    for vI in vis:
        states = bound_states(WellParams(9.0, float(vI), 1.0, Lambda), 12.0)[:n_states]
        if len(states) < n_states:
            raise ValueError(f"only {len(states)} bound states at vI={vI}")
        rows.append([float(bound_flux(s, 0.0)) for s in states])
    return np.array(rows)


def branch_flux_monotonicity() -> list:
    """(branch_id, direction) for every real branch that ends at an EP; direction 0 means not monotone."""
    branches, _, _ = reference_trace()
    out = []
    for br in branches:
        if br.ep is None:
            continue
        lam_star = br.ep[0]
        J = [
            float(bound_flux(make_bound_state(SPECTRUM_WELL.with_lambda(lam), float(k.real), check=False), 0.0))
            for lam, k in br.real_samples()
            if 0 < lam <= lam_star
        ]
        d = np.diff(J)
        direction = 1 if np.all(d > 0) else (-1 if np.all(d < 0) else 0)
        out.append((br.branch_id, direction))
    return out


@_timed(11, "flux monotonicity")
def check_monotonicity(res: CriterionResult, level: str) -> None:
    vis = np.linspace(0.5, 20.0, 50)
    J = flux_vs_vi(vis)
    bad_vi = int(np.sum(np.diff(J, axis=0) <= 0))
    res.metrics["non_increasing_vi_steps"] = Metric(bad_vi, 0)
    mono = branch_flux_monotonicity()
    res.metrics["non_monotone_branches"] = Metric(sum(1 for _, d in mono if d == 0), 0)
    pairs = {}
    for e in reference_trace()[1]:
        pairs[e.branch_pair] = e
    dirs = dict(mono)
    same = sum(1 for a, b in pairs if dirs.get(a, 0) * dirs.get(b, 0) >= 0)
    res.metrics["pairs_not_opposite"] = Metric(same, 0)
    res.notes.append(f"vI grid [0.5, 20], {len(mono)} branches checked up to their EP")


CHECKS = [
    check_oracle_spectrum,
    check_no_breaking,
    check_exceptional_points,
    check_sqrt_scaling,
    check_normalization,
    check_unitarity,
    check_reflection_zeros,
    check_transfer_matrix,
    check_transport,
    check_scattering_flux,
    check_monotonicity,
]

FULL_RUN_BUDGET_S = 600.0


def run_validation(level: str = "full", report: Callable[[str], None] | None = None) -> list:
    """Run every criterion; the last result is the total-runtime check."""
    if level not in LEVELS:
        raise ValueError(f"level must be one of {LEVELS}, got {level!r}")
    t0 = time.perf_counter()
    results = []
    for check in CHECKS:
        r = check(level)
        results.append(r)
        if report is not None:
            report(r.line())
    total = CriterionResult(12, "full validation runtime")
    total.elapsed = time.perf_counter() - t0
    total.metrics["total_runtime_s"] = Metric(total.elapsed, FULL_RUN_BUDGET_S)
    if level == "quick":
        total.notes.append("budget applies to the full level")
    results.append(total)
    if report is not None:
        report(total.line())
    return results
