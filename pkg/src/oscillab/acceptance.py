"""Acceptance suite: ten end-to-end checks with pinned tolerances.

Each check returns a :class:`CriterionResult` carrying the measured numbers,
so a failing check reports how far off it is rather than just ``False``.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor, ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .asymptotics import (
    a2_identity_check,
    f32_expansion_check,
    f32_offset,
    monotonicity_check,
    prefactor_expansion_check,
    prefactor_offset,
    theorem1_sweep,
)
from .laguerre import RadialMode, overlap_closed_array, quadrature_moments, weight_exponent
from .nodal import SphericalCombo, limit_nodal_measure, nodal_measure, quasimode_window, random_combo
from .perturbation import energy_series
from .potentials import PotentialSpec, TruncatedPotential, sampled_sup_norm
from .spectra.hamiltonian import track_eigenvalue
from .spectra.radial import estimate_growth

# pinned tolerances
OVERLAP_RTOL = 1e-10
OVERLAP_K_MAX = 12
OVERLAP_N_MAX = 200
OVERLAP_OFFSET = 24
SERIES_VS_ORACLE_TOL = 1e-8
RESIDUAL_HALVING_FACTOR = 1.6
RECONSTRUCTION_TOL = 1e-15
LEMMA_CONSTANT_SPREAD = 0.25
GROWTH_TOL = 0.05
NODAL_RATIO_SPREAD = 3.0
SLOPE_TOL = 0.15
LIMIT_RATIO_SPREAD = 2.0

# seed potentials for the window and dichotomy checks: V = c2 u**2 with
# |V''(0)| = 0.81 (delta = 0.9) at eps = 0.2
WINDOW_EPS = 0.2
WINDOW_C2 = 0.405
WINDOW_DELTA = 0.9
WINDOW_NS = (50, 100, 200)


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: dict = field(default_factory=dict)
    elapsed: float = 0.0
    budget: float | None = None

    @property
    def within_budget(self) -> bool:
        return self.budget is None or self.elapsed <= self.budget

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        parts = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        budget = f" budget={self.budget:g}s" if self.budget else ""
        return f"[{status}] {self.number:>2}. {self.title} ({self.elapsed:.1f}s{budget}) {parts}"

    def to_json(self) -> dict:
        return {"number": self.number, "title": self.title, "passed": self.passed,
                "measured": self.measured, "elapsed": self.elapsed, "budget": self.budget}


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    return v


def thread_count(threads: int | None = None) -> int:
    if threads:
        return threads
    env = os.environ.get("OSCILLAB_THREADS")
    return int(env) if env else (os.cpu_count() or 1)


def _loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


# --------------------------------------------------------------------------


def _overlap_block(d: int, ell: int) -> tuple[float, int, int]:
    alpha = weight_exponent(ell, d)
    a_max = (OVERLAP_N_MAX + OVERLAP_OFFSET - ell) // 2
    quad = quadrature_moments(alpha, a_max, OVERLAP_K_MAX)
    a = np.arange(a_max + 1)
    A, B = np.meshgrid(a, a, indexing="ij")
    worst, band_failures, checked = 0.0, 0, 0
    for k in range(OVERLAP_K_MAX + 1):
        closed = overlap_closed_array(k, A, B, alpha)
        inside = np.abs(A - B) <= k
        q = quad[k]
        rel = np.abs(closed[inside] - q[inside]) / np.abs(q[inside])
        worst = max(worst, float(rel.max()))
        band_failures += int(np.count_nonzero(closed[~inside]) + np.count_nonzero(q[~inside]))
        checked += closed.size
    return worst, band_failures, checked


def overlap_equivalence(threads: int | None = None) -> CriterionResult:
    """Closed-form overlaps against the Gauss rule on every (d, ell) block."""
    jobs = [(d, ell) for d in (2, 3) for ell in range(OVERLAP_N_MAX + 1)]
    with ThreadPoolExecutor(thread_count(threads)) as pool:
        results = list(pool.map(lambda job: _overlap_block(*job), jobs))
    worst = max(r[0] for r in results)
    band = sum(r[1] for r in results)
    checked = sum(r[2] for r in results)
    passed = worst <= OVERLAP_RTOL and band == 0
    return CriterionResult(1, "overlap closed form vs quadrature", passed,
                           {"worst_rel": worst, "band_violations": band, "entries": checked})


def a2_closed_form_identity(seed: int = 20240601, trials: int = 100) -> CriterionResult:
    rng = np.random.default_rng(seed)
    failures = []
    for _ in range(trials):
        d = int(rng.choice([2, 3]))
        n = int(rng.integers(0, 201))
        ell = int(rng.choice(np.arange(n % 2, n + 1, 2)))
        if not a2_identity_check(n, ell, d):
            failures.append((d, n, ell))
    return CriterionResult(2, "exact second-moment identity", not failures,
                           {"trials": trials, "failures": len(failures), "seed": seed})


def series_vs_oracle() -> CriterionResult:
    delta = 0.05
    VK = TruncatedPotential.from_coeffs(delta**2 / 2)
    worst = 0.0
    for n in (40, 100):
        for ell in (0, n // 2, n):
            mode = RadialMode(2, n, ell, 1.0)
            for eps in (0.02, 0.05, 0.1):
                series = energy_series(mode, VK, eps, J=6).value
                tracked = track_eigenvalue(mode, VK, eps).value
                worst = max(worst, abs(series - tracked))
    return CriterionResult(3, "series (J=6) vs tracked diagonalization", worst <= SERIES_VS_ORACLE_TOL,
                           {"worst_abs": worst})


def level_spacing() -> CriterionResult:
    potentials = {
        "bump+": PotentialSpec.gaussian_bump(0.3, 1.0),
        "bump-": PotentialSpec.gaussian_bump(0.3, -1.0),
        "envelope": PotentialSpec.gaussian_envelope([0.0, 0.0, 0.5], 0.45),
    }
    worst_ratio, sup = 0.0, 0.0
    for V in potentials.values():
        sup = max(sup, sampled_sup_norm(V, 1.0))
        for n in (20, 50, 100):
            for ell in (n % 2, n):
                mode = RadialMode(2, n, ell, 1.0)
                for eps in (0.05, 0.1, 0.2):
                    shift = track_eigenvalue(mode, V, eps).shift
                    worst_ratio = max(worst_ratio, abs(shift) / (mode.hbar / 4))
    passed = worst_ratio < 1 and sup <= 1
    return CriterionResult(4, "tracked branch stays within hbar/4", passed,
                           {"worst_shift_over_quarter_hbar": worst_ratio, "sup_norm": sup})


def residual_scaling() -> CriterionResult:
    """Envelope of sup_ell |S_hat| and |T_hat| per level of max(delta, eps)."""
    S_env: dict[float, float] = {}
    T_env: dict[float, float] = {}
    recon = 0.0
    for delta in (0.04, 0.02, 0.01):
        for eps in (0.1, 0.05, 0.025):
            V = PotentialSpec.quadratic(delta**2 / 2, delta)
            sweep = theorem1_sweep(100, eps, V)
            level = max(delta, eps)
            S = max(abs(r.S_hat) for r in sweep if r.S_hat is not None)
            T = abs(sweep[0].T_hat)
            S_env[level] = max(S_env.get(level, 0.0), S)
            T_env[level] = max(T_env.get(level, 0.0), T)
            recon = max(recon, max(abs(r.reconstruct_shift() - r.shift) / abs(r.shift) for r in sweep))
    levels = sorted(S_env)
    S_factor = 2 ** _loglog_slope(levels, [S_env[x] for x in levels])
    T_factor = 2 ** _loglog_slope(levels, [T_env[x] for x in levels])
    passed = (S_factor >= RESIDUAL_HALVING_FACTOR and T_factor >= RESIDUAL_HALVING_FACTOR
              and recon <= RECONSTRUCTION_TOL)
    return CriterionResult(5, "residual scaling in max(delta, eps)", passed,
                           {"S_factor_per_halving": S_factor, "T_factor_per_halving": T_factor,
                            "T_at_largest": T_env[levels[-1]], "T_at_smallest": T_env[levels[0]],
                            "reconstruction_rel": recon})


def monotonicity() -> CriterionResult:
    delta, eps = 0.02, 0.05
    violations, pairs = 0, 0
    for sign in (1.0, -1.0):
        report = monotonicity_check(100, eps, PotentialSpec.quadratic(sign * delta**2 / 2, delta))
        violations += len(report.violations)
        pairs += report.pairs_checked
    return CriterionResult(6, "monotone in ell, both signs of c2", violations == 0 and pairs > 0,
                           {"pairs": pairs, "violations": violations})


def _lemma_constants(N: int, d: int) -> dict:
    pref = max(prefactor_expansion_check(b, N, ell, d).scaled_residual
               for b in range(9) for ell in range(N % 2, N + 1, 2))
    f32 = max(f32_expansion_check(k, b, N, ell, d).scaled_residual
              for k in range(1, 9) for b in range(k + 1) for ell in range(N % 2, N + 1, 2))
    S = max(abs(float(prefactor_offset(b, N, d))) * N / b for b in range(1, 9))
    T = max(abs(float(f32_offset(k, b, N, d))) * N / k**2 for k in range(1, 9) for b in range(k + 1))
    return {"prefactor": pref, "f32": f32, "S": S, "T": T}


def lemma_checks() -> CriterionResult:
    measured = {}
    passed = True
    for d in (2, 3):
        per_N = {N: _lemma_constants(N, d) for N in (100, 200, 400)}
        for key in ("prefactor", "f32"):
            fitted = per_N[100][key]
            worst = max(c[key] for c in per_N.values()) / fitted
            measured[f"d{d}_{key}_C"] = fitted
            measured[f"d{d}_{key}_max_over_fit"] = worst
            passed &= worst <= 1 + LEMMA_CONSTANT_SPREAD
        for key in ("S", "T"):
            vals = [c[key] for c in per_N.values()]
            mean = sum(vals) / len(vals)
            spread = 0.0 if mean == 0 else max(abs(v / mean - 1) for v in vals)
            measured[f"d{d}_{key}_C"] = mean
            measured[f"d{d}_{key}_spread"] = spread
            passed &= spread <= LEMMA_CONSTANT_SPREAD
    return CriterionResult(7, "prefactor and 3F2 expansion lemmas", passed, measured)


def _growth_error(args) -> float:
    return estimate_growth(*args).error


def growth_exponents(threads: int | None = None) -> CriterionResult:
    """Integrations run in separate processes (the ODE stepping holds the GIL)."""
    V = PotentialSpec.gaussian_bump(0.3)
    seeds = [(20, 0), (20, 10), (20, 20), (50, 0), (50, 24), (50, 50)]
    jobs = [(RadialMode(2, n, 0), 0.0, None) for n in (20, 50)]
    jobs += [(RadialMode(2, n, ell), 0.1, V) for n, ell in seeds]
    workers = min(thread_count(threads), len(jobs))
    if workers == 1:
        errors = [_growth_error(job) for job in jobs]
    else:
        with ProcessPoolExecutor(workers) as pool:
            errors = list(pool.map(_growth_error, jobs))
    worst0, worst1 = max(errors[:2]), max(errors[2:])
    return CriterionResult(8, "growth exponent at infinity", max(worst0, worst1) <= GROWTH_TOL,
                           {"worst_eps0": worst0, "worst_eps0.1": worst1})


def window_potential(sign: float) -> PotentialSpec:
    return PotentialSpec.quadratic(sign * WINDOW_C2, WINDOW_DELTA)


def nodal_scaling(seed: int = 7) -> CriterionResult:
    miscounts = [ell for ell in range(1, 513)
                 for label in ("cos", "sin")
                 if nodal_measure(SphericalCombo(2, ((ell, label, 1.0),)), 0).measure_raw != 2 * ell]
    rng = np.random.default_rng(seed)
    ratios = [nodal_measure(random_combo(3, [ell], rng), 6).measure_raw / ell
              for ell in (10, 20, 40) for _ in range(3)]
    spread = max(ratios) / min(ratios)
    V = window_potential(-1.0)
    slopes = {}
    for gamma in (0.0, 0.5, 1.0):
        windows = [quasimode_window(n, WINDOW_EPS, gamma, V) for n in WINDOW_NS]
        slopes[gamma] = _loglog_slope([w.hbar for w in windows], [w.ell_max for w in windows])
    slope_err = max(abs(slopes[g] + (1 - g)) for g in slopes)
    passed = not miscounts and spread <= NODAL_RATIO_SPREAD and slope_err <= SLOPE_TOL
    measured = {"tone_miscounts": len(miscounts), "sphere_ratio_spread": spread,
                "sphere_ratio_min": min(ratios), "sphere_ratio_max": max(ratios)}
    measured.update({f"slope_gamma{g}": s for g, s in slopes.items()})
    return CriterionResult(9, "nodal exactness and window scaling", passed, measured)


def sign_dichotomy(seed: int = 11) -> CriterionResult:
    rng = np.random.default_rng(seed)
    measured = {}
    passed = True
    for gamma in (0.0, 0.5):
        convex, concave, hbars = [], [], []
        for n in WINDOW_NS:
            for sign, sink in ((1.0, convex), (-1.0, concave)):
                V = window_potential(sign)
                window = quasimode_window(n, WINDOW_EPS, gamma, V)
                combo = random_combo(2, window.ells, rng)
                coeffs = {(ell, m): a for ell, m, a in combo.terms}
                limit = limit_nodal_measure(window, coeffs, V)
                sink.append((limit.ell_star, limit.measure_raw))
            hbars.append(window.hbar)
        convex_ok = all(ell == 0 and m == 0 for ell, m in convex)
        scaled = [m * h ** (1 - gamma) for (_, m), h in zip(concave, hbars)]
        spread = max(scaled) / min(scaled)
        slope = _loglog_slope(hbars, [m for _, m in concave])
        passed &= convex_ok and spread <= LIMIT_RATIO_SPREAD and abs(slope + (1 - gamma)) <= SLOPE_TOL
        measured[f"g{gamma}_convex_zero"] = convex_ok
        measured[f"g{gamma}_c"] = min(scaled)
        measured[f"g{gamma}_C"] = max(scaled)
        measured[f"g{gamma}_slope"] = slope
    return CriterionResult(10, "limit nodal measure sign dichotomy", passed, measured)


SUITE: dict[int, tuple[Callable[..., CriterionResult], float | None]] = {
    1: (overlap_equivalence, 120.0),
    2: (a2_closed_form_identity, 10.0),
    3: (series_vs_oracle, 60.0),
    4: (level_spacing, None),
    5: (residual_scaling, None),
    6: (monotonicity, None),
    7: (lemma_checks, None),
    8: (growth_exponents, 30.0),
    9: (nodal_scaling, None),
    10: (sign_dichotomy, None),
}


THREADED = {1, 8}


def run_criterion(number: int, threads: int | None = None) -> CriterionResult:
    func, budget = SUITE[number]
    start = time.perf_counter()
    result = func(threads) if number in THREADED else func()
    result.elapsed = time.perf_counter() - start
    result.budget = budget
    if not result.within_budget:
        result.passed = False
        result.measured["over_budget"] = True
    return result


def run_all(threads: int | None = None, numbers=None) -> list[CriterionResult]:
    return [run_criterion(k, threads) for k in (numbers or sorted(SUITE))]
