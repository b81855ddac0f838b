"""Quasimode windows and the nodal set of quasimodes far out in the forbidden region.

A quasimode is built from the eigenfunctions ``psi_{ell,n}(eps, r) Y(omega)``
whose energies lie within ``hbar**(1 + 2 gamma)`` of the lowest-``ell``
energy. Each radial factor grows like ``C r**N exp(-r**2 / 2hbar)`` with
``N = E_ell/hbar - d/2``, so on large spheres the block with the largest
energy takes over and the nodal set tends to that block's nodal set.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from ..asymptotics import branch_shift, second_derivative
from ..errors import DistinctnessError
from ..laguerre import RadialMode, radial_log_eigenfunction
from ..spectra.hamiltonian import track_branch
from ..spectra.radial import solve_radial
from .harmonics import SphericalCombo
from .measure import NodalSample, nodal_measure

DISTINCT_RTOL = 1e-12


@dataclass(frozen=True)
class QuasimodeWindow:
    """Members ``(ell, shift)`` of the energy window around the lowest-``ell`` branch.

    Energies are kept as shifts ``E_ell(eps) - E`` so that membership is
    decided without cancellation.
    """

    n: int
    eps: float
    gamma: float
    d: int
    E: float
    hbar: float
    center_shift: float
    halfwidth: float
    members: tuple[tuple[int, float], ...]
    engine: str

    @property
    def center(self) -> float:
        return self.E + self.center_shift

    @property
    def ells(self) -> list[int]:
        return [ell for ell, _ in self.members]

    @property
    def ell_max(self) -> int:
        return max(self.ells)

    def shift(self, ell: int) -> float:
        return dict(self.members)[ell]

    def energy(self, ell: int) -> float:
        return self.E + self.shift(ell)


def quasimode_window(n: int, eps: float, gamma: float, V, engine: str = "series", d: int = 2,
                     E: float = 1.0) -> QuasimodeWindow:
    """Admissible ``ell <= n`` with ``|E_ell(eps) - E_lowest(eps)| <= hbar**(1 + 2 gamma)``."""
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")
    base = RadialMode(d, n, n % 2, E)
    ells = range(base.ell_min, n + 1, 2)
    halfwidth = base.hbar ** (1 + 2 * gamma)
    if eps == 0:
        members = tuple((ell, 0.0) for ell in ells)
        return QuasimodeWindow(n, 0.0, gamma, d, E, base.hbar, 0.0, halfwidth, members, engine)
    shifts = {ell: branch_shift(base.with_ell(ell), V, eps, engine) for ell in ells}
    center = shifts[base.ell_min]
    members = tuple((ell, s) for ell, s in shifts.items() if abs(s - center) <= halfwidth)
    return QuasimodeWindow(n, float(eps), gamma, d, E, base.hbar, center, halfwidth, members, engine)


def _combo(window: QuasimodeWindow, coeffs: Mapping[tuple[int, object], float]) -> SphericalCombo:
    allowed = set(window.ells)
    terms = []
    for (ell, m), a in coeffs.items():
        if ell not in allowed:
            raise ValueError(f"ell={ell} is not a member of the window")
        terms.append((ell, m, a))
    return SphericalCombo(window.d, tuple(terms))


def _check_distinct(window: QuasimodeWindow, ells: Sequence[int]) -> None:
    tol = DISTINCT_RTOL * window.hbar
    for a, b in itertools.combinations(ells, 2):
        if abs(window.shift(a) - window.shift(b)) <= tol:
            raise DistinctnessError(f"energies of ell={a} and ell={b} coincide within {tol:.3g}", (a, b))


def dominant_frequency(window: QuasimodeWindow, coeffs: Mapping[tuple[int, object], float]) -> int:
    """``ell*``: the contributing ``ell`` with the largest energy (distinctness enforced)."""
    combo = _combo(window, coeffs)
    ells = combo.ells
    if not ells:
        raise ValueError("all coefficients vanish")
    _check_distinct(window, ells)
    return max(ells, key=window.shift)


@dataclass(frozen=True)
class LimitNodal:
    """Nodal measure of the ``ell*`` block, the large-radius limit of the quasimode."""

    ell_star: int
    sample: NodalSample
    curvature_sign: int
    expected: str

    @property
    def measure_raw(self) -> float:
        return self.sample.measure_raw


def limit_nodal_measure(window: QuasimodeWindow, coeffs: Mapping[tuple[int, object], float], V=None,
                        refinement: int | None = None) -> LimitNodal:
    """Nodal measure of the ``ell*``-restricted combination.

    With ``V''(0) > 0`` energies fall with ``ell`` and generic coefficients
    give the lowest ``ell`` (measure 0 for a constant block); with
    ``V''(0) < 0`` they rise and ``ell*`` is the window edge.
    """
    ell_star = dominant_frequency(window, coeffs)
    combo = _combo(window, coeffs).restricted(ell_star)
    if refinement is None:
        refinement = 1 if window.d == 2 else 5
    sample = nodal_measure(combo, refinement)
    sign = 0 if V is None else int(np.sign(second_derivative(V)))
    expected = {1: "lowest ell dominates", -1: "window edge dominates", 0: "unclassified"}[sign]
    return LimitNodal(ell_star, sample, sign, expected)


# --------------------------------------------------------------------------
# finite radius


@dataclass(frozen=True)
class RadialTail:
    """Reduced ``log|psi_ell(eps, r)| + r**2 / 2hbar`` of the normalized
    eigenfunction, usable at any r.

    Inside ``grid`` the integrated solution is interpolated; beyond it the
    tail ``log C + N log r`` is used with the exact exponent. The Gaussian
    factor is common to every ``ell`` and is left out so that huge radii stay
    finite.
    """

    ell: int
    exponent: float
    log_constant: float
    sign: float
    grid: np.ndarray
    log_abs: np.ndarray
    signs: np.ndarray
    hbar: float

    def reduced_log_value(self, log_r: float) -> tuple[float, float]:
        """Value and sign at ``r = exp(log_r)``."""
        if log_r <= math.log(self.grid[-1]):
            r = math.exp(log_r)
            i = int(np.clip(np.searchsorted(self.grid, r), 0, self.grid.size - 1))
            reduced = self.log_abs + self.grid**2 / (2 * self.hbar)
            return float(np.interp(r, self.grid, reduced)), float(self.signs[i])
        return self.log_constant + self.exponent * log_r, self.sign


def _basis_values(mode: RadialMode, a_lo: int, vector: np.ndarray, r: np.ndarray) -> np.ndarray:
    """``sum_a c_a psi_a(r)`` at the sector's hbar."""
    h, d, ell = mode.hbar, mode.d, mode.ell
    total = np.zeros_like(r)
    for i, c in enumerate(vector):
        if abs(c) < 1e-14:
            continue
        n_a = ell + 2 * (a_lo + i)
        m = RadialMode(d, n_a, ell, h * (n_a + d / 2))
        lv, sg = radial_log_eigenfunction(m, r)
        total += c * sg * np.exp(lv)
    return total


def radial_tail(mode: RadialMode, eps: float, V, r_outer: float | None = None, points: int = 1501) -> RadialTail:
    """Normalized radial eigenfunction of the tracked branch, continued to infinity.

    The scale comes from a least-squares match of the integrated solution to
    the basis expansion of the tracked eigenvector over the allowed region.
    """
    state = track_branch(mode, V, eps)
    energy = state.estimate.value
    h = mode.hbar
    r_turn = math.sqrt(2 * mode.E)
    r_outer = r_outer or math.sqrt(r_turn**2 + 60 * h)
    sol = solve_radial(mode, eps, V, energy, (0.05 * r_turn, r_outer), points=points)
    inner = sol.grid <= r_turn
    ref = float(np.max(sol.log_abs[inner]))
    ode = sol.sign[inner] * np.exp(sol.log_abs[inner] - ref)
    basis = _basis_values(mode, state.a_lo, state.vector, sol.grid[inner])
    scale = float(ode @ basis / (ode @ ode))
    log_abs = sol.log_abs + ref + math.log(abs(scale))
    signs = sol.sign * np.sign(scale)
    exponent = energy / h - mode.d / 2
    outer = slice(sol.grid.size - sol.grid.size // 3, None)
    r = sol.grid[outer]
    log_c = float(np.mean(log_abs[outer] + r * r / (2 * h) - exponent * np.log(r)))
    return RadialTail(mode.ell, exponent, log_c, float(signs[-1]), sol.grid, log_abs, signs, h)


@dataclass(frozen=True)
class RadiusConvergence:
    """Measures on spheres of radius ``exp(log_radii)`` and the large-radius limit."""

    log_radii: tuple[float, ...]
    measures: tuple[float, ...]
    limit: float
    ell_star: int

    @property
    def monotone(self) -> bool:
        d = np.diff([abs(m - self.limit) for m in self.measures])
        return bool(np.all(d <= 1e-9 * max(1.0, abs(self.limit))))

    @property
    def reaches_limit(self) -> bool:
        return abs(self.measures[-1] - self.limit) <= 1e-9 * max(1.0, abs(self.limit))


def finite_radius_convergence(window: QuasimodeWindow, coeffs: Mapping[tuple[int, object], float], V,
                              radii: Sequence[float] = (), refinement: int | None = None,
                              log_radii: Sequence[float] | None = None) -> RadiusConvergence:
    """Nodal measure of the quasimode on spheres of radius ``R`` versus the limit.

    Radii may be given as ``log_radii`` when the exponents differ so little
    that the crossover lies beyond floating-point range; everything past the
    integration grid is evaluated in logs.
    """
    logs_r = [math.log(r) for r in radii] + list(log_radii or ())
    if not logs_r:
        raise ValueError("no radii given")
    limit = limit_nodal_measure(window, coeffs, V, refinement)
    combo = _combo(window, coeffs)
    refinement = limit.sample.refinement
    tails = {ell: radial_tail(RadialMode(window.d, window.n, ell, window.E), window.eps, V) for ell in combo.ells}
    measures = []
    for log_r in logs_r:
        logs = {ell: t.reduced_log_value(log_r) for ell, t in tails.items()}
        top = max(lv for lv, _ in logs.values())
        factors = {ell: sg * math.exp(lv - top) for ell, (lv, sg) in logs.items()}
        measures.append(nodal_measure(combo.scaled(factors), refinement).measure_raw)
    return RadiusConvergence(tuple(logs_r), tuple(measures), limit.measure_raw, limit.ell_star)
