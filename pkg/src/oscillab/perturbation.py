"""Rayleigh-Schroedinger series for a radial level under ``eps * hbar * V_K``.

The perturbed operator is ``H + g W`` with ``g = eps * hbar`` and ``W`` the
matrix of ``V_K`` in the unperturbed basis of one angular sector. Writing the
branch as ``lambda(g) = E + sum_j g**j mu_j`` and the eigenvector as
``u + sum_j g**j v_j`` (intermediate normalization), matching powers gives

    mu_j = <W v_{j-1}, u>,
    v_j  = R [ -W v_{j-1} + sum_{i=1}^{j-1} mu_i v_{j-i} ],

with ``R = diag(1 / (lambda_m - lambda_n))`` on the complement of ``u``. The
level spacing inside a sector is ``lambda_m - lambda_n = hbar (m - n)``, i.e.
``2 hbar`` per Laguerre step.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigvals

from .errors import TruncationWindowError, UnsupportedError
from .laguerre import RadialMode, band_matrix_elements, matrix_element
from .potentials import PotentialSpec, TruncatedPotential, taylor_truncate
from .spectra.hamiltonian import (
    EnergyEstimate,
    banded_to_dense,
    potential_matrix,
    sector_window,
    track_eigenvalue,
)

EPS_RANGE = (0.0, 0.2)


def default_orders(n: int, K_max: int | None = None) -> tuple[int, int]:
    """``K = J = ceil(log(n+2)**2)``, with K capped at ``K_max``."""
    order = math.ceil(math.log(n + 2) ** 2)
    K = order if K_max is None else max(2, min(order, K_max))
    return K, order


@dataclass(frozen=True)
class PerturbationSeries:
    """Coefficients ``mu_1..mu_J`` of the branch through ``mode``'s level.

    ``M`` is the half-width (in Laguerre steps) of the basis window about
    ``n'`` used by the recursion.
    """

    mode: RadialMode
    VK: TruncatedPotential
    J: int
    mu: tuple[float, ...]
    M: int

    def shift(self, eps: float, J: int | None = None) -> float:
        """``sum_{j<=J} (eps*hbar)**j mu_j``, summed from the highest order down."""
        g = eps * self.mode.hbar
        top = self.J if J is None else J
        acc = 0.0
        for mu in reversed(self.mu[:top]):
            acc = (acc + mu) * g
        return acc

    def energy(self, eps: float, J: int | None = None) -> float:
        return self.mode.E + self.shift(eps, J)

    def remainder(self, eps: float) -> float:
        """Last-term heuristic ``|(eps*hbar)**J mu_J|``."""
        return abs((eps * self.mode.hbar) ** self.J * self.mu[-1])

    def to_json(self) -> dict:
        m = self.mode
        return {
            "mode": {"d": m.d, "n": m.n, "ell": m.ell, "E": m.E, "hbar": m.hbar},
            "mu": list(self.mu),
            "J": self.J,
            "K": self.VK.K,
            "M": self.M,
        }


def _as_truncated(V, K: int | None, n: int) -> TruncatedPotential:
    if isinstance(V, TruncatedPotential):
        return V if K is None or K >= V.K else TruncatedPotential(V.coeffs[: K - 1], K)
    if K is None:
        K, _ = default_orders(n, V.K_max)
    return taylor_truncate(V, min(K, V.K_max))


def _apply_band(B: np.ndarray, v: np.ndarray) -> np.ndarray:
    """``W v`` for a symmetric band stored by offsets; fixed summation order."""
    y = B[0] * v
    size = v.size
    for o in range(1, B.shape[0]):
        if o >= size:
            break
        y[:-o] += B[o, :-o] * v[o:]
        y[o:] += B[o, :-o] * v[:-o]
    return y


def mu_series(mode: RadialMode, VK: TruncatedPotential, J: int, M: int | None = None) -> PerturbationSeries:
    """Rayleigh-Schroedinger coefficients by the vector recursion.

    The window is ``n' - M .. n' + M`` in Laguerre steps (clipped at 0). The
    vector ``v_j`` is supported within ``K*j`` steps of ``n'``, so ``M`` must
    be at least ``K*(J-1)``; beyond that, enlarging ``M`` leaves every ``mu_j``
    bit-for-bit unchanged.
    """
    if J < 1:
        raise ValueError("jet order J must be >= 1")
    K = VK.bandwidth
    required = K * (J - 1)
    if M is None:
        M = 2 * K * J + 16
    if M < required:
        raise TruncationWindowError(
            f"half-width M={M} too small for K={K}, J={J}; need M >= {required}", required
        )
    a_lo, a_hi = sector_window(mode, M)
    if K == 0:
        return PerturbationSeries(mode, VK, J, (0.0,) * J, M)
    B = band_matrix_elements(VK, a_lo, a_hi, mode.alpha, mode.hbar)
    centre = mode.n_prime - a_lo
    steps = np.arange(a_lo, a_hi + 1) - mode.n_prime
    with np.errstate(divide="ignore"):
        R = np.where(steps != 0, 1.0 / (2.0 * mode.hbar * steps), 0.0)
    u = np.zeros(a_hi - a_lo + 1)
    u[centre] = 1.0
    vs = [u]
    mus: list[float] = []
    for j in range(1, J + 1):
        Wv = _apply_band(B, vs[-1])
        mus.append(float(Wv[centre]))
        if j == J:
            break
        rhs = -Wv
        for i in range(1, j):
            rhs = rhs + mus[i - 1] * vs[j - i]
        vs.append(R * rhs)
    return PerturbationSeries(mode, VK, J, tuple(mus), M)


def energy_series(mode: RadialMode, V, eps: float, J: int | None = None, K: int | None = None,
                  M: int | None = None) -> EnergyEstimate:
    """``E + sum_{j=1}^J (hbar*eps)**j mu_j`` with mu from the truncation ``V_K``.

    ``eps`` outside [0, 1/5] and ``hbar >= 1`` are flagged, not refused.
    """
    flags = []
    if not EPS_RANGE[0] <= eps <= EPS_RANGE[1]:
        flags.append("eps outside [0, 1/5]: level-spacing guarantee void")
    if mode.hbar >= 1:
        flags.append("hbar >= 1: outside the semiclassical regime")
    if flags:
        warnings.warn("; ".join(flags), RuntimeWarning, stacklevel=2)
    VK = _as_truncated(V, K, mode.n)
    if J is None:
        _, J = default_orders(mode.n)
    source = f"series(J={J},K={VK.K})"
    if eps == 0:
        return EnergyEstimate(mode.E, source, 0.0, 0.0, tuple(flags))
    series = mu_series(mode, VK, J, M)
    shift = series.shift(eps)
    return EnergyEstimate(mode.E + shift, source, series.remainder(eps), shift, tuple(flags))


# --------------------------------------------------------------------------
# Independent oracles


def path_sum_mu(mode: RadialMode, VK: TruncatedPotential, j: int) -> float:
    """Sum-product over closed paths ``n -> m_1 -> ... -> m_{j-1} -> n``.

    Each intermediate index avoids ``n`` and contributes ``1/(hbar (n - m_i))``;
    consecutive indices differ by at most ``2K``. Matrix elements come from
    :func:`matrix_element`. For ``j <= 2`` this is the Rayleigh-Schroedinger
    coefficient; from ``j = 3`` on the latter also carries renormalization
    terms (see :func:`renormalized_path_sum_mu`).
    """
    K = VK.bandwidth
    if K == 0:
        return 0.0
    h, ell, d, n = mode.hbar, mode.ell, mode.d, mode.n
    cache = {}

    def W(s, t):
        key = (min(s, t), max(s, t))
        if key not in cache:
            cache[key] = matrix_element(VK, key[0], key[1], ell, d, h)
        return cache[key]

    def walk(current, remaining):
        if remaining == 0:
            return W(current, n)
        total = 0.0
        for m in range(max(ell, current - 2 * K), current + 2 * K + 1, 2):
            if m == n:
                continue
            total += W(current, m) / (h * (n - m)) * walk(m, remaining - 1)
        return total

    return walk(n, j - 1)


def renormalized_path_sum_mu(mode: RadialMode, VK: TruncatedPotential, j: int) -> float:
    """Rayleigh-Schroedinger ``mu_j`` from explicit sums for ``j <= 3``.

    ``mu_3 = sum W_nm W_mk W_kn / (dn_m dn_k) - W_nn sum |W_nm|**2 / dn_m**2``
    with ``dn_m = hbar (n - m)``.
    """
    if j <= 2:
        return path_sum_mu(mode, VK, j)
    if j != 3:
        raise ValueError("explicit renormalized sums are implemented for j <= 3")
    K = VK.bandwidth
    if K == 0:
        return 0.0
    h, ell, d, n = mode.hbar, mode.ell, mode.d, mode.n
    w_nn = matrix_element(VK, n, n, ell, d, h)
    corr = 0.0
    for m in range(max(ell, n - 2 * K), n + 2 * K + 1, 2):
        if m != n:
            corr += matrix_element(VK, m, n, ell, d, h) ** 2 / (h * (n - m)) ** 2
    return path_sum_mu(mode, VK, 3) - w_nn * corr


def contour_mu(mode: RadialMode, VK: TruncatedPotential, J: int, points: int = 64,
               radius: float | None = None, half_width: int | None = None) -> list[float]:
    """Taylor coefficients of the eigenvalue branch by a Cauchy integral.

    The windowed matrix ``H - E + g W`` is diagonalized at ``points`` complex
    values of ``g`` on a circle well inside the convergence disc; the branch
    is the eigenvalue nearest ``g * W_nn``. Independent of the recursion.
    """
    K = max(VK.bandwidth, 1)
    # Taylor coefficients up to J only see K*(J-1) steps; a tight window keeps
    # the matrix norm (and hence the admissible radius) local.
    hw = half_width if half_width is not None else K * J
    a_lo, a_hi = sector_window(mode, hw)
    Wm = banded_to_dense(band_matrix_elements(VK, a_lo, a_hi, mode.alpha, mode.hbar))
    steps = np.arange(a_lo, a_hi + 1) - mode.n_prime
    D = np.diag(2.0 * mode.hbar * steps)
    centre = mode.n_prime - a_lo
    norm = float(np.linalg.norm(Wm, 2))
    if norm == 0:
        return [0.0] * J
    # hbar / ||W|| bounds the convergence radius from below
    r = radius if radius is not None else 0.5 * mode.hbar / norm
    g = r * np.exp(2j * np.pi * (np.arange(points) + 0.5) / points)
    branch = np.empty(points, dtype=complex)
    for i, gi in enumerate(g):
        w = eigvals(D + gi * Wm)
        branch[i] = w[np.argmin(np.abs(w - gi * Wm[centre, centre]))]
    return [float(np.real(np.mean(branch * g ** (-j)))) for j in range(1, J + 1)]


def band_operator_norm(mode: RadialMode, VK: TruncatedPotential, M: int) -> float:
    """Spectral norm of ``V_K`` on the half-width-``M`` window about ``n'``."""
    a_lo, a_hi = sector_window(mode, M)
    if VK.is_zero:
        return 0.0
    B = band_matrix_elements(VK, a_lo, a_hi, mode.alpha, mode.hbar)
    return float(np.linalg.norm(banded_to_dense(B), 2))


# --------------------------------------------------------------------------
# Level spacing and truncation experiments


@dataclass(frozen=True)
class SpacingRow:
    eps: float
    shift: float
    margin: float
    passed: bool


@dataclass(frozen=True)
class LevelSpacingReport:
    mode: RadialMode
    rows: tuple[SpacingRow, ...]

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def worst_margin(self) -> float:
        return min(r.margin for r in self.rows)


def level_spacing_check(mode: RadialMode, V, eps_grid) -> LevelSpacingReport:
    """Check ``|lambda_n(eps) - lambda_n(0)| < hbar/4`` on tracked branches."""
    rows = []
    quarter = mode.hbar / 4
    for eps in eps_grid:
        est = track_eigenvalue(mode, V, float(eps))
        margin = quarter - abs(est.shift)
        rows.append(SpacingRow(float(eps), est.shift, margin, margin > 0))
    return LevelSpacingReport(mode, tuple(rows))


def _sum_product(Wm: np.ndarray, R: np.ndarray, centre: int, j: int) -> float:
    """``<W u, (R W)**(j-1) u>`` with ``R`` zero at the centre."""
    v = np.zeros(Wm.shape[0])
    v[centre] = 1.0
    for _ in range(j - 1):
        v = R * (Wm @ v)
    return float(Wm[centre] @ v)


def jet_truncation_gap(mode: RadialMode, V: PotentialSpec, K: int, j: int,
                       half_width: int | None = None) -> float:
    """``|hbar**j (X_j(V) - X_j(V_K))|`` with ``X_j(W) = <W u, (R W)**(j-1) u>``.

    ``X_j(V)`` uses quadrature matrix elements of the bounded closed form and
    ``X_j(V_K)`` the closed-form overlaps, on a common window. Without a
    closed form, the potential is its Taylor polynomial: the gap is 0 when
    ``K`` reaches ``K_max`` and undefined otherwise.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    if V.closed_form is None:
        if K >= V.K_max:
            return 0.0
        raise UnsupportedError("jet_truncation_gap needs a bounded closed form for K < K_max")
    VK = taylor_truncate(V, K)
    hw = half_width if half_width is not None else max(32, 2 * K * j + 16)
    a_lo, a_hi = sector_window(mode, hw)
    full, _ = potential_matrix(V, mode.alpha, mode.hbar, a_lo, a_hi)
    trunc = banded_to_dense(band_matrix_elements(VK, a_lo, a_hi, mode.alpha, mode.hbar))
    steps = np.arange(a_lo, a_hi + 1) - mode.n_prime
    with np.errstate(divide="ignore"):
        R = np.where(steps != 0, -1.0 / (2.0 * mode.hbar * steps), 0.0)
    centre = mode.n_prime - a_lo
    diff = _sum_product(full, R, centre, j) - _sum_product(trunc, R, centre, j)
    return abs(mode.hbar**j * diff)


__all__ = [
    "PerturbationSeries",
    "EnergyEstimate",
    "default_orders",
    "mu_series",
    "energy_series",
    "path_sum_mu",
    "renormalized_path_sum_mu",
    "contour_mu",
    "band_operator_norm",
    "level_spacing_check",
    "LevelSpacingReport",
    "jet_truncation_gap",
]
