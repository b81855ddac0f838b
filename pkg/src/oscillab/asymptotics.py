"""Energy asymptotics in n and the supporting Pochhammer / 3F2 expansions.

For a slowly varying potential the shift of ``E_{ell,n}(eps)`` is written as

    shift = u * [3 + (ell/n)**2 (-1 + S) + T],
    u = eps * hbar * V''(0) * (hbar n / 2)**2,

with ``T`` read off the lowest admissible ``ell`` and ``S`` from the target
``ell`` (exact two-point inversion). The lead uses ``(hbar n / 2)**2``, the
same factor that appears in the exact diagonal second moment
``hbar**2 A(2, n, n, ell)``; using ``(E/2 - d/4)**2`` instead would vanish at
``E = 1, d = 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from .errors import DegenerateLeadError
from .laguerre import RadialMode, _exact_alpha, f32_terminating, laguerre_index, weight_exponent
from .perturbation import energy_series
from .potentials import PotentialSpec, TruncatedPotential
from .spectra.hamiltonian import track_eigenvalue

ENGINES = ("series", "oracle")
# geometric growth allowed per unit of beta or k in the lemma residual bounds
GROWTH_BASE = 8


def second_derivative(V) -> float:
    if isinstance(V, TruncatedPotential):
        return 2.0 * V.coefficient(2)
    return V.second_derivative


def branch_shift(mode: RadialMode, V, eps: float, engine: str = "series", J: int = 6,
                 K: int | None = None) -> float:
    """``E_{ell,n}(eps) - E`` from the chosen engine."""
    if engine == "series":
        return energy_series(mode, V, eps, J=J, K=K).shift
    if engine == "oracle":
        return track_eigenvalue(mode, V, eps).shift
    raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")


@dataclass(frozen=True)
class Theorem1Residuals:
    """Extracted residuals of the large-n energy expansion at one ``ell``.

    ``lead = 3u``; ``S_hat`` is None on the lowest admissible ``ell``.
    """

    mode: RadialMode
    eps: float
    delta: float
    lead: float
    unit: float
    S_hat: float | None
    T_hat: float | None
    shift: float

    @property
    def energy(self) -> float:
        return self.mode.E + self.shift

    def reconstruct_shift(self) -> float:
        if self.unit == 0:
            return 0.0
        n, ell = self.mode.n, self.mode.ell
        S = 0.0 if self.S_hat is None else self.S_hat
        bracket = 3 + (ell / n) ** 2 * (-1 + S) + self.T_hat
        return self.unit * bracket


def lead_unit(mode: RadialMode, eps: float, V) -> float:
    h = mode.hbar
    return eps * h * second_derivative(V) * (h * mode.n / 2) ** 2


def _residuals(mode, eps, delta, unit, shift, T):
    n, ell = mode.n, mode.ell
    if ell == mode.ell_min:
        return Theorem1Residuals(mode, eps, delta, 3 * unit, unit, None, T, shift)
    bracket = shift / unit
    S = (bracket - 3 - T) * (n / ell) ** 2 + 1
    return Theorem1Residuals(mode, eps, delta, 3 * unit, unit, S, T, shift)


def theorem1_sweep(n: int, eps: float, V, ells: Iterable[int] | None = None, engine: str = "series",
                   d: int = 2, E: float = 1.0, J: int = 6, K: int | None = None) -> list[Theorem1Residuals]:
    """Residuals for every admissible ``ell`` (or the given ones) at fixed ``n``."""
    base = RadialMode(d, n, n % 2, E)
    delta = getattr(V, "delta", float("nan"))
    ells = list(range(n % 2, n + 1, 2)) if ells is None else list(ells)
    if eps == 0:
        return [Theorem1Residuals(base.with_ell(ell), 0.0, delta, 0.0, 0.0, None, None, 0.0) for ell in ells]
    if second_derivative(V) == 0:
        raise DegenerateLeadError("V''(0) = 0: the leading term vanishes")
    unit = lead_unit(base, eps, V)
    base_shift = branch_shift(base, V, eps, engine, J, K)
    T = base_shift / unit - 3
    out = []
    for ell in ells:
        mode = base.with_ell(ell)
        shift = base_shift if ell == base.ell else branch_shift(mode, V, eps, engine, J, K)
        out.append(_residuals(mode, eps, delta, unit, shift, T))
    return out


def theorem1_residuals(n: int, ell: int, eps: float, V, engine: str = "series", d: int = 2,
                       E: float = 1.0, J: int = 6, K: int | None = None) -> Theorem1Residuals:
    """Residuals ``S_hat`` (target ``ell``) and ``T_hat`` (lowest ``ell``)."""
    RadialMode(d, n, ell, E)
    return theorem1_sweep(n, eps, V, [ell], engine, d, E, J, K)[0]


# --------------------------------------------------------------------------
# Exact second-moment identity


@dataclass(frozen=True)
class IdentityCheck:
    equal: bool
    lhs: Fraction
    rhs: Fraction
    difference: Fraction

    def __bool__(self) -> bool:
        return self.equal


def a2_identity_check(n: int, ell: int, d: int, E=Fraction(1)) -> IdentityCheck:
    """Exact check of

    ``hbar**2 A(2,n,n,ell) = 6 (hbar n/2)**2 (1 - ell**2/(3n**2) + (2-d) ell/(3n**2) + d/n + d(d+2)/(6n**2))``

    with ``hbar = E/(n + d/2)``. The right side is multiplied out by ``n**2``
    so ``n = 0`` is covered. ``A`` comes from the exact terminating 3F2.
    """
    RadialMode(d, n, ell)
    E = Fraction(E)
    hbar = E / (Fraction(n) + Fraction(d, 2))
    a = laguerre_index(n, ell)
    alpha = _exact_alpha(weight_exponent(ell, d))
    A2 = (alpha + 1) * (alpha + 2) * f32_terminating(2, a, 0, alpha, mode="exact")
    lhs = hbar**2 * A2
    bracket_n2 = (Fraction(n * n) - Fraction(ell * ell, 3) + Fraction((2 - d) * ell, 3)
                  + d * n + Fraction(d * (d + 2), 6))
    rhs = 6 * (hbar / 2) ** 2 * bracket_n2
    return IdentityCheck(lhs == rhs, lhs, rhs, lhs - rhs)


# --------------------------------------------------------------------------
# Lemma checks


@dataclass(frozen=True)
class LemmaRecord:
    """One point of a lemma sweep.

    ``offset`` is the ell-independent piece (S or T) read at the lowest
    admissible ``ell``. ``scaled_residual`` divides the residual by its
    predicted size, ``(1+ell**2)/N**2 * 8**beta`` for the prefactor and
    ``k (1+ell**2)/N**2 * 8**k`` (after removing ``(N/2)**k``) for the 3F2,
    so a uniformly bounded scaled residual is the claimed estimate.
    """

    k: int
    beta: int
    N: int
    ell: int
    lhs: float
    model: float
    residual: float
    scaled_residual: float
    offset: float


def _h_beta(beta: int, N: int, ell: int, d: int) -> Fraction:
    a = Fraction(N - ell, 2)
    alpha = _exact_alpha(weight_exponent(ell, d))
    out = Fraction(1)
    for j in range(beta):
        out *= (a + 1 + j) / (a + alpha + 1 + j)
    return out


def prefactor_offset(beta: int, N: int, d: int) -> Fraction:
    """``S(beta, N) = h_beta(l0/N) - 1 + 2 beta l0/N`` at ``l0 = N mod 2``."""
    l0 = N % 2
    return _h_beta(beta, N, l0, d) - 1 + Fraction(2 * beta * l0, N)


def prefactor_expansion_check(beta: int, N: int, ell: int, d: int) -> LemmaRecord:
    """Compare ``h_beta(ell/N) = (N'+1)_beta / (N'+alpha+1)_beta`` (exact)
    with ``1 - 2 beta ell/N + S(beta, N)``."""
    RadialMode(d, N, ell)
    h = _h_beta(beta, N, ell, d)
    S = prefactor_offset(beta, N, d)
    model = 1 - Fraction(2 * beta * ell, N) + S
    res = abs(h - model)
    scaled = res * N * N / ((1 + ell * ell) * GROWTH_BASE**beta)
    return LemmaRecord(0, beta, N, ell, float(h), float(model), float(res), float(scaled), float(S))


def _f32_lhs(k: int, beta: int, N: int, ell: int, d: int) -> Fraction:
    alpha = _exact_alpha(weight_exponent(ell, d))
    poch = Fraction(1)
    for i in range(k):
        poch *= alpha + 1 + i
    return poch * f32_terminating(k, (N - ell) // 2, beta, alpha, mode="exact")


def _f32_pref(k: int, beta: int, N: int) -> Fraction:
    rising = 1
    for i in range(k):
        rising *= beta + 1 + i
    return Fraction(math.factorial(2 * k), math.factorial(k) * rising) * Fraction(N, 2) ** k


def f32_offset(k: int, beta: int, N: int, d: int) -> Fraction:
    """``T(beta, k, N)`` read at the lowest admissible ``ell``."""
    l0 = N % 2
    return _f32_lhs(k, beta, N, l0, d) / _f32_pref(k, beta, N) - 1 - Fraction(beta * l0, N)


def f32_expansion_check(k: int, beta: int, N: int, ell: int, d: int) -> LemmaRecord:
    """Compare ``(alpha+1)_k 3F2(-k, k+1, -N'; beta+1, alpha+1; 1)`` (exact) with
    ``(2k)!/(k! (beta+1)_k) (N/2)**k (1 + beta ell/N + T(beta, k, N))``."""
    if not 0 <= beta <= k:
        raise ValueError("need 0 <= beta <= k")
    RadialMode(d, N, ell)
    lhs = _f32_lhs(k, beta, N, ell, d)
    pref = _f32_pref(k, beta, N)
    T = f32_offset(k, beta, N, d)
    model = pref * (1 + Fraction(beta * ell, N) + T)
    res = abs(lhs - model)
    scaled = 0.0 if k == 0 else float(res / pref * N * N / (k * (1 + ell * ell) * GROWTH_BASE**k))
    return LemmaRecord(k, beta, N, ell, float(lhs), float(model), float(res), scaled, float(T))


# --------------------------------------------------------------------------
# Monotonicity in ell


@dataclass(frozen=True)
class MonotonicityReport:
    n: int
    eps: float
    C2_hat: float
    pairs_checked: int
    violations: tuple[tuple[int, int, float], ...]
    signs: dict

    @property
    def passed(self) -> bool:
        return not self.violations


def fitted_residual_constant(residuals: list[Theorem1Residuals], scale: float) -> float:
    """``max(|S_hat|, |T_hat|) / scale`` over a residual sweep."""
    vals = [abs(r.T_hat) for r in residuals if r.T_hat is not None]
    vals += [abs(r.S_hat) for r in residuals if r.S_hat is not None]
    return max(vals) / scale if vals else 0.0


def monotonicity_check(n: int, eps: float, V, engine: str = "series", d: int = 2, E: float = 1.0,
                       C2_hat: float | None = None, J: int = 6) -> MonotonicityReport:
    """Check ``sign(V''(0)) (E_ell - E_ell') > 0`` for admissible ``ell < ell'``
    with ``ell' > ell / (1 - 2 C2 max(delta, eps))``.

    ``C2`` is fitted from the residual sweep at the same ``(n, eps)`` unless
    given. Energies are compared through their shifts.
    """
    ells = list(range(n % 2, n + 1, 2))
    if eps == 0:
        return MonotonicityReport(n, 0.0, 0.0, 0, (), {})
    sweep = theorem1_sweep(n, eps, V, ells, engine, d, E, J)
    delta = getattr(V, "delta", 0.0)
    scale = max(delta, eps)
    if C2_hat is None:
        C2_hat = fitted_residual_constant(sweep, scale)
    denom = 1 - 2 * C2_hat * scale
    if denom <= 0:
        raise ValueError(f"1 - 2 C2 max(delta, eps) = {denom} <= 0: hypothesis fails")
    sgn = math.copysign(1.0, second_derivative(V))
    shifts = {r.mode.ell: r.shift for r in sweep}
    violations = []
    signs = {}
    checked = 0
    for i, l1 in enumerate(ells):
        for l2 in ells[i + 1:]:
            if not l2 > l1 / denom:
                continue
            checked += 1
            diff = sgn * (shifts[l1] - shifts[l2])
            signs[(l1, l2)] = int(np.sign(shifts[l1] - shifts[l2]))
            if not diff > 0:
                violations.append((l1, l2, diff))
    return MonotonicityReport(n, eps, C2_hat, checked, tuple(violations), signs)
