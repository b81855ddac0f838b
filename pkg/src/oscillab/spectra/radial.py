"""Radial ODE for perturbed oscillator eigenfunctions and their growth exponent.

With ``psi = exp(-r**2 / 2hbar) * phi`` the radial equation

    -hbar**2/2 (psi'' + (d-1)/r psi' - L/r**2 psi) + (r**2/2 + eps hbar V(r**2)) psi = energy psi,

``L = ell (ell + d - 2)``, becomes

    phi'' + ((d-1)/r - 2r/hbar) phi' + (2N/hbar - 2 eps V(r**2)/hbar - L/r**2) phi = 0,

with ``N = energy/hbar - d/2``. The decaying solution behaves like ``r**N``;
the growing one like ``exp(r**2/hbar)``. Backward integration from far out
suppresses the growing solution, and the state is rescaled at segment ends so
neither overflows; the scale factors are kept as logs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import IntegratorFailure, RangeError
from ..laguerre import RadialMode, radial_log_eigenfunction
from ..potentials import PotentialSpec, TruncatedPotential
from .hamiltonian import track_eigenvalue

SEGMENT_LOG_CHANGE = 30.0
TRANSIENT_DECAY = 50.0
MIN_OUTER_RHO = 40.0


def _scalar_horner(coeffs):
    coeffs = tuple(reversed(coeffs))

    def poly(u):
        acc = 0.0
        for c in coeffs:
            acc = acc * u + c
        return acc

    return poly


def _potential_function(V):
    """Plain-float ``V(u)`` for the ODE right-hand side (numpy scalars are slow)."""
    if V is None:
        return lambda u: 0.0
    if isinstance(V, TruncatedPotential):
        return _scalar_horner((0.0, 0.0) + tuple(V.coeffs))
    if isinstance(V, PotentialSpec):
        cf = V.closed_form
        if cf is None:
            return _scalar_horner(V.taylor)
        p = cf.params
        if cf.family == "gaussian_envelope":
            poly, kappa = _scalar_horner(p["poly"]), p["kappa"]
            return lambda u: poly(u) * math.exp(-((kappa * u) ** 2))
        amp, kappa, power = p["amplitude"], p["kappa"], p["power"]
        return lambda u: amp * u * u / (1.0 + (kappa * u) ** 2) ** power
    raise TypeError(f"unsupported potential type {type(V).__name__}")


@dataclass(frozen=True)
class RadialSolution:
    """Recessive radial solution sampled on ``grid`` as ``(log|psi|, sign)``.

    The overall scale is arbitrary unless the solution was normalized.
    ``renormalization_log`` lists the log of each segment's rescaling factor.
    """

    mode: RadialMode
    eps: float
    grid: np.ndarray
    log_abs: np.ndarray
    sign: np.ndarray
    hbar: float
    energy: float
    renormalization_log: tuple[float, ...]

    @property
    def values(self) -> np.ndarray:
        """``psi`` on the grid (underflows to 0 far out)."""
        return self.sign * np.exp(self.log_abs)

    @property
    def exponent_target(self) -> float:
        return self.energy / self.hbar - self.mode.d / 2

    def rescaled(self, log_factor: float, sign: float = 1.0) -> "RadialSolution":
        return RadialSolution(self.mode, self.eps, self.grid, self.log_abs + log_factor,
                              self.sign * sign, self.hbar, self.energy, self.renormalization_log)

    def log_value_at(self, r: float) -> tuple[float, float]:
        """Linear interpolation of ``log|psi|`` and nearest-grid sign at ``r``."""
        if not self.grid[0] <= r <= self.grid[-1]:
            raise RangeError(f"r={r} outside the solution grid")
        i = int(np.clip(np.searchsorted(self.grid, r), 1, self.grid.size - 1))
        r0, r1 = self.grid[i - 1], self.grid[i]
        if self.sign[i - 1] != self.sign[i]:
            raise RangeError(f"r={r} lies between samples of opposite sign")
        t = (r - r0) / (r1 - r0)
        return float((1 - t) * self.log_abs[i - 1] + t * self.log_abs[i]), float(self.sign[i])


def _segment_bounds(r_start: float, r0: float, N: float, hbar: float, E: float) -> list[float]:
    bounds = [r_start]
    r = r_start
    while r > r0:
        rate = abs(N) / r + (r / hbar if r * r <= 4 * E else 0.0) + 1.0
        r = max(r0, r - SEGMENT_LOG_CHANGE / rate)
        bounds.append(r)
    return bounds


def solve_radial(mode: RadialMode, eps: float, V, energy: float, r_span: tuple[float, float],
                 tol: float = 1e-10, points: int = 2001, grid=None) -> RadialSolution:
    """Integrate the recessive solution on ``r_span`` for a given energy.

    Integration starts at ``r_start`` with ``(r_start**2 - r1**2)/hbar = 50``
    and runs inward with an implicit Radau scheme, so the growing solution is
    damped by ``exp(-50)`` before the grid is reached.
    """
    r0, r1 = map(float, r_span)
    if not 0 < r0 < r1:
        raise ValueError("need 0 < r0 < r1")
    h, d, ell = mode.hbar, mode.d, mode.ell
    N = energy / h - d / 2
    L = ell * (ell + d - 2)
    Vf = _potential_function(V if eps else None)
    grid = np.linspace(r0, r1, points) if grid is None else np.asarray(grid, dtype=float)

    def rhs(r, y):
        q = 2 * N / h - 2 * eps * Vf(r * r) / h - L / (r * r)
        return [y[1], -((d - 1) / r - 2 * r / h) * y[1] - q * y[0]]

    def jac(r, y):
        q = 2 * N / h - 2 * eps * Vf(r * r) / h - L / (r * r)
        return [[0.0, 1.0], [-q, -((d - 1) / r - 2 * r / h)]]

    r_start = math.sqrt(r1 * r1 + TRANSIENT_DECAY * h)
    bounds = _segment_bounds(r_start, r0, N, h, mode.E)
    y = np.array([1.0, 0.0])
    log_scale = 0.0
    scales = []
    log_phi = np.full(grid.size, np.nan)
    sign = np.zeros(grid.size)
    for ra, rb in zip(bounds[:-1], bounds[1:]):
        sol = solve_ivp(rhs, (ra, rb), y, method="Radau", jac=jac, rtol=tol,
                        atol=tol * 1e-20, dense_output=True)
        if sol.status != 0 or not np.all(np.isfinite(sol.y)):
            raise IntegratorFailure("radial integration failed",
                                    {"segment": (ra, rb), "message": sol.message})
        inside = (grid <= ra) & (grid >= rb)
        if inside.any():
            phi = sol.sol(grid[inside])[0]
            with np.errstate(divide="ignore"):
                log_phi[inside] = np.log(np.abs(phi)) + log_scale
            sign[inside] = np.sign(phi)
        y_end = sol.y[:, -1]
        s = float(np.max(np.abs(y_end)))
        if s == 0 or not math.isfinite(s):
            raise IntegratorFailure("radial solution vanished or overflowed", {"r": rb})
        y = y_end / s
        log_scale += math.log(s)
        scales.append(math.log(s))
    log_abs = log_phi - grid**2 / (2 * h)
    return RadialSolution(mode, float(eps), grid, log_abs, sign, h, float(energy), tuple(scales))


def normalize_to(sol: RadialSolution, r_match: float, log_target: float, sign_target: float) -> RadialSolution:
    """Rescale ``sol`` so that it takes the given value at ``r_match``."""
    lv, sv = sol.log_value_at(r_match)
    return sol.rescaled(log_target - lv, sign_target * sv)


@dataclass(frozen=True)
class GrowthFit:
    exponent: float
    intercept: float
    window: tuple[float, float]


def growth_fit(sol: RadialSolution) -> GrowthFit:
    """Regress ``log|psi| + r**2/2hbar`` on ``log r`` over the outer third.

    The slope estimates the growth exponent; the intercept is the log of the
    asymptotic constant for the solution's current normalization.
    """
    r = sol.grid
    if r[-1] ** 2 / sol.hbar < MIN_OUTER_RHO:
        raise RangeError(f"need r1**2/hbar >= {MIN_OUTER_RHO}, have {r[-1] ** 2 / sol.hbar:.3g}")
    start = r.size - max(r.size // 3, 3)
    if start < 0:
        raise RangeError("too few grid points for the regression window")
    sel = slice(start, None)
    if np.any(sol.sign[sel] != sol.sign[-1]) or not np.all(np.isfinite(sol.log_abs[sel])):
        raise RangeError("regression window contains a zero of the solution")
    x = np.log(r[sel])
    yv = sol.log_abs[sel] + r[sel] ** 2 / (2 * sol.hbar)
    slope, intercept = np.polyfit(x, yv, 1)
    return GrowthFit(float(slope), float(intercept), (float(r[start]), float(r[-1])))


def growth_exponent(sol: RadialSolution) -> float:
    """Estimated exponent ``N`` in ``psi ~ C r**N exp(-r**2/2hbar)``."""
    return growth_fit(sol).exponent


def growth_radius(mode: RadialMode, bias: float = 0.01, r0: float | None = None) -> float:
    """Outer radius whose regression window keeps the ``1/r**2`` bias below ``bias``.

    The leading correction to ``log phi`` is ``-n'(n'+alpha) hbar / r**2``,
    which tilts the fitted slope by about ``2 n'(n'+alpha+1) hbar / r**2``.
    """
    a = mode.n_prime
    r_in = math.sqrt(max(2 * a * (a + mode.alpha + 1) * mode.hbar / bias, MIN_OUTER_RHO * mode.hbar))
    r0 = math.sqrt(4 * mode.E) if r0 is None else r0
    return max(1.5 * r_in - 0.5 * r0, math.sqrt(MIN_OUTER_RHO * mode.hbar), r0 * 1.5)


def wronskian_profile(mode: RadialMode, eps: float, V, energy: float, r_span: tuple[float, float],
                      tol: float = 1e-10, points: int = 201) -> np.ndarray:
    """Abel-scaled Wronskian of two forward solutions of the ``phi`` equation.

    For the first-order system the Wronskian obeys
    ``W(r) = W(r0) (r0/r)**(d-1) exp((r**2 - r0**2)/hbar)``; the returned
    ``W(r) (r/r0)**(d-1) exp(-(r**2 - r0**2)/hbar)`` is constant.
    """
    r0, r1 = map(float, r_span)
    h, d, ell = mode.hbar, mode.d, mode.ell
    N = energy / h - d / 2
    L = ell * (ell + d - 2)
    Vf = _potential_function(V if eps else None)
    grid = np.linspace(r0, r1, points)

    def rhs(r, y):
        q = 2 * N / h - 2 * eps * Vf(r * r) / h - L / (r * r)
        a = (d - 1) / r - 2 * r / h
        return [y[1], -a * y[1] - q * y[0], y[3], -a * y[3] - q * y[2]]

    sol = solve_ivp(rhs, (r0, r1), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=tol,
                    atol=tol * 1e-6, t_eval=grid)
    if sol.status != 0:
        raise IntegratorFailure("Wronskian integration failed", {"message": sol.message})
    p1, dp1, p2, dp2 = sol.y
    W = p1 * dp2 - p2 * dp1
    return W * (grid / r0) ** (d - 1) * np.exp(-(grid**2 - r0**2) / h)


def unperturbed_profile(mode: RadialMode, r) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form ``(log|psi|, sign)`` of the unperturbed eigenfunction."""
    return radial_log_eigenfunction(mode, r)


@dataclass(frozen=True)
class GrowthEstimate:
    mode: RadialMode
    eps: float
    energy: float
    exponent: float
    target: float
    r_span: tuple[float, float]

    @property
    def error(self) -> float:
        return abs(self.exponent - self.target)


def estimate_growth(mode: RadialMode, eps: float, V, energy: float | None = None,
                    bias: float = 0.01) -> GrowthEstimate:
    """Fitted growth exponent of the branch against ``energy/hbar - d/2``.

    The energy defaults to the tracked eigenvalue; integration starts at
    ``r = sqrt(4E)``, well inside the forbidden region.
    """
    if energy is None:
        energy = mode.E if eps == 0 else track_eigenvalue(mode, V, eps).value
    r_span = (math.sqrt(4 * mode.E), growth_radius(mode, bias))
    sol = solve_radial(mode, eps, V, energy, r_span)
    return GrowthEstimate(mode, float(eps), float(energy), growth_exponent(sol), sol.exponent_target, r_span)
