"""Nodal measure of harmonic combinations: root counts on S^1, line length on S^2."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..errors import DegenerateInputError
from .harmonics import SphericalCombo, random_combo, sph_eval

ROOT_XTOL = 1e-12
CIRCLE_POINTS_PER_FREQUENCY = 8


@dataclass(frozen=True)
class NodalSample:
    """Nodal measure of ``combo`` at a refinement level.

    ``measure_raw`` is the root count (d = 2) or the nodal length on the unit
    sphere (d = 3). ``measure_normalized`` divides by the sphere's total
    measure (2 pi or 4 pi). ``convergence`` lists ``(level, measure_raw)``.
    """

    combo: SphericalCombo
    refinement: int
    measure_raw: float
    measure_normalized: float
    convergence: tuple[tuple[int, float], ...]
    roots: tuple[float, ...] = ()

    @property
    def measure(self) -> float:
        return self.measure_raw

    @property
    def deltas(self) -> list[float]:
        vals = [m for _, m in self.convergence]
        return [abs(b - a) for a, b in zip(vals, vals[1:])]


# --------------------------------------------------------------------------
# d = 2


def _circle_grid(combo: SphericalCombo, level: int) -> np.ndarray:
    size = 2**level * CIRCLE_POINTS_PER_FREQUENCY * max(combo.ell_max, 1)
    return 2 * math.pi * np.arange(size) / size


def _sign_change_brackets(values: np.ndarray) -> np.ndarray:
    """Indices i with a sign change between samples i and i+1 (cyclic).

    Samples that are exactly zero are skipped, so a root sitting on a grid
    point is counted once through its neighbours.
    """
    keep = np.flatnonzero(values != 0)
    if keep.size < 2:
        return keep[:0]
    signs = np.sign(values[keep])
    change = signs != np.roll(signs, -1)
    return keep[change]


def circle_roots(combo: SphericalCombo, level: int = 0) -> np.ndarray:
    """Roots in [0, 2pi), every bracket bisected (all at once) to 1e-12."""
    theta = _circle_grid(combo, level)
    vals = sph_eval(combo, theta)
    keep = np.flatnonzero(vals != 0)
    idx = _sign_change_brackets(vals)
    if idx.size == 0:
        return idx.astype(float)
    pos = np.searchsorted(keep, idx)
    nxt = keep[(pos + 1) % keep.size]
    lo = theta[idx]
    hi = np.where(nxt > idx, theta[nxt], theta[nxt] + 2 * math.pi)
    f_lo = np.sign(vals[idx])
    while np.max(hi - lo) > ROOT_XTOL:
        mid = 0.5 * (lo + hi)
        f_mid = np.sign(sph_eval(combo, mid))
        left = f_mid != f_lo
        hi = np.where(left, mid, hi)
        lo = np.where(left, lo, mid)
    return np.sort(0.5 * (lo + hi) % (2 * math.pi))


def _circle_count(combo: SphericalCombo, level: int) -> int:
    return int(_sign_change_brackets(sph_eval(combo, _circle_grid(combo, level))).size)


# --------------------------------------------------------------------------
# d = 3


def _icosahedron():
    t = (1 + math.sqrt(5)) / 2
    v = np.array([[-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
                  [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
                  [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1]], dtype=float)
    f = np.array([[0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
                  [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
                  [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
                  [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1]])
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


@lru_cache(maxsize=None)
def icosphere(level: int) -> tuple[np.ndarray, np.ndarray]:
    """Vertices on the unit sphere and triangle indices after ``level`` subdivisions."""
    if level < 0:
        raise ValueError("refinement level must be >= 0")
    if level == 0:
        return _icosahedron()
    verts, faces = icosphere(level - 1)
    a, b, c = faces.T
    edges = np.sort(np.concatenate([np.stack(p, axis=1) for p in ((a, b), (b, c), (c, a))]), axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    mids = verts[uniq[:, 0]] + verts[uniq[:, 1]]
    mids /= np.linalg.norm(mids, axis=1, keepdims=True)
    ab, bc, ca = (len(verts) + inverse.reshape(3, -1))
    new_faces = np.concatenate([np.stack(t, axis=1) for t in ((a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca))])
    return np.vstack([verts, mids]), new_faces


def _crossing(p, q, fp, fq):
    t = (fp / (fp - fq))[:, None]
    x = p + t * (q - p)
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def sphere_nodal_length(combo: SphericalCombo, level: int, rotation=None) -> float:
    """Length of the piecewise-geodesic zero set on the level-``level`` icosphere.

    Each triangle with a sign change contributes the arc between its two
    linearly interpolated edge crossings. Zero values count as positive.
    """
    verts, faces = icosphere(level)
    pts = verts if rotation is None else verts @ np.asarray(rotation, dtype=float).T
    f = sph_eval(combo, pts)
    pos = f[faces] >= 0
    mixed = pos.any(axis=1) & ~pos.all(axis=1)
    tri, fv, pv = faces[mixed], f[faces[mixed]], pos[mixed]
    # the vertex whose sign differs from the other two
    odd = np.where(pv.sum(axis=1) == 1, np.argmax(pv, axis=1), np.argmin(pv, axis=1))
    rows = np.arange(tri.shape[0])
    i0, i1, i2 = tri[rows, odd], tri[rows, (odd + 1) % 3], tri[rows, (odd + 2) % 3]
    f0, f1, f2 = fv[rows, odd], fv[rows, (odd + 1) % 3], fv[rows, (odd + 2) % 3]
    x = _crossing(verts[i0], verts[i1], f0, f1)
    y = _crossing(verts[i0], verts[i2], f0, f2)
    chord = np.linalg.norm(x - y, axis=1)
    arcs = 2 * np.arcsin(np.clip(chord / 2, 0.0, 1.0))
    return math.fsum(arcs.tolist())


def nodal_measure(combo: SphericalCombo, refinement: int, rotation=None) -> NodalSample:
    """Nodal measure of a harmonic combination.

    d = 2: number of zeros on the circle from sign changes on a grid of
    ``2**refinement * 8 * ell_max`` points, each refined by bisection.
    d = 3: nodal length on the icosphere at subdivision level ``refinement``,
    with the two coarser levels kept as a convergence record.
    """
    if refinement < 0:
        raise ValueError("refinement must be >= 0")
    if combo.is_zero:
        raise DegenerateInputError("all coefficients vanish")
    if combo.d == 2:
        roots = circle_roots(combo, refinement)
        history = tuple((lv, float(_circle_count(combo, lv))) for lv in range(refinement))
        history += ((refinement, float(roots.size)),)
        return NodalSample(combo, refinement, float(roots.size), roots.size / (2 * math.pi),
                           history, tuple(float(r) for r in roots))
    history = tuple((lv, sphere_nodal_length(combo, lv, rotation))
                    for lv in range(max(0, refinement - 2), refinement + 1))
    raw = history[-1][1]
    return NodalSample(combo, refinement, raw, raw / (4 * math.pi), history)


@dataclass(frozen=True)
class MixedFrequencyReport:
    measure: float
    ell_max: int
    C_hat: float
    bound: float
    margin: float

    @property
    def passed(self) -> bool:
        return self.margin >= 0


def pure_tone_constant(d: int, ell: int, refinement: int, samples: int = 4, seed: int = 0) -> float:
    """Largest ``measure / ell`` over random pure tones of frequency ``ell``."""
    rng = np.random.default_rng(seed)
    vals = [nodal_measure(random_combo(d, [ell], rng), refinement).measure_raw / ell for _ in range(samples)]
    return max(vals)


def mixed_frequency_bound_check(combo: SphericalCombo, refinement: int | None = None,
                                C_hat: float | None = None) -> MixedFrequencyReport:
    """Check ``measure <= C_hat * ell_max`` for a combination of frequencies up to ``ell_max``.

    ``C_hat`` defaults to 2 on the circle (a trigonometric polynomial of degree
    ``L`` has at most ``2L`` zeros) and to a pure-tone calibration on S^2.
    """
    L = combo.ell_max
    if refinement is None:
        refinement = 2 if combo.d == 2 else 6
    measure = nodal_measure(combo, refinement).measure_raw
    if C_hat is None:
        C_hat = 2.0 if combo.d == 2 else pure_tone_constant(3, max(L, 1), refinement)
    bound = C_hat * max(L, 1)
    return MixedFrequencyReport(measure, L, C_hat, bound, bound - measure)
