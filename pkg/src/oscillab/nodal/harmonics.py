"""Real, L2-normalized spherical harmonics on S^1 and S^2 and their combinations."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from ..errors import DegenerateInputError, MalformedSpecError

CIRCLE_LABELS = ("cos", "sin")


@dataclass(frozen=True)
class SphericalCombo:
    """``sum a * Y(ell, m)`` over ``terms = ((ell, m, a), ...)``.

    For ``d = 2`` the label ``m`` is ``"cos"`` or ``"sin"``; for ``d = 3`` it
    is an integer with ``|m| <= ell`` (negative ``m`` selects the sine part).
    ``energies`` optionally maps ``ell`` to its radial energy.
    """

    d: int
    terms: tuple[tuple[int, object, float], ...]
    energies: Mapping[int, float] | None = None

    def __post_init__(self):
        if self.d not in (2, 3):
            raise MalformedSpecError(f"d must be 2 or 3, got {self.d}")
        terms = tuple((int(ell), m, float(a)) for ell, m, a in self.terms)
        for ell, m, _ in terms:
            if ell < 0:
                raise MalformedSpecError(f"negative ell {ell}")
            if self.d == 2:
                if m not in CIRCLE_LABELS:
                    raise MalformedSpecError(f"d=2 harmonic label must be 'cos' or 'sin', got {m!r}")
                if ell == 0 and m == "sin":
                    raise MalformedSpecError("sin(0*theta) vanishes identically")
            elif not (isinstance(m, (int, np.integer)) and abs(m) <= ell):
                raise MalformedSpecError(f"need integer |m| <= ell, got m={m!r} at ell={ell}")
        object.__setattr__(self, "terms", terms)
        if self.d == 3:
            object.__setattr__(self, "terms", tuple((ell, int(m), a) for ell, m, a in terms))

    @property
    def ell_max(self) -> int:
        return max((ell for ell, _, a in self.terms if a != 0), default=0)

    @property
    def ells(self) -> list[int]:
        return sorted({ell for ell, _, a in self.terms if a != 0})

    @property
    def is_zero(self) -> bool:
        return all(a == 0 for _, _, a in self.terms)

    def restricted(self, ell: int) -> "SphericalCombo":
        return SphericalCombo(self.d, tuple(t for t in self.terms if t[0] == ell), self.energies)

    def scaled(self, factors: Mapping[int, float]) -> "SphericalCombo":
        """Multiply each ``ell`` block by ``factors[ell]`` (missing blocks are dropped)."""
        terms = tuple((ell, m, a * factors[ell]) for ell, m, a in self.terms if ell in factors)
        return SphericalCombo(self.d, terms, self.energies)

    @classmethod
    def from_json(cls, doc: Mapping) -> "SphericalCombo":
        try:
            terms = tuple((t["ell"], t["m"], t["a"]) for t in doc["terms"])
            return cls(int(doc["d"]), terms)
        except (KeyError, TypeError) as exc:
            raise MalformedSpecError(f"malformed combo JSON: {exc}") from None

    def to_json(self) -> dict:
        return {"d": self.d, "terms": [{"ell": ell, "m": m, "a": a} for ell, m, a in self.terms]}


def random_combo(d: int, ells: Iterable[int], rng: np.random.Generator) -> SphericalCombo:
    """Independent standard normal coefficients on every harmonic of each ``ell``."""
    terms = []
    for ell in ells:
        if d == 2:
            labels = ["cos"] if ell == 0 else list(CIRCLE_LABELS)
        else:
            labels = range(-ell, ell + 1)
        terms += [(ell, m, float(rng.standard_normal())) for m in labels]
    return SphericalCombo(d, tuple(terms))


def circle_harmonic(ell: int, label: str, theta):
    theta = np.asarray(theta, dtype=float)
    if ell == 0:
        return np.full_like(theta, 1 / math.sqrt(2 * math.pi))
    trig = np.cos if label == "cos" else np.sin
    return trig(ell * theta) / math.sqrt(math.pi)


def normalized_legendre(ell_max: int, cos_theta) -> dict[tuple[int, int], np.ndarray]:
    """``sqrt((2l+1)/4pi (l-m)!/(l+m)!) P_l^m(x)`` for ``0 <= m <= l <= ell_max``.

    No Condon-Shortley phase. Computed with the stable diagonal-then-column
    recurrence on the normalized functions.
    """
    x = np.asarray(cos_theta, dtype=float)
    s = np.sqrt(np.clip(1 - x * x, 0.0, None))
    out = {}
    diag = np.full_like(x, 1 / math.sqrt(4 * math.pi))
    for m in range(ell_max + 1):
        if m > 0:
            diag = math.sqrt((2 * m + 1) / (2 * m)) * s * diag
        out[(m, m)] = diag
        if m < ell_max:
            prev2, prev = diag, math.sqrt(2 * m + 3) * x * diag
            out[(m + 1, m)] = prev
            for ell in range(m + 2, ell_max + 1):
                a = math.sqrt((4 * ell * ell - 1) / (ell * ell - m * m))
                b = math.sqrt(((ell - 1) ** 2 - m * m) / (4 * (ell - 1) ** 2 - 1))
                prev2, prev = prev, a * (x * prev - b * prev2)
                out[(ell, m)] = prev
    return out


def sphere_angles(points) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(points, dtype=float)
    r = np.linalg.norm(p, axis=-1)
    return np.clip(p[..., 2] / r, -1.0, 1.0), np.arctan2(p[..., 1], p[..., 0])


def sph_eval(combo: SphericalCombo, direction) -> np.ndarray:
    """Evaluate the combination at unit vectors (or angles ``theta`` for d = 2).

    For ``d = 2`` ``direction`` may be an angle array or an ``(..., 2)`` array
    of points; for ``d = 3`` an ``(..., 3)`` array of points.
    """
    if combo.is_zero:
        raise DegenerateInputError("all coefficients vanish")
    if combo.d == 2:
        theta = np.asarray(direction, dtype=float)
        if theta.ndim and theta.shape[-1] == 2 and theta.ndim > 1:
            theta = np.arctan2(theta[..., 1], theta[..., 0])
        total = np.zeros_like(theta, dtype=float)
        for ell, label, a in combo.terms:
            if a:
                total = total + a * circle_harmonic(ell, label, theta)
        return total
    cos_t, phi = sphere_angles(direction)
    legendre = normalized_legendre(combo.ell_max, cos_t)
    total = np.zeros_like(cos_t)
    for ell, m, a in combo.terms:
        if not a:
            continue
        p = legendre[(ell, abs(m))]
        if m > 0:
            total = total + a * math.sqrt(2) * p * np.cos(m * phi)
        elif m < 0:
            total = total + a * math.sqrt(2) * p * np.sin(-m * phi)
        else:
            total = total + a * p
    return total
