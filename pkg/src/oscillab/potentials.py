"""Radial perturbation potentials V(u), u = r**2.

All Taylor coefficients are taken in the variable ``u = r**2``: ``c_k = V^(k)(0)/k!``
with derivatives in ``u``. With this convention the quadratic coefficient enters
the leading energy correction as ``V''(0) = 2*c_2``.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, InvalidOrderError, MalformedSpecError

FAMILIES = ("gaussian_envelope", "rational_decay")

# Number of low-order coefficients compared against a closed form.
_CLOSED_FORM_CHECK_ORDER = 8
_CLOSED_FORM_RTOL = 1e-12


def _as_u_array(u):
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0):
        raise DomainError("potential argument u = r**2 must be nonnegative")
    return arr


def _horner(coeffs: Sequence[float], u):
    """Evaluate sum coeffs[k] * u**k."""
    acc = np.zeros_like(u, dtype=float)
    for c in reversed(coeffs):
        acc = acc * u + c
    return acc


@dataclass(frozen=True)
class ClosedForm:
    """Analytic potential family.

    ``gaussian_envelope``: ``V(u) = P(u) * exp(-(kappa*u)**2)`` with
    ``params = {"poly": [p0, p1, ...], "kappa": kappa}``.

    ``rational_decay``: ``V(u) = A * u**2 / (1 + (kappa*u)**2)**p`` with
    ``params = {"amplitude": A, "kappa": kappa, "power": p}``.
    """

    family: str
    params: Mapping[str, object]

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise MalformedSpecError(f"unknown closed-form family {self.family!r}")
        p = self.params
        try:
            if self.family == "gaussian_envelope":
                poly = [float(c) for c in p["poly"]]
                kappa = float(p["kappa"])
                if not poly:
                    raise MalformedSpecError("gaussian_envelope needs a nonempty poly")
                object.__setattr__(self, "params", {"poly": poly, "kappa": kappa})
            else:
                norm = {
                    "amplitude": float(p["amplitude"]),
                    "kappa": float(p["kappa"]),
                    "power": float(p["power"]),
                }
                object.__setattr__(self, "params", norm)
        except KeyError as exc:
            raise MalformedSpecError(f"missing closed-form parameter {exc}") from None

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        p = self.params
        if self.family == "gaussian_envelope":
            return _horner(p["poly"], u) * np.exp(-((p["kappa"] * u) ** 2))
        return p["amplitude"] * u**2 / (1.0 + (p["kappa"] * u) ** 2) ** p["power"]

    def taylor(self, order: int) -> list[float]:
        """Taylor coefficients ``c_0..c_order`` of the family at ``u = 0``."""
        p = self.params
        out = [0.0] * (order + 1)
        if self.family == "gaussian_envelope":
            # exp(-(kappa u)^2) = sum_j (-kappa^2)^j u^(2j) / j!
            kappa2 = p["kappa"] ** 2
            env = [0.0] * (order + 1)
            for j in range(order // 2 + 1):
                env[2 * j] = (-kappa2) ** j / math.factorial(j)
            for i, a in enumerate(p["poly"]):
                for k in range(i, order + 1):
                    out[k] += a * env[k - i]
            return out
        amp, kappa2, power = p["amplitude"], p["kappa"] ** 2, p["power"]
        # (1 + x)**(-p) = sum_j binom(-p, j) x**j, binomials built by their ratio
        coef = 1.0
        for j in range((order - 2) // 2 + 1):
            out[2 + 2 * j] = amp * coef * kappa2**j
            coef *= (-power - j) / (j + 1)
        return out

    def decay_exponent(self) -> float:
        """Largest eta with ``|u|**(eta/2) * V(u)`` bounded (inf for Gaussian)."""
        if self.family == "gaussian_envelope":
            return math.inf
        return 4.0 * self.params["power"] - 4.0

    def to_json(self) -> dict:
        return {"family": self.family, "params": dict(self.params)}


@dataclass(frozen=True)
class TruncatedPotential:
    """Polynomial ``V_K(u) = sum_{k=2}^K c_k u**k``; ``coeffs`` holds c_2..c_K."""

    coeffs: tuple[float, ...]
    K: int

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.K < 2:
            raise InvalidOrderError(f"truncation order K={self.K} must be >= 2")
        if len(self.coeffs) != self.K - 1:
            raise MalformedSpecError("TruncatedPotential needs exactly K-1 coefficients")

    @classmethod
    def from_coeffs(cls, *coeffs: float) -> "TruncatedPotential":
        """Build from c_2, c_3, ... given positionally."""
        return cls(tuple(coeffs), len(coeffs) + 1)

    def coefficient(self, k: int) -> float:
        if 2 <= k <= self.K:
            return self.coeffs[k - 2]
        return 0.0

    def nonzero_orders(self) -> list[int]:
        return [k for k in range(2, self.K + 1) if self.coeffs[k - 2] != 0.0]

    @property
    def bandwidth(self) -> int:
        """Largest k with c_k != 0, i.e. the coupling range in radial steps."""
        orders = self.nonzero_orders()
        return max(orders) if orders else 0

    @property
    def is_zero(self) -> bool:
        return not self.nonzero_orders()

    def __call__(self, u):
        u = _as_u_array(u)
        return _horner((0.0, 0.0) + self.coeffs, u)


@dataclass(frozen=True)
class PotentialSpec:
    """Radial potential given by Taylor data in ``u`` and an optional closed form.

    Parameters
    ----------
    taylor : sequence of float
        ``c_0, c_1, ..., c_Kmax``; the first two must vanish.
    delta : float
        Slowly-varying scale claimed for this potential.
    eta : float
        Decay exponent of the closed form (informational).
    closed_form : ClosedForm, optional
        Bounded analytic family. Without it the potential is the Taylor
        polynomial everywhere.
    """

    taylor: tuple[float, ...]
    delta: float = 0.0
    eta: float = 1.0
    closed_form: ClosedForm | None = None

    def __post_init__(self):
        object.__setattr__(self, "taylor", tuple(float(c) for c in self.taylor))
        c = self.taylor
        if not all(math.isfinite(x) for x in c):
            raise MalformedSpecError("taylor coefficients must be finite")
        if len(c) >= 1 and c[0] != 0.0:
            raise MalformedSpecError("V(0) must vanish (taylor[0] != 0)")
        if len(c) >= 2 and c[1] != 0.0:
            raise MalformedSpecError("V'(0) must vanish (taylor[1] != 0)")
        if self.closed_form is not None and c:
            order = min(_CLOSED_FORM_CHECK_ORDER, len(c) - 1)
            ref = self.closed_form.taylor(order)
            for k in range(order + 1):
                scale = max(abs(ref[k]), abs(c[k]))
                if not abs(ref[k] - c[k]) <= _CLOSED_FORM_RTOL * scale:
                    raise MalformedSpecError(
                        f"closed form and taylor disagree at order {k}: {ref[k]!r} vs {c[k]!r}"
                    )

    @property
    def K_max(self) -> int:
        return len(self.taylor) - 1

    @property
    def c2(self) -> float:
        return self.taylor[2] if len(self.taylor) > 2 else 0.0

    @property
    def second_derivative(self) -> float:
        """``V''(0)`` in the variable u."""
        return 2.0 * self.c2

    @property
    def is_polynomial(self) -> bool:
        return self.closed_form is None

    def negated(self) -> "PotentialSpec":
        cf = self.closed_form
        if cf is not None:
            if cf.family == "gaussian_envelope":
                cf = ClosedForm(cf.family, {**cf.params, "poly": [-a for a in cf.params["poly"]]})
            else:
                cf = ClosedForm(cf.family, {**cf.params, "amplitude": -cf.params["amplitude"]})
        return PotentialSpec(tuple(-c for c in self.taylor), self.delta, self.eta, cf)

    # construction helpers

    @classmethod
    def quadratic(cls, c2: float, delta: float | None = None) -> "PotentialSpec":
        """Pure polynomial ``V(u) = c2 * u**2``."""
        if delta is None:
            delta = math.sqrt(2.0 * abs(c2))
        return cls((0.0, 0.0, c2), delta=delta, eta=1.0)

    @classmethod
    def gaussian_envelope(
        cls, poly: Sequence[float], kappa: float, K_max: int = 24, delta: float | None = None
    ) -> "PotentialSpec":
        cf = ClosedForm("gaussian_envelope", {"poly": list(poly), "kappa": kappa})
        taylor = cf.taylor(K_max)
        if delta is None:
            delta = math.sqrt(2.0 * abs(taylor[2])) if len(taylor) > 2 else kappa
        return cls(tuple(taylor), delta=delta, eta=4.0, closed_form=cf)

    @classmethod
    def gaussian_bump(cls, delta: float, sign: float = 1.0, K_max: int = 24) -> "PotentialSpec":
        """``V(u) = sign * (delta**2/2) * u**2 * exp(-(delta*u)**2)``; sup|V| = 1/(2e)."""
        return cls.gaussian_envelope([0.0, 0.0, sign * delta**2 / 2.0], delta, K_max, delta)

    @classmethod
    def rational_decay(
        cls, amplitude: float, kappa: float, power: float, K_max: int = 24, delta: float | None = None
    ) -> "PotentialSpec":
        cf = ClosedForm("rational_decay", {"amplitude": amplitude, "kappa": kappa, "power": power})
        taylor = cf.taylor(K_max)
        if delta is None:
            delta = math.sqrt(2.0 * abs(amplitude))
        return cls(tuple(taylor), delta=delta, eta=cf.decay_exponent(), closed_form=cf)

    # JSON

    @classmethod
    def from_json(cls, doc: Mapping | str | Path) -> "PotentialSpec":
        if isinstance(doc, (str, Path)):
            doc = json.loads(Path(doc).read_text())
        try:
            taylor = doc["taylor"]
            delta = float(doc["delta"])
            eta = float(doc.get("eta", 1.0))
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedSpecError(f"bad potential document: {exc}") from None
        cf_doc = doc.get("closed_form")
        cf = None if cf_doc is None else ClosedForm(cf_doc["family"], cf_doc["params"])
        return cls(tuple(taylor), delta=delta, eta=eta, closed_form=cf)

    def to_json(self) -> dict:
        return {
            "taylor": list(self.taylor),
            "delta": self.delta,
            "eta": self.eta,
            "closed_form": None if self.closed_form is None else self.closed_form.to_json(),
        }


def as_potential(value) -> PotentialSpec:
    """Accept a PotentialSpec, its JSON dict, or a path to a JSON file."""
    if isinstance(value, PotentialSpec):
        return value
    return PotentialSpec.from_json(value)


def taylor_truncate(spec: PotentialSpec, K: int) -> TruncatedPotential:
    """Exact truncation ``V_K = sum_{k=2}^K c_k u**k``."""
    if K < 2:
        raise InvalidOrderError(f"truncation order K={K} must be >= 2")
    if K > spec.K_max:
        raise InvalidOrderError(f"K={K} exceeds the available order K_max={spec.K_max}")
    return TruncatedPotential(spec.taylor[2 : K + 1], K)


def eval_potential(spec: PotentialSpec, u, truncate: int | None = None):
    """Evaluate V at ``u = r**2``.

    ``truncate=None`` selects the full potential (closed form if present, else
    the Taylor polynomial); an integer K evaluates the truncation ``V_K``.
    """
    u = _as_u_array(u)
    if truncate is not None:
        out = taylor_truncate(spec, truncate)(u)
    elif spec.closed_form is not None:
        out = spec.closed_form(u)
    else:
        out = _horner(spec.taylor, u)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ConditionResult:
    name: str
    passed: bool
    margin: float
    waived: bool = False
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    conditions: tuple[ConditionResult, ...]
    warnings: tuple[str, ...] = field(default_factory=tuple)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.conditions)

    @property
    def failed(self) -> list[str]:
        return [c.name for c in self.conditions if not c.passed]

    @property
    def worst_margin(self) -> float:
        active = [c.margin for c in self.conditions if not c.waived]
        return min(active) if active else math.inf

    def __getitem__(self, name: str) -> ConditionResult:
        for c in self.conditions:
            if c.name == name:
                return c
        raise KeyError(name)


def sup_norm_samples(E: float, points: int = 4096) -> np.ndarray:
    """Sampling grid for the sup-norm test: u = 0, a geometric sweep of
    ``points`` values over (0, 16E], and a sparse geometric tail beyond."""
    u_max = 16.0 * E
    body = np.geomspace(u_max * 1e-8, u_max, points)
    tail = np.geomspace(u_max, u_max * 1e6, 256)[1:]
    return np.concatenate(([0.0], body, tail))


def validate_slowly_varying(spec: PotentialSpec, E: float, delta: float) -> ValidationReport:
    """Check the slowly-varying conditions with scale ``delta``.

    Coefficient bounds are exact comparisons on the stored Taylor data; the
    sup-norm bound is sampled. Taylor-only potentials are polynomials, so the
    sup-norm condition is waived and flagged.
    """
    if not spec.taylor:
        raise MalformedSpecError("empty Taylor coefficient list")
    if not (E > 0 and delta > 0):
        raise DomainError("E and delta must be positive")
    c = spec.taylor
    conds = []
    conds.append(ConditionResult("V(0)=0", c[0] == 0.0, -abs(c[0])))
    if len(c) > 1:
        conds.append(ConditionResult("V'(0)=0", c[1] == 0.0, -abs(c[1])))
    two_c2 = abs(2.0 * spec.c2)
    lo, hi = delta**2 / 2.0, delta**2
    conds.append(
        ConditionResult(
            "c2 window",
            lo <= two_c2 <= hi,
            min(two_c2 - lo, hi - two_c2),
            detail=f"|V''(0)|={two_c2!r} vs [{lo!r}, {hi!r}]",
        )
    )
    for k in range(3, len(c)):
        bound = delta**k
        conds.append(ConditionResult(f"|c_{k}|<=delta^{k}", abs(c[k]) <= bound, bound - abs(c[k])))
    notes = []
    if spec.closed_form is None:
        conds.append(ConditionResult("sup|V|<=1", True, math.inf, waived=True))
        notes.append("no bounded closed form: sup-norm condition waived (polynomial potential)")
    else:
        sup = float(np.max(np.abs(spec.closed_form(sup_norm_samples(E)))))
        conds.append(ConditionResult("sup|V|<=1", sup <= 1.0, 1.0 - sup, detail=f"sampled sup={sup!r}"))
    return ValidationReport(tuple(conds), tuple(notes))


def sampled_sup_norm(spec: PotentialSpec, E: float) -> float:
    """Sampled ``sup |V|`` on the grid used by :func:`validate_slowly_varying`."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        vals = eval_potential(spec, sup_norm_samples(E))
    return float(np.max(np.abs(vals)))
