"""Fixed-angular-momentum radial Hamiltonian in the Laguerre basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, eigh, eigvalsh

from ..errors import BranchAmbiguityError, NumericalFailure
from ..laguerre import RadialMode, band_matrix_elements, gauss_laguerre_rule, normalized_samples
from ..potentials import PotentialSpec, TruncatedPotential, taylor_truncate

RESIDUAL_RTOL = 1e-10
DOUBLING_TOL = 1e-11
_EXTRA_NODES = 32
_MAX_DOUBLINGS = 3


def _as_operator(V):
    """Normalize V to either a TruncatedPotential or a closed-form PotentialSpec."""
    if isinstance(V, TruncatedPotential):
        return V
    if isinstance(V, PotentialSpec):
        if V.closed_form is None:
            return taylor_truncate(V, V.K_max)
        return V
    raise TypeError(f"unsupported potential type {type(V).__name__}")


def banded_to_dense(B: np.ndarray) -> np.ndarray:
    size = B.shape[1]
    out = np.diag(B[0].copy())
    for o in range(1, B.shape[0]):
        if o >= size:
            break
        vals = B[o, : size - o]
        out += np.diag(vals, o) + np.diag(vals, -o)
    return out


def quadrature_potential_matrix(V: PotentialSpec, alpha: float, hbar: float, a_lo: int, a_hi: int,
                                nodes: int | None = None) -> np.ndarray:
    """Dense ``<V psi_a, psi_b>`` for Laguerre indices ``a_lo..a_hi``.

    Integrated with a Gauss rule of ``a_hi + 32`` nodes and accepted only when
    a rule of twice the size agrees to 1e-11 (scaled by the largest entry).
    The rule is doubled up to three times before giving up.
    """
    m = nodes or (a_hi + 1 + _EXTRA_NODES)

    def assemble(count):
        rule = gauss_laguerre_rule(count, alpha)
        Q = normalized_samples(rule, a_hi + 1)[a_lo:]
        vals = V.closed_form(hbar * rule.nodes)
        return (Q * vals) @ Q.T

    current = assemble(m)
    for _ in range(_MAX_DOUBLINGS):
        refined = assemble(2 * m)
        scale = max(1.0, float(np.max(np.abs(refined))))
        diff = float(np.max(np.abs(refined - current)))
        if diff <= DOUBLING_TOL * scale:
            return 0.5 * (refined + refined.T)
        m, current = 2 * m, refined
    raise NumericalFailure(
        "quadrature assembly of the potential matrix did not converge",
        {"alpha": alpha, "hbar": hbar, "nodes": m, "difference": diff},
    )


def potential_matrix(V, alpha: float, hbar: float, a_lo: int, a_hi: int) -> tuple[np.ndarray, str]:
    """Matrix of V on the Laguerre window and its assembly kind."""
    op = _as_operator(V)
    if isinstance(op, TruncatedPotential):
        if op.is_zero:
            return np.zeros((a_hi - a_lo + 1,) * 2), "banded"
        return banded_to_dense(band_matrix_elements(op, a_lo, a_hi, alpha, hbar)), "banded"
    return quadrature_potential_matrix(op, alpha, hbar, a_lo, a_hi), "dense"


@dataclass(frozen=True)
class RadialHamiltonian:
    """``H = hbar (m + d/2) + eps * hbar * V`` on principal indices
    ``m = ell + 2a`` for Laguerre indices ``a = a_lo .. a_lo + M - 1``."""

    ell: int
    d: int
    hbar: float
    eps: float
    M: int
    a_lo: int
    V_matrix: np.ndarray
    kind: str

    @property
    def principal_indices(self) -> np.ndarray:
        return self.ell + 2 * (self.a_lo + np.arange(self.M))

    @property
    def matrix(self) -> np.ndarray:
        diag = self.hbar * (self.principal_indices + self.d / 2)
        return np.diag(diag) + self.eps * self.hbar * self.V_matrix

    def shifted(self, n: int) -> np.ndarray:
        """``H - hbar (n + d/2)``, formed without cancellation on the diagonal."""
        diag = self.hbar * (self.principal_indices - n).astype(float)
        return np.diag(diag) + self.eps * self.hbar * self.V_matrix

    def with_eps(self, eps: float) -> "RadialHamiltonian":
        return RadialHamiltonian(self.ell, self.d, self.hbar, eps, self.M, self.a_lo, self.V_matrix, self.kind)


def build_hamiltonian(mode: RadialMode, V, eps: float, M: int, a_lo: int = 0) -> RadialHamiltonian:
    """Assemble the radial Hamiltonian of ``mode``'s sector (``ell``, ``d``, ``hbar``)."""
    if M < 8:
        raise ValueError("basis size M must be >= 8")
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    Vm, kind = potential_matrix(V, mode.alpha, mode.hbar, a_lo, a_lo + M - 1)
    return RadialHamiltonian(mode.ell, mode.d, mode.hbar, float(eps), M, a_lo, Vm, kind)


def _checked_eigh(A: np.ndarray, count: int | None = None):
    try:
        if count is None:
            w, v = eigh(A)
        else:
            w, v = eigh(A, subset_by_index=(0, count - 1))
    except LinAlgError as exc:
        raise NumericalFailure("symmetric eigensolver failed", {"error": str(exc)}) from exc
    norm = float(np.linalg.norm(A, 2)) if A.size else 0.0
    res = np.linalg.norm(A @ v - v * w, axis=0)
    if res.size and float(res.max()) > RESIDUAL_RTOL * max(norm, 1e-300):
        raise NumericalFailure("eigen residual above threshold", {"residual": float(res.max()), "norm": norm})
    return w, v, res


def eigen_energies(H: RadialHamiltonian, count: int) -> list[float]:
    """Lowest ``count`` eigenvalues in ascending order (residual-checked)."""
    if not 1 <= count <= H.M:
        raise ValueError("count must lie in [1, M]")
    w, _, _ = _checked_eigh(H.matrix, count)
    return [float(x) for x in w]


@dataclass(frozen=True)
class EnergyEstimate:
    """Perturbed energy with its source and an internal error estimate.

    ``shift`` is ``value - E`` computed directly, without the cancellation of
    subtracting two nearly equal energies.
    """

    value: float
    source: str
    error_bar: float
    shift: float
    flags: tuple[str, ...] = ()


def default_half_width(V) -> int:
    if V is None:
        return 40
    op = _as_operator(V)
    if isinstance(op, TruncatedPotential):
        return max(40, 12 * op.bandwidth + 16)
    return 40


def sector_window(mode: RadialMode, half_width: int) -> tuple[int, int]:
    """Laguerre-index window ``[a_lo, a_hi]`` centred on ``n'``."""
    a_lo = max(0, mode.n_prime - half_width)
    return a_lo, mode.n_prime + half_width


@dataclass(frozen=True)
class BranchState:
    """Tracked eigenpair: the energy estimate and the eigenvector on Laguerre
    indices ``a_lo, a_lo + 1, ...`` (sign fixed so the ``n'`` entry is positive)."""

    estimate: EnergyEstimate
    a_lo: int
    vector: np.ndarray


def track_eigenvalue(mode: RadialMode, V, eps_target: float, steps: int = 16,
                     half_width: int | None = None, max_halvings: int = 10) -> EnergyEstimate:
    """Tracked energy of the branch; see :func:`track_branch`."""
    return track_branch(mode, V, eps_target, steps, half_width, max_halvings).estimate


def track_branch(mode: RadialMode, V, eps_target: float, steps: int = 16,
                 half_width: int | None = None, max_halvings: int = 10) -> BranchState:
    """Continue the branch through ``hbar (n + d/2)`` from eps = 0 to ``eps_target``.

    At each increment the eigenvalue nearest to a linear extrapolation of the
    branch is selected. An increment is halved when the choice is unclear
    (nearest candidate farther than a quarter of its distance to the runner-up);
    two eigenvalues closer than 1e-12 raise BranchAmbiguityError.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    hw = default_half_width(V) if half_width is None else half_width
    a_lo, a_hi = sector_window(mode, hw)
    if eps_target == 0:
        unit = np.zeros(a_hi - a_lo + 1)
        unit[mode.n_prime - a_lo] = 1.0
        return BranchState(EnergyEstimate(mode.E, "oracle_tracked", 0.0, 0.0), a_lo, unit)
    H = build_hamiltonian(mode, V, 0.0, a_hi - a_lo + 1, a_lo)

    def spectrum(eps):
        try:
            return eigvalsh(H.with_eps(eps).shifted(mode.n))
        except LinAlgError as exc:
            raise NumericalFailure("symmetric eigensolver failed", {"eps": eps}) from exc

    history = [(0.0, 0.0)]
    grid = list(np.linspace(0.0, eps_target, steps + 1)[1:])
    depth = {e: 0 for e in grid}
    while grid:
        eps = grid[0]
        (e0, s0), (e1, s1) = (history[-2] if len(history) > 1 else history[-1]), history[-1]
        pred = s1 if e1 == e0 else s1 + (s1 - s0) * (eps - e1) / (e1 - e0)
        w = spectrum(eps)
        order = np.argsort(np.abs(w - pred))
        i0, i1 = int(order[0]), int(order[1])
        if abs(w[i0] - w[i1]) < 1e-12:
            raise BranchAmbiguityError("two eigenvalues collide along the branch",
                                       (float(w[i0]), float(w[i1])), float(eps))
        if abs(w[i0] - pred) > 0.25 * abs(w[i1] - w[i0]):
            if depth[eps] >= max_halvings:
                raise BranchAmbiguityError("branch continuation stays ambiguous",
                                           (float(w[i0]), float(w[i1])), float(eps))
            mid = 0.5 * (history[-1][0] + eps)
            depth[mid] = depth[eps] + 1
            depth[eps] += 1
            grid.insert(0, mid)
            continue
        history.append((eps, float(w[i0])))
        grid.pop(0)
    A = H.with_eps(eps_target).shifted(mode.n)
    w, v, res = _checked_eigh(A)
    k = int(np.argmin(np.abs(w - history[-1][1])))
    shift = float(w[k])
    vec = v[:, k] * np.sign(v[mode.n_prime - a_lo, k])
    estimate = EnergyEstimate(mode.E + shift, "oracle_tracked", float(res[k]), shift, _edge_flags(vec, a_lo))
    return BranchState(estimate, a_lo, vec)


def _edge_flags(vec: np.ndarray, a_lo: int) -> tuple[str, ...]:
    edges = [abs(vec[-1])] + ([abs(vec[0])] if a_lo > 0 else [])
    return ("eigenvector reaches the basis edge",) if max(edges) > 1e-10 else ()


def oracle_diag(mode: RadialMode, V, eps: float, half_width: int | None = None) -> EnergyEstimate:
    """Eigenvalue of the windowed Hamiltonian nearest to the unperturbed level."""
    if eps == 0:
        return EnergyEstimate(mode.E, "oracle_diag", 0.0, 0.0)
    hw = default_half_width(V) if half_width is None else half_width
    a_lo, a_hi = sector_window(mode, hw)
    H = build_hamiltonian(mode, V, eps, a_hi - a_lo + 1, a_lo)
    w, v, res = _checked_eigh(H.shifted(mode.n))
    k = int(np.argmin(np.abs(w)))
    return EnergyEstimate(mode.E + float(w[k]), "oracle_diag", float(res[k]), float(w[k]),
                          _edge_flags(v[:, k], a_lo))


def level_shift_bound(mode: RadialMode, V, eps: float) -> float:
    """Min-max bound ``eps * hbar * ||V||`` on the window."""
    a_lo, a_hi = sector_window(mode, default_half_width(V))
    Vm, _ = potential_matrix(V, mode.alpha, mode.hbar, a_lo, a_hi)
    return eps * mode.hbar * float(np.linalg.norm(Vm, 2))


__all__ = [
    "RadialHamiltonian",
    "EnergyEstimate",
    "build_hamiltonian",
    "eigen_energies",
    "track_eigenvalue",
    "track_branch",
    "BranchState",
    "oracle_diag",
    "potential_matrix",
    "quadrature_potential_matrix",
    "banded_to_dense",
    "sector_window",
    "level_shift_bound",
]
