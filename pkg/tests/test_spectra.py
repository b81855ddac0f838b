import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oscillab.laguerre import RadialMode
from oscillab.perturbation import energy_series
from oscillab.potentials import PotentialSpec, TruncatedPotential
from oscillab.spectra import build_hamiltonian, eigen_energies, oracle_diag, track_branch, track_eigenvalue
from oscillab.spectra.hamiltonian import level_shift_bound

QUAD = PotentialSpec.quadratic(0.00125, 0.05)


def test_unperturbed_hamiltonian_is_diagonal():
    mode = RadialMode(2, 10, 2)
    H = build_hamiltonian(mode, QUAD, 0.0, 12)
    expected = mode.hbar * (2 + 2 * np.arange(12) + 1.0)
    np.testing.assert_array_equal(H.matrix, np.diag(expected))
    assert eigen_energies(H, 3) == pytest.approx(list(expected[:3]), rel=1e-15)


def test_quadratic_couples_two_laguerre_steps():
    H = build_hamiltonian(RadialMode(3, 21, 3), QUAD, 0.1, 20)
    M = H.V_matrix
    offsets = np.abs(np.subtract.outer(np.arange(20), np.arange(20)))
    assert np.all(M[offsets > 2] == 0)
    assert np.all(M[offsets == 2] != 0)
    assert np.max(np.abs(M - M.T)) == 0


def test_closed_form_potential_is_assembled_densely():
    H = build_hamiltonian(RadialMode(2, 20, 0), PotentialSpec.gaussian_bump(0.3), 0.1, 24)
    assert H.kind == "dense"
    assert np.max(np.abs(H.V_matrix - H.V_matrix.T)) == 0


def test_tracking_at_zero_is_exact():
    mode = RadialMode(2, 30, 4)
    assert track_eigenvalue(mode, QUAD, 0.0).value == mode.E
    state = track_branch(mode, QUAD, 0.0)
    assert state.vector[mode.n_prime - state.a_lo] == 1.0


def test_tracked_branch_stays_in_quarter_spacing():
    V = PotentialSpec.gaussian_bump(0.3)
    for ell in (0, 6, 20):
        mode = RadialMode(2, 20, ell)
        est = track_eigenvalue(mode, V, 0.2)
        assert abs(est.shift) < mode.hbar / 4
        assert abs(est.shift) <= level_shift_bound(mode, V, 0.2) * (1 + 1e-12)


def test_tracking_agrees_with_series():
    mode = RadialMode(2, 60, 10)
    V = PotentialSpec((0.0, 0.0, 0.00125, -1e-5), delta=0.05)
    a = track_eigenvalue(mode, V, 0.05).value
    b = energy_series(mode, V, 0.05, J=6).value
    assert abs(a - b) <= 1e-8


def test_tracked_vector_is_normalized_and_signed():
    mode = RadialMode(3, 24, 2)
    state = track_branch(mode, QUAD, 0.1)
    assert np.linalg.norm(state.vector) == pytest.approx(1.0, rel=1e-13)
    assert state.vector[mode.n_prime - state.a_lo] > 0
    assert not state.estimate.flags


def test_oracle_diag_and_tracking_coincide_for_small_coupling():
    mode = RadialMode(2, 40, 0)
    V = PotentialSpec.gaussian_bump(0.3)
    assert oracle_diag(mode, V, 0.05).value == pytest.approx(track_eigenvalue(mode, V, 0.05).value, abs=1e-13)


@settings(max_examples=10, deadline=None)
@given(st.integers(10, 60), st.floats(0.0, 0.2), st.data())
def test_weyl_bound(n, eps, data):
    ell = data.draw(st.sampled_from(range(n % 2, n + 1, 2)))
    mode = RadialMode(2, n, ell)
    V = PotentialSpec.gaussian_bump(0.3, sign=data.draw(st.sampled_from([1.0, -1.0])))
    est = track_eigenvalue(mode, V, eps)
    # eps * hbar * ||V||_inf with sup |V| = 1/(2e), plus the eigensolver's backward error
    assert abs(est.shift) <= eps * mode.hbar / (2 * math.e) * (1 + 1e-9) + 1e-14


@settings(max_examples=10, deadline=None)
@given(st.lists(st.floats(-0.005, 0.005, allow_subnormal=False), min_size=1, max_size=3), st.floats(0.0, 0.1))
def test_odd_orders_cancel_under_sign_flip(coeffs, eps):
    # shift(V) + shift(-V) keeps only the even orders of the series
    mode = RadialMode(2, 30, 6)
    VK = TruncatedPotential.from_coeffs(*coeffs)
    neg = TruncatedPotential.from_coeffs(*(-c for c in coeffs))
    tracked = track_eigenvalue(mode, VK, eps).shift + track_eigenvalue(mode, neg, eps).shift
    series = energy_series(mode, VK, eps, J=8).shift + energy_series(mode, neg, eps, J=8).shift
    assert tracked == pytest.approx(series, abs=1e-12)
