import math

import pytest
from hypothesis import given, settings, strategies as st

from oscillab.errors import TruncationWindowError, UnsupportedError
from oscillab.laguerre import RadialMode, matrix_element, overlap_closed
from oscillab.perturbation import (
    contour_mu,
    default_orders,
    energy_series,
    jet_truncation_gap,
    level_spacing_check,
    mu_series,
    path_sum_mu,
    renormalized_path_sum_mu,
)
from oscillab.potentials import PotentialSpec, TruncatedPotential
from oscillab.spectra import oracle_diag, track_eigenvalue


def test_zero_potential_has_zero_coefficients():
    series = mu_series(RadialMode(2, 10, 2), TruncatedPotential.from_coeffs(0.0, 0.0), 4)
    assert series.mu == (0.0,) * 4


def test_first_coefficient_is_diagonal_element():
    mode = RadialMode(2, 20, 4)
    VK = TruncatedPotential.from_coeffs(0.003)
    mu = mu_series(mode, VK, 1).mu[0]
    assert mu == pytest.approx(0.003 * mode.hbar**2 * overlap_closed(2, 20, 20, 4, 2), rel=1e-14)


def test_second_coefficient_by_direct_summation():
    mode = RadialMode(2, 6, 0)
    VK = TruncatedPotential.from_coeffs(0.00125)
    h, n = mode.hbar, mode.n
    want = sum(matrix_element(VK, m, n, 0, 2, h) ** 2 / (h * (n - m))
               for m in range(max(0, n - 4), n + 5, 2) if m != n)
    assert mu_series(mode, VK, 2).mu[1] == pytest.approx(want, rel=1e-12)


def test_window_below_required_width_is_refused():
    with pytest.raises(TruncationWindowError) as info:
        mu_series(RadialMode(2, 10, 0), TruncatedPotential.from_coeffs(0.01, 0.0, 0.001), 3, M=7)
    assert info.value.required_M == 8


def test_wider_window_is_bitwise_stable():
    mode = RadialMode(3, 31, 5)
    VK = TruncatedPotential.from_coeffs(0.002, -1e-4, 2e-5)
    assert mu_series(mode, VK, 5, M=16).mu == mu_series(mode, VK, 5, M=80).mu


def test_eps_zero_returns_E():
    mode = RadialMode(2, 40, 0)
    assert energy_series(mode, PotentialSpec.quadratic(0.00125, 0.05), 0.0).value == mode.E


def test_first_order_energy():
    mode = RadialMode(2, 40, 0)
    V = PotentialSpec.quadratic(0.00125, 0.05)
    est = energy_series(mode, V, 0.1, J=1, K=2)
    VK = TruncatedPotential.from_coeffs(0.00125)
    want = mode.E + 0.1 * mode.hbar * matrix_element(VK, 40, 40, 0, 2, mode.hbar)
    assert est.value == pytest.approx(want, rel=1e-15)


def test_series_agrees_with_diagonalization():
    mode = RadialMode(2, 40, 0)
    V = PotentialSpec.quadratic(0.05**2 / 2, 0.05)
    est = energy_series(mode, V, 0.1)
    oracle = oracle_diag(mode, V, 0.1)
    assert abs(est.value - oracle.value) <= max(est.error_bar, 1e-10)


def test_out_of_range_eps_is_flagged():
    with pytest.warns(RuntimeWarning, match="eps outside"):
        est = energy_series(RadialMode(2, 10, 0), PotentialSpec.quadratic(0.005, 0.1), 0.3)
    assert est.flags


def test_third_order_needs_renormalization():
    mode = RadialMode(2, 8, 2)
    VK = TruncatedPotential.from_coeffs(0.004, 0.0005)
    mu = mu_series(mode, VK, 3).mu
    assert mu[2] == pytest.approx(renormalized_path_sum_mu(mode, VK, 3), rel=1e-10)
    # the plain sum-product misses the -W_nn sum |W_nm|^2/dn^2 term
    assert abs(mu[2] - path_sum_mu(mode, VK, 3)) > 1e-6 * abs(mu[2])


def test_contour_integral_matches_recursion():
    mode = RadialMode(3, 15, 3)
    VK = TruncatedPotential.from_coeffs(0.003, -0.0002)
    mu = mu_series(mode, VK, 4).mu
    contour = contour_mu(mode, VK, 4)
    for j, (a, b) in enumerate(zip(mu, contour), start=1):
        assert a == pytest.approx(b, rel=1e-7, abs=1e-12), j


def test_level_spacing_bounded_potential():
    V = PotentialSpec.gaussian_bump(0.3)
    report = level_spacing_check(RadialMode(2, 10, 0), V, [0.0, 0.1, 0.2])
    assert report.passed
    assert report.rows[0].margin == RadialMode(2, 10, 0).hbar / 4


def test_level_spacing_polynomial_proxy():
    report = level_spacing_check(RadialMode(2, 10, 2), PotentialSpec.quadratic(0.00125, 0.05), [0.05, 0.1])
    assert report.worst_margin > 0


def test_jet_gap_zero_for_full_polynomial():
    V = PotentialSpec.quadratic(0.00125, 0.05)
    assert jet_truncation_gap(RadialMode(2, 20, 0), V, V.K_max, 1) == 0.0
    with pytest.raises(UnsupportedError):
        jet_truncation_gap(RadialMode(2, 20, 0), PotentialSpec((0, 0, 0.001, 0, 1e-5), delta=0.05), 2, 1)


def _gaps(j, order):
    V = PotentialSpec.gaussian_bump(0.3)
    modes = [RadialMode(2, n, 0) for n in (20, 40, 80)]
    gaps = [jet_truncation_gap(m, V, order(m.n, V), j) for m in modes]
    return gaps, [m.hbar for m in modes]


@pytest.mark.parametrize("j", [1, 2])
def test_jet_gap_fixed_order_decays_faster_than_hbar_cubed(j):
    # Measured: hbar**j * <(V - V_K) psi, psi>-type terms stay O(hbar**j) at fixed K,
    # since hbar**k A_k is O(1) on the energy shell; ratio 0.24 (j=1) and 0.063 (j=2)
    # against the required 0.0174. Left failing: the claim needs K growing with n.
    gaps, hbars = _gaps(j, lambda n, V: 6)
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] / gaps[0] < (hbars[2] / hbars[0]) ** 3


@pytest.mark.parametrize("j", [1, 2])
def test_jet_gap_growing_order_decays_faster_than_hbar_cubed(j):
    gaps, hbars = _gaps(j, lambda n, V: default_orders(n, V.K_max)[0])
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[2] / gaps[0] < (hbars[2] / hbars[0]) ** 6


def test_default_orders():
    assert default_orders(40) == (math.ceil(math.log(42) ** 2),) * 2
    assert default_orders(40, 4)[0] == 4


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 12), st.integers(1, 3), st.sampled_from([2, 3]),
       st.lists(st.floats(-0.01, 0.01, allow_subnormal=False), min_size=1, max_size=3), st.data())
def test_recursion_equals_path_sum(n, J, d, coeffs, data):
    ell = data.draw(st.sampled_from(range(n % 2, n + 1, 2)))
    mode = RadialMode(d, n, ell)
    VK = TruncatedPotential.from_coeffs(*coeffs)
    mu = mu_series(mode, VK, J).mu
    for j in range(1, J + 1):
        want = renormalized_path_sum_mu(mode, VK, j)
        assert mu[j - 1] == pytest.approx(want, rel=1e-10, abs=1e-18)


@settings(max_examples=15, deadline=None)
@given(st.integers(20, 120), st.floats(0.0, 0.1), st.sampled_from([2, 3]), st.data())
def test_series_within_error_bar_of_oracle(n, eps, d, data):
    ell = data.draw(st.sampled_from(range(n % 2, n + 1, 2)))
    mode = RadialMode(d, n, ell)
    V = PotentialSpec((0.0, 0.0, 0.00125, -1e-5, 2e-7), delta=0.05)
    series = energy_series(mode, V, eps)
    oracle = track_eigenvalue(mode, V, eps)
    assert abs(series.value - oracle.value) <= series.error_bar + 1e-9
