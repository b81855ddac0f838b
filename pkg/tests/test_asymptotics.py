from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from oscillab.asymptotics import (
    GROWTH_BASE,
    a2_identity_check,
    f32_expansion_check,
    monotonicity_check,
    prefactor_expansion_check,
    theorem1_residuals,
    theorem1_sweep,
)
from oscillab.errors import DegenerateLeadError
from oscillab.laguerre import RadialMode, overlap_closed
from oscillab.potentials import PotentialSpec

QUAD = PotentialSpec.quadratic(0.02**2 / 2, 0.02)


def test_eps_zero_skips_extraction():
    (rec,) = theorem1_sweep(100, 0.0, QUAD, [10])
    assert rec.lead == 0.0 and rec.S_hat is None and rec.T_hat is None
    assert rec.energy == RadialMode(2, 100, 10).E


def test_lowest_ell_has_no_S():
    rec = theorem1_residuals(100, 0, 0.05, QUAD)
    assert rec.S_hat is None
    assert rec.reconstruct_shift() == pytest.approx(rec.shift, rel=1e-15)
    odd = theorem1_residuals(101, 1, 0.05, QUAD)
    assert odd.S_hat is None


def test_flat_potential_has_no_lead():
    with pytest.raises(DegenerateLeadError):
        theorem1_sweep(20, 0.1, PotentialSpec((0.0, 0.0, 0.0, 1e-4), delta=0.05))


@pytest.mark.parametrize("engine", ["series", "oracle"])
def test_reconstruction_is_exact(engine):
    for rec in theorem1_sweep(60, 0.05, QUAD, [0, 10, 34, 60], engine):
        assert rec.reconstruct_shift() == pytest.approx(rec.shift, rel=1e-14)


def test_residuals_bounded_by_delta_eps():
    sweep = theorem1_sweep(100, 0.05, QUAD)
    scale = max(0.02, 0.05)
    assert max(abs(r.S_hat) for r in sweep if r.S_hat is not None) <= 1.0 * scale
    assert max(abs(r.T_hat) for r in sweep) <= 2.0 * scale


def test_leading_law_with_one_over_n_correction():
    # (shift/unit - (3 - ell^2/n^2)) * n tends to 3d as delta -> 0 (measured 6.0400, 6.0399, 6.0400)
    n = 100
    for delta in (0.04, 0.02, 0.01):
        V = PotentialSpec.quadratic(delta**2 / 2, delta)
        for rec in theorem1_sweep(n, 0.05, V, [0, 20, 50, 100]):
            gap = (rec.shift / rec.unit - (3 - (rec.mode.ell / n) ** 2)) * n
            assert gap == pytest.approx(6.04, abs=0.01)


def test_a2_examples():
    assert overlap_closed(2, 2, 2, 0, 2) == pytest.approx(14.0, rel=1e-15)
    assert a2_identity_check(2, 0, 2)
    assert a2_identity_check(7, 7, 2)
    assert a2_identity_check(0, 0, 3)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 200), st.integers(2, 6), st.fractions(Fraction(1, 10), Fraction(10)), st.data())
def test_a2_identity_holds_exactly(n, d, E, data):
    ell = data.draw(st.sampled_from(range(n % 2, n + 1, 2)))
    check = a2_identity_check(n, ell, d, E)
    assert check.difference == 0


def test_prefactor_trivial_cases():
    assert prefactor_expansion_check(0, 50, 20, 3).residual == 0
    assert prefactor_expansion_check(5, 50, 0, 2).residual == 0
    assert prefactor_expansion_check(5, 51, 1, 3).residual == 0


@pytest.mark.parametrize("d", [2, 3])
def test_prefactor_sweep_bounded(d):
    # residual / ((1 + ell^2)/N^2) <= 8^3 across the full sweep
    worst = max(prefactor_expansion_check(3, 200, ell, d).scaled_residual for ell in range(0, 201, 2))
    assert worst <= 1.0
    assert GROWTH_BASE**3 == 512


def test_f32_trivial_cases():
    rec = f32_expansion_check(0, 0, 40, 10, 2)
    assert rec.lhs == rec.model == 1.0
    with pytest.raises(ValueError):
        f32_expansion_check(2, 3, 40, 0, 2)


@pytest.mark.parametrize("d,offset_times_N", [(2, 1.0), (3, 1.5)])
def test_f32_first_order_offset_is_one_over_N(d, offset_times_N):
    for N in (100, 200, 400):
        rec = f32_expansion_check(1, 0, N, 0, d)
        assert rec.offset * N == pytest.approx(offset_times_N, rel=1e-12)


@pytest.mark.parametrize("d", [2, 3])
def test_f32_sweep_bounded(d):
    worst = max(f32_expansion_check(4, beta, 400, ell, d).scaled_residual
                for beta in range(5) for ell in range(0, 401, 4))
    assert worst <= 0.01


def test_monotone_in_ell_for_convex_potential():
    report = monotonicity_check(60, 0.05, QUAD)
    assert report.passed and report.pairs_checked > 0
    assert set(report.signs.values()) == {1}


def test_monotonicity_vacuous_at_eps_zero():
    report = monotonicity_check(60, 0.0, QUAD)
    assert report.passed and report.pairs_checked == 0


def test_sign_flip_flips_every_recorded_sign():
    up = monotonicity_check(40, 0.05, QUAD)
    down = monotonicity_check(40, 0.05, QUAD.negated(), C2_hat=up.C2_hat)
    assert down.passed
    assert up.signs.keys() == down.signs.keys()
    assert all(down.signs[k] == -v for k, v in up.signs.items())
