import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.spatial.transform import Rotation
from scipy.special import lpmv

from oscillab.errors import DegenerateInputError, DistinctnessError, MalformedSpecError
from oscillab.nodal import (
    SphericalCombo,
    dominant_frequency,
    finite_radius_convergence,
    icosphere,
    limit_nodal_measure,
    mixed_frequency_bound_check,
    nodal_measure,
    normalized_legendre,
    quasimode_window,
    random_combo,
    sph_eval,
)
from oscillab.potentials import PotentialSpec

CONVEX = PotentialSpec.quadratic(0.405, 0.9)
CONCAVE = CONVEX.negated()


def rational(sign):
    return PotentialSpec.rational_decay(sign * 0.4, math.sqrt(0.1), 2, delta=0.9)


# --------------------------------------------------------------------------
# harmonics


def test_circle_harmonics():
    theta = np.linspace(0, 2 * math.pi, 7)
    const = SphericalCombo(2, ((0, "cos", 1.0),))
    np.testing.assert_allclose(sph_eval(const, theta), 1 / math.sqrt(2 * math.pi))
    tone = SphericalCombo(2, ((5, "cos", 1.0),))
    np.testing.assert_allclose(sph_eval(tone, theta), np.cos(5 * theta) / math.sqrt(math.pi), atol=1e-15)


def test_degree_one_harmonics_are_coordinates():
    rng = np.random.default_rng(1)
    pts = rng.standard_normal((20, 3))
    pts /= np.linalg.norm(pts, axis=1, keepdims=True)
    a, b, c = 0.3, -1.2, 0.7
    combo = SphericalCombo(3, ((1, 1, a), (1, -1, b), (1, 0, c)))
    k = math.sqrt(3 / (4 * math.pi))
    want = k * (a * pts[:, 0] + b * pts[:, 1] + c * pts[:, 2])
    np.testing.assert_allclose(sph_eval(combo, pts), want, rtol=1e-13, atol=1e-15)


def test_normalized_legendre_matches_scipy():
    x = np.linspace(-0.99, 0.99, 11)
    table = normalized_legendre(20, x)
    for ell in range(21):
        for m in range(ell + 1):
            norm = math.sqrt((2 * ell + 1) / (4 * math.pi) * math.factorial(ell - m) / math.factorial(ell + m))
            # scipy includes the Condon-Shortley phase
            want = (-1) ** m * norm * lpmv(m, ell, x)
            np.testing.assert_allclose(table[(ell, m)], want, rtol=1e-11, atol=1e-13)


def test_harmonics_are_orthonormal_on_the_sphere():
    verts, faces = icosphere(5)
    tri = verts[faces]
    area = 0.5 * np.linalg.norm(np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0]), axis=1)
    centre = tri.mean(axis=1)
    centre /= np.linalg.norm(centre, axis=1, keepdims=True)
    w = area * 4 * math.pi / area.sum()
    labels = [(2, 1), (2, -2), (3, 0)]
    vals = [sph_eval(SphericalCombo(3, ((ell, m, 1.0),)), centre) for ell, m in labels]
    gram = np.array([[np.dot(w, u * v) for v in vals] for u in vals])
    np.testing.assert_allclose(gram, np.eye(3), atol=2e-3)


def test_combo_validation_and_json():
    with pytest.raises(MalformedSpecError):
        SphericalCombo(2, ((0, "sin", 1.0),))
    with pytest.raises(MalformedSpecError):
        SphericalCombo(3, ((2, 3, 1.0),))
    with pytest.raises(MalformedSpecError):
        SphericalCombo.from_json({"d": 3})
    combo = random_combo(3, [2, 4], np.random.default_rng(0))
    assert SphericalCombo.from_json(combo.to_json()) == combo
    with pytest.raises(DegenerateInputError):
        nodal_measure(SphericalCombo(2, ((3, "cos", 0.0),)), 0)


# --------------------------------------------------------------------------
# measures


@pytest.mark.parametrize("ell", [1, 2, 7, 64, 257, 512])
@pytest.mark.parametrize("label", ["cos", "sin"])
def test_pure_tone_zero_count(ell, label):
    sample = nodal_measure(SphericalCombo(2, ((ell, label, 1.3),)), 0)
    assert sample.measure_raw == 2 * ell
    assert sample.measure_normalized == pytest.approx(2 * ell / (2 * math.pi))


def test_roots_are_refined():
    sample = nodal_measure(SphericalCombo(2, ((3, "cos", 1.0),)), 1)
    want = np.sort((math.pi / 6 + np.arange(6) * math.pi / 3) % (2 * math.pi))
    np.testing.assert_allclose(sample.roots, want, atol=1e-11)


def test_great_circle_length():
    combo = random_combo(3, [1], np.random.default_rng(7))
    sample = nodal_measure(combo, 6)
    for _, length in sample.convergence:
        assert length == pytest.approx(2 * math.pi, rel=0.01)


def test_sphere_refinement_converges():
    combo = random_combo(3, [10], np.random.default_rng(3))
    sample = nodal_measure(combo, 6)
    deltas = sample.deltas
    assert deltas[1] < deltas[0]
    assert deltas[-1] / sample.measure_raw < 0.005


def test_rotation_invariance():
    combo = random_combo(3, [6], np.random.default_rng(11))
    rot = Rotation.random(random_state=5).as_matrix()
    a = nodal_measure(combo, 6).measure_raw
    b = nodal_measure(combo, 6, rotation=rot).measure_raw
    assert b == pytest.approx(a, rel=0.005)


@pytest.mark.parametrize("ell", [10, 20])
def test_sphere_measure_grows_linearly(ell):
    rng = np.random.default_rng(ell)
    ratios = [nodal_measure(random_combo(3, [ell], rng), 5).measure_raw / ell for _ in range(3)]
    assert 3.5 <= min(ratios) and max(ratios) <= 5.5


def test_two_tone_circle_bound():
    combo = SphericalCombo(2, ((3, "cos", 1.0), (5, "cos", 0.5)))
    report = mixed_frequency_bound_check(combo)
    assert report.measure <= 10
    assert report.passed


def test_five_term_sphere_combos_within_calibrated_bound():
    rng = np.random.default_rng(2)
    for _ in range(2):
        ells = sorted(rng.choice(np.arange(1, 30), 4, replace=False).tolist()) + [30]
        terms = [(ell, int(rng.integers(-ell, ell + 1)), float(rng.standard_normal())) for ell in ells]
        report = mixed_frequency_bound_check(SphericalCombo(3, tuple(terms)), refinement=5)
        assert report.passed


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 40), st.sampled_from(["cos", "sin"]), st.floats(-5, 5)),
                min_size=1, max_size=6))
def test_circle_count_at_most_twice_degree(terms):
    terms = [(ell, "cos" if ell == 0 else m, a) for ell, m, a in terms]
    combo = SphericalCombo(2, tuple(terms))
    if combo.is_zero:
        return
    sample = nodal_measure(combo, 1)
    assert sample.measure_raw <= 2 * combo.ell_max
    assert sample.measure_raw % 2 == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 30), st.floats(0.01, 100), st.integers(0, 2**16))
def test_measure_is_scale_invariant(ell, scale, seed):
    combo = random_combo(2, [ell], np.random.default_rng(seed))
    scaled = combo.scaled({ell: scale})
    assert nodal_measure(scaled, 1).measure_raw == nodal_measure(combo, 1).measure_raw


# --------------------------------------------------------------------------
# quasimodes


def test_unperturbed_window_holds_every_ell():
    w = quasimode_window(20, 0.0, 0.5, CONVEX)
    assert w.ells == list(range(0, 21, 2))
    with pytest.raises(DistinctnessError):
        dominant_frequency(w, {(0, "cos"): 1.0, (4, "cos"): 1.0})


def test_window_members_lie_in_window():
    w = quasimode_window(100, 0.2, 0.5, CONCAVE)
    assert w.ells[0] == 0
    assert all(abs(s - w.center_shift) <= w.halfwidth for _, s in w.members)
    assert w.center == pytest.approx(w.energy(0), rel=1e-15)


def test_gamma_one_window_stays_bounded():
    # shifts split by about eps V''(0) hbar^3 ell^2 / 4, so the hbar^3 window stops
    # at ell_max ~ 2 / sqrt(eps V''(0)) = 4.97 independently of n
    for n in (100, 200, 400, 800):
        assert quasimode_window(n, 0.2, 1.0, CONVEX).ells == [0, 2, 4]
    assert quasimode_window(201, 0.2, 1.0, CONVEX).ells == [1, 3, 5]  # (25 - 1) / 4.97**2 < 1


def test_gamma_zero_window_scales_like_inverse_hbar():
    ratios = []
    for n in (50, 100, 200):
        w = quasimode_window(n, 0.2, 0.0, CONVEX)
        ratios.append(w.ell_max * w.hbar)
    assert max(ratios) / min(ratios) < 1.5


def test_single_block_limit_is_that_tone():
    w = quasimode_window(40, 0.2, 0.0, CONCAVE)
    limit = limit_nodal_measure(w, {(6, "cos"): 1.0, (6, "sin"): 0.4}, CONCAVE)
    assert limit.ell_star == 6 and limit.measure_raw == 12


def test_convex_limit_is_radial():
    w = quasimode_window(50, 0.2, 0.5, CONVEX)
    combo = random_combo(2, w.ells, np.random.default_rng(0))
    limit = limit_nodal_measure(w, {(l, m): a for l, m, a in combo.terms}, CONVEX)
    assert limit.ell_star == 0 and limit.measure_raw == 0
    assert limit.curvature_sign == 1


def test_concave_limit_is_window_edge():
    w = quasimode_window(50, 0.2, 0.5, CONCAVE)
    coeffs = {(l, m): a for l, m, a in random_combo(2, w.ells, np.random.default_rng(0)).terms}
    limit = limit_nodal_measure(w, coeffs, CONCAVE)
    assert limit.ell_star == w.ell_max
    assert limit.measure_raw == 2 * w.ell_max
    # the exceptional set: drop the top block and the next one takes over
    trimmed = {k: v for k, v in coeffs.items() if k[0] != w.ell_max}
    assert limit_nodal_measure(w, trimmed, CONCAVE).ell_star == w.ells[-2]


@settings(max_examples=10, deadline=None)
@given(st.floats(-50, 50).filter(lambda s: abs(s) > 1e-3), st.integers(0, 2**16))
def test_limit_scale_invariance(scale, seed):
    w = quasimode_window(30, 0.2, 0.5, CONCAVE)
    coeffs = {(l, m): a for l, m, a in random_combo(2, w.ells, np.random.default_rng(seed)).terms}
    a = limit_nodal_measure(w, coeffs)
    b = limit_nodal_measure(w, {k: scale * v for k, v in coeffs.items()})
    assert (a.ell_star, a.measure_raw) == (b.ell_star, b.measure_raw)


def test_finite_radius_without_perturbation():
    w = quasimode_window(12, 0.0, 0.0, CONVEX)
    conv = finite_radius_convergence(w, {(4, "cos"): 1.0, (4, "sin"): 2.0}, None, radii=[2.0, 5.0, 50.0])
    assert conv.measures == (8.0, 8.0, 8.0) and conv.limit == 8.0


@pytest.mark.parametrize("sign,limit", [(1, 0.0), (-1, 40.0)])
def test_finite_radius_swap(sign, limit):
    V = rational(sign)
    w = quasimode_window(20, 0.2, 0.0, V)
    coeffs = {(0, "cos"): 1.0, (20, "cos"): 0.5, (20, "sin"): -0.3}
    conv = finite_radius_convergence(w, coeffs, V, log_radii=[1, 10, 100, 1000, 2000, 3000])
    assert conv.limit == limit
    assert conv.monotone and conv.reaches_limit
    assert conv.measures[0] == 40.0
