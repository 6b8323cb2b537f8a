import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import gamma

from qrlab.sphere import (
    DimensionError, ExtendedPoint, WeightedBall, batch_diameter, chordal, chordal_distance,
    chordal_measure_sample, inverse_stereographic, lambda_n, pairwise_chordal, sample_sphere_values,
    sphere_grid, spherical_diameter, stereographic, weighted_ball_contains,
)

coord = st.floats(-1e6, 1e6, allow_nan=False)


def points(dim):
    finite = st.lists(coord, min_size=dim, max_size=dim).map(lambda c: ExtendedPoint(dim, tuple(c)))
    return st.one_of(finite, st.just(ExtendedPoint.inf(dim)))


def radial_lambda(n):
    """Independent oracle: surface area of S^(n-1) times the radial integral."""
    area = 2 * math.pi ** (n / 2) / gamma(n / 2)
    val, _ = quad(lambda r: r ** (n - 1) * (1 + r * r) ** (-n), 0, np.inf, epsabs=0, epsrel=1e-13)
    return area * val


class TestChordal:
    def test_exact_values(self):
        assert chordal_distance(ExtendedPoint.of(0, 0), ExtendedPoint.inf(2)) == 1.0
        assert chordal_distance(ExtendedPoint.of(1, 0), ExtendedPoint.of(-1, 0)) == 1.0
        assert chordal_distance(ExtendedPoint.inf(3), ExtendedPoint.inf(3)) == 0.0

    def test_finite_pair_against_formula(self):
        a, b = ExtendedPoint.of(1, 2), ExtendedPoint.of(-3, 0.5)
        expect = math.hypot(4, 1.5) / math.sqrt((1 + 5) * (1 + 9.25))
        assert chordal_distance(a, b) == pytest.approx(expect, rel=1e-15)

    def test_complex_constructor(self):
        assert ExtendedPoint.of(2 + 3j) == ExtendedPoint.of(2, 3)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            chordal_distance(ExtendedPoint.of(1, 0), ExtendedPoint.of(1, 0, 0))

    def test_nonfinite_coordinates_rejected(self):
        with pytest.raises(ValueError):
            ExtendedPoint(2, (np.inf, 0.0))

    def test_huge_coordinates_do_not_overflow(self):
        a, b = ExtendedPoint.of(1e300, 0), ExtendedPoint.of(-1e300, 0)
        assert chordal_distance(a, ExtendedPoint.inf(2)) == pytest.approx(1e-300, rel=1e-12)
        assert chordal_distance(a, b) <= 1.0

    @given(points(2), points(2))
    def test_symmetric_and_bounded(self, a, b):
        d = chordal_distance(a, b)
        assert 0.0 <= d <= 1.0
        assert d == chordal_distance(b, a)

    @given(points(3), points(3), points(3))
    def test_triangle_inequality(self, a, b, c):
        assert chordal_distance(a, c) <= chordal_distance(a, b) + chordal_distance(b, c) + 1e-12

    @given(points(2))
    def test_identity_of_indiscernibles(self, a):
        assert chordal_distance(a, a) == 0.0

    def test_matches_sphere_embedding(self):
        # q is half the Euclidean distance between stereographic images on the unit sphere
        rng = np.random.default_rng(3)
        V = rng.standard_normal((500, 3)) * 10.0 ** rng.uniform(-3, 3, (500, 1))
        inf = rng.random(500) < 0.05
        E = stereographic(V, inf)
        q = chordal(V[:-1], inf[:-1], V[1:], inf[1:])
        np.testing.assert_allclose(q, np.linalg.norm(E[:-1] - E[1:], axis=1) / 2, atol=1e-14)

    def test_diameters(self):
        pts = [ExtendedPoint.of(0, 0), ExtendedPoint.inf(2), ExtendedPoint.of(1, 0)]
        assert spherical_diameter(pts) == 1.0
        vals = np.array([[[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]])
        inf = np.array([[False, False], [False, True]])
        np.testing.assert_allclose(batch_diameter(vals, inf), [1 / math.sqrt(2), 1.0])
        assert np.all(np.diag(pairwise_chordal(vals[0], inf[0])) == 0)


class TestWeightedBall:
    def test_radius_scaling(self):
        b = WeightedBall((10.0, 0.0), 0.5, p=3)
        assert b.euclidean_radius == pytest.approx(0.05)
        assert WeightedBall((10.0, 0.0), 0.5, p=2).euclidean_radius == 0.5
        assert weighted_ball_contains(b, ExtendedPoint.of(10.04, 0))
        assert not weighted_ball_contains(b, ExtendedPoint.of(10.06, 0))

    def test_rejects_zero_centre_and_infinity(self):
        with pytest.raises(ValueError):
            WeightedBall((0.0, 0.0), 1.0)
        with pytest.raises(ValueError):
            weighted_ball_contains(WeightedBall((1.0, 0.0), 1.0), ExtendedPoint.inf(2))


class TestSampling:
    @pytest.mark.parametrize("n", [2, 3, 4, 7])
    def test_lambda_against_radial_quadrature(self, n):
        assert lambda_n(n) == pytest.approx(radial_lambda(n), rel=1e-10)

    def test_lambda_closed_values(self):
        assert lambda_n(2) == pytest.approx(math.pi, rel=1e-14)
        assert lambda_n(3) == pytest.approx(math.pi**2 / 4, rel=1e-14)
        with pytest.raises(ValueError):
            lambda_n(1)

    @pytest.mark.parametrize("dim", [2, 3])
    def test_grid_is_deterministic_and_spread(self, dim):
        v1, i1 = sphere_grid(400, seed=5, dim=dim)
        v2, i2 = sphere_grid(400, seed=5, dim=dim)
        np.testing.assert_array_equal(v1, v2)
        E = stereographic(v1, i1)
        np.testing.assert_allclose(np.linalg.norm(E, axis=1), 1.0, atol=1e-12)
        # roughly uniform: the mean of the embedding is near the origin
        assert np.linalg.norm(E.mean(axis=0)) < 0.05
        assert len(sample_sphere_values(10, 0, dim)) == 10

    def test_stereographic_round_trip(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((100, 4))
        X /= np.linalg.norm(X, axis=1, keepdims=True)
        v, inf = inverse_stereographic(X)
        np.testing.assert_allclose(stereographic(v, inf), X, atol=1e-12)

    @pytest.mark.parametrize("n", [2, 3])
    def test_chordal_measure_radial_law(self, n):
        # P(|y| < 1) = 1/2 by the symmetry y -> y/|y|^2 of the chordal measure
        rng = np.random.default_rng(11)
        y = chordal_measure_sample(200_000, rng, n)
        frac = np.mean(np.linalg.norm(y, axis=1) < 1.0)
        assert frac == pytest.approx(0.5, abs=0.005)
        # P(|y| < t) for n=2 is t^2/(1+t^2)
        if n == 2:
            assert np.mean(np.linalg.norm(y, axis=1) < 2.0) == pytest.approx(0.8, abs=0.005)
