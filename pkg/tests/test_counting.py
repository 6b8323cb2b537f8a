import math

import numpy as np
import pytest
from scipy.integrate import quad

from qrlab.argument import BoundaryMarginError
from qrlab.counting import (
    AfrCurve, afr_curve, afr_domain, afr_local, afr_sphere, count_apoints, dyadic_radii, growth_fit,
    min_oscillation, multiplicity_sum, multiplicity_sweep, oscillation_profile,
)
from qrlab.zoo import make_zoo_map


def exp_afr_oracle(r):
    """Independent oracle for the exponential: the spherical density is sech(x)^2 / 4,
    so A(r) = (1 / 4 pi) * integral over |x| < r of sech(x)^2 * 2 sqrt(r^2 - x^2)."""
    val, _ = quad(lambda x: 2 * math.sqrt(r * r - x * x) / math.cosh(x) ** 2, -r, r,
                  epsabs=0, epsrel=1e-12, limit=200)
    return val / (4 * math.pi)


def disk_grid(lo, hi, step):
    t = np.arange(lo, hi + step / 2, step)
    return np.stack(np.meshgrid(t, t), -1).reshape(-1, 2)


class TestCounting:
    def test_exponential(self, expo):
        assert count_apoints(expo, [0, 0], 10.0, 1.0).count == 3
        assert count_apoints(expo, [0, 0], 10.0, 1.0, method="argument").count == 3
        assert count_apoints(expo, [0, 0], 50.0, 0.0).count == 0
        assert count_apoints(expo, [0, 0], 50.0, None).count == 0

    def test_multiplicities(self, wp):
        assert count_apoints(make_zoo_map("power"), [0, 0], 1.0, 0.0).count == 2
        assert multiplicity_sum(make_zoo_map({"kind": "power", "k": 5}), 0.0, [0.1, 0.0], 0.5) == 5
        # a double pole at every lattice point
        assert count_apoints(wp, [0, 0], 0.1, None).count == 2
        # lattice points 0, +-2, +-2i lie inside radius 2.5; 2 + 2i does not
        assert count_apoints(wp, [0, 0], 2.5, None).count == 2 * 5

    @pytest.mark.parametrize("kind", ["exponential", "rational5", "elliptic", "sine"])
    def test_argument_matches_analytic(self, kind, rational5):
        f = rational5 if kind == "rational5" else make_zoo_map(kind)
        rng = np.random.default_rng(1)
        done = 0
        while done < 100:
            a = complex(*rng.standard_normal(2) * 2)
            c = rng.uniform(-3, 3, 2)
            r = rng.uniform(0.2, 6.0)
            try:
                n_arg = count_apoints(f, c, r, a, method="argument").count
            except BoundaryMarginError:
                continue
            assert n_arg == count_apoints(f, c, r, a, method="analytic").count
            done += 1

    def test_errors(self, expo, const):
        with pytest.raises(ValueError):
            count_apoints(expo, [0, 0], 0.0, 1.0)
        with pytest.raises(ValueError):
            count_apoints(expo, [0, 0], 1.0, 1.0, method="guess")
        with pytest.raises(ValueError):
            count_apoints(const, [0, 0], 1.0, 0.0)
        assert count_apoints(const, [0, 0], 1.0, 1.0).count == 0


class TestAverageCounting:
    def test_oracle_limits(self):
        # A(r) ~ r / pi for large r
        assert exp_afr_oracle(40.0) == pytest.approx(40 / math.pi, rel=1e-3)

    @pytest.mark.parametrize("r", [5.0, 10.0])
    def test_exponential_both_routes(self, expo, r):
        ref = exp_afr_oracle(r)
        s = afr_sphere(expo, r, samples=100_000, seed=0)
        assert abs(s.value - ref) < 4 * s.stderr + 1e-3
        d = afr_domain(expo, r, samples=100_000, seed=0)
        assert d.value == pytest.approx(ref, rel=1e-3)

    def test_identity(self, ident):
        # the disk of radius r covers r^2 / (1 + r^2) of the sphere
        assert afr_domain(ident, 3.0).value == pytest.approx(0.9, rel=1e-3)
        s = afr_sphere(ident, 1.0, samples=50_000, seed=3)
        assert abs(s.value - 0.5) < 4 * s.stderr
        assert afr_domain(ident, 10.0).value == pytest.approx(100 / 101, rel=0.02)

    def test_elliptic_routes_agree(self, wp):
        s = afr_sphere(wp, 5.0, samples=50_000)
        d = afr_domain(wp, 5.0)
        assert abs(s.value - d.value) < 4 * s.stderr + 4 * d.stderr + 0.05
        # degree 2 per cell of area 4
        assert d.value == pytest.approx(math.pi * 25 / 2, rel=0.02)

    def test_local_periodicity_and_decay(self, expo, wp):
        a = afr_local(expo, [0.5, 0.2], 1.0)
        b = afr_local(expo, [0.5, 0.2 + 2 * math.pi], 1.0)
        assert a.value == pytest.approx(b.value, rel=1e-9)
        assert afr_local(wp, [0.3, 0.1], 1.0).value == pytest.approx(afr_local(wp, [2.3, 2.1], 1.0).value,
                                                                    rel=1e-9)
        # far to the right e^z is nearly infinite, so the spherical area collapses
        assert afr_local(expo, [30.0, 0.0], 1.0).value < 1e-20

    def test_sphere_curve_is_monotone_and_reproducible(self, expo):
        radii = dyadic_radii(1.0, 5)
        c1 = afr_curve(expo, radii, samples=20_000, seed=4)
        c2 = afr_curve(expo, radii[::-1], samples=20_000, seed=4)
        assert np.all(np.diff(c1.values) >= 0)
        np.testing.assert_array_equal(c1.values, c2.values)
        with pytest.raises(ValueError):
            afr_curve(expo, radii, method="both")

    def test_missing_jacobian(self):
        f = make_zoo_map("zorich")
        with pytest.raises(ValueError):
            afr_domain(f, 1.0)


class TestGrowthFit:
    def test_exact_power_law(self):
        r = dyadic_radii(1.0, 8)
        fit = growth_fit(AfrCurve(r, 3.0 * r**1.5, np.zeros(8), "synthetic", 0, 0))
        assert fit.exponent == pytest.approx(1.5) and fit.prefactor == pytest.approx(3.0)
        assert fit.used == 4 and fit.residual < 1e-12

    def test_preconditions(self):
        r = dyadic_radii(5.0, 4)
        with pytest.raises(ValueError):
            growth_fit(AfrCurve(r, r, np.zeros(4), "synthetic", 0, 0))
        r = np.linspace(1.0, 4.0, 8)
        with pytest.raises(ValueError):
            growth_fit(AfrCurve(r, r, np.zeros(8), "synthetic", 0, 0))
        r = dyadic_radii(1.0, 8)
        with pytest.raises(ValueError):
            growth_fit(AfrCurve(r, np.zeros(8), np.zeros(8), "synthetic", 0, 0))

    def test_exponential_order_one(self, expo):
        curve = afr_curve(expo, dyadic_radii(2.5, 5), samples=50_000)
        fit = growth_fit(curve)
        assert fit.exponent == pytest.approx(1.0, abs=0.05)
        assert curve.fit["exponent"] == fit.exponent


class TestOscillation:
    def test_exponential_small_radii(self, expo):
        # the spherical derivative of e^z peaks at 1/2 on the imaginary axis
        radii = [0.025, 0.05, 0.1]
        prof = oscillation_profile(expo, radii, disk_grid(-2, 2, 0.25))
        np.testing.assert_allclose(prof, radii, rtol=0.01)

    def test_profile_rows_are_nested(self, wp):
        prof = oscillation_profile(wp, [0.1, 0.2, 0.4, 0.8], disk_grid(-1, 1, 0.5))
        assert np.all(np.diff(prof) >= 0)

    def test_exp_square_on_the_diagonal(self, exp_sq):
        t = np.linspace(10, 20, 41)[:, None] * np.array([[1, 1]]) / math.sqrt(2)
        assert oscillation_profile(exp_sq, [0.1], t)[0] > 0.9
        # on the real axis the map is nearly constant at infinity
        axis = np.column_stack([np.linspace(10, 20, 41), np.zeros(41)])
        assert oscillation_profile(exp_sq, [0.1], axis)[0] < 0.5

    def test_elliptic_minimum_over_plane(self, wp):
        # a disk of radius 2 sqrt(2) covers a full period cell wherever it sits
        v, loc = min_oscillation(wp, 2 * math.sqrt(2), disk_grid(-6, 6, 1.0))
        assert v > 0.99 and loc.shape == (2,)
        with pytest.raises(ValueError):
            min_oscillation(wp, 1.0, np.zeros((0, 2)))


class TestMultiplicitySweep:
    def test_nested_samples(self, wp):
        small = multiplicity_sweep(wp, 1.0, 50, 10.0, seed=2)
        big = multiplicity_sweep(wp, 1.0, 200, 10.0, seed=2)
        np.testing.assert_array_equal(big.counts[:50], small.counts)
        assert big.max_count >= small.max_count
        assert big.max_count == 2

    def test_without_vectorised_counter(self, rational5):
        sw = multiplicity_sweep(rational5, 0.5, 20, 2.0, seed=0)
        assert sw.counts.max() <= 5 and sw.max_count == sw.counts.max()
