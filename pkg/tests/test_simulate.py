import math

import numpy as np
import pytest
from scipy import integrate, stats

from ppclass.core import InvariantError, Window
from ppclass.simulate import (
    IntensitySpec,
    StraussSpec,
    pair_count,
    sample_poisson,
    sample_strauss,
    scenario_intensity,
)

TEN = Window.square(0.0, 10.0)


def bump(points):
    return 500 * np.exp(-20 * ((points[:, 0] - 0.5) ** 2 + (points[:, 1] - 0.5) ** 2))


class TestPoissonSampler:
    def test_zero_intensity_is_empty(self, unit):
        spec = IntensitySpec.constant(0.0, unit)
        assert all(sample_poisson(spec, s).count == 0 for s in range(20))

    def test_homogeneous_count_mean(self, unit):
        spec = IntensitySpec.constant(50.0, unit)
        counts = [sample_poisson(spec, s).count for s in range(2000)]
        assert abs(np.mean(counts) - 50.0) <= 1.0

    def test_inhomogeneous_count_mean_matches_quadrature(self, unit):
        mu, _ = integrate.dblquad(
            lambda y, x: 500 * math.exp(-20 * ((x - 0.5) ** 2 + (y - 0.5) ** 2)), 0, 1, 0, 1
        )
        spec = IntensitySpec.from_function(bump, unit)
        counts = [sample_poisson(spec, s).count for s in range(2000)]
        assert abs(np.mean(counts) - mu) <= 0.03 * mu
        assert spec.mass() == pytest.approx(mu, rel=1e-4)

    def test_chi_square_uniformity(self, unit):
        pts = sample_poisson(IntensitySpec.constant(5000.0, unit), 7).points
        cells = np.minimum((pts * 4).astype(int), 3)
        observed = np.bincount(cells[:, 0] * 4 + cells[:, 1], minlength=16)
        _, p = stats.chisquare(observed)
        assert pts.shape[0] > 4500
        assert p > 0.001

    def test_disjoint_counts_uncorrelated(self, unit):
        spec = IntensitySpec.constant(40.0, unit)
        left, right = [], []
        for s in range(2000):
            x = sample_poisson(spec, s).points[:, 0]
            left.append(np.sum(x < 0.5))
            right.append(np.sum(x >= 0.5))
        assert abs(np.corrcoef(left, right)[0, 1]) <= 0.07

    def test_deterministic(self, unit):
        spec = IntensitySpec.from_function(bump, unit)
        assert sample_poisson(spec, 11) == sample_poisson(spec, 11)
        assert sample_poisson(spec, 11) != sample_poisson(spec, 12)

    def test_understated_bound_is_detected(self, unit):
        with pytest.raises(InvariantError):
            sample_poisson(IntensitySpec(bump, unit, 10.0), 0)

    def test_negative_bound_rejected(self, unit):
        with pytest.raises(ValueError):
            IntensitySpec(bump, unit, -1.0)

    def test_from_function_rejects_negative(self, unit):
        with pytest.raises(ValueError):
            IntensitySpec.from_function(lambda p: p[:, 0] - 0.5, unit)


class TestStraussSampler:
    def test_gamma_one_is_poisson(self):
        spec = StraussSpec(0.5, 1.0, 0.3, TEN)
        counts = [sample_strauss(spec, s).count for s in range(500)]
        assert abs(np.mean(counts) - 50.0) <= 0.05 * 50.0

    def test_gamma_one_matches_poisson_sampler(self, unit):
        spec = StraussSpec(100.0, 1.0, 0.05, unit, mcmc_steps=5000)
        strauss = np.mean([sample_strauss(spec, s).count for s in range(500)])
        poisson = np.mean([sample_poisson(IntensitySpec.constant(100.0, unit), s).count for s in range(500)])
        assert abs(strauss - 100.0) <= 5.0
        assert abs(strauss - poisson) <= 5.0

    def test_georgii_nguyen_zessin_identity(self):
        # E sum_x h(x, X - x) = beta E int h(u, X) gamma**t(u, X) du with h = 1 and h = t
        from scipy.spatial import cKDTree

        spec = StraussSpec(1.5, 0.5, 0.6, TEN)
        g = np.linspace(0.05, 9.95, 100)
        nodes = np.array(np.meshgrid(g, g)).reshape(2, -1).T
        lhs, rhs = [], []
        for s in range(200):
            x = sample_strauss(spec, s)
            t = np.array([len(v) for v in cKDTree(x.points).query_ball_point(nodes, 0.6)])
            lhs.append((x.count, 2 * pair_count(x, 0.6)))
            papangelou = 1.5 * 0.5 ** t * 100 / nodes.shape[0]
            rhs.append((papangelou.sum(), (t * papangelou).sum()))
        diff = np.array(lhs) - np.array(rhs)
        se = diff.std(axis=0, ddof=1) / np.sqrt(len(diff))
        assert np.all(np.abs(diff.mean(axis=0)) <= 4 * se)
        assert abs(np.mean(lhs, axis=0)[0] - 90) <= 3

    def test_repulsion_lowers_pair_count(self):
        rep = StraussSpec(1.5, 0.5, 0.6, TEN)
        free = StraussSpec(1.5, 1.0, 0.6, TEN)
        s_rep = np.mean([pair_count(sample_strauss(rep, s), 0.6) for s in range(100)])
        s_free = np.mean([pair_count(sample_strauss(free, s), 0.6) for s in range(100)])
        assert s_rep < s_free

    def test_hard_core_has_no_close_pairs(self, unit):
        spec = StraussSpec(200.0, 0.0, 0.05, unit, mcmc_steps=20000)
        assert pair_count(sample_strauss(spec, 3), 0.05) == 0

    def test_deterministic(self):
        spec = StraussSpec(1.5, 0.5, 0.6, TEN, mcmc_steps=2000, rng_seed=5)
        assert sample_strauss(spec) == sample_strauss(spec)
        assert sample_strauss(spec) == sample_strauss(spec, 5)
        assert sample_strauss(spec, 6) != sample_strauss(spec, 5)

    @pytest.mark.parametrize(
        "kwargs", [dict(beta=0.0), dict(gamma=1.5), dict(gamma=-0.1), dict(r=0.0), dict(mcmc_steps=0)]
    )
    def test_validation(self, kwargs):
        base = dict(beta=1.0, gamma=0.5, r=0.3, window=TEN)
        with pytest.raises(ValueError):
            StraussSpec(**{**base, **kwargs})


class TestScenarioIntensities:
    def test_smooth_peak(self):
        assert scenario_intensity("smooth0", [500])([0.5, 0.5])[0] == 500.0

    def test_smooth1_parameters(self):
        lam = scenario_intensity("smooth1", [700, 10])
        assert lam([0.5, 0.5])[0] == 700.0
        assert lam([0.0, 0.5])[0] == pytest.approx(700 * math.exp(-2.5))

    def test_wiggly_limit_on_axes(self):
        lam = scenario_intensity("wiggly0")
        pts = np.array([[0.0, 0.3], [0.6, 0.0], [0.0, 0.0]])
        np.testing.assert_array_equal(lam(pts), 80.0)
        near = np.array([[1e-9, 0.5]])
        assert abs(lam(near)[0] - 80.0) <= 80 * 0.5e-9

    def test_wiggly_formula(self):
        x, y = 0.7, 0.9
        assert scenario_intensity("wiggly0")([x, y])[0] == pytest.approx(80 + 80 * x * y * math.sin(1 / (x * y)))
        assert scenario_intensity("wiggly1", [40])([x, y])[0] == pytest.approx(40 + 30 * x * y * math.sin(1 / (x * y)))

    def test_wiggly_nonnegative_on_grid(self):
        for c2 in (30, 60, 100):
            lam = scenario_intensity("wiggly1", [c2])
            nodes, _ = lam.window.grid(200)
            assert np.all(lam(nodes) >= 0)

    def test_wiggly1_needs_c2_at_least_30(self):
        with pytest.raises(ValueError):
            scenario_intensity("wiggly1", [20])

    def test_shifted_same_height(self):
        a = scenario_intensity("shifted0")([-0.25, 0.0])[0]
        b = scenario_intensity("shifted1")([0.0, 0.25])[0]
        assert a == b == 300.0

    def test_shifted_equal_expected_counts(self):
        a, b = scenario_intensity("shifted0"), scenario_intensity("shifted1")
        assert a.mass() == pytest.approx(b.mass(), rel=1e-6)

    def test_unknown_name(self):
        with pytest.raises(ValueError, match="unknown scenario"):
            scenario_intensity("bumpy")

    def test_wrong_parameter_count(self):
        with pytest.raises(ValueError, match="parameters"):
            scenario_intensity("smooth1", [500])

    @pytest.mark.parametrize("name", ["smooth0", "smooth1", "wiggly0", "wiggly1", "shifted0", "shifted1"])
    def test_bound_holds_on_fine_grid(self, name):
        lam = scenario_intensity(name)
        nodes, _ = lam.window.grid(301)
        assert np.all(lam(nodes) <= lam.sup_bound)
