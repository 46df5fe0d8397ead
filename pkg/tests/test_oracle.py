import numpy as np
import pytest

from magging.aggregate import magging
from magging.estimators import EstimatorSpec, fit_ensemble
from magging.groups import known_groups
from magging.linalg import gram, sigma_norm_sq
from magging.oracle import (
    BoundCertificate,
    SupportSpec,
    error_bound_certificate,
    explained_variance,
    maximin_point,
    maximin_point_grid,
    robustness_delta,
)

from helpers import random_psd, vertex_optimum_support, zero_in_hull_support


def replicated_design_problem(seed=0, G=3, m=40, p=4, noise_sd=0.0):
    """Clusterwise data on one shared design block, so every group's Gram
    matrix equals the recorded covariance bit for bit."""
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((m, p))
    b = rng.standard_normal((G, p))
    X = np.tile(D, (G, 1))
    Y = np.concatenate([D @ b[g] for g in range(G)])
    if noise_sd > 0:
        Y = Y + noise_sd * rng.standard_normal(G * m)
    grouping = known_groups(np.repeat(np.arange(G), m))
    sigma = gram(D, scale_by_n=True)
    return X, Y, grouping, b, sigma


class TestExplainedVariance:
    def test_zero_predictor(self):
        assert explained_variance(np.zeros(2), np.ones(2), np.eye(2)) == 0.0

    def test_perfect_match(self):
        S = np.array([[2.0, 0.5], [0.5, 1.0]])
        b = np.array([1.0, -1.0])
        assert explained_variance(b, b, S) == pytest.approx(
            sigma_norm_sq(b, S), abs=1e-14
        )

    def test_hand_value(self):
        beta = np.array([1.0, 0.0])
        b = np.array([0.0, 1.0])
        assert explained_variance(beta, b, np.eye(2)) == -1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            explained_variance(np.ones(2), np.ones(3), np.eye(2))


class TestMaximinPoint:
    def test_zero_in_support(self):
        spec = SupportSpec(
            points=np.array([[1.0, 2.0], [0.0, 0.0], [-3.0, 1.0]]),
            sigma=np.eye(2),
        )
        assert np.max(np.abs(maximin_point(spec))) <= 1e-5

    def test_singleton_support(self):
        spec = SupportSpec(points=np.array([[2.0, -1.0]]), sigma=np.eye(2))
        assert np.array_equal(maximin_point(spec), [2.0, -1.0])

    def test_two_point_hand_solution(self):
        spec = SupportSpec(
            points=np.array([[1.0, 1.0], [1.0, -1.0]]), sigma=np.eye(2)
        )
        assert np.allclose(maximin_point(spec), [1.0, 0.0], atol=1e-8)

    def test_weights_certify_hull_membership(self):
        rng = np.random.default_rng(1)
        spec = SupportSpec(points=rng.standard_normal((5, 3)) + 2.0,
                           sigma=random_psd(rng, 3, jitter=0.3))
        point, sol = maximin_point(spec, return_weights=True)
        assert sol.w.min() >= 0.0
        assert abs(sol.w.sum() - 1.0) <= 1e-10
        assert np.allclose(point, sol.w @ spec.points, atol=1e-12)

    def test_optimality_vs_support_points(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            spec = SupportSpec(points=rng.standard_normal((4, 2)) * 2.0,
                               sigma=random_psd(rng, 2, jitter=0.1))
            point = maximin_point(spec)
            val = sigma_norm_sq(point, spec.sigma)
            for b in spec.points:
                assert val <= sigma_norm_sq(b, spec.sigma) + 1e-8


class TestMaximinGrid:
    def test_singleton_recovers_point(self):
        spec = SupportSpec(points=np.array([[0.42, -0.17]]), sigma=np.eye(2))
        out = maximin_point_grid(spec, grid_step=0.01)
        assert np.max(np.abs(out - spec.points[0])) <= 0.01

    def test_matches_two_point_solution(self):
        spec = SupportSpec(
            points=np.array([[1.0, 1.0], [1.0, -1.0]]), sigma=np.eye(2)
        )
        out = maximin_point_grid(spec, grid_step=0.01)
        assert np.max(np.abs(out - [1.0, 0.0])) <= 0.011

    def test_zero_in_support(self):
        spec = SupportSpec(
            points=np.array([[0.0, 0.0], [1.0, 0.3]]), sigma=np.eye(2)
        )
        out = maximin_point_grid(spec, grid_step=0.01)
        assert np.max(np.abs(out)) <= 0.011

    def test_agrees_with_hull_solver(self):
        # Instances built so the 0.01 grid identifies the argmin: either a
        # strict vertex optimum or a cone optimum at the origin.  Edge
        # interior optima have a near-flat valley along which the grid
        # argmin may legitimately drift by several steps.
        rng = np.random.default_rng(3)
        for trial in range(10):
            points, sigma = (
                vertex_optimum_support(rng) if trial % 2 == 0
                else zero_in_hull_support(rng)
            )
            spec = SupportSpec(points=points, sigma=sigma)
            qp = maximin_point(spec)
            grid = maximin_point_grid(spec, grid_step=0.01)
            assert np.max(np.abs(qp - grid)) <= 0.02

    def test_dimension_cap(self):
        spec = SupportSpec(points=np.ones((2, 4)), sigma=np.eye(4))
        with pytest.raises(ValueError):
            maximin_point_grid(spec)

    def test_small_radius_flagged(self):
        spec = SupportSpec(points=np.array([[2.0, 0.0]]), sigma=np.eye(2))
        with pytest.warns(UserWarning, match="radius"):
            maximin_point_grid(spec, grid_step=0.05, radius=1.0)

    def test_three_dimensional(self):
        spec = SupportSpec(
            points=np.array([[1.0, 1.0, 0.5], [1.0, -1.0, 0.5]]),
            sigma=np.eye(3),
        )
        out = maximin_point_grid(spec, grid_step=0.05)
        assert np.max(np.abs(out - [1.0, 0.0, 0.5])) <= 0.051


class TestRobustnessDelta:
    def test_point_inside_hull_changes_nothing(self):
        spec = SupportSpec(
            points=np.array([[1.0, 1.0], [1.0, -1.0], [3.0, 0.0]]),
            sigma=np.eye(2),
        )
        old, new = robustness_delta(spec, np.array([1.5, 0.0]))
        assert np.max(np.abs(old - new)) <= 1e-6

    def test_half_space_case_preserves_maximin(self):
        # Additions with <b_new, S b*> >= ||b*||_S^2 leave the optimum alone
        # no matter how far out they sit.
        spec = SupportSpec(
            points=np.array([[1.0, 1.0], [1.0, -1.0], [2.0, 0.5]]),
            sigma=np.eye(2),
        )
        old, new = robustness_delta(spec, np.array([50.0, 70.0]))
        assert np.allclose(old, [1.0, 0.0], atol=1e-6)
        assert np.max(np.abs(old - new)) <= 1e-6

    def test_zero_joins_the_hull(self):
        spec = SupportSpec(
            points=np.array([[1.0, 1.0], [1.0, -1.0]]), sigma=np.eye(2)
        )
        old, new = robustness_delta(spec, np.zeros(2))
        assert np.allclose(old, [1.0, 0.0], atol=1e-6)
        assert np.max(np.abs(new)) <= 1e-5

    def test_norm_never_increases_over_random_growth(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            sigma = random_psd(rng, 2, jitter=0.3)
            spec = SupportSpec(
                points=rng.uniform(0.5, 2.5, size=(3, 2)), sigma=sigma
            )
            norms = [np.sqrt(sigma_norm_sq(maximin_point(spec), sigma))]
            for _ in range(5):
                new_point = rng.uniform(0.5, 2.5, size=2)
                _, after = robustness_delta(spec, new_point)
                spec = spec.extended(new_point)
                norms.append(np.sqrt(sigma_norm_sq(after, sigma)))
            diffs = np.diff(norms)
            assert (diffs <= 1e-8).all()


class TestErrorBoundCertificate:
    def test_noiseless_limit_is_exact(self):
        X, Y, grouping, b, sigma = replicated_design_problem(5)
        ens = fit_ensemble(X, Y, grouping, EstimatorSpec.ols())
        result = magging(ens, tol=1e-12)
        spec = SupportSpec(points=b, sigma=sigma)
        cert = error_bound_certificate(ens, spec, result, tol=1e-12)
        assert cert.gram_deviation == 0.0
        assert cert.estimation_error <= 1e-10
        assert cert.aggregate_error <= 1e-10
        assert cert.holds

    def test_noisy_certificate_holds(self):
        X, Y, grouping, b, sigma = replicated_design_problem(6, noise_sd=1.0)
        ens = fit_ensemble(X, Y, grouping, EstimatorSpec.ols())
        result = magging(ens)
        cert = error_bound_certificate(
            ens, SupportSpec(points=b, sigma=sigma), result
        )
        assert cert.holds
        assert cert.bound >= cert.aggregate_error
        assert cert.min_group_size == 40

    def test_corruption_grows_the_certificate(self):
        X, Y, grouping, b, sigma = replicated_design_problem(7, noise_sd=0.5)
        ens = fit_ensemble(X, Y, grouping, EstimatorSpec.ols())
        result = magging(ens)
        spec = SupportSpec(points=b, sigma=sigma)
        clean = error_bound_certificate(ens, spec, result)
        ens.thetas[0] += 5.0  # adversarial corruption, eta1 must absorb it
        ens.fitted = ens.thetas @ X.T
        corrupted = error_bound_certificate(ens, spec, magging(ens))
        assert corrupted.estimation_error > clean.estimation_error
        assert corrupted.holds

    def test_group_count_mismatch(self):
        X, Y, grouping, b, sigma = replicated_design_problem(8)
        ens = fit_ensemble(X, Y, grouping, EstimatorSpec.ols())
        with pytest.raises(ValueError):
            error_bound_certificate(
                ens, SupportSpec(points=b[:2], sigma=sigma), magging(ens)
            )

    def test_json_fields(self):
        cert = BoundCertificate(
            estimation_error=0.1, gram_deviation=0.2, l1_bound=3.0,
            aggregate_error=0.05, bound=8.0, holds=True, min_group_size=10,
        )
        d = cert.to_json_dict()
        assert set(d) == {
            "estimation_error", "gram_deviation", "l1_bound",
            "aggregate_error", "bound", "holds", "min_group_size",
        }


class TestSupportSpec:
    def test_needs_matching_dimensions(self):
        with pytest.raises(ValueError):
            SupportSpec(points=np.ones((2, 3)), sigma=np.eye(2))

    def test_rejects_nonfinite_points(self):
        with pytest.raises(ValueError):
            SupportSpec(points=np.array([[np.nan, 1.0]]), sigma=np.eye(2))

    def test_extended_appends(self):
        spec = SupportSpec(points=np.ones((1, 2)), sigma=np.eye(2))
        grown = spec.extended(np.array([2.0, 3.0]))
        assert grown.k == 2
        assert np.array_equal(grown.points[1], [2.0, 3.0])
