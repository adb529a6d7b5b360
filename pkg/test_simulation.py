"""
Tests for the Monte Carlo engine: data generation, LAD and the experiments.
"""

import unittest

import numpy as np
from sklearn.linear_model import QuantileRegressor

from incidental_regression import (
    Dataset, ExperimentConfig, Method, MuMechanism, coverage_experiment, gen_dataset,
    gen_incidental, lad_fit, qq_experiment, rmse_experiment, selection_experiment,
)
from incidental_regression.data_models import PenaltyKind
from incidental_regression.simulation import (
    frozen_incidental, lad_objective, matched_incidental, replicate_rng,
)

SMALL_GRIDS = {'hard': [1.0, 2.0, 3.0], 'soft': [0.5, 2.0]}


def small_config(**overrides):
    settings = dict(n=60, reps=4, seed=3, lambda_grid=SMALL_GRIDS)
    settings.update(overrides)
    return ExperimentConfig(**settings)


class TestIncidentalMechanism(unittest.TestCase):
    """Test the three-branch mixture."""

    def test_all_zero_branch(self):
        mu = gen_incidental(MuMechanism(p0=1.0, p1=0.0, p2=0.0), 500, np.random.default_rng(0))
        np.testing.assert_array_equal(mu, np.zeros(500))

    def test_uniform_branch_with_zero_width(self):
        mechanism = MuMechanism(p0=0.0, p1=0.0, p2=1.0, c=0.0)
        mu = gen_incidental(mechanism, 200, np.random.default_rng(1))
        np.testing.assert_array_equal(mu, np.zeros(200))

    def test_large_branch_concentrates_at_c(self):
        mechanism = MuMechanism(p0=0.0, p1=1.0, p2=0.0, c=4.0, p_w=1.0, tau=1e-9)
        mu = gen_incidental(mechanism, 300, np.random.default_rng(2))
        np.testing.assert_allclose(mu, 4.0, atol=1e-6)

    def test_branch_frequencies(self):
        mechanism = MuMechanism(p0=0.8, p1=0.1, p2=0.1, c=3.0, p_w=0.75)
        mu = gen_incidental(mechanism, 100000, np.random.default_rng(3))
        self.assertAlmostEqual(np.mean(mu == 0), 0.8, delta=0.01)
        large = mu[np.abs(mu) > 3.0]
        self.assertAlmostEqual(large.size / mu.size, 0.1, delta=0.01)
        self.assertAlmostEqual(np.mean(large > 0), 0.75, delta=0.02)
        moderate = mu[(mu != 0) & (np.abs(mu) <= 3.0)]
        self.assertAlmostEqual(moderate.size / mu.size, 0.1, delta=0.01)

    def test_invalid_probabilities_rejected(self):
        with self.assertRaises(ValueError):
            MuMechanism(p0=0.5, p1=0.1, p2=0.1)
        with self.assertRaises(ValueError):
            MuMechanism(tau=0.0)

    def test_frozen_draw_is_reproducible(self):
        mechanism = MuMechanism()
        np.testing.assert_array_equal(frozen_incidental(mechanism, 50, 2019),
                                      frozen_incidental(mechanism, 50, 2019))

    def test_matched_draw_minimizes_scale_mismatch(self):
        mechanism = MuMechanism(p0=0.8, p1=0.1, p2=0.1, c=3.0, p_w=0.75)
        scores = []
        for seed in range(40):
            mu = frozen_incidental(mechanism, 100, seed)
            scores.append(abs(np.mean(mu ** 2) / 2.5 - 1.0) + abs(np.count_nonzero(mu) - 20) / 20)
        seed, mu = matched_incidental(mechanism, 100, 2.5, 20, seeds=40)
        self.assertEqual(seed, int(np.argmin(scores)))
        np.testing.assert_array_equal(mu, frozen_incidental(mechanism, 100, seed))

    def test_matched_draw_rejects_bad_targets(self):
        with self.assertRaises(ValueError):
            matched_incidental(MuMechanism(), 50, 0.0, 10)
        with self.assertRaises(ValueError):
            matched_incidental(MuMechanism(), 50, 1.0, 10, seeds=0)


class TestDatasetGeneration(unittest.TestCase):
    """Test replicate datasets."""

    def test_noiseless_clean_data_is_exactly_linear(self):
        config = small_config(sigma=0.0, mu=MuMechanism(p0=1.0, p1=0.0, p2=0.0))
        data, mu_true = gen_dataset(config, 0)
        np.testing.assert_array_equal(mu_true, np.zeros(config.n))
        np.testing.assert_allclose(data.Y, data.X @ config.beta_star, atol=1e-12)

    def test_zero_covariance_gives_zero_design(self):
        config = small_config(x_cov=np.zeros((2, 2)))
        data, mu_true = gen_dataset(config, 1)
        np.testing.assert_array_equal(data.X, np.zeros((config.n, 2)))

    def test_replicates_are_reproducible_and_distinct(self):
        config = small_config()
        first, mu_first = gen_dataset(config, 3)
        again, mu_again = gen_dataset(config, 3)
        other, _ = gen_dataset(config, 4)
        np.testing.assert_array_equal(first.Y, again.Y)
        np.testing.assert_array_equal(mu_first, mu_again)
        self.assertFalse(np.array_equal(first.Y, other.Y))

    def test_replicate_streams_are_independent_of_order(self):
        late = replicate_rng(7, 5).random(3)
        replicate_rng(7, 0).random(100)
        np.testing.assert_array_equal(replicate_rng(7, 5).random(3), late)

    def test_fixed_incidental_parameters(self):
        mu_fixed = np.zeros(60)
        mu_fixed[[4, 9]] = [8.0, -8.0]
        config = small_config(mu_fixed=mu_fixed)
        for rep in range(3):
            _, mu_true = gen_dataset(config, rep)
            np.testing.assert_array_equal(mu_true, mu_fixed)

    def test_covariance_is_respected(self):
        x_cov = np.array([[4.0, 1.0], [1.0, 2.0]])
        config = ExperimentConfig(n=20000, x_cov=x_cov, reps=1)
        data, _ = gen_dataset(config, 0)
        np.testing.assert_allclose(np.cov(data.X.T), x_cov, atol=0.15)


class TestLeastAbsoluteDeviation(unittest.TestCase):
    """Test the IRLS LAD baseline."""

    def test_exact_data(self):
        rng = np.random.default_rng(0)
        X = rng.normal(size=(40, 3))
        beta = np.array([1.0, -2.0, 0.5])
        np.testing.assert_allclose(lad_fit(Dataset(X, X @ beta)), beta, atol=1e-8)

    def test_intercept_is_median(self):
        data = Dataset(np.ones((5, 1)), np.array([1.0, 2.0, 3.0, 4.0, 100.0]))
        self.assertAlmostEqual(lad_fit(data)[0], 3.0, delta=1e-3)

    def test_never_worse_than_ols(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            X = rng.normal(size=(80, 2))
            Y = X @ np.ones(2) + rng.standard_t(2, size=80)
            data = Dataset(X, Y)
            ols = np.linalg.lstsq(X, Y, rcond=None)[0]
            self.assertLessEqual(lad_objective(data, lad_fit(data)), lad_objective(data, ols) + 1e-12)

    def test_convergence_flag(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(60, 2))
        beta, converged = lad_fit(Dataset(X, X @ np.ones(2)), full_output=True)
        self.assertTrue(converged)
        np.testing.assert_allclose(beta, np.ones(2), atol=1e-8)

        data = Dataset(X, X @ np.ones(2) + rng.standard_t(1, size=60))
        beta, converged = lad_fit(data, max_iter=1, full_output=True)
        self.assertFalse(converged)
        np.testing.assert_array_equal(beta, lad_fit(data, max_iter=1))

    def test_matches_linear_programming_solution(self):
        rng = np.random.default_rng(2)
        X = rng.normal(size=(150, 2))
        Y = X @ np.array([1.0, 2.0]) + rng.laplace(size=150)
        Y[:10] += 30.0
        data = Dataset(X, Y)
        reference = QuantileRegressor(quantile=0.5, alpha=0.0, fit_intercept=False,
                                      solver='highs').fit(X, Y).coef_
        self.assertLessEqual(lad_objective(data, lad_fit(data)),
                             lad_objective(data, reference) * (1 + 1e-3))


class TestRmseExperiment(unittest.TestCase):
    """Test bias/RMSE tables."""

    def test_rmse_dominates_bias(self):
        config = small_config(methods=('oracle', 'ols', 'hard', 'soft', 'hard_two_step',
                                       'soft_two_step', 'lad'))
        report = rmse_experiment(config)
        self.assertEqual(report.reps, 4)
        for row in report.rows:
            self.assertGreaterEqual(row.rmse + 1e-12, abs(row.bias))
            self.assertEqual(row.reps_used, 4)

    def test_row_layout(self):
        config = small_config(methods=('ols', 'hard', 'soft'))
        report = rmse_experiment(config)
        ols_rows = [row for row in report.rows if row.method == 'OLS']
        self.assertEqual([row.target for row in ols_rows], ['beta_1', 'beta_2', 'beta'])
        self.assertTrue(all(row.lam is None for row in ols_rows))
        self.assertEqual(len([row for row in report.rows if row.method == 'H']), 3 * 3)
        self.assertEqual(len([row for row in report.rows if row.method == 'S']), 2 * 3)

    def test_minimal_rows_take_smallest_curve_rmse(self):
        report = rmse_experiment(small_config(methods=('hard', 'soft')))
        for label in ('H', 'S'):
            full = [row.rmse for row in report.rows if row.method == label and row.target == 'beta']
            chosen = report.minimal[label][-1]
            self.assertEqual(chosen.target, 'beta')
            self.assertEqual(chosen.rmse, min(full))

    def test_noiseless_clean_data_is_recovered(self):
        config = small_config(sigma=0.0, mu=MuMechanism(p0=1.0, p1=0.0, p2=0.0),
                              methods=('oracle', 'ols', 'hard', 'soft', 'hard_two_step',
                                       'soft_two_step', 'lad'))
        report = rmse_experiment(config)
        for row in report.rows:
            self.assertLess(row.rmse, 1e-8)
        self.assertEqual(sum(report.failures.values()), 0)

    def test_failed_replicates_are_counted(self):
        config = small_config(sigma=0.0, mu=MuMechanism(p0=1.0, p1=0.0, p2=0.0),
                              methods=('ols', 'soft_practical'))
        report = rmse_experiment(config)
        self.assertEqual(report.failures['S.P'], 4)
        self.assertEqual(report.failures['OLS'], 0)
        self.assertTrue(all(np.isnan(row.rmse) for row in report.minimal['S.P']))

    def test_lad_iteration_cap_is_counted(self):
        report = rmse_experiment(small_config(methods=('ols', 'lad')))
        self.assertEqual(set(report.nonconverged), {'LAD'})
        self.assertTrue(0 <= report.nonconverged['LAD'] <= 4)
        clean = rmse_experiment(small_config(sigma=0.0, mu=MuMechanism(p0=1.0, p1=0.0, p2=0.0),
                                             methods=('lad',)))
        self.assertEqual(clean.nonconverged, {'LAD': 0})
        self.assertEqual(rmse_experiment(small_config(methods=('ols',))).nonconverged, {})

    def test_singular_design_fails_every_replicate(self):
        report = rmse_experiment(small_config(x_cov=np.zeros((2, 2)), methods=('ols',)))
        self.assertEqual(report.failures['OLS'], 4)

    def test_practical_methods_run(self):
        report = rmse_experiment(small_config(n=120, reps=2, methods=('hard_practical', 'soft_practical')))
        self.assertEqual(report.failures, {'H.P': 0, 'S.P': 0})
        for row in report.rows:
            self.assertTrue(np.isfinite(row.rmse))

    def test_worker_count_does_not_change_results(self):
        config = small_config(methods=('ols', 'soft', 'lad'))
        self.assertEqual(rmse_experiment(config, n_jobs=1).rows, rmse_experiment(config, n_jobs=2).rows)


class TestCoverageExperiment(unittest.TestCase):
    """Test the coverage grid."""

    def setUp(self):
        self.config = ExperimentConfig(n=100, reps=10, seed=5, x_cov=225.0 * np.eye(2),
                                       mu=MuMechanism(c=5.0, p_w=0.75))

    def test_grid_shape_and_accounting(self):
        report = coverage_experiment(self.config, p1_grid=[0.01, 0.05], p2_grid=[0.01])
        self.assertEqual(report.coverage.shape, (1, 2))
        np.testing.assert_array_equal(report.reps_used + report.failures, 10)
        self.assertTrue(np.all((report.coverage >= 0) & (report.coverage <= 1)))
        expected_se = np.sqrt(report.coverage * (1 - report.coverage) / report.reps_used)
        np.testing.assert_allclose(report.mc_se, expected_se)

    def test_cells_share_replicate_streams(self):
        wide = coverage_experiment(self.config, p1_grid=[0.01, 0.05], p2_grid=[0.01, 0.03])
        single = coverage_experiment(self.config, p1_grid=[0.05], p2_grid=[0.03])
        self.assertEqual(single.coverage[0, 0], wide.coverage[1, 1])

    def test_argument_validation(self):
        with self.assertRaises(ValueError):
            coverage_experiment(self.config, alpha=1.5, p1_grid=[0.01], p2_grid=[0.01])
        with self.assertRaises(IndexError):
            coverage_experiment(self.config, component=2, p1_grid=[0.01], p2_grid=[0.01])


class TestQQAndSelection(unittest.TestCase):
    """Test the QQ and partial-selection experiments."""

    def test_qq_samples(self):
        config = ExperimentConfig(n=200, reps=30, seed=11, x_cov=225.0 * np.eye(2),
                                  mu=MuMechanism(p0=0.98, p1=0.01, p2=0.01, c=1.0))
        report = qq_experiment(config, lam=2.0)
        size = 30 - report.failures
        self.assertEqual(report.beta_hat.size, size)
        self.assertEqual(report.beta_tilde.size, size)
        self.assertTrue(np.all(np.diff(report.beta_tilde) >= 0))
        self.assertAlmostEqual(float(np.sum(report.theoretical_hat)), 0.0, places=10)
        for statistic, pvalue in (report.ks_hat, report.ks_tilde):
            self.assertTrue(0 <= statistic <= 1)
            self.assertTrue(0 <= pvalue <= 1)

    def test_qq_rejects_bad_component(self):
        with self.assertRaises(IndexError):
            qq_experiment(small_config(), lam=2.0, component=5)

    def test_well_separated_contamination_is_found(self):
        config = ExperimentConfig(n=200, reps=10, seed=2, mu=MuMechanism(p0=0.98, p1=0.02, p2=0.0, c=75.0))
        report = selection_experiment(config, lam=7.4)
        self.assertGreaterEqual(report.frequency, 0.9)
        self.assertEqual(report.threshold, 7.4)
        self.assertEqual(report.reps_used + report.failures, 10)

    def test_tiny_lambda_never_selects_exactly(self):
        config = ExperimentConfig(n=100, reps=5, seed=4)
        report = selection_experiment(config, lam=0.01, penalty_kind=PenaltyKind.HARD)
        self.assertEqual(report.frequency, 0.0)
        self.assertEqual(report.mc_se, 0.0)


if __name__ == '__main__':
    unittest.main()
