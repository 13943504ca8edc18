"""Trainer contracts: LM step algebra, evidence-loop behavior, CG oracle,
splits, and the hidden-size sweep."""

import numpy as np
import pytest

from gaitbac.errors import NonFiniteLoss, TooFewGroups
from gaitbac.mlp import Dataset, fit_scaling, flatten, init_model, jacobian, residuals, sse
from gaitbac.train import (
    LmConfig,
    _lm_minimize,
    _solve_damped,
    fletcher_reeves,
    split,
    sweep_hidden,
    train_br,
    train_cg,
    train_lm,
)

from conftest import make_generator_dataset


class TestLmStepAlgebra:
    def setup_method(self):
        rng = np.random.default_rng(0)
        self.model = init_model(6, 3, rng)
        self.data = Dataset(rng.uniform(-1, 1, (60, 6)), rng.uniform(-1, 1, 60))
        self.J = jacobian(self.model, self.data)
        self.e = residuals(self.model, self.data)
        self.A = self.J.T @ self.J
        self.rhs = -(self.J.T @ self.e)

    def test_solve_residual_tolerance(self):
        h, resid = _solve_damped(self.A, 1e-3, self.rhs)
        assert h is not None
        assert resid <= 1e-8

    def test_small_damping_is_gauss_newton(self):
        # on a well-conditioned system the damped solve converges to the
        # undamped Gauss-Newton step as the damping vanishes
        rng = np.random.default_rng(1)
        Q = rng.normal(size=(25, 25))
        A = Q.T @ Q + 25 * np.eye(25)
        rhs = rng.normal(size=25)
        h, _ = _solve_damped(A, 1e-14, rhs)
        h_gn = np.linalg.solve(A, rhs)
        np.testing.assert_allclose(h, h_gn, rtol=1e-9, atol=1e-14)

    def test_large_damping_aligns_with_gradient_direction(self):
        h, _ = _solve_damped(self.A, 1e8, self.rhs)
        cos = float(h @ self.rhs) / (np.linalg.norm(h) * np.linalg.norm(self.rhs))
        assert 1.0 - cos < 1e-3  # descent direction -J'e in the steep-lambda limit

    def test_step_decreases_sse_when_accepted(self):
        fitted, rep = train_lm(self.model, self.data, LmConfig(max_iters=30))
        assert sse(fitted, self.data) <= sse(self.model, self.data)
        mses = [t["mse"] for t in rep.trace if t["accepted"]]
        assert all(b <= a + 1e-15 for a, b in zip(mses, mses[1:]))


class TestTrainLm:
    def test_recovers_single_unit_generator(self):
        data, target = make_generator_dataset(n_hidden=1, n=200, seed=3,
                                              scale_hidden=1.0, scale_output=1.0,
                                              n_in=4)
        fitted, rep = train_lm(init_model(4, 1, np.random.default_rng(11)),
                               data, LmConfig(max_iters=500))
        assert sse(fitted, data) < 1e-10

    def test_deterministic_given_same_start(self):
        data, _ = make_generator_dataset(n_hidden=2, n=100, seed=4, n_in=6)
        m0 = init_model(6, 2, np.random.default_rng(5))
        f1, _ = train_lm(m0, data, LmConfig(max_iters=50))
        f2, _ = train_lm(m0, data, LmConfig(max_iters=50))
        assert np.array_equal(flatten(f1), flatten(f2))

    def test_trace_length_matches_iterations(self):
        data, _ = make_generator_dataset(n_hidden=2, n=80, seed=6, n_in=4)
        _, rep = train_lm(init_model(4, 2, np.random.default_rng(7)), data,
                          LmConfig(max_iters=25))
        assert len(rep.trace) == rep.iterations

    def test_non_finite_loss(self):
        X = np.ones((4, 2))
        data = Dataset(X, np.full(4, 1e200))  # SSE overflows to inf
        with pytest.raises(NonFiniteLoss):
            train_lm(init_model(2, 1, np.random.default_rng(8)), data)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            LmConfig(lambda_up=0.5)
        with pytest.raises(ValueError):
            LmConfig(max_iters=0)


class TestTrainBr:
    def test_first_pass_is_plain_lm(self):
        data, _ = make_generator_dataset(n_hidden=2, n=120, seed=9, n_in=6)
        m0 = init_model(6, 2, np.random.default_rng(10))
        cfg = LmConfig(max_iters=40)
        lm_model, _ = train_lm(m0, data, cfg)
        br_model, _, _ = train_br(m0, data, cfg, max_outer=1)
        assert np.array_equal(flatten(br_model), flatten(lm_model))

    def test_beta_grows_on_noiseless_data(self):
        data, _ = make_generator_dataset(n_hidden=3, n=200, seed=12,
                                         scale_hidden=2.0, n_in=6)
        _, state, rep = train_br(init_model(6, 3, np.random.default_rng(13)),
                                 data, LmConfig(max_iters=60), max_outer=6)
        betas = [t["beta"] for t in rep.trace[:3]]
        assert len(betas) >= 2
        assert all(b > a for a, b in zip(betas, betas[1:]))
        assert betas[0] > 1.0

    def test_pure_noise_shrinks_effective_parameters(self):
        # interleaved profile: a small inner budget re-estimates the
        # hyperparameters before the fit can dig into the noise
        rng = np.random.default_rng(14)
        X = rng.uniform(-1, 1, (660, 8))
        y = rng.normal(0, 1, 660)
        train_data = Dataset(X[:600], y[:600])
        test_data = Dataset(X[600:], y[600:])
        model = init_model(8, 5, np.random.default_rng(15))
        fitted, state, _ = train_br(model, train_data, LmConfig(max_iters=3),
                                    max_outer=100)
        N = model.n_params
        assert 0.0 <= state.gamma <= N
        assert state.gamma < N / 2  # most parameters turned off
        pred = fitted.predict(test_data.inputs)
        mse = float(np.mean((pred - test_data.targets) ** 2))
        mean_pred_mse = float(np.mean((test_data.targets.mean() - test_data.targets) ** 2))
        assert mse <= 2.0 * mean_pred_mse

    def test_hyperparameters_remain_valid(self):
        data, _ = make_generator_dataset(n_hidden=2, n=150, seed=16,
                                         noise_sd=0.05, n_in=6)
        model = init_model(6, 3, np.random.default_rng(17))
        _, state, rep = train_br(model, data, LmConfig(max_iters=40), max_outer=10)
        N = model.n_params
        for entry in rep.trace:
            assert entry["alpha"] >= 0.0
            assert entry["beta"] >= 0.0
            assert 0.0 <= entry["gamma"] <= N

    def test_objective_consistency(self):
        data, _ = make_generator_dataset(n_hidden=2, n=100, seed=18,
                                         noise_sd=0.03, n_in=5)
        fitted, state, rep = train_br(init_model(5, 2, np.random.default_rng(19)),
                                      data, LmConfig(max_iters=40), max_outer=8)
        recomputed = state.beta * state.e_data + state.alpha * state.e_weights
        assert recomputed == pytest.approx(state.objective, rel=1e-10)
        theta = flatten(fitted)
        e = residuals(fitted, data)
        assert state.e_data == pytest.approx(float(e @ e), rel=1e-10)
        assert state.e_weights == pytest.approx(float(theta @ theta), rel=1e-10)


def quadratic_problem(seed=0, n=40, d=6):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, d))
    b = rng.normal(size=n)
    fun = lambda x: float(np.sum((A @ x - b) ** 2))
    grad = lambda x: 2.0 * A.T @ (A @ x - b)
    x_star = np.linalg.lstsq(A, b, rcond=None)[0]
    return fun, grad, x_star


class TestConjugateGradient:
    def test_matches_least_squares_oracle(self):
        fun, grad, x_star = quadratic_problem()
        x, trace, stop = fletcher_reeves(fun, grad, np.zeros(6),
                                         max_iters=500, tol=1e-12)
        np.testing.assert_allclose(x, x_star, atol=1e-6)

    def test_monotone_trace(self):
        fun, grad, _ = quadratic_problem(seed=1)
        _, trace, _ = fletcher_reeves(fun, grad, np.ones(6), max_iters=200)
        assert all(b <= a + 1e-12 for a, b in zip(trace, trace[1:]))

    def test_stationary_start_returns_unchanged(self):
        data = Dataset(np.random.default_rng(2).uniform(-1, 1, (20, 4)),
                       np.zeros(20))
        m0 = init_model(4, 2, np.random.default_rng(3))
        m0.hidden_weights[:] = 0.0
        m0.hidden_bias[:] = 0.0
        m0.output_weights[:] = 0.0
        m0.output_bias = 0.0
        fitted, rep = train_cg(m0, data)
        assert rep.iterations == 1
        assert np.array_equal(flatten(fitted), flatten(m0))

    def test_model_training_decreases_sse(self):
        data, _ = make_generator_dataset(n_hidden=2, n=150, seed=20, n_in=6)
        m0 = init_model(6, 2, np.random.default_rng(21))
        fitted, rep = train_cg(m0, data, max_iters=200)
        assert rep.final_mse < sse(m0, data) / data.n
        mses = [t["mse"] for t in rep.trace]
        assert all(b <= a + 1e-15 for a, b in zip(mses, mses[1:]))


class TestSplit:
    def make_grouped(self, n=100):
        rng = np.random.default_rng(22)
        groups = [("s1", "d1", 20 + i % 5) for i in range(n // 2)]
        groups += [("s2", "d1", 20 + i % 5) for i in range(n - n // 2)]
        return Dataset(rng.uniform(-1, 1, (n, 3)), rng.uniform(0, 1, n), groups)

    def test_random_window_counts(self):
        data = self.make_grouped(100)
        tr, te = split(data, 0.7, "random_window", seed=1)
        assert (tr.n, te.n) == (70, 30)

    def test_partition_is_disjoint_and_exhaustive(self):
        data = self.make_grouped(60)
        tr, te = split(data, 0.7, "random_window", seed=2)
        ids = sorted(map(tuple, np.vstack([tr.inputs, te.inputs]).tolist()))
        assert ids == sorted(map(tuple, data.inputs.tolist()))

    def test_by_episode_keeps_groups_together(self):
        data = self.make_grouped(80)
        tr, te = split(data, 0.6, "by_episode", seed=3)
        assert set(tr.groups).isdisjoint(set(te.groups))
        assert tr.n + te.n == 80
        assert tr.n > 0 and te.n > 0

    def test_too_few_groups(self):
        data = Dataset(np.ones((5, 2)), np.ones(5), [("only",)] * 5)
        with pytest.raises(TooFewGroups):
            split(data, 0.5, "by_episode", seed=0)

    def test_seed_determinism(self):
        data = self.make_grouped(100)
        a1, b1 = split(data, 0.7, "random_window", seed=7)
        a2, b2 = split(data, 0.7, "random_window", seed=7)
        assert np.array_equal(a1.inputs, a2.inputs)
        a3, _ = split(data, 0.7, "random_window", seed=8)
        assert not np.array_equal(a1.inputs, a3.inputs)

    def test_bad_fraction(self):
        data = self.make_grouped(10)
        with pytest.raises(ValueError):
            split(data, 1.0)


class TestSweep:
    def test_singleton_candidate(self):
        data, _ = make_generator_dataset(n_hidden=2, n=90, seed=23, n_in=4)
        result = sweep_hidden(data, [3], folds=3, trainer="lm", seed=0,
                              cfg=LmConfig(max_iters=30))
        assert len(result.rows) == 1
        assert result.selected == 3

    def test_selects_generator_capacity(self):
        data, _ = make_generator_dataset(n_hidden=8, n=360, seed=24,
                                         scale_hidden=6.0, scale_output=3.0,
                                         n_in=6)
        result = sweep_hidden(data, [2, 8], folds=3, trainer="lm", seed=1,
                              cfg=LmConfig(max_iters=120))
        by_h = {r.hidden: r.cv_mse for r in result.rows}
        assert result.selected >= 8
        assert by_h[8] < by_h[2]

    def test_failed_fold_disqualifies(self):
        X = np.random.default_rng(25).uniform(-1, 1, (30, 3))
        # alternating huge targets: non-degenerate scaling, SSE overflows
        y = np.tile([1e200, -1e200], 15)
        result = sweep_hidden(Dataset(X, y), [2], folds=2, trainer="lm", seed=0,
                              cfg=LmConfig(max_iters=5))
        assert result.rows[0].failed
        assert result.selected is None

    def test_threads_match_sequential(self):
        data, _ = make_generator_dataset(n_hidden=2, n=90, seed=26, n_in=4)
        seq = sweep_hidden(data, [2, 3], folds=2, trainer="lm", seed=4,
                           cfg=LmConfig(max_iters=20), threads=1)
        par = sweep_hidden(data, [2, 3], folds=2, trainer="lm", seed=4,
                           cfg=LmConfig(max_iters=20), threads=4)
        assert [(r.hidden, r.cv_mse) for r in seq.rows] == \
               [(r.hidden, r.cv_mse) for r in par.rows]

    def test_validation(self):
        data, _ = make_generator_dataset(n_hidden=2, n=40, seed=27, n_in=4)
        with pytest.raises(ValueError):
            sweep_hidden(data, [], folds=2)
        with pytest.raises(ValueError):
            sweep_hidden(data, [2], folds=1)
