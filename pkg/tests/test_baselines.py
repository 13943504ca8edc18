"""Linear-regression and SVR baseline contracts."""

import numpy as np
import pytest

from gaitbac.baselines import (
    LinRegModel,
    SvrParams,
    _multiplier_bounds,
    fit_linreg,
    fit_svr,
    predict,
)
from gaitbac.errors import NoConvergence, SingularDesign
from gaitbac.mlp import Dataset, fit_scaling


def make_linear_data(n=100, d=6, seed=0, coefs=None, intercept=1.0, noise=0.0):
    rng = np.random.default_rng(seed)
    X = rng.uniform(0, 1, (n, d))
    if coefs is None:
        coefs = np.zeros(d)
        coefs[0] = 2.0
    y = X @ coefs + intercept + rng.normal(0, noise, n)
    return Dataset(X, y), np.asarray(coefs, dtype=float)


class TestLinReg:
    def test_exact_recovery(self):
        data, coefs = make_linear_data()
        model = fit_linreg(data)
        np.testing.assert_allclose(model.coefficients, coefs, atol=1e-8)
        assert model.intercept == pytest.approx(1.0, abs=1e-8)

    def test_constant_targets(self):
        rng = np.random.default_rng(1)
        data = Dataset(rng.uniform(0, 1, (50, 4)), np.full(50, 0.125))
        model = fit_linreg(data)
        np.testing.assert_allclose(model.coefficients, 0.0, atol=1e-12)
        assert model.intercept == pytest.approx(0.125, abs=1e-12)

    def test_residuals_orthogonal_to_features(self):
        data, _ = make_linear_data(n=200, seed=2, noise=0.3)
        model = fit_linreg(data, ridge=1e-12)
        resid = data.targets - model.predict(data.inputs)
        for j in range(data.n_features):
            col = data.inputs[:, j] - data.inputs[:, j].mean()
            assert abs(float(col @ resid)) / data.n < 1e-6
        assert abs(float(resid.sum())) / data.n < 1e-9

    def test_local_optimality_probe(self):
        data, _ = make_linear_data(n=150, seed=3, noise=0.2)
        model = fit_linreg(data)

        def objective(coefs, intercept):
            r = data.targets - (data.inputs @ coefs + intercept)
            return float(r @ r)

        base = objective(model.coefficients, model.intercept)
        rng = np.random.default_rng(4)
        for _ in range(100):
            dc = rng.normal(0, 1e-3, data.n_features)
            di = float(rng.normal(0, 1e-3))
            assert objective(model.coefficients + dc, model.intercept + di) >= base - 1e-12

    def test_singular_design_without_ridge(self):
        rng = np.random.default_rng(5)
        col = rng.uniform(0, 1, 40)
        X = np.column_stack([col, col])  # duplicated column
        data = Dataset(X, rng.uniform(0, 1, 40))
        with pytest.raises(SingularDesign):
            fit_linreg(data, ridge=0.0)
        fit_linreg(data)  # default tiny ridge copes

    def test_predict_single_vector(self):
        model = LinRegModel(coefficients=np.zeros(3), intercept=0.25)
        assert predict(model, np.array([5.0, 6.0, 7.0])) == 0.25


class TestSvr:
    def test_targets_inside_tube_give_zero_coefficients(self):
        rng = np.random.default_rng(6)
        X = rng.uniform(-1, 1, (40, 3))
        y = rng.uniform(-0.01, 0.01, 40)
        model = fit_svr(Dataset(X, y), SvrParams(kernel="rbf", epsilon=2.0))
        assert model.coefficients.size == 0
        pred = model.predict(X)
        assert np.allclose(pred, pred[0])  # bias only

    def test_linear_fixture_small_rmse(self):
        rng = np.random.default_rng(7)
        x = rng.uniform(-1, 1, 160)
        y = 1.5 * x
        data = Dataset(x[:120, None], y[:120])
        model = fit_svr(data, SvrParams(kernel="linear", C=100.0, epsilon=0.01,
                                        max_passes=20000))
        pred = model.predict(x[120:, None])
        rmse = float(np.sqrt(np.mean((pred - y[120:]) ** 2)))
        assert rmse <= 0.02

    def test_kkt_conditions_at_exit(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(-1, 1, (80, 4))
        y = np.sin(X[:, 0]) + 0.2 * X[:, 1] + rng.normal(0, 0.05, 80)
        data = Dataset(X, y)
        params = SvrParams(kernel="rbf", C=1.0, epsilon=0.05, tol=1e-5,
                           max_passes=100000)
        model = fit_svr(data, params)

        in_scale, out_scale = fit_scaling(data)
        U = in_scale.transform(X)
        ty = out_scale.transform(data.targets[:, None])[:, 0]
        from gaitbac.baselines import _kernel_matrix
        K = _kernel_matrix("rbf", model.gamma, U, U)
        # reconstruct the full dual vector from support rows
        full_beta = np.zeros(80)
        k = 0
        for i in range(80):
            if k < model.support_inputs.shape[0] and np.allclose(U[i], model.support_inputs[k]):
                full_beta[i] = model.coefficients[k]
                k += 1
        assert k == model.support_inputs.shape[0]
        g = K @ full_beta - ty
        lo, hi = _multiplier_bounds(full_beta, g, params.epsilon, params.C)
        assert float(lo.max() - hi.min()) <= params.tol * 1.001
        assert np.all(np.abs(full_beta) <= params.C + 1e-12)

        # samples strictly inside the tube carry no weight
        pred_scaled = K @ full_beta + model.bias
        inside = np.abs(pred_scaled - ty) < params.epsilon - 10 * params.tol
        assert np.all(np.abs(full_beta[inside]) <= 1e-6)

    def test_dual_coefficients_bounded(self):
        rng = np.random.default_rng(9)
        X = rng.uniform(-1, 1, (60, 2))
        y = X[:, 0] ** 2 + rng.normal(0, 0.1, 60)
        model = fit_svr(Dataset(X, y), SvrParams(C=0.5, epsilon=0.01,
                                                 max_passes=50000))
        assert np.all(np.abs(model.coefficients) <= 0.5 + 1e-12)

    def test_train_predictions_reproduce_residuals(self):
        rng = np.random.default_rng(10)
        X = rng.uniform(-1, 1, (50, 3))
        y = X @ np.array([1.0, -0.5, 0.2]) + rng.normal(0, 0.05, 50)
        data = Dataset(X, y)
        model = fit_svr(data, SvrParams(epsilon=0.05))
        p1 = model.predict(X)
        p2 = model.predict(X)
        assert np.array_equal(p1, p2)

    def test_no_convergence_budget(self):
        rng = np.random.default_rng(11)
        X = rng.uniform(-1, 1, (60, 3))
        y = rng.normal(0, 1, 60)
        with pytest.raises(NoConvergence):
            fit_svr(Dataset(X, y), SvrParams(epsilon=1e-4, max_passes=1))

    def test_deterministic(self):
        rng = np.random.default_rng(12)
        X = rng.uniform(-1, 1, (70, 3))
        y = np.cos(X[:, 0]) + rng.normal(0, 0.1, 70)
        m1 = fit_svr(Dataset(X, y), SvrParams(epsilon=0.02))
        m2 = fit_svr(Dataset(X, y), SvrParams(epsilon=0.02))
        assert np.array_equal(m1.coefficients, m2.coefficients)
        assert m1.bias == m2.bias

    def test_params_validation(self):
        with pytest.raises(ValueError):
            SvrParams(kernel="poly")
        with pytest.raises(ValueError):
            SvrParams(C=0.0)
