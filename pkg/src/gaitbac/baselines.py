"""Regression baselines for the algorithm comparison: ridge-stabilized
linear regression and epsilon-insensitive support vector regression.

Both baselines fit in the same min-max-scaled space as the network (the
same ``fit_scaling`` transform), so comparisons share identical
preprocessing. Linear regression composes its scaled-space solution back
into raw-unit coefficients; SVR keeps its support vectors in scaled space
and maps predictions back through the inverse output scaling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, NoConvergence, SingularDesign
from .mlp import Dataset, MinMaxScale, fit_scaling

DEFAULT_RIDGE = 1e-8


@dataclass
class LinRegModel:
    """Least-squares fit in raw units: yhat = x @ coefficients + intercept."""

    coefficients: np.ndarray
    intercept: float
    ridge: float = DEFAULT_RIDGE

    def __post_init__(self) -> None:
        self.coefficients = np.asarray(self.coefficients, dtype=np.float64)
        if not (np.all(np.isfinite(self.coefficients)) and math.isfinite(self.intercept)):
            raise ValueError("parameters must be finite")

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.coefficients.shape[0]:
            raise DimensionMismatch(
                f"expected {self.coefficients.shape[0]} features, got {X.shape[1]}"
            )
        return X @ self.coefficients + self.intercept


def fit_linreg(data: Dataset, ridge: float = DEFAULT_RIDGE) -> LinRegModel:
    """Normal-equations least squares with a tiny ridge on the slopes.

    The problem is solved in the shared min-max-scaled space (intercept
    unpenalized) and the affine maps are composed back, so the returned
    coefficients are in raw units. With ridge = 0 a rank-deficient design
    raises SingularDesign.
    """
    if data.n < 2:
        raise ValueError("need at least 2 rows")
    if ridge < 0:
        raise ValueError("ridge must be >= 0")
    in_scale, out_scale = fit_scaling(data)
    U = in_scale.transform(data.inputs)
    ty = out_scale.transform(data.targets[:, None])[:, 0]
    n, d = U.shape

    A = np.empty((d + 1, d + 1))
    A[:d, :d] = U.T @ U
    A[:d, d] = U.sum(axis=0)
    A[d, :d] = U.sum(axis=0)
    A[d, d] = n
    A[np.diag_indices(d)] += ridge  # slopes only, not the intercept
    rhs = np.concatenate([U.T @ ty, [ty.sum()]])
    try:
        sol = np.linalg.solve(A, rhs)
    except np.linalg.LinAlgError as exc:
        if ridge == 0:
            raise SingularDesign("rank-deficient design with ridge = 0") from exc
        raise
    w, b = sol[:d], float(sol[d])

    # compose u = a*x + c and yhat = p*z + q back into raw units
    a = in_scale.slope
    c = -(in_scale.lo + in_scale.hi) / np.where(in_scale.degenerate, 1.0, in_scale.span)
    c = np.where(in_scale.degenerate, 0.0, c)
    p = float(out_scale.span[0]) / 2.0
    q = float(out_scale.lo[0] + out_scale.hi[0]) / 2.0
    coefficients = p * (w * a)
    intercept = p * (float(w @ c) + b) + q
    return LinRegModel(coefficients=coefficients, intercept=intercept, ridge=ridge)


@dataclass(frozen=True)
class SvrParams:
    kernel: str = "rbf"          # "rbf" or "linear"
    gamma: float | None = None   # default 1/n_features
    C: float = 1.0
    epsilon: float = 1e-3        # tube half-width, scaled target units
    tol: float = 1e-3            # KKT tolerance
    max_passes: int | None = None  # pairwise updates; default 10*n

    def __post_init__(self) -> None:
        if self.kernel not in ("rbf", "linear"):
            raise ValueError(f"unknown kernel {self.kernel!r}")
        if self.C <= 0 or self.epsilon < 0 or self.tol <= 0:
            raise ValueError("C must be > 0, epsilon >= 0, tol > 0")


@dataclass
class SvrModel:
    """Epsilon-SVR solution: yhat = inverse_scale(sum_i beta_i k(u_i, u) + bias).

    ``support_inputs`` and ``coefficients`` keep only rows with nonzero
    dual coefficient beta_i = alpha_i - alpha_i*, each bounded by C.
    """

    params: SvrParams
    gamma: float
    coefficients: np.ndarray      # (n_sv,)
    support_inputs: np.ndarray    # (n_sv, d), scaled space
    bias: float                   # scaled target space
    input_scale: MinMaxScale
    output_scale: MinMaxScale

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.input_scale.lo.shape[0]:
            raise DimensionMismatch(
                f"expected {self.input_scale.lo.shape[0]} features, got {X.shape[1]}"
            )
        U = self.input_scale.transform(X)
        if self.coefficients.size:
            K = _kernel_matrix(self.params.kernel, self.gamma, U, self.support_inputs)
            z = K @ self.coefficients + self.bias
        else:
            z = np.full(U.shape[0], self.bias)
        return self.output_scale.inverse(z[:, None])[:, 0]


def _kernel_matrix(kernel: str, gamma: float, A: np.ndarray, B: np.ndarray) -> np.ndarray:
    if kernel == "linear":
        return A @ B.T
    sq = (A ** 2).sum(axis=1)[:, None] + (B ** 2).sum(axis=1)[None, :] - 2.0 * (A @ B.T)
    np.maximum(sq, 0.0, out=sq)
    return np.exp(-gamma * sq)


def fit_svr(data: Dataset, params: SvrParams | None = None) -> SvrModel:
    """Fit epsilon-SVR by exact pairwise dual coordinate optimization.

    Works on the combined dual variables beta_i = alpha_i - alpha_i* in
    [-C, C] with sum(beta) = 0. Each step picks the most violating pair
    under the common-multiplier KKT bounds and solves the two-variable
    piecewise-quadratic subproblem exactly, updating the cached gradient.
    Deterministic for a given dataset. Raises NoConvergence when the KKT
    violation still exceeds ``tol`` after the pass budget (10n by
    default).
    """
    params = params or SvrParams()
    if data.n < 2:
        raise ValueError("need at least 2 rows")
    in_scale, out_scale = fit_scaling(data)
    U = in_scale.transform(data.inputs)
    ty = out_scale.transform(data.targets[:, None])[:, 0]
    n = data.n
    gamma = params.gamma if params.gamma is not None else 1.0 / data.n_features
    C, eps = params.C, params.epsilon
    max_passes = params.max_passes if params.max_passes is not None else 10 * n

    K = _kernel_matrix(params.kernel, gamma, U, U)
    beta = np.zeros(n)
    g = -ty.copy()  # g_i = (K beta)_i - ty_i

    converged = False
    for _ in range(max_passes):
        lo_b, hi_b = _multiplier_bounds(beta, g, eps, C)
        i = int(np.argmax(lo_b))
        j = int(np.argmin(hi_b))
        if lo_b[i] - hi_b[j] <= params.tol:
            converged = True
            break
        t = _solve_pair(beta, g, K, i, j, eps, C)
        if t == 0.0:
            break  # numerically stuck on the most violating pair
        beta[i] += t
        beta[j] -= t
        g += t * (K[:, i] - K[:, j])

    if not converged:
        lo_b, hi_b = _multiplier_bounds(beta, g, eps, C)
        gap = float(lo_b.max() - hi_b.min())
        if gap > params.tol:
            raise NoConvergence(
                f"KKT violation {gap:.3g} > tol {params.tol:g} after {max_passes} passes"
            )

    lo_b, hi_b = _multiplier_bounds(beta, g, eps, C)
    finite_lo = lo_b[np.isfinite(lo_b)]
    finite_hi = hi_b[np.isfinite(hi_b)]
    if finite_lo.size and finite_hi.size:
        mu = (float(finite_lo.max()) + float(finite_hi.min())) / 2.0
    elif finite_lo.size:
        mu = float(finite_lo.max())
    elif finite_hi.size:
        mu = float(finite_hi.min())
    else:
        mu = 0.0
    bias = -mu

    sv = np.abs(beta) > 0.0
    return SvrModel(
        params=params,
        gamma=gamma,
        coefficients=beta[sv],
        support_inputs=U[sv],
        bias=bias,
        input_scale=in_scale,
        output_scale=out_scale,
    )


def _multiplier_bounds(beta: np.ndarray, g: np.ndarray, eps: float, C: float):
    """Per-sample bounds [lo_i, hi_i] on the shared KKT multiplier.

    Feasibility of one multiplier inside every interval is exactly dual
    optimality; max(lo) - min(hi) is the violation measure.
    """
    lo = np.full(beta.shape, -np.inf)
    hi = np.full(beta.shape, np.inf)
    at_upper = beta >= C
    at_lower = beta <= -C
    positive = (beta > 0) & ~at_upper
    negative = (beta < 0) & ~at_lower
    zero = beta == 0

    lo[positive] = hi[positive] = g[positive] + eps
    lo[negative] = hi[negative] = g[negative] - eps
    lo[zero] = g[zero] - eps
    hi[zero] = g[zero] + eps
    lo[at_upper] = g[at_upper] + eps
    hi[at_lower] = g[at_lower] - eps
    return lo, hi


def _solve_pair(beta: np.ndarray, g: np.ndarray, K: np.ndarray,
                i: int, j: int, eps: float, C: float) -> float:
    """Exact minimizer of the dual restricted to beta_i += t, beta_j -= t.

    The restricted objective is 0.5*eta*t^2 + (g_i - g_j)*t +
    eps*(|beta_i + t| + |beta_j - t|) over the box keeping both inside
    [-C, C]; piecewise quadratic with breakpoints at t = -beta_i and
    t = beta_j.
    """
    eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
    b_i, b_j = beta[i], beta[j]
    t_lo = max(-C - b_i, b_j - C)
    t_hi = min(C - b_i, b_j + C)
    if t_hi <= t_lo:
        return 0.0
    lin = g[i] - g[j]

    def value(t: float) -> float:
        return 0.5 * eta * t * t + lin * t + eps * (abs(b_i + t) + abs(b_j - t))

    candidates = {t_lo, t_hi}
    for bp in (-b_i, b_j):
        if t_lo < bp < t_hi:
            candidates.add(bp)
    if eta > 0:
        for s_a in (-1.0, 1.0):
            for s_b in (-1.0, 1.0):
                t_star = -(lin + eps * s_a - eps * s_b) / eta
                if t_lo <= t_star <= t_hi:
                    candidates.add(t_star)
    best_t, best_v = 0.0, value(0.0)
    for t in sorted(candidates):
        v = value(t)
        if v < best_v:
            best_t, best_v = t, v
    return best_t


def predict(model: LinRegModel | SvrModel, x: np.ndarray) -> float:
    """Single-vector prediction for either baseline."""
    x = np.asarray(x, dtype=np.float64)
    return float(model.predict(x[None, :])[0])
