"""Feedforward regression network: forward pass, analytic error Jacobian,
and min-max input/output scaling.

The network is a single sigmoid hidden layer with a linear output unit:
``z = b0 + sum_j w_j * sigmoid(sum_i w_ij * u_i + b_j)`` on inputs scaled
to [-1, 1], with the prediction mapped back through the inverse output
scaling. Errors follow the convention ``e_k = y_k - yhat_k``, so the
Jacobian rows returned here are gradients of those residuals with respect
to the flattened parameter vector.

Parameter flattening order (fixed, documented for serialization and for
the Jacobian columns): ``hidden_weights`` row-major (hidden unit major,
input minor), then ``hidden_bias``, ``output_weights``, ``output_bias``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch


def sigmoid(gamma):
    """Logistic function 1 / (1 + exp(-gamma)), overflow-safe.

    Evaluates the exponential only on the side where it cannot overflow,
    so |gamma| up to 1e3 and far beyond is fine. Accepts scalars or
    arrays; returns the matching type.
    """
    g = np.asarray(gamma, dtype=np.float64)
    out = np.empty_like(g)
    pos = g >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-g[pos]))
    eg = np.exp(g[~pos])
    # flush denormal exponentials: they contribute nothing but stall the FPU
    eg[eg < 1e-300] = 0.0
    out[~pos] = eg / (1.0 + eg)
    if np.isscalar(gamma) or np.ndim(gamma) == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class MinMaxScale:
    """Affine map sending observed [lo, hi] per dimension onto [-1, 1].

    Degenerate dimensions (hi == lo) map to 0 under transform and back to
    the constant ``lo`` under inverse.
    """

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", np.atleast_1d(np.asarray(self.lo, dtype=np.float64)))
        object.__setattr__(self, "hi", np.atleast_1d(np.asarray(self.hi, dtype=np.float64)))
        if self.lo.shape != self.hi.shape:
            raise ValueError("lo and hi must have the same shape")
        if np.any(self.hi < self.lo):
            raise ValueError("hi must be >= lo")

    @property
    def span(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def degenerate(self) -> np.ndarray:
        return self.span == 0

    @property
    def slope(self) -> np.ndarray:
        """d(transformed)/d(raw) per dimension; 0 where degenerate."""
        return np.where(self.degenerate, 0.0, 2.0 / np.where(self.degenerate, 1.0, self.span))

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        span = np.where(self.degenerate, 1.0, self.span)
        u = 2.0 * (x - self.lo) / span - 1.0
        return np.where(self.degenerate, 0.0, u)

    def inverse(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=np.float64)
        y = (u + 1.0) * self.span / 2.0 + self.lo
        return np.where(self.degenerate, self.lo, y)


def identity_scale(n_dims: int) -> MinMaxScale:
    """Scale that leaves values unchanged ([-1, 1] onto itself)."""
    return MinMaxScale(lo=-np.ones(n_dims), hi=np.ones(n_dims))


@dataclass
class Dataset:
    """Feature matrix, target vector, and per-row episode keys."""

    inputs: np.ndarray           # (n, d)
    targets: np.ndarray          # (n,)
    groups: list[tuple] = field(default_factory=list)  # (subject, date, hour) per row

    def __post_init__(self) -> None:
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.inputs.ndim != 2 or self.inputs.shape[0] < 1:
            raise ValueError("inputs must be a non-empty (n, d) matrix")
        if self.targets.shape != (self.inputs.shape[0],):
            raise ValueError("targets must be a length-n vector")
        if not (np.all(np.isfinite(self.inputs)) and np.all(np.isfinite(self.targets))):
            raise ValueError("dataset contains non-finite entries")
        if not self.groups:
            self.groups = [("row", i) for i in range(self.n)]
        if len(self.groups) != self.n:
            raise ValueError("groups must have one key per row")

    @property
    def n(self) -> int:
        return int(self.inputs.shape[0])

    @property
    def n_features(self) -> int:
        return int(self.inputs.shape[1])

    def subset(self, idx: Sequence[int] | np.ndarray) -> "Dataset":
        idx = np.asarray(idx, dtype=np.intp)
        return Dataset(
            inputs=self.inputs[idx],
            targets=self.targets[idx],
            groups=[self.groups[i] for i in idx],
        )

    @classmethod
    def from_feature_vectors(cls, vectors) -> "Dataset":
        inputs = np.stack([v.values for v in vectors])
        targets = np.array([v.label for v in vectors])
        groups = [(v.subject_id, v.session_date, v.hour_slot) for v in vectors]
        return cls(inputs=inputs, targets=targets, groups=groups)


def fit_scaling(data: Dataset) -> tuple[MinMaxScale, MinMaxScale]:
    """Min-max scalers for the inputs (per feature) and the target."""
    if data.n < 2:
        raise ValueError("scaling needs at least 2 rows")
    input_scale = MinMaxScale(lo=data.inputs.min(axis=0), hi=data.inputs.max(axis=0))
    output_scale = MinMaxScale(lo=np.array([data.targets.min()]),
                               hi=np.array([data.targets.max()]))
    return input_scale, output_scale


@dataclass
class MlpModel:
    """Network weights, biases, and the scaling transforms they assume."""

    hidden_weights: np.ndarray   # (H, n_in)
    hidden_bias: np.ndarray      # (H,)
    output_weights: np.ndarray   # (H,)
    output_bias: float
    input_scale: MinMaxScale
    output_scale: MinMaxScale

    def __post_init__(self) -> None:
        self.hidden_weights = np.asarray(self.hidden_weights, dtype=np.float64)
        self.hidden_bias = np.asarray(self.hidden_bias, dtype=np.float64)
        self.output_weights = np.asarray(self.output_weights, dtype=np.float64)
        h, d = self.hidden_weights.shape
        if self.hidden_bias.shape != (h,) or self.output_weights.shape != (h,):
            raise ValueError("bias/output weight shapes must match the hidden layer")
        if self.input_scale.lo.shape != (d,):
            raise ValueError("input scale dimensionality must match n_in")
        for arr in (self.hidden_weights, self.hidden_bias, self.output_weights):
            if not np.all(np.isfinite(arr)):
                raise ValueError("parameters must be finite")
        if not math.isfinite(self.output_bias):
            raise ValueError("parameters must be finite")

    @property
    def n_in(self) -> int:
        return int(self.hidden_weights.shape[1])

    @property
    def n_hidden(self) -> int:
        return int(self.hidden_weights.shape[0])

    @property
    def n_params(self) -> int:
        h, d = self.hidden_weights.shape
        return h * d + h + h + 1

    def copy(self) -> "MlpModel":
        return MlpModel(
            hidden_weights=self.hidden_weights.copy(),
            hidden_bias=self.hidden_bias.copy(),
            output_weights=self.output_weights.copy(),
            output_bias=self.output_bias,
            input_scale=self.input_scale,
            output_scale=self.output_scale,
        )

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Batch prediction in raw feature/label units."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_in:
            raise DimensionMismatch(f"expected {self.n_in} features, got {X.shape[1]}")
        U = self.input_scale.transform(X)
        S = sigmoid(U @ self.hidden_weights.T + self.hidden_bias)
        z = S @ self.output_weights + self.output_bias
        return self.output_scale.inverse(z[:, None])[:, 0]


def init_model(n_in: int, n_hidden: int, rng: np.random.Generator,
               input_scale: MinMaxScale | None = None,
               output_scale: MinMaxScale | None = None) -> MlpModel:
    """Fresh model with uniform weights in +-0.5/sqrt(fan_in) per layer."""
    lim_h = 0.5 / math.sqrt(n_in)
    lim_o = 0.5 / math.sqrt(n_hidden)
    return MlpModel(
        hidden_weights=rng.uniform(-lim_h, lim_h, size=(n_hidden, n_in)),
        hidden_bias=rng.uniform(-lim_h, lim_h, size=n_hidden),
        output_weights=rng.uniform(-lim_o, lim_o, size=n_hidden),
        output_bias=float(rng.uniform(-lim_o, lim_o)),
        input_scale=input_scale if input_scale is not None else identity_scale(n_in),
        output_scale=output_scale if output_scale is not None else identity_scale(1),
    )


def forward(model: MlpModel, x: np.ndarray) -> float:
    """Single-vector prediction (raw-unit scalar)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_in,):
        raise DimensionMismatch(f"expected a {model.n_in}-vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ValueError("input must be finite")
    return float(model.predict(x[None, :])[0])


def flatten(model: MlpModel) -> np.ndarray:
    """All parameters as one vector in the documented order."""
    return np.concatenate([
        model.hidden_weights.ravel(),
        model.hidden_bias,
        model.output_weights,
        [model.output_bias],
    ])


def unflatten(model: MlpModel, theta: np.ndarray) -> MlpModel:
    """New model with the same architecture/scaling and parameters theta."""
    h, d = model.hidden_weights.shape
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (model.n_params,):
        raise DimensionMismatch(f"expected {model.n_params} parameters, got {theta.shape}")
    return MlpModel(
        hidden_weights=theta[:h * d].reshape(h, d).copy(),
        hidden_bias=theta[h * d:h * d + h].copy(),
        output_weights=theta[h * d + h:h * d + 2 * h].copy(),
        output_bias=float(theta[-1]),
        input_scale=model.input_scale,
        output_scale=model.output_scale,
    )


def residuals(model: MlpModel, data: Dataset) -> np.ndarray:
    """Error vector e = y - yhat in raw label units."""
    return data.targets - model.predict(data.inputs)


def sse(model: MlpModel, data: Dataset) -> float:
    e = residuals(model, data)
    return float(e @ e)


def _hidden_activations(model: MlpModel, data: Dataset) -> tuple[np.ndarray, np.ndarray]:
    U = model.input_scale.transform(data.inputs)
    S = sigmoid(U @ model.hidden_weights.T + model.hidden_bias)
    return U, S


def jacobian(model: MlpModel, data: Dataset) -> np.ndarray:
    """(n, N) matrix of d(e_k)/d(theta) in the flattened parameter order.

    e_k = y_k - yhat_k, so each row is minus the gradient of the
    prediction; the inverse output scaling contributes a constant factor
    span/2.
    """
    U, S = _hidden_activations(model, data)
    n, h = S.shape
    d = model.n_in
    dy_dz = float(model.output_scale.span[0]) / 2.0  # 0 if target degenerate
    factor = -dy_dz
    D = factor * (model.output_weights * S * (1.0 - S))  # (n, h)
    # flush saturated-unit derivatives: their squares in J'J would land in
    # the denormal range and stall the hardware
    D[np.abs(D) < 1e-150] = 0.0
    J = np.empty((n, model.n_params))
    J[:, :h * d] = (D[:, :, None] * U[:, None, :]).reshape(n, h * d)
    J[:, h * d:h * d + h] = D
    J[:, h * d + h:h * d + 2 * h] = factor * S
    J[:, -1] = factor
    return J


def sse_gradient(model: MlpModel, data: Dataset) -> np.ndarray:
    """Gradient of the sum of squared errors, computed without forming J."""
    U, S = _hidden_activations(model, data)
    z = S @ model.output_weights + model.output_bias
    yhat = model.output_scale.inverse(z[:, None])[:, 0]
    e = data.targets - yhat
    dy_dz = float(model.output_scale.span[0]) / 2.0
    common = (-dy_dz) * e                               # dSSE/dz per sample / 2
    g_b0 = 2.0 * common.sum()
    g_w2 = 2.0 * (S.T @ common)
    T = common[:, None] * (model.output_weights * S * (1.0 - S))  # (n, h)
    T[np.abs(T) < 1e-150] = 0.0
    g_b1 = 2.0 * T.sum(axis=0)
    g_w1 = 2.0 * (T.T @ U)
    return np.concatenate([g_w1.ravel(), g_b1, g_w2, [g_b0]])
