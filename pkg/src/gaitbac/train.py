"""Network trainers: Levenberg-Marquardt, Bayesian-regularized LM, and
nonlinear conjugate gradient, plus the hidden-size sweep and data splits.

The LM step solves the damped normal equations built from the error
Jacobian; the damping factor lambda starts large (gradient-descent-like
steps) and adapts by a fixed factor on each accepted or rejected step, so
updates blend between gradient descent and Gauss-Newton.

Bayesian regularization follows the Foresee-Hagan evidence loop: minimize
``F = beta * E_D + alpha * E_W`` with LM (E_D the sum of squared errors,
E_W the sum of squared parameters), then re-estimate the hyperparameters
at the minimizer from the Gauss-Newton Hessian ``H = 2*beta*J'J +
2*alpha*I`` via the effective parameter count
``gamma = N - 2*alpha*tr(H^-1)``:

    alpha <- gamma / (2 * E_W)        beta <- (n - gamma) / (2 * E_D)

until both hyperparameters stabilize.
"""

from __future__ import annotations

import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    HessianNotInvertible,
    NonFiniteHyperparameter,
    NonFiniteLoss,
    SingularNormalEquations,
    TooFewGroups,
)
from .mlp import Dataset, MlpModel, fit_scaling, flatten, init_model, jacobian, residuals, sse, sse_gradient, unflatten

#: Relative residual above which a damped-normal-equation solve is treated
#: as failed and the damping is escalated.
SOLVE_RESIDUAL_TOL = 1e-8


@dataclass(frozen=True)
class LmConfig:
    lambda0: float = 10.0
    lambda_up: float = 10.0
    lambda_down: float = 10.0
    lambda_max: float = 1e10
    max_iters: int = 1000
    min_grad: float = 1e-10
    min_step: float = 1e-12

    def __post_init__(self) -> None:
        vals = (self.lambda0, self.lambda_up, self.lambda_down, self.lambda_max,
                self.min_grad, self.min_step)
        if not all(v > 0 for v in vals) or self.max_iters < 1:
            raise ValueError("all LM config values must be positive")
        if self.lambda_up <= 1 or self.lambda_down <= 1:
            raise ValueError("lambda_up and lambda_down must exceed 1")


@dataclass
class BrState:
    """Evidence-framework hyperparameters at the end of training."""

    alpha: float
    beta: float
    gamma: float
    e_data: float     # sum of squared errors at the minimizer
    e_weights: float  # sum of squared parameters at the minimizer

    @property
    def objective(self) -> float:
        return self.beta * self.e_data + self.alpha * self.e_weights


@dataclass
class TrainReport:
    algorithm: str
    iterations: int
    final_mse: float
    trace: list[dict] = field(default_factory=list)
    seed: int | None = None
    wall_time_s: float = 0.0
    stop_reason: str = ""

    def to_dict(self, include_timing: bool = False) -> dict:
        """JSON-ready form. Timing is omitted by default so that reports
        written with the same seed are byte-identical across runs."""
        out = {
            "algorithm": self.algorithm,
            "iterations": self.iterations,
            "final_mse": self.final_mse,
            "seed": self.seed,
            "stop_reason": self.stop_reason,
            "trace": self.trace,
        }
        if include_timing:
            out["wall_time_s"] = self.wall_time_s
        return out


def _solve_damped(A_base: np.ndarray, ridge: float, rhs: np.ndarray):
    """Solve (A_base + ridge*I) h = rhs; returns (h, relative residual).

    None is returned for h when the factorization fails outright.
    """
    A = A_base.copy()
    A[np.diag_indices_from(A)] += ridge
    try:
        c, low = scipy.linalg.cho_factor(A, check_finite=False)
        h = scipy.linalg.cho_solve((c, low), rhs, check_finite=False)
    except (scipy.linalg.LinAlgError, ValueError):
        return None, np.inf
    denom = max(float(np.linalg.norm(rhs)), np.finfo(float).tiny)
    resid = float(np.linalg.norm(A @ h - rhs)) / denom
    return h, resid


def _lm_minimize(model: MlpModel, data: Dataset, cfg: LmConfig,
                 alpha: float = 0.0, beta: float = 1.0,
                 lambda0: float | None = None):
    """Damped least-squares descent on F = beta*E_D + alpha*E_W.

    Returns (model, trace, stop_reason, final_lambda). With alpha=0,
    beta=1 this is plain LM on the sum of squared errors. One trace entry
    is appended per Jacobian build; rejected steps re-solve with a larger
    lambda inside the same iteration.
    """
    model = model.copy()
    theta = flatten(model)
    e = residuals(model, data)
    f_val = beta * float(e @ e) + alpha * float(theta @ theta)
    if not np.isfinite(f_val):
        raise NonFiniteLoss(f"initial objective is {f_val}")

    lam = cfg.lambda0 if lambda0 is None else lambda0
    n = data.n
    trace: list[dict] = []
    stop = "max_iters"

    for _ in range(cfg.max_iters):
        J = jacobian(model, data)
        grad = 2.0 * (beta * (J.T @ e) + alpha * theta)
        if float(np.linalg.norm(grad, np.inf)) < cfg.min_grad:
            stop = "min_grad"
            break

        A_base = beta * (J.T @ J)
        rhs = -(beta * (J.T @ e) + alpha * theta)
        accepted = False
        solved_once = False
        step_norm = 0.0
        while True:
            h, resid = _solve_damped(A_base, alpha + lam, rhs)
            if h is not None and resid <= SOLVE_RESIDUAL_TOL:
                solved_once = True
                theta_new = theta + h
                if np.all(np.isfinite(theta_new)):
                    cand = unflatten(model, theta_new)
                    e_new = residuals(cand, data)
                    f_new = beta * float(e_new @ e_new) + alpha * float(theta_new @ theta_new)
                else:
                    f_new = np.inf
                if np.isfinite(f_new) and f_new < f_val:
                    model, theta, e, f_val = cand, theta_new, e_new, f_new
                    step_norm = float(np.linalg.norm(h))
                    lam = lam / cfg.lambda_down
                    accepted = True
                    break
            lam = lam * cfg.lambda_up
            if lam > cfg.lambda_max:
                break
        trace.append({"mse": float(e @ e) / n, "lambda": lam, "accepted": accepted})
        if not accepted:
            if not solved_once:
                raise SingularNormalEquations(
                    f"damped normal equations unsolvable up to lambda = {cfg.lambda_max:g}"
                )
            stop = "lambda_max"
            break
        if step_norm < cfg.min_step:
            stop = "min_step"
            break

    return model, trace, stop, lam


def train_lm(model: MlpModel, data: Dataset, cfg: LmConfig | None = None,
             seed: int | None = None) -> tuple[MlpModel, TrainReport]:
    """Levenberg-Marquardt on the sum of squared errors.

    Steps are accepted only when they decrease the SSE, so the returned
    model's training SSE never exceeds the initial one. Stops on the
    iteration cap, a small gradient, a small step, or runaway damping.
    """
    cfg = cfg or LmConfig()
    t0 = time.perf_counter()
    fitted, trace, stop, _ = _lm_minimize(model, data, cfg)
    report = TrainReport(
        algorithm="lm",
        iterations=len(trace),
        final_mse=sse(fitted, data) / data.n,
        trace=trace,
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
        stop_reason=stop,
    )
    return fitted, report


def _gauss_newton_hessian_trace_inv(J: np.ndarray, alpha: float, beta: float) -> float:
    """tr(H^-1) for H = 2*beta*J'J + 2*alpha*I, by dense factorization.

    One jitter retry (1e-12 on the diagonal) before giving up.
    """
    N = J.shape[1]
    H = 2.0 * beta * (J.T @ J)
    H[np.diag_indices_from(H)] += 2.0 * alpha
    for jitter in (0.0, 1e-12):
        try:
            Hj = H if jitter == 0.0 else H + jitter * np.eye(N)
            c, low = scipy.linalg.cho_factor(Hj)
            Hinv = scipy.linalg.cho_solve((c, low), np.eye(N))
            return float(np.trace(Hinv))
        except scipy.linalg.LinAlgError:
            continue
    raise HessianNotInvertible(f"Gauss-Newton Hessian ({N}x{N}) not factorizable")


def train_br(model: MlpModel, data: Dataset, cfg: LmConfig | None = None,
             seed: int | None = None, max_outer: int = 50,
             hyper_tol: float = 1e-3) -> tuple[MlpModel, BrState, TrainReport]:
    """Bayesian-regularized training (evidence framework around LM).

    Starts from alpha=0, beta=1 (the first pass is plain LM on the SSE)
    and alternates LM minimization of F = beta*E_D + alpha*E_W with
    hyperparameter re-estimation until the relative change of both alpha
    and beta drops below ``hyper_tol``. gamma is clipped into [0, N] and
    alpha/beta to >= 0, with a warning when the excursion exceeds 1e-6.
    No validation data is used.
    """
    cfg = cfg or LmConfig()
    if data.n <= 1:
        raise ValueError("Bayesian regularization needs n > 1")
    t0 = time.perf_counter()
    alpha, beta = 0.0, 1.0
    N = model.n_params
    n = data.n
    model = model.copy()
    trace: list[dict] = []
    stop = "max_outer"
    state = BrState(alpha=alpha, beta=beta, gamma=float(N), e_data=np.inf, e_weights=np.inf)

    for _ in range(max_outer):
        model, inner_trace, _, last_lam = _lm_minimize(model, data, cfg, alpha=alpha, beta=beta)
        theta = flatten(model)
        e = residuals(model, data)
        e_data = float(e @ e)
        e_weights = float(theta @ theta)

        if alpha == 0.0:
            gamma = float(N)
        else:
            J = jacobian(model, data)
            gamma = N - 2.0 * alpha * _gauss_newton_hessian_trace_inv(J, alpha, beta)
        gamma = _clip_with_warning(gamma, 0.0, float(N), "gamma")

        tiny = np.finfo(float).tiny
        alpha_new = gamma / max(2.0 * e_weights, tiny)
        beta_new = (n - gamma) / max(2.0 * e_data, tiny)
        if not (np.isfinite(alpha_new) and np.isfinite(beta_new)):
            raise NonFiniteHyperparameter(f"alpha={alpha_new}, beta={beta_new}")
        alpha_new = _clip_with_warning(alpha_new, 0.0, np.inf, "alpha")
        beta_new = _clip_with_warning(beta_new, 0.0, np.inf, "beta")

        state = BrState(alpha=alpha_new, beta=beta_new, gamma=gamma,
                        e_data=e_data, e_weights=e_weights)
        trace.append({
            "mse": e_data / n,
            "lambda": last_lam,
            "alpha": alpha_new,
            "beta": beta_new,
            "gamma": gamma,
            "objective": state.objective,
            "inner_iterations": len(inner_trace),
        })

        converged = (
            abs(alpha_new - alpha) <= hyper_tol * max(abs(alpha_new), tiny)
            and abs(beta_new - beta) <= hyper_tol * max(abs(beta_new), tiny)
        )
        alpha, beta = alpha_new, beta_new
        if converged:
            stop = "hyperparameters_stable"
            break

    report = TrainReport(
        algorithm="br",
        iterations=len(trace),
        final_mse=state.e_data / n,
        trace=trace,
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
        stop_reason=stop,
    )
    return model, state, report


def _clip_with_warning(value: float, lo: float, hi: float, name: str) -> float:
    clipped = min(max(value, lo), hi)
    if abs(clipped - value) > 1e-6:
        warnings.warn(f"{name} = {value:.6g} clipped into [{lo:.6g}, {hi:.6g}]",
                      RuntimeWarning, stacklevel=3)
    return clipped


# --- conjugate gradient ------------------------------------------------------

#: Armijo sufficient-decrease constant for the backtracking line search.
ARMIJO_C = 1e-4
LINESEARCH_MAX_HALVINGS = 60


def fletcher_reeves(fun, grad, x0: np.ndarray, max_iters: int = 1000,
                    tol: float = 1e-10, restart_every: int | None = None):
    """Generic Fletcher-Reeves nonlinear CG with Armijo backtracking.

    The direction restarts to steepest descent every ``restart_every``
    iterations (defaults to the dimension) or when it stops being a
    descent direction. Accepted points always decrease the objective.
    Returns (x, trace of objective values, stop reason).
    """
    x = np.asarray(x0, dtype=np.float64).copy()
    if restart_every is None:
        restart_every = max(1, x.size)
    f = float(fun(x))
    if not np.isfinite(f):
        raise NonFiniteLoss(f"initial objective is {f}")
    g = grad(x)
    trace = [f]
    if float(np.linalg.norm(g, np.inf)) < tol:
        return x, trace, "min_grad"

    d = -g
    gg = float(g @ g)
    step = 1.0
    since_restart = 0
    stop = "max_iters"
    for _ in range(max_iters):
        gd = float(g @ d)
        if gd >= 0.0:  # not a descent direction: restart
            d = -g
            gd = float(g @ d)
            since_restart = 0
        alpha = step
        for _ in range(LINESEARCH_MAX_HALVINGS):
            f_new = float(fun(x + alpha * d))
            if np.isfinite(f_new) and f_new <= f + ARMIJO_C * alpha * gd:
                break
            alpha *= 0.5
        else:
            if np.allclose(d, -g):
                stop = "line_search_failed"
                break
            d = -g
            since_restart = 0
            continue

        x = x + alpha * d
        f = f_new
        g_new = grad(x)
        gg_new = float(g_new @ g_new)
        trace.append(f)
        step = min(alpha * 2.0, 1.0)
        if float(np.linalg.norm(g_new, np.inf)) < tol:
            stop = "min_grad"
            break
        since_restart += 1
        if since_restart >= restart_every:
            d = -g_new
            since_restart = 0
        else:
            d = -g_new + (gg_new / gg) * d
        g, gg = g_new, gg_new
    return x, trace, stop


def train_cg(model: MlpModel, data: Dataset, max_iters: int = 1000,
             tol: float = 1e-10, seed: int | None = None) -> tuple[MlpModel, TrainReport]:
    """Fletcher-Reeves CG on the sum of squared errors."""
    t0 = time.perf_counter()
    base = model.copy()

    def fun(theta: np.ndarray) -> float:
        if not np.all(np.isfinite(theta)):
            return np.inf
        return sse(unflatten(base, theta), data)

    def grad(theta: np.ndarray) -> np.ndarray:
        return sse_gradient(unflatten(base, theta), data)

    theta, obj_trace, stop = fletcher_reeves(fun, grad, flatten(base),
                                             max_iters=max_iters, tol=tol)
    fitted = unflatten(base, theta)
    n = data.n
    report = TrainReport(
        algorithm="cg",
        iterations=len(obj_trace),
        final_mse=obj_trace[-1] / n,
        trace=[{"mse": v / n} for v in obj_trace],
        seed=seed,
        wall_time_s=time.perf_counter() - t0,
        stop_reason=stop,
    )
    return fitted, report


# --- splits and the hidden-size sweep ----------------------------------------

def split(data: Dataset, train_frac: float, mode: str = "random_window",
          seed: int = 0) -> tuple[Dataset, Dataset]:
    """Disjoint, exhaustive train/test partition.

    ``random_window`` shuffles rows; ``by_episode`` keeps all windows of
    one (subject, session, hour) group on the same side.
    """
    if not (0.0 < train_frac < 1.0):
        raise ValueError("train_frac must be in (0, 1)")
    n = data.n
    rng = np.random.default_rng(seed)
    if mode == "random_window":
        perm = rng.permutation(n)
        n_train = min(max(int(round(train_frac * n)), 1), n - 1)
        return data.subset(perm[:n_train]), data.subset(perm[n_train:])
    if mode == "by_episode":
        keys = sorted(set(data.groups))
        if len(keys) < 2:
            raise TooFewGroups(f"by_episode split needs >= 2 groups, got {len(keys)}")
        order = rng.permutation(len(keys))
        rows_by_key: dict[tuple, list[int]] = {k: [] for k in keys}
        for i, k in enumerate(data.groups):
            rows_by_key[k].append(i)
        target = train_frac * n
        train_idx: list[int] = []
        test_idx: list[int] = []
        for pos in order:
            key = keys[pos]
            if len(train_idx) < target and len(train_idx) + len(rows_by_key[key]) < n:
                train_idx.extend(rows_by_key[key])
            else:
                test_idx.extend(rows_by_key[key])
        return data.subset(sorted(train_idx)), data.subset(sorted(test_idx))
    raise ValueError(f"unknown split mode {mode!r}")


@dataclass
class SweepRow:
    hidden: int
    cv_mse: float          # NaN when disqualified
    fold_mse: list[float]
    failed: bool = False
    error: str | None = None


@dataclass
class SweepResult:
    rows: list[SweepRow]
    selected: int | None

    def as_table(self) -> list[tuple[int, float]]:
        return [(r.hidden, r.cv_mse) for r in self.rows]


TRAINERS = ("cg", "lm", "br")


def _run_trainer(trainer: str, model: MlpModel, data: Dataset,
                 cfg: LmConfig, cg_max_iters: int) -> MlpModel:
    if trainer == "lm":
        fitted, _ = train_lm(model, data, cfg)
    elif trainer == "br":
        fitted, _, _ = train_br(model, data, cfg)
    elif trainer == "cg":
        fitted, _ = train_cg(model, data, max_iters=cg_max_iters)
    else:
        raise ValueError(f"unknown trainer {trainer!r}")
    return fitted


def sweep_hidden(data: Dataset, candidates: list[int], folds: int,
                 trainer: str = "lm", seed: int = 0,
                 cfg: LmConfig | None = None, cg_max_iters: int = 300,
                 threads: int = 1) -> SweepResult:
    """k-fold cross-validation MSE for each candidate hidden size.

    Fold assignment is drawn once from ``seed`` and shared by every
    candidate; each trial's weight initialization is seeded by
    (seed, hidden, fold), so results are reproducible and independent of
    execution order. A trainer error disqualifies the candidate. The
    selection is the argmin cv MSE, ties resolved toward the smaller
    hidden size.
    """
    if folds < 2:
        raise ValueError("folds must be >= 2")
    if not candidates:
        raise ValueError("candidates must be non-empty")
    cfg = cfg or LmConfig()
    rng = np.random.default_rng(seed)
    perm = rng.permutation(data.n)
    fold_idx = np.array_split(perm, folds)

    def trial(hidden: int, fold: int) -> float:
        val_rows = fold_idx[fold]
        train_rows = np.concatenate([fold_idx[i] for i in range(folds) if i != fold])
        tr, va = data.subset(train_rows), data.subset(val_rows)
        trial_rng = np.random.default_rng(np.random.SeedSequence((seed, hidden, fold)))
        in_scale, out_scale = fit_scaling(tr)
        model = init_model(tr.n_features, hidden, trial_rng, in_scale, out_scale)
        fitted = _run_trainer(trainer, model, tr, cfg, cg_max_iters)
        err = va.targets - fitted.predict(va.inputs)
        return float(err @ err) / va.n

    jobs = [(h, k) for h in sorted(set(candidates)) for k in range(folds)]
    results: dict[tuple[int, int], float | Exception] = {}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = {job: pool.submit(trial, *job) for job in jobs}
        for job, fut in futures.items():
            exc = fut.exception()
            results[job] = exc if exc is not None else fut.result()
    else:
        for job in jobs:
            try:
                results[job] = trial(*job)
            except Exception as exc:  # fold failure disqualifies the candidate
                results[job] = exc

    rows: list[SweepRow] = []
    for h in sorted(set(candidates)):
        fold_vals = [results[(h, k)] for k in range(folds)]
        errors = [v for v in fold_vals if isinstance(v, Exception)]
        if errors:
            rows.append(SweepRow(hidden=h, cv_mse=float("nan"),
                                 fold_mse=[v for v in fold_vals if not isinstance(v, Exception)],
                                 failed=True, error=repr(errors[0])))
        else:
            vals = [float(v) for v in fold_vals]
            rows.append(SweepRow(hidden=h, cv_mse=float(np.mean(vals)), fold_mse=vals))

    selected = None
    best = np.inf
    for r in rows:
        if not r.failed and r.cv_mse < best:
            best = r.cv_mse
            selected = r.hidden
    return SweepResult(rows=rows, selected=selected)
