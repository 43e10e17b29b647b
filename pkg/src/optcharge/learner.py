"""Demand forecaster, its two training regimes, and evaluation metrics.

The forecaster is a small two-hidden-layer rectifier network mapping the
price vector to per-customer demand estimates, with a learnable-gain
identity path from prices to outputs (prices and demands live on different
scales, so the gain starts at zero).  Outputs are clamped below at zero:
softly during training so gradients survive, hard at evaluation.

Two regimes share the architecture and optimizer:
  * two-step: fit demands by mean squared error, then schedule on the
    standalone predictions;
  * end-to-end: per sample, forecast, solve the scheduling QP, evaluate
    the realized cost against the true demands, and pull the cost gradient
    back through the QP sensitivity system into the network weights.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .diffopt import assemble_kkt_system, grad_wrt_e_hat
from .model import (
    Session,
    StationConfig,
    ValidationError,
    build_qp,
    task_loss,
    with_selling_prices,
)
from .pbdr import Dataset
from .qpsolver import SolverSettings, solve_qp

CLAMP_SHARPNESS = 100.0


class TrainingDivergedError(RuntimeError):
    """Training loss exploded; learning rate or data are off."""


class TooManySkippedSamplesError(RuntimeError):
    """More than the tolerated share of QP solves failed during training."""


class ComparisonCellError(RuntimeError):
    """A comparison-grid cell failed; completed cell results are attached."""

    def __init__(self, failures: list, partial: list):
        self.failures = failures
        self.partial = partial
        super().__init__(
            f"{len(failures)} comparison cell(s) failed: "
            + "; ".join(str(f) for f in failures[:3]))


# ---------------------------------------------------------------------------
# forecaster


@dataclass
class ForecasterParams:
    """Weights of the demand forecaster (two hidden layers plus input gain).

    ``input_center``/``input_scale`` standardize the price inputs of the
    hidden path (prices live on a much smaller scale than demands); they are
    frozen at training time and are not part of the trainable vector.  The
    identity path applies ``gain`` to the raw prices.
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray
    gain: float
    input_center: np.ndarray
    input_scale: np.ndarray

    @property
    def n_customers(self) -> int:
        return self.w3.shape[0]

    @property
    def hidden_width(self) -> int:
        return self.w1.shape[0]

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.w1.ravel(), self.b1, self.w2.ravel(),
                               self.b2, self.w3.ravel(), self.b3,
                               [self.gain]])

    def with_vector(self, vec: np.ndarray) -> "ForecasterParams":
        """Same static fields, trainable weights replaced from a flat vector."""
        n, width = self.n_customers, self.hidden_width
        sizes = [width * n, width, width * width, width, n * width, n, 1]
        if vec.size != sum(sizes):
            raise ValidationError(f"parameter vector has size {vec.size}, "
                                  f"expected {sum(sizes)}")
        parts = np.split(vec, np.cumsum(sizes)[:-1])
        return ForecasterParams(
            w1=parts[0].reshape(width, n), b1=parts[1],
            w2=parts[2].reshape(width, width), b2=parts[3],
            w3=parts[4].reshape(n, width), b3=parts[5],
            gain=float(parts[6][0]),
            input_center=self.input_center, input_scale=self.input_scale)

    @classmethod
    def zeros(cls, n: int, width: int) -> "ForecasterParams":
        template = cls(
            w1=np.zeros((width, n)), b1=np.zeros(width),
            w2=np.zeros((width, width)), b2=np.zeros(width),
            w3=np.zeros((n, width)), b3=np.zeros(n), gain=0.0,
            input_center=np.zeros(n), input_scale=np.ones(n))
        return template


def init_params(n: int, width: int, rng: np.random.Generator,
                b3_init: np.ndarray | None = None,
                input_center: np.ndarray | None = None,
                input_scale: np.ndarray | None = None) -> ForecasterParams:
    """He-scaled weights, zero biases and gain; optional output-bias seed."""
    params = ForecasterParams(
        w1=rng.standard_normal((width, n)) * np.sqrt(2.0 / n),
        b1=np.zeros(width),
        w2=rng.standard_normal((width, width)) * np.sqrt(2.0 / width),
        b2=np.zeros(width),
        w3=rng.standard_normal((n, width)) * np.sqrt(2.0 / width),
        b3=np.zeros(n),
        gain=0.0,
        input_center=np.zeros(n) if input_center is None
        else np.asarray(input_center, dtype=float).copy(),
        input_scale=np.ones(n) if input_scale is None
        else np.asarray(input_scale, dtype=float).copy(),
    )
    if b3_init is not None:
        params.b3 = np.asarray(b3_init, dtype=float).copy()
    return params


def input_stats(prices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-customer standardization statistics for the hidden path."""
    center = prices.mean(axis=0)
    scale = np.maximum(prices.std(axis=0), 1e-6)
    return center, scale


def _soft_clamp(raw: np.ndarray) -> np.ndarray:
    k = CLAMP_SHARPNESS
    return np.maximum(raw, 0.0) + np.log1p(np.exp(-k * np.abs(raw))) / k


def _soft_clamp_grad(raw: np.ndarray) -> np.ndarray:
    k = CLAMP_SHARPNESS
    out = np.empty_like(raw)
    pos = raw >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-k * raw[pos]))
    ex = np.exp(k * raw[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _forward(params: ForecasterParams, C: np.ndarray, soft: bool):
    """Batched forward pass; C has shape (K, N).  Returns (e_hat, cache)."""
    C_std = (C - params.input_center) / params.input_scale
    z1 = C_std @ params.w1.T + params.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ params.w2.T + params.b2
    a2 = np.maximum(z2, 0.0)
    raw = a2 @ params.w3.T + params.b3 + params.gain * C
    if soft:
        e_hat = _soft_clamp(raw)
        clamp_grad = _soft_clamp_grad(raw)
    else:
        e_hat = np.maximum(raw, 0.0)
        clamp_grad = (raw > 0.0).astype(float)
    return e_hat, (C, C_std, z1, a1, z2, a2, raw, clamp_grad)


def _backward(params: ForecasterParams, cache, upstream: np.ndarray) -> np.ndarray:
    """Backprop ``upstream = dL/d e_hat`` (K, N) into a flat parameter gradient."""
    C, C_std, z1, a1, z2, a2, raw, clamp_grad = cache
    d_raw = upstream * clamp_grad
    d_w3 = d_raw.T @ a2
    d_b3 = d_raw.sum(axis=0)
    d_gain = float((d_raw * C).sum())
    d_a2 = d_raw @ params.w3
    d_z2 = d_a2 * (z2 > 0.0)
    d_w2 = d_z2.T @ a1
    d_b2 = d_z2.sum(axis=0)
    d_a1 = d_z2 @ params.w2
    d_z1 = d_a1 * (z1 > 0.0)
    d_w1 = d_z1.T @ C_std
    d_b1 = d_z1.sum(axis=0)
    return np.concatenate([d_w1.ravel(), d_b1, d_w2.ravel(), d_b2,
                           d_w3.ravel(), d_b3, [d_gain]])


def forecast(params: ForecasterParams, c: np.ndarray,
             soft: bool = False) -> np.ndarray:
    """Demand estimate for one price vector (hard-clamped unless ``soft``)."""
    c = np.asarray(c, dtype=float)
    e_hat, _ = _forward(params, c[None, :], soft=soft)
    return e_hat[0]


# ---------------------------------------------------------------------------
# training configuration and optimizer


# the decision loss needs the same optimization progress as the MSE loss
# to converge within the fixed 250-iteration budget
DEFAULT_LEARNING_RATES = {"two_step": 1e-2, "e2e": 1e-2}


@dataclass
class TrainConfig:
    mode: str = "two_step"
    iterations: int = 250
    learning_rate: float | None = None
    batch_size: int = 32
    seed: int = 0
    optimizer: str = "adam"
    hidden_width: int = 32
    lr_schedule: str = "constant"
    # weight of the prediction-error anchor mixed into the decision loss
    # (end-to-end mode only); the anchor resolves the flat directions the
    # schedule optimum is insensitive to, which otherwise generalize badly
    anchor_weight: float = 0.5

    def __post_init__(self):
        if self.mode not in ("two_step", "e2e"):
            raise ValidationError(f"unknown mode {self.mode!r}")
        if self.iterations < 1:
            raise ValidationError("iterations must be >= 1")
        if self.learning_rate is not None and self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.optimizer not in ("sgd", "adam"):
            raise ValidationError(f"unsupported optimizer {self.optimizer!r}")
        if self.batch_size < 1 or self.hidden_width < 1:
            raise ValidationError("batch_size and hidden_width must be >= 1")
        if self.lr_schedule not in ("cosine", "constant"):
            raise ValidationError(f"unknown lr_schedule {self.lr_schedule!r}")
        if self.anchor_weight < 0:
            raise ValidationError("anchor_weight must be >= 0")

    @property
    def lr(self) -> float:
        return (self.learning_rate if self.learning_rate is not None
                else DEFAULT_LEARNING_RATES[self.mode])

    def lr_at(self, iteration: int) -> float:
        """Step size for 1-based iteration; cosine decay settles the tail."""
        if self.lr_schedule == "constant":
            return self.lr
        frac = (iteration - 1) / max(self.iterations, 1)
        return self.lr * 0.5 * (1.0 + np.cos(np.pi * frac))


class Sgd:
    """Plain fixed-rate gradient descent.

    Deliberately not scale-invariant: the two regimes\' losses carry very
    different gradient magnitudes, and part of what the comparison measures
    is how far each objective pushes the same architecture in the same
    number of steps.
    """

    def __init__(self, size: int):
        pass

    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        return theta - lr * grad


class Adam:
    """Per-parameter adaptive step scaling on the flat parameter vector."""

    def __init__(self, size: int,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return theta - lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _make_optimizer(config: "TrainConfig", size: int):
    return Adam(size) if config.optimizer == "adam" else Sgd(size)


@dataclass
class TrainResult:
    params: ForecasterParams
    trace: list[dict] = field(default_factory=list)
    n_skipped: int = 0


# ---------------------------------------------------------------------------
# two-step regime


def train_two_step(dataset: Dataset, config: TrainConfig) -> TrainResult:
    """Fit the forecaster to demands by mean squared error."""
    if len(dataset) == 0:
        raise ValidationError("dataset is empty")
    n = dataset.n_customers
    rng = np.random.default_rng(config.seed)
    center, scale = input_stats(dataset.prices)
    params = init_params(n, config.hidden_width, rng,
                         b3_init=dataset.demands.mean(axis=0),
                         input_center=center, input_scale=scale)
    theta = params.to_vector()
    opt = _make_optimizer(config, theta.size)
    trace = []

    for it in range(1, config.iterations + 1):
        idx = rng.integers(0, len(dataset), config.batch_size)
        C = dataset.prices[idx]
        E = dataset.demands[idx]
        params = params.with_vector(theta)
        e_hat, cache = _forward(params, C, soft=True)
        err = e_hat - E
        loss = float((err * err).mean())
        if not np.isfinite(loss) or loss > 1e12:
            raise TrainingDivergedError(
                f"two-step training diverged at iteration {it} (loss={loss:g})")
        grad = _backward(params, cache, 2.0 * err / err.size)
        theta = opt.step(theta, grad, config.lr_at(it))

        full_pred, _ = _forward(params, dataset.prices, soft=False)
        rmse = float(np.sqrt(((full_pred - dataset.demands) ** 2).mean()))
        trace.append({"iter": it, "loss": rmse, "cost_mean": float("nan")})

    return TrainResult(params=params.with_vector(theta), trace=trace)


# ---------------------------------------------------------------------------
# end-to-end regime


def train_e2e(dataset: Dataset, station: StationConfig,
              sessions: list[Session], config: TrainConfig,
              settings: SolverSettings | None = None) -> TrainResult:
    """Train the forecaster against the realized scheduling cost.

    Each iteration forecasts a mini-batch, solves one QP per sample,
    differentiates the realized cost through the optimum, and applies one
    optimizer step on the averaged parameter gradient.  A prediction-error
    anchor (``config.anchor_weight``) is mixed into the training gradient:
    the realized cost is flat wherever capacity limits the schedule, and
    without the anchor those directions of the forecaster are untrained
    and generalize poorly.  The recorded trace stays the realized cost.
    """
    if len(dataset) == 0:
        raise ValidationError("dataset is empty")
    if dataset.n_customers != station.N:
        raise ValidationError("dataset and station disagree on customer count")
    settings = settings or SolverSettings()
    n = station.N
    rng = np.random.default_rng(config.seed)
    center, scale = input_stats(dataset.prices)
    params = init_params(n, config.hidden_width, rng,
                         b3_init=dataset.demands.mean(axis=0),
                         input_center=center, input_scale=scale)
    theta = params.to_vector()
    opt = _make_optimizer(config, theta.size)
    trace = []
    skipped = 0
    processed = 0

    for it in range(1, config.iterations + 1):
        idx = rng.integers(0, len(dataset), config.batch_size)
        params = params.with_vector(theta)
        C = dataset.prices[idx]
        E = dataset.demands[idx]
        e_hat, cache = _forward(params, C, soft=True)

        upstream = np.zeros_like(C)
        costs = []
        used = np.zeros(len(idx), dtype=bool)
        for k in range(len(idx)):
            priced = with_selling_prices(sessions, C[k])
            problem = build_qp(station, priced, e_hat[k])
            sol = solve_qp(problem, settings)
            processed += 1
            if sol.status != "converged":
                skipped += 1
                continue
            loss = task_loss(sol.x_star, E[k], station, priced)
            system = assemble_kkt_system(problem, sol)
            upstream[k] = grad_wrt_e_hat(system, loss.grad_x)
            if config.anchor_weight > 0:
                upstream[k] += (2.0 * config.anchor_weight * station.beta
                                * (e_hat[k] - E[k]))
            costs.append(loss.loss)
            used[k] = True

        if skipped > 0.05 * processed and skipped > 2:
            raise TooManySkippedSamplesError(
                f"{skipped}/{processed} QP solves failed during training")
        if not np.any(used):
            trace.append({"iter": it, "loss": float("nan"),
                          "cost_mean": float("nan")})
            continue
        cost_mean = float(np.mean(costs))
        if not np.isfinite(cost_mean) or cost_mean > 1e12:
            raise TrainingDivergedError(
                f"end-to-end training diverged at iteration {it}")
        grad = _backward(params, cache, upstream / used.sum())
        theta = opt.step(theta, grad, config.lr_at(it))
        trace.append({"iter": it, "loss": cost_mean, "cost_mean": cost_mean})

    return TrainResult(params=params.with_vector(theta), trace=trace,
                       n_skipped=skipped)


def e2e_loss_and_theta_grad(params: ForecasterParams, c: np.ndarray,
                            e_true: np.ndarray, station: StationConfig,
                            sessions: list[Session],
                            settings: SolverSettings | None = None):
    """Single-sample pipeline loss and its flat parameter gradient.

    Exposed for gradient verification: the same path training takes, kept
    side-effect free.
    """
    settings = settings or SolverSettings()
    priced = with_selling_prices(sessions, c)
    e_hat, cache = _forward(params, np.asarray(c, float)[None, :], soft=True)
    problem = build_qp(station, priced, e_hat[0])
    sol = solve_qp(problem, settings)
    if sol.status != "converged":
        raise RuntimeError("QP solve failed")
    loss = task_loss(sol.x_star, e_true, station, priced)
    system = assemble_kkt_system(problem, sol)
    d_e_hat = grad_wrt_e_hat(system, loss.grad_x)
    grad = _backward(params, cache, d_e_hat[None, :])
    return loss.loss, grad


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalReport:
    """Test-set metrics; cost decomposes as -profit + completion + smooth."""

    mean_cost: float
    std_cost: float
    mean_profit: float
    std_profit: float
    mean_completion: float
    std_completion: float
    mean_smooth: float
    std_smooth: float
    rmse: float
    mean_ground_truth: float
    per_sample: dict = field(default_factory=dict)
    n_excluded: int = 0

    def to_dict(self) -> dict:
        out = asdict(self)
        out["per_sample"] = {k: list(map(float, v))
                             for k, v in self.per_sample.items()}
        return out


def evaluate(params: ForecasterParams | None, test_set: Dataset,
             station: StationConfig, sessions: list[Session],
             oracle: bool = False,
             settings: SolverSettings | None = None) -> EvalReport:
    """Schedule on forecasts for every test sample and score the outcome.

    With ``oracle=True`` the true demands stand in for the forecaster,
    which reproduces the ground-truth reference exactly.
    """
    if not oracle and params is None:
        raise ValidationError("need forecaster parameters unless oracle=True")
    settings = settings or SolverSettings()
    cols = ("cost", "profit", "completion", "smooth", "ground_truth")
    per = {k: [] for k in cols}
    sq_err = []
    excluded = 0

    for k in range(len(test_set)):
        c = test_set.prices[k]
        e_true = test_set.demands[k]
        priced = with_selling_prices(sessions, c)
        e_hat = e_true if oracle else forecast(params, c)

        sol = solve_qp(build_qp(station, priced, e_hat), settings)
        sol_gt = solve_qp(build_qp(station, priced, e_true), settings)
        if sol.status != "converged" or sol_gt.status != "converged":
            excluded += 1
            continue
        loss = task_loss(sol.x_star, e_true, station, priced)
        gt = task_loss(sol_gt.x_star, e_true, station, priced)
        per["cost"].append(loss.loss)
        per["profit"].append(loss.profit)
        per["completion"].append(loss.completion_penalty)
        per["smooth"].append(loss.smooth_penalty)
        per["ground_truth"].append(gt.loss)
        sq_err.append(((e_hat - e_true) ** 2).mean())

    if not per["cost"]:
        raise RuntimeError("all test samples were excluded")
    arr = {k: np.array(v) for k, v in per.items()}
    return EvalReport(
        mean_cost=float(arr["cost"].mean()), std_cost=float(arr["cost"].std()),
        mean_profit=float(arr["profit"].mean()), std_profit=float(arr["profit"].std()),
        mean_completion=float(arr["completion"].mean()),
        std_completion=float(arr["completion"].std()),
        mean_smooth=float(arr["smooth"].mean()), std_smooth=float(arr["smooth"].std()),
        rmse=float(np.sqrt(np.mean(sq_err))),
        mean_ground_truth=float(arr["ground_truth"].mean()),
        per_sample=per, n_excluded=excluded)


# ---------------------------------------------------------------------------
# method comparison grid


@dataclass
class ComparisonRow:
    size: int
    mode: str
    cost_mean: float
    cost_std: float
    profit_mean: float
    completion_mean: float
    smooth_mean: float
    rmse_mean: float
    per_seed_cost: list[float] = field(default_factory=list)


@dataclass
class ComparisonResult:
    rows: list[ComparisonRow]
    improvements: dict[int, float]
    ground_truth: float

    def row(self, size: int, mode: str) -> ComparisonRow:
        for r in self.rows:
            if r.size == size and r.mode == mode:
                return r
        raise KeyError((size, mode))


def _run_cell(args):
    train_set, test_set, station, sessions, config, size, seed = args
    cfg = replace(config, seed=seed)
    try:
        # the dense factorizations here are fastest single-threaded, and
        # grid cells already run one per worker
        from threadpoolctl import threadpool_limits
        ctx = threadpool_limits(limits=1)
    except ImportError:
        ctx = None
    try:
        subset = train_set.subset(size)
        if cfg.mode == "two_step":
            result = train_two_step(subset, cfg)
        else:
            result = train_e2e(subset, station, sessions, cfg)
        report = evaluate(result.params, test_set, station, sessions)
    except Exception as exc:  # collected so the grid can dump partial results
        return ("error", size, cfg.mode, seed, f"{type(exc).__name__}: {exc}")
    finally:
        if ctx is not None:
            ctx.unregister()
    return (size, cfg.mode, seed, report.mean_cost, report.mean_profit,
            report.mean_completion, report.mean_smooth, report.rmse,
            report.mean_ground_truth)


def compare_runs(train_set: Dataset, test_set: Dataset,
                 station: StationConfig, sessions: list[Session],
                 config: TrainConfig, sizes=(200, 400, 600, 800),
                 n_seeds: int = 5, jobs: int = 1) -> ComparisonResult:
    """Train both regimes over a grid of training sizes and seeds.

    Every cell is independent and seeded, so the grid may run on several
    workers without changing any number.
    """
    if len(train_set) < max(sizes):
        raise ValidationError(
            f"training set has {len(train_set)} samples, need {max(sizes)}")
    cells = [(train_set, test_set, station, sessions,
              replace(config, mode=mode), size, config.seed + k)
             for size in sizes for mode in ("e2e", "two_step")
             for k in range(n_seeds)]

    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_run_cell, cells))
    else:
        outcomes = [_run_cell(cell) for cell in cells]

    failures = [o for o in outcomes if o[0] == "error"]
    if failures:
        raise ComparisonCellError(failures,
                                  [o for o in outcomes if o[0] != "error"])

    rows = []
    ground_truth = outcomes[0][8]
    for size in sizes:
        for mode in ("e2e", "two_step"):
            cell = [o for o in outcomes if o[0] == size and o[1] == mode]
            costs = [o[3] for o in cell]
            rows.append(ComparisonRow(
                size=size, mode=mode,
                cost_mean=float(np.mean(costs)), cost_std=float(np.std(costs)),
                profit_mean=float(np.mean([o[4] for o in cell])),
                completion_mean=float(np.mean([o[5] for o in cell])),
                smooth_mean=float(np.mean([o[6] for o in cell])),
                rmse_mean=float(np.mean([o[7] for o in cell])),
                per_seed_cost=costs))
    result = ComparisonResult(rows=rows, improvements={}, ground_truth=ground_truth)
    for size in sizes:
        result.improvements[size] = (result.row(size, "two_step").cost_mean
                                     - result.row(size, "e2e").cost_mean)
    return result


# ---------------------------------------------------------------------------
# persistence


CHECKPOINT_VERSION = 1


def save_checkpoint(path: str | Path, params: ForecasterParams,
                    config: TrainConfig) -> None:
    blob = {
        "version": CHECKPOINT_VERSION,
        "train_config": asdict(config),
        "params": {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                   for k, v in asdict(params).items()},
    }
    Path(path).write_text(json.dumps(blob, indent=2) + "\n")


def load_checkpoint(path: str | Path) -> tuple[ForecasterParams, TrainConfig]:
    blob = json.loads(Path(path).read_text())
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ValidationError(f"unsupported checkpoint version {blob.get('version')}")
    raw = blob["params"]
    params = ForecasterParams(
        w1=np.array(raw["w1"]), b1=np.array(raw["b1"]),
        w2=np.array(raw["w2"]), b2=np.array(raw["b2"]),
        w3=np.array(raw["w3"]), b3=np.array(raw["b3"]),
        gain=float(raw["gain"]),
        input_center=np.array(raw["input_center"]),
        input_scale=np.array(raw["input_scale"]))
    config = TrainConfig(**blob["train_config"])
    return params, config


def write_trace_csv(path: str | Path, trace: list[dict]) -> None:
    lines = ["iter,loss,cost_mean"]
    for row in trace:
        lines.append(f"{row['iter']},{row['loss']!r},{row['cost_mean']!r}")
    Path(path).write_text("\n".join(lines) + "\n")
