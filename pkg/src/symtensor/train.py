"""Synthetic tasks, SGD training, the dense MLP baseline and the speed benchmark."""

from __future__ import annotations

import csv
import io
import math
import statistics
import time
from dataclasses import dataclass, field

import numpy as np

from . import basis
from .bipart import generate_bipartitions
from .layer import EquivariantLayer
from .symidx import full_to_compressed, multiplicities, num_indices, rank

# ---------------------------------------------------------------------------
# data


@dataclass
class Dataset:
    inputs: np.ndarray  # (count, N_k) compressed
    targets: np.ndarray  # (count, N_l) compressed; l = 0 gives one column
    n: int
    k: int
    l: int
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.inputs)

    def subset(self, idx) -> "Dataset":
        return Dataset(self.inputs[idx], self.targets[idx], self.n, self.k, self.l, self.seed, dict(self.meta))


def _unrolled(x: np.ndarray, n: int, k: int) -> np.ndarray:
    return x[:, full_to_compressed(n, k)].reshape((len(x),) + (n,) * k)


def gen_invariant_task(n: int = 12, count: int = 5000, seed: int = 0) -> Dataset:
    """Order-3 inputs with target sum_{i,j} T[i,j,i]."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, num_indices(n, 3)))
    y = np.einsum("biji->b", _unrolled(x, n, 3))[:, None]
    return Dataset(x, y, n, 3, 0, seed, {"task": "invariant", "inputs": "iid standard normal, compressed"})


def gen_equivariant_task(n: int = 8, count: int = 10000, seed: int = 0) -> Dataset:
    """Order-3 inputs with target y_i = T[i,i,i]."""
    if n < 1:
        raise ValueError(f"n must be positive, got {n}")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((count, num_indices(n, 3)))
    diag = [rank((i, i, i), n) for i in range(1, n + 1)]
    return Dataset(x, x[:, diag].copy(), n, 3, 1, seed, {"task": "equivariant", "inputs": "iid standard normal, compressed"})


def split(data: Dataset, frac: float, rng: np.random.Generator) -> tuple[Dataset, Dataset]:
    if not 0 < frac < 1:
        raise ValueError(f"split must lie in (0, 1), got {frac}")
    perm = rng.permutation(len(data))
    cut = int(round(frac * len(data)))
    return data.subset(perm[:cut]), data.subset(perm[cut:])


# ---------------------------------------------------------------------------
# models
#
# Each model prepares a dataset once (features it can reuse across epochs),
# predicts on a batch of prepared rows and returns parameter gradients.
# Losses are means over batch and unrolled output entries.


class LayerModel:
    def __init__(self, layer: EquivariantLayer, n: int):
        self.layer = layer
        self.n = n
        self.weights = multiplicities(n, layer.l).astype(np.float64)
        self.norm = float(n**layer.l)

    @property
    def params(self) -> np.ndarray:
        return self.layer.lambdas

    def prepare(self, data: Dataset):
        return self.layer.basis_features(data.inputs, data.n), data.targets

    def take(self, prep, idx):
        feats, y = prep
        return feats[:, idx], y[idx]

    def predict(self, feats) -> np.ndarray:
        return np.einsum("p,pbi->bi", self.layer.lambdas, feats)

    def grad(self, feats, upstream) -> np.ndarray:
        return np.einsum("bi,pbi->p", upstream * self.weights, feats)


class MLP:
    """Dense linear map on unrolled tensors, no bias."""

    def __init__(self, n: int, k: int, l: int, rng: np.random.Generator | None = None, weights=None):
        self.n, self.k, self.l = n, k, l
        fan_in, fan_out = n**k, n**l
        if weights is None:
            rng = rng or np.random.default_rng(0)
            weights = rng.standard_normal((fan_out, fan_in)) / math.sqrt(fan_in)
        self.W = np.asarray(weights, dtype=np.float64)
        if self.W.shape != (fan_out, fan_in):
            raise ValueError(f"weights must have shape {(fan_out, fan_in)}, got {self.W.shape}")
        self.weights = np.ones(fan_out)
        self.norm = float(fan_out)

    @property
    def params(self) -> np.ndarray:
        return self.W

    @property
    def num_params(self) -> int:
        return self.W.size

    def prepare(self, data: Dataset):
        xf = data.inputs[:, full_to_compressed(data.n, data.k)]
        yf = data.targets[:, full_to_compressed(data.n, data.l)]
        return xf, yf

    def take(self, prep, idx):
        xf, y = prep
        return xf[idx], y[idx]

    def predict(self, xf) -> np.ndarray:
        return xf @ self.W.T

    def grad(self, xf, upstream) -> np.ndarray:
        return upstream.T @ xf


def mlp_baseline(in_shape: tuple[int, int], out_shape: tuple[int, int], rng: np.random.Generator | None = None) -> MLP:
    """``in_shape = (n, k)``, ``out_shape = (n, l)``."""
    (n, k), (n2, l) = in_shape, out_shape
    if n != n2:
        raise ValueError(f"input and output dimensions differ: {n} vs {n2}")
    return MLP(n, k, l, rng)


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    epochs: int = 50
    batch_size: int = 50
    seed: int = 0
    split: float = 0.9

    def __post_init__(self):
        if self.learning_rate <= 0 or self.epochs < 1 or self.batch_size < 1:
            raise ValueError(f"hyperparameters must be positive: {self}")
        if not 0 < self.split < 1:
            raise ValueError(f"split must lie in (0, 1), got {self.split}")


@dataclass
class TrainResult:
    model: object
    curve: list[tuple[int, float, float]]
    test_mse: float

    def curve_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "train_mse", "test_mse"])
        for row in self.curve:
            w.writerow([row[0], repr(row[1]), repr(row[2])])
        return buf.getvalue()


def _mse(model, batch, y) -> float:
    err = model.predict(batch) - y
    return float(np.sum(err**2 * model.weights) / (len(y) * model.norm))


def sgd_train(model, train: Dataset, test: Dataset, cfg: TrainConfig) -> TrainResult:
    """Plain minibatch SGD; the model's parameters are updated in place.

    Raises FloatingPointError if the loss stops being finite.
    """
    rng = np.random.default_rng(cfg.seed)
    tr = model.prepare(train)
    te = model.prepare(test)
    all_tr = np.arange(len(train))
    all_te = np.arange(len(test))
    curve = []
    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(train))
        # overflow shows up as a non-finite loss below
        with np.errstate(over="ignore", invalid="ignore"):
            for s in range(0, len(order), cfg.batch_size):
                batch, y = model.take(tr, order[s : s + cfg.batch_size])
                err = model.predict(batch) - y
                upstream = 2.0 * err / (len(y) * model.norm)
                model.params[...] -= cfg.learning_rate * model.grad(batch, upstream)
            tr_mse = _mse(model, *model.take(tr, all_tr))
            te_mse = _mse(model, *model.take(te, all_te)) if len(test) else float("nan")
        if not math.isfinite(tr_mse):
            raise FloatingPointError(f"training diverged at epoch {epoch} (train MSE {tr_mse})")
        curve.append((epoch, tr_mse, te_mse))
    return TrainResult(model, curve, curve[-1][2])


TASKS = {"invariant": (gen_invariant_task, 0), "equivariant": (gen_equivariant_task, 1)}


def train_task(
    task: str,
    model: str,
    n: int,
    count: int,
    cfg: TrainConfig,
    fraction: float = 1.0,
    data: Dataset | None = None,
) -> TrainResult:
    """Generate (or reuse) a task dataset, split it and train one model.

    ``fraction`` keeps that share of the training split; the test split is
    unchanged.  Data and split use ``cfg.seed``; initialisation uses ``cfg.seed + 1``.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}; choose from {sorted(TASKS)}")
    gen, l = TASKS[task]
    if data is None:
        data = gen(n=n, count=count, seed=cfg.seed)
    train, test = split(data, cfg.split, np.random.default_rng(cfg.seed))
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must lie in (0, 1], got {fraction}")
    train = train.subset(np.arange(max(1, int(round(fraction * len(train))))))
    rng = np.random.default_rng(cfg.seed + 1)
    if model == "equivariant":
        m = LayerModel(init_layer(3, l, rng), data.n)
    elif model == "mlp":
        m = MLP(data.n, 3, l, rng)
    else:
        raise ValueError(f"unknown model {model!r}; choose 'equivariant' or 'mlp'")
    return sgd_train(m, train, test, cfg)


def init_layer(k: int, l: int, rng: np.random.Generator, scale: float = 0.1) -> EquivariantLayer:
    layer = EquivariantLayer(k, l)
    layer.lambdas = scale * rng.standard_normal(len(layer))
    return layer


def evaluate_mse(model, data: Dataset) -> float:
    prep = model.prepare(data)
    return _mse(model, *model.take(prep, np.arange(len(data))))


def generalisation_eval(layer: EquivariantLayer, n_values, task: str = "equivariant", count: int = 1000, seed: int = 1) -> dict[int, float]:
    """Test MSE of fixed weights on fresh data at each n, no retraining."""
    gen = gen_equivariant_task if task == "equivariant" else gen_invariant_task
    out = {}
    for i, n in enumerate(n_values):
        data = gen(n=n, count=count, seed=seed + i)
        out[n] = evaluate_mse(LayerModel(layer, n), data)
    return out


# ---------------------------------------------------------------------------
# speed benchmark


def _median_time(fn, reps: int) -> float:
    times = []
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def materialized_forward(lambdas: np.ndarray, x: np.ndarray, n: int, k: int, l: int) -> np.ndarray:
    """Forward through an explicitly built unrolled weight matrix.

    The diagram matrices are constructed from scratch on every call, as a
    weight-matrix layer must do when it does not precompute its basis.
    """
    W = np.zeros((num_indices(n, l), num_indices(n, k)))
    for lam, d in zip(lambdas, generate_bipartitions(k, l, n)):
        m = basis._build(d, n, False, "diagram")
        W[m.rows, m.cols] += lam
    Wu = basis.unroll(W, k, l, n)
    y_full = x[:, full_to_compressed(n, k)] @ Wu.T
    # read the output back at sorted indices
    first = np.unique(full_to_compressed(n, l), return_index=True)[1]
    return y_full[:, first]


def benchmark_apply(k: int, l: int, n: int, reps: int = 5, batch: int = 50, seed: int = 0, max_dense_bytes: int = 2 << 30) -> dict:
    """Median forward times: kernels vs dense unrolled matrices."""
    rng = np.random.default_rng(seed)
    layer = init_layer(k, l, rng)
    x = rng.standard_normal((batch, num_indices(n, k)))
    lam_n = layer.lambdas[: len(generate_bipartitions(k, l, n))]
    result = {"k": k, "l": l, "n": n, "batch": batch, "reps": reps}
    layer.forward(x, n)  # warm caches that are independent of the data
    result["kernel_s"] = _median_time(lambda: layer.forward(x, n), reps)
    dense_bytes = 8 * (n**k) * (n**l + batch)
    if dense_bytes > max_dense_bytes:
        result["dense_s"] = result["dense_cached_s"] = "infeasible"
        return result
    result["dense_s"] = _median_time(lambda: materialized_forward(lam_n, x, n, k, l), reps)
    Wu = basis.unroll(basis.assemble_weight_matrix(basis.WeightMatrix(k, l, n, lam_n)), k, l, n)
    f2c = full_to_compressed(n, k)
    result["dense_cached_s"] = _median_time(lambda: x[:, f2c] @ Wu.T, reps)
    result["speedup"] = result["dense_s"] / result["kernel_s"]
    return result


def benchmark_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    cols = ["k", "l", "n", "batch", "reps", "kernel_s", "dense_s", "dense_cached_s", "speedup"]
    w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n", extrasaction="ignore")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in cols})
    return buf.getvalue()
