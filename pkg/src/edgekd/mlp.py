"""Feedforward network with ReLU hidden layers and a grouped softmax head.

The output layer has ``num_groups * group_size`` units; softmax is applied to
each consecutive block of ``group_size`` logits independently, giving one
class distribution per group. Training minimises per-group cross-entropy
(summed over groups, averaged over the batch) with Adam or plain gradient
descent. Everything runs in float64.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Architecture",
    "MlpModel",
    "TrainConfig",
    "ModelFormatError",
    "init_model",
    "forward",
    "forward_logits",
    "grouped_softmax",
    "loss",
    "grad",
    "train",
    "param_count",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
]

MODEL_SCHEMA = "edgekd.mlp"
MODEL_SCHEMA_VERSION = 1
PROB_FLOOR = 1e-12
_TINY = np.finfo(np.float64).tiny


class ModelFormatError(ValueError):
    pass


@dataclass(frozen=True)
class Architecture:
    input_dim: int
    hidden: tuple[int, ...]
    num_groups: int
    group_size: int = 3

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        dims = (self.input_dim, *self.hidden, self.num_groups, self.group_size)
        if any(int(d) < 1 for d in dims):
            raise ValueError(f"all widths must be >= 1: {self}")

    @property
    def output_dim(self) -> int:
        return self.num_groups * self.group_size

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        sizes = [self.input_dim, *self.hidden, self.output_dim]
        return list(zip(sizes[:-1], sizes[1:]))


@dataclass
class MlpModel:
    arch: Architecture
    weights: list[np.ndarray]  # (fan_in, fan_out) each
    biases: list[np.ndarray]

    def __post_init__(self):
        dims = self.arch.layer_dims
        if len(self.weights) != len(dims) or len(self.biases) != len(dims):
            raise ValueError(f"expected {len(dims)} layers")
        for i, ((fi, fo), w, b) in enumerate(zip(dims, self.weights, self.biases)):
            if w.shape != (fi, fo) or b.shape != (fo,):
                raise ValueError(
                    f"layer {i}: expected W{(fi, fo)} b{(fo,)}, got W{w.shape} b{b.shape}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i} has non-finite parameters")

    @property
    def params(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpModel":
        return MlpModel(self.arch, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def equals(self, other: "MlpModel") -> bool:
        return self.arch == other.arch and all(
            np.array_equal(p, q) for p, q in zip(self.params, other.params)
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 128
    epochs: int = 100
    seed: int = 0
    val_fraction: float = 0.1
    patience: int = 10
    optimizer: str = "adam"  # or "sgd"
    weight_decay: float = 0.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not 0 <= self.val_fraction < 1:
            raise ValueError("val_fraction must lie in [0, 1)")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def param_count(arch: Architecture) -> int:
    return sum(fi * fo + fo for fi, fo in arch.layer_dims)


def init_model(arch: Architecture, rng: np.random.Generator) -> MlpModel:
    """He-normal weights, zero biases."""
    weights, biases = [], []
    for fi, fo in arch.layer_dims:
        weights.append(rng.normal(0.0, math.sqrt(2.0 / fi), size=(fi, fo)))
        biases.append(np.zeros(fo))
    return MlpModel(arch, weights, biases)


def grouped_softmax(logits: np.ndarray, group_size: int = 3) -> np.ndarray:
    """Softmax over consecutive blocks of the last axis; returns (..., G, group_size)."""
    z = logits.reshape(*logits.shape[:-1], -1, group_size)
    z = z - z.max(axis=-1, keepdims=True)
    # floor keeps every class strictly positive when exp underflows (gaps > ~745)
    e = np.maximum(np.exp(z), _TINY)
    return e / e.sum(axis=-1, keepdims=True)


def _as_batch(model: MlpModel, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.arch.input_dim:
        raise ValueError(f"expected {model.arch.input_dim} features, got shape {x.shape}")
    return x, single


def forward_logits(model: MlpModel, x: np.ndarray) -> np.ndarray:
    h, single = _as_batch(model, x)
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h[0] if single else h


def forward(model: MlpModel, x: np.ndarray) -> np.ndarray:
    """Per-group class probabilities: (G, C) for one input, (N, G, C) for a batch."""
    return grouped_softmax(forward_logits(model, x), model.arch.group_size)


def _check_target(model: MlpModel, target: np.ndarray, n: int) -> np.ndarray:
    target = np.asarray(target, dtype=np.float64)
    shape = (n, model.arch.num_groups, model.arch.group_size)
    if target.shape != shape:
        target = target.reshape(shape) if target.size == math.prod(shape) else None
    if target is None:
        raise ValueError(f"target shape does not match {shape}")
    return target


def loss(model: MlpModel, features, target) -> float:
    """Mean over the batch of the summed per-group cross-entropy."""
    x, _ = _as_batch(model, features)
    t = _check_target(model, target, x.shape[0])
    p = forward(model, x)
    return float(-(t * np.log(np.maximum(p, PROB_FLOOR))).sum() / x.shape[0])


def _backprop(model: MlpModel, x: np.ndarray, t: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    p = grouped_softmax(h, model.arch.group_size)
    n = x.shape[0]
    # d(CE)/d(logits) for softmax with normalised targets
    delta = ((p - t) * t.sum(axis=-1, keepdims=True)).reshape(n, -1) / n
    gw = [None] * len(model.weights)
    gb = [None] * len(model.weights)
    for i in range(last, -1, -1):
        gw[i] = acts[i].T @ delta
        gb[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (pre[i - 1] > 0)
    batch_loss = float(-(t * np.log(np.maximum(p, PROB_FLOOR))).sum() / n)
    return gw, gb, batch_loss


def grad(model: MlpModel, features, target) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Gradients of :func:`loss` w.r.t. (weights, biases)."""
    x, _ = _as_batch(model, features)
    if x.shape[0] == 0:
        raise ValueError("empty batch")
    t = _check_target(model, target, x.shape[0])
    gw, gb, _ = _backprop(model, x, t)
    return gw, gb


@dataclass
class _Adam:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def update(self, params, grads):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        self.step += 1
        c1 = 1 - self.beta1**self.step
        c2 = 1 - self.beta2**self.step
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * g
            v *= self.beta2
            v += (1 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(
    arch: Architecture,
    features: np.ndarray,
    targets: np.ndarray,
    cfg: TrainConfig = TrainConfig(),
    *,
    init: MlpModel | None = None,
    history: list | None = None,
) -> MlpModel:
    """Fit a model and return the parameters with the best validation loss.

    ``targets`` has shape (N, num_groups, group_size) with rows summing to 1
    (one-hot for hard labels). Initialisation, the validation split and the
    minibatch order all derive from ``cfg.seed``. With ``val_fraction == 0``
    the final parameters are returned. If ``history`` is given, one
    ``(train_loss, val_loss)`` tuple per epoch is appended to it.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("training needs a nonempty 2-D feature array")
    if x.shape[1] != arch.input_dim:
        raise ValueError(f"features have {x.shape[1]} columns, architecture expects {arch.input_dim}")
    y = np.asarray(targets, dtype=np.float64).reshape(x.shape[0], arch.num_groups, arch.group_size)

    rng = np.random.default_rng(cfg.seed)
    model = init.copy() if init is not None else init_model(arch, rng)
    if init is not None and init.arch != arch:
        raise ValueError("init model architecture differs from arch")

    n = x.shape[0]
    order = rng.permutation(n)
    n_val = int(round(n * cfg.val_fraction)) if n > 1 else 0
    n_val = min(n_val, n - 1)
    val_idx, tr_idx = order[:n_val], order[n_val:]
    x_tr, y_tr = x[tr_idx], y[tr_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    opt = _Adam(cfg.learning_rate) if cfg.optimizer == "adam" else None
    best = model.copy()
    best_val = loss(model, x_val, y_val) if n_val else math.inf
    stale = 0
    params = model.params
    m = x_tr.shape[0]
    for _ in range(cfg.epochs):
        perm = rng.permutation(m)
        epoch_loss = 0.0
        for start in range(0, m, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            gw, gb, bl = _backprop(model, x_tr[idx], y_tr[idx])
            epoch_loss += bl * len(idx)
            grads = []
            for w, b, dw, db in zip(model.weights, model.biases, gw, gb):
                if cfg.weight_decay:
                    dw = dw + cfg.weight_decay * w
                grads += [dw, db]
            if opt is not None:
                opt.update(params, grads)
            else:
                for p, g in zip(params, grads):
                    p -= cfg.learning_rate * g
        if not all(np.all(np.isfinite(p)) for p in params):
            raise FloatingPointError("training diverged: non-finite parameters")
        val = loss(model, x_val, y_val) if n_val else math.nan
        if history is not None:
            history.append((epoch_loss / m, val))
        if n_val:
            if val < best_val:
                best_val, best, stale = val, model.copy(), 0
            else:
                stale += 1
                if cfg.patience and stale >= cfg.patience:
                    break
    return best if n_val else model


# -- serialization ----------------------------------------------------------------


def model_to_dict(model: MlpModel) -> dict:
    a = model.arch
    return {
        "schema": MODEL_SCHEMA,
        "version": MODEL_SCHEMA_VERSION,
        "arch": {
            "input_dim": a.input_dim,
            "hidden": list(a.hidden),
            "num_groups": a.num_groups,
            "group_size": a.group_size,
        },
        "layers": [
            {"weight": w.ravel().tolist(), "bias": b.tolist()}
            for w, b in zip(model.weights, model.biases)
        ],
    }


def model_from_dict(d: dict) -> MlpModel:
    if not isinstance(d, dict) or d.get("schema") != MODEL_SCHEMA:
        raise ModelFormatError(f"not an {MODEL_SCHEMA} document")
    if d.get("version") != MODEL_SCHEMA_VERSION:
        raise ModelFormatError(
            f"model schema version {d.get('version')!r} is not supported "
            f"(expected {MODEL_SCHEMA_VERSION})"
        )
    try:
        arch = Architecture(**d["arch"])
        layers = d["layers"]
        if len(layers) != len(arch.layer_dims):
            raise ModelFormatError(f"expected {len(arch.layer_dims)} layers, found {len(layers)}")
        ws, bs = [], []
        for (fi, fo), layer in zip(arch.layer_dims, layers):
            w = np.asarray(layer["weight"], dtype=np.float64)
            if w.size != fi * fo:
                raise ModelFormatError(f"weight has {w.size} values, expected {fi * fo}")
            ws.append(w.reshape(fi, fo))
            bs.append(np.asarray(layer["bias"], dtype=np.float64))
        return MlpModel(arch, ws, bs)
    except ModelFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"invalid model document: {exc}") from None


def save_model(model: MlpModel, path) -> None:
    from .workload import atomic_write_text

    atomic_write_text(path, json.dumps(model_to_dict(model), sort_keys=True))


def load_model(path) -> MlpModel:
    with open(path, encoding="utf-8") as fh:
        try:
            return model_from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"malformed model file: {exc}") from None
