"""Feedforward sigmoid classifier trained with backprop (SGD or Adam)."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DataError, NumericalError, StructureError

BCE_EPS = 1e-12
DEFAULT_LAYERS = (8, 16, 8, 4, 1)


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple = DEFAULT_LAYERS

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2 or any(s < 1 for s in sizes):
            raise StructureError(f"invalid layer sizes {sizes}")
        if sizes[-1] != 1:
            raise StructureError("output layer must have exactly one unit")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_layers(self):
        return len(self.layer_sizes) - 1

    @property
    def shapes(self):
        """(out, in) for every layer."""
        s = self.layer_sizes
        return [(s[i + 1], s[i]) for i in range(self.n_layers)]

    @property
    def segment_lengths(self):
        return [o * i + o for o, i in self.shapes]

    @property
    def n_params(self):
        return sum(self.segment_lengths)


@dataclass
class MlpModel:
    spec: MlpSpec
    weights: list
    biases: list

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in self.biases]
        if len(self.weights) != self.spec.n_layers or len(self.biases) != self.spec.n_layers:
            raise StructureError("layer count does not match spec")
        for k, (shape, w, b) in enumerate(zip(self.spec.shapes, self.weights, self.biases)):
            if w.shape != shape or b.shape != (shape[0],):
                raise StructureError(f"layer {k}: got W{w.shape} b{b.shape}, expected {shape}")

    def copy(self):
        return MlpModel(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def __eq__(self, other):
        if not isinstance(other, MlpModel) or self.spec != other.spec:
            return NotImplemented
        return all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights)) and all(
            np.array_equal(a, b) for a, b in zip(self.biases, other.biases))


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 0.01
    epochs: int = 200
    batch_size: int = 10
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seed: int = 0

    def validate(self, n=None):
        if self.optimizer not in ("sgd", "adam"):
            raise DataError(f"unknown optimizer {self.optimizer!r}")
        if self.learning_rate < 0:
            raise DataError("learning_rate must be non-negative")
        if self.epochs < 1:
            raise DataError("epochs must be >= 1")
        if self.batch_size < 1 or (n is not None and self.batch_size > n):
            raise DataError(f"batch_size must be in [1, {n}]")


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def init_model(spec: MlpSpec, seed) -> MlpModel:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fout, fin in spec.shapes:
        r = np.sqrt(6.0 / (fin + fout))
        weights.append(rng.uniform(-r, r, size=(fout, fin)))
        biases.append(np.zeros(fout))
    return MlpModel(spec, weights, biases)


def _activations(model, X):
    acts = [X]
    a = X
    for W, b in zip(model.weights, model.biases):
        a = sigmoid(a @ W.T + b)
        acts.append(a)
    return acts


def forward(model: MlpModel, x):
    """Probability of class 1 for one sample (1-D ``x``) or each row of ``x``."""
    x = np.asarray(x, dtype=np.float64)
    n_in = model.spec.layer_sizes[0]
    if x.shape[-1] != n_in or x.ndim not in (1, 2):
        raise StructureError(f"input has shape {x.shape}, expected trailing size {n_in}")
    out = _activations(model, np.atleast_2d(x))[-1][:, 0]
    return float(out[0]) if x.ndim == 1 else out


def bce_loss(p, y):
    """Binary cross entropy with the probability clamped to [eps, 1 - eps]."""
    p = np.clip(p, BCE_EPS, 1.0 - BCE_EPS)
    loss = -(y * np.log(p) + (1 - y) * np.log(1.0 - p))
    return float(loss) if np.ndim(loss) == 0 else loss


def gradients(model: MlpModel, X, y):
    """Backprop gradients of mean BCE over the batch.

    Returns ``(dW, db)`` lists shaped like ``model.weights`` / ``model.biases``.
    The clamp in :func:`bce_loss` is ignored here (it is inactive away from
    saturation), so sigmoid+BCE at the output reduces to ``p - y``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if X.shape[0] == 0:
        raise DataError("empty batch")
    m = X.shape[0]
    acts = _activations(model, X)
    delta = (acts[-1][:, 0] - y)[:, None] / m
    dW = [None] * model.spec.n_layers
    db = [None] * model.spec.n_layers
    for k in range(model.spec.n_layers - 1, -1, -1):
        dW[k] = delta.T @ acts[k]
        db[k] = delta.sum(axis=0)
        if k:
            a = acts[k]
            delta = (delta @ model.weights[k]) * a * (1.0 - a)
    return dW, db


def mean_loss(model, X, y):
    return float(np.mean(bce_loss(forward(model, X), np.asarray(y))))


def train(model: MlpModel, data, cfg: TrainConfig):
    """Mini-batch training; returns ``(trained_model, per_epoch_loss)``.

    The recorded loss for an epoch is the size-weighted mean of its batch
    losses (measured before each update).
    """
    X, y = data.features, data.labels.astype(np.float64)
    n = X.shape[0]
    cfg.validate(n)
    model = model.copy()
    params = model.weights + model.biases
    rng = np.random.default_rng(cfg.seed)
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]
    lr, b1, b2, eps = cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon
    step = 0
    history = []
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            xb, yb = X[idx], y[idx]
            total += float(np.sum(bce_loss(forward(model, xb), yb)))
            dW, db = gradients(model, xb, yb)
            grads = dW + db
            step += 1
            if cfg.optimizer == "sgd":
                for p, g in zip(params, grads):
                    p -= lr * g
            else:
                for p, g, m_, v_ in zip(params, grads, m_state, v_state):
                    m_ *= b1
                    m_ += (1.0 - b1) * g
                    v_ *= b2
                    v_ += (1.0 - b2) * g * g
                    m_hat = m_ / (1.0 - b1 ** step)
                    v_hat = v_ / (1.0 - b2 ** step)
                    p -= lr * m_hat / (np.sqrt(v_hat) + eps)
        loss = total / n
        if not np.isfinite(loss):
            raise NumericalError(f"non-finite training loss at epoch {epoch}", epoch=epoch)
        history.append(loss)
    return model, history


def model_to_dict(model: MlpModel):
    return {
        "format": "mctsga-model/1",
        "layer_sizes": list(model.spec.layer_sizes),
        "activation": "sigmoid",
        "weights": [w.ravel().tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }


def model_from_dict(d) -> MlpModel:
    spec = MlpSpec(tuple(d["layer_sizes"]))
    weights = [np.array(w, dtype=np.float64).reshape(shape) for w, shape in zip(d["weights"], spec.shapes)]
    return MlpModel(spec, weights, [np.array(b, dtype=np.float64) for b in d["biases"]])


def save_model(model: MlpModel, path):
    # json writes floats with repr, so the round trip is exact
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh, indent=1)


def load_model(path) -> MlpModel:
    with open(path, encoding="utf-8") as fh:
        d = json.load(fh)
    if "segments" in d:
        from .genome import genome_from_dict, decode
        g = genome_from_dict(d)
        return decode(g, MlpSpec(tuple(d["layer_sizes"])))
    return model_from_dict(d)
