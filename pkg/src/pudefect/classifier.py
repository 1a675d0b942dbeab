"""Feature-space binary classifier: two ReLU hidden layers with dropout
between them and a sigmoid output, trained on binary cross-entropy with
Adam and optional MixUp. All math is explicit numpy in float64; training
is bit-deterministic in (dataset, config).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import FeatureMatrix, LabeledDataset
from .errors import ConfigError, DataError, FormatError
from .seeding import derive_seed, make_rng, permutation

_P_CLAMP = 1e-7


@dataclass(frozen=True)
class MlpConfig:
    input_dim: int
    hidden_sizes: tuple[int, int] = (256, 128)
    dropout_rate: float = 0.2
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 50
    mixup_alpha: float = 0.2
    seed: int = 0

    def __post_init__(self) -> None:
        if self.input_dim < 1:
            raise ConfigError("input_dim must be >= 1")
        h1, h2 = self.hidden_sizes
        if h1 < 1 or h2 < 1:
            raise ConfigError("hidden sizes must be >= 1")
        if not (0.0 <= self.dropout_rate < 1.0):
            raise ConfigError("dropout_rate must be in [0, 1)")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be > 0")
        if self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("batch_size must be >= 1 and epochs >= 0")
        if self.mixup_alpha < 0:
            raise ConfigError("mixup_alpha must be >= 0")
        object.__setattr__(self, "hidden_sizes", (int(h1), int(h2)))


@dataclass
class Parameters:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    def arrays(self) -> list[np.ndarray]:
        return [self.W1, self.b1, self.W2, self.b2, self.W3, self.b3]

    def copy(self) -> "Parameters":
        return Parameters(*[a.copy() for a in self.arrays()])


@dataclass
class TrainedClassifier:
    params: Parameters
    config: MlpConfig
    history: list[float] = field(default_factory=list)


@dataclass(frozen=True)
class MixedBatch:
    features: np.ndarray
    targets: np.ndarray
    lambdas: np.ndarray
    partners: np.ndarray


def init_params(config: MlpConfig, seed: int) -> Parameters:
    """Gaussian weights scaled by sqrt(2/fan_in) for the ReLU layers and
    sqrt(1/fan_in) for the output layer; zero biases."""
    rng = make_rng(seed)
    d, (h1, h2) = config.input_dim, config.hidden_sizes
    return Parameters(
        W1=rng.standard_normal((d, h1)) * math.sqrt(2.0 / d),
        b1=np.zeros(h1),
        W2=rng.standard_normal((h1, h2)) * math.sqrt(2.0 / h1),
        b2=np.zeros(h2),
        W3=rng.standard_normal((h2, 1)) * math.sqrt(1.0 / h2),
        b3=np.zeros(1),
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def dropout_mask(
    rng: np.random.Generator, shape: tuple[int, int], rate: float
) -> np.ndarray:
    """Inverted-dropout multipliers: kept units scaled by 1/(1-rate)."""
    if rate <= 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep.astype(np.float64) / (1.0 - rate)


def _as_batch(x: np.ndarray | FeatureMatrix) -> np.ndarray:
    if isinstance(x, FeatureMatrix):
        return x.as_float64()
    arr = np.asarray(x, dtype=np.float64)
    return arr[None, :] if arr.ndim == 1 else arr


def _forward_pass(params: Parameters, X: np.ndarray, mask: np.ndarray | None):
    z1 = X @ params.W1 + params.b1
    a1 = np.maximum(z1, 0.0)
    a1d = a1 if mask is None else a1 * mask
    z2 = a1d @ params.W2 + params.b2
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ params.W3 + params.b3
    p = _sigmoid(z3[:, 0])
    return z1, a1d, z2, a2, p


def forward(
    params: Parameters,
    x: np.ndarray | FeatureMatrix,
    config: MlpConfig,
    mode: str = "eval",
    seed: int | None = None,
    mask: np.ndarray | None = None,
) -> np.ndarray:
    """Probabilities for one row or a batch. Dropout applies only between
    the hidden layers and only in train mode; eval is deterministic."""
    X = _as_batch(x)
    if X.shape[1] != config.input_dim:
        raise DataError(f"expected dimension {config.input_dim}, got {X.shape[1]}")
    if mode == "train" and mask is None and config.dropout_rate > 0.0:
        if seed is None:
            raise ConfigError("train-mode forward needs a seed or explicit mask")
        mask = dropout_mask(make_rng(seed), (X.shape[0], config.hidden_sizes[0]), config.dropout_rate)
    if mode == "eval":
        mask = None
    return _forward_pass(params, X, mask)[-1]


def bce_loss(p: np.ndarray | float, y: np.ndarray | float) -> float:
    """Mean binary cross-entropy; accepts fractional targets for MixUp.
    Probabilities are clamped to [1e-7, 1 - 1e-7]."""
    p = np.clip(np.asarray(p, dtype=np.float64), _P_CLAMP, 1.0 - _P_CLAMP)
    y = np.asarray(y, dtype=np.float64)
    return float(np.mean(-(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))))


def gradients(
    params: Parameters,
    X: np.ndarray | FeatureMatrix,
    y: np.ndarray,
    config: MlpConfig,
    mask: np.ndarray | None = None,
) -> tuple[float, Parameters]:
    """Analytic gradient of the mean BCE with the dropout mask held fixed."""
    X = _as_batch(X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    n = X.shape[0]
    if n == 0:
        raise DataError("gradient of an empty batch")
    z1, a1d, z2, a2, p = _forward_pass(params, X, mask)
    loss = bce_loss(p, y)

    dz3 = ((p - y) / n)[:, None]
    dW3 = a2.T @ dz3
    db3 = dz3.sum(axis=0)
    dz2 = (dz3 @ params.W3.T) * (z2 > 0.0)
    dW2 = a1d.T @ dz2
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ params.W2.T
    if mask is not None:
        da1 = da1 * mask
    dz1 = da1 * (z1 > 0.0)
    dW1 = X.T @ dz1
    db1 = dz1.sum(axis=0)
    return loss, Parameters(dW1, db1, dW2, db2, dW3, db3)


def mix_pairs(
    X: np.ndarray, y: np.ndarray, partner: np.ndarray, lam: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """x~ = lam*x_i + (1-lam)*x_j and the same convex mix of the labels."""
    mixed_x = lam[:, None] * X + (1.0 - lam[:, None]) * X[partner]
    mixed_y = lam * y + (1.0 - lam) * y[partner]
    return mixed_x, mixed_y


def mixup_batch(
    features: np.ndarray,
    labels: np.ndarray,
    alpha: float,
    seed: int,
) -> MixedBatch:
    """Convex combinations with partners from a seeded permutation and one
    lambda ~ Beta(alpha, alpha) per pair; alpha = 0 is the identity."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    n = X.shape[0]
    if n < 1:
        raise DataError("mixup needs at least one sample")
    if alpha < 0:
        raise ConfigError("alpha must be >= 0")
    if alpha == 0.0:
        return MixedBatch(X.copy(), y.copy(), np.ones(n), np.arange(n))
    rng = make_rng(seed)
    partner = permutation(rng, n)
    lam = rng.beta(alpha, alpha, size=n)
    mixed_x, mixed_y = mix_pairs(X, y, partner, lam)
    return MixedBatch(mixed_x, mixed_y, lam, partner)


def train(dataset: LabeledDataset, config: MlpConfig) -> TrainedClassifier:
    """Mini-batch Adam (b1=0.9, b2=0.999, eps=1e-8) with a seeded reshuffle
    each epoch and per-batch MixUp when mixup_alpha > 0."""
    if dataset.n < 2:
        raise DataError("training needs at least 2 samples")
    present = set(np.unique(dataset.labels).tolist())
    if present != {0, 1}:
        raise DataError(f"training data must contain both classes, found {sorted(present)}")
    if dataset.features.d != config.input_dim:
        raise DataError(
            f"config.input_dim {config.input_dim} != data dimension {dataset.features.d}"
        )
    X = dataset.features.as_float64()
    y = dataset.labels.astype(np.float64)
    n = X.shape[0]
    params = init_params(config, derive_seed(config.seed, "init"))
    m = [np.zeros_like(a) for a in params.arrays()]
    v = [np.zeros_like(a) for a in params.arrays()]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    history: list[float] = []
    for epoch in range(config.epochs):
        order = permutation(make_rng(derive_seed(config.seed, "shuffle", epoch)), n)
        total = 0.0
        for b, start in enumerate(range(0, n, config.batch_size)):
            idx = order[start : start + config.batch_size]
            bx, by = X[idx], y[idx]
            if config.mixup_alpha > 0.0:
                mixed = mixup_batch(bx, by, config.mixup_alpha, derive_seed(config.seed, "mixup", epoch, b))
                bx, by = mixed.features, mixed.targets
            mask = None
            if config.dropout_rate > 0.0:
                mask = dropout_mask(
                    make_rng(derive_seed(config.seed, "dropout", epoch, b)),
                    (bx.shape[0], config.hidden_sizes[0]),
                    config.dropout_rate,
                )
            loss, grads = gradients(params, bx, by, config, mask)
            total += loss * bx.shape[0]
            step += 1
            arrays = params.arrays()
            for i, grad in enumerate(grads.arrays()):
                m[i] = beta1 * m[i] + (1.0 - beta1) * grad
                v[i] = beta2 * v[i] + (1.0 - beta2) * grad * grad
                m_hat = m[i] / (1.0 - beta1**step)
                v_hat = v[i] / (1.0 - beta2**step)
                arrays[i] -= config.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
        history.append(total / n)
    return TrainedClassifier(params=params, config=config, history=history)


def predict_batch(model: TrainedClassifier, X: FeatureMatrix | np.ndarray) -> np.ndarray:
    """Eval-mode probabilities, one per row."""
    arr = _as_batch(X)
    if arr.shape[0] == 0:
        return np.zeros(0, dtype=np.float64)
    return forward(model.params, arr, model.config, mode="eval")


def classify(probabilities: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Label 1 iff p >= threshold (the 0.5 tie goes to the positive class)."""
    return (np.asarray(probabilities, dtype=np.float64) >= threshold).astype(np.int8)


# ---------------------------------------------------------------------------
# JSON serialization


def model_to_dict(model: TrainedClassifier) -> dict:
    cfg = model.config
    p = model.params
    return {
        "kind": "mlp_classifier",
        "config": {
            "input_dim": cfg.input_dim,
            "hidden_sizes": list(cfg.hidden_sizes),
            "dropout_rate": cfg.dropout_rate,
            "learning_rate": cfg.learning_rate,
            "batch_size": cfg.batch_size,
            "epochs": cfg.epochs,
            "mixup_alpha": cfg.mixup_alpha,
            "seed": cfg.seed,
        },
        "history": list(model.history),
        "params": {
            "W1": p.W1.tolist(),
            "b1": p.b1.tolist(),
            "W2": p.W2.tolist(),
            "b2": p.b2.tolist(),
            "W3": p.W3.tolist(),
            "b3": p.b3.tolist(),
        },
    }


def model_from_dict(obj: dict) -> TrainedClassifier:
    try:
        cfg_obj = dict(obj["config"])
        cfg_obj["hidden_sizes"] = tuple(cfg_obj["hidden_sizes"])
        config = MlpConfig(**cfg_obj)
        raw = obj["params"]
        params = Parameters(
            **{key: np.asarray(raw[key], dtype=np.float64) for key in ("W1", "b1", "W2", "b2", "W3", "b3")}
        )
        return TrainedClassifier(params=params, config=config, history=list(obj.get("history", [])))
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed classifier document: {exc}") from exc


def model_to_json(model: TrainedClassifier) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True)


def model_from_json(text: str) -> TrainedClassifier:
    return model_from_dict(json.loads(text))


def with_seed(config: MlpConfig, seed: int) -> MlpConfig:
    return replace(config, seed=seed)
