"""Per-domain softmax classification head over frozen sentence embeddings."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateData, ProviderMismatch


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    l2: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be > 0")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.l2 < 0:
            raise ValueError("l2 must be >= 0")


# Used by the harness and registry; the class defaults underfit heads trained
# on hundreds of utterances. Step 1.0 stays below 2/L for unit-norm inputs.
FEW_SHOT = TrainConfig(learning_rate=1.0, epochs=1000)


@dataclass
class Head:
    weights: np.ndarray          # (n_labels, dim)
    bias: np.ndarray             # (n_labels,)
    labels: tuple[str, ...]
    provider_fingerprint: str
    losses: list[float] = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        self.labels = tuple(self.labels)
        if self.weights.ndim != 2 or self.weights.shape[0] != len(self.labels):
            raise ValueError("weights must have one row per label")
        if self.bias.shape != (len(self.labels),):
            raise ValueError("bias must have one entry per label")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("head parameters must be finite")

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Head):
            return NotImplemented
        return (self.labels == other.labels
                and self.provider_fingerprint == other.provider_fingerprint
                and self.weights.tobytes() == other.weights.tobytes()
                and self.bias.tobytes() == other.bias.tobytes())

    def logits(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.bias

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "dim": self.dim,
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "provider_fingerprint": self.provider_fingerprint,
        }

    @classmethod
    def from_dict(cls, obj: Mapping) -> "Head":
        weights = np.asarray(obj["weights"], dtype=np.float64).reshape(len(obj["labels"]), obj["dim"])
        return cls(weights, obj["bias"], obj["labels"], obj["provider_fingerprint"])

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def softmax(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=-1, keepdims=True)


def objective(weights, bias, X, y, l2):
    """Mean cross-entropy plus ``l2/2 * ||weights||^2`` and its gradients.

    Returns ``(loss, grad_weights, grad_bias)``. ``y`` holds label indices.
    """
    n = X.shape[0]
    z = X @ weights.T + bias
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    log_p = shifted - log_norm[:, None]
    loss = -log_p[np.arange(n), y].mean() + 0.5 * l2 * float(np.sum(weights * weights))
    resid = np.exp(log_p)
    resid[np.arange(n), y] -= 1.0
    resid /= n
    return loss, resid.T @ X + l2 * weights, resid.sum(axis=0)


def fit(X: np.ndarray, y: np.ndarray, n_labels: int, cfg: TrainConfig):
    """Full-batch gradient descent from zeros. Returns ``(weights, bias, losses)``.

    ``losses[e]`` is the objective before epoch ``e``'s update; the final
    entry is the objective at the returned parameters.
    """
    weights = np.zeros((n_labels, X.shape[1]))
    bias = np.zeros(n_labels)
    losses = []
    for _ in range(cfg.epochs):
        loss, g_w, g_b = objective(weights, bias, X, y, cfg.l2)
        losses.append(float(loss))
        weights -= cfg.learning_rate * g_w
        bias -= cfg.learning_rate * g_b
    losses.append(float(objective(weights, bias, X, y, cfg.l2)[0]))
    return weights, bias, losses


def train_head(examples: Sequence[tuple[str, str]], cfg: TrainConfig | None, provider) -> Head:
    """Train a head on ``(text, label)`` pairs.

    Examples are sorted by ``(label, text)`` first, so input order never
    matters. Labels are indexed in sorted order.
    """
    cfg = cfg or TrainConfig()
    examples = sorted(set((label, text) for text, label in examples))
    labels = tuple(sorted({label for label, _ in examples}))
    if len(labels) < 2:
        raise DegenerateData(f"need at least two labels, got {list(labels)}")
    if any(not text for _, text in examples):
        raise DegenerateData("empty example text")
    index = {label: i for i, label in enumerate(labels)}
    X = provider.embed_many([text for _, text in examples])
    y = np.array([index[label] for label, _ in examples])
    weights, bias, losses = fit(X, y, len(labels), cfg)
    head = Head(weights, bias, labels, provider.fingerprint)
    head.losses = losses
    return head


def predict_proba(text: str, head: Head, provider) -> dict[str, float]:
    if provider.fingerprint != head.provider_fingerprint:
        raise ProviderMismatch(
            f"head trained with provider {head.provider_fingerprint}, got {provider.fingerprint}")
    p = softmax(head.logits(provider.embed(text)))
    return dict(zip(head.labels, p.tolist()))


def gradient_check(head: Head, batch, l2: float = 0.0, step: float = 1e-5,
                   n_coords: int = 40, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``batch`` is ``(X, y)`` with ``y`` as label indices. Coordinates are drawn
    at random from the weights and bias. The relative error of a coordinate is
    ``|a - n| / max(|a|, |n|, 1e-6)``; the floor keeps zero-gradient
    coordinates from dividing round-off noise by zero.
    """
    X, y = batch
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("empty batch")
    W = head.weights.copy()
    b = head.bias.copy()
    _, g_w, g_b = objective(W, b, X, y, l2)
    rng = np.random.default_rng(seed)
    n_w = W.size
    coords = rng.choice(n_w + b.size, size=min(max(n_coords, 20), n_w + b.size), replace=False)
    worst = 0.0
    for c in coords:
        params, grad, idx = (W, g_w, np.unravel_index(c, W.shape)) if c < n_w else (b, g_b, c - n_w)
        orig = params[idx]
        params[idx] = orig + step
        up = objective(W, b, X, y, l2)[0]
        params[idx] = orig - step
        down = objective(W, b, X, y, l2)[0]
        params[idx] = orig
        numeric = (up - down) / (2 * step)
        analytic = grad[idx]
        err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        worst = max(worst, err)
    return float(worst)
