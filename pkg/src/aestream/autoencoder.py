"""Small fully-connected autoencoder trained with Adam on binary cross-entropy.

Everything is plain numpy in float64. The network is ``d -> hidden -> ... -> d``
with a decoder mirroring the encoder, leaky-ReLU hidden units and a sigmoid
output so reconstructions live in (0, 1).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

EPS = 1e-7

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class ConfigurationError(ValueError):
    """Raised for invalid model or engine configuration."""


@dataclass(frozen=True)
class AeConfig:
    """Architecture and training hyper-parameters of an autoencoder.

    Attributes:
        input_dim: Number of input features ``d``.
        hidden_dims: Encoder layer widths; the decoder mirrors them.
        learning_rate: Adam step size.
        minibatch_size: Upper bound on the mini-batch size.
        epochs: Passes over the window per training call.
        hidden_activation: Negative slope of the leaky ReLU.
        seed: Seed for weight initialisation and batch shuffling.
    """

    input_dim: int
    hidden_dims: tuple[int, ...] = (8,)
    learning_rate: float = 1e-3
    minibatch_size: int = 128
    epochs: int = 10
    hidden_activation: float = 0.01
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ConfigurationError(f"input_dim must be positive, got {self.input_dim}")
        if not self.hidden_dims:
            raise ConfigurationError("hidden_dims must be non-empty")
        if any(h < 1 for h in self.hidden_dims):
            raise ConfigurationError(f"hidden_dims must be positive, got {self.hidden_dims}")
        if not self.learning_rate > 0:
            raise ConfigurationError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.minibatch_size < 1:
            raise ConfigurationError(f"minibatch_size must be positive, got {self.minibatch_size}")
        if self.epochs < 0:
            raise ConfigurationError(f"epochs must be non-negative, got {self.epochs}")

    @property
    def layer_dims(self) -> list[int]:
        """Widths of every layer, input and output included."""
        h = list(self.hidden_dims)
        return [self.input_dim, *h, *reversed(h[:-1]), self.input_dim]


@dataclass
class Layer:
    weight: np.ndarray  # (fan_in, fan_out)
    bias: np.ndarray
    activation: str  # "leaky_relu" or "sigmoid"


@dataclass
class Autoencoder:
    config: AeConfig
    layers: list[Layer]
    adam_m: list[np.ndarray] = field(default_factory=list)
    adam_v: list[np.ndarray] = field(default_factory=list)
    adam_step: int = 0
    rng: np.random.Generator | None = None
    last_cost: float | None = None

    @property
    def input_dim(self) -> int:
        return self.config.input_dim

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in a fixed order: W0, b0, W1, b1, ..."""
        out = []
        for layer in self.layers:
            out.extend((layer.weight, layer.bias))
        return out

    def copy(self) -> "Autoencoder":
        clone = Autoencoder(
            config=self.config,
            layers=[Layer(l.weight.copy(), l.bias.copy(), l.activation) for l in self.layers],
            adam_m=[m.copy() for m in self.adam_m],
            adam_v=[v.copy() for v in self.adam_v],
            adam_step=self.adam_step,
            last_cost=self.last_cost,
        )
        if self.rng is not None:
            clone.rng = np.random.Generator(type(self.rng.bit_generator)())
            clone.rng.bit_generator.state = self.rng.bit_generator.state
        return clone

    def to_dict(self) -> dict:
        cfg = asdict(self.config)
        cfg["hidden_dims"] = list(cfg["hidden_dims"])
        return {
            "config": cfg,
            "layers": [
                {"weight": l.weight.tolist(), "bias": l.bias.tolist(), "activation": l.activation}
                for l in self.layers
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def from_dict(cls, data: dict) -> "Autoencoder":
        model = init_autoencoder(AeConfig(**data["config"]))
        for layer, rec in zip(model.layers, data["layers"]):
            layer.weight[...] = np.asarray(rec["weight"], dtype=np.float64)
            layer.bias[...] = np.asarray(rec["bias"], dtype=np.float64)
        return model

    @classmethod
    def load(cls, path: str | Path) -> "Autoencoder":
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_autoencoder(config: AeConfig) -> Autoencoder:
    """Build a He-normal initialised autoencoder with zeroed Adam moments."""
    rng = np.random.default_rng(config.seed)
    dims = config.layer_dims
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        act = "sigmoid" if i == len(dims) - 2 else "leaky_relu"
        layers.append(Layer(w, np.zeros(fan_out), act))
    model = Autoencoder(config=config, layers=layers, rng=rng)
    model.adam_m = [np.zeros_like(p) for p in model.params()]
    model.adam_v = [np.zeros_like(p) for p in model.params()]
    return model


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _as_batch(model: Autoencoder, x) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != model.input_dim:
        raise ValueError(f"expected inputs with {model.input_dim} features, got shape {np.shape(x)}")
    return arr


def _forward(model: Autoencoder, batch: np.ndarray) -> list[tuple[np.ndarray, np.ndarray]]:
    """Return (pre-activation, activation) per layer."""
    slope = model.config.hidden_activation
    cache = []
    a = batch
    for layer in model.layers:
        z = a @ layer.weight + layer.bias
        if layer.activation == "sigmoid":
            a = _sigmoid(z)
        else:
            a = np.where(z > 0, z, slope * z)
        cache.append((z, a))
    return cache


def reconstruct(model: Autoencoder, x) -> np.ndarray:
    """Reconstruct a single vector ``(d,)`` or a batch ``(n, d)``."""
    batch = _as_batch(model, x)
    out = _forward(model, batch)[-1][1]
    return out[0] if np.ndim(x) == 1 else out


def bce_loss(x, x_hat) -> float | np.ndarray:
    """Binary cross-entropy summed over features.

    Works on a single pair of vectors (returns a float) or on ``(n, d)``
    arrays (returns one loss per row). ``x_hat`` is clipped to
    ``[EPS, 1 - EPS]`` before taking logs.
    """
    x = np.asarray(x, dtype=np.float64)
    x_hat = np.asarray(x_hat, dtype=np.float64)
    if x.shape != x_hat.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {x_hat.shape}")
    p = np.clip(x_hat, EPS, 1.0 - EPS)
    terms = x * np.log(p) + (1.0 - x) * np.log1p(-p)
    loss = -terms.sum(axis=-1)
    # Rounding can push a perfect reconstruction a hair below zero.
    loss = np.maximum(loss, 0.0)
    return float(loss) if loss.ndim == 0 else loss


def losses(model: Autoencoder, xs) -> np.ndarray:
    """Per-instance reconstruction losses for a batch."""
    batch = _as_batch(model, xs)
    if batch.shape[0] == 0:
        return np.empty(0)
    return bce_loss(batch, _forward(model, batch)[-1][1])


def cost(model: Autoencoder, xs) -> float:
    """Mean reconstruction loss over ``xs``."""
    return float(np.mean(losses(model, xs)))


def gradient(model: Autoencoder, batch) -> list[np.ndarray]:
    """Analytic gradient of the mean batch BCE w.r.t. every parameter.

    Returned in the order of :meth:`Autoencoder.params`.
    """
    batch = _as_batch(model, batch)
    n = batch.shape[0]
    if n == 0:
        raise ValueError("batch must be non-empty")
    cache = _forward(model, batch)
    out = cache[-1][1]
    # Sigmoid + BCE collapses to (x_hat - x); clipped outputs pass no gradient.
    inside = (out > EPS) & (out < 1.0 - EPS)
    delta = np.where(inside, out - batch, 0.0) / n
    slope = model.config.hidden_activation
    grads: list[np.ndarray] = []
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        prev = cache[i - 1][1] if i > 0 else batch
        # Appended bias-then-weight so the final reverse() yields W, b order.
        grads.append(delta.sum(axis=0))
        grads.append(prev.T @ delta)
        if i > 0:
            z_prev = cache[i - 1][0]
            delta = (delta @ layer.weight.T) * np.where(z_prev > 0, 1.0, slope)
    grads.reverse()
    return grads


def _adam_update(model: Autoencoder, grads: list[np.ndarray]) -> None:
    model.adam_step += 1
    lr = model.config.learning_rate
    t = model.adam_step
    corr1 = 1.0 - ADAM_BETA1**t
    corr2 = 1.0 - ADAM_BETA2**t
    for p, g, m, v in zip(model.params(), grads, model.adam_m, model.adam_v):
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        p -= lr * (m / corr1) / (np.sqrt(v / corr2) + ADAM_EPS)


def train_window(model: Autoencoder, window, epochs: int | None = None) -> float:
    """Train in place on ``window`` and return the final mean loss.

    Each epoch reshuffles the window with the model's own generator and
    applies one Adam step per mini-batch of ``min(minibatch_size, len)``.
    """
    data = _as_batch(model, window) if len(window) else np.empty((0, model.input_dim))
    n = data.shape[0]
    if n == 0:
        raise ValueError("cannot train on an empty window")
    if model.rng is None:
        model.rng = np.random.default_rng(model.config.seed)
    epochs = model.config.epochs if epochs is None else epochs
    bs = min(model.config.minibatch_size, n)
    for _ in range(epochs):
        order = model.rng.permutation(n)
        for start in range(0, n, bs):
            _adam_update(model, gradient(model, data[order[start:start + bs]]))
    model.last_cost = cost(model, data)
    return model.last_cost
