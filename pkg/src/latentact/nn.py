"""A small multilayer-perceptron autoencoder written directly in numpy.

The encoder is a chain of dense layers ``R^n -> ... -> R^m`` whose last
activation is the latent activation; the decoder mirrors the widths back
to ``R^n`` and ends in an identity layer. Training is plain mini-batch
gradient descent on mean squared reconstruction error.
"""

from __future__ import annotations

import copy
import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ._io import atomic_write_text
from .linalg import DimensionError

FORMAT_MAGIC = "latentact-model"
FORMAT_VERSION = 1

# Float64 bounds of the open interval (0, 1); sigmoid saturates onto these.
_SIGMOID_FLOOR = float(np.nextafter(0.0, 1.0))
_SIGMOID_CEIL = float(np.nextafter(1.0, 0.0))


class Activation(str, enum.Enum):
    SIGMOID = "sigmoid"
    RELU = "relu"
    TANH = "tanh"
    IDENTITY = "identity"

    @classmethod
    def parse(cls, tag) -> "Activation":
        if isinstance(tag, cls):
            return tag
        try:
            return cls(str(tag).strip().lower())
        except ValueError:
            valid = ", ".join(a.value for a in cls)
            raise ValueError(f"unknown activation {tag!r}; valid tags: {valid}") from None

    @property
    def is_smooth(self) -> bool:
        return self is not Activation.RELU


def sigmoid(t):
    t = np.asarray(t, dtype=np.float64)
    e = np.exp(-np.abs(t))
    out = np.where(t >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return np.clip(out, _SIGMOID_FLOOR, _SIGMOID_CEIL)


def apply_activation(kind, t):
    kind = Activation.parse(kind)
    t = np.asarray(t, dtype=np.float64)
    if kind is Activation.SIGMOID:
        return sigmoid(t)
    if kind is Activation.RELU:
        return np.maximum(t, 0.0)
    if kind is Activation.TANH:
        return np.tanh(t)
    return t.copy()


def activate(kind, t: float) -> float:
    """Scalar activation; sigmoid never returns exactly 0 or 1."""
    return float(apply_activation(kind, t))


def activation_grad(kind: Activation, pre, post):
    if kind is Activation.SIGMOID:
        return post * (1.0 - post)
    if kind is Activation.RELU:
        # subgradient 0 at the kink
        return (pre > 0).astype(np.float64)
    if kind is Activation.TANH:
        return 1.0 - post * post
    return np.ones_like(pre)


@dataclass
class Layer:
    weights: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray  # (out_dim,)
    activation: Activation

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64, ndmin=2)
        self.bias = np.array(self.bias, dtype=np.float64).reshape(-1)
        self.activation = Activation.parse(self.activation)
        out_dim, in_dim = self.weights.shape
        if out_dim < 1 or in_dim < 1:
            raise DimensionError(f"layer dims must be >= 1, got {in_dim}->{out_dim}")
        if self.bias.shape != (out_dim,):
            raise DimensionError(f"bias has {self.bias.size} entries, layer has {out_dim} outputs")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("layer parameters must be finite")

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    def forward(self, a):
        pre = a @ self.weights.T + self.bias
        return pre, apply_activation(self.activation, pre)


def _check_chain(layers: list[Layer], what: str):
    if not layers:
        raise ValueError(f"{what} needs at least one layer")
    for i in range(1, len(layers)):
        if layers[i].in_dim != layers[i - 1].out_dim:
            raise DimensionError(
                f"{what} layer {i} expects input dim {layers[i].in_dim}, "
                f"previous layer outputs {layers[i - 1].out_dim}"
            )


@dataclass
class MLPModel:
    encoder: list[Layer]
    decoder: list[Layer]

    def __post_init__(self):
        _check_chain(self.encoder, "encoder")
        _check_chain(self.decoder, "decoder")
        if self.decoder[0].in_dim != self.latent_dim:
            raise DimensionError(
                f"decoder input dim {self.decoder[0].in_dim} != latent dim {self.latent_dim}"
            )
        if self.decoder[-1].out_dim != self.input_dim:
            raise DimensionError(
                f"decoder output dim {self.decoder[-1].out_dim} != input dim {self.input_dim}"
            )

    @property
    def input_dim(self) -> int:
        return self.encoder[0].in_dim

    @property
    def latent_dim(self) -> int:
        return self.encoder[-1].out_dim

    @property
    def latent_activation(self) -> Activation:
        return self.encoder[-1].activation

    @property
    def layers(self) -> list[Layer]:
        return self.encoder + self.decoder

    def encode(self, x) -> np.ndarray:
        """Forward pass through the encoder; accepts one vector or a batch of rows."""
        return _run(self.encoder, x, self.input_dim, "encode")

    def encode_batch(self, X) -> np.ndarray:
        return self.encode(np.atleast_2d(X))

    def decode(self, z) -> np.ndarray:
        return _run(self.decoder, z, self.latent_dim, "decode")

    def reconstruct(self, x) -> np.ndarray:
        return self.decode(self.encode(x))

    def __call__(self, x) -> np.ndarray:
        return self.encode(x)

    def copy(self) -> "MLPModel":
        return copy.deepcopy(self)

    def parameters(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend([layer.weights, layer.bias])
        return out


def _run(layers, x, expected_dim, what):
    a = np.asarray(x, dtype=np.float64)
    if a.ndim not in (1, 2) or a.shape[-1] != expected_dim:
        raise DimensionError(f"{what} expects dim {expected_dim}, got shape {a.shape}")
    for layer in layers:
        _, a = layer.forward(a)
    return a


def build_autoencoder(
    input_dim: int,
    latent_dim: int,
    latent_activation="sigmoid",
    hidden_dims=(),
    hidden_activation="tanh",
    init_scale: float = 1.0,
    seed: int = 0,
) -> MLPModel:
    """Gaussian-initialized autoencoder with weights scaled by ``init_scale / sqrt(in_dim)``."""
    if input_dim < 1 or latent_dim < 1:
        raise ValueError("dims must be >= 1")
    if init_scale <= 0:
        raise ValueError("init_scale must be positive")
    rng = np.random.default_rng(seed)
    widths = [input_dim, *hidden_dims, latent_dim]
    latent_activation = Activation.parse(latent_activation)
    hidden_activation = Activation.parse(hidden_activation)

    def make(dims, last_act):
        layers = []
        for i, (a, b) in enumerate(zip(dims[:-1], dims[1:])):
            act = last_act if i == len(dims) - 2 else hidden_activation
            w = rng.standard_normal((b, a)) * (init_scale / np.sqrt(a))
            layers.append(Layer(w, np.zeros(b), act))
        return layers

    encoder = make(widths, latent_activation)
    decoder = make(widths[::-1], Activation.IDENTITY)
    return MLPModel(encoder, decoder)


def linear_model(A, bias=None, activation="identity") -> MLPModel:
    """Single-layer encoder ``x -> act(A x + bias)`` with a zero identity-activated decoder."""
    A = np.array(A, dtype=np.float64, ndmin=2)
    m, n = A.shape
    enc = Layer(A, np.zeros(m) if bias is None else bias, activation)
    dec = Layer(np.zeros((n, m)), np.zeros(n), Activation.IDENTITY)
    return MLPModel([enc], [dec])


def identity_model(n: int) -> MLPModel:
    return MLPModel(
        [Layer(np.eye(n), np.zeros(n), Activation.IDENTITY)],
        [Layer(np.eye(n), np.zeros(n), Activation.IDENTITY)],
    )


# -- training -----------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    init_scale: float = 1.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, batch: int, loss: float):
        super().__init__(f"loss became {loss} at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch
        self.loss = loss


def reconstruction_loss(model: MLPModel, X) -> float:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return float(np.mean((model.reconstruct(X) - X) ** 2))


def loss_and_grads(model: MLPModel, X) -> tuple[float, list[np.ndarray]]:
    """Mean squared reconstruction error on the batch ``X`` and its parameter gradients.

    Gradients come back in the order of ``model.parameters()``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    layers = model.layers
    acts = [X]
    pres = []
    a = X
    for layer in layers:
        pre, a = layer.forward(a)
        pres.append(pre)
        acts.append(a)
    diff = a - X
    loss = float(np.mean(diff * diff))

    grad_a = 2.0 * diff / diff.size
    grads: list[np.ndarray] = [None] * (2 * len(layers))
    for i in range(len(layers) - 1, -1, -1):
        layer = layers[i]
        delta = grad_a * activation_grad(layer.activation, pres[i], acts[i + 1])
        grads[2 * i] = delta.T @ acts[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        grad_a = delta @ layer.weights
    return loss, grads


def train(model: MLPModel, data, cfg: TrainConfig) -> tuple[MLPModel, list[float]]:
    """Mini-batch gradient descent on a private copy of ``model``.

    Returns the trained copy and the mean batch loss of each epoch. Batches
    are reshuffled every epoch from a generator seeded with ``cfg.seed``.
    """
    X = np.atleast_2d(np.asarray(data, dtype=np.float64))
    if X.shape[0] == 0:
        raise ValueError("training data is empty")
    if X.shape[1] != model.input_dim:
        raise DimensionError(f"training data has dim {X.shape[1]}, model expects {model.input_dim}")
    model = model.copy()
    history: list[float] = []
    rng = np.random.default_rng(cfg.seed)
    params = model.parameters()
    count = X.shape[0]
    for epoch in range(cfg.epochs):
        order = rng.permutation(count)
        total = 0.0
        batches = 0
        for b, start in enumerate(range(0, count, cfg.batch_size)):
            batch = X[order[start : start + cfg.batch_size]]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = loss_and_grads(model, batch)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDiverged(epoch, b, loss)
            for p, g in zip(params, grads):
                p -= cfg.learning_rate * g
            total += loss
            batches += 1
        history.append(total / batches)
    return model, history


def gradient_check(model: MLPModel, x, epsilon: float = 1e-5) -> float:
    """Largest relative gap between backprop and central-difference gradients.

    Per parameter the gap is ``|g - g_fd| / max(1, |g| + |g_fd|)``.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    model = model.copy()
    X = np.atleast_2d(np.asarray(x, dtype=np.float64))
    _, grads = loss_and_grads(model, X)
    worst = 0.0
    for p, g in zip(model.parameters(), grads):
        flat = p.reshape(-1)
        gflat = g.reshape(-1)
        for k in range(flat.size):
            orig = flat[k]
            flat[k] = orig + epsilon
            up = reconstruction_loss(model, X)
            flat[k] = orig - epsilon
            down = reconstruction_loss(model, X)
            flat[k] = orig
            fd = (up - down) / (2.0 * epsilon)
            err = abs(gflat[k] - fd) / max(1.0, abs(gflat[k]) + abs(fd))
            worst = max(worst, err)
    return worst


def min_abs_preactivation(model: MLPModel, x) -> float:
    """Distance of the nearest pre-activation to zero across all layers (for kink-free probing)."""
    a = np.asarray(x, dtype=np.float64)
    best = np.inf
    for layer in model.layers:
        pre, a = layer.forward(a)
        best = min(best, float(np.min(np.abs(pre))))
    return best


# -- model files --------------------------------------------------------------


class ModelFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.line = line
        self.field = field


def _fmt(values) -> str:
    return " ".join(format(float(v), ".17g") for v in np.asarray(values).reshape(-1))


def dumps_model(model: MLPModel) -> str:
    lines = [
        f"{FORMAT_MAGIC} {FORMAT_VERSION}",
        f"dims {model.input_dim} {model.latent_dim}",
        f"layers {len(model.encoder)} {len(model.decoder)}",
    ]
    for part, layers in (("encoder", model.encoder), ("decoder", model.decoder)):
        for layer in layers:
            lines.append(f"layer {part} {layer.in_dim} {layer.out_dim} {layer.activation.value}")
            lines.append("weights " + _fmt(layer.weights))
            lines.append("bias " + _fmt(layer.bias))
    return "\n".join(lines) + "\n"


def save_model(model: MLPModel, path) -> Path:
    return atomic_write_text(path, dumps_model(model))


class _Lines:
    def __init__(self, text: str):
        self.items = [
            (i + 1, ln.split()) for i, ln in enumerate(text.splitlines()) if ln.strip() and not ln.lstrip().startswith("#")
        ]
        self.pos = 0

    def take(self, keyword: str):
        if self.pos >= len(self.items):
            last = self.items[-1][0] if self.items else 0
            raise ModelFormatError(f"unexpected end of file, expected {keyword!r}", last + 1, keyword)
        lineno, toks = self.items[self.pos]
        self.pos += 1
        if not toks or toks[0] != keyword:
            raise ModelFormatError(f"expected {keyword!r}, found {toks[0]!r}", lineno, keyword)
        return lineno, toks[1:]


def _ints(toks, count, lineno, field):
    if len(toks) != count:
        raise ModelFormatError(f"expected {count} integers, found {len(toks)}", lineno, field)
    try:
        vals = [int(t) for t in toks]
    except ValueError:
        raise ModelFormatError(f"non-integer value in {toks}", lineno, field) from None
    if any(v < 1 for v in vals):
        raise ModelFormatError(f"values must be >= 1, found {vals}", lineno, field)
    return vals


def _floats(toks, count, lineno, field):
    if len(toks) != count:
        raise ModelFormatError(f"expected {count} values, found {len(toks)}", lineno, field)
    try:
        vals = np.array([float(t) for t in toks])
    except ValueError:
        raise ModelFormatError("non-numeric value", lineno, field) from None
    if not np.all(np.isfinite(vals)):
        raise ModelFormatError("non-finite value", lineno, field)
    return vals


def loads_model(text: str) -> MLPModel:
    lines = _Lines(text)
    lineno, toks = lines.take(FORMAT_MAGIC)
    if toks != [str(FORMAT_VERSION)]:
        raise ModelFormatError(f"unsupported version {' '.join(toks)!r}", lineno, "version")
    lineno, toks = lines.take("dims")
    n, m = _ints(toks, 2, lineno, "dims")
    lineno, toks = lines.take("layers")
    n_enc, n_dec = _ints(toks, 2, lineno, "layers")

    parts = {"encoder": [], "decoder": []}
    for part, count in (("encoder", n_enc), ("decoder", n_dec)):
        for _ in range(count):
            lineno, toks = lines.take("layer")
            if len(toks) != 4 or toks[0] != part:
                raise ModelFormatError(f"expected 'layer {part} IN OUT ACTIVATION'", lineno, "layer")
            in_dim, out_dim = _ints(toks[1:3], 2, lineno, "layer dims")
            try:
                act = Activation.parse(toks[3])
            except ValueError as exc:
                raise ModelFormatError(str(exc), lineno, "activation") from None
            wl, wt = lines.take("weights")
            w = _floats(wt, in_dim * out_dim, wl, "weights").reshape(out_dim, in_dim)
            bl, bt = lines.take("bias")
            b = _floats(bt, out_dim, bl, "bias")
            parts[part].append(Layer(w, b, act))
    if lines.pos != len(lines.items):
        raise ModelFormatError("trailing content", lines.items[lines.pos][0])
    try:
        model = MLPModel(parts["encoder"], parts["decoder"])
    except (ValueError, DimensionError) as exc:
        raise ModelFormatError(str(exc)) from None
    if (model.input_dim, model.latent_dim) != (n, m):
        raise ModelFormatError(
            f"header dims ({n}, {m}) disagree with layers ({model.input_dim}, {model.latent_dim})",
            field="dims",
        )
    return model


def load_model(path) -> MLPModel:
    return loads_model(Path(path).read_text(encoding="utf-8"))
