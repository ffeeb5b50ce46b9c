"""Fully-connected mask estimator trained with ADAM on chunked spectrogram features.

The network maps a flattened (bins x frames) chunk of normalized log-magnitude
features to the soft mask of the same chunk: sigmoid hidden layers, an
identity output layer and a mean-squared-error loss.

Model file layout (all integers and floats little-endian)::

    bytes 0..7    magic b"TFMSEPNN"
    uint32        format version (currently 1)
    uint32        header length H
    H bytes       UTF-8 JSON header, sorted keys: layer_sizes, hidden_activation,
                  output_activation, feature_stats ({mean, std, epsilon} or null),
                  seed, metadata
    float64[]     for each layer in order: weights (fan_in x fan_out, row-major)
                  followed by biases (fan_out)
    32 bytes      SHA-256 of every preceding byte
"""
import hashlib
import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from . import _backend
from .errors import DataError, FormatError, LengthError, NumericError, ParameterError, ShapeError
from .masking import SOFT, Mask
from .spectral import FeatureStats

MODEL_MAGIC = b"TFMSEPNN"
MODEL_VERSION = 1
DEFAULT_LAYER_SIZES = (1300, 1300, 1300, 1300)


@dataclass(frozen=True)
class ChunkSpec:
    bins: int = 65
    width_frames: int = 20
    overlap_frames: int = 10

    def __post_init__(self):
        if self.bins < 1:
            raise ParameterError("bins must be positive")
        if not 0 < self.overlap_frames < self.width_frames:
            raise ParameterError(f"need 0 < overlap < width, got overlap="
                                 f"{self.overlap_frames}, width={self.width_frames}")

    @property
    def stride(self):
        return self.width_frames - self.overlap_frames

    @property
    def flat_len(self):
        return self.bins * self.width_frames

    def n_chunks(self, n_frames):
        if n_frames < self.width_frames:
            return 0
        return (n_frames - self.width_frames) // self.stride + 1


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 3
    batch_size: int = 64
    shuffle: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ParameterError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")


@dataclass(eq=False)
class MlpModel:
    layer_sizes: tuple
    weights: list
    biases: list
    feature_stats: FeatureStats = None
    seed: int = 0
    hidden_activation: str = "sigmoid"
    output_activation: str = "identity"
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.layer_sizes = tuple(int(n) for n in self.layer_sizes)
        if len(self.weights) != len(self.layer_sizes) - 1 or len(self.biases) != len(self.weights):
            raise ShapeError("need one weight matrix and bias vector per layer transition")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if w.shape != expected or b.shape != (expected[1],):
                raise ShapeError(f"layer {i}: weights {w.shape} / biases {b.shape} do not "
                                 f"match sizes {expected}")

    @property
    def params(self):
        """Flat parameter list ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def with_params(self, params):
        return MlpModel(self.layer_sizes, list(params[0::2]), list(params[1::2]),
                        self.feature_stats, self.seed, self.hidden_activation,
                        self.output_activation, dict(self.metadata))


@dataclass
class Gradients:
    weights: list
    biases: list
    loss: float

    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out


@dataclass
class AdamState:
    m: list
    v: list
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, **hyper):
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params],
                   **hyper)


def chunk(features, spec=ChunkSpec()):
    """Cut ``features`` (bins x T) into overlapping chunks, one flattened row each.

    Rows are frequency-fastest: element ``t * bins + b`` of chunk ``k`` is
    ``features[b, k * stride + t]``.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != spec.bins:
        raise ShapeError(f"expected ({spec.bins}, T) features, got {x.shape}")
    if x.shape[1] < spec.width_frames:
        raise LengthError(f"{x.shape[1]} frames is fewer than one {spec.width_frames}-frame chunk")
    windows = sliding_window_view(x.T, spec.width_frames, axis=0)[::spec.stride]
    # windows: (N, bins, width) -> (N, width, bins) so bins vary fastest
    return np.ascontiguousarray(windows.transpose(0, 2, 1)).reshape(-1, spec.flat_len)


def dechunk(rows, spec, n_frames):
    """Average overlapping chunk rows back onto a ``bins x n_frames`` grid.

    Returns ``(matrix, covered)``; frames no chunk reaches are zero and marked
    False in ``covered``.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[1] != spec.flat_len:
        raise ShapeError(f"expected (N, {spec.flat_len}) rows, got {rows.shape}")
    if rows.shape[0] != spec.n_chunks(n_frames) or rows.shape[0] == 0:
        raise ShapeError(f"{rows.shape[0]} chunks inconsistent with {n_frames} frames "
                         f"(expected {spec.n_chunks(n_frames)})")
    sums, counts = _backend.chunk_accumulate(rows, spec.bins, spec.width_frames,
                                             spec.stride, n_frames)
    covered = counts > 0
    out = np.zeros_like(sums)
    out[:, covered] = sums[:, covered] / counts[covered]
    return out, covered


def init_model(layer_sizes=DEFAULT_LAYER_SIZES, seed=0, feature_stats=None):
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(tuple(layer_sizes), weights, biases, feature_stats, seed)


def forward(model, batch):
    """Return the network output and the list of layer activations.

    ``activations[0]`` is the input and ``activations[-1]`` the output.
    """
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise ShapeError(f"batch must be (B, {model.layer_sizes[0]}), got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError("non-finite values in network input")
    activations = [x]
    n_layers = len(model.weights)
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = activations[-1] @ w + b
        activations.append(z if i == n_layers - 1 else expit(z))
    return activations[-1], activations


def mse(output, targets):
    return float(np.mean((output - targets) ** 2))


def backward(model, batch, targets, activations=None):
    """Gradients of the mean squared error over all ``B x out`` entries."""
    t = np.asarray(targets, dtype=np.float64)
    if activations is None:
        _, activations = forward(model, batch)
    y = activations[-1]
    if t.shape != y.shape:
        raise ShapeError(f"targets {t.shape} do not match output {y.shape}")
    diff = y - t
    loss = float(np.mean(diff ** 2))
    if not math.isfinite(loss):
        raise NumericError("non-finite loss")

    delta = diff * (2.0 / diff.size)
    n_layers = len(model.weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        grad_w[i] = activations[i].T @ delta
        grad_b[i] = delta.sum(axis=0)
        if i:
            a = activations[i]
            delta = (delta @ model.weights[i].T) * a * (1.0 - a)
    return Gradients(grad_w, grad_b, loss)


def adam_step(params, grads, state):
    """One bias-corrected ADAM update. Returns new parameter arrays and state."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("params, grads and optimizer state disagree in length")
    t = state.t + 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** t
    corr2 = 1.0 - b2 ** t
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * (g * g)
        m_hat = m / corr1
        v_hat = v / corr2
        new_params.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t, state.lr, b1, b2, state.eps)


def evaluate_mse(model, inputs, targets, batch_size=1024):
    total = 0.0
    for start in range(0, inputs.shape[0], batch_size):
        out, _ = forward(model, inputs[start:start + batch_size])
        total += float(np.sum((out - targets[start:start + batch_size]) ** 2))
    return total / targets.size


def train(predictors, targets, config=TrainConfig(), validation=None, model=None,
          layer_sizes=None, feature_stats=None, lr=1e-3, log=None):
    """Train with minibatch ADAM; return the model and per-epoch MSE history.

    ``validation`` is an optional ``(predictors, targets)`` pair. Without an
    initial ``model`` one is created from ``layer_sizes`` seeded with
    ``config.seed``. The shuffle order is drawn from ``config.seed`` too, so a
    given (data, config) always produces the same parameters.
    """
    x = np.asarray(predictors, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if x.shape[0] == 0:
        raise DataError("empty training set")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"{x.shape[0]} predictor rows vs {y.shape[0]} target rows")
    if model is None:
        sizes = layer_sizes or (x.shape[1],) + (x.shape[1],) * 2 + (y.shape[1],)
        model = init_model(sizes, config.seed, feature_stats)

    rng = np.random.default_rng(config.seed)
    params = model.params
    state = AdamState.for_params(params, lr=lr)
    history = []
    n = x.shape[0]
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            grads = backward(model, x[idx], y[idx])
            params, state = adam_step(params, grads.params, state)
            model = model.with_params(params)
        row = {"epoch": epoch, "train_mse": evaluate_mse(model, x, y)}
        if validation is not None:
            row["val_mse"] = evaluate_mse(model, *map(np.asarray, validation))
        history.append(row)
        if log is not None:
            log(row)
    return model, history


def estimate_mask(model, mixture_features, spec=ChunkSpec()):
    """Predict a soft mask for normalized mixture features (bins x T)."""
    feats = np.asarray(mixture_features, dtype=np.float64)
    rows = chunk(feats, spec)
    preds = np.empty((rows.shape[0], model.layer_sizes[-1]))
    for start in range(0, rows.shape[0], 1024):
        preds[start:start + 1024], _ = forward(model, rows[start:start + 1024])
    mask, _ = dechunk(preds, spec, feats.shape[1])
    return Mask(np.clip(mask, 0.0, 1.0), SOFT)


def save_model(model, path):
    stats = model.feature_stats
    header = {
        "layer_sizes": list(model.layer_sizes),
        "hidden_activation": model.hidden_activation,
        "output_activation": model.output_activation,
        "feature_stats": None if stats is None else {
            "mean": stats.mean, "std": stats.std, "epsilon": stats.epsilon},
        "seed": int(model.seed),
        "metadata": model.metadata,
    }
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    parts = [MODEL_MAGIC, struct.pack("<II", MODEL_VERSION, len(head)), head]
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body)
        fh.write(hashlib.sha256(body).digest())


def load_model(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    fixed = len(MODEL_MAGIC) + 8
    if len(blob) < fixed + 32 or not blob.startswith(MODEL_MAGIC):
        raise FormatError(f"{path}: not a model file")
    version, head_len = struct.unpack_from("<II", blob, len(MODEL_MAGIC))
    if version != MODEL_VERSION:
        raise FormatError(f"{path}: unsupported model format version {version} "
                          f"(expected {MODEL_VERSION})")
    body, digest = blob[:-32], blob[-32:]
    if hashlib.sha256(body).digest() != digest:
        raise FormatError(f"{path}: checksum mismatch (truncated or corrupt file)")
    try:
        header = json.loads(body[fixed:fixed + head_len].decode("utf-8"))
        sizes = [int(n) for n in header["layer_sizes"]]
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: bad header ({exc})") from exc

    offset = fixed + head_len
    expected = offset + 8 * sum(a * b + b for a, b in zip(sizes[:-1], sizes[1:]))
    if expected != len(body):
        raise FormatError(f"{path}: payload size {len(body)} does not match header")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = np.frombuffer(body, dtype="<f8", count=fan_in * fan_out, offset=offset)
        offset += 8 * fan_in * fan_out
        b = np.frombuffer(body, dtype="<f8", count=fan_out, offset=offset)
        offset += 8 * fan_out
        weights.append(w.reshape(fan_in, fan_out).astype(np.float64))
        biases.append(b.astype(np.float64))
    fs = header.get("feature_stats")
    stats = None if fs is None else FeatureStats(fs["mean"], fs["std"], fs["epsilon"])
    return MlpModel(tuple(sizes), weights, biases, stats, header.get("seed", 0),
                    header.get("hidden_activation", "sigmoid"),
                    header.get("output_activation", "identity"), header.get("metadata", {}))
