"""Dense ReLU classifier with exact, reproducible gradients.

Everything runs in float64. All linear contractions go through
``np.einsum`` with fixed index orders: the reduction axis never depends on
the batch size, so a row fed alone or inside any batch produces
bit-identical numbers, and repeated runs are bit-identical.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    BadMagicError,
    FileFormatError,
    ShapeError,
    TruncatedFileError,
    UnsupportedVersionError,
)

MODEL_MAGIC = b"SGAM"
MODEL_VERSION = 1


def as_tensor(data, shape=None) -> np.ndarray:
    """Coerce to a float64 array, rejecting NaN/Inf entries.

    If ``shape`` is given the array must match it exactly.
    """
    arr = np.asarray(data, dtype=np.float64)
    if shape is not None and arr.shape != tuple(shape):
        raise ShapeError(f"expected shape {tuple(shape)}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor entries must be finite (no NaN/Inf)")
    return arr


@dataclass(frozen=True)
class NetworkSpec:
    """Architecture of the classifier: input_dim -> hidden_dims (ReLU) -> logits.

    ``hidden_dims`` may be empty, giving a plain linear-softmax model.
    """

    input_dim: int
    hidden_dims: tuple[int, ...]
    num_classes: int
    activation: str = "relu"

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be positive, got {self.input_dim}")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden dims must be positive, got {self.hidden_dims}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")

    def layer_dims(self) -> list[tuple[int, int]]:
        """(fan_in, fan_out) per layer, input through logits."""
        dims = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(dims[:-1], dims[1:]))


@dataclass
class NetworkParams:
    """Weights and biases, one (W [out x in], b [out]) pair per layer."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    spec: NetworkSpec

    def __post_init__(self):
        dims = self.spec.layer_dims()
        if len(self.layers) != len(dims):
            raise ShapeError(
                f"expected {len(dims)} layers, got {len(self.layers)}"
            )
        for i, ((w, b), (fan_in, fan_out)) in enumerate(zip(self.layers, dims)):
            if w.shape != (fan_out, fan_in) or b.shape != (fan_out,):
                raise ShapeError(
                    f"layer {i}: weight {w.shape} / bias {b.shape} do not chain "
                    f"({fan_in} -> {fan_out})"
                )

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            [(w.copy(), b.copy()) for w, b in self.layers], self.spec
        )


@dataclass
class GradientBundle:
    """Parameter gradients mirroring a NetworkParams layout, plus the loss."""

    param_grads: list[tuple[np.ndarray, np.ndarray]]
    loss_value: float


def init_params(spec: NetworkSpec, seed: int) -> NetworkParams:
    """Zero-mean uniform weights with variance 1/fan_in per layer; zero biases.

    Deterministic given ``seed``.
    """
    rng = np.random.default_rng(seed)
    layers = []
    for fan_in, fan_out in spec.layer_dims():
        bound = np.sqrt(3.0 / fan_in)  # Var[U(-a, a)] = a^2/3 = 1/fan_in
        w = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        layers.append((w, b))
    return NetworkParams(layers, spec)


def _check_input(params: NetworkParams, x) -> np.ndarray:
    x = as_tensor(x)
    if x.ndim != 2 or x.shape[1] != params.spec.input_dim:
        raise ShapeError(
            f"input must be [batch x {params.spec.input_dim}], got {x.shape}"
        )
    return x


def forward_cached(params: NetworkParams, x: np.ndarray):
    """Logits plus the per-layer inputs and pre-activations backprop needs."""
    acts = [x]  # input to each layer
    pres = []  # pre-activation of each layer
    a = x
    last = len(params.layers) - 1
    for i, (w, b) in enumerate(params.layers):
        z = np.einsum("nd,cd->nc", a, w) + b
        pres.append(z)
        a = z if i == last else np.maximum(z, 0.0)
        if i != last:
            acts.append(a)
    return a, acts, pres


def forward(params: NetworkParams, x) -> np.ndarray:
    """Logits for a [batch x input_dim] tensor; rows are independent."""
    x = _check_input(params, x)
    logits, _, _ = forward_cached(params, x)
    return logits


def backprop(params: NetworkParams, acts, pres, logit_grad: np.ndarray):
    """Push d(loss)/d(logits) back through the cache.

    Returns (param_grads, input_grad). The batch reduction for parameter
    gradients is a fixed-order einsum over the batch axis.
    """
    grads: list[tuple[np.ndarray, np.ndarray]] = [None] * len(params.layers)
    g = logit_grad
    for i in range(len(params.layers) - 1, -1, -1):
        w, _ = params.layers[i]
        grads[i] = (np.einsum("nc,nd->cd", g, acts[i]), np.einsum("nc->c", g))
        g = np.einsum("nc,cd->nd", g, w)
        if i > 0:
            g = g * (pres[i - 1] > 0.0)  # ReLU derivative; exactly 0 at the kink
    return grads, g


def input_gradient_batch(
    params: NetworkParams, x: np.ndarray, labels: np.ndarray
) -> np.ndarray:
    """Per-row gradient of each row's true-class logit w.r.t. that row."""
    _, acts, pres = forward_cached(params, x)
    onehot = np.zeros((x.shape[0], params.spec.num_classes))
    onehot[np.arange(x.shape[0]), labels] = 1.0
    _, input_grad = backprop(params, acts, pres, onehot)
    return input_grad


def check_labels(labels, num_classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim != 1 or labels.size == 0:
        raise ValueError("labels must be a nonempty 1-D sequence")
    if not np.issubdtype(labels.dtype, np.integer):
        raise ValueError("labels must be integers")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise ValueError(f"labels must lie in [0, {num_classes}), got {labels}")
    return labels.astype(np.int64)


def input_gradient(params: NetworkParams, x, label: int) -> np.ndarray:
    """Signed gradient of the true-class logit w.r.t. a single input row."""
    x = _check_input(params, x)
    if x.shape[0] != 1:
        raise ShapeError(f"input_gradient takes a single sample, got {x.shape[0]} rows")
    labels = check_labels([label], params.spec.num_classes)
    return input_gradient_batch(params, x, labels)


def sgd_step(params: NetworkParams, grads: GradientBundle, lr: float) -> NetworkParams:
    """One descent update p <- p - lr*g; pure, inputs untouched."""
    if lr < 0:
        raise ValueError(f"learning rate must be >= 0, got {lr}")
    if len(grads.param_grads) != len(params.layers):
        raise ShapeError("gradient layer count does not match parameters")
    new_layers = []
    for (w, b), (gw, gb) in zip(params.layers, grads.param_grads):
        if gw.shape != w.shape or gb.shape != b.shape:
            raise ShapeError(
                f"gradient shapes {gw.shape}/{gb.shape} do not match "
                f"parameter shapes {w.shape}/{b.shape}"
            )
        new_layers.append((w - lr * gw, b - lr * gb))
    return NetworkParams(new_layers, params.spec)


# --- model file I/O -------------------------------------------------------
#
# Binary little-endian layout:
#   magic "SGAM" | version u32 | input_dim u32 | hidden count u32 |
#   hidden dims u32 each | num_classes u32 |
#   per layer: weight f64 row-major [out*in], bias f64 [out]


def save_model(params: NetworkParams, path) -> None:
    spec = params.spec
    out = bytearray()
    out += MODEL_MAGIC
    out += struct.pack("<I", MODEL_VERSION)
    out += struct.pack("<I", spec.input_dim)
    out += struct.pack("<I", len(spec.hidden_dims))
    for h in spec.hidden_dims:
        out += struct.pack("<I", h)
    out += struct.pack("<I", spec.num_classes)
    for w, b in params.layers:
        out += np.ascontiguousarray(w, dtype="<f8").tobytes()
        out += np.ascontiguousarray(b, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(out))


class _Reader:
    def __init__(self, blob: bytes, what: str):
        self.blob = blob
        self.pos = 0
        self.what = what

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise TruncatedFileError(
                f"{self.what}: file ends {self.pos + n - len(self.blob)} bytes short"
            )
        chunk = self.blob[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64_array(self, count: int, shape) -> np.ndarray:
        raw = self.take(8 * count)
        return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(shape)


def load_model(path) -> NetworkParams:
    blob = Path(path).read_bytes()
    r = _Reader(blob, "model file")
    magic = r.take(4)
    if magic != MODEL_MAGIC:
        raise BadMagicError(
            f"model file: expected magic {MODEL_MAGIC!r}, found {magic!r}"
        )
    version = r.u32()
    if version != MODEL_VERSION:
        raise UnsupportedVersionError(
            f"model file: version {version} unsupported (expected {MODEL_VERSION})"
        )
    input_dim = r.u32()
    hidden = tuple(r.u32() for _ in range(r.u32()))
    num_classes = r.u32()
    spec = NetworkSpec(input_dim, hidden, num_classes)
    layers = []
    for fan_in, fan_out in spec.layer_dims():
        w = r.f64_array(fan_out * fan_in, (fan_out, fan_in))
        b = r.f64_array(fan_out, (fan_out,))
        layers.append((w, b))
    if r.pos != len(blob):
        raise FileFormatError(
            f"model file: {len(blob) - r.pos} unexpected trailing bytes"
        )
    return NetworkParams(layers, spec)
