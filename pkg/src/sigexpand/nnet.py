"""Reference 1-D convolutional classifier with exact hand-derived gradients.

Two same-padded conv layers (16 then 32 channels, kernels 7 and 5), each
followed by ReLU and a stride-2 max-pool, then a 64-unit fully connected
layer whose activations double as the feature embedding, and a linear
output head. All arithmetic is float32 with a fixed accumulation order;
an optional float64 mode backs the finite-difference gradient checks.

Everything is deterministic: initialization is a pure function of the seed,
epoch shuffles derive from SeedSequence(shuffle_seed, spawn_key=(epoch,)),
and max-pool ties resolve to the first maximal index.
"""

from __future__ import annotations

import copy
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .digest import fnv1a64
from .errors import CorruptDatasetError
from .util import atomic_write_bytes

PARAM_NAMES = ("conv1_w", "conv1_b", "conv2_w", "conv2_b",
               "fc1_w", "fc1_b", "fc2_w", "fc2_b")

CHECKPOINT_MAGIC = b"AMRM"
CHECKPOINT_VERSION = 1
_CKPT_HEADER = struct.Struct("<4sIIIIIIIIIQ")


@dataclass(frozen=True)
class ArchConfig:
    """Network hyper-shape. Defaults are the reference model for L=128."""

    signal_len: int = 128
    in_channels: int = 2
    conv_channels: tuple[int, int] = (16, 32)
    kernel_sizes: tuple[int, int] = (7, 5)
    hidden_units: int = 64

    def __post_init__(self):
        if any(k % 2 == 0 for k in self.kernel_sizes):
            raise ValueError("kernel sizes must be odd (same-padding)")
        if self.signal_len < 4:
            raise ValueError("signal_len too short for two stride-2 pools")

    @property
    def pooled_len(self) -> int:
        return (self.signal_len // 2) // 2

    @property
    def flat_dim(self) -> int:
        return self.conv_channels[1] * self.pooled_len

    def param_shapes(self, num_classes: int) -> dict[str, tuple]:
        c1, c2 = self.conv_channels
        k1, k2 = self.kernel_sizes
        return {
            "conv1_w": (c1, self.in_channels, k1),
            "conv1_b": (c1,),
            "conv2_w": (c2, c1, k2),
            "conv2_b": (c2,),
            "fc1_w": (self.hidden_units, self.flat_dim),
            "fc1_b": (self.hidden_units,),
            "fc2_w": (num_classes, self.hidden_units),
            "fc2_b": (num_classes,),
        }


@dataclass
class ModelState:
    """All parameters plus the provenance needed to reproduce them."""

    params: dict[str, np.ndarray]
    num_classes: int
    init_seed: int
    arch: ArchConfig = field(default_factory=ArchConfig)

    def copy(self) -> "ModelState":
        return ModelState({k: v.copy() for k, v in self.params.items()},
                          self.num_classes, self.init_seed, self.arch)


@dataclass
class TrainConfig:
    epochs: int = 20
    batch_size: int = 128
    learning_rate: float = 0.001
    shuffle_seed: int = 0
    record_correctness: bool = False

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("invalid training configuration")


@dataclass
class CorrectnessLog:
    """Per-epoch prediction correctness over the trained set, original order."""

    correct: np.ndarray  # bool [epochs, n]

    def __post_init__(self):
        self.correct = np.asarray(self.correct, dtype=bool)
        if self.correct.ndim != 2:
            raise ValueError("correctness log must be [epochs, samples]")


def init_model(seed: int, num_classes: int, arch: ArchConfig | None = None) -> ModelState:
    """Fan-in-scaled uniform init, fully determined by `seed`."""
    if num_classes < 2:
        raise ValueError("need at least 2 classes")
    arch = arch or ArchConfig()
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    params = {}
    shapes = arch.param_shapes(num_classes)
    for w_name, b_name in zip(PARAM_NAMES[0::2], PARAM_NAMES[1::2]):
        w_shape = shapes[w_name]
        fan_in = int(np.prod(w_shape[1:]))
        bound = 1.0 / np.sqrt(fan_in)
        params[w_name] = rng.uniform(-bound, bound, size=w_shape).astype(np.float32)
        params[b_name] = rng.uniform(-bound, bound, size=shapes[b_name]).astype(np.float32)
    return ModelState(params, num_classes, seed, arch)


def _conv_same(x, w, b):
    # x [B, Cin, L], w [Cout, Cin, k] -> y [B, Cout, L], windows of padded x
    k = w.shape[2]
    pad = (k - 1) // 2
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    win = sliding_window_view(xp, k, axis=2)          # [B, Cin, L, k]
    y = np.tensordot(win, w, axes=([1, 3], [1, 2]))   # [B, L, Cout]
    return np.ascontiguousarray(y.transpose(0, 2, 1)) + b[None, :, None], win


def _conv_same_backward(dy, win, w, input_len):
    # dy [B, Cout, L]; win are the forward windows of the padded input
    k = w.shape[2]
    pad = (k - 1) // 2
    dw = np.tensordot(dy, win, axes=([0, 2], [0, 2]))  # [Cout, Cin, k]
    db = dy.sum(axis=(0, 2))
    tmp = np.tensordot(dy, w, axes=([1], [0]))         # [B, L, Cin, k]
    dxp = np.zeros((dy.shape[0], w.shape[1], input_len + 2 * pad), dtype=dy.dtype)
    for t in range(k):
        dxp[:, :, t:t + dy.shape[2]] += tmp[:, :, :, t].transpose(0, 2, 1)
    return dw, db, dxp[:, :, pad:pad + input_len]


def _maxpool2(x):
    # stride-2 window-2 max pool; first maximal index wins (np.argmax rule)
    half = x.shape[2] // 2
    pairs = x[:, :, :2 * half].reshape(x.shape[0], x.shape[1], half, 2)
    idx = np.argmax(pairs, axis=3)
    out = np.take_along_axis(pairs, idx[..., None], axis=3)[..., 0]
    return out, idx


def _maxpool2_backward(dy, idx, input_len):
    half = dy.shape[2]
    dpairs = np.zeros((dy.shape[0], dy.shape[1], half, 2), dtype=dy.dtype)
    np.put_along_axis(dpairs, idx[..., None], dy[..., None], axis=3)
    dx = np.zeros((dy.shape[0], dy.shape[1], input_len), dtype=dy.dtype)
    dx[:, :, :2 * half] = dpairs.reshape(dy.shape[0], dy.shape[1], 2 * half)
    return dx


def _cast_params(model: ModelState, dtype) -> dict[str, np.ndarray]:
    return {k: v.astype(dtype, copy=False) for k, v in model.params.items()}


def _forward_cached(model: ModelState, x: np.ndarray, dtype=np.float32):
    p = _cast_params(model, dtype)
    x = x.astype(dtype, copy=False)
    z1, win1 = _conv_same(x, p["conv1_w"], p["conv1_b"])
    a1 = np.maximum(z1, 0)
    p1, i1 = _maxpool2(a1)
    z2, win2 = _conv_same(p1, p["conv2_w"], p["conv2_b"])
    a2 = np.maximum(z2, 0)
    p2, i2 = _maxpool2(a2)
    flat = p2.reshape(len(x), -1)
    h = np.maximum(flat @ p["fc1_w"].T + p["fc1_b"], 0)
    logits = h @ p["fc2_w"].T + p["fc2_b"]
    cache = dict(p=p, win1=win1, a1=a1, i1=i1, p1=p1, win2=win2, a2=a2, i2=i2,
                 flat=flat, h=h)
    return logits, cache


def forward(model: ModelState, batch: np.ndarray, dtype=np.float32):
    """Logits [n, C] and penultimate features [n, hidden] for a signal batch."""
    batch = _check_batch(model, batch)
    logits, cache = _forward_cached(model, batch, dtype)
    return logits, cache["h"]


def _check_batch(model: ModelState, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch)
    if batch.ndim == 2:
        batch = batch[np.newaxis]
    expected = (model.arch.in_channels, model.arch.signal_len)
    if batch.ndim != 3 or batch.shape[1:] != expected:
        raise ValueError(f"batch shape {batch.shape} incompatible with model input {expected}")
    return batch


def _stable_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def batch_loss(model: ModelState, batch: np.ndarray, labels: np.ndarray,
               dtype=np.float32) -> float:
    """Mean cross-entropy of the batch (forward only)."""
    batch = _check_batch(model, batch)
    logits, _ = _forward_cached(model, batch, dtype)
    p = _stable_softmax(logits)
    return float(np.mean(-np.log(p[np.arange(len(labels)), labels])))


def loss_and_gradients(model: ModelState, batch: np.ndarray, labels: np.ndarray,
                       dtype=np.float32):
    """Mean cross-entropy over the batch and its exact gradient for every
    parameter tensor."""
    batch = _check_batch(model, batch)
    labels = np.asarray(labels, dtype=np.int64)
    if labels.max() >= model.num_classes or labels.min() < 0:
        raise ValueError("label out of range")
    n = len(batch)
    logits, c = _forward_cached(model, batch, dtype)
    p = c["p"]
    probs = _stable_softmax(logits)
    loss = float(np.mean(-np.log(probs[np.arange(n), labels])))

    g = probs.astype(dtype, copy=True)
    g[np.arange(n), labels] -= 1
    g /= n                                             # [n, C]
    grads = {}
    grads["fc2_w"] = g.T @ c["h"]
    grads["fc2_b"] = g.sum(axis=0)
    dh = g @ p["fc2_w"]
    dh *= c["h"] > 0
    grads["fc1_w"] = dh.T @ c["flat"]
    grads["fc1_b"] = dh.sum(axis=0)
    dflat = dh @ p["fc1_w"]

    arch = model.arch
    l_after1 = arch.signal_len // 2
    dp2 = dflat.reshape(n, arch.conv_channels[1], arch.pooled_len)
    da2 = _maxpool2_backward(dp2, c["i2"], l_after1)
    da2 *= c["a2"] > 0
    grads["conv2_w"], grads["conv2_b"], dp1 = _conv_same_backward(
        da2, c["win2"], p["conv2_w"], l_after1)
    da1 = _maxpool2_backward(dp1, c["i1"], arch.signal_len)
    da1 *= c["a1"] > 0
    grads["conv1_w"], grads["conv1_b"], _ = _conv_same_backward(
        da1, c["win1"], p["conv1_w"], arch.signal_len)
    return loss, grads


def per_sample_gradient_norm(model: ModelState, sample: np.ndarray, label: int,
                             dtype=np.float32) -> float:
    """L2 norm over all parameters of the single-sample loss gradient."""
    _, grads = loss_and_gradients(model, sample[np.newaxis],
                                  np.array([label]), dtype)
    total = 0.0
    for name in PARAM_NAMES:
        total += float(np.sum(np.square(grads[name].astype(np.float64))))
    return float(np.sqrt(total))


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0


def init_adam(model: ModelState) -> AdamState:
    return AdamState(m={k: np.zeros_like(v) for k, v in model.params.items()},
                     v={k: np.zeros_like(v) for k, v in model.params.items()})


def adam_step(model: ModelState, adam: AdamState, grads: dict,
              learning_rate: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> ModelState:
    """One Adam update with bias correction; mutates model and adam in place."""
    adam.t += 1
    b1t = 1.0 - beta1 ** adam.t
    b2t = 1.0 - beta2 ** adam.t
    for name in PARAM_NAMES:
        g = grads[name].astype(np.float32, copy=False)
        m = adam.m[name]
        v = adam.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * np.square(g)
        update = (m / b1t) / (np.sqrt(v / b2t) + eps)
        model.params[name] -= np.float32(learning_rate) * update
    return model


def predict_logits(model: ModelState, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
    out = np.empty((len(x), model.num_classes), dtype=np.float32)
    for start in range(0, len(x), batch_size):
        out[start:start + batch_size] = forward(model, x[start:start + batch_size])[0]
    return out


def predict_labels(model: ModelState, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
    return np.argmax(predict_logits(model, x, batch_size), axis=1)


def extract_features(model: ModelState, x: np.ndarray, batch_size: int = 512) -> np.ndarray:
    out = np.empty((len(x), model.arch.hidden_units), dtype=np.float32)
    for start in range(0, len(x), batch_size):
        out[start:start + batch_size] = forward(model, x[start:start + batch_size])[1]
    return out


def train(model: ModelState, x: np.ndarray, y: np.ndarray,
          config: TrainConfig) -> tuple[ModelState, CorrectnessLog | None]:
    """Adam-on-minibatch training; the input model is left untouched.

    With record_correctness, prediction correctness over the training set
    (original order) is evaluated after every epoch.
    """
    x = np.asarray(x, dtype=np.float32)
    y = np.asarray(y, dtype=np.int64)
    if len(x) == 0:
        raise ValueError("empty training set")
    if len(x) != len(y):
        raise ValueError("x/y length mismatch")
    model = model.copy()
    adam = init_adam(model)
    log = np.empty((config.epochs, len(x)), dtype=bool) if config.record_correctness else None
    for epoch in range(config.epochs):
        ss = np.random.SeedSequence(config.shuffle_seed, spawn_key=(epoch,))
        perm = np.random.Generator(np.random.PCG64(ss)).permutation(len(x))
        for start in range(0, len(x), config.batch_size):
            take = perm[start:start + config.batch_size]
            _, grads = loss_and_gradients(model, x[take], y[take])
            adam_step(model, adam, grads, config.learning_rate)
        if log is not None:
            log[epoch] = predict_labels(model, x) == y
    return model, (CorrectnessLog(log) if log is not None else None)


def serialize_model(model: ModelState) -> bytes:
    a = model.arch
    header = _CKPT_HEADER.pack(
        CHECKPOINT_MAGIC, CHECKPOINT_VERSION, a.signal_len, a.in_channels,
        a.conv_channels[0], a.conv_channels[1], a.kernel_sizes[0],
        a.kernel_sizes[1], a.hidden_units, model.num_classes,
        model.init_seed)
    blobs = [model.params[n].astype("<f4").tobytes() for n in PARAM_NAMES]
    return header + b"".join(blobs)


def save_model(model: ModelState, path) -> None:
    atomic_write_bytes(path, serialize_model(model))


def load_model(path) -> ModelState:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _CKPT_HEADER.size:
        raise CorruptDatasetError(f"{path}: truncated checkpoint header (offset 0)")
    (magic, version, signal_len, in_ch, c1, c2, k1, k2, hidden,
     num_classes, init_seed) = _CKPT_HEADER.unpack_from(raw, 0)
    if magic != CHECKPOINT_MAGIC:
        raise CorruptDatasetError(f"{path}: bad checkpoint magic {magic!r} at offset 0")
    if version != CHECKPOINT_VERSION:
        raise CorruptDatasetError(f"{path}: unsupported checkpoint version {version}")
    arch = ArchConfig(signal_len, in_ch, (c1, c2), (k1, k2), hidden)
    shapes = arch.param_shapes(num_classes)
    expected = _CKPT_HEADER.size + 4 * sum(int(np.prod(s)) for s in shapes.values())
    if len(raw) != expected:
        raise CorruptDatasetError(
            f"{path}: expected {expected} bytes, got {len(raw)}")
    params = {}
    offset = _CKPT_HEADER.size
    for name in PARAM_NAMES:
        count = int(np.prod(shapes[name]))
        params[name] = np.frombuffer(raw, dtype="<f4", count=count,
                                     offset=offset).reshape(shapes[name]).copy()
        offset += 4 * count
    return ModelState(params, num_classes, init_seed, arch)


def model_digest(model: ModelState) -> int:
    """Content hash of the checkpoint serialization; identifies a snapshot."""
    return fnv1a64(serialize_model(model))


def clone_model(model: ModelState) -> ModelState:
    return copy.deepcopy(model)
