"""Small 1D-CNN engine: forward pass, hand-derived gradients, serialization.

The architecture is fixed: four Conv1D blocks (4, 8, 16, 32 filters, kernel 3,
"same" padding, ReLU) with 2-wide max pooling between them, then dense layers
of 32 and 16 units (ReLU) and a final dense + softmax readout. Inverted
dropout sits between the 16-unit layer and the readout by default; an
alternative mode drops before every dense layer.

All batched primitives are written so each sample's result is computed by a
fixed-shape operation independent of batch composition: scoring a window
alone or inside any batch yields bit-identical probabilities.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import BlobError, ConfigError, NumericError
from .window import Window

FILTERS = (4, 8, 16, 32)
KERNEL = 3
DENSE_UNITS = (32, 16)
PROB_CLAMP = 1e-12

BLOB_MAGIC = b"BALM1"
_HEADER = struct.Struct("<5sIIIfBI")  # magic, c_in, length, classes, p, drop_all, n_floats


@dataclass(frozen=True)
class Architecture:
    """Shape descriptor; every parameter tensor size follows from it."""

    c_in: int = 2
    length: int = 32
    n_classes: int = 2
    dropout_p: float = 0.3
    dropout_all: bool = False

    def __post_init__(self):
        if self.c_in < 1:
            raise ConfigError(f"c_in must be >= 1, got {self.c_in}")
        if self.length < 8 or self.length % 8 != 0:
            raise ConfigError(f"length must be a positive multiple of 8, got {self.length}")
        if self.n_classes < 2:
            raise ConfigError(f"n_classes must be >= 2, got {self.n_classes}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"dropout_p must be in [0, 1), got {self.dropout_p}")

    @property
    def pooled_lengths(self) -> tuple[int, int, int]:
        return (self.length // 2, self.length // 4, self.length // 8)

    @property
    def flatten_width(self) -> int:
        return FILTERS[-1] * (self.length // 8)

    @property
    def dense_dims(self) -> tuple[tuple[int, int], ...]:
        """(out, in) per dense layer."""
        return (
            (DENSE_UNITS[0], self.flatten_width),
            (DENSE_UNITS[1], DENSE_UNITS[0]),
            (self.n_classes, DENSE_UNITS[1]),
        )

    @property
    def dropout_sites(self) -> tuple[int, ...]:
        """Dense-layer indices whose input gets a dropout mask."""
        return (0, 1, 2) if self.dropout_all else (2,)

    def param_count(self) -> int:
        n = 0
        c = self.c_in
        for f in FILTERS:
            n += f * c * KERNEL + f
            c = f
        for out, inp in self.dense_dims:
            n += out * inp + out
        return n


@dataclass(frozen=True)
class Off:
    """Deterministic pass, no units dropped."""


@dataclass(frozen=True)
class Stochastic:
    """Sample one inverted-dropout mask set from the seeded stream."""

    seed: int


DropoutMode = Off | Stochastic
OFF = Off()


@dataclass
class ModelParams:
    """All network weights plus Adam moment state.

    Arrays share one dtype (float32 by default, float64 for gradient
    checking). Adam state is lazily allocated on the first optimizer step and
    is not part of the serialized blob.
    """

    arch: Architecture
    conv_w: list[np.ndarray]
    conv_b: list[np.ndarray]
    dense_w: list[np.ndarray]
    dense_b: list[np.ndarray]
    adam_m: Optional[dict[str, np.ndarray]] = None
    adam_v: Optional[dict[str, np.ndarray]] = None
    adam_t: int = 0

    @property
    def dtype(self) -> np.dtype:
        return self.conv_w[0].dtype

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        """Weight tensors in canonical (blob) order."""
        out: list[tuple[str, np.ndarray]] = []
        out += [(f"conv{i + 1}.w", w) for i, w in enumerate(self.conv_w)]
        out += [(f"conv{i + 1}.b", b) for i, b in enumerate(self.conv_b)]
        out += [(f"dense{i + 1}.w", w) for i, w in enumerate(self.dense_w)]
        out += [(f"dense{i + 1}.b", b) for i, b in enumerate(self.dense_b)]
        return out

    def copy(self) -> "ModelParams":
        return ModelParams(
            arch=self.arch,
            conv_w=[w.copy() for w in self.conv_w],
            conv_b=[b.copy() for b in self.conv_b],
            dense_w=[w.copy() for w in self.dense_w],
            dense_b=[b.copy() for b in self.dense_b],
            adam_m=None if self.adam_m is None else {k: v.copy() for k, v in self.adam_m.items()},
            adam_v=None if self.adam_v is None else {k: v.copy() for k, v in self.adam_v.items()},
            adam_t=self.adam_t,
        )

    def astype(self, dtype) -> "ModelParams":
        """Copy with all weight arrays cast; Adam state is reset."""
        return ModelParams(
            arch=self.arch,
            conv_w=[w.astype(dtype) for w in self.conv_w],
            conv_b=[b.astype(dtype) for b in self.conv_b],
            dense_w=[w.astype(dtype) for w in self.dense_w],
            dense_b=[b.astype(dtype) for b in self.dense_b],
        )

    def allclose(self, other: "ModelParams", atol: float = 0.0) -> bool:
        mine = self.named_arrays()
        theirs = other.named_arrays()
        return all(
            a.shape == b.shape and np.allclose(a, b, rtol=0.0, atol=atol)
            for (_, a), (_, b) in zip(mine, theirs)
        )


@dataclass
class Gradients:
    """Per-tensor gradients, shapes mirroring ModelParams."""

    conv_w: list[np.ndarray]
    conv_b: list[np.ndarray]
    dense_w: list[np.ndarray]
    dense_b: list[np.ndarray]

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        out: list[tuple[str, np.ndarray]] = []
        out += [(f"conv{i + 1}.w", w) for i, w in enumerate(self.conv_w)]
        out += [(f"conv{i + 1}.b", b) for i, b in enumerate(self.conv_b)]
        out += [(f"dense{i + 1}.w", w) for i, w in enumerate(self.dense_w)]
        out += [(f"dense{i + 1}.b", b) for i, b in enumerate(self.dense_b)]
        return out


def init_params(arch: Architecture, seed: int, dtype=np.float32) -> ModelParams:
    """He-initialized weights, zero biases; deterministic in seed."""
    rng = np.random.default_rng(seed)
    conv_w, conv_b = [], []
    c = arch.c_in
    for f in FILTERS:
        std = np.sqrt(2.0 / (c * KERNEL))
        conv_w.append((rng.standard_normal((f, c, KERNEL)) * std).astype(dtype))
        conv_b.append(np.zeros(f, dtype=dtype))
        c = f
    dense_w, dense_b = [], []
    for out, inp in arch.dense_dims:
        std = np.sqrt(2.0 / inp)
        dense_w.append((rng.standard_normal((out, inp)) * std).astype(dtype))
        dense_b.append(np.zeros(out, dtype=dtype))
    return ModelParams(arch, conv_w, conv_b, dense_w, dense_b)


# ---------------------------------------------------------------------------
# primitives
#
# Batched matmuls are arranged as per-sample fixed-shape products ((1, k) or
# (F, C) operands) so a sample's output never depends on who else is in the
# batch.


def _conv1d_same(x: np.ndarray, w: np.ndarray, b: np.ndarray):
    """x (N, C, L), w (F, C, K) -> out (N, F, L); returns (out, xpad)."""
    n, c, length = x.shape
    pad = KERNEL // 2
    xpad = np.zeros((n, c, length + 2 * pad), dtype=x.dtype)
    xpad[:, :, pad : pad + length] = x
    out = np.zeros((n, w.shape[0], length), dtype=x.dtype)
    for j in range(KERNEL):
        out += np.matmul(w[:, :, j], xpad[:, :, j : j + length])
    out += b[:, None]
    return out, xpad


def _conv1d_backward(dout: np.ndarray, xpad: np.ndarray, w: np.ndarray):
    """Gradients for _conv1d_same; returns (dx, dw, db)."""
    n, f, length = dout.shape
    pad = KERNEL // 2
    dw = np.empty_like(w)
    dxpad = np.zeros_like(xpad)
    for j in range(KERNEL):
        dw[:, :, j] = np.tensordot(dout, xpad[:, :, j : j + length], axes=([0, 2], [0, 2]))
        dxpad[:, :, j : j + length] += np.matmul(w[:, :, j].T, dout)
    db = dout.sum(axis=(0, 2))
    return dxpad[:, :, pad : pad + length], dw, db


def _maxpool2(x: np.ndarray):
    """Width-2 max pool; ties keep the earlier element. Returns (out, argmax)."""
    n, c, length = x.shape
    xr = x.reshape(n, c, length // 2, 2)
    idx = xr.argmax(axis=3)
    out = np.take_along_axis(xr, idx[..., None], axis=3)[..., 0]
    return out, idx


def _maxpool2_backward(dout: np.ndarray, idx: np.ndarray, length: int) -> np.ndarray:
    n, c, half = dout.shape
    dxr = np.zeros((n, c, half, 2), dtype=dout.dtype)
    np.put_along_axis(dxr, idx[..., None], dout[..., None], axis=3)
    return dxr.reshape(n, c, length)


def _dense(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """x (N, in), w (out, in) -> (N, out), computed row by row."""
    return np.matmul(x[:, None, :], w.T)[:, 0, :] + b


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _dropout_factors(
    arch: Architecture, n: int, mode: DropoutMode, dtype
) -> list[Optional[np.ndarray]]:
    """Per-dense-layer multiplicative factors (mask / keep-prob), or None."""
    factors: list[Optional[np.ndarray]] = [None, None, None]
    if isinstance(mode, Off):
        return factors
    rng = np.random.default_rng(mode.seed)
    p = arch.dropout_p
    scale = np.asarray(1.0 / (1.0 - p), dtype=dtype)
    widths = {0: arch.flatten_width, 1: DENSE_UNITS[0], 2: DENSE_UNITS[1]}
    for site in arch.dropout_sites:
        keep = rng.random((n, widths[site])) >= p
        factors[site] = keep.astype(dtype) * scale
    return factors


def _check_finite(name: str, a: np.ndarray, check: bool):
    if check and not np.all(np.isfinite(a)):
        raise NumericError(f"non-finite values after layer {name}")


def _forward_trunk(params: ModelParams, x: np.ndarray, check: bool = False):
    """Conv/pool stack up to the flattened feature vector. Returns (flat, cache)."""
    cache = {"xpad": [], "z": [], "pool_idx": [], "pool_in_len": []}
    a = x
    for i in range(4):
        z, xpad = _conv1d_same(a, params.conv_w[i], params.conv_b[i])
        _check_finite(f"conv{i + 1}", z, check)
        cache["xpad"].append(xpad)
        cache["z"].append(z)
        a = np.maximum(z, 0)
        if i < 3:
            cache["pool_in_len"].append(a.shape[2])
            a, idx = _maxpool2(a)
            cache["pool_idx"].append(idx)
    cache["pre_flat_shape"] = a.shape
    flat = a.reshape(a.shape[0], -1)
    return flat, cache


def _forward_head(params: ModelParams, flat: np.ndarray, factors, check: bool = False):
    """Dense stack from flattened features to class probabilities."""
    cache = {"inputs": [], "z": [], "factors": factors}
    a = flat
    z = None
    for i in range(3):
        if factors[i] is not None:
            a = a * factors[i]
        cache["inputs"].append(a)
        z = _dense(a, params.dense_w[i], params.dense_b[i])
        _check_finite(f"dense{i + 1}", z, check)
        cache["z"].append(z)
        if i < 2:
            a = np.maximum(z, 0)
    probs = _softmax(z)
    _check_finite("softmax", probs, check)
    return probs, cache


def _validate_input(params: ModelParams, x: np.ndarray):
    arch = params.arch
    if x.ndim != 3 or x.shape[1] != arch.c_in or x.shape[2] != arch.length:
        raise ConfigError(
            f"input shape mismatch: expected (n, {arch.c_in}, {arch.length}), "
            f"got {tuple(x.shape)}"
        )


def forward_batch(
    params: ModelParams, x: np.ndarray, mode: DropoutMode = OFF, check: bool = False
) -> np.ndarray:
    """Probabilities for a stack of inputs, shape (N, C_in, L) -> (N, n_classes)."""
    x = np.ascontiguousarray(x, dtype=params.dtype)
    _validate_input(params, x)
    flat, _ = _forward_trunk(params, x, check)
    factors = _dropout_factors(params.arch, x.shape[0], mode, params.dtype)
    probs, _ = _forward_head(params, flat, factors, check)
    return probs


def forward(params: ModelParams, window: Window, mode: DropoutMode = OFF) -> np.ndarray:
    """Class probabilities for one window; pure in Off mode, seeded otherwise."""
    x = window.channels[None, :, :]
    return forward_batch(params, x, mode, check=True)[0]


def batch_loss(params: ModelParams, batch: Sequence[Window], mode: DropoutMode = OFF) -> float:
    """Mean cross-entropy over a labeled batch (no gradients)."""
    probs, y = _forward_labeled(params, batch, mode)[:2]
    picked = probs[np.arange(len(batch)), y]
    return float(-np.mean(np.log(np.maximum(picked, PROB_CLAMP))))


def _stack_labeled(params: ModelParams, batch: Sequence[Window]):
    if len(batch) == 0:
        raise ValueError("batch must be non-empty")
    for w in batch:
        if w.label is None:
            raise ValueError(f"window {w.id!r} is unlabeled; every batch window needs a label")
    x = np.stack([w.channels for w in batch]).astype(params.dtype)
    y = np.array([w.label for w in batch], dtype=np.int64)
    return x, y


def _forward_labeled(params: ModelParams, batch: Sequence[Window], mode: DropoutMode):
    x, y = _stack_labeled(params, batch)
    _validate_input(params, x)
    flat, trunk_cache = _forward_trunk(params, x)
    factors = _dropout_factors(params.arch, x.shape[0], mode, params.dtype)
    probs, head_cache = _forward_head(params, flat, factors)
    return probs, y, flat, trunk_cache, head_cache


def grad(
    params: ModelParams, batch: Sequence[Window], mode: DropoutMode = OFF
) -> tuple[Gradients, float]:
    """Mean-loss gradients over a labeled batch, backpropagated layer by layer."""
    probs, y, flat, tc, hc = _forward_labeled(params, batch, mode)
    n = len(batch)
    picked = probs[np.arange(n), y]
    loss = float(-np.mean(np.log(np.maximum(picked, PROB_CLAMP))))

    dtype = params.dtype
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), y] = 1
    dz = (probs - onehot) / np.asarray(n, dtype=dtype)

    dense_w_g = [np.empty(0)] * 3
    dense_b_g = [np.empty(0)] * 3
    factors = hc["factors"]
    for i in (2, 1, 0):
        a_in = hc["inputs"][i]
        dense_w_g[i] = np.tensordot(dz, a_in, axes=([0], [0]))
        dense_b_g[i] = dz.sum(axis=0)
        da = np.matmul(dz[:, None, :], params.dense_w[i])[:, 0, :]
        if factors[i] is not None:
            da = da * factors[i]
        if i > 0:
            dz = da * (hc["z"][i - 1] > 0)
    dflat = da

    da = dflat.reshape(tc["pre_flat_shape"])
    conv_w_g = [np.empty(0)] * 4
    conv_b_g = [np.empty(0)] * 4
    for i in (3, 2, 1, 0):
        if i < 3:
            da = _maxpool2_backward(da, tc["pool_idx"][i], tc["pool_in_len"][i])
        dzc = da * (tc["z"][i] > 0)
        da, conv_w_g[i], conv_b_g[i] = _conv1d_backward(dzc, tc["xpad"][i], params.conv_w[i])

    return Gradients(conv_w_g, conv_b_g, dense_w_g, dense_b_g), loss


# ---------------------------------------------------------------------------
# serialization


def save(params: ModelParams) -> bytes:
    """Versioned binary blob: header, float32 LE weights in canonical order, CRC."""
    arch = params.arch
    payload = b"".join(
        np.ascontiguousarray(a, dtype="<f4").tobytes() for _, a in params.named_arrays()
    )
    n_floats = len(payload) // 4
    header = _HEADER.pack(
        BLOB_MAGIC, arch.c_in, arch.length, arch.n_classes,
        arch.dropout_p, int(arch.dropout_all), n_floats,
    )
    return header + payload + struct.pack("<I", zlib.crc32(payload))


def load(blob: bytes) -> ModelParams:
    """Decode a blob produced by save(); raises BlobError on any defect."""
    if len(blob) < _HEADER.size:
        raise BlobError(f"blob too short for header ({len(blob)} bytes)")
    magic, c_in, length, n_classes, p, drop_all, n_floats = _HEADER.unpack_from(blob)
    if magic != BLOB_MAGIC:
        raise BlobError(f"bad magic {magic!r}; expected {BLOB_MAGIC!r} (unsupported version?)")
    try:
        arch = Architecture(c_in, length, n_classes, round(float(p), 6), bool(drop_all))
    except ConfigError as e:
        raise BlobError(f"invalid architecture descriptor: {e}") from e
    if n_floats != arch.param_count():
        raise BlobError(
            f"parameter count mismatch: header says {n_floats}, "
            f"architecture needs {arch.param_count()}"
        )
    expected = _HEADER.size + 4 * n_floats + 4
    if len(blob) != expected:
        raise BlobError(f"truncated or oversized blob: {len(blob)} bytes, expected {expected}")
    payload = blob[_HEADER.size : _HEADER.size + 4 * n_floats]
    (crc,) = struct.unpack_from("<I", blob, _HEADER.size + 4 * n_floats)
    if crc != zlib.crc32(payload):
        raise BlobError("checksum mismatch: blob is corrupt")
    flat = np.frombuffer(payload, dtype="<f4").astype(np.float32)
    if not np.all(np.isfinite(flat)):
        raise BlobError("blob contains non-finite parameter values")

    template = init_params(arch, seed=0)
    pos = 0
    def take(shape):
        nonlocal pos
        k = int(np.prod(shape))
        a = flat[pos : pos + k].reshape(shape).copy()
        pos += k
        return a

    conv_w = [take(w.shape) for w in template.conv_w]
    conv_b = [take(b.shape) for b in template.conv_b]
    dense_w = [take(w.shape) for w in template.dense_w]
    dense_b = [take(b.shape) for b in template.dense_b]
    return ModelParams(arch, conv_w, conv_b, dense_w, dense_b)
