"""Dataset ingestion, stream windowing, normalization, and synthetic signals.

The on-disk format is NDJSON: an optional first meta line
`{"meta":{"channels":["hr","sc"],"window_len":32}}` followed by one record
per line, `{"id": str, "label": 0|1|null, "channels": [[...],[...]]}`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .errors import DataError
from .window import Window

DEFAULT_CHANNELS = ("hr", "sc")

# synthetic-signal shape constants, fixed so datasets are reproducible
HR_BASELINE = 70.0
HR_CLASS_SHIFT = 10.0
HR_WAVE_AMPLITUDE = 2.0
SC_NOISE_FRACTION = 0.03
SC_BUMP_RATE = 4.0
SC_BUMP_AMPLITUDE = (0.4, 2.0)
SC_BUMP_WIDTH = 2.0


@dataclass
class Dataset:
    """Windows plus bookkeeping: split tags, channel names, normalization state."""

    windows: list[Window]
    channel_names: tuple[str, ...] = DEFAULT_CHANNELS
    split: dict[str, str] = field(default_factory=dict)
    norm_stats: Optional[dict[str, list[float]]] = None
    normalized: bool = False

    def __post_init__(self):
        ids = [w.id for w in self.windows]
        if len(set(ids)) != len(ids):
            raise ValueError("dataset window ids must be unique")
        if self.windows:
            shape = self.windows[0].channels.shape
            for w in self.windows:
                if w.channels.shape != shape:
                    raise ValueError(
                        f"window {w.id!r} has shape {w.channels.shape}, expected {shape}"
                    )

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def window_len(self) -> int:
        return self.windows[0].length if self.windows else 0

    @property
    def n_channels(self) -> int:
        return self.windows[0].n_channels if self.windows else 0

    def by_split(self, tag: str) -> list[Window]:
        return [w for w in self.windows if self.split.get(w.id) == tag]

    def tag_splits(self, train_ids, pool_ids=(), test_ids=()):
        for wid in train_ids:
            self.split[wid] = "train"
        for wid in pool_ids:
            self.split[wid] = "pool"
        for wid in test_ids:
            self.split[wid] = "test"


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the two-channel synthetic stress-signal generator."""

    n_windows: int
    length: int = 32
    sep: float = 1.0
    noise_std: float = 20.0
    balance: float = 0.5
    seed: int = 0
    id_prefix: str = "w"

    def __post_init__(self):
        if self.n_windows < 2:
            raise ValueError(f"n_windows must be >= 2, got {self.n_windows}")
        if not 0 < self.balance < 1:
            raise ValueError(f"balance must lie in (0, 1), got {self.balance}")
        if self.sep < 0:
            raise ValueError(f"sep must be >= 0, got {self.sep}")


def load_ndjson(path) -> Dataset:
    """Parse an NDJSON dataset file; failures name the line and the cause."""
    windows: list[Window] = []
    seen: set[str] = set()
    channel_names = DEFAULT_CHANNELS
    expected_shape = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise DataError(f"{path}:{lineno}: malformed JSON ({e.msg})") from e
            if lineno == 1 and isinstance(record, dict) and "meta" in record:
                meta = record["meta"]
                if "channels" in meta:
                    channel_names = tuple(meta["channels"])
                if "window_len" in meta:
                    expected_shape = (len(channel_names), int(meta["window_len"]))
                continue
            windows.append(_parse_record(record, path, lineno, seen, expected_shape))
            if expected_shape is None:
                expected_shape = windows[-1].channels.shape
    return Dataset(windows, channel_names=channel_names)


def _parse_record(record, path, lineno, seen, expected_shape) -> Window:
    if not isinstance(record, dict):
        raise DataError(f"{path}:{lineno}: record must be a JSON object")
    for key in ("id", "channels"):
        if key not in record:
            raise DataError(f"{path}:{lineno}: missing required field {key!r}")
    wid = record["id"]
    if not isinstance(wid, str):
        raise DataError(f"{path}:{lineno}: id must be a string")
    if wid in seen:
        raise DataError(f"{path}:{lineno}: duplicate id {wid!r}")
    label = record.get("label")
    if label not in (0, 1, None):
        raise DataError(f"{path}:{lineno}: label must be 0, 1 or null, got {label!r}")
    channels = record["channels"]
    try:
        arr = np.asarray(channels, dtype=np.float64)
    except (ValueError, TypeError) as e:
        raise DataError(f"{path}:{lineno}: channels are not a rectangular numeric matrix") from e
    if arr.ndim != 2:
        raise DataError(f"{path}:{lineno}: channels must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{path}:{lineno}: non-finite sample values")
    if expected_shape is not None and arr.shape != expected_shape:
        raise DataError(
            f"{path}:{lineno}: shape {arr.shape} does not match dataset shape {expected_shape}"
        )
    seen.add(wid)
    return Window(wid, arr, label)


def save_ndjson(dataset: Dataset, path) -> None:
    """Write the dataset with a leading meta line; inverse of load_ndjson."""
    with open(path, "w", encoding="utf-8") as fh:
        meta = {"meta": {"channels": list(dataset.channel_names),
                         "window_len": dataset.window_len}}
        fh.write(json.dumps(meta, separators=(",", ":")) + "\n")
        for w in dataset.windows:
            record = {
                "id": w.id,
                "label": w.label,
                "channels": [[float(v) for v in row] for row in w.channels],
            }
            fh.write(json.dumps(record, separators=(",", ":")) + "\n")


def window_signal(
    streams: Mapping[str, Sequence[float]],
    length: int,
    stride: int,
    labels: Optional[Sequence[int]] = None,
    id_prefix: str = "w",
) -> list[Window]:
    """Cut equal-length channel streams into (possibly overlapping) windows.

    A window's label is the majority label of its samples; ties go to the
    later class index. Yields floor((N - length) / stride) + 1 windows.
    """
    if stride < 1:
        raise ValueError(f"stride must be >= 1, got {stride}")
    arrays = {name: np.asarray(seq, dtype=np.float64) for name, seq in streams.items()}
    lengths = {name: a.shape[0] for name, a in arrays.items()}
    if len(set(lengths.values())) != 1:
        raise ValueError(f"streams differ in length: {lengths}")
    n = next(iter(lengths.values()))
    if n < length:
        raise ValueError(f"streams of length {n} are shorter than window length {length}")
    if labels is not None and len(labels) != n:
        raise ValueError(f"labels length {len(labels)} does not match stream length {n}")

    windows = []
    for k, offset in enumerate(range(0, n - length + 1, stride)):
        chans = np.stack([arrays[name][offset : offset + length] for name in arrays])
        label = None
        if labels is not None:
            counts = np.bincount(np.asarray(labels[offset : offset + length], dtype=np.int64))
            best = counts.max()
            label = int(max(np.flatnonzero(counts == best)))
        windows.append(Window(f"{id_prefix}{k:05d}", chans, label))
    return windows


def zscore_normalize(dataset: Dataset, stats_split: str = "train") -> Dataset:
    """Normalize every channel with mean/std taken from the given split only.

    Near-constant channels (std < 1e-9) are shifted but not scaled. Rejects
    datasets that are already normalized.
    """
    if dataset.normalized:
        raise ValueError("dataset is already normalized; re-normalization is rejected")
    source = dataset.by_split(stats_split)
    if not source:
        raise ValueError(f"no windows tagged {stats_split!r} to compute statistics from")
    stacked = np.stack([w.channels for w in source]).astype(np.float64)  # (n, C, L)
    mean = stacked.mean(axis=(0, 2))
    std = stacked.std(axis=(0, 2))
    std = np.where(std < 1e-9, 1.0, std)
    out_windows = [
        Window(w.id, (w.channels - mean[:, None]) / std[:, None], w.label)
        for w in dataset.windows
    ]
    return Dataset(
        out_windows,
        channel_names=dataset.channel_names,
        split=dict(dataset.split),
        norm_stats={"mean": mean.tolist(), "std": std.tolist()},
        normalized=True,
    )


def synth_generate(config: SynthConfig) -> Dataset:
    """Two-channel labeled windows standing in for wearable stress recordings.

    Class 1 shifts the heart-rate-like channel up by `sep * 10` and adds
    phasic bumps to the skin-conductance-like channel at a rate proportional
    to `sep`; `sep = 0` makes the classes indistinguishable.
    """
    rng = np.random.default_rng(config.seed)
    n, length = config.n_windows, config.length
    n_stressed = int(math.floor(config.balance * n + 0.5))
    labels = np.array([1] * n_stressed + [0] * (n - n_stressed), dtype=np.int64)
    labels = labels[rng.permutation(n)]

    t = np.arange(length, dtype=np.float64)
    windows = []
    for k in range(n):
        y = int(labels[k])
        phase = rng.uniform(0, 2 * np.pi)
        cycles = rng.uniform(1.0, 3.0)
        hr = (
            HR_BASELINE
            + HR_CLASS_SHIFT * config.sep * y
            + HR_WAVE_AMPLITUDE * np.sin(2 * np.pi * cycles * t / length + phase)
            + rng.normal(0.0, config.noise_std, size=length)
        )
        tonic0 = rng.uniform(0.0, 1.0)
        slope = rng.uniform(0.0, 1.0)
        sc = tonic0 + slope * t / length
        n_bumps = rng.poisson(SC_BUMP_RATE * config.sep) if y == 1 else 0
        for _ in range(n_bumps):
            center = rng.uniform(0, length - 1)
            amp = rng.uniform(*SC_BUMP_AMPLITUDE)
            sc = sc + amp * np.exp(-((t - center) ** 2) / (2 * SC_BUMP_WIDTH**2))
        sc = sc + rng.normal(0.0, SC_NOISE_FRACTION * config.noise_std, size=length)
        windows.append(Window(f"{config.id_prefix}{k:05d}", np.stack([hr, sc]), y))
    return Dataset(windows, channel_names=DEFAULT_CHANNELS)
