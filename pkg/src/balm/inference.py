"""Approximate posterior predictive via repeated stochastic forward passes.

Each pass drops units with a mask derived from (seed, window id, pass index),
so a window's sample matrix never depends on pool order or batch grouping.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .network import (
    ModelParams,
    Stochastic,
    _dropout_factors,
    _forward_head,
    _forward_trunk,
    _validate_input,
)
from .seeding import stable_seed
from .window import Window


@dataclass
class PredictiveSamples:
    """T per-pass probability rows for one window, plus the seeds that made them."""

    window_id: str
    probs: np.ndarray  # (T, n_classes)
    pass_seeds: tuple[int, ...]

    def __post_init__(self):
        self.probs = np.asarray(self.probs)
        if self.probs.ndim != 2 or self.probs.shape[0] < 1:
            raise ValueError(f"probs must be a (T>=1, C) matrix, got shape {self.probs.shape}")
        sums = self.probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6) or np.any(self.probs < 0) or np.any(self.probs > 1):
            raise ValueError(f"rows of {self.window_id!r} are not probability vectors")

    @property
    def n_passes(self) -> int:
        return self.probs.shape[0]


def derive_pass_seed(seed: int, window_id: str, t: int) -> int:
    return stable_seed(seed, window_id, t)


def _stacked_factors(params: ModelParams, ids_and_seeds, dtype):
    """Row-per-pass dropout factors, each row drawn from its own stream."""
    per_row = [
        _dropout_factors(params.arch, 1, Stochastic(s), dtype) for _, s in ids_and_seeds
    ]
    sites = params.arch.dropout_sites
    stacked = [None, None, None]
    for site in sites:
        stacked[site] = np.concatenate([f[site] for f in per_row], axis=0)
    return stacked


def mc_predict(params: ModelParams, window: Window, n_passes: int, seed: int) -> PredictiveSamples:
    """Run `n_passes` stochastic forward passes over one window."""
    if n_passes < 1:
        raise ValueError(f"n_passes must be >= 1, got {n_passes}")
    x = np.ascontiguousarray(window.channels[None, :, :], dtype=params.dtype)
    _validate_input(params, x)
    flat, _ = _forward_trunk(params, x)
    tiled = np.repeat(flat, n_passes, axis=0)
    seeds = tuple(derive_pass_seed(seed, window.id, t) for t in range(n_passes))
    factors = _stacked_factors(params, [(window.id, s) for s in seeds], params.dtype)
    probs, _ = _forward_head(params, tiled, factors)
    return PredictiveSamples(window.id, probs, seeds)


def mc_predict_pool(
    params: ModelParams, windows: Sequence[Window], n_passes: int, seed: int
) -> list[PredictiveSamples]:
    """mc_predict over many windows at once; results match per-window calls exactly."""
    if n_passes < 1:
        raise ValueError(f"n_passes must be >= 1, got {n_passes}")
    if len(windows) == 0:
        return []
    x = np.stack([w.channels for w in windows]).astype(params.dtype)
    _validate_input(params, x)
    flat, _ = _forward_trunk(params, x)
    tiled = np.repeat(flat, n_passes, axis=0)  # rows grouped per window
    rows = [
        (w.id, derive_pass_seed(seed, w.id, t)) for w in windows for t in range(n_passes)
    ]
    factors = _stacked_factors(params, rows, params.dtype)
    probs, _ = _forward_head(params, tiled, factors)
    probs = probs.reshape(len(windows), n_passes, -1)
    out = []
    for i, w in enumerate(windows):
        seeds = tuple(s for _, s in rows[i * n_passes : (i + 1) * n_passes])
        out.append(PredictiveSamples(w.id, probs[i], seeds))
    return out


def predictive_mean(samples: PredictiveSamples) -> np.ndarray:
    """Column-wise mean of the sample rows, in float64."""
    return samples.probs.astype(np.float64).mean(axis=0)


def predictive_label(mean: np.ndarray) -> int:
    """Argmax readout; ties resolve to the lower class index."""
    return int(np.argmax(mean))
