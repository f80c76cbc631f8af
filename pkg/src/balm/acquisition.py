"""Pool-scoring functions that decide which windows are worth an oracle query.

All scores are computed in float64 with natural logarithms. Higher means
more informative; ranking is descending with window-id tie-breaking.
"""

from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np

from .inference import PredictiveSamples, predictive_mean
from .seeding import stable_seed

LOG_CLAMP = 1e-12
_NEG_TOL = 1e-9


class AcquisitionKind(str, Enum):
    MAX_ENTROPY = "max_entropy"
    BALD = "bald"
    VARIATION_RATIOS = "variation_ratios"
    RANDOM = "random"


def _entropy(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    return float(-(p * np.log(np.maximum(p, LOG_CLAMP))).sum())


def max_entropy_score(samples: PredictiveSamples) -> float:
    """Entropy of the mean predictive distribution, in nats."""
    return _entropy(predictive_mean(samples))


def bald_score(samples: PredictiveSamples) -> float:
    """Mutual information between the prediction and the sampled model weights.

    Entropy of the mean row minus the mean of per-row entropies; identical
    rows therefore score zero. Tiny negative values from cancellation are
    clamped to zero.
    """
    mean_entropy = _entropy(predictive_mean(samples))
    per_pass = np.asarray(
        [_entropy(row) for row in samples.probs.astype(np.float64)], dtype=np.float64
    )
    score = mean_entropy - float(per_pass.mean())
    if score < -_NEG_TOL:
        raise AssertionError(f"BALD below numeric tolerance: {score}")
    return max(score, 0.0)


def variation_ratio_score(samples: PredictiveSamples) -> float:
    """One minus the top mean class probability (least-confident score)."""
    return float(1.0 - predictive_mean(samples).max())


def random_score(window_id: str, seed: int) -> float:
    """Uniform [0, 1) score, deterministic in (window id, seed), model-free."""
    rng = np.random.default_rng(stable_seed("random-acquisition", seed, window_id))
    return float(rng.random())


def score_samples(samples: PredictiveSamples, kind: AcquisitionKind, seed: int = 0) -> float:
    if kind is AcquisitionKind.MAX_ENTROPY:
        return max_entropy_score(samples)
    if kind is AcquisitionKind.BALD:
        return bald_score(samples)
    if kind is AcquisitionKind.VARIATION_RATIOS:
        return variation_ratio_score(samples)
    if kind is AcquisitionKind.RANDOM:
        return random_score(samples.window_id, seed)
    raise ValueError(f"unknown acquisition kind: {kind!r}")


def rank_pool(
    pool: Sequence[PredictiveSamples],
    kind: AcquisitionKind,
    budget: int,
    seed: int = 0,
) -> list[str]:
    """Ids of the `budget` highest-scoring pool windows, descending.

    Ties go to the lexicographically smaller id; the result is independent of
    pool ordering.
    """
    if budget > len(pool):
        raise ValueError(f"budget {budget} exceeds pool size {len(pool)}")
    scored = [(s.window_id, score_samples(s, kind, seed)) for s in pool]
    scored.sort(key=lambda pair: (-pair[1], pair[0]))
    return [wid for wid, _ in scored[:budget]]


def score_pool(
    pool: Sequence[PredictiveSamples], kind: AcquisitionKind, seed: int = 0
) -> dict[str, float]:
    """Score every pool window; mapping id -> score."""
    return {s.window_id: score_samples(s, kind, seed) for s in pool}
