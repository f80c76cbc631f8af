"""Adam updates and the epoch-based training loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .network import Gradients, ModelParams, Stochastic, grad
from .window import Window


@dataclass(frozen=True)
class OptimizerHyper:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 < self.beta1 < 1 or not 0 < self.beta2 < 1:
            raise ValueError(f"betas must lie in (0, 1), got {self.beta1}, {self.beta2}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


def adam_update(theta: np.ndarray, g: np.ndarray, m: np.ndarray, v: np.ndarray,
                t: int, hyper: OptimizerHyper) -> None:
    """One bias-corrected Adam step on a single tensor, in place.

    `t` is the step counter value after incrementing (1 on the first step).
    """
    dtype = theta.dtype
    b1 = np.asarray(hyper.beta1, dtype=dtype)
    b2 = np.asarray(hyper.beta2, dtype=dtype)
    m *= b1
    m += (1 - b1) * g
    v *= b2
    v += (1 - b2) * np.square(g)
    m_hat = m / np.asarray(1.0 - hyper.beta1**t, dtype=dtype)
    v_hat = v / np.asarray(1.0 - hyper.beta2**t, dtype=dtype)
    theta -= np.asarray(hyper.learning_rate, dtype=dtype) * m_hat / (
        np.sqrt(v_hat) + np.asarray(hyper.epsilon, dtype=dtype)
    )


def _adam_step_inplace(params: ModelParams, grads: Gradients, hyper: OptimizerHyper) -> None:
    named_grads = dict(grads.named_arrays())
    if params.adam_m is None:
        params.adam_m = {k: np.zeros_like(a) for k, a in params.named_arrays()}
        params.adam_v = {k: np.zeros_like(a) for k, a in params.named_arrays()}
    params.adam_t += 1
    for name, theta in params.named_arrays():
        g = named_grads[name]
        if g.shape != theta.shape:
            raise ValueError(
                f"gradient shape mismatch for {name}: {g.shape} vs parameter {theta.shape}"
            )
        adam_update(theta, g, params.adam_m[name], params.adam_v[name], params.adam_t, hyper)


def adam_step(params: ModelParams, grads: Gradients, hyper: OptimizerHyper) -> ModelParams:
    """Functional Adam step: returns updated params, input untouched."""
    out = params.copy()
    _adam_step_inplace(out, grads, hyper)
    return out


def fit(
    params: ModelParams,
    labeled: Sequence[Window],
    epochs: int,
    hyper: OptimizerHyper,
    seed: int,
) -> tuple[ModelParams, list[float]]:
    """Train with per-epoch reshuffling and stochastic dropout.

    Deterministic given (params, labeled, seed). Returns the updated copy and
    the mean loss per epoch.
    """
    if len(labeled) == 0:
        raise ValueError("labeled set must be non-empty")
    for w in labeled:
        if w.label is None:
            raise ValueError(f"window {w.id!r} is unlabeled; fit needs labels")
    out = params.copy()
    trace: list[float] = []
    rng = np.random.default_rng(seed)
    n = len(labeled)
    for _ in range(epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, hyper.batch_size):
            batch = [labeled[i] for i in order[start : start + hyper.batch_size]]
            mask_seed = int(rng.integers(0, 2**63))
            grads, loss = grad(out, batch, Stochastic(mask_seed))
            _adam_step_inplace(out, grads, hyper)
            loss_sum += loss * len(batch)
        trace.append(loss_sum / n)
    return out, trace
