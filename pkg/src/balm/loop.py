"""Pool-based active-learning engine: split, pretrain, budgeted acquisition.

A run starts from a labeled train split and an unlabeled pool. Each iteration
scores the whole pool with MC-dropout passes against the newest model, ranks
it, asks the oracle for labels of the top chunk, retrains incrementally, and
repeats until the acquisition budget round(eta * |initial pool|) is spent.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .acquisition import AcquisitionKind, rank_pool, score_pool
from .inference import mc_predict_pool, predictive_label, predictive_mean
from .network import Architecture, ModelParams, init_params
from .optimizer import OptimizerHyper, fit
from .seeding import stable_seed
from .window import Window

logger = logging.getLogger(__name__)

Oracle = Callable[[Sequence[str]], dict[str, int]]

CANONICAL_KINDS = (
    AcquisitionKind.MAX_ENTROPY,
    AcquisitionKind.BALD,
    AcquisitionKind.VARIATION_RATIOS,
    AcquisitionKind.RANDOM,
)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class Seeds:
    split: int = 11
    init: int = 22
    train: int = 33
    acquisition: int = 44

    @classmethod
    def from_root(cls, root: int) -> "Seeds":
        return cls(
            split=stable_seed(root, "split"),
            init=stable_seed(root, "init"),
            train=stable_seed(root, "train"),
            acquisition=stable_seed(root, "acquisition"),
        )


@dataclass(frozen=True)
class ALConfig:
    """Every protocol knob of one active-learning run."""

    eta: float
    kind: AcquisitionKind = AcquisitionKind.VARIATION_RATIOS
    n_passes: int = 10
    windows_per_iteration: int = 32
    epochs_per_iteration: int = 10
    pretrain_epochs: int = 10
    split_ratio: float = 0.3
    seeds: Seeds = Seeds()
    optimizer: OptimizerHyper = OptimizerHyper()
    arch: Optional[Architecture] = None
    eval_each_iteration: bool = False

    def __post_init__(self):
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if self.windows_per_iteration < 1:
            raise ValueError(f"windows_per_iteration must be >= 1, got {self.windows_per_iteration}")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError(f"split_ratio must lie in (0, 1), got {self.split_ratio}")


@dataclass
class IterationRecord:
    iteration: int
    acquired_ids: list[str]
    scores: dict[str, float]
    model_version: int
    test_accuracy: Optional[float] = None


@dataclass
class ALState:
    """Evolving run state: labeled set, remaining pool, model, history."""

    labeled: list[Window]
    pool: list[Window]
    params: ModelParams
    budget_total: int
    model_version: int = 0
    acquired_total: int = 0
    history: list[IterationRecord] = field(default_factory=list)

    @property
    def remaining_budget(self) -> int:
        return self.budget_total - self.acquired_total

    def check_conservation(self, reference_ids: set[str]) -> None:
        labeled_ids = {w.id for w in self.labeled}
        pool_ids = {w.id for w in self.pool}
        if labeled_ids & pool_ids:
            raise AssertionError(f"labeled/pool overlap: {sorted(labeled_ids & pool_ids)[:5]}")
        if labeled_ids | pool_ids != reference_ids:
            raise AssertionError("windows were lost or duplicated during acquisition")


def split_dataset(
    data: Sequence[Window], split_ratio: float, seed: int
) -> tuple[list[Window], list[Window]]:
    """Random disjoint (train, pool) partition with |train| = round(ratio * n)."""
    if len(data) < 2:
        raise ValueError(f"need at least 2 windows to split, got {len(data)}")
    if not 0.0 < split_ratio < 1.0:
        raise ValueError(f"split_ratio must lie in (0, 1), got {split_ratio}")
    n_train = round_half_up(split_ratio * len(data))
    perm = np.random.default_rng(seed).permutation(len(data))
    train = [data[i] for i in perm[:n_train]]
    pool = [data[i] for i in perm[n_train:]]
    return train, pool


def simulation_oracle(pool: Sequence[Window]) -> tuple[list[Window], Oracle]:
    """Hide pool labels; the returned oracle reveals them only when queried."""
    hidden: dict[str, int] = {}
    for w in pool:
        if w.label is None:
            raise ValueError(f"simulation oracle needs ground truth; {w.id!r} is unlabeled")
        hidden[w.id] = w.label

    def oracle(ids: Sequence[str]) -> dict[str, int]:
        return {wid: hidden[wid] for wid in ids}

    return [w.without_label() for w in pool], oracle


def evaluate(params: ModelParams, test: Sequence[Window], n_passes: int, seed: int) -> float:
    """Accuracy (%) of the mean-of-passes argmax prediction over a labeled test set."""
    if len(test) == 0:
        raise ValueError("test set must be non-empty")
    for w in test:
        if w.label is None:
            raise ValueError(f"test window {w.id!r} is unlabeled")
    samples = mc_predict_pool(params, test, n_passes, seed)
    hits = sum(
        1 for w, s in zip(test, samples) if predictive_label(predictive_mean(s)) == w.label
    )
    return 100.0 * hits / len(test)


def pretrain(
    train: Sequence[Window],
    test: Sequence[Window],
    config: ALConfig,
) -> tuple[ModelParams, float]:
    """Fit a fresh model on the train split and report its baseline accuracy."""
    if len(train) == 0:
        raise ValueError("train split must be non-empty")
    arch = config.arch
    if arch is None:
        arch = Architecture(c_in=train[0].n_channels, length=train[0].length)
    params = init_params(arch, config.seeds.init)
    params, _ = fit(params, list(train), config.pretrain_epochs, config.optimizer,
                    config.seeds.train)
    baseline = evaluate(params, test, config.n_passes, stable_seed(config.seeds.train, "eval"))
    return params, baseline


def al_step(state: ALState, config: ALConfig, oracle: Oracle) -> ALState:
    """One acquisition iteration: score, rank, query, move, retrain.

    Mutates and returns `state`. Oracle failures abort before any state
    change. An empty pool is a logged no-op.
    """
    if not state.pool:
        logger.info("acquisition pool is empty; nothing to do")
        return state
    if state.remaining_budget <= 0:
        raise ValueError("acquisition budget is exhausted")

    chunk = min(config.windows_per_iteration, state.remaining_budget, len(state.pool))
    iter_seed = stable_seed(config.seeds.acquisition, "iteration", state.model_version)
    samples = mc_predict_pool(state.params, state.pool, config.n_passes, iter_seed)
    scores = score_pool(samples, config.kind, seed=config.seeds.acquisition)
    chosen = rank_pool(samples, config.kind, chunk, seed=config.seeds.acquisition)

    labels = oracle(chosen)  # may raise; state untouched so far
    for wid in chosen:
        if labels.get(wid) not in (0, 1):
            raise ValueError(f"oracle returned invalid label for {wid!r}: {labels.get(wid)!r}")

    chosen_set = set(chosen)
    acquired = [w.with_label(labels[w.id]) for w in state.pool if w.id in chosen_set]
    state.pool = [w for w in state.pool if w.id not in chosen_set]
    state.labeled.extend(acquired)
    state.acquired_total += len(acquired)

    state.params, _ = fit(
        state.params,
        state.labeled,
        config.epochs_per_iteration,
        config.optimizer,
        stable_seed(config.seeds.train, "iteration", state.model_version),
    )
    state.model_version += 1
    state.history.append(
        IterationRecord(
            iteration=len(state.history) + 1,
            acquired_ids=list(chosen),
            scores=scores,
            model_version=state.model_version,
        )
    )
    return state


def run_active_learning(
    train: Sequence[Window],
    pool: Sequence[Window],
    params: ModelParams,
    config: ALConfig,
    oracle: Oracle,
    test: Optional[Sequence[Window]] = None,
) -> ALState:
    """Drive al_step until the eta budget is spent or the pool runs dry."""
    state = ALState(
        labeled=list(train),
        pool=list(pool),
        params=params.copy(),
        budget_total=round_half_up(config.eta * len(pool)),
    )
    reference_ids = {w.id for w in state.labeled} | {w.id for w in state.pool}
    while state.remaining_budget > 0 and state.pool:
        al_step(state, config, oracle)
        state.check_conservation(reference_ids)
        if config.eval_each_iteration and test is not None:
            state.history[-1].test_accuracy = evaluate(
                state.params, test, config.n_passes, stable_seed(config.seeds.train, "eval")
            )
    return state


@dataclass
class SweepReport:
    """Accuracy grid over (eta, acquisition kind), aggregated across seeds."""

    etas: list[float]
    kinds: list[AcquisitionKind]
    seeds: list[int]
    cells: dict[tuple[float, AcquisitionKind], list[float]]

    def mean(self, eta: float, kind: AcquisitionKind) -> float:
        return float(np.mean(self.cells[(eta, kind)]))

    def stddev(self, eta: float, kind: AcquisitionKind) -> float:
        return float(np.std(self.cells[(eta, kind)]))

    def to_csv(self, path) -> tuple[Path, Path]:
        """Write the mean grid and a companion `<name>.stddev.csv`."""
        path = Path(path)
        stddev_path = path.with_name(path.stem + ".stddev.csv")
        ordered = [k for k in CANONICAL_KINDS if k in self.kinds]
        ordered += [k for k in self.kinds if k not in ordered]
        for target, value_of in (
            (path, self.mean),
            (stddev_path, self.stddev),
        ):
            with open(target, "w", newline="", encoding="utf-8") as fh:
                writer = csv.writer(fh)
                writer.writerow(["eta"] + [k.value for k in ordered])
                for eta in self.etas:
                    eta_text = f"{eta:.1f}" if round(eta, 1) == eta else f"{eta:.10g}"
                    writer.writerow(
                        [eta_text] + [f"{value_of(eta, k):.2f}" for k in ordered]
                    )
        return path, stddev_path


def eta_sweep(
    data: Sequence[Window],
    test: Sequence[Window],
    kinds: Sequence[AcquisitionKind],
    etas: Sequence[float],
    seeds: Sequence[int],
    config: ALConfig,
) -> SweepReport:
    """Full grid of AL runs. Per seed: one split, one shared pretrained baseline.

    At eta = 1.0 every kind must acquire the entire pool; the sweep asserts
    that set equality.
    """
    for eta in etas:
        if not 0.0 <= eta <= 1.0:
            raise ValueError(f"eta values must lie in [0, 1], got {eta}")
    cells: dict[tuple[float, AcquisitionKind], list[float]] = {
        (eta, kind): [] for eta in etas for kind in kinds
    }
    for root in seeds:
        run_seeds = Seeds.from_root(root)
        cfg = replace(config, seeds=run_seeds)
        train, pool_labeled = split_dataset(data, cfg.split_ratio, run_seeds.split)
        params_base, baseline = pretrain(train, test, cfg)
        eval_seed = stable_seed(run_seeds.train, "eval")
        full_pool_ids = {w.id for w in pool_labeled}
        acquired_at_full: dict[AcquisitionKind, set[str]] = {}
        for kind in kinds:
            for eta in etas:
                if eta == 0.0:
                    cells[(eta, kind)].append(baseline)
                    continue
                pool, oracle = simulation_oracle(pool_labeled)
                state = run_active_learning(
                    train, pool, params_base, replace(cfg, eta=eta, kind=kind), oracle
                )
                accuracy = evaluate(state.params, test, cfg.n_passes, eval_seed)
                cells[(eta, kind)].append(accuracy)
                if eta == 1.0:
                    acquired = {wid for rec in state.history for wid in rec.acquired_ids}
                    acquired_at_full[kind] = acquired
                    if acquired != full_pool_ids:
                        raise AssertionError(
                            f"eta=1.0 run for {kind.value} did not acquire the whole pool"
                        )
        if len(acquired_at_full) > 1 and len(set(map(frozenset, acquired_at_full.values()))) != 1:
            raise AssertionError("eta=1.0 acquired sets differ across kinds")
    return SweepReport(list(etas), list(kinds), list(seeds), cells)
