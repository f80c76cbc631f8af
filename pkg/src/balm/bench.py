"""Wall-clock benchmarks: per-window inference, per-epoch training, pool scoring."""

from __future__ import annotations

import csv
import platform
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .inference import mc_predict_pool
from .network import OFF, ModelParams, forward, save
from .optimizer import OptimizerHyper, fit
from .seeding import stable_seed
from .window import Window

WARMUP_CALLS = 10


@dataclass
class BenchReport:
    inference_ms_median: float
    inference_ms_p95: float
    inference_samples: int
    epoch_seconds_median: float
    epoch_samples: int
    pool_pass_seconds: float
    window_pass_ms: float
    pool_size: int
    n_passes: int
    model_bytes: int
    hardware: str

    def rows(self) -> list[tuple[str, str, str, str]]:
        return [
            ("inference_ms_median", f"{self.inference_ms_median:.4f}", "ms", str(self.inference_samples)),
            ("inference_ms_p95", f"{self.inference_ms_p95:.4f}", "ms", str(self.inference_samples)),
            ("epoch_seconds_median", f"{self.epoch_seconds_median:.4f}", "s", str(self.epoch_samples)),
            ("pool_pass_seconds", f"{self.pool_pass_seconds:.4f}", "s", str(self.pool_size)),
            ("window_pass_ms", f"{self.window_pass_ms:.4f}", "ms", str(self.pool_size)),
            ("model_size", str(self.model_bytes), "bytes", "1"),
            ("hardware", self.hardware, "", ""),
        ]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["metric", "value", "unit", "samples"])
            writer.writerows(self.rows())

    def table(self) -> str:
        lines = [f"{'metric':<22} {'value':>12} unit  samples"]
        for metric, value, unit, samples in self.rows():
            lines.append(f"{metric:<22} {value:>12} {unit:<5} {samples}")
        return "\n".join(lines)


def _hardware_descriptor() -> str:
    bits = [platform.machine(), platform.system(), platform.release()]
    cpu = platform.processor()
    if cpu:
        bits.insert(0, cpu)
    return " ".join(b for b in bits if b)


def bench_report(
    params: ModelParams,
    windows: Sequence[Window],
    n_passes: int = 10,
    min_inference_windows: int = 1000,
    epoch_repeats: int = 5,
    hyper: Optional[OptimizerHyper] = None,
    seed: int = 0,
) -> BenchReport:
    """Measure the latency profile of one model on one dataset.

    The first WARMUP_CALLS inference calls are discarded. Short datasets are
    cycled to reach `min_inference_windows` timed calls (timing does not need
    distinct inputs).
    """
    if len(windows) == 0:
        raise ValueError("need at least one window to benchmark")
    hyper = hyper or OptimizerHyper()

    stream = [windows[i % len(windows)] for i in range(min_inference_windows + WARMUP_CALLS)]
    times = []
    for i, w in enumerate(stream):
        start = time.perf_counter()
        forward(params, w, OFF)
        elapsed = time.perf_counter() - start
        if i >= WARMUP_CALLS:
            times.append(elapsed * 1e3)
    times = np.asarray(times)

    labeled = [w for w in windows if w.label is not None]
    if not labeled:
        raise ValueError("per-epoch timing needs labeled windows")
    trained = params.copy()
    epoch_times = []
    for k in range(epoch_repeats):
        start = time.perf_counter()
        trained, _ = fit(trained, labeled, 1, hyper, stable_seed(seed, "bench-epoch", k))
        epoch_times.append(time.perf_counter() - start)

    pool = list(windows)
    mc_predict_pool(params, pool, 1, seed)  # warm
    pass_times = []
    for k in range(3):
        start = time.perf_counter()
        mc_predict_pool(params, pool, 1, stable_seed(seed, "bench-pass", k))
        pass_times.append(time.perf_counter() - start)
    pool_pass = float(np.median(pass_times))

    return BenchReport(
        inference_ms_median=float(np.median(times)),
        inference_ms_p95=float(np.percentile(times, 95)),
        inference_samples=len(times),
        epoch_seconds_median=float(np.median(epoch_times)),
        epoch_samples=epoch_repeats,
        pool_pass_seconds=pool_pass,
        window_pass_ms=pool_pass / len(pool) * 1e3,
        pool_size=len(pool),
        n_passes=n_passes,
        model_bytes=len(save(params)),
        hardware=_hardware_descriptor(),
    )
