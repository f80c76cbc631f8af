"""HTTP oracle service: serve the ranked query queue, take labels, retrain.

One process owns one model and one pool. Reads (queue, status) are served
from the latest completed snapshot; writes (label submissions, retrain
completion) are serialized through a single lock. Retraining runs off the
request path in a worker thread and the queue is rescored only when it
finishes.
"""

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Optional, Sequence

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .acquisition import AcquisitionKind, score_pool
from .inference import mc_predict_pool, predictive_mean
from .loop import Oracle  # noqa: F401  (re-exported for embedding callers)
from .network import ModelParams, save
from .optimizer import OptimizerHyper, fit
from .seeding import stable_seed
from .window import Window

logger = logging.getLogger(__name__)


@dataclass
class QueueItem:
    window_id: str
    kind: AcquisitionKind
    score: float
    model_version: int
    mean_probs: list[float]
    channels: list[list[float]]


class OracleService:
    """State owner for the live labeling loop."""

    def __init__(
        self,
        params: ModelParams,
        pool: Sequence[Window],
        kind: AcquisitionKind,
        n_passes: int = 10,
        seed: int = 0,
        epochs_per_retrain: int = 10,
        auto_retrain_every: Optional[int] = None,
        train_windows: Sequence[Window] = (),
        test_windows: Optional[Sequence[Window]] = None,
        hyper: Optional[OptimizerHyper] = None,
        checkpoint_dir: Optional[Path] = None,
    ):
        # labels that arrive with the pool file are discarded: in deployment
        # the human is the only label source
        self._lock = threading.RLock()
        self.params = params
        self.pool: dict[str, Window] = {w.id: w.without_label() for w in pool}
        self.labeled: list[Window] = list(train_windows)
        self.kind = kind
        self.n_passes = n_passes
        self.seed = seed
        self.epochs_per_retrain = epochs_per_retrain
        self.auto_retrain_every = auto_retrain_every
        self.test_windows = list(test_windows) if test_windows else None
        self.hyper = hyper or OptimizerHyper()
        self.checkpoint_dir = Path(checkpoint_dir) if checkpoint_dir else None

        self.initial_pool_size = len(self.pool)
        self.model_version = 0
        self.training = False
        self.submitted_count = 0
        self.labels_since_retrain = 0
        self.last_test_accuracy: Optional[float] = None
        self._queue: list[QueueItem] = []
        self._retrain_thread: Optional[threading.Thread] = None
        self._rescore()

    # -- reads ------------------------------------------------------------

    def queue_next(self, limit: int) -> list[QueueItem]:
        with self._lock:
            return list(self._queue[: max(limit, 0)])

    def status(self) -> dict:
        with self._lock:
            consumed = (
                self.submitted_count / self.initial_pool_size if self.initial_pool_size else 0.0
            )
            return {
                "model_version": self.model_version,
                "training": self.training,
                "labeled_count": self.submitted_count,
                "pool_remaining": len(self.pool),
                "eta_consumed": round(consumed, 4),
                "test_accuracy": self.last_test_accuracy,
            }

    # -- writes -----------------------------------------------------------

    def submit_label(self, window_id: str, label: int) -> dict:
        trigger_auto = False
        with self._lock:
            if window_id not in self.pool:
                if any(w.id == window_id for w in self.labeled):
                    return {"accepted": False, "reason": "already_labeled"}
                raise KeyError(window_id)
            window = self.pool.pop(window_id)
            self.labeled.append(window.with_label(label))
            self.submitted_count += 1
            self.labels_since_retrain += 1
            self._queue = [q for q in self._queue if q.window_id != window_id]
            count = self.submitted_count
            if (
                self.auto_retrain_every
                and self.labels_since_retrain >= self.auto_retrain_every
                and not self.training
            ):
                trigger_auto = True
        if trigger_auto:
            self.trigger_retrain(self.epochs_per_retrain)
        return {"accepted": True, "labeled_count": count}

    def trigger_retrain(self, epochs: Optional[int] = None) -> dict:
        epochs = epochs if epochs is not None else self.epochs_per_retrain
        with self._lock:
            if self.training:
                return {"job": "retrain", "reason": "busy", "busy": True}
            if self.labels_since_retrain == 0:
                return {"job": "noop", "model_version_on_start": self.model_version}
            self.training = True
            version_on_start = self.model_version
            snapshot_params = self.params.copy()
            snapshot_labeled = list(self.labeled)
        self._retrain_thread = threading.Thread(
            target=self._retrain_worker,
            args=(snapshot_params, snapshot_labeled, epochs, version_on_start),
            daemon=True,
        )
        self._retrain_thread.start()
        return {"job": "retrain", "model_version_on_start": version_on_start}

    def wait_for_retrain(self, timeout: float = 60.0) -> None:
        thread = self._retrain_thread
        if thread is not None:
            thread.join(timeout)

    # -- internals ----------------------------------------------------------

    def _retrain_worker(self, params, labeled, epochs, version_on_start):
        try:
            new_params, _ = fit(
                params, labeled, epochs, self.hyper,
                stable_seed(self.seed, "retrain", version_on_start),
            )
            accuracy = None
            if self.test_windows:
                from .loop import evaluate

                accuracy = evaluate(
                    new_params, self.test_windows, self.n_passes,
                    stable_seed(self.seed, "eval", version_on_start + 1),
                )
            with self._lock:
                self.params = new_params
                self.model_version += 1
                self.labels_since_retrain = 0
                if accuracy is not None:
                    self.last_test_accuracy = round(accuracy, 2)
                self._rescore()
                self._checkpoint()
        except Exception:
            logger.exception("retrain failed; keeping previous model")
        finally:
            with self._lock:
                self.training = False

    def _rescore(self):
        windows = sorted(self.pool.values(), key=lambda w: w.id)
        if not windows:
            self._queue = []
            return
        samples = mc_predict_pool(
            self.params, windows, self.n_passes,
            stable_seed(self.seed, "scoring", self.model_version),
        )
        scores = score_pool(samples, self.kind, seed=self.seed)
        items = [
            QueueItem(
                window_id=s.window_id,
                kind=self.kind,
                score=scores[s.window_id],
                model_version=self.model_version,
                mean_probs=[round(float(p), 6) for p in predictive_mean(s)],
                channels=[[float(v) for v in row] for row in w.channels],
            )
            for w, s in zip(windows, samples)
        ]
        items.sort(key=lambda q: (-q.score, q.window_id))
        self._queue = items

    def _checkpoint(self):
        if not self.checkpoint_dir:
            return
        self.checkpoint_dir.mkdir(parents=True, exist_ok=True)
        blob_path = self.checkpoint_dir / f"model-v{self.model_version}.balm"
        blob_path.write_bytes(save(self.params))
        log_path = self.checkpoint_dir / "labels.ndjson"
        import json

        with open(log_path, "w", encoding="utf-8") as fh:
            for w in self.labeled:
                fh.write(json.dumps({"id": w.id, "label": w.label}) + "\n")


class LabelRequest(BaseModel):
    id: str
    label: Literal[0, 1]


class RetrainRequest(BaseModel):
    epochs: int = 10


def create_app(service: Optional[OracleService], ui_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="oracle labeling service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    def ready() -> OracleService:
        if service is None:
            raise HTTPException(status_code=503, detail="service not initialized")
        return service

    @app.get("/api/queue")
    def get_queue(limit: int = 10):
        svc = ready()
        items = svc.queue_next(limit)
        return {
            "items": [
                {
                    "id": q.window_id,
                    "kind": q.kind.value,
                    "score": round(q.score, 6),
                    "model_version": q.model_version,
                    "mean_probs": q.mean_probs,
                    "channels": q.channels,
                }
                for q in items
            ]
        }

    @app.post("/api/labels")
    def post_label(req: LabelRequest):
        svc = ready()
        try:
            result = svc.submit_label(req.id, req.label)
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown window id {req.id!r}")
        if not result["accepted"]:
            return JSONResponse(status_code=409, content=result)
        return result

    @app.post("/api/retrain")
    def post_retrain(req: Optional[RetrainRequest] = None):
        svc = ready()
        result = svc.trigger_retrain(req.epochs if req else None)
        if result.pop("busy", False):
            return JSONResponse(status_code=409, content=result)
        if result["job"] == "noop":
            return JSONResponse(status_code=200, content=result)
        return JSONResponse(status_code=202, content=result)

    @app.get("/api/status")
    def get_status():
        return ready().status()

    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")
    return app
