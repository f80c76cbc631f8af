import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from balm import Architecture, init_params
from balm.acquisition import AcquisitionKind
from balm.service import OracleService, create_app

from conftest import make_windows


@pytest.fixture
def service():
    params = init_params(Architecture(), seed=1)
    pool = make_windows(10, seed=40)
    return OracleService(
        params, pool, AcquisitionKind.VARIATION_RATIOS,
        n_passes=3, seed=7, epochs_per_retrain=1,
    )


@pytest.fixture
def client(service):
    return TestClient(create_app(service))


def wait_until_idle(service, client, timeout=30.0):
    service.wait_for_retrain(timeout)
    deadline = time.time() + timeout
    while client.get("/api/status").json()["training"]:
        assert time.time() < deadline, "retrain did not finish"
        time.sleep(0.02)


class TestQueue:
    def test_queue_is_sorted_and_limited(self, service, client):
        body = client.get("/api/queue", params={"limit": 4}).json()
        assert len(body["items"]) == 4
        scores = [item["score"] for item in body["items"]]
        assert scores == sorted(scores, reverse=True)
        top = body["items"][0]
        assert set(top) == {"id", "kind", "score", "model_version", "mean_probs", "channels"}
        assert top["kind"] == "variation_ratios"
        assert top["model_version"] == 0
        assert len(top["channels"]) == 2 and len(top["channels"][0]) == 32

    def test_limit_beyond_pool_returns_whole_pool(self, client):
        body = client.get("/api/queue", params={"limit": 99}).json()
        assert len(body["items"]) == 10

    def test_reads_are_stable_without_writes(self, client):
        a = client.get("/api/queue", params={"limit": 5}).json()
        b = client.get("/api/queue", params={"limit": 5}).json()
        assert a == b

    def test_uninitialized_service_returns_503(self):
        bare = TestClient(create_app(None))
        assert bare.get("/api/queue").status_code == 503
        assert bare.get("/api/status").status_code == 503


class TestLabels:
    def test_accept_then_conflict(self, client):
        wid = client.get("/api/queue", params={"limit": 1}).json()["items"][0]["id"]
        first = client.post("/api/labels", json={"id": wid, "label": 1})
        assert first.status_code == 200
        assert first.json() == {"accepted": True, "labeled_count": 1}
        second = client.post("/api/labels", json={"id": wid, "label": 0})
        assert second.status_code == 409
        assert second.json() == {"accepted": False, "reason": "already_labeled"}
        assert client.get("/api/status").json()["labeled_count"] == 1

    def test_unknown_id_is_404(self, client):
        assert client.post("/api/labels", json={"id": "nope", "label": 0}).status_code == 404

    def test_label_out_of_range_is_validation_error(self, client):
        wid = client.get("/api/queue", params={"limit": 1}).json()["items"][0]["id"]
        response = client.post("/api/labels", json={"id": wid, "label": 2})
        assert response.status_code == 422
        assert client.get("/api/status").json()["pool_remaining"] == 10

    def test_labeled_window_leaves_queue(self, client):
        wid = client.get("/api/queue", params={"limit": 1}).json()["items"][0]["id"]
        client.post("/api/labels", json={"id": wid, "label": 0})
        remaining_ids = [i["id"] for i in client.get("/api/queue", params={"limit": 99}).json()["items"]]
        assert wid not in remaining_ids
        assert len(remaining_ids) == 9

    def test_conservation_across_submissions(self, client):
        for item in client.get("/api/queue", params={"limit": 3}).json()["items"]:
            client.post("/api/labels", json={"id": item["id"], "label": 1})
            status = client.get("/api/status").json()
            assert status["labeled_count"] + status["pool_remaining"] == 10


class TestRetrain:
    def test_lifecycle_version_bump_and_rescore(self, service, client):
        wid = client.get("/api/queue", params={"limit": 1}).json()["items"][0]["id"]
        client.post("/api/labels", json={"id": wid, "label": 1})
        response = client.post("/api/retrain", json={"epochs": 1})
        assert response.status_code == 202
        assert response.json() == {"job": "retrain", "model_version_on_start": 0}
        wait_until_idle(service, client)
        status = client.get("/api/status").json()
        assert status["model_version"] == 1
        assert status["training"] is False
        queue = client.get("/api/queue", params={"limit": 2}).json()["items"]
        assert all(item["model_version"] == 1 for item in queue)

    def test_retrain_without_new_labels_is_noop(self, service, client):
        response = client.post("/api/retrain", json={"epochs": 1})
        assert response.status_code == 200
        assert response.json()["job"] == "noop"
        assert client.get("/api/status").json()["model_version"] == 0

    def test_concurrent_retrain_is_busy(self, service, client):
        wid = client.get("/api/queue", params={"limit": 1}).json()["items"][0]["id"]
        client.post("/api/labels", json={"id": wid, "label": 0})
        with service._lock:
            service.training = True  # simulate a long-running job
        response = client.post("/api/retrain", json={"epochs": 1})
        assert response.status_code == 409
        assert response.json()["reason"] == "busy"
        with service._lock:
            service.training = False

    def test_auto_retrain_fires_on_threshold(self):
        params = init_params(Architecture(), seed=2)
        pool = make_windows(8, seed=41)
        service = OracleService(
            params, pool, AcquisitionKind.BALD, n_passes=2, seed=3,
            epochs_per_retrain=1, auto_retrain_every=2,
        )
        client = TestClient(create_app(service))
        ids = [i["id"] for i in client.get("/api/queue", params={"limit": 2}).json()["items"]]
        client.post("/api/labels", json={"id": ids[0], "label": 0})
        assert client.get("/api/status").json()["model_version"] == 0
        client.post("/api/labels", json={"id": ids[1], "label": 1})
        wait_until_idle(service, client)
        assert client.get("/api/status").json()["model_version"] == 1


class TestStatus:
    def test_fresh_service_counters(self, client):
        status = client.get("/api/status").json()
        assert status == {
            "model_version": 0,
            "training": False,
            "labeled_count": 0,
            "pool_remaining": 10,
            "eta_consumed": 0.0,
            "test_accuracy": None,
        }

    def test_eta_consumed_tracks_submissions(self, client):
        ids = [i["id"] for i in client.get("/api/queue", params={"limit": 5}).json()["items"]]
        for wid in ids:
            client.post("/api/labels", json={"id": wid, "label": 0})
        assert client.get("/api/status").json()["eta_consumed"] == 0.5

    def test_accuracy_reported_after_retrain_with_test_set(self):
        params = init_params(Architecture(), seed=5)
        pool = make_windows(6, seed=42)
        test = make_windows(8, seed=43)
        service = OracleService(
            params, pool, AcquisitionKind.MAX_ENTROPY, n_passes=2, seed=9,
            epochs_per_retrain=1, test_windows=test,
        )
        client = TestClient(create_app(service))
        wid = client.get("/api/queue", params={"limit": 1}).json()["items"][0]["id"]
        client.post("/api/labels", json={"id": wid, "label": 0})
        client.post("/api/retrain", json={"epochs": 1})
        wait_until_idle(service, client)
        accuracy = client.get("/api/status").json()["test_accuracy"]
        assert accuracy is not None and 0.0 <= accuracy <= 100.0


def test_queue_scores_match_acquisition_bounds(service):
    for item in service.queue_next(10):
        assert 0.0 <= item.score <= 0.5 + 1e-9  # variation ratio, binary
