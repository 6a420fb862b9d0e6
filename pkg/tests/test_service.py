"""HTTP service tests, run fully in-process via the ASGI test client."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from poumix import TrainConfig, fit, make_dataset, predict_model
from poumix.service import create_app


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def small_payload(n=80, seed=3):
    rng = np.random.default_rng(seed)
    x = rng.uniform(size=(n, 1))
    y = np.sin(2 * np.pi * x[:, 0]) + 0.01 * rng.standard_normal(n)
    return {"x": x.tolist(), "y": y.tolist()}


def small_options(**overrides):
    opts = {"num_partitions": 2, "degree": 1, "refine_levels": 0,
            "stage1_iters": 150, "stage3_iters": 30, "width": 8, "seed": 0}
    opts.update(overrides)
    return opts


class TestHealth:
    def test_ok(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok"}


class TestFitPredict:
    @pytest.fixture(scope="class")
    def fit_response(self, client):
        resp = client.post("/fit", json={"data": small_payload(),
                                         "config": small_options()})
        assert resp.status_code == 200
        return resp.json()

    def test_summary_fields(self, fit_response):
        summary = fit_response["summary"]
        assert np.isfinite(summary["stage1_final_loss"])
        assert np.isfinite(summary["stage3_final_loss"])
        assert summary["num_refined"] == 2
        assert sum(summary["partition_counts"]) == 80

    def test_checkpoint_shape(self, fit_response):
        doc = fit_response["checkpoint"]
        assert doc["format"] == "pou-mixture-checkpoint"
        assert doc["net"]["num_partitions"] == 2
        assert doc["poly"]["degree"] == 1

    def test_matches_local_fit_exactly(self, client, fit_response):
        payload = small_payload()
        data = make_dataset(payload["x"], payload["y"])
        cfg = TrainConfig(**small_options())
        local = predict_model(fit(data, cfg), np.asarray(payload["x"]))

        resp = client.post("/predict", json={
            "checkpoint": fit_response["checkpoint"], "x": payload["x"]})
        assert resp.status_code == 200
        body = resp.json()
        # JSON float round-trip is exact, so the numbers must agree bitwise
        assert body["mean"] == local.mean.tolist()
        assert body["std"] == local.std.tolist()

    def test_predict_labels(self, client, fit_response):
        resp = client.post("/predict", json={
            "checkpoint": fit_response["checkpoint"],
            "x": [[0.1], [0.5], [0.9]]})
        labels = resp.json()["label"]
        assert len(labels) == 3
        assert all(0 <= i < 2 for i in labels)

    def test_variance_consistent_with_std(self, client, fit_response):
        resp = client.post("/predict", json={
            "checkpoint": fit_response["checkpoint"], "x": [[0.25], [0.75]]})
        body = resp.json()
        np.testing.assert_allclose(np.square(body["std"]), body["variance"],
                                   rtol=1e-12)


class TestErrorMapping:
    def test_length_mismatch_is_422_dimension(self, client):
        resp = client.post("/fit", json={
            "data": {"x": [[0.0], [1.0]], "y": [0.0]},
            "config": small_options()})
        assert resp.status_code == 422
        assert resp.json()["type"] == "dimension"

    def test_nonfinite_data_is_422_input(self, client):
        # httpx's json= encoder refuses inf, so post the raw body; the
        # server-side loads() accepts the Infinity literal
        import json
        body = json.dumps({"data": {"x": [[0.0], [1.0]], "y": [0.0, float("inf")]},
                           "config": small_options()})
        resp = client.post("/fit", content=body,
                           headers={"content-type": "application/json"})
        assert resp.status_code == 422
        assert resp.json()["type"] == "input"

    def test_bad_config_is_422(self, client):
        resp = client.post("/fit", json={
            "data": small_payload(20),
            "config": small_options(num_partitions=0)})
        assert resp.status_code == 422
        assert resp.json()["type"] == "input"

    def test_missing_field_is_422(self, client):
        resp = client.post("/fit", json={"data": {"x": [[0.0]]}})
        assert resp.status_code == 422

    def test_empty_predict_points_is_422(self, client, tmp_path):
        fit_resp = client.post("/fit", json={"data": small_payload(30),
                                             "config": small_options()})
        resp = client.post("/predict", json={
            "checkpoint": fit_resp.json()["checkpoint"], "x": []})
        assert resp.status_code == 422
        assert resp.json()["type"] == "dimension"

    def test_corrupt_checkpoint_is_422_schema(self, client):
        resp = client.post("/predict", json={
            "checkpoint": {"format": "something-else"}, "x": [[0.0]]})
        assert resp.status_code == 422
        assert resp.json()["type"] == "schema"

    def test_divergent_training_is_500_abort(self, client):
        with np.errstate(all="ignore"):
            resp = client.post("/fit", json={
                "data": small_payload(40),
                "config": small_options(learning_rate=1e160)})
        assert resp.status_code == 500
        body = resp.json()
        assert body["type"] == "training-abort"
        assert body["stage"] == 1
        assert "iteration" in body and "block" in body


class TestConverge:
    def test_small_study(self, client):
        resp = client.post("/converge", json={
            "problem": "sin1d", "degree": 1,
            "configs": [[2, 0], [2, 1], [2, 2]],
            "train_n": 120, "holdout_n": 200, "reps": 1, "seed": 0,
            "options": small_options()})
        assert resp.status_code == 200
        body = resp.json()
        assert len(body["rows"]) == 3
        assert [r["num_refined"] for r in body["rows"]] == [2, 4, 8]
        assert body["csv"].splitlines()[0].startswith("num_partitions,")
        assert body["timings_csv"].splitlines()[0] == \
            "num_partitions,refine_levels,wall_time_seconds"
        assert body["slope"] is None or np.isfinite(body["slope"])

    def test_unknown_problem_is_422(self, client):
        resp = client.post("/converge", json={
            "problem": "mystery", "configs": [[2, 0]],
            "options": small_options()})
        assert resp.status_code == 422
        assert resp.json()["type"] == "input"

    def test_malformed_config_pair_is_422(self, client):
        resp = client.post("/converge", json={
            "problem": "sin1d", "configs": [[2]],
            "options": small_options()})
        assert resp.status_code == 422
        assert resp.json()["type"] == "input"


class TestSnapshots:
    def payload(self):
        x = np.column_stack([np.linspace(0, 1, 60), np.zeros(60)])
        base = np.where(x[:, 0] < 0.5, 0.0, 2.0)
        return {
            "x": x.tolist(),
            "snapshots": [(base + off).tolist() for off in (0.0, 0.3, -0.2)],
            "config": small_options(stage1_iters=300, width=16, degree=0),
        }

    def test_study(self, client):
        resp = client.post("/snapshots", json=self.payload())
        assert resp.status_code == 200
        body = resp.json()
        assert body["num_nodes"] == 60
        assert body["num_snapshots"] == 3
        assert [r["name"] for r in body["rows"]] == ["y_1", "y_2", "y_3"]
        assert body["csv"].splitlines()[0] == \
            "snapshot,rms_rel,worst_rel,rms_rel_shared,worst_rel_shared"
        # two clean plateaus, M=2: refit should track each snapshot closely
        assert all(r["rms_rel"] < 0.1 for r in body["rows"])

    def test_explicit_names(self, client):
        payload = self.payload()
        payload["names"] = ["a", "b", "c"]
        resp = client.post("/snapshots", json=payload)
        assert [r["name"] for r in resp.json()["rows"]] == ["a", "b", "c"]

    def test_name_count_mismatch_is_422(self, client):
        payload = self.payload()
        payload["names"] = ["only-one"]
        resp = client.post("/snapshots", json=payload)
        assert resp.status_code == 422
        assert resp.json()["type"] == "input"

    def test_snapshot_length_mismatch_is_422(self, client):
        payload = self.payload()
        payload["snapshots"][1] = payload["snapshots"][1][:-3]
        resp = client.post("/snapshots", json=payload)
        assert resp.status_code == 422
        assert resp.json()["type"] == "dimension"

    def test_single_snapshot_is_422(self, client):
        payload = self.payload()
        payload["snapshots"] = payload["snapshots"][:1]
        resp = client.post("/snapshots", json=payload)
        assert resp.status_code == 422
        assert resp.json()["type"] == "input"
