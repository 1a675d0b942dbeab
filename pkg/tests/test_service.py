import numpy as np
import pytest
from fastapi.testclient import TestClient

from pudefect.classifier import MlpConfig, model_from_dict, predict_batch
from pudefect.data import FeatureMatrix, PUDataset
from pudefect.iforest import ForestConfig
from pudefect.pipeline import RunConfig, run_weak_pipeline
from pudefect.service import app
from pudefect.synth import BlobSpec, gen_blobs


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as c:
        yield c


def blob_payload(n=30, d=3, seed=4):
    ds = gen_blobs(BlobSpec(n_per_class=n, d=d, separation=6.0, seed=seed))
    return [[float(v) for v in row] for row in ds.features.data], ds.labels.tolist()


class TestHealthAndErrors:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok"}

    def test_config_error_kind(self, client):
        resp = client.post("/mine", json={"order": [0], "scores": [0.5], "k": 0})
        assert resp.status_code == 400
        assert resp.json()["kind"] == "config"

    def test_data_error_kind(self, client):
        resp = client.post("/forest/fit", json={"data": [[1.0]]})
        assert resp.status_code == 400
        assert resp.json()["kind"] == "data"

    def test_validation_error(self, client):
        resp = client.post("/forest/fit", json={"bogus": True})
        assert resp.status_code == 422


class TestSynthEndpoints:
    def test_blobs_deterministic(self, client):
        req = {"n_per_class": 10, "d": 2, "separation": 4.0, "seed": 3}
        a = client.post("/synth/blobs", json=req).json()
        b = client.post("/synth/blobs", json=req).json()
        assert a == b
        assert len(a["data"]) == 20
        assert sum(a["labels"]) == 10

    def test_anomalies_flags(self, client):
        req = {"n_inliers": 40, "n_outliers": 5, "d": 4, "seed": 9}
        body = client.post("/synth/anomalies", json=req).json()
        assert sum(body["flags"]) == 5
        assert len(body["data"]) == 45


class TestSplitEndpoint:
    def test_counts_and_truth(self, client):
        data, labels = blob_payload()
        body = client.post(
            "/split",
            json={"data": data, "labels": labels, "positive_fraction": 0.5, "seed": 2},
        ).json()
        assert len(body["positives"]) == 15
        assert len(body["unlabeled"]) == 45
        assert len(body["hidden_truth"]) == 45


class TestForestEndpoints:
    def test_fit_score_roundtrip(self, client):
        data, _ = blob_payload()
        forest = client.post(
            "/forest/fit",
            json={"config": {"n_estimators": 10, "subsample_size": 16, "seed": 1}, "data": data},
        ).json()
        assert forest["kind"] == "isolation_forest"
        scored = client.post("/forest/score", json={"forest": forest, "data": data}).json()
        assert len(scored["scores"]) == len(data)
        assert all(0.0 < s <= 1.0 for s in scored["scores"])

    def test_rank_then_mine(self, client):
        data, _ = blob_payload()
        forest = client.post(
            "/forest/fit",
            json={"config": {"n_estimators": 10, "subsample_size": 16, "seed": 1}, "data": data},
        ).json()
        ranked = client.post("/rank", json={"forest": forest, "data": data}).json()
        assert sorted(ranked["order"]) == list(range(len(data)))
        mined = client.post(
            "/mine", json={"order": ranked["order"], "scores": ranked["scores"], "k": 5}
        ).json()
        assert mined["indices"] == ranked["order"][:5]


class TestClassifierEndpoints:
    def test_train_predict(self, client):
        data, labels = blob_payload()
        model = client.post(
            "/classifier/train",
            json={"data": data, "labels": labels, "config": {"epochs": 5, "seed": 2}},
        ).json()
        assert model["kind"] == "mlp_classifier"
        pred = client.post("/classifier/predict", json={"model": model, "data": data}).json()
        assert len(pred["probabilities"]) == len(data)
        agree = np.mean([p == y for p, y in zip(pred["labels"], labels)])
        assert agree > 0.9

    def test_evaluate_metrics(self, client):
        data, labels = blob_payload()
        model = client.post(
            "/classifier/train",
            json={"data": data, "labels": labels, "config": {"epochs": 5, "seed": 2}},
        ).json()
        body = client.post(
            "/evaluate", json={"model": model, "data": data, "labels": labels}
        ).json()
        assert body["metrics"] is not None
        assert 0.0 <= body["metrics"]["accuracy"] <= 100.0


class TestPipelineEndpoint:
    def test_matches_library_run(self, client):
        ds = gen_blobs(BlobSpec(n_per_class=25, d=3, separation=6.0, seed=7))
        pos = ds.features.data[ds.labels == 1][:10]
        unl = np.concatenate([ds.features.data[ds.labels == 1][10:], ds.features.data[ds.labels == 0]])
        config = {
            "master_seed": 13,
            "forest": {"n_estimators": 15, "subsample_size": 32},
            "classifier": {"hidden_sizes": [16, 8], "epochs": 5},
        }
        body = client.post(
            "/pipeline/run",
            json={
                "positives": [[float(v) for v in r] for r in pos],
                "unlabeled": [[float(v) for v in r] for r in unl],
                "config": config,
            },
        ).json()
        pu = PUDataset(positives=FeatureMatrix(pos), unlabeled=FeatureMatrix(unl))
        cfg = RunConfig(
            master_seed=13,
            forest=ForestConfig(n_estimators=15, subsample_size=32),
            classifier=MlpConfig(input_dim=3, hidden_sizes=(16, 8), epochs=5),
        )
        _, preds, pool = run_weak_pipeline(pu, cfg)
        assert body["predictions"] == preds.tolist()
        assert body["order"] == pool.order.tolist()
        model = model_from_dict(body["model"])
        assert np.array_equal(predict_batch(model, pu.unlabeled), preds)


class TestExperimentEndpoint:
    def test_synth_sweep_smoke(self, client):
        req = {
            "config": {
                "master_seed": 21,
                "folds": 2,
                "forest": {"n_estimators": 10, "subsample_size": 32},
                "classifier": {"hidden_sizes": [16, 8], "epochs": 4, "batch_size": 16},
            },
            "fractions": [0.2, 0.5],
            "synth": {"kind": "blobs", "n_per_class": 20, "d": 3, "separation": 8.0},
        }
        body = client.post("/experiment", json=req).json()
        assert set(body["report"]["weak"].keys()) == {"0.2", "0.5"}
        assert body["table"].count("F1-score") == 1
        assert body["folds_csv"].startswith("setting,fold,")

    def test_requires_exactly_one_source(self, client):
        resp = client.post("/experiment", json={"config": {}})
        assert resp.status_code == 400
        assert resp.json()["kind"] == "config"
