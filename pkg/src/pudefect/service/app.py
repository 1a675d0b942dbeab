"""FastAPI service wrapping the toolkit. All endpoints are stateless and
deterministic: a request carries its data and seeds, the response carries
every artifact produced, and repeating a request reproduces the response
byte for byte.
"""
from __future__ import annotations

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import classifier as clf
from .. import evaluation as ev
from .. import iforest as ifo
from .. import pipeline as pl
from .. import synth
from ..data import FeatureMatrix, LabeledDataset, make_pu_split
from ..errors import ConfigError, DataError, PudefectError
from . import schemas as sc


def _matrix(rows: list[list[float]]) -> FeatureMatrix:
    if not rows:
        raise DataError("empty feature payload")
    return FeatureMatrix(np.asarray(rows, dtype=np.float32))


def _labeled(rows: list[list[float]], labels: list[int]) -> LabeledDataset:
    return LabeledDataset(_matrix(rows), np.asarray(labels, dtype=np.int8))


def _rows(matrix: FeatureMatrix) -> list[list[float]]:
    return [[float(v) for v in row] for row in matrix.data]


def create_app() -> FastAPI:
    app = FastAPI(title="pudefect", version="0.1.0")

    @app.exception_handler(PudefectError)
    async def _pudefect_error(request: Request, exc: PudefectError) -> JSONResponse:
        kind = "config" if isinstance(exc, ConfigError) else "data"
        if not isinstance(exc, (ConfigError, DataError)):
            kind = "runtime"
        return JSONResponse(status_code=400, content={"detail": str(exc), "kind": kind})

    @app.get("/health", response_model=sc.HealthResponse)
    def health() -> sc.HealthResponse:
        return sc.HealthResponse(status="ok")

    @app.post("/synth/blobs", response_model=sc.LabeledPayload)
    def synth_blobs(req: sc.BlobsRequest) -> sc.LabeledPayload:
        dataset = synth.gen_blobs(
            synth.BlobSpec(n_per_class=req.n_per_class, d=req.d, separation=req.separation, seed=req.seed)
        )
        return sc.LabeledPayload(data=_rows(dataset.features), labels=dataset.labels.tolist())

    @app.post("/synth/anomalies", response_model=sc.AnomaliesResponse)
    def synth_anomalies(req: sc.AnomaliesRequest) -> sc.AnomaliesResponse:
        feats, flags = synth.gen_planted_anomalies(
            synth.PlantedAnomalySpec(
                n_inliers=req.n_inliers,
                n_outliers=req.n_outliers,
                d=req.d,
                r_min=req.r_min,
                r_max=req.r_max,
                seed=req.seed,
            )
        )
        return sc.AnomaliesResponse(data=_rows(feats), flags=flags.tolist())

    @app.post("/split", response_model=sc.SplitResponse)
    def split(req: sc.SplitRequest) -> sc.SplitResponse:
        pu = make_pu_split(
            _labeled(req.data, req.labels), req.positive_class, req.positive_fraction, req.seed
        )
        truth = None if pu.hidden_truth is None else pu.hidden_truth.tolist()
        return sc.SplitResponse(
            positives=_rows(pu.positives), unlabeled=_rows(pu.unlabeled), hidden_truth=truth
        )

    @app.post("/forest/fit")
    def forest_fit(req: sc.FitForestRequest) -> dict:
        forest = ifo.fit_forest(req.config.to_core(), _matrix(req.data), n_threads=req.threads)
        return ifo.forest_to_dict(forest)

    @app.post("/forest/score", response_model=sc.ScoreResponse)
    def forest_score(req: sc.ScoreRequest) -> sc.ScoreResponse:
        forest = ifo.forest_from_dict(req.forest)
        scores = ifo.score_batch(forest, _matrix(req.data))
        return sc.ScoreResponse(scores=scores.tolist())

    @app.post("/rank", response_model=sc.RankResponse)
    def rank(req: sc.ScoreRequest) -> sc.RankResponse:
        forest = ifo.forest_from_dict(req.forest)
        pool = pl.rank_unlabeled(forest, _matrix(req.data))
        return sc.RankResponse(order=pool.order.tolist(), scores=pool.scores.tolist())

    @app.post("/mine", response_model=sc.MineResponse)
    def mine(req: sc.MineRequest) -> sc.MineResponse:
        pool = pl.RankedPool(order=np.asarray(req.order), scores=np.asarray(req.scores))
        counter = pl.mine_counter_examples(pool, req.k)
        return sc.MineResponse(indices=counter.indices.tolist())

    @app.post("/pipeline/assemble", response_model=sc.LabeledPayload)
    def assemble(req: sc.AssembleRequest) -> sc.LabeledPayload:
        counter = pl.CounterExampleSet(indices=np.asarray(req.indices, dtype=np.int64))
        dataset = pl.assemble_training_set(
            _matrix(req.positives), _matrix(req.unlabeled), counter, req.seed
        )
        return sc.LabeledPayload(data=_rows(dataset.features), labels=dataset.labels.tolist())

    @app.post("/classifier/train")
    def classifier_train(req: sc.TrainRequest) -> dict:
        dataset = _labeled(req.data, req.labels)
        model = clf.train(dataset, req.config.to_core(dataset.features.d))
        return clf.model_to_dict(model)

    @app.post("/classifier/predict", response_model=sc.PredictResponse)
    def classifier_predict(req: sc.PredictRequest) -> sc.PredictResponse:
        model = clf.model_from_dict(req.model)
        probs = clf.predict_batch(model, _matrix(req.data))
        return sc.PredictResponse(
            probabilities=probs.tolist(), labels=clf.classify(probs).tolist()
        )

    @app.post("/evaluate", response_model=sc.EvaluateResponse)
    def evaluate(req: sc.EvaluateRequest) -> sc.EvaluateResponse:
        model = clf.model_from_dict(req.model)
        probs = clf.predict_batch(model, _matrix(req.data))
        predicted = clf.classify(probs)
        payload = None
        if req.labels is not None:
            fm = ev.metrics(ev.confusion(predicted, np.asarray(req.labels)))
            payload = sc.MetricsPayload(
                accuracy=fm.accuracy,
                precision=fm.precision,
                recall=fm.recall,
                f1=fm.f1,
                degenerate=fm.degenerate,
            )
        return sc.EvaluateResponse(
            probabilities=probs.tolist(), labels=predicted.tolist(), metrics=payload
        )

    @app.post("/pipeline/run", response_model=sc.PipelineResponse)
    def pipeline_run(req: sc.PipelineRequest) -> sc.PipelineResponse:
        from ..data import PUDataset

        pu = PUDataset(positives=_matrix(req.positives), unlabeled=_matrix(req.unlabeled))
        model, predictions, pool = pl.run_weak_pipeline(
            pu, req.config.to_core(pu.positives.d), n_threads=req.threads
        )
        return sc.PipelineResponse(
            model=clf.model_to_dict(model),
            predictions=predictions.tolist(),
            order=pool.order.tolist(),
            scores=pool.scores.tolist(),
        )

    @app.post("/experiment", response_model=sc.ExperimentResponse)
    def experiment(req: sc.ExperimentRequest) -> sc.ExperimentResponse:
        if (req.data is None) == (req.synth is None):
            raise ConfigError("experiment needs exactly one of 'data' or 'synth'")
        if req.synth is not None:
            dataset = synth.gen_blobs(
                synth.BlobSpec(
                    n_per_class=req.synth.n_per_class,
                    d=req.synth.d,
                    separation=req.synth.separation,
                    seed=req.config.master_seed,
                )
            )
        else:
            dataset = _labeled(req.data.data, req.data.labels)
        cfg = req.config.to_core(dataset.features.d)
        result = ev.run_sweep(dataset, cfg, fractions=req.fractions, n_threads=req.threads)
        return sc.ExperimentResponse(
            report=ev.sweep_to_dict(result),
            table=ev.sweep_table(result),
            folds_csv=ev.sweep_folds_csv(result),
        )

    return app


app = create_app()
