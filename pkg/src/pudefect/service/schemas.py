"""Pydantic request/response models for the HTTP surface.

Feature matrices travel as JSON lists of float rows; fitted forests and
classifiers travel as their JSON documents, so every artifact the service
returns can be stored to disk and fed back verbatim.
"""
from __future__ import annotations

from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field

from ..classifier import MlpConfig
from ..iforest import ForestConfig
from ..pipeline import RunConfig


class StrictModel(BaseModel):
    model_config = ConfigDict(extra="forbid")


class MatrixPayload(StrictModel):
    data: list[list[float]]


class LabeledPayload(StrictModel):
    data: list[list[float]]
    labels: list[int]


class ForestConfigModel(StrictModel):
    n_estimators: int = 100
    subsample_size: int = 256
    contamination: float = 0.1
    max_depth: int | None = None
    seed: int = 0

    def to_core(self) -> ForestConfig:
        return ForestConfig(**self.model_dump())


class ClassifierConfigModel(StrictModel):
    hidden_sizes: tuple[int, int] = (256, 128)
    dropout_rate: float = 0.2
    learning_rate: float = 1e-3
    batch_size: int = 32
    epochs: int = 50
    mixup_alpha: float = 0.2
    seed: int = 0

    def to_core(self, input_dim: int) -> MlpConfig:
        return MlpConfig(input_dim=input_dim, **self.model_dump())


class RunConfigModel(StrictModel):
    """Wire/config-file mirror of RunConfig; flags may override fields."""

    master_seed: int = 0
    positive_fraction: float = 0.1
    positive_class: Literal[0, 1] = 1
    folds: int = 5
    mixup_alpha: float = 0.2
    forest: ForestConfigModel = Field(default_factory=ForestConfigModel)
    classifier: ClassifierConfigModel = Field(default_factory=ClassifierConfigModel)

    def to_core(self, input_dim: int | None = None) -> RunConfig:
        return RunConfig(
            master_seed=self.master_seed,
            positive_fraction=self.positive_fraction,
            positive_class=self.positive_class,
            folds=self.folds,
            mixup_alpha=self.mixup_alpha,
            forest=self.forest.to_core(),
            classifier=self.classifier.to_core(input_dim or 1),
        )


class BlobsRequest(StrictModel):
    n_per_class: int
    d: int
    separation: float
    seed: int = 0


class AnomaliesRequest(StrictModel):
    n_inliers: int
    n_outliers: int
    d: int
    r_min: float = 6.0
    r_max: float = 10.0
    seed: int = 0


class AnomaliesResponse(StrictModel):
    data: list[list[float]]
    flags: list[int]


class SplitRequest(StrictModel):
    data: list[list[float]]
    labels: list[int]
    positive_class: Literal[0, 1] = 1
    positive_fraction: float
    seed: int = 0


class SplitResponse(StrictModel):
    positives: list[list[float]]
    unlabeled: list[list[float]]
    hidden_truth: list[int] | None = None


class FitForestRequest(StrictModel):
    config: ForestConfigModel = Field(default_factory=ForestConfigModel)
    data: list[list[float]]
    threads: int = 1


class ScoreRequest(StrictModel):
    forest: dict[str, Any]
    data: list[list[float]]


class ScoreResponse(StrictModel):
    scores: list[float]


class RankResponse(StrictModel):
    order: list[int]
    scores: list[float]


class MineRequest(StrictModel):
    order: list[int]
    scores: list[float]
    k: int


class MineResponse(StrictModel):
    indices: list[int]


class AssembleRequest(StrictModel):
    positives: list[list[float]]
    unlabeled: list[list[float]]
    indices: list[int]
    seed: int = 0


class TrainRequest(StrictModel):
    data: list[list[float]]
    labels: list[int]
    config: ClassifierConfigModel = Field(default_factory=ClassifierConfigModel)


class PredictRequest(StrictModel):
    model: dict[str, Any]
    data: list[list[float]]


class PredictResponse(StrictModel):
    probabilities: list[float]
    labels: list[int]


class MetricsPayload(StrictModel):
    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: bool


class EvaluateRequest(StrictModel):
    model: dict[str, Any]
    data: list[list[float]]
    labels: list[int] | None = None


class EvaluateResponse(StrictModel):
    probabilities: list[float]
    labels: list[int]
    metrics: MetricsPayload | None = None


class PipelineRequest(StrictModel):
    positives: list[list[float]]
    unlabeled: list[list[float]]
    config: RunConfigModel = Field(default_factory=RunConfigModel)
    threads: int = 1


class PipelineResponse(StrictModel):
    model: dict[str, Any]
    predictions: list[float]
    order: list[int]
    scores: list[float]


class SynthSpecModel(StrictModel):
    kind: Literal["blobs"] = "blobs"
    n_per_class: int = 500
    d: int = 20
    separation: float = 8.0


class DataRefModel(StrictModel):
    """Config-file pointer to a local feature file (resolved client-side)."""

    path: str
    format: Literal["auto", "csv", "pufv"] = "auto"


class ExperimentConfigModel(RunConfigModel):
    """Experiment config file: run config plus an optional data source."""

    fractions: list[float] | None = None
    data: DataRefModel | None = None
    synth: SynthSpecModel | None = None


class ExperimentRequest(StrictModel):
    config: RunConfigModel = Field(default_factory=RunConfigModel)
    fractions: list[float] = Field(default_factory=lambda: [0.05, 0.10, 0.15, 0.20, 0.30])
    data: LabeledPayload | None = None
    synth: SynthSpecModel | None = None
    threads: int = 1


class ExperimentResponse(StrictModel):
    report: dict[str, Any]
    table: str
    folds_csv: str


class HealthResponse(StrictModel):
    status: str


class ErrorResponse(StrictModel):
    detail: str
    kind: str
