"""Weak-supervision pipeline: score the unlabeled pool with a forest fit
on the positives, mine the top-ranked samples as a counter-example class,
assemble a balanced training set, and train the binary classifier.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .classifier import MlpConfig, TrainedClassifier, predict_batch
from .classifier import train as train_classifier
from .data import FeatureMatrix, LabeledDataset, PUDataset
from .errors import ConfigError, DataError, PudefectError, StageError
from .iforest import ForestConfig, IsolationForest, fit_forest, score_batch
from .seeding import derive_seed, make_rng, permutation


@dataclass(frozen=True)
class RankedPool:
    """U's indices ordered by anomaly score, most anomalous first; ties
    broken by ascending original index."""

    order: np.ndarray
    scores: np.ndarray

    def __post_init__(self) -> None:
        order = np.asarray(self.order, dtype=np.int64)
        scores = np.asarray(self.scores, dtype=np.float64)
        if order.shape != scores.shape:
            raise DataError("order and scores must have equal length")
        object.__setattr__(self, "order", order)
        object.__setattr__(self, "scores", scores)

    @property
    def size(self) -> int:
        return self.order.shape[0]


@dataclass(frozen=True)
class CounterExampleSet:
    indices: np.ndarray

    @property
    def k(self) -> int:
        return self.indices.shape[0]


@dataclass(frozen=True)
class RunConfig:
    """Experiment knobs shared by the pipeline, CV, and the sweep."""

    master_seed: int = 0
    positive_fraction: float = 0.1
    positive_class: int = 1
    folds: int = 5
    mixup_alpha: float = 0.2
    forest: ForestConfig = ForestConfig()
    classifier: MlpConfig | None = None  # input_dim filled in from data

    def __post_init__(self) -> None:
        if not (0.0 < self.positive_fraction <= 1.0):
            raise ConfigError("positive_fraction must be in (0, 1]")
        if self.positive_class not in (0, 1):
            raise ConfigError("positive_class must be 0 or 1")
        if self.folds < 2:
            raise ConfigError("folds must be >= 2")
        if self.mixup_alpha < 0:
            raise ConfigError("mixup_alpha must be >= 0")


def rank_scores(scores: np.ndarray) -> np.ndarray:
    """Indices sorted by score descending, ties by ascending index."""
    scores = np.asarray(scores, dtype=np.float64)
    return np.argsort(-scores, kind="stable")


def rank_unlabeled(forest: IsolationForest, unlabeled: FeatureMatrix) -> RankedPool:
    """Stable descending sort of U by anomaly score."""
    if unlabeled.n == 0:
        raise DataError("unlabeled pool is empty")
    scores = score_batch(forest, unlabeled)
    order = rank_scores(scores)
    return RankedPool(order=order, scores=scores[order])


def mine_counter_examples(pool: RankedPool, k: int) -> CounterExampleSet:
    """First min(k, |U|) indices of the ranking."""
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    return CounterExampleSet(indices=pool.order[: min(k, pool.size)].copy())


def assemble_training_set(
    positives: FeatureMatrix,
    unlabeled: FeatureMatrix,
    counter: CounterExampleSet,
    seed: int,
) -> LabeledDataset:
    """P rows labeled 1 and mined rows labeled 0, in a seeded shuffle."""
    if positives.d != unlabeled.d:
        raise DataError(f"dimension mismatch: P has {positives.d}, U has {unlabeled.d}")
    if counter.k and int(counter.indices.max()) >= unlabeled.n:
        raise DataError("counter-example index out of range for U")
    if counter.k < positives.n:
        warnings.warn(
            f"counter-example set ({counter.k}) smaller than P ({positives.n}); "
            "training set will be imbalanced",
            stacklevel=2,
        )
    feats = np.concatenate([positives.data, unlabeled.data[counter.indices]], axis=0)
    labels = np.concatenate(
        [np.ones(positives.n, dtype=np.int8), np.zeros(counter.k, dtype=np.int8)]
    )
    order = permutation(make_rng(seed), feats.shape[0])
    return LabeledDataset(FeatureMatrix(feats[order]), labels[order])


def _stage(name: str):
    class _StageContext:
        def __enter__(self):
            return self

        def __exit__(self, exc_type, exc, tb):
            if exc is not None and isinstance(exc, PudefectError):
                raise StageError(f"stage '{name}': {exc}") from exc
            return False

    return _StageContext()


def run_weak_pipeline(
    pu: PUDataset,
    cfg: RunConfig,
    n_threads: int = 1,
) -> tuple[TrainedClassifier, np.ndarray, RankedPool]:
    """Full weak-supervision pass over a PU dataset.

    Stage seeds derive from cfg.master_seed ("forest", "assemble",
    "classifier"), so chained stage-by-stage runs with the same master
    seed reproduce this function bit-exactly. hidden_truth is never read.
    Returns the trained classifier, its probability predictions for every
    U row, and the anomaly ranking.
    """
    if pu.positives.n < 2:
        raise DataError(f"pipeline needs |P| >= 2, got {pu.positives.n}")
    with _stage("forest"):
        forest_cfg = replace(cfg.forest, seed=derive_seed(cfg.master_seed, "forest"))
        forest = fit_forest(forest_cfg, pu.positives, n_threads=n_threads)
    with _stage("rank"):
        pool = rank_unlabeled(forest, pu.unlabeled)
    with _stage("mine"):
        counter = mine_counter_examples(pool, k=pu.positives.n)
    with _stage("assemble"):
        training = assemble_training_set(
            pu.positives, pu.unlabeled, counter, seed=derive_seed(cfg.master_seed, "assemble")
        )
    with _stage("train"):
        clf_cfg = classifier_config_for(cfg, pu.positives.d)
        model = train_classifier(training, clf_cfg)
    with _stage("predict"):
        predictions = predict_batch(model, pu.unlabeled)
    return model, predictions, pool


def classifier_config_for(cfg: RunConfig, input_dim: int) -> MlpConfig:
    """Concrete classifier config for a pipeline run: data dimension and
    derived seed filled in, RunConfig.mixup_alpha taking precedence."""
    base = cfg.classifier
    seed = derive_seed(cfg.master_seed, "classifier")
    if base is None:
        return MlpConfig(input_dim=input_dim, mixup_alpha=cfg.mixup_alpha, seed=seed)
    return replace(base, input_dim=input_dim, mixup_alpha=cfg.mixup_alpha, seed=seed)


def ranked_pool_to_csv(pool: RankedPool) -> str:
    """Audit export: one line per U row as rank,unlabeled_index,score."""
    lines = ["rank,unlabeled_index,score"]
    for rank, (idx, score) in enumerate(zip(pool.order, pool.scores)):
        lines.append(f"{rank},{int(idx)},{repr(float(score))}")
    return "\n".join(lines) + "\n"
