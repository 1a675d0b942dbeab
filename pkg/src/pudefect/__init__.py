"""Positive-unlabeled defect detection toolkit.

Train an isolation forest on a small trusted-positive set, mine the most
anomalous unlabeled samples as counter-examples, train a balanced binary
classifier, and benchmark against a fully supervised baseline.
"""

from .classifier import (
    MlpConfig,
    Parameters,
    TrainedClassifier,
    bce_loss,
    classify,
    forward,
    gradients,
    init_params,
    mixup_batch,
    model_from_json,
    model_to_json,
    predict_batch,
    train,
)
from .data import (
    FeatureMatrix,
    LabeledDataset,
    PUDataset,
    load_feature_file,
    load_matrix,
    make_pu_split,
    save_feature_file,
    save_matrix,
)
from .errors import ConfigError, DataError, FormatError, PudefectError, StageError
from .evaluation import (
    ConfusionCounts,
    MetricsReport,
    SweepResult,
    confusion,
    cross_validate_supervised,
    cross_validate_weak,
    metrics,
    run_sweep,
    stratified_kfold,
)
from .iforest import (
    ForestConfig,
    IsolationForest,
    anomaly_score,
    avg_path_norm,
    fit_forest,
    forest_from_json,
    forest_to_json,
    path_length,
    score_batch,
    threshold_from_contamination,
)
from .pipeline import (
    CounterExampleSet,
    RankedPool,
    RunConfig,
    assemble_training_set,
    mine_counter_examples,
    rank_unlabeled,
    run_weak_pipeline,
)
from .synth import BlobSpec, PlantedAnomalySpec, gen_blobs, gen_planted_anomalies

__version__ = "0.1.0"
