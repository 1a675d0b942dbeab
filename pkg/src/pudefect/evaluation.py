"""Metrics, stratified cross-validation, the fully supervised baseline,
and the positive-fraction sweep with its report renderers.

All metrics are percentages. Aggregates report the per-fold mean and the
sample (n-1) standard deviation, rendered as "96.68 (+/-0.09)"-style
strings with two decimals.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .classifier import classify, predict_batch
from .classifier import train as train_classifier
from .data import LabeledDataset, make_pu_split
from .errors import DataError, PudefectError, StageError
from .pipeline import RunConfig, classifier_config_for, run_weak_pipeline
from .seeding import derive_seed, make_rng, permutation

METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class FoldMetrics:
    """One fold's metrics in percent; degenerate marks any 0/0 ratio."""

    accuracy: float
    precision: float
    recall: float
    f1: float
    degenerate: bool = False

    def get(self, name: str) -> float:
        return getattr(self, name)


@dataclass(frozen=True)
class MetricsReport:
    per_fold: list[FoldMetrics]

    def mean(self, name: str) -> float:
        return float(np.mean([fm.get(name) for fm in self.per_fold]))

    def std(self, name: str) -> float:
        values = [fm.get(name) for fm in self.per_fold]
        if len(values) < 2:
            return 0.0
        return float(np.std(values, ddof=1))

    def formatted(self, name: str) -> str:
        return format_metric(self.mean(name), self.std(name))

    def to_dict(self) -> dict:
        return {
            name: {
                "mean": self.mean(name),
                "std": self.std(name),
                "per_fold": [fm.get(name) for fm in self.per_fold],
            }
            for name in METRIC_NAMES
        } | {"degenerate_folds": [i for i, fm in enumerate(self.per_fold) if fm.degenerate]}


@dataclass(frozen=True)
class SweepResult:
    fractions: list[float]
    weak: dict[float, MetricsReport]
    baseline: MetricsReport


def format_metric(mean: float, std: float) -> str:
    return f"{mean:.2f} (±{std:.2f})"


def confusion(predicted, actual) -> ConfusionCounts:
    pred = np.asarray(predicted, dtype=np.int64)
    act = np.asarray(actual, dtype=np.int64)
    if pred.shape != act.shape or pred.ndim != 1 or pred.size == 0:
        raise DataError(f"prediction/label shapes invalid: {pred.shape} vs {act.shape}")
    return ConfusionCounts(
        tp=int(np.sum((pred == 1) & (act == 1))),
        fp=int(np.sum((pred == 1) & (act == 0))),
        tn=int(np.sum((pred == 0) & (act == 0))),
        fn=int(np.sum((pred == 0) & (act == 1))),
    )


def metrics(c: ConfusionCounts) -> FoldMetrics:
    """Accuracy, precision, recall, F1 in percent; 0/0 ratios become 0
    with the degenerate flag set so sweeps keep running."""
    if c.total <= 0:
        raise DataError("metrics need at least one evaluated sample")
    degenerate = False

    def ratio(num: int, den: int) -> float:
        nonlocal degenerate
        if den == 0:
            degenerate = True
            return 0.0
        return num / den

    accuracy = (c.tp + c.tn) / c.total
    precision = ratio(c.tp, c.tp + c.fp)
    recall = ratio(c.tp, c.tp + c.fn)
    f1 = ratio_f1(precision, recall)
    if precision + recall == 0.0:
        degenerate = True
    return FoldMetrics(
        accuracy=100.0 * accuracy,
        precision=100.0 * precision,
        recall=100.0 * recall,
        f1=100.0 * f1,
        degenerate=degenerate,
    )


def ratio_f1(precision: float, recall: float) -> float:
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def stratified_kfold(labels, k: int, seed: int) -> list[np.ndarray]:
    """k disjoint test-index folds preserving class proportions to +/-1.

    Each class's indices are shuffled with the seeded stream, then dealt
    into contiguous chunks whose sizes differ by at most one.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if k < 2:
        raise DataError("k must be >= 2")
    folds: list[list[int]] = [[] for _ in range(k)]
    rng = make_rng(seed)
    for cls in np.unique(labels):
        idx = np.nonzero(labels == cls)[0]
        if idx.size < k:
            raise DataError(f"class {cls} has {idx.size} samples, fewer than k={k}")
        shuffled = idx[permutation(rng, idx.size)]
        base, extra = divmod(idx.size, k)
        start = 0
        for f in range(k):
            size = base + (1 if f < extra else 0)
            folds[f].extend(shuffled[start : start + size].tolist())
            start += size
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def _train_test(data: LabeledDataset, test_idx: np.ndarray):
    mask = np.ones(data.n, dtype=bool)
    mask[test_idx] = False
    return data.subset(np.nonzero(mask)[0]), data.subset(test_idx)


def cross_validate_supervised(data: LabeledDataset, cfg: RunConfig) -> MetricsReport:
    """Baseline: the same classifier trained on fully labeled folds."""
    folds = stratified_kfold(data.labels, cfg.folds, derive_seed(cfg.master_seed, "folds"))
    per_fold = []
    for fold_no, test_idx in enumerate(folds):
        train_set, test_set = _train_test(data, test_idx)
        clf_cfg = classifier_config_for(
            replace(cfg, master_seed=derive_seed(cfg.master_seed, "baseline", fold_no)),
            data.features.d,
        )
        model = train_classifier(train_set, clf_cfg)
        predicted = classify(predict_batch(model, test_set.features))
        per_fold.append(metrics(confusion(predicted, test_set.labels)))
    return MetricsReport(per_fold=per_fold)


def cross_validate_weak(
    data: LabeledDataset,
    cfg: RunConfig,
    n_threads: int = 1,
) -> MetricsReport:
    """Per fold: build the PU split from the training portion only, run
    the weak pipeline, and score the untouched test fold against ground
    truth."""
    folds = stratified_kfold(data.labels, cfg.folds, derive_seed(cfg.master_seed, "folds"))
    frac_key = f"{cfg.positive_fraction:.6g}"
    per_fold = []
    for fold_no, test_idx in enumerate(folds):
        try:
            train_set, test_set = _train_test(data, test_idx)
            pu = make_pu_split(
                train_set,
                cfg.positive_class,
                cfg.positive_fraction,
                seed=derive_seed(cfg.master_seed, "split", fold_no),
            )
            cell_cfg = replace(
                cfg, master_seed=derive_seed(cfg.master_seed, "weak", fold_no, frac_key)
            )
            model, _, _ = run_weak_pipeline(pu, cell_cfg, n_threads=n_threads)
            probs = predict_batch(model, test_set.features)
            pred_positive = classify(probs)
            if cfg.positive_class == 1:
                predicted = pred_positive
            else:
                predicted = (1 - pred_positive).astype(np.int8)
            per_fold.append(metrics(confusion(predicted, test_set.labels)))
        except PudefectError as exc:
            raise StageError(f"fold {fold_no}: {exc}") from exc
    return MetricsReport(per_fold=per_fold)


DEFAULT_FRACTIONS = (0.05, 0.10, 0.15, 0.20, 0.30)


def run_sweep(
    data: LabeledDataset,
    cfg: RunConfig,
    fractions=DEFAULT_FRACTIONS,
    n_threads: int = 1,
) -> SweepResult:
    """One weak CV per positive fraction plus the supervised baseline."""
    fractions = [float(f) for f in fractions]
    weak: dict[float, MetricsReport] = {}
    for fraction in fractions:
        try:
            weak[fraction] = cross_validate_weak(
                data, replace(cfg, positive_fraction=fraction), n_threads=n_threads
            )
        except PudefectError as exc:
            raise StageError(f"sweep cell fraction={fraction:g}: {exc}") from exc
    try:
        baseline = cross_validate_supervised(data, cfg)
    except PudefectError as exc:
        raise StageError(f"sweep baseline: {exc}") from exc
    return SweepResult(fractions=fractions, weak=weak, baseline=baseline)


# ---------------------------------------------------------------------------
# Report rendering


def sweep_to_dict(result: SweepResult) -> dict:
    return {
        "fractions": result.fractions,
        "baseline": result.baseline.to_dict(),
        "weak": {f"{f:g}": result.weak[f].to_dict() for f in result.fractions},
    }


def sweep_table(result: SweepResult) -> str:
    """Aligned text table: one row per metric, supervised column first,
    then one column per positive fraction."""
    headers = ["Metric", "Supervised 100%"] + [f"{100 * f:g}%" for f in result.fractions]
    rows = []
    row_titles = {
        "accuracy": "Accuracy (%)",
        "precision": "Precision (%)",
        "recall": "Recall (%)",
        "f1": "F1-score (%)",
    }
    for name in METRIC_NAMES:
        cells = [row_titles[name], result.baseline.formatted(name)]
        cells += [result.weak[f].formatted(name) for f in result.fractions]
        rows.append(cells)
    widths = [max(len(r[i]) for r in [headers] + rows) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(headers, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
    return "\n".join(lines) + "\n"


def sweep_folds_csv(result: SweepResult) -> str:
    """Raw per-fold metrics: setting,fold,accuracy,precision,recall,f1."""
    lines = ["setting,fold,accuracy,precision,recall,f1"]

    def emit(setting: str, report: MetricsReport) -> None:
        for fold_no, fm in enumerate(report.per_fold):
            lines.append(
                f"{setting},{fold_no},{fm.accuracy:.6f},{fm.precision:.6f},"
                f"{fm.recall:.6f},{fm.f1:.6f}"
            )

    emit("supervised", result.baseline)
    for fraction in result.fractions:
        emit(f"{fraction:g}", result.weak[fraction])
    return "\n".join(lines) + "\n"
