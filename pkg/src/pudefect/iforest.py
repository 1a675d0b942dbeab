"""Isolation forest anomaly scorer built from scratch.

Trees isolate points with uniformly random axis-aligned splits drawn
strictly between the per-dimension min and max of the reached subsample.
A sample's anomaly score is 2^(-E[h]/c(psi)), where E[h] is its mean
path length over the ensemble and c(n) the expected unsuccessful-search
path length of a random binary tree; shorter paths mean more anomalous.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import FeatureMatrix
from .errors import ConfigError, DataError, FormatError
from .seeding import derive_seed, make_rng, sample_without_replacement

EULER_GAMMA = float(np.euler_gamma)

# Redraws allowed when a uniform draw lands exactly on a subsample bound.
_MAX_SPLIT_REDRAWS = 8


@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 100
    subsample_size: int = 256
    contamination: float = 0.1
    max_depth: int | None = None  # None = ceil(log2(effective subsample size))
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ConfigError("n_estimators must be >= 1")
        if self.subsample_size < 2:
            raise ConfigError("subsample_size must be >= 2")
        if not (0.0 < self.contamination <= 0.5):
            raise ConfigError("contamination must be in (0, 0.5]")
        if self.max_depth is not None and self.max_depth < 1:
            raise ConfigError("max_depth must be >= 1 when given")


@dataclass
class IsoTree:
    """Flat node arrays; feature[i] == -1 marks a leaf with size[i] samples."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]


@dataclass
class IsolationForest:
    trees: list[IsoTree]
    psi: int
    c_psi: float
    feature_dim: int
    config: ForestConfig = field(repr=False)


def avg_path_norm(n: int) -> float:
    """Expected isolation depth of n points: 0 for n<=1, 1 for n=2, else
    2*(ln(n-1) + gamma) - 2*(n-1)/n."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    return 2.0 * (math.log(n - 1.0) + EULER_GAMMA) - 2.0 * (n - 1.0) / n


def _avg_path_norm_vec(sizes: np.ndarray) -> np.ndarray:
    # Routed through the scalar function so batch and per-sample paths agree
    # to the last bit.
    uniq, inverse = np.unique(sizes, return_inverse=True)
    values = np.asarray([avg_path_norm(int(s)) for s in uniq], dtype=np.float64)
    return values[inverse].reshape(sizes.shape)


class _TreeBuilder:
    def __init__(self, max_depth: int):
        self.max_depth = max_depth
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.size: list[int] = []

    def _add(self) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.size.append(0)
        return len(self.feature) - 1

    def build(self, sub: np.ndarray, rng: np.random.Generator) -> IsoTree:
        self._grow(sub, rng, 0)
        return IsoTree(
            feature=np.asarray(self.feature, dtype=np.int64),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int64),
            right=np.asarray(self.right, dtype=np.int64),
            size=np.asarray(self.size, dtype=np.int64),
        )

    def _grow(self, sub: np.ndarray, rng: np.random.Generator, depth: int) -> int:
        node = self._add()
        n, d = sub.shape
        if depth >= self.max_depth or n <= 1:
            self.size[node] = n
            return node
        split = self._draw_split(sub, rng, d)
        if split is None:
            self.size[node] = n
            return node
        dim, value = split
        mask = sub[:, dim] < value
        self.feature[node] = dim
        self.threshold[node] = value
        self.left[node] = self._grow(sub[mask], rng, depth + 1)
        self.right[node] = self._grow(sub[~mask], rng, depth + 1)
        return node

    @staticmethod
    def _draw_split(
        sub: np.ndarray, rng: np.random.Generator, d: int
    ) -> tuple[int, float] | None:
        # Constant dimensions get redrawn up to d times; a subsample constant
        # in every sampled dimension becomes a leaf.
        for _ in range(d):
            dim = int(rng.integers(0, d))
            col = sub[:, dim]
            lo = float(col.min())
            hi = float(col.max())
            if lo >= hi:
                continue
            for _ in range(_MAX_SPLIT_REDRAWS):
                value = float(rng.uniform(lo, hi))
                if lo < value < hi:
                    return dim, value
            return None
        return None


def fit_forest(config: ForestConfig, X: FeatureMatrix, n_threads: int = 1) -> IsolationForest:
    """Build config.n_estimators trees over per-tree subsamples of
    min(subsample_size, n) rows; deterministic in (config, X) regardless
    of n_threads because each tree owns a derived sub-seed."""
    if X.n < 2:
        raise DataError(f"fitting needs at least 2 samples, got {X.n}")
    data = X.as_float64()
    psi = min(config.subsample_size, X.n)
    max_depth = config.max_depth
    if max_depth is None:
        max_depth = max(1, math.ceil(math.log2(psi)))

    def build_one(index: int) -> IsoTree:
        rng = make_rng(derive_seed(config.seed, "tree", index))
        rows = np.sort(sample_without_replacement(rng, X.n, psi))
        return _TreeBuilder(max_depth).build(data[rows], rng)

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            trees = list(pool.map(build_one, range(config.n_estimators)))
    else:
        trees = [build_one(i) for i in range(config.n_estimators)]
    return IsolationForest(
        trees=trees,
        psi=psi,
        c_psi=avg_path_norm(psi),
        feature_dim=X.d,
        config=config,
    )


def path_length(tree: IsoTree, x: np.ndarray) -> float:
    """Edges from root to the reached leaf plus the leaf-size adjustment."""
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    node = 0
    depth = 0
    while tree.feature[node] >= 0:
        dim = int(tree.feature[node])
        if dim >= x.shape[0]:
            raise DataError(f"sample has {x.shape[0]} features, tree splits on dim {dim}")
        if x[dim] < tree.threshold[node]:
            node = int(tree.left[node])
        else:
            node = int(tree.right[node])
        depth += 1
    return depth + avg_path_norm(int(tree.size[node]))


def _tree_path_lengths(tree: IsoTree, data: np.ndarray) -> np.ndarray:
    n = data.shape[0]
    node = np.zeros(n, dtype=np.int64)
    depth = np.zeros(n, dtype=np.float64)
    active = np.nonzero(tree.feature[node] >= 0)[0]
    while active.size:
        cur = node[active]
        go_left = data[active, tree.feature[cur]] < tree.threshold[cur]
        node[active] = np.where(go_left, tree.left[cur], tree.right[cur])
        depth[active] += 1.0
        active = active[tree.feature[node[active]] >= 0]
    return depth + _avg_path_norm_vec(tree.size[node])


def mean_path_lengths(forest: IsolationForest, X: FeatureMatrix) -> np.ndarray:
    if X.d != forest.feature_dim:
        raise DataError(f"expected dimension {forest.feature_dim}, got {X.d}")
    if X.n == 0:
        return np.zeros(0, dtype=np.float64)
    data = X.as_float64()
    total = np.zeros(X.n, dtype=np.float64)
    for tree in forest.trees:
        total += _tree_path_lengths(tree, data)
    return total / len(forest.trees)


def score_from_mean_path(mean_h: float, c_psi: float) -> float:
    """s = 2^(-E[h]/c(psi)); 0.5 when the mean path equals c(psi)."""
    if c_psi <= 0.0:
        return 1.0
    return float(np.exp2(-np.float64(mean_h) / np.float64(c_psi)))


def anomaly_score(forest: IsolationForest, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float32).reshape(-1)
    if x.shape[0] != forest.feature_dim:
        raise DataError(f"expected dimension {forest.feature_dim}, got {x.shape[0]}")
    mean_h = float(mean_path_lengths(forest, FeatureMatrix(x[None, :]))[0])
    return score_from_mean_path(mean_h, forest.c_psi)


def score_batch(forest: IsolationForest, X: FeatureMatrix) -> np.ndarray:
    if forest.c_psi <= 0.0:
        return np.ones(X.n, dtype=np.float64)
    return np.exp2(-mean_path_lengths(forest, X) / np.float64(forest.c_psi))


def threshold_from_contamination(scores: np.ndarray, contamination: float) -> float:
    """Nearest-rank (1-C) quantile: entry ceil((1-C)*n) of the ascending
    order (1-based), so at most ~C of the scores lie strictly above it."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise DataError("cannot take a quantile of zero scores")
    if not (0.0 < contamination < 1.0):
        raise ConfigError(f"contamination must be in (0, 1), got {contamination}")
    n = scores.size
    # Small backoff so exact products like 0.9 * 10 do not ceil to 10.
    rank = math.ceil((1.0 - contamination) * n - 1e-9)
    rank = min(max(rank, 1), n)
    return float(np.sort(scores)[rank - 1])


# ---------------------------------------------------------------------------
# JSON serialization (nested node encoding)


def _node_to_dict(tree: IsoTree, node: int) -> dict:
    if tree.feature[node] < 0:
        return {"size": int(tree.size[node])}
    return {
        "split_dimension": int(tree.feature[node]),
        "split_value": float(tree.threshold[node]),
        "left": _node_to_dict(tree, int(tree.left[node])),
        "right": _node_to_dict(tree, int(tree.right[node])),
    }


def _node_from_dict(obj: dict, builder: _TreeBuilder) -> int:
    node = builder._add()
    if "size" in obj:
        builder.size[node] = int(obj["size"])
        return node
    builder.feature[node] = int(obj["split_dimension"])
    builder.threshold[node] = float(obj["split_value"])
    builder.left[node] = _node_from_dict(obj["left"], builder)
    builder.right[node] = _node_from_dict(obj["right"], builder)
    return node


def forest_to_dict(forest: IsolationForest) -> dict:
    cfg = forest.config
    return {
        "kind": "isolation_forest",
        "config": {
            "n_estimators": cfg.n_estimators,
            "subsample_size": cfg.subsample_size,
            "contamination": cfg.contamination,
            "max_depth": cfg.max_depth,
            "seed": cfg.seed,
        },
        "psi": forest.psi,
        "c_psi": forest.c_psi,
        "feature_dim": forest.feature_dim,
        "trees": [_node_to_dict(t, 0) for t in forest.trees],
    }


def forest_from_dict(obj: dict) -> IsolationForest:
    try:
        config = ForestConfig(**obj["config"])
        trees = []
        for tree_obj in obj["trees"]:
            builder = _TreeBuilder(max_depth=0)
            _node_from_dict(tree_obj, builder)
            trees.append(
                IsoTree(
                    feature=np.asarray(builder.feature, dtype=np.int64),
                    threshold=np.asarray(builder.threshold, dtype=np.float64),
                    left=np.asarray(builder.left, dtype=np.int64),
                    right=np.asarray(builder.right, dtype=np.int64),
                    size=np.asarray(builder.size, dtype=np.int64),
                )
            )
        return IsolationForest(
            trees=trees,
            psi=int(obj["psi"]),
            c_psi=float(obj["c_psi"]),
            feature_dim=int(obj["feature_dim"]),
            config=config,
        )
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed forest document: {exc}") from exc


def forest_to_json(forest: IsolationForest) -> str:
    return json.dumps(forest_to_dict(forest), sort_keys=True)


def forest_from_json(text: str) -> IsolationForest:
    return forest_from_dict(json.loads(text))
