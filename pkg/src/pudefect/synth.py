"""Seeded synthetic generators used as ground truth by the test suite.

Gaussian draws go through an explicit Box-Muller transform over the
seeded uniform stream, so the generated distributions depend only on the
seed and the documented construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import FeatureMatrix, LabeledDataset
from .errors import ConfigError
from .seeding import make_rng


@dataclass(frozen=True)
class BlobSpec:
    """Two Gaussian classes separated along the all-ones diagonal."""

    n_per_class: int
    d: int
    separation: float
    seed: int

    def __post_init__(self) -> None:
        if self.n_per_class < 1:
            raise ConfigError("n_per_class must be >= 1")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.separation < 0:
            raise ConfigError("separation must be >= 0")


@dataclass(frozen=True)
class PlantedAnomalySpec:
    """Unit Gaussian inliers plus outliers on a far spherical shell."""

    n_inliers: int
    n_outliers: int
    d: int
    r_min: float = 6.0
    r_max: float = 10.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_inliers < 1:
            raise ConfigError("n_inliers must be >= 1")
        if self.n_outliers < 0:
            raise ConfigError("n_outliers must be >= 0")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if not (self.r_min > 3.0 and self.r_max >= self.r_min):
            raise ConfigError("shell radii must satisfy 3 < r_min <= r_max")


def box_muller(rng: np.random.Generator, count: int) -> np.ndarray:
    """Standard normals from pairs of uniforms; u1 shifted into (0, 1]."""
    m = (count + 1) // 2
    u1 = 1.0 - rng.random(m)
    u2 = rng.random(m)
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    z = np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])
    return z[:count]


def gen_blobs(spec: BlobSpec) -> LabeledDataset:
    """Class 0 at -(sep/2)*u and class 1 at +(sep/2)*u, identity covariance."""
    rng = make_rng(spec.seed)
    u = np.ones(spec.d) / np.sqrt(spec.d)
    offset = (spec.separation / 2.0) * u
    n = spec.n_per_class
    base = box_muller(rng, 2 * n * spec.d).reshape(2 * n, spec.d)
    feats = np.concatenate([base[:n] - offset, base[n:] + offset], axis=0)
    labels = np.concatenate([np.zeros(n, dtype=np.int8), np.ones(n, dtype=np.int8)])
    return LabeledDataset(FeatureMatrix(feats.astype(np.float32)), labels)


def gen_planted_anomalies(spec: PlantedAnomalySpec) -> tuple[FeatureMatrix, np.ndarray]:
    """Returns (features, outlier flags); inliers are rejection-resampled
    until their stored float32 norm stays strictly inside the shell."""
    rng = make_rng(spec.seed)
    inliers = np.empty((spec.n_inliers, spec.d), dtype=np.float32)
    for i in range(spec.n_inliers):
        while True:
            row = box_muller(rng, spec.d).astype(np.float32)
            if np.linalg.norm(row.astype(np.float64)) < spec.r_min:
                inliers[i] = row
                break
    outliers = np.empty((spec.n_outliers, spec.d), dtype=np.float32)
    for i in range(spec.n_outliers):
        direction = box_muller(rng, spec.d)
        norm = np.linalg.norm(direction)
        while norm == 0.0:
            direction = box_muller(rng, spec.d)
            norm = np.linalg.norm(direction)
        radius = spec.r_min + (spec.r_max - spec.r_min) * rng.random()
        outliers[i] = (direction / norm * radius).astype(np.float32)
    feats = np.concatenate([inliers, outliers], axis=0)
    flags = np.concatenate(
        [np.zeros(spec.n_inliers, dtype=np.int8), np.ones(spec.n_outliers, dtype=np.int8)]
    )
    return FeatureMatrix(feats), flags
