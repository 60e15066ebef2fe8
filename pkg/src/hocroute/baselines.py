"""Ranking policies for two-way routing curves.

A policy assigns every test point a priority score; higher-scored points
are routed first. The pointwise-optimal and bucket-optimal policies read
the ground truth of the test set itself, so they are oracle baselines.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .calibrator import CalibratedRouterModel
from .core import InvalidInputError, SnapshotExample, ground_truth_matrix, weak_pred_matrix
from .losses import LossSpec, entropy_batch, expected_loss_batch
from .partition import assign_many

TOTAL_UNCERTAINTY = "total_uncertainty"
POINTWISE_OPTIMAL = "pointwise_optimal"
BUCKET_OPTIMAL = "bucket_optimal"
RANDOM = "random"


@dataclass(eq=False)
class RankedPolicy:
    """Per-example routing priorities, aligned with the example list the
    policy was built from. Ties in downstream orderings break by example id."""

    name: str
    scores: np.ndarray

    def __post_init__(self) -> None:
        self.scores = np.asarray(self.scores, dtype=float)
        if not np.all(np.isfinite(self.scores)):
            raise InvalidInputError("policy scores must be finite")


def _deployed(
    test: Sequence[SnapshotExample],
    model: CalibratedRouterModel | None,
    use_recalibrated: bool = True,
) -> np.ndarray:
    if model is None or not use_recalibrated:
        return weak_pred_matrix(test)
    return model.deployed_matrix(test)


def total_uncertainty_scores(
    test: Sequence[SnapshotExample],
    loss: LossSpec,
    model: CalibratedRouterModel | None = None,
    use_recalibrated: bool = True,
) -> RankedPolicy:
    """Rank by the deployed prediction's own entropy under the target loss."""
    return RankedPolicy(TOTAL_UNCERTAINTY, entropy_batch(loss, _deployed(test, model, use_recalibrated)))


def _reducible(test, loss, model, truths=None, use_recalibrated=True) -> np.ndarray:
    gt = ground_truth_matrix(test) if truths is None else np.asarray(truths, dtype=float)
    deployed = _deployed(test, model, use_recalibrated)
    return expected_loss_batch(loss, gt, deployed) - entropy_batch(loss, gt)


def pointwise_optimal_scores(
    test: Sequence[SnapshotExample],
    loss: LossSpec,
    model: CalibratedRouterModel | None = None,
    truths: np.ndarray | None = None,
    use_recalibrated: bool = True,
) -> RankedPolicy:
    """Rank by the true per-point reducible loss (oracle baseline)."""
    return RankedPolicy(POINTWISE_OPTIMAL, _reducible(test, loss, model, truths, use_recalibrated))


def bucket_optimal_scores(
    test: Sequence[SnapshotExample],
    loss: LossSpec,
    model: CalibratedRouterModel,
    truths: np.ndarray | None = None,
    use_recalibrated: bool = True,
) -> RankedPolicy:
    """Rank by the mean true reducible loss of each point's bin, measured on
    the test set itself: the best ordering that is constant per bin."""
    reducible = _reducible(test, loss, model, truths, use_recalibrated)
    bins = assign_many(model.partition, test)
    sums: dict[str, float] = {}
    counts: dict[str, int] = {}
    for value, b in zip(reducible, bins):
        sums[b] = sums.get(b, 0.0) + float(value)
        counts[b] = counts.get(b, 0) + 1
    bin_mean = {b: sums[b] / counts[b] for b in sums}
    return RankedPolicy(BUCKET_OPTIMAL, np.array([bin_mean[b] for b in bins]))


def random_scores(test: Sequence[SnapshotExample], seed: int = 0) -> RankedPolicy:
    """Uniformly random priorities; its curve declines linearly in expectation."""
    rng = np.random.default_rng(seed)
    return RankedPolicy(RANDOM, rng.random(len(test)))


def external_scores(
    test: Sequence[SnapshotExample], table: dict[str, float], name: str = "external"
) -> RankedPolicy:
    """Adopt externally computed priorities keyed by example id."""
    missing = [e.id for e in test if e.id not in table]
    if missing:
        raise InvalidInputError(f"scores missing for {len(missing)} ids (first: {missing[0]})")
    return RankedPolicy(name, np.array([float(table[e.id]) for e in test]))
