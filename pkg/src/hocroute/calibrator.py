"""Snapshot-based post-hoc calibration.

Partitions a k-snapshot calibration set, stores per-bin tagged mixtures of
(prediction, snapshot-mean) pairs, and optionally re-centers the stored
predictions at the bin centroid. All loss evaluation is deferred to query
time, so one calibrated model serves every loss and penalty configuration.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    InvalidInputError,
    LabelDistribution,
    SnapshotExample,
    UnsupportedDiagnosticError,
    snapshot_mean_matrix,
    weak_pred_matrix,
)
from .losses import LossSpec, entropy_batch, expected_loss_batch
from .partition import PartitionSpec, assign_many


@dataclass(eq=False)
class TaggedMixture:
    """A bin's empirical distribution of (prediction, snapshot-mean) pairs,
    stored as raw entry rows in input order."""

    preds: np.ndarray  # (count, classes)
    means: np.ndarray  # (count, classes)

    def __post_init__(self) -> None:
        self.preds = np.asarray(self.preds, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        if self.preds.shape != self.means.shape:
            raise InvalidInputError("prediction and mean rows must align")

    @property
    def count(self) -> int:
        return int(self.means.shape[0])


@dataclass(eq=False)
class CalibratedRouterModel:
    """The deployable statistic: a partition plus per-bin tagged mixtures.

    Bins never seen at query time (or fitted bins that received no
    calibration data) are served by the global mixture over the whole
    calibration set, keeping the router total.
    """

    partition: PartitionSpec
    mixtures: dict[str, TaggedMixture]
    global_mixture: TaggedMixture
    recalibrated: bool
    num_classes: int
    centroids: dict[str, LabelDistribution] = field(default_factory=dict)

    def mixture(self, bin_id: str) -> TaggedMixture:
        found = self.mixtures.get(bin_id)
        return found if found is not None and found.count > 0 else self.global_mixture

    @property
    def global_centroid(self) -> np.ndarray:
        return self.global_mixture.means.mean(axis=0)

    def deployed_row(self, bin_id: str, raw_pred: np.ndarray) -> np.ndarray:
        """The prediction served for a point: its bin centroid when
        recalibrated, the raw weak prediction otherwise."""
        if not self.recalibrated:
            return raw_pred
        centroid = self.centroids.get(bin_id)
        return self.global_centroid if centroid is None else centroid.probs

    def deployed_prediction(self, example) -> LabelDistribution:
        from .partition import assign

        row = self.deployed_row(assign(self.partition, example), example.weak_pred.probs)
        return LabelDistribution(row)

    def deployed_matrix(
        self, examples: Sequence[SnapshotExample], bins: Sequence[str] | None = None
    ) -> np.ndarray:
        raw = weak_pred_matrix(examples)
        if not self.recalibrated:
            return raw
        if bins is None:
            bins = assign_many(self.partition, examples)
        return np.stack([self.deployed_row(b, raw[i]) for i, b in enumerate(bins)])


def calibrate(
    partition: PartitionSpec,
    calibration: Sequence[SnapshotExample],
    recalibrate: bool = False,
) -> CalibratedRouterModel:
    """Build per-bin tagged mixtures from a k-snapshot calibration set.

    With ``recalibrate`` the stored prediction of every entry is replaced by
    the centroid of the snapshot means in its bin, and the centroid map is
    kept so the same value is served as the deployed prediction at query
    time.
    """
    if not calibration:
        raise InvalidInputError("calibration set is empty")
    num_classes = calibration[0].num_classes
    if any(e.num_classes != num_classes for e in calibration):
        raise InvalidInputError("calibration examples disagree on class count")

    preds = weak_pred_matrix(calibration)
    means = snapshot_mean_matrix(calibration)
    bins = assign_many(partition, calibration)

    grouped: dict[str, list[int]] = {}
    for i, b in enumerate(bins):
        grouped.setdefault(b, []).append(i)

    mixtures: dict[str, TaggedMixture] = {}
    centroids: dict[str, LabelDistribution] = {}
    for b, idxs in grouped.items():
        bin_means = means[idxs]
        if recalibrate:
            centroid = bin_means.mean(axis=0)
            centroids[b] = LabelDistribution(centroid)
            bin_preds = np.tile(centroid, (len(idxs), 1))
        else:
            bin_preds = preds[idxs]
        mixtures[b] = TaggedMixture(preds=bin_preds, means=bin_means)

    if recalibrate:
        global_preds = np.tile(means.mean(axis=0), (means.shape[0], 1))
    else:
        global_preds = preds
    global_mixture = TaggedMixture(preds=global_preds, means=means)

    return CalibratedRouterModel(
        partition=partition,
        mixtures=mixtures,
        global_mixture=global_mixture,
        recalibrated=recalibrate,
        num_classes=num_classes,
        centroids=centroids,
    )


def estimate_decomposition(
    model: CalibratedRouterModel, bin_id: str, loss: LossSpec
) -> tuple[float, float]:
    """(irreducible, reducible) loss estimates for one bin.

    Irreducible is the mean self-loss of the snapshot means; reducible is
    the mean total loss of the stored predictions minus that. The two always
    add up to the mean total loss exactly.
    """
    mixture = model.mixture(bin_id)
    irreducible = float(np.mean(entropy_batch(loss, mixture.means)))
    total = float(np.mean(expected_loss_batch(loss, mixture.means, mixture.preds)))
    return irreducible, total - irreducible


# ---------------------------------------------------------------------------
# Higher-order calibration diagnostic (binary classification)
# ---------------------------------------------------------------------------


def wasserstein_1d(a: np.ndarray, b: np.ndarray) -> float:
    """1-Wasserstein distance between two one-dimensional empirical samples,
    computed as the area between the sorted empirical CDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    if a.size == 0 or b.size == 0:
        raise InvalidInputError("need nonempty samples")
    support = np.concatenate([a, b])
    support.sort(kind="mergesort")
    deltas = np.diff(support)
    cdf_a = np.searchsorted(a, support[:-1], side="right") / a.size
    cdf_b = np.searchsorted(b, support[:-1], side="right") / b.size
    return float(np.sum(np.abs(cdf_a - cdf_b) * deltas))


def wasserstein_error(
    model: CalibratedRouterModel, reference: Sequence[SnapshotExample]
) -> dict[str, float]:
    """Per-bin distance between the calibrated mixture's snapshot-mean
    distribution and a held-out reference sample.

    Binary classification only: the distance is computed on the positive
    class coordinate and doubled, which equals the 1-Wasserstein distance
    under the l1 norm on the two-class simplex. This is a proxy for the
    higher-order calibration error against the unobservable exact mixture.
    """
    if model.num_classes != 2:
        raise UnsupportedDiagnosticError("Wasserstein diagnostic requires 2 classes")
    if not reference:
        raise InvalidInputError("reference set is empty")
    ref_means = snapshot_mean_matrix(reference)
    bins = assign_many(model.partition, reference)
    grouped: dict[str, list[int]] = {}
    for i, b in enumerate(bins):
        grouped.setdefault(b, []).append(i)
    return {
        b: 2.0 * wasserstein_1d(model.mixture(b).means[:, 1], ref_means[idxs, 1])
        for b, idxs in grouped.items()
    }


def aggregate_wasserstein(
    model: CalibratedRouterModel, reference: Sequence[SnapshotExample]
) -> float:
    """Reference-mass-weighted mean of the per-bin Wasserstein proxy."""
    per_bin = wasserstein_error(model, reference)
    bins = assign_many(model.partition, reference)
    counts: dict[str, int] = {}
    for b in bins:
        counts[b] = counts.get(b, 0) + 1
    total = sum(counts.values())
    return float(sum(per_bin[b] * counts[b] for b in per_bin) / total)
