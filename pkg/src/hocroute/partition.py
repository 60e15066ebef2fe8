"""Input-space partitions: top-class quantile bins, feature bins, exact level sets.

A fitted partition maps every example to exactly one bin id (a short
string). Quantile edges sit at equal-count split ranks of the calibration
values, using the midpoint of the two straddling order statistics, so bins
receive equal calibration mass up to one example.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import InvalidInputError, SnapshotExample
from .losses import LossSpec, entropy_batch, expected_loss_batch

TOP_CLASS = "topclass"
FEATURE = "feature"
LEVEL_SET = "levelset"
KINDS = (TOP_CLASS, FEATURE, LEVEL_SET)

# Bin id served to level-set queries whose prediction vector was never seen
# during calibration; its statistics fall back to the global mixture.
OVERFLOW_BIN = "overflow"

_LEVEL_DECIMALS = 6


def _level_key(probs: np.ndarray) -> str:
    return ",".join(f"{v:.6f}" for v in np.round(probs, _LEVEL_DECIMALS))


def _rank_edges(values: np.ndarray, buckets: int) -> np.ndarray:
    """Interior edges splitting sorted values into equal-count buckets."""
    ordered = np.sort(np.asarray(values, dtype=float))
    n = ordered.size
    b = min(int(buckets), n)
    edges: list[float] = []
    for i in range(1, b):
        cut = (i * n) // b
        edge = (ordered[cut - 1] + ordered[cut]) / 2.0
        if not edges or edge > edges[-1]:  # strictly increasing; ties collapse
            edges.append(float(edge))
    return np.asarray(edges, dtype=float)


@dataclass(eq=False)
class PartitionSpec:
    """A fitted partition. Immutable after ``fit``; safe for concurrent assign."""

    kind: str
    buckets: int
    class_edges: dict[int, np.ndarray] = field(default_factory=dict)
    edges: np.ndarray | None = None
    feature_index: int = 0
    level_keys: frozenset[str] = frozenset()

    def to_record(self) -> dict:
        return {
            "kind": self.kind,
            "buckets": self.buckets,
            "feature_index": self.feature_index,
            "class_edges": {str(c): e.tolist() for c, e in sorted(self.class_edges.items())},
            "edges": None if self.edges is None else self.edges.tolist(),
            "level_keys": sorted(self.level_keys),
        }

    @classmethod
    def from_record(cls, record: dict) -> "PartitionSpec":
        return cls(
            kind=record["kind"],
            buckets=int(record["buckets"]),
            feature_index=int(record.get("feature_index", 0)),
            class_edges={int(c): np.asarray(e, dtype=float) for c, e in record.get("class_edges", {}).items()},
            edges=None if record.get("edges") is None else np.asarray(record["edges"], dtype=float),
            level_keys=frozenset(record.get("level_keys", [])),
        )


def fit(
    kind: str,
    calibration: Sequence[SnapshotExample],
    buckets: int = 10,
    feature_index: int = 0,
) -> PartitionSpec:
    """Fit a partition on the calibration set."""
    if kind not in KINDS:
        raise InvalidInputError(f"unknown partition kind {kind!r}; choose from {KINDS}")
    if not calibration:
        raise InvalidInputError("calibration set is empty")
    if buckets < 1:
        raise InvalidInputError("need at least one bucket")

    if kind == TOP_CLASS:
        preds = np.stack([e.weak_pred.probs for e in calibration])
        classes = np.argmax(preds, axis=1)
        confidences = preds[np.arange(preds.shape[0]), classes]
        class_edges = {
            int(c): _rank_edges(confidences[classes == c], buckets) for c in np.unique(classes)
        }
        return PartitionSpec(kind=kind, buckets=buckets, class_edges=class_edges)

    if kind == FEATURE:
        values = []
        for e in calibration:
            if e.features is None or e.features.size <= feature_index:
                raise InvalidInputError(f"example {e.id} lacks feature {feature_index}")
            values.append(e.features[feature_index])
        edges = _rank_edges(np.asarray(values), buckets)
        return PartitionSpec(kind=kind, buckets=buckets, edges=edges, feature_index=feature_index)

    keys = frozenset(_level_key(e.weak_pred.probs) for e in calibration)
    return PartitionSpec(kind=kind, buckets=len(keys), level_keys=keys)


def assign(spec: PartitionSpec, example) -> str:
    """Deterministic bin id for one example (or any object with ``weak_pred``
    and ``features`` attributes). Values outside the fitted edge range fall
    into the first/last bucket; intervals are half-open [lo, hi)."""
    if spec.kind == TOP_CLASS:
        probs = example.weak_pred.probs
        c = int(np.argmax(probs))
        edges = spec.class_edges.get(c)
        idx = 0 if edges is None or edges.size == 0 else int(np.searchsorted(edges, probs[c], side="right"))
        return f"c{c}:b{idx}"
    if spec.kind == FEATURE:
        feats = example.features
        if feats is None or np.asarray(feats).size <= spec.feature_index:
            raise InvalidInputError(f"example lacks feature {spec.feature_index}")
        value = float(np.asarray(feats, dtype=float)[spec.feature_index])
        idx = 0 if spec.edges is None or spec.edges.size == 0 else int(np.searchsorted(spec.edges, value, side="right"))
        return f"f:b{idx}"
    key = _level_key(example.weak_pred.probs)
    return f"ls:{key}" if key in spec.level_keys else OVERFLOW_BIN


def assign_many(spec: PartitionSpec, examples: Sequence) -> list[str]:
    """Vectorized ``assign`` over a sequence of examples."""
    if spec.kind == TOP_CLASS:
        preds = np.stack([e.weak_pred.probs for e in examples])
        classes = np.argmax(preds, axis=1)
        conf = preds[np.arange(preds.shape[0]), classes]
        out = [""] * len(examples)
        for c in np.unique(classes):
            mask = classes == c
            edges = spec.class_edges.get(int(c))
            if edges is None or edges.size == 0:
                idxs = np.zeros(int(mask.sum()), dtype=int)
            else:
                idxs = np.searchsorted(edges, conf[mask], side="right")
            for where, idx in zip(np.flatnonzero(mask), idxs):
                out[where] = f"c{int(c)}:b{int(idx)}"
        return out
    return [assign(spec, e) for e in examples]


def fitted_bins(spec: PartitionSpec) -> list[str]:
    """Every bin id this partition can produce for in-support inputs."""
    if spec.kind == TOP_CLASS:
        return [
            f"c{c}:b{i}" for c, edges in sorted(spec.class_edges.items()) for i in range(edges.size + 1)
        ]
    if spec.kind == FEATURE:
        n = 1 if spec.edges is None else spec.edges.size + 1
        return [f"f:b{i}" for i in range(n)]
    return sorted(f"ls:{k}" for k in spec.level_keys)


@dataclass(eq=False)
class PartitionQualityReport:
    """Per-bin excess-cost bound: half the mean absolute deviation of the
    reducible loss inside each bin, with snapshot means standing in for the
    exact conditional. Low numbers mean a single per-bin decision is close
    to pointwise-optimal for the predict/route setting."""

    per_bin: dict[str, float]
    counts: dict[str, int]
    aggregate: float
    empty_bins: list[str]


def partition_quality(
    spec: PartitionSpec, data: Sequence[SnapshotExample], loss: LossSpec
) -> PartitionQualityReport:
    if not data:
        raise InvalidInputError("no data to evaluate partition quality")
    means = np.stack([e.snapshot_mean.probs for e in data])
    preds = np.stack([e.weak_pred.probs for e in data])
    reducible = expected_loss_batch(loss, means, preds) - entropy_batch(loss, means)
    bins = assign_many(spec, data)

    grouped: dict[str, list[int]] = {}
    for i, b in enumerate(bins):
        grouped.setdefault(b, []).append(i)

    per_bin: dict[str, float] = {}
    counts: dict[str, int] = {}
    for b, idxs in grouped.items():
        rl = reducible[idxs]
        per_bin[b] = float(0.5 * np.mean(np.abs(rl - rl.mean())))
        counts[b] = len(idxs)

    total = sum(counts.values())
    aggregate = float(sum(per_bin[b] * counts[b] for b in per_bin) / total)
    empty = [b for b in fitted_bins(spec) if b not in grouped]
    return PartitionQualityReport(per_bin=per_bin, counts=counts, aggregate=aggregate, empty_bins=empty)
