"""File formats: snapshot datasets, model files, score tables, reports, manifests.

Datasets are JSONL (one record per example) with a small JSON header
sidecar carrying the class count. Model files are versioned JSON; floats
survive the round trip bit-exactly. Every CLI run records a manifest with
its arguments, seeds, and input hashes so it can be reproduced.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .calibrator import CalibratedRouterModel, TaggedMixture
from .core import InvalidInputError, LabelDistribution, SnapshotExample
from .evaluation import CostSweep, RoutingCurve
from .partition import PartitionSpec

DATASET_FORMAT = "snapshot-dataset"
MODEL_FORMAT = "hoc-router-model"
FORMAT_VERSION = 1

PROB_SUM_TOL = 1e-6


def header_path(dataset_path: str | Path) -> Path:
    return Path(str(dataset_path) + ".header.json")


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------


def write_dataset(
    path: str | Path,
    examples: Sequence[SnapshotExample],
    class_names: Sequence[str] | None = None,
) -> None:
    if not examples:
        raise InvalidInputError("refusing to write an empty dataset")
    num_classes = examples[0].num_classes
    header = {"format": DATASET_FORMAT, "version": FORMAT_VERSION, "num_classes": num_classes}
    if class_names is not None:
        header["class_names"] = list(class_names)
    header_path(path).write_text(json.dumps(header, indent=2) + "\n")
    with open(path, "w") as fh:
        for e in examples:
            record: dict = {
                "id": e.id,
                "weak_probs": e.weak_pred.probs.tolist(),
                "labels": e.labels.tolist(),
            }
            if e.features is not None:
                record["features"] = e.features.tolist()
            if e.p_star is not None:
                record["p_star"] = e.p_star.probs.tolist()
            fh.write(json.dumps(record) + "\n")


def _record_error(lineno: int, field: str, message: str) -> InvalidInputError:
    return InvalidInputError(f"line {lineno}: field {field!r}: {message}")


def _parse_record(record: dict, num_classes: int, lineno: int) -> SnapshotExample:
    if not isinstance(record, dict):
        raise _record_error(lineno, "-", "record is not a JSON object")
    for required in ("id", "weak_probs", "labels"):
        if required not in record:
            raise _record_error(lineno, required, "missing")
    probs = np.asarray(record["weak_probs"], dtype=float)
    if probs.ndim != 1 or probs.size != num_classes:
        raise _record_error(lineno, "weak_probs", f"expected {num_classes} entries")
    total = probs.sum()
    if abs(total - 1.0) > PROB_SUM_TOL:
        raise _record_error(lineno, "weak_probs", f"sums to {total!r}, beyond tolerance {PROB_SUM_TOL}")
    labels = record["labels"]
    if not labels:
        raise _record_error(lineno, "labels", "must be nonempty")
    labels = np.asarray(labels)
    if not np.issubdtype(labels.dtype, np.integer):
        raise _record_error(lineno, "labels", "must be integers")
    if labels.min() < 0 or labels.max() >= num_classes:
        raise _record_error(lineno, "labels", f"class index out of range for {num_classes} classes")
    features = record.get("features")
    p_star = record.get("p_star")
    try:
        return SnapshotExample(
            id=str(record["id"]),
            weak_pred=LabelDistribution(probs),
            labels=labels,
            features=None if features is None else np.asarray(features, dtype=float),
            p_star=None if p_star is None else LabelDistribution(np.asarray(p_star, dtype=float)),
        )
    except InvalidInputError as err:
        raise _record_error(lineno, "record", str(err)) from None


def read_header(path: str | Path) -> dict:
    hp = header_path(path)
    if not hp.exists():
        raise InvalidInputError(f"missing dataset header sidecar {hp}")
    header = json.loads(hp.read_text())
    if header.get("format") != DATASET_FORMAT:
        raise InvalidInputError(f"{hp}: not a {DATASET_FORMAT} header")
    if "num_classes" not in header:
        raise InvalidInputError(f"{hp}: header lacks num_classes")
    return header


def ingest(path: str | Path) -> list[SnapshotExample]:
    """Validated examples in file order; malformed records fail with their
    line number and the offending field."""
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"dataset file {path} does not exist")
    num_classes = int(read_header(path)["num_classes"])
    examples: list[SnapshotExample] = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as err:
                raise _record_error(lineno, "-", f"invalid JSON ({err})") from None
            examples.append(_parse_record(record, num_classes, lineno))
    if not examples:
        raise InvalidInputError(f"dataset file {path} holds no records")
    return examples


@dataclass(frozen=True)
class RouteQuery:
    """A routing-time record: prediction and optional features, no labels."""

    id: str
    weak_pred: LabelDistribution
    features: np.ndarray | None = None


def parse_query(line: str, num_classes: int, lineno: int) -> RouteQuery:
    try:
        record = json.loads(line)
    except json.JSONDecodeError as err:
        raise _record_error(lineno, "-", f"invalid JSON ({err})") from None
    for required in ("id", "weak_probs"):
        if required not in record:
            raise _record_error(lineno, required, "missing")
    probs = np.asarray(record["weak_probs"], dtype=float)
    if probs.ndim != 1 or probs.size != num_classes:
        raise _record_error(lineno, "weak_probs", f"expected {num_classes} entries")
    if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
        raise _record_error(lineno, "weak_probs", f"sums to {probs.sum()!r}, beyond tolerance")
    features = record.get("features")
    return RouteQuery(
        id=str(record["id"]),
        weak_pred=LabelDistribution(probs),
        features=None if features is None else np.asarray(features, dtype=float),
    )


# ---------------------------------------------------------------------------
# Model files
# ---------------------------------------------------------------------------


def _mixture_record(m: TaggedMixture) -> dict:
    return {"preds": m.preds.tolist(), "means": m.means.tolist()}


def _mixture_from_record(record: dict) -> TaggedMixture:
    return TaggedMixture(
        preds=np.asarray(record["preds"], dtype=float),
        means=np.asarray(record["means"], dtype=float),
    )


def save_model(path: str | Path, model: CalibratedRouterModel) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "version": FORMAT_VERSION,
        "num_classes": model.num_classes,
        "recalibrated": model.recalibrated,
        "partition": model.partition.to_record(),
        "bins": {b: _mixture_record(m) for b, m in sorted(model.mixtures.items())},
        "global": _mixture_record(model.global_mixture),
        "centroids": {b: c.probs.tolist() for b, c in sorted(model.centroids.items())},
    }
    Path(path).write_text(json.dumps(payload) + "\n")


def load_model(path: str | Path) -> CalibratedRouterModel:
    path = Path(path)
    if not path.exists():
        raise InvalidInputError(f"model file {path} does not exist")
    payload = json.loads(path.read_text())
    if payload.get("format") != MODEL_FORMAT:
        raise InvalidInputError(f"{path}: not a {MODEL_FORMAT} file")
    if payload.get("version") != FORMAT_VERSION:
        raise InvalidInputError(f"{path}: unsupported version {payload.get('version')}")
    return CalibratedRouterModel(
        partition=PartitionSpec.from_record(payload["partition"]),
        mixtures={b: _mixture_from_record(r) for b, r in payload["bins"].items()},
        global_mixture=_mixture_from_record(payload["global"]),
        recalibrated=bool(payload["recalibrated"]),
        num_classes=int(payload["num_classes"]),
        centroids={b: LabelDistribution(np.asarray(v)) for b, v in payload["centroids"].items()},
    )


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def read_scores_csv(path: str | Path) -> dict[str, float]:
    """External priority scores: a CSV of (id, score) rows, header optional."""
    table: dict[str, float] = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or (row[0] == "id" and not table):
                continue
            if len(row) < 2:
                raise InvalidInputError(f"{path}: score rows need (id, score)")
            table[row[0]] = float(row[1])
    if not table:
        raise InvalidInputError(f"{path}: no score rows")
    return table


def write_curves_csv(path: str | Path, curves: Iterable[RoutingCurve]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["policy", "loss", "fraction", "mean_loss"])
        for curve in curves:
            for q, value in zip(curve.fractions, curve.mean_losses):
                writer.writerow([curve.policy, curve.loss, repr(float(q)), repr(float(value))])


def write_sweep_csv(path: str | Path, sweep: CostSweep) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["alpha", "beta", "policy", "mean_cost"])
        for row in sweep.rows:
            writer.writerow([repr(row.alpha), repr(row.beta), row.policy, repr(row.mean_cost)])


def write_manifest(
    path: str | Path,
    command: str,
    args: dict,
    inputs: Sequence[str | Path] = (),
    outputs: Sequence[str | Path] = (),
    seed: int | None = None,
) -> dict:
    """Record everything needed to reproduce a run: arguments, seed, and
    content hashes of every input file."""
    manifest = {
        "command": command,
        "args": {k: (str(v) if isinstance(v, Path) else v) for k, v in args.items()},
        "seed": seed,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
