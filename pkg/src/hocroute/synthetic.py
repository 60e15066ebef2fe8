"""Synthetic binary environments with controllable irreducible noise.

Inputs are standard-normal scalars; labels are Bernoulli draws from one of
three closed-form conditional-probability curves. The weak predictor is a
binned-frequency estimator: cheap, imperfect, and miscalibrated in places,
which is the regime routing is meant to help with.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import InvalidInputError, LabelDistribution, SnapshotExample
from .partition import _rank_edges

SINUSOIDAL = "sinusoidal"
THREE_STEPS = "three_steps"
PIECEWISE = "piecewise"
KINDS = (SINUSOIDAL, THREE_STEPS, PIECEWISE)


def _sinusoidal(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    w = 0.2 * np.logaddexp(0.0, (ax - 1.0) / 0.2)
    v = np.sign(x) * (120.0 * ax - 112.0 * w - 0.0635)
    u = 0.6 * np.cos(v) + 0.4 * np.cos(4.2 * x)
    return (0.98 * u + 1.0) / 2.0


def _three_steps(x: np.ndarray) -> np.ndarray:
    mid = np.sin(100.0 * x) / 2.0 + 0.5
    return np.where(x <= -1.0, 0.0, np.where(x >= 1.0, 1.0, mid))


def _piecewise(x: np.ndarray) -> np.ndarray:
    quarter_wave = np.sin(100.0 * x) / 4.0
    out = np.where(x <= -1.0, 0.5, quarter_wave + 0.5)
    out = np.where((x > -0.5) & (x <= 0.0), 0.25, out)
    out = np.where(x > 0.5, quarter_wave + 0.25, out)
    return out


_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    SINUSOIDAL: _sinusoidal,
    THREE_STEPS: _three_steps,
    PIECEWISE: _piecewise,
}


def eval_ground_truth(kind: str, x) -> np.ndarray | float:
    """Exact conditional probability of the positive class at ``x``."""
    if kind not in _FUNCTIONS:
        raise InvalidInputError(f"unknown ground-truth kind {kind!r}; choose from {KINDS}")
    arr = np.asarray(x, dtype=float)
    out = _FUNCTIONS[kind](arr)
    return float(out) if np.isscalar(x) or arr.ndim == 0 else out


@dataclass(eq=False)
class BinnedFrequencyPredictor:
    """Equal-mass 1-D histogram classifier with add-one smoothing.

    Stands in for a trained model: per cell it predicts the smoothed
    positive-label frequency, clamped away from 0 and 1.
    """

    edges: np.ndarray
    positive_rate: np.ndarray

    def predict_proba(self, x) -> np.ndarray:
        arr = np.atleast_1d(np.asarray(x, dtype=float))
        idx = np.searchsorted(self.edges, arr, side="right")
        p1 = self.positive_rate[idx]
        return np.column_stack([1.0 - p1, p1])

    def predict(self, x: float) -> LabelDistribution:
        return LabelDistribution(self.predict_proba(x)[0])


def fit_weak_predictor(
    train_x: np.ndarray, train_y: np.ndarray, bins: int = 50
) -> BinnedFrequencyPredictor:
    """Fit the binned-frequency estimator on (x, y) pairs with y in {0, 1}."""
    x = np.asarray(train_x, dtype=float)
    y = np.asarray(train_y)
    if x.size == 0 or x.shape != y.shape:
        raise InvalidInputError("need matching nonempty train_x / train_y")
    if not np.isin(y, (0, 1)).all():
        raise InvalidInputError("weak predictor supports binary labels only")
    edges = _rank_edges(x, bins)
    idx = np.searchsorted(edges, x, side="right")
    cells = edges.size + 1
    totals = np.bincount(idx, minlength=cells)
    positives = np.bincount(idx, weights=y.astype(float), minlength=cells)
    rate = (positives + 1.0) / (totals + 2.0)
    return BinnedFrequencyPredictor(edges=edges, positive_rate=np.clip(rate, 0.01, 0.99))


@dataclass(eq=False)
class SyntheticDataset:
    kind: str
    seed: int
    train_x: np.ndarray
    train_y: np.ndarray
    calibration: list[SnapshotExample]
    test: list[SnapshotExample]
    weak_model: BinnedFrequencyPredictor


def _build_examples(
    prefix: str,
    x: np.ndarray,
    labels: np.ndarray,
    weak: BinnedFrequencyPredictor,
    p_star: np.ndarray | None,
) -> list[SnapshotExample]:
    probs = weak.predict_proba(x)
    out = []
    for i in range(x.size):
        truth = None if p_star is None else LabelDistribution([1.0 - p_star[i], p_star[i]])
        out.append(
            SnapshotExample(
                id=f"{prefix}-{i:06d}",
                weak_pred=LabelDistribution(probs[i]),
                labels=labels[i],
                features=np.array([x[i]]),
                p_star=truth,
            )
        )
    return out


def generate(
    kind: str,
    sizes: tuple[int, int, int] = (10_000, 5_000, 100_000),
    k: int = 100,
    seed: int = 0,
    weak_bins: int = 50,
) -> SyntheticDataset:
    """Reproducible train / k-snapshot calibration / test split.

    The three splits draw from independently spawned RNG streams of the root
    seed, so resizing one split never perturbs the others. Test examples
    carry the exact conditional distribution.
    """
    n_train, n_cal, n_test = sizes
    if min(n_train, n_cal, n_test) < 1 or k < 1:
        raise InvalidInputError("split sizes and k must be >= 1")
    root = np.random.SeedSequence(seed)
    rng_train, rng_cal, rng_test = (np.random.default_rng(s) for s in root.spawn(3))

    train_x = rng_train.standard_normal(n_train)
    train_p = eval_ground_truth(kind, train_x)
    train_y = (rng_train.random(n_train) < train_p).astype(np.int32)
    weak = fit_weak_predictor(train_x, train_y, bins=weak_bins)

    cal_x = rng_cal.standard_normal(n_cal)
    cal_labels = (rng_cal.random((n_cal, k)) < eval_ground_truth(kind, cal_x)[:, None]).astype(np.int32)
    calibration = _build_examples("cal", cal_x, cal_labels, weak, p_star=None)

    test_x = rng_test.standard_normal(n_test)
    test_p = eval_ground_truth(kind, test_x)
    test_labels = (rng_test.random((n_test, k)) < test_p[:, None]).astype(np.int32)
    test = _build_examples("test", test_x, test_labels, weak, p_star=test_p)

    return SyntheticDataset(
        kind=kind,
        seed=seed,
        train_x=train_x,
        train_y=train_y,
        calibration=calibration,
        test=test,
        weak_model=weak,
    )
