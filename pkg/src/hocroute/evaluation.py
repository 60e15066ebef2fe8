"""Experiment harness: routing curves, penalty sweeps, multi-loss reports.

Curves are cost-agnostic: they plot mean loss against the fraction of
points routed under a priority ordering, with no penalties added. Sweeps
are cost-aware: they charge the routing and abstention penalties and
compare the three-way policy against its two-way restrictions.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .baselines import (
    RankedPolicy,
    bucket_optimal_scores,
    external_scores,
    pointwise_optimal_scores,
    random_scores,
    total_uncertainty_scores,
)
from .calibrator import CalibratedRouterModel, estimate_decomposition
from .core import (
    ABSTAIN,
    PREDICT,
    InvalidInputError,
    RoutingConfig,
    SnapshotExample,
    UnsupportedLossError,
    ground_truth_matrix,
    weak_pred_matrix,
)
from .losses import LossSpec, entropy_batch, expected_loss_batch
from .partition import assign_many
from .router import OracleSpec, _check_oracles, decide, simulated_costs

HOC_ROUTER = "hoc_router"

THREE_WAY = "three_way"
PREDICT_ROUTE = "predict_route"
PREDICT_ABSTAIN = "predict_abstain"


@dataclass(eq=False)
class RoutingCurve:
    policy: str
    loss: str
    fractions: np.ndarray
    mean_losses: np.ndarray


@dataclass(eq=False)
class SweepRow:
    alpha: float
    beta: float
    policy: str
    mean_cost: float


@dataclass(eq=False)
class CostSweep:
    alpha: float
    betas: np.ndarray
    rows: list[SweepRow]
    # max over bins and betas of est(three-way choice) - min est(two-way
    # choices); argmin over a superset keeps this <= 0 up to float noise
    max_estimated_gap: float

    def mean_costs(self, policy: str) -> np.ndarray:
        return np.array([r.mean_cost for r in self.rows if r.policy == policy])


# ---------------------------------------------------------------------------
# Curves
# ---------------------------------------------------------------------------


def _deployed_matrix(test, model, use_recalibrated, bins=None) -> np.ndarray:
    if model is None or not (model.recalibrated and use_recalibrated):
        return weak_pred_matrix(test)
    return model.deployed_matrix(test, bins=bins)


def per_point_losses(
    test: Sequence[SnapshotExample],
    loss: LossSpec,
    model: CalibratedRouterModel | None = None,
    use_recalibrated: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """(weak loss, oracle loss) per test point against the ground-truth
    source: the exact conditional when attached, the snapshot mean otherwise."""
    truth = ground_truth_matrix(test)
    deployed = _deployed_matrix(test, model, use_recalibrated)
    return expected_loss_batch(loss, truth, deployed), entropy_batch(loss, truth)


def _ordered_prefix(scores, ids, weak_losses, oracle_losses):
    order = np.lexsort((ids, -scores))  # descending score, ties by id
    gains = oracle_losses[order] - weak_losses[order]
    return float(weak_losses.sum()), np.concatenate([[0.0], np.cumsum(gains)])


def curve_values_at(
    scores: np.ndarray,
    ids: np.ndarray,
    weak_losses: np.ndarray,
    oracle_losses: np.ndarray,
    fractions: Sequence[float],
) -> np.ndarray:
    """Mean loss when the top scoring fraction of points is routed."""
    n = len(ids)
    total_weak, prefix = _ordered_prefix(scores, ids, weak_losses, oracle_losses)
    counts = [int(round(q * n)) for q in fractions]
    return np.array([(total_weak + prefix[m]) / n for m in counts])


def _grid_curve(policy, ids, weak_losses, oracle_losses, loss_name, grid_points) -> RoutingCurve:
    n = len(ids)
    total_weak, prefix = _ordered_prefix(policy.scores, ids, weak_losses, oracle_losses)
    steps = grid_points - 1
    fractions = np.arange(grid_points) / steps
    means = np.array([(total_weak + prefix[(i * n) // steps]) / n for i in range(grid_points)])
    return RoutingCurve(policy=policy.name, loss=loss_name, fractions=fractions, mean_losses=means)


def routing_curve(
    policy: RankedPolicy,
    test: Sequence[SnapshotExample],
    loss: LossSpec,
    model: CalibratedRouterModel | None = None,
    use_recalibrated: bool = True,
    grid_points: int = 101,
) -> RoutingCurve:
    """Evaluate a priority ordering on an evenly spaced routed-fraction grid.

    The fraction-0 value is the mean weak-model loss and the fraction-1
    value the mean oracle loss, both over the same ground-truth source.
    """
    if len(policy.scores) != len(test):
        raise InvalidInputError("policy scores do not cover the test set")
    weak_losses, oracle_losses = per_point_losses(test, loss, model, use_recalibrated)
    ids = np.array([e.id for e in test])
    return _grid_curve(policy, ids, weak_losses, oracle_losses, loss.name, grid_points)


def router_scores(
    model: CalibratedRouterModel, test: Sequence[SnapshotExample], loss: LossSpec
) -> RankedPolicy:
    """The calibrated router's ranking: each point scored by the estimated
    reducible loss of its bin."""
    bins = assign_many(model.partition, test)
    cache: dict[str, float] = {}
    for b in bins:
        if b not in cache:
            cache[b] = estimate_decomposition(model, b, loss)[1]
    return RankedPolicy(HOC_ROUTER, np.array([cache[b] for b in bins]))


# ---------------------------------------------------------------------------
# Cost-aware decision evaluation
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class _EvalArrays:
    bins: list[str]
    unique_bins: list[str]
    positions: dict[str, np.ndarray]  # bin id -> indices of its test points
    predict_cost: np.ndarray  # (n,) true loss of the deployed prediction
    oracle_cost: np.ndarray  # (oracles, n) true oracle loss, before penalties


def _eval_arrays(model, test, loss, oracles, use_recalibrated) -> _EvalArrays:
    bins = assign_many(model.partition, test)
    truth = ground_truth_matrix(test)
    deployed = _deployed_matrix(test, model, use_recalibrated, bins=bins)
    predict_cost = expected_loss_batch(loss, truth, deployed)
    oracle_cost = np.stack([o.point_costs(loss, truth) for o in oracles])
    grouped: dict[str, list[int]] = {}
    for i, b in enumerate(bins):
        grouped.setdefault(b, []).append(i)
    positions = {b: np.asarray(idxs) for b, idxs in grouped.items()}
    return _EvalArrays(
        bins=bins,
        unique_bins=sorted(positions),
        positions=positions,
        predict_cost=predict_cost,
        oracle_cost=oracle_cost,
    )


def _realized(arrays: _EvalArrays, action_by_bin: dict[str, str], config: RoutingConfig) -> np.ndarray:
    """Per-point realized cost of a per-bin action map, charged at the true
    penalties of ``config``."""
    out = np.empty(arrays.predict_cost.shape[0])
    for b, idxs in arrays.positions.items():
        action = action_by_bin[b]
        if action == PREDICT:
            out[idxs] = arrays.predict_cost[idxs]
        elif action == ABSTAIN:
            out[idxs] = config.abstain_penalty
        else:
            i = int(action.split(":", 1)[1])
            out[idxs] = arrays.oracle_cost[i][idxs] + config.route_penalties[i]
    return out


def _decide_bins(model, unique_bins, config, oracles) -> dict[str, str]:
    return {b: decide(model, b, config, oracles).action for b in unique_bins}


def policy_point_costs(
    model: CalibratedRouterModel,
    test: Sequence[SnapshotExample],
    config: RoutingConfig,
    oracles: Sequence[OracleSpec] | None = None,
    decide_config: RoutingConfig | None = None,
    use_recalibrated: bool = True,
) -> np.ndarray:
    """Realized per-point cost of the calibrated per-bin policy.

    Decisions are made under ``decide_config`` (defaults to ``config``);
    realized costs always charge the true penalties of ``config``. Passing a
    restricted ``decide_config`` (some penalties infinite) evaluates the
    two-way policies.
    """
    oracles = _check_oracles(config, oracles)
    arrays = _eval_arrays(model, test, config.loss, oracles, use_recalibrated)
    actions = _decide_bins(model, arrays.unique_bins, decide_config or config, oracles)
    return _realized(arrays, actions, config)


def bucket_optimal_point_costs(
    model: CalibratedRouterModel,
    test: Sequence[SnapshotExample],
    config: RoutingConfig,
    oracles: Sequence[OracleSpec] | None = None,
    use_recalibrated: bool = True,
) -> np.ndarray:
    """Realized per-point cost of the best constant action per bin, measured
    on the test set itself (oracle baseline)."""
    oracles = _check_oracles(config, oracles)
    arrays = _eval_arrays(model, test, config.loss, oracles, use_recalibrated)
    actions: dict[str, str] = {}
    for b, idxs in arrays.positions.items():
        costs = {PREDICT: float(arrays.predict_cost[idxs].mean()), ABSTAIN: config.abstain_penalty}
        for i, alpha in enumerate(config.route_penalties):
            costs[f"route:{i}"] = float(arrays.oracle_cost[i][idxs].mean()) + alpha
        actions[b] = min(costs, key=costs.get)
    return _realized(arrays, actions, config)


def cost_sweep(
    model: CalibratedRouterModel,
    test: Sequence[SnapshotExample],
    loss: LossSpec,
    alpha: float,
    betas: Sequence[float],
    oracles: Sequence[OracleSpec] | None = None,
    use_recalibrated: bool = True,
) -> CostSweep:
    """Sweep the abstention penalty at a fixed routing penalty, comparing the
    three-way policy against predict/route and predict/abstain."""
    betas = np.asarray(list(betas), dtype=float)
    if betas.size == 0:
        raise InvalidInputError("empty beta grid")
    probe = RoutingConfig(loss=loss, route_penalties=(alpha,), abstain_penalty=float(betas[0]))
    oracles = _check_oracles(probe, oracles)
    arrays = _eval_arrays(model, test, loss, oracles, use_recalibrated)

    rows: list[SweepRow] = []
    max_gap = -math.inf
    for beta in betas:
        true_cfg = RoutingConfig(loss=loss, route_penalties=(alpha,), abstain_penalty=float(beta))
        pr_cfg = RoutingConfig(loss=loss, route_penalties=(alpha,), abstain_penalty=math.inf)
        pa_cfg = RoutingConfig(loss=loss, route_penalties=(math.inf,), abstain_penalty=float(beta))
        chosen = {
            THREE_WAY: _decide_bins(model, arrays.unique_bins, true_cfg, oracles),
            PREDICT_ROUTE: _decide_bins(model, arrays.unique_bins, pr_cfg, oracles),
            PREDICT_ABSTAIN: _decide_bins(model, arrays.unique_bins, pa_cfg, oracles),
        }
        for b in arrays.unique_bins:
            est = simulated_costs(model, b, true_cfg, oracles)
            gap = est[chosen[THREE_WAY][b]] - min(est[chosen[PREDICT_ROUTE][b]], est[chosen[PREDICT_ABSTAIN][b]])
            max_gap = max(max_gap, gap)
        for policy, actions in chosen.items():
            mean_cost = float(_realized(arrays, actions, true_cfg).mean())
            rows.append(SweepRow(alpha=alpha, beta=float(beta), policy=policy, mean_cost=mean_cost))
    return CostSweep(alpha=alpha, betas=betas, rows=rows, max_estimated_gap=float(max_gap))


# ---------------------------------------------------------------------------
# Multi-loss reports
# ---------------------------------------------------------------------------


def multi_loss_report(
    model: CalibratedRouterModel,
    test: Sequence[SnapshotExample],
    losses: Sequence[LossSpec],
    external: dict[str, dict[str, float]] | None = None,
    random_seed: int | None = None,
    use_recalibrated: bool = True,
) -> dict[str, list[RoutingCurve]]:
    """Routing curves for every requested loss from one calibrated model.

    Calibration happens zero times here: every loss is served by the same
    stored mixtures. Losses that do not support the data's class count are
    skipped with a warning.
    """
    report: dict[str, list[RoutingCurve]] = {}
    ids = np.array([e.id for e in test])
    for loss in losses:
        try:
            policies = [
                router_scores(model, test, loss),
                total_uncertainty_scores(test, loss, model, use_recalibrated),
                bucket_optimal_scores(test, loss, model, use_recalibrated=use_recalibrated),
                pointwise_optimal_scores(test, loss, model, use_recalibrated=use_recalibrated),
            ]
        except UnsupportedLossError as err:
            warnings.warn(f"skipping {loss.name}: {err}", stacklevel=2)
            continue
        if random_seed is not None:
            policies.append(random_scores(test, seed=random_seed))
        for name, table in (external or {}).items():
            policies.append(external_scores(test, table, name=name))
        weak_losses, oracle_losses = per_point_losses(test, loss, model, use_recalibrated)
        report[loss.name] = [
            _grid_curve(p, ids, weak_losses, oracle_losses, loss.name, 101) for p in policies
        ]
    return report
