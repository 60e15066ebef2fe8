"""The decision layer: simulated per-bin action costs and the argmin rule.

Decisions are functions of a bin's stored mixture, the loss, and the
penalties only, so a fixed calibrated model serves any configuration
without recalibration. Oracles beyond the exact-conditional one are
supported whenever their expected loss is a known function of the true
conditional distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .core import (
    ABSTAIN,
    PREDICT,
    InvalidInputError,
    LabelDistribution,
    RoutingConfig,
    RoutingDecision,
    route_action,
)
from .calibrator import CalibratedRouterModel, estimate_decomposition
from .losses import LossSpec, entropy_batch, expected_loss, expected_loss_batch
from .partition import assign

BAYES = "bayes"
AGGREGATED = "aggregated"
MAJORITY = "majority"
MEAN = "mean"


@lru_cache(maxsize=None)
def _binomial_coefficients(k: int) -> np.ndarray:
    return np.array([math.comb(k, c) for c in range(k + 1)], dtype=float)


@dataclass(frozen=True, eq=False)
class OracleSpec:
    """An oracle whose expected loss at a point is a function of the true
    conditional distribution alone.

    ``bayes`` answers with the exact conditional, so its cost is the loss
    entropy. ``aggregated`` pools ``num_annotators`` independent label draws
    with a fixed rule; its cost is computed exactly for two classes (by
    summing over the binomial label counts) and by seeded Monte Carlo
    otherwise.
    """

    kind: str = BAYES
    num_annotators: int = 1
    aggregation: str = MEAN
    mc_draws: int = 1000
    mc_seed: int = 7

    def __post_init__(self) -> None:
        if self.kind not in (BAYES, AGGREGATED):
            raise InvalidInputError(f"unknown oracle kind {self.kind!r}")
        if self.aggregation not in (MEAN, MAJORITY):
            raise InvalidInputError(f"unknown aggregation {self.aggregation!r}")
        if self.num_annotators < 1:
            raise InvalidInputError("need at least one annotator")

    def point_costs(self, loss: LossSpec, truths: np.ndarray) -> np.ndarray:
        """Expected oracle loss at each row of ``truths``."""
        truths = np.asarray(truths, dtype=float)
        if self.kind == BAYES:
            return entropy_batch(loss, truths)
        if truths.shape[1] == 2:
            return self._binary_aggregated_costs(loss, truths)
        return self._mc_aggregated_costs(loss, truths)

    def mean_cost(self, loss: LossSpec, truths: np.ndarray) -> float:
        return float(np.mean(self.point_costs(loss, truths)))

    def cost(self, loss: LossSpec, truth: LabelDistribution) -> float:
        return float(self.point_costs(loss, truth.probs[None, :])[0])

    def _aggregated_prediction(self, count_positive: int) -> np.ndarray:
        k = self.num_annotators
        if self.aggregation == MEAN:
            return np.array([1.0 - count_positive / k, count_positive / k])
        if 2 * count_positive > k:  # even split goes to the lowest class index
            return np.array([0.0, 1.0])
        return np.array([1.0, 0.0])

    def _binary_aggregated_costs(self, loss: LossSpec, truths: np.ndarray) -> np.ndarray:
        k = self.num_annotators
        coefs = _binomial_coefficients(k)
        p1 = truths[:, 1]
        counts = np.arange(k + 1)
        pmf = coefs * np.power.outer(p1, counts) * np.power.outer(1.0 - p1, k - counts)
        out = np.zeros(truths.shape[0])
        for c in range(k + 1):
            pred = np.tile(self._aggregated_prediction(c), (truths.shape[0], 1))
            out += pmf[:, c] * expected_loss_batch(loss, truths, pred)
        return out

    def _mc_aggregated_costs(self, loss: LossSpec, truths: np.ndarray) -> np.ndarray:
        k, m = self.num_annotators, self.mc_draws
        rng = np.random.default_rng(self.mc_seed)
        out = np.zeros(truths.shape[0])
        for i, truth in enumerate(truths):
            counts = rng.multinomial(k, truth, size=m)
            if self.aggregation == MEAN:
                preds = counts / k
            else:
                preds = np.zeros_like(counts, dtype=float)
                preds[np.arange(m), np.argmax(counts, axis=1)] = 1.0
            out[i] = float(np.mean(expected_loss_batch(loss, np.tile(truth, (m, 1)), preds)))
        return out


def default_oracles(config: RoutingConfig) -> list[OracleSpec]:
    return [OracleSpec(kind=BAYES) for _ in config.route_penalties]


def _check_oracles(config: RoutingConfig, oracles: Sequence[OracleSpec] | None) -> list[OracleSpec]:
    if oracles is None:
        return default_oracles(config)
    if len(oracles) != config.num_oracles:
        raise InvalidInputError(
            f"{len(oracles)} oracles for {config.num_oracles} routing penalties"
        )
    return list(oracles)


def simulated_costs(
    model: CalibratedRouterModel,
    bin_id: str,
    config: RoutingConfig,
    oracles: Sequence[OracleSpec] | None = None,
) -> dict[str, float]:
    """Estimated cost of every action from the bin's stored mixture."""
    oracles = _check_oracles(config, oracles)
    mixture = model.mixture(bin_id)
    irreducible, reducible = estimate_decomposition(model, bin_id, config.loss)
    costs = {PREDICT: irreducible + reducible}
    for i, (oracle, alpha) in enumerate(zip(oracles, config.route_penalties)):
        costs[route_action(i)] = oracle.mean_cost(config.loss, mixture.means) + alpha
    costs[ABSTAIN] = config.abstain_penalty
    return costs


def decide(
    model: CalibratedRouterModel,
    bin_id: str,
    config: RoutingConfig,
    oracles: Sequence[OracleSpec] | None = None,
) -> RoutingDecision:
    """Cost-minimizing action for a bin; constant across the bin's points."""
    return RoutingDecision.from_costs(simulated_costs(model, bin_id, config, oracles))


class Router:
    """Caches one decision per bin for a fixed configuration, making
    per-query routing O(1) after the first point of each bin."""

    def __init__(
        self,
        model: CalibratedRouterModel,
        config: RoutingConfig,
        oracles: Sequence[OracleSpec] | None = None,
    ) -> None:
        self.model = model
        self.config = config
        self.oracles = _check_oracles(config, oracles)
        self._cache: dict[str, RoutingDecision] = {}

    def decide_bin(self, bin_id: str) -> RoutingDecision:
        found = self._cache.get(bin_id)
        if found is None:
            found = decide(self.model, bin_id, self.config, self.oracles)
            self._cache[bin_id] = found
        return found

    def decide(self, example) -> tuple[str, RoutingDecision]:
        bin_id = assign(self.model.partition, example)
        return bin_id, self.decide_bin(bin_id)


def tree_decide(
    irreducible: float, reducible: float, route_penalty: float, abstain_penalty: float
) -> str:
    """Threshold form of the optimal single-oracle decision.

    Route when the reducible loss clears the routing penalty, unless the
    irreducible loss alone makes abstaining cheaper; otherwise predict
    unless the total loss exceeds the abstention penalty.
    """
    for value in (irreducible, reducible, route_penalty):
        if not (math.isfinite(value) and value >= 0):
            raise InvalidInputError("irreducible, reducible and route penalty must be finite and >= 0")
    if math.isnan(abstain_penalty) or abstain_penalty < 0:
        raise InvalidInputError("abstention penalty must be >= 0 (inf allowed)")
    if reducible >= route_penalty:
        if irreducible >= abstain_penalty - route_penalty:
            return ABSTAIN
        return route_action(0)
    if irreducible + reducible >= abstain_penalty:
        return ABSTAIN
    return PREDICT


def true_costs(
    truth: LabelDistribution,
    deployed: LabelDistribution,
    config: RoutingConfig,
    oracles: Sequence[OracleSpec] | None = None,
) -> dict[str, float]:
    """Realized cost of every action when the exact conditional is known."""
    oracles = _check_oracles(config, oracles)
    costs = {PREDICT: expected_loss(config.loss, truth, deployed)}
    for i, (oracle, alpha) in enumerate(zip(oracles, config.route_penalties)):
        costs[route_action(i)] = oracle.cost(config.loss, truth) + alpha
    costs[ABSTAIN] = config.abstain_penalty
    return costs


def pointwise_optimal(
    truth: LabelDistribution,
    weak: LabelDistribution,
    config: RoutingConfig,
    oracles: Sequence[OracleSpec] | None = None,
) -> RoutingDecision:
    """The cost-minimizing action with full knowledge of the conditional."""
    return RoutingDecision.from_costs(true_costs(truth, weak, config, oracles))
