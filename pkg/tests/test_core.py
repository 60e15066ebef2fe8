import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hocroute.core import (
    ABSTAIN,
    PREDICT,
    InvalidInputError,
    LabelDistribution,
    RoutingConfig,
    RoutingDecision,
    action_priority,
    ground_truth,
    route_action,
    snapshot_mean,
)
from hocroute.losses import LossSpec

from conftest import make_example, simplex_arrays


class TestLabelDistribution:
    def test_renormalizes_within_tolerance(self):
        d = LabelDistribution([0.5, 0.5000005])
        assert d.probs.sum() == pytest.approx(1.0, abs=1e-12)

    def test_rejects_large_mass_error(self):
        with pytest.raises(InvalidInputError):
            LabelDistribution([0.5, 0.4])

    def test_rejects_negative_and_short(self):
        with pytest.raises(InvalidInputError):
            LabelDistribution([1.2, -0.2])
        with pytest.raises(InvalidInputError):
            LabelDistribution([1.0])

    def test_immutable(self):
        d = LabelDistribution([0.3, 0.7])
        with pytest.raises(ValueError):
            d.probs[0] = 0.9

    @given(simplex_arrays(4))
    def test_invariants_hold_after_construction(self, row):
        d = LabelDistribution(row)
        assert abs(d.probs.sum() - 1.0) <= 1e-9
        assert d.probs.min() >= 0.0 and d.probs.max() <= 1.0 + 1e-12


class TestSnapshotMean:
    def test_symmetric_counts(self):
        assert snapshot_mean([0, 0, 1, 1], 2).probs.tolist() == [0.5, 0.5]

    def test_single_one_hot(self):
        assert snapshot_mean([2], 3).probs.tolist() == [0.0, 0.0, 1.0]

    def test_hand_histogram(self):
        # counts (1, 3) over four draws
        assert snapshot_mean([0, 1, 1, 1], 2).probs.tolist() == [0.25, 0.75]

    def test_empty_rejected(self):
        with pytest.raises(InvalidInputError):
            snapshot_mean([], 2)
        with pytest.raises(InvalidInputError):
            snapshot_mean([3], 3)

    @given(st.lists(st.integers(0, 3), min_size=1, max_size=50), st.randoms())
    def test_permutation_invariant(self, labels, rnd):
        shuffled = list(labels)
        rnd.shuffle(shuffled)
        a = snapshot_mean(labels, 4).probs
        b = snapshot_mean(shuffled, 4).probs
        assert np.array_equal(a, b)

    @given(st.integers(0, 2), st.integers(1, 30))
    def test_constant_labels_give_one_hot(self, c, n):
        mean = snapshot_mean([c] * n, 3).probs
        assert mean[c] == 1.0 and mean.sum() == 1.0


class TestSnapshotExample:
    def test_mean_is_derived_from_labels(self):
        e = make_example("x", [0.6, 0.4], [0, 0, 1])
        assert e.snapshot_mean.probs.tolist() == pytest.approx([2 / 3, 1 / 3])
        assert e.k == 3

    def test_label_validation(self):
        with pytest.raises(InvalidInputError):
            make_example("x", [0.6, 0.4], [0, 2])
        with pytest.raises(InvalidInputError):
            make_example("x", [0.6, 0.4], [])

    def test_ground_truth_prefers_exact(self):
        e = make_example("x", [0.6, 0.4], [0], p_star=[0.9, 0.1])
        assert ground_truth(e).probs.tolist() == [0.9, 0.1]
        e2 = make_example("y", [0.6, 0.4], [0, 1])
        assert ground_truth(e2).probs.tolist() == [0.5, 0.5]


class TestRoutingConfig:
    def test_validates_penalties(self):
        loss = LossSpec("brier")
        with pytest.raises(InvalidInputError):
            RoutingConfig(loss=loss, route_penalties=(-0.1,))
        with pytest.raises(InvalidInputError):
            RoutingConfig(loss=loss, route_penalties=())
        with pytest.raises(InvalidInputError):
            RoutingConfig(loss=loss, route_penalties=(0.1,), abstain_penalty=-1.0)

    def test_infinite_beta_encodes_two_way(self):
        cfg = RoutingConfig(loss=LossSpec("brier"), route_penalties=(0.0, 0.5))
        assert math.isinf(cfg.abstain_penalty)
        assert cfg.actions() == [PREDICT, "route:0", "route:1", ABSTAIN]


class TestRoutingDecision:
    def test_argmin(self):
        d = RoutingDecision.from_costs({PREDICT: 0.3, route_action(0): 0.25, ABSTAIN: 0.3})
        assert d.action == "route:0"

    def test_tie_break_priority(self):
        d = RoutingDecision.from_costs({PREDICT: 0.3, route_action(0): 0.3, ABSTAIN: 0.3})
        assert d.action == PREDICT
        d = RoutingDecision.from_costs({PREDICT: 0.4, route_action(0): 0.3, route_action(1): 0.3, ABSTAIN: 0.3})
        assert d.action == "route:0"
        d = RoutingDecision.from_costs({PREDICT: 0.4, route_action(0): 0.35, ABSTAIN: 0.3})
        assert d.action == ABSTAIN

    def test_action_must_be_priced(self):
        with pytest.raises(InvalidInputError):
            RoutingDecision(action=PREDICT, est_costs={ABSTAIN: 0.1})

    def test_priority_ordering(self):
        assert action_priority(PREDICT) < action_priority(route_action(0))
        assert action_priority(route_action(0)) < action_priority(route_action(3))
        assert action_priority(route_action(3)) < action_priority(ABSTAIN)
        with pytest.raises(InvalidInputError):
            action_priority("punt")
