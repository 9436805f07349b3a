import pytest

from epibsl import (Action, AggregationFunction, BetaParam, EpisodeRecord,
                    Instance, PolicyNode, PolicyTree, PosteriorState,
                    SamplingMode, SimulationRecord)


@pytest.fixture
def hard_general_instance():
    """m=2 non-symmetric instance whose optimum starts with the prior-bad arm."""
    f = AggregationFunction.general_table(
        2, {"00": 0.0, "10": 1.0, "01": 1.2, "11": 1.2})
    return Instance(BetaParam(2.54375, 2.08125), BetaParam(450.0, 550.0), f, 0.13, 2)


@pytest.fixture
def myopic_min_instance():
    """m=2 min-score instance where trying the prior-bad arm first is optimal."""
    return Instance(BetaParam(2.0, 9.0), BetaParam(1.0, 5.0),
                    AggregationFunction.named("min", 2), 1e-3, 2)


@pytest.fixture
def small_min_instance():
    return Instance(BetaParam(2.0, 2.0), BetaParam(1.0, 3.0),
                    AggregationFunction.named("min", 2), 0.001, 2)


def leaf(action):
    return PolicyNode(action)


def arm_node(action, on_zero, on_one):
    return PolicyNode(action, on_zero, on_one)


def make_record(inst, mu, policies=(), pulls1=0, pulls2=0,
                successes1=0, successes2=0):
    """Record stub for metric tests: counts and per-episode policies only."""
    arm1 = BetaParam(inst.prior1.alpha + successes1,
                     inst.prior1.beta + pulls1 - successes1)
    arm2 = BetaParam(inst.prior2.alpha + successes2,
                     inst.prior2.beta + pulls2 - successes2)
    state = PosteriorState(arm1, arm2, pulls1, pulls2, successes1, successes2)
    episodes = [EpisodeRecord(policy=p, actions=(), rewards=(),
                              cost_paid=0.0, utility=0.0) for p in policies]
    return SimulationRecord(instance=inst, mode=SamplingMode.MU_FIRST, seed=0,
                            episodes_requested=len(episodes), mu=mu,
                            episodes=episodes, posteriors=[state])
