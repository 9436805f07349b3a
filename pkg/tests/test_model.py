import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epibsl import (AggregationFunction, BetaParam, ConstantFunctionError,
                    Instance, ModelError, MonotonicityViolation, PosteriorState,
                    validate_f)
from epibsl.model import Action

betas = st.floats(min_value=0.01, max_value=1000.0,
                  allow_nan=False, allow_infinity=False)


def test_mean_examples():
    assert BetaParam(2, 9).mean() == pytest.approx(2 / 11, abs=1e-15)
    assert BetaParam(450, 550).mean() == pytest.approx(0.45, abs=1e-15)
    assert BetaParam(1, 1).mean() == 0.5


def test_update_examples():
    up = BetaParam(1, 5).update(1)
    assert (up.alpha, up.beta) == (2, 5)
    assert up.mean() == pytest.approx(2 / 7, abs=1e-15)
    up = BetaParam(2, 9).update(1)
    assert up.mean() == pytest.approx(3 / 12, abs=1e-15)
    down = BetaParam(3.5, 0.25).update(0)
    assert (down.alpha, down.beta) == (3.5, 1.25)
    with pytest.raises(ModelError):
        BetaParam(1, 1).update(2)


def test_optimistic_mean_examples():
    assert BetaParam(2.54375, 2.08125).optimistic_mean(1) == pytest.approx(0.63, abs=1e-12)
    assert BetaParam(450, 550).optimistic_mean(1) == pytest.approx(451 / 1001, abs=1e-15)
    p = BetaParam(3, 7)
    assert p.optimistic_mean(0) == p.mean()
    with pytest.raises(ModelError):
        p.optimistic_mean(-1)


def test_pessimistic_mean_examples():
    assert BetaParam(2.54375, 2.08125).pessimistic_mean() == pytest.approx(0.45, abs=5e-3)
    assert BetaParam(2.54375, 2.08125).pessimistic_mean() == pytest.approx(2.54375 / 5.625, abs=1e-15)
    assert BetaParam(1, 1).pessimistic_mean() == pytest.approx(1 / 3, abs=1e-15)
    assert BetaParam(450, 550).pessimistic_mean() == pytest.approx(450 / 1001, abs=1e-15)


def test_rho_examples():
    assert BetaParam(1, 1).rho(0) == pytest.approx(0.5, abs=1e-15)
    assert BetaParam(1, 1).rho(1) == pytest.approx(1 / 6, abs=1e-15)
    assert BetaParam(2, 2).rho(2) == pytest.approx((2 / 4) * (2 / 5) * (2 / 6), abs=1e-15)


@given(alpha=betas, beta=betas)
@settings(max_examples=300)
def test_martingale_identity(alpha, beta):
    p = BetaParam(alpha, beta)
    g = p.mean()
    assert abs(g - (g * p.optimistic_mean(1) + (1 - g) * p.pessimistic_mean())) <= 1e-12


@given(alpha=betas, beta=betas, k=st.integers(min_value=0, max_value=50))
@settings(max_examples=200)
def test_optimistic_strictly_increasing_and_ordering(alpha, beta, k):
    p = BetaParam(alpha, beta)
    assert p.optimistic_mean(k + 1) > p.optimistic_mean(k)
    assert p.pessimistic_mean() < p.mean() < p.optimistic_mean(1)


@given(alpha=betas, beta=betas)
@settings(max_examples=200)
def test_update_matches_hypothetical_means(alpha, beta):
    p = BetaParam(alpha, beta)
    assert p.update(1).mean() == pytest.approx(p.optimistic_mean(1), abs=1e-15)
    assert p.update(0).mean() == pytest.approx(p.pessimistic_mean(), abs=1e-15)


@given(alpha=betas, beta=betas, i=st.integers(min_value=1, max_value=30))
@settings(max_examples=200)
def test_rho_recurrence(alpha, beta, i):
    p = BetaParam(alpha, beta)
    expected = p.rho(i - 1) * alpha / (alpha + beta + i)
    assert p.rho(i) == pytest.approx(expected, rel=1e-12)
    assert p.rho(i) < p.rho(i - 1)


def test_beta_param_rejects_nonpositive():
    for bad in ((0, 1), (1, 0), (-1, 2), (math.inf, 1)):
        with pytest.raises(ModelError):
            BetaParam(*bad)


def test_validate_f_accepts_min_and_general():
    f = AggregationFunction.symmetric_table([0, 0, 1])
    assert f.symmetric and f.table == (0.0, 0.0, 1.0)
    g = AggregationFunction.general_table(2, {"00": 0, "10": 1, "01": 1.2, "11": 1.2})
    assert g.by_index(0b01) == 1.0       # rewards (1, 0)
    assert g.by_index(0b10) == 1.2       # rewards (0, 1)
    assert g.by_index(0b11) == 1.2


def test_validate_f_rejects_constant():
    with pytest.raises(ConstantFunctionError):
        AggregationFunction.symmetric_table([1, 1, 1])


def test_validate_f_names_offending_pair():
    with pytest.raises(MonotonicityViolation) as err:
        AggregationFunction.symmetric_table([0, 2, 1])
    assert "ones=1" in str(err.value) and "ones=2" in str(err.value)
    with pytest.raises(MonotonicityViolation) as err:
        AggregationFunction.general_table(2, {"00": 0, "10": 1, "01": 0.5, "11": 0.8})
    assert "10" in str(err.value) and "11" in str(err.value)


def test_validate_f_normalizes_offset():
    f = AggregationFunction.symmetric_table([1, 2, 3])
    assert f.table == (0.0, 1.0, 2.0)
    assert f.zero_value == 0.0 and f.full_value > 0.0
    # validate_f is idempotent on an already-normalized table
    assert validate_f(f).table == f.table


def test_named_tables():
    assert AggregationFunction.named("min", 3).table == (0.0, 0.0, 0.0, 1.0)
    assert AggregationFunction.named("max", 3).table == (0.0, 1.0, 1.0, 1.0)
    assert AggregationFunction.named("sum", 3).table == (0.0, 1.0, 2.0, 3.0)
    with pytest.raises(ModelError):
        AggregationFunction.named("median", 3)


def test_general_table_requires_all_keys_and_small_m():
    with pytest.raises(ModelError):
        AggregationFunction.general_table(2, {"00": 0, "11": 1})
    with pytest.raises(ModelError):
        AggregationFunction.general_table(13, [0.0] * (1 << 13))


def test_instance_validation():
    f = AggregationFunction.named("min", 2)
    good = BetaParam(2, 2)
    bad = BetaParam(1, 3)
    Instance(good, bad, f, 0.5, 2)
    with pytest.raises(ModelError):
        Instance(bad, good, f, 0.5, 2)          # prior order must not be swapped
    with pytest.raises(ModelError):
        Instance(good, BetaParam(4, 4), f, 0.5, 2)  # equal prior means rejected
    with pytest.raises(ModelError):
        Instance(good, bad, f, 0.0, 2)
    with pytest.raises(ModelError):
        Instance(good, bad, f, 1.5, 2)
    with pytest.raises(ModelError):
        Instance(good, bad, f, 0.5, 3)          # table sized for the wrong m


def test_instance_gap():
    inst = Instance(BetaParam(2, 2), BetaParam(1, 3),
                    AggregationFunction.named("min", 2), 0.5, 2)
    assert inst.prior_gap == pytest.approx(0.25, abs=1e-15)


def test_posterior_state_updates_and_invariants():
    inst = Instance(BetaParam(2, 2), BetaParam(1, 3),
                    AggregationFunction.named("min", 2), 0.5, 2)
    s = inst.initial_state()
    s = s.update(Action.ARM1, 1).update(Action.ARM2, 0).update(Action.ARM1, 0)
    assert s.counts == (2, 1, 1, 0)
    assert s.arm1.alpha == inst.prior1.alpha + s.successes1
    assert s.arm1.beta == inst.prior1.beta + (s.pulls1 - s.successes1)
    assert s.arm2.alpha == inst.prior2.alpha + s.successes2
    assert s.arm2.beta == inst.prior2.beta + (s.pulls2 - s.successes2)
    with pytest.raises(ModelError):
        s.update(Action.SKIP, 0)
    with pytest.raises(ModelError):
        PosteriorState(BetaParam(1, 1), BetaParam(1, 1), pulls1=1, successes1=2)
