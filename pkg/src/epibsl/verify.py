"""Property-based and golden-value checkers for the solver and dynamics.

Each suite samples random conforming inputs (enforcing the relevant
preconditions with explicit numeric margins), asserts the predicted solver
behavior, and cross-checks the dynamic program against brute-force policy
enumeration whenever the episode is short enough. Reports collect
violations; non-conforming samples are counted as excluded, never asserted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .model import Action, AggregationFunction, BetaParam, Instance, ModelError, PosteriorState
from .seeding import make_generator
from .dynamics import SimulationRecord
from .metrics import FailureParams, detect_strong_fail, pseudoregret, ugap
from .solver import (SolveResult, enumerate_policies, evaluate_under_posterior,
                     solve_posterior_optimal)

POSTERIOR_MARGIN = 1e-6
COST_MARGIN = 1e-9
VALUE_TOL = 1e-12
ORACLE_TOL = 1e-10
ORACLE_MAX_M = 3
_MAX_ATTEMPT_FACTOR = 1000


@dataclass
class Violation:
    inputs: str
    expected: str
    observed: str


@dataclass
class CheckReport:
    name: str
    trials: int = 0
    violations: list[Violation] = field(default_factory=list)
    excluded: int = 0
    observed: dict[str, float] = field(default_factory=dict)

    @property
    def status(self) -> str:
        return "pass" if not self.violations else "fail"

    def record(self, inputs: str, expected: str, observed: str) -> None:
        self.violations.append(Violation(inputs, expected, observed))


def _log_uniform(rng, lo: float, hi: float) -> float:
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def _sample_beta_param(rng) -> BetaParam:
    return BetaParam(_log_uniform(rng, 0.1, 100.0), _log_uniform(rng, 0.1, 100.0))


def _sample_symmetric_table(rng, m: int) -> AggregationFunction:
    """Sorted non-negative increments; zeros kept with positive probability
    so flat segments (min/max-like shapes) are exercised."""
    while True:
        steps = rng.uniform(0.0, 1.0, size=m)
        steps[rng.random(m) < 0.25] = 0.0
        if steps.sum() > 0:
            break
    table = [0.0]
    for s in steps:
        table.append(table[-1] + float(s))
    return AggregationFunction.symmetric_table(table)


def _sample_cost(rng, hi: float = 1.0, lo_factor: float = 1e-6) -> float:
    return _log_uniform(rng, hi * lo_factor, hi)


def _instance_repr(inst: Instance, extra: str = "") -> str:
    f_desc = ("sym" if inst.f.symmetric else "gen") + str(list(inst.f.table))
    return (f"prior1=({inst.prior1.alpha:.6g},{inst.prior1.beta:.6g}) "
            f"prior2=({inst.prior2.alpha:.6g},{inst.prior2.beta:.6g}) "
            f"m={inst.m} cost={inst.cost:.6g} f={f_desc}{extra}")


def _oracle_disagreement(inst: Instance, state: PosteriorState,
                         result: SolveResult) -> str | None:
    """Compare the dynamic program against exhaustive enumeration (m <= 3).

    Returns a description of the first disagreement, or None. The enumeration
    side must reproduce the optimal value and must rank every arm-2-rooted
    tree strictly below the optimum.
    """
    best = -math.inf
    best_arm2_root = -math.inf
    for tree in enumerate_policies(inst):
        v = evaluate_under_posterior(tree, state, inst)
        if v > best:
            best = v
        if tree.root.action is Action.ARM2 and v > best_arm2_root:
            best_arm2_root = v
    if abs(result.posterior_utility - best) > ORACLE_TOL:
        return (f"dp value {result.posterior_utility!r} != enumeration max {best!r}")
    if not best_arm2_root < best:
        return (f"an arm2-rooted tree attains the enumeration max {best!r}")
    return None


def _run_no_pull_trials(name: str, trials: int, seed: int, sampler) -> CheckReport:
    """Shared driver: sample until ``trials`` conforming instances were checked.

    ``sampler(rng)`` returns (instance, state) for a conforming draw or None.
    """
    report = CheckReport(name=name)
    attempt = 0
    limit = trials * _MAX_ATTEMPT_FACTOR
    while report.trials < trials:
        if attempt >= limit:
            raise ModelError(f"suite {name}: sampler rejected too many draws "
                             f"({attempt} attempts for {report.trials} conforming)")
        rng = make_generator(seed, attempt)
        attempt += 1
        drawn = sampler(rng)
        if drawn is None:
            report.excluded += 1
            continue
        inst, state = drawn
        report.trials += 1
        result = solve_posterior_optimal(state, inst)
        if result.policy.root.action is Action.ARM2:
            report.record(_instance_repr(inst), "root action != arm2", "root arm2")
            continue
        if inst.m <= ORACLE_MAX_M:
            mismatch = _oracle_disagreement(inst, state, result)
            if mismatch is not None:
                report.record(_instance_repr(inst), "dp agrees with enumeration", mismatch)
    return report


def check_no_pull_m2(trials: int, seed: int) -> CheckReport:
    """m = 2, symmetric score: a strongly posterior-bad arm 2 is never the
    root action, for any cost in (0, 1]."""

    def sampler(rng):
        p1 = _sample_beta_param(rng)
        p2 = _sample_beta_param(rng)
        if not p2.optimistic_mean(1) <= p1.mean() - POSTERIOR_MARGIN:
            return None
        f = _sample_symmetric_table(rng, 2)
        inst = Instance(p1, p2, f, _sample_cost(rng), 2)
        return inst, inst.initial_state()

    return _run_no_pull_trials("no_pull_m2", trials, seed, sampler)


def check_no_pull_symmetric_general_m(m: int, trials: int, seed: int) -> CheckReport:
    """Symmetric score, 2 <= m <= 6, cost below the prior threshold."""
    if not 2 <= m <= 6:
        raise ModelError(f"this suite supports 2 <= m <= 6, got {m}")
    from .metrics import cost_threshold

    def sampler(rng):
        p1 = _sample_beta_param(rng)
        p2 = _sample_beta_param(rng)
        if not p2.optimistic_mean(m - 1) < p1.mean() - POSTERIOR_MARGIN:
            return None
        f = _sample_symmetric_table(rng, m)
        probe = Instance(p1, p2, f, 1.0, m)
        hi = min(1.0, cost_threshold(probe, "symmetric") * (1.0 - COST_MARGIN))
        inst = Instance(p1, p2, f, _sample_cost(rng, hi=hi), m)
        return inst, inst.initial_state()

    return _run_no_pull_trials(f"sym_general_m[m={m}]", trials, seed, sampler)


def check_no_pull_min_max(m: int, trials: int, seed: int) -> CheckReport:
    """Min or max score, any cost in (0, 1], strongly posterior-bad arm 2."""
    if not 2 <= m <= 6:
        raise ModelError(f"this suite supports 2 <= m <= 6, got {m}")

    def sampler(rng):
        name = "min" if rng.random() < 0.5 else "max"
        p1 = _sample_beta_param(rng)
        p2 = _sample_beta_param(rng)
        if not p2.optimistic_mean(m - 1) < p1.mean() - POSTERIOR_MARGIN:
            return None
        inst = Instance(p1, p2, AggregationFunction.named(name, m),
                        _sample_cost(rng), m)
        return inst, inst.initial_state()

    return _run_no_pull_trials(f"min_max[m={m}]", trials, seed, sampler)


def check_no_pull_general_f_m2(trials: int, seed: int) -> CheckReport:
    """m = 2, general score, with the two-sided cost condition.

    Conforming draws satisfy: arm 2 optimistically posterior-bad; arm 1's
    one-failure mean separated from arm 2's mean; and cost either below
    g1 * (f(1,1) - f(1,0)) or above f(0,1) - f(1,0), with explicit margins.

    The known worked example violating only the cost condition is registered
    as a precondition-excluded witness whose optimal root IS arm 2.
    """

    def conforming_cost(cost, g1, f11, f10, f01):
        return (cost < g1 * (f11 - f10) - COST_MARGIN
                or cost > f01 - f10 + COST_MARGIN)

    def sampler(rng):
        p1 = _sample_beta_param(rng)
        p2 = _sample_beta_param(rng)
        g1 = p1.mean()
        if not p2.optimistic_mean(1) < g1 - POSTERIOR_MARGIN:
            return None
        if abs(p1.pessimistic_mean() - p2.mean()) <= POSTERIOR_MARGIN:
            return None
        f11 = _log_uniform(rng, 0.1, 5.0)
        f10 = f11 * float(rng.random())
        f01 = f11 * float(rng.random())
        cost = _sample_cost(rng)
        if not conforming_cost(cost, g1, f11, f10, f01):
            return None
        f = AggregationFunction.general_table(2, {"00": 0.0, "10": f10,
                                                  "01": f01, "11": f11})
        inst = Instance(p1, p2, f, cost, 2)
        return inst, inst.initial_state()

    report = _run_no_pull_trials("general_f_m2", trials, seed, sampler)

    # Negative control: drops the cost condition and admits an arm-2 root.
    control = _hard_nonsymmetric_example()
    g1 = control.prior1.mean()
    f11, f10, f01 = (control.f.by_index(0b11), control.f.by_index(0b01),
                     control.f.by_index(0b10))
    if conforming_cost(control.cost, g1, f11, f10, f01):
        report.record(_instance_repr(control),
                      "negative control excluded by the cost condition",
                      "control conforms")
    else:
        report.excluded += 1
        root = solve_posterior_optimal(control.initial_state(), control).policy.root.action
        report.observed["negative_control_root_is_arm2"] = float(root is Action.ARM2)
        if root is not Action.ARM2:
            report.record(_instance_repr(control),
                          "excluded witness keeps arm2 as the optimal root",
                          f"root {root.value}")
    return report


def _hard_nonsymmetric_example() -> Instance:
    """Worked m = 2 example where only the cost condition fails and the
    optimal policy starts with arm 2."""
    return Instance(BetaParam(2.54375, 2.08125), BetaParam(450.0, 550.0),
                    AggregationFunction.general_table(
                        2, {"00": 0.0, "10": 1.0, "01": 1.2, "11": 1.2}),
                    0.13, 2)


def _prior_good_counterexample() -> Instance:
    """Worked m = 2 example where the prior-bad arm is optimal to try first."""
    return Instance(BetaParam(2.0, 9.0), BetaParam(1.0, 5.0),
                    AggregationFunction.named("min", 2), 1e-3, 2)


def reproduce_appendix_g() -> CheckReport:
    """Golden checks on the two worked examples.

    Asserts the exact optimal trees, the named policy utilities, the
    two-success probabilities as given by their defining products, and the
    strict preference for trying the prior-bad arm first.
    """
    report = CheckReport(name="appendix_g")

    def expect(key: str, observed: float, expected: float, tol: float) -> None:
        report.trials += 1
        report.observed[key] = observed
        if not abs(observed - expected) <= tol:
            report.record(key, f"{expected!r} +- {tol:g}", f"{observed!r}")

    def expect_action(key: str, observed: Action, expected: Action) -> None:
        report.trials += 1
        report.observed[key] = float(observed is expected)
        if observed is not expected:
            report.record(key, expected.value, observed.value)

    from .solver import PolicyNode, PolicyTree

    hard = _hard_nonsymmetric_example()
    state = hard.initial_state()
    result = solve_posterior_optimal(state, hard)
    root = result.policy.root
    expect("g2_optimal_utility", result.posterior_utility, 0.6115, 1e-9)
    expect_action("g2_root", root.action, Action.ARM2)
    expect_action("g2_after_zero", root.on_zero.action, Action.ARM1)
    expect_action("g2_after_one", root.on_one.action, Action.SKIP)

    arm1_first = PolicyTree(PolicyNode(Action.ARM1,
                                       PolicyNode(Action.ARM2),
                                       PolicyNode(Action.SKIP)), 2)
    skip_first = PolicyTree(PolicyNode(Action.SKIP,
                                       PolicyNode(Action.ARM1), None), 2)
    expect("g2_arm1_first_utility",
           evaluate_under_posterior(arm1_first, state, hard), 0.6045, 1e-9)
    expect("g2_skip_first_utility",
           evaluate_under_posterior(skip_first, state, hard), 0.53, 1e-9)

    myopic = _prior_good_counterexample()
    state = myopic.initial_state()
    result = solve_posterior_optimal(state, myopic)
    root = result.policy.root
    expect_action("g1_root", root.action, Action.ARM2)
    expect_action("g1_after_one", root.on_one.action, Action.ARM2)
    expect_action("g1_after_zero", root.on_zero.action, Action.SKIP)

    p_arm1 = myopic.prior1.mean() * myopic.prior1.optimistic_mean(1)
    p_arm2 = myopic.prior2.mean() * myopic.prior2.optimistic_mean(1)
    expect("g1_two_success_arm1", p_arm1, 1.0 / 22.0, 1e-12)
    expect("g1_two_success_arm2", p_arm2, (1.0 / 6.0) * (2.0 / 7.0), 1e-12)

    arm2_first = PolicyTree(PolicyNode(Action.ARM2,
                                       PolicyNode(Action.SKIP),
                                       PolicyNode(Action.ARM2)), 2)
    arm1_first = PolicyTree(PolicyNode(Action.ARM1,
                                       PolicyNode(Action.SKIP),
                                       PolicyNode(Action.ARM1)), 2)
    pu2 = evaluate_under_posterior(arm2_first, state, myopic)
    pu1 = evaluate_under_posterior(arm1_first, state, myopic)
    report.trials += 1
    report.observed["g1_preference_margin"] = pu2 - pu1
    if not pu2 > pu1:
        report.record("g1_preference", "arm2-first strictly preferred",
                      f"pu2={pu2!r} <= pu1={pu1!r}")
    cost_component = myopic.cost * (2.0 / 11.0 - 1.0 / 6.0)
    expect("g1_margin_cost_component", (pu2 - pu1) - (p_arm2 - p_arm1),
           cost_component, 1e-12)
    return report


def check_strong_failure_regret(records: Iterable[SimulationRecord],
                                margins: Sequence[float] = (0.05, 0.1, 0.2),
                                budgets: Sequence[int] = (0, 1, 2, 5, 10),
                                ) -> CheckReport:
    """Whenever the strong failure fires, cumulative regret must dominate
    (t - n) times the utility gap at every episode count t."""
    report = CheckReport(name="strong_failure_regret")
    fired = 0
    for record in records:
        report.trials += 1
        rr = None
        gap = None
        for c in margins:
            for n in budgets:
                fp = FailureParams(c, n)
                if not detect_strong_fail(record, fp):
                    continue
                fired += 1
                if rr is None:
                    rr = pseudoregret(record)
                    gap = ugap(record.mu, record.instance)
                t = 1
                for reg in rr.cumulative:
                    lower = (t - n) * gap
                    if reg < lower - VALUE_TOL:
                        report.record(
                            f"seed={record.seed} c={c} n={n} t={t}",
                            f"Reg(t) >= (t - n) * gap = {lower!r}",
                            f"{reg!r}")
                        break
                    t += 1
    report.observed["strong_fail_events"] = float(fired)
    return report
