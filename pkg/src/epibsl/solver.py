"""Exact per-episode policies by finite-horizon backward induction.

A per-episode policy is a deterministic depth-m decision tree: each node
holds an action, arm nodes branch on the observed reward, skip nodes have a
single reward-0 continuation. This module computes the posterior-optimal
tree for a given joint posterior, evaluates arbitrary trees either under
sequential posterior updating or under a fixed mean-reward vector, solves
the known-mean control problem over a restricted action set, and enumerates
all trees as a brute-force oracle.

Tie-breaking everywhere: when action values agree to within ``TIE_EPS`` the
solver prefers skip, then arm 1, then arm 2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple

from .model import ALL_ACTIONS, Action, Instance, ModelError, PosteriorState

TIE_EPS = 1e-12
ACTION_ORDER = (Action.SKIP, Action.ARM1, Action.ARM2)
ENUMERATION_MAX_M = 4


class PolicyShapeError(ModelError):
    """A policy tree whose leaves do not all sit at depth m."""


@dataclass(frozen=True)
class PolicyNode:
    """One decision: an action plus continuations indexed by observed reward.

    Arm nodes use both children; skip nodes observe reward 0 deterministically,
    so only ``on_zero`` is reachable (``on_one`` is permitted but ignored).
    Children are ``None`` exactly at the last round of the episode.
    """

    action: Action
    on_zero: "PolicyNode | None" = None
    on_one: "PolicyNode | None" = None


@dataclass(frozen=True)
class PolicyTree:
    root: PolicyNode
    m: int


@dataclass(frozen=True)
class SolveResult:
    policy: PolicyTree
    posterior_utility: float


class KnownMuSolution(NamedTuple):
    value: float
    policy: PolicyTree


def _child(node: PolicyNode, reward: int) -> PolicyNode | None:
    return node.on_one if reward else node.on_zero


def solve_posterior_optimal(state: PosteriorState, inst: Instance) -> SolveResult:
    """Backward-induction optimum of expected score minus cost, given ``state``.

    The expectation treats rewards as sequential posterior draws: pulling an
    arm updates that arm's within-episode posterior before the next round.
    For symmetric scores the dynamic program is keyed by per-arm pull/success
    counts; for general scores it additionally tracks the reward prefix.
    """
    m, cost, f = inst.m, inst.cost, inst.f
    a1, b1 = state.arm1.alpha, state.arm1.beta
    a2, b2 = state.arm2.alpha, state.arm2.beta
    table = f.table
    memo: dict = {}
    nodes: dict = {}

    if f.symmetric:

        def value(j, p1, s1, p2, s2):
            if j == m:
                return table[s1 + s2]
            return choose(j, p1, s1, p2, s2)[1]

        def choose(j, p1, s1, p2, s2):
            key = (j, p1, s1, p2, s2)
            hit = memo.get(key)
            if hit is not None:
                return hit
            best_a = Action.SKIP
            best_v = value(j + 1, p1, s1, p2, s2)
            g1 = (a1 + s1) / (a1 + b1 + p1)
            v = -cost + g1 * value(j + 1, p1 + 1, s1 + 1, p2, s2) \
                + (1.0 - g1) * value(j + 1, p1 + 1, s1, p2, s2)
            if v > best_v + TIE_EPS:
                best_a, best_v = Action.ARM1, v
            g2 = (a2 + s2) / (a2 + b2 + p2)
            v = -cost + g2 * value(j + 1, p1, s1, p2 + 1, s2 + 1) \
                + (1.0 - g2) * value(j + 1, p1, s1, p2 + 1, s2)
            if v > best_v + TIE_EPS:
                best_a, best_v = Action.ARM2, v
            memo[key] = (best_a, best_v)
            return memo[key]

        def build(j, p1, s1, p2, s2):
            if j == m:
                return None
            key = (j, p1, s1, p2, s2)
            node = nodes.get(key)
            if node is not None:
                return node
            action = choose(j, p1, s1, p2, s2)[0]
            if action is Action.SKIP:
                node = PolicyNode(action, build(j + 1, p1, s1, p2, s2), None)
            elif action is Action.ARM1:
                node = PolicyNode(action,
                                  build(j + 1, p1 + 1, s1, p2, s2),
                                  build(j + 1, p1 + 1, s1 + 1, p2, s2))
            else:
                node = PolicyNode(action,
                                  build(j + 1, p1, s1, p2 + 1, s2),
                                  build(j + 1, p1, s1, p2 + 1, s2 + 1))
            nodes[key] = node
            return node

        root = build(0, 0, 0, 0, 0)
        utility = choose(0, 0, 0, 0, 0)[1]
        return SolveResult(PolicyTree(root, m), utility)

    # General table: key on the reward prefix; arm-2 successes follow from it.

    def gvalue(j, prefix, p1, s1, p2):
        if j == m:
            return table[prefix]
        return gchoose(j, prefix, p1, s1, p2)[1]

    def gchoose(j, prefix, p1, s1, p2):
        key = (j, prefix, p1, s1, p2)
        hit = memo.get(key)
        if hit is not None:
            return hit
        bit = 1 << j
        best_a = Action.SKIP
        best_v = gvalue(j + 1, prefix, p1, s1, p2)
        g1 = (a1 + s1) / (a1 + b1 + p1)
        v = -cost + g1 * gvalue(j + 1, prefix | bit, p1 + 1, s1 + 1, p2) \
            + (1.0 - g1) * gvalue(j + 1, prefix, p1 + 1, s1, p2)
        if v > best_v + TIE_EPS:
            best_a, best_v = Action.ARM1, v
        s2 = prefix.bit_count() - s1
        g2 = (a2 + s2) / (a2 + b2 + p2)
        v = -cost + g2 * gvalue(j + 1, prefix | bit, p1, s1, p2 + 1) \
            + (1.0 - g2) * gvalue(j + 1, prefix, p1, s1, p2 + 1)
        if v > best_v + TIE_EPS:
            best_a, best_v = Action.ARM2, v
        memo[key] = (best_a, best_v)
        return memo[key]

    def gbuild(j, prefix, p1, s1, p2):
        if j == m:
            return None
        key = (j, prefix, p1, s1, p2)
        node = nodes.get(key)
        if node is not None:
            return node
        action = gchoose(j, prefix, p1, s1, p2)[0]
        bit = 1 << j
        if action is Action.SKIP:
            node = PolicyNode(action, gbuild(j + 1, prefix, p1, s1, p2), None)
        elif action is Action.ARM1:
            node = PolicyNode(action,
                              gbuild(j + 1, prefix, p1 + 1, s1, p2),
                              gbuild(j + 1, prefix | bit, p1 + 1, s1 + 1, p2))
        else:
            node = PolicyNode(action,
                              gbuild(j + 1, prefix, p1, s1, p2 + 1),
                              gbuild(j + 1, prefix | bit, p1, s1, p2 + 1))
        nodes[key] = node
        return node

    root = gbuild(0, 0, 0, 0, 0)
    utility = gchoose(0, 0, 0, 0, 0)[1]
    return SolveResult(PolicyTree(root, m), utility)


def evaluate_under_posterior(policy: PolicyTree, state: PosteriorState,
                             inst: Instance) -> float:
    """Exact expected utility of ``policy`` under sequential posterior draws."""
    m, cost, f = inst.m, inst.cost, inst.f
    if policy.m != m:
        raise PolicyShapeError(f"policy depth {policy.m} != episode length {m}")
    a1, b1 = state.arm1.alpha, state.arm1.beta
    a2, b2 = state.arm2.alpha, state.arm2.beta
    table = f.table

    def descend(node, reward, j, prefix, p1, s1, p2, s2):
        nxt = _child(node, reward)
        if reward:
            prefix |= 1 << j
        if j + 1 == m:
            if nxt is not None:
                raise PolicyShapeError("policy deeper than the episode length")
            return table[s1 + s2] if f.symmetric else table[prefix]
        if nxt is None:
            raise PolicyShapeError("policy shallower than the episode length")
        return walk(nxt, j + 1, prefix, p1, s1, p2, s2)

    def walk(node, j, prefix, p1, s1, p2, s2):
        action = node.action
        if action is Action.SKIP:
            return descend(node, 0, j, prefix, p1, s1, p2, s2)
        if action is Action.ARM1:
            g = (a1 + s1) / (a1 + b1 + p1)
            return -cost + g * descend(node, 1, j, prefix, p1 + 1, s1 + 1, p2, s2) \
                + (1.0 - g) * descend(node, 0, j, prefix, p1 + 1, s1, p2, s2)
        g = (a2 + s2) / (a2 + b2 + p2)
        return -cost + g * descend(node, 1, j, prefix, p1, s1, p2 + 1, s2 + 1) \
            + (1.0 - g) * descend(node, 0, j, prefix, p1, s1, p2 + 1, s2)

    return walk(policy.root, 0, 0, 0, 0, 0, 0)


def evaluate_under_truth(policy: PolicyTree, mu: tuple[float, float],
                         inst: Instance) -> float:
    """Expected utility of ``policy`` when rewards are Bernoulli(mu) i.i.d.

    No posterior updating: each pull of arm i succeeds with probability
    ``mu[i-1]`` independent of history.
    """
    mu1, mu2 = mu
    for label, v in (("mu1", mu1), ("mu2", mu2)):
        if not 0.0 <= v <= 1.0:
            raise ModelError(f"{label} must lie in [0, 1], got {v!r}")
    m, cost, f = inst.m, inst.cost, inst.f
    if policy.m != m:
        raise PolicyShapeError(f"policy depth {policy.m} != episode length {m}")
    table = f.table

    def descend(node, reward, j, acc):
        nxt = _child(node, reward)
        acc = acc + reward if f.symmetric else (acc | reward << j)
        if j + 1 == m:
            if nxt is not None:
                raise PolicyShapeError("policy deeper than the episode length")
            return table[acc]
        if nxt is None:
            raise PolicyShapeError("policy shallower than the episode length")
        return walk(nxt, j + 1, acc)

    def walk(node, j, acc):
        action = node.action
        if action is Action.SKIP:
            return descend(node, 0, j, acc)
        p = mu1 if action is Action.ARM1 else mu2
        return -cost + p * descend(node, 1, j, acc) \
            + (1.0 - p) * descend(node, 0, j, acc)

    return walk(policy.root, 0, 0)


def solve_known_mu(mu: tuple[float, float], inst: Instance,
                   allowed: Iterable[Action] | None = None) -> KnownMuSolution:
    """Optimal value and tree when mean rewards are known exactly.

    Rewards are Bernoulli(mu) i.i.d. given the means, so the program is keyed
    only by (round, reward prefix). ``allowed`` restricts the action set and
    must contain skip; the default allows all three actions.
    """
    mu1, mu2 = mu
    for label, v in (("mu1", mu1), ("mu2", mu2)):
        if not 0.0 <= v <= 1.0:
            raise ModelError(f"{label} must lie in [0, 1], got {v!r}")
    acts = ALL_ACTIONS if allowed is None else frozenset(allowed)
    if Action.SKIP not in acts:
        raise ModelError("the allowed action set must contain skip")
    if not acts <= ALL_ACTIONS:
        raise ModelError(f"unknown actions in allowed set: {acts - ALL_ACTIONS}")
    m, cost, f = inst.m, inst.cost, inst.f
    table = f.table
    prob = {Action.ARM1: mu1, Action.ARM2: mu2}
    memo: dict = {}
    nodes: dict = {}

    def bump(acc, reward, j):
        if not reward:
            return acc
        return acc + 1 if f.symmetric else acc | 1 << j

    def value(j, acc):
        if j == m:
            return table[acc]
        return choose(j, acc)[1]

    def choose(j, acc):
        key = (j, acc)
        hit = memo.get(key)
        if hit is not None:
            return hit
        best_a = Action.SKIP
        best_v = value(j + 1, acc)
        for action in (Action.ARM1, Action.ARM2):
            if action not in acts:
                continue
            p = prob[action]
            v = -cost + p * value(j + 1, bump(acc, 1, j)) \
                + (1.0 - p) * value(j + 1, acc)
            if v > best_v + TIE_EPS:
                best_a, best_v = action, v
        memo[key] = (best_a, best_v)
        return memo[key]

    def build(j, acc):
        if j == m:
            return None
        key = (j, acc)
        node = nodes.get(key)
        if node is not None:
            return node
        action = choose(j, acc)[0]
        if action is Action.SKIP:
            node = PolicyNode(action, build(j + 1, acc), None)
        else:
            node = PolicyNode(action, build(j + 1, acc),
                              build(j + 1, bump(acc, 1, j)))
        nodes[key] = node
        return node

    root = build(0, 0)
    return KnownMuSolution(choose(0, 0)[1], PolicyTree(root, m))


def considers(policy: PolicyTree, arm: Action) -> bool:
    """True iff some positive-probability path of ``policy`` plays ``arm``.

    Both children of an arm node are reachable (posterior means are strictly
    inside (0, 1)); only the reward-0 child of a skip node is.
    """
    if arm not in (Action.ARM1, Action.ARM2):
        raise ModelError(f"considers is defined for arm actions, got {arm!r}")
    stack = [policy.root]
    seen: set[int] = set()
    while stack:
        node = stack.pop()
        if node is None or id(node) in seen:
            continue
        seen.add(id(node))
        if node.action is arm:
            return True
        stack.append(node.on_zero)
        if node.action is not Action.SKIP:
            stack.append(node.on_one)
    return False


def enumerate_policies(inst: Instance) -> Iterator[PolicyTree]:
    """Yield every deterministic depth-m policy tree exactly once.

    Counts satisfy N(1) = 3 and N(d) = N(d-1) + 2 N(d-1)^2; enumeration is
    limited to m <= 4.
    """
    m = inst.m
    if m > ENUMERATION_MAX_M:
        raise ModelError(f"policy enumeration supports m <= {ENUMERATION_MAX_M}, got {m}")
    for root in _enumerate_roots(m):
        yield PolicyTree(root, m)


def _subtrees(depth: int) -> list[PolicyNode]:
    if depth == 0:
        return [None]
    subs = _subtrees(depth - 1)
    out = [PolicyNode(Action.SKIP, z, None) for z in subs]
    for action in (Action.ARM1, Action.ARM2):
        out.extend(PolicyNode(action, z, o) for z in subs for o in subs)
    return out


def _enumerate_roots(m: int) -> Iterator[PolicyNode]:
    subs = _subtrees(m - 1)
    for z in subs:
        yield PolicyNode(Action.SKIP, z, None)
    for action in (Action.ARM1, Action.ARM2):
        for z in subs:
            for o in subs:
                yield PolicyNode(action, z, o)


def all_skip_policy(m: int) -> PolicyTree:
    node = None
    for _ in range(m):
        node = PolicyNode(Action.SKIP, node, None)
    return PolicyTree(node, m)


def format_policy(tree: PolicyTree, indent: str = "  ") -> str:
    """Readable multi-line rendering of a policy tree."""
    lines: list[str] = []

    def emit(node, j, pad, label):
        lines.append(f"{pad}{label}round {j}: {node.action.value}")
        if node.on_zero is None and node.on_one is None:
            return
        if node.action is Action.SKIP:
            emit(node.on_zero, j + 1, pad + indent, "")
        else:
            emit(node.on_zero, j + 1, pad + indent, "r=0 -> ")
            emit(node.on_one, j + 1, pad + indent, "r=1 -> ")

    emit(tree.root, 0, "", "")
    return "\n".join(lines)
