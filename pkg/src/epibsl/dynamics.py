"""Social-learning dynamics: reward tapes and the episode loop.

Each episode a fresh agent solves for the posterior-optimal policy given the
global posterior, executes it against pre-drawn per-arm reward tapes, and
the observations feed the next agent's posterior. Runs are bit-reproducible
from ``(instance, T, seed, mode)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .model import Action, BetaParam, Instance, ModelError, PosteriorState
from .seeding import STREAM_MU, STREAM_TAPE1, STREAM_TAPE2, make_generator, mix64
from .solver import PolicyTree, solve_posterior_optimal

_TAPE_BLOCK = 64


class SamplingMode(Enum):
    """How reward tapes are drawn.

    MU_FIRST draws a mean-reward vector from the priors and then i.i.d.
    Bernoulli entries; SEQUENTIAL_POSTERIOR draws entry l of an arm from a
    Bernoulli whose parameter is the arm's posterior mean after the first
    l-1 entries of that tape. Both induce the same tape distribution.
    """

    MU_FIRST = "mu_first"
    SEQUENTIAL_POSTERIOR = "sequential_posterior"


class RewardTape:
    """Lazily extended reward sequence for one arm.

    Entry l (0-based) is generated at most once and never changes; pulls
    consume entries in order. Uniform variates are drawn from a dedicated
    counter-based stream in fixed-size blocks, so the realized bits do not
    depend on how generation interleaves with consumption.
    """

    __slots__ = ("cap", "consumed", "_mu", "_alpha0", "_beta0", "_rng",
                 "_uniforms", "_bits", "_ones")

    def __init__(self, seed: int, cap: int, *, mu: float | None = None,
                 prior: BetaParam | None = None):
        if (mu is None) == (prior is None):
            raise ModelError("a tape needs exactly one of mu (MU_FIRST) or "
                             "prior (SEQUENTIAL_POSTERIOR)")
        self.cap = int(cap)
        self.consumed = 0
        self._mu = mu
        self._alpha0 = prior.alpha if prior is not None else 0.0
        self._beta0 = prior.beta if prior is not None else 0.0
        self._rng = make_generator(seed)
        self._uniforms: list[float] = []
        self._bits: list[int] = []
        self._ones = 0

    @property
    def generated(self) -> int:
        return len(self._bits)

    def ensure(self, n: int) -> None:
        """Generate entries so at least the first ``n`` exist."""
        if n > self.cap:
            raise ModelError(f"tape capped at {self.cap} entries, asked for {n}")
        while len(self._uniforms) < n:
            self._uniforms.extend(self._rng.random(_TAPE_BLOCK).tolist())
        while len(self._bits) < n:
            ell = len(self._bits)
            if self._mu is not None:
                bit = 1 if self._uniforms[ell] < self._mu else 0
            else:
                p = (self._alpha0 + self._ones) / (self._alpha0 + self._beta0 + ell)
                bit = 1 if self._uniforms[ell] < p else 0
            self._bits.append(bit)
            self._ones += bit

    def prefix(self, n: int) -> np.ndarray:
        """First ``n`` entries, generating on demand; does not consume."""
        self.ensure(n)
        return np.asarray(self._bits[:n], dtype=np.int64)

    def draw(self) -> int:
        """Consume and return the next entry."""
        self.ensure(self.consumed + 1)
        bit = self._bits[self.consumed]
        self.consumed += 1
        return bit


@dataclass(frozen=True)
class EpisodeRecord:
    policy: PolicyTree
    actions: tuple[Action, ...]
    rewards: tuple[int, ...]
    cost_paid: float
    utility: float


@dataclass
class SimulationRecord:
    """Everything one run produced, replayable from the recorded history."""

    instance: Instance
    mode: SamplingMode
    seed: int
    episodes_requested: int
    mu: tuple[float, float] | None
    episodes: list[EpisodeRecord] = field(default_factory=list)
    posteriors: list[PosteriorState] = field(default_factory=list)
    tape1: RewardTape | None = None
    tape2: RewardTape | None = None

    @property
    def final_posterior(self) -> PosteriorState:
        return self.posteriors[-1]

    @property
    def pulls1(self) -> int:
        return self.final_posterior.pulls1

    @property
    def pulls2(self) -> int:
        return self.final_posterior.pulls2

    def tape(self, action: Action) -> RewardTape:
        if action is Action.ARM1:
            return self.tape1
        if action is Action.ARM2:
            return self.tape2
        raise ModelError("skip has no reward tape")


def sample_mu(prior1: BetaParam, prior2: BetaParam, seed: int) -> tuple[float, float]:
    """Independent mean-reward draws from the two priors, fixed by ``seed``."""
    rng = make_generator(seed, STREAM_MU)
    return (float(rng.beta(prior1.alpha, prior1.beta)),
            float(rng.beta(prior2.alpha, prior2.beta)))


def run_simulation(inst: Instance, episodes: int, seed: int,
                   mode: SamplingMode = SamplingMode.MU_FIRST) -> SimulationRecord:
    """Run ``episodes`` posterior-optimal agents and record everything.

    Identical inputs give a bit-identical record. Each episode's policy is
    recomputed from the current global posterior (cached per posterior, which
    is exact because the solver is deterministic).
    """
    if episodes < 1:
        raise ModelError(f"episodes must be >= 1, got {episodes}")
    cap = inst.m * episodes
    if mode is SamplingMode.MU_FIRST:
        mu = sample_mu(inst.prior1, inst.prior2, seed)
        tape1 = RewardTape(mix64(seed, STREAM_TAPE1), cap, mu=mu[0])
        tape2 = RewardTape(mix64(seed, STREAM_TAPE2), cap, mu=mu[1])
    else:
        mu = None
        tape1 = RewardTape(mix64(seed, STREAM_TAPE1), cap, prior=inst.prior1)
        tape2 = RewardTape(mix64(seed, STREAM_TAPE2), cap, prior=inst.prior2)

    record = SimulationRecord(instance=inst, mode=mode, seed=seed,
                              episodes_requested=episodes, mu=mu,
                              tape1=tape1, tape2=tape2)
    state = inst.initial_state()
    record.posteriors.append(state)
    tapes = {Action.ARM1: tape1, Action.ARM2: tape2}
    solved: dict[tuple[int, int, int, int], PolicyTree] = {}

    for _ in range(episodes):
        key = state.counts
        policy = solved.get(key)
        if policy is None:
            policy = solve_posterior_optimal(state, inst).policy
            solved[key] = policy

        node = policy.root
        actions: list[Action] = []
        rewards: list[int] = []
        pulls = 0
        for _round in range(inst.m):
            action = node.action
            if action is Action.SKIP:
                reward = 0
            else:
                reward = tapes[action].draw()
                state = state.update(action, reward)
                pulls += 1
            actions.append(action)
            rewards.append(reward)
            node = node.on_one if (reward and action is not Action.SKIP) else node.on_zero

        if inst.f.symmetric:
            score = inst.f.by_ones(sum(rewards))
        else:
            score = inst.f.by_index(sum(1 << j for j, r in enumerate(rewards) if r))
        cost_paid = inst.cost * pulls
        record.episodes.append(EpisodeRecord(policy, tuple(actions), tuple(rewards),
                                             cost_paid, score - cost_paid))
        record.posteriors.append(state)

    return record


def stability_threshold(inst: Instance) -> float:
    """Posterior-mean floor for arm 1: prior mean minus a quarter of the gap."""
    return inst.prior1.mean() - inst.prior_gap / 4.0


def ev1_from_bits(prior1: BetaParam, threshold: float,
                  bits: Sequence[int] | np.ndarray, n_max: int) -> bool:
    """Arm-1 stability on explicit tape bits.

    True iff (alpha + sum of first n bits) / (alpha + beta + n) >= threshold
    for every n in 1..n_max.
    """
    if n_max < 1:
        return True
    arr = np.asarray(bits[:n_max], dtype=np.float64)
    if arr.shape[0] < n_max:
        raise ModelError(f"need {n_max} tape entries, got {arr.shape[0]}")
    n = np.arange(1, n_max + 1, dtype=np.float64)
    means = (prior1.alpha + np.cumsum(arr)) / (prior1.alpha + prior1.beta + n)
    return bool(np.all(means >= threshold))


def detect_ev1(record: SimulationRecord, n_max: int) -> bool:
    """Arm-1 stability over the first ``n_max`` tape entries (extends lazily)."""
    inst = record.instance
    bits = record.tape1.prefix(n_max)
    return ev1_from_bits(inst.prior1, stability_threshold(inst), bits, n_max)


def ev2_from_bits(bits: Sequence[int] | np.ndarray, n: int) -> bool:
    """True iff the first ``n`` entries are all zero (vacuously true at n=0)."""
    if n == 0:
        return True
    arr = np.asarray(bits[:n])
    if arr.shape[0] < n:
        raise ModelError(f"need {n} tape entries, got {arr.shape[0]}")
    return bool(np.all(arr == 0))


def detect_ev2(record: SimulationRecord, n: int) -> bool:
    """All-zero prefix of length ``n`` on arm 2's tape (extends lazily)."""
    if n == 0:
        return True
    return ev2_from_bits(record.tape2.prefix(n), n)
