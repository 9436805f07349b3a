"""Failure events, regret quantities, utility gaps, and prior constants."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .model import ALL_ACTIONS, Action, Instance, ModelError
from .seeding import replicate_seed
from .dynamics import SamplingMode, SimulationRecord, run_simulation
from .solver import considers, evaluate_under_truth, solve_known_mu


@dataclass(frozen=True)
class FailureParams:
    """Margin c and pull budget n for the failure events."""

    c: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.c < 0.5:
            raise ModelError(f"failure margin c must lie in (0, 1/2), got {self.c!r}")
        if self.n < 0:
            raise ModelError(f"failure budget n must be >= 0, got {self.n!r}")


@dataclass
class RegretReport:
    """Per-run regret decomposition against the known-mean optimum."""

    optimal_value: float
    episode_values: np.ndarray
    cumulative: np.ndarray

    @property
    def final(self) -> float:
        return float(self.cumulative[-1])


@dataclass
class BayesRegretCurve:
    episodes: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    replicates: int


def _require_mu(record: SimulationRecord) -> tuple[float, float]:
    if record.mu is None:
        raise ModelError("this metric needs a realized mean-reward vector "
                         "(run in MU_FIRST mode)")
    return record.mu


def detect_fail(record: SimulationRecord, fp: FailureParams) -> bool:
    """Bounded means, arm 2 better by margin c, and arm 2 pulled <= n times."""
    mu1, mu2 = _require_mu(record)
    return (fp.c < mu1 < 1.0 - fp.c
            and fp.c < mu2 < 1.0 - fp.c
            and mu2 >= mu1 + fp.c
            and record.pulls2 <= fp.n)


def detect_strong_fail(record: SimulationRecord, fp: FailureParams) -> bool:
    """Arm 2 better by margin c and at most n episodes even consider it."""
    mu1, mu2 = _require_mu(record)
    if not mu2 >= mu1 + fp.c:
        return False
    return count_considering_episodes(record, Action.ARM2) <= fp.n


def count_considering_episodes(record: SimulationRecord, arm: Action) -> int:
    """Number of episodes whose policy reaches ``arm`` with positive probability."""
    cache: dict[int, bool] = {}
    total = 0
    for ep in record.episodes:
        key = id(ep.policy)
        hit = cache.get(key)
        if hit is None:
            hit = considers(ep.policy, arm)
            cache[key] = hit
        total += hit
    return total


def pseudoregret(record: SimulationRecord) -> RegretReport:
    """Cumulative gap to the known-mean optimum, per episode count.

    Reg(t) = t * U*(mu) - sum over the first t episodes of V(policy_e | mu),
    with both sides computed by the exact evaluators.
    """
    mu = _require_mu(record)
    inst = record.instance
    u_star = solve_known_mu(mu, inst, ALL_ACTIONS).value
    cache: dict[int, float] = {}
    values = np.empty(len(record.episodes))
    for e, ep in enumerate(record.episodes):
        key = id(ep.policy)
        v = cache.get(key)
        if v is None:
            v = evaluate_under_truth(ep.policy, mu, inst)
            cache[key] = v
        values[e] = v
    t = np.arange(1, len(values) + 1, dtype=np.float64)
    cumulative = u_star * t - np.cumsum(values)
    return RegretReport(optimal_value=u_star, episode_values=values,
                        cumulative=cumulative)


def _regret_curve_worker(args) -> np.ndarray:
    inst, episodes, seed = args
    record = run_simulation(inst, episodes, seed, SamplingMode.MU_FIRST)
    return pseudoregret(record).cumulative


def bayes_regret_mc(inst: Instance, episodes: int, replicates: int,
                    master_seed: int, threads: int = 1) -> BayesRegretCurve:
    """Monte Carlo estimate of expected pseudoregret over the prior.

    Replicate r runs with seed derived from (master_seed, r); curves are
    averaged in replicate order, so the result does not depend on ``threads``.
    """
    if replicates < 1:
        raise ModelError(f"replicates must be >= 1, got {replicates}")
    jobs = [(inst, episodes, replicate_seed(master_seed, r))
            for r in range(replicates)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            curves = list(pool.map(_regret_curve_worker, jobs,
                                   chunksize=max(1, replicates // (threads * 8) or 1)))
    else:
        curves = [_regret_curve_worker(job) for job in jobs]
    stacked = np.vstack(curves)
    mean = stacked.mean(axis=0)
    if replicates > 1:
        stderr = stacked.std(axis=0, ddof=1) / math.sqrt(replicates)
    else:
        stderr = np.zeros_like(mean)
    return BayesRegretCurve(episodes=np.arange(1, episodes + 1),
                            mean=mean, stderr=stderr, replicates=replicates)


def ugap(mu: tuple[float, float], inst: Instance) -> float:
    """Per-episode optimal value minus the best value never considering the
    realized-good arm. Non-negative; undefined for mu1 == mu2."""
    mu1, mu2 = mu
    if mu1 == mu2:
        raise ModelError("utility gap needs distinct mean rewards")
    bad_arm = Action.ARM2 if mu2 < mu1 else Action.ARM1
    best = solve_known_mu(mu, inst, ALL_ACTIONS).value
    restricted = solve_known_mu(mu, inst, frozenset((Action.SKIP, bad_arm))).value
    return max(0.0, best - restricted)


def ugap_bound_min(mu: tuple[float, float], m: int, cost: float) -> float:
    """Closed-form utility-gap lower bound for the all-rounds-must-succeed score."""
    mu1, mu2 = mu
    if mu2 < mu1:
        raise ModelError("the closed-form bounds assume mu2 >= mu1")
    return max(0.0, mu2 ** m - mu1 ** m - m * cost)


def ugap_bound_max(mu: tuple[float, float], m: int, cost: float) -> float:
    """Closed-form utility-gap lower bound for the any-round-suffices score."""
    mu1, mu2 = mu
    if mu2 < mu1:
        raise ModelError("the closed-form bounds assume mu2 >= mu1")
    return max(0.0, (1.0 - mu1) ** m - (1.0 - mu2) ** m - m * cost)


PriorConstantVariant = Literal["symmetric", "general_m2"]


def n_prior(inst: Instance, variant: PriorConstantVariant) -> int:
    """Prior-determined pull budget for the bounded-pulls arguments.

    symmetric:   1 + floor((m - 1) * beta2 / alpha2)
    general_m2:  (1 + floor(beta2 / alpha2)) + (1 + floor(gamma20 / (3 gap / 4)))
    """
    a2, b2 = inst.prior2.alpha, inst.prior2.beta
    if variant == "symmetric":
        return 1 + math.floor((inst.m - 1) * b2 / a2)
    if variant == "general_m2":
        if inst.m != 2:
            raise ModelError("the general-f constant is defined for m = 2 only")
        n0 = 1 + math.floor(b2 / a2)
        n1 = 1 + math.floor(inst.prior2.mean() / (0.75 * inst.prior_gap))
        return n0 + n1
    raise ModelError(f"unknown n_prior variant {variant!r}")


def cost_threshold(inst: Instance, variant: PriorConstantVariant) -> float:
    """Largest exploration cost under which the no-pull arguments apply.

    symmetric: minimum over pairs j <= i <= m of
        (1/(m-i)) * prod_{l=0}^{m-i} (g1 - gap/4) / (1 + l/(a1+b1))
                  * (f(m-i+j) - f(j))
    taken over pairs where the score difference is positive, and 1 where the
    scores are equal.

    general_m2: (g1 - gap/4) * (f(1,1) - f(1,0)) when f(1,1) > f(1,0), else 1.
    """
    g1 = inst.prior1.mean()
    floor = g1 - inst.prior_gap / 4.0
    if variant == "symmetric":
        if not inst.f.symmetric:
            raise ModelError("the symmetric threshold needs a symmetric score table")
        table = inst.f.table
        denom = inst.prior1.alpha + inst.prior1.beta
        best = 1.0
        for i in range(inst.m + 1):
            for j in range(i + 1):
                diff = table[inst.m - i + j] - table[j]
                if diff <= 0:
                    continue
                prod = 1.0
                for ell in range(inst.m - i + 1):
                    prod *= floor / (1.0 + ell / denom)
                best = min(best, prod * diff / (inst.m - i))
        return best
    if variant == "general_m2":
        if inst.m != 2:
            raise ModelError("the general-f threshold is defined for m = 2 only")
        f11 = inst.f.by_index(0b11)
        f10 = inst.f.by_index(0b01)
        if f11 > f10:
            return floor * (f11 - f10)
        return 1.0
    raise ModelError(f"unknown cost_threshold variant {variant!r}")
