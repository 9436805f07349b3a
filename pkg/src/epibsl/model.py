"""Core domain types for episodic bandit social learning.

Two Bernoulli arms with Beta priors plus a zero-reward skip action. An
episode is a block of ``m`` rounds scored by an aggregation function of the
episode's reward vector, minus a fixed exploration cost per non-skip pull.
All types are immutable values; every operation is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Sequence

MAX_GENERAL_M = 12


class ModelError(ValueError):
    """An invalid domain object or argument."""


class MonotonicityViolation(ModelError):
    """Aggregation table decreases along a coordinatewise-increasing step."""

    def __init__(self, lower_label: str, upper_label: str,
                 lower_value: float, upper_value: float):
        self.lower_label = lower_label
        self.upper_label = upper_label
        self.lower_value = lower_value
        self.upper_value = upper_value
        super().__init__(
            f"aggregation function not non-decreasing: "
            f"f({lower_label}) = {lower_value!r} > f({upper_label}) = {upper_value!r}"
        )


class ConstantFunctionError(ModelError):
    """Aggregation function with f(all-ones) == f(all-zeros)."""


class Action(Enum):
    SKIP = "skip"
    ARM1 = "arm1"
    ARM2 = "arm2"

    def __repr__(self) -> str:  # compact in test output
        return self.value


NON_SKIP_ACTIONS = (Action.ARM1, Action.ARM2)
ALL_ACTIONS = frozenset((Action.SKIP, Action.ARM1, Action.ARM2))


@dataclass(frozen=True, slots=True)
class BetaParam:
    """Beta(alpha, beta) parameters; alpha and beta are strictly positive."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ModelError(f"alpha must be a positive finite real, got {self.alpha!r}")
        if not (self.beta > 0 and math.isfinite(self.beta)):
            raise ModelError(f"beta must be a positive finite real, got {self.beta!r}")

    def mean(self) -> float:
        """Posterior mean alpha / (alpha + beta), strictly inside (0, 1)."""
        return self.alpha / (self.alpha + self.beta)

    def update(self, reward: int) -> "BetaParam":
        """Conjugate update for one Bernoulli observation."""
        if reward not in (0, 1):
            raise ModelError(f"reward must be 0 or 1, got {reward!r}")
        if reward:
            return BetaParam(self.alpha + 1, self.beta)
        return BetaParam(self.alpha, self.beta + 1)

    def optimistic_mean(self, k: int) -> float:
        """Mean after k hypothetical additional successes: (a+k)/(a+b+k).

        Non-decreasing in k; k = 0 reduces to ``mean``.
        """
        if k < 0:
            raise ModelError(f"k must be >= 0, got {k!r}")
        return (self.alpha + k) / (self.alpha + self.beta + k)

    def pessimistic_mean(self) -> float:
        """Mean after one hypothetical failure: a/(a+b+1), always below ``mean``."""
        return self.alpha / (self.alpha + self.beta + 1)

    def rho(self, i: int) -> float:
        """Probability of i+1 consecutive successes under sequential updates.

        Product over l = 0..i of a/(a+b+l); strictly decreasing in i.
        """
        if i < 0:
            raise ModelError(f"i must be >= 0, got {i!r}")
        out = 1.0
        denom = self.alpha + self.beta
        for ell in range(i + 1):
            out *= self.alpha / (denom + ell)
        return out


@dataclass(frozen=True, slots=True)
class PosteriorState:
    """Joint posterior over both arms plus the pull/success tallies behind it."""

    arm1: BetaParam
    arm2: BetaParam
    pulls1: int = 0
    pulls2: int = 0
    successes1: int = 0
    successes2: int = 0

    def __post_init__(self):
        for label, pulls, succ in (("arm1", self.pulls1, self.successes1),
                                   ("arm2", self.pulls2, self.successes2)):
            if pulls < 0 or succ < 0:
                raise ModelError(f"{label} counts must be non-negative")
            if succ > pulls:
                raise ModelError(f"{label}: successes ({succ}) exceed pulls ({pulls})")

    def arm(self, action: Action) -> BetaParam:
        if action is Action.ARM1:
            return self.arm1
        if action is Action.ARM2:
            return self.arm2
        raise ModelError(f"no Beta parameters for action {action!r}")

    def update(self, action: Action, reward: int) -> "PosteriorState":
        """State after observing ``reward`` from a pull of ``action``."""
        if action is Action.ARM1:
            return PosteriorState(self.arm1.update(reward), self.arm2,
                                  self.pulls1 + 1, self.pulls2,
                                  self.successes1 + reward, self.successes2)
        if action is Action.ARM2:
            return PosteriorState(self.arm1, self.arm2.update(reward),
                                  self.pulls1, self.pulls2 + 1,
                                  self.successes1, self.successes2 + reward)
        raise ModelError("skip observes no reward; cannot update the posterior")

    @property
    def counts(self) -> tuple[int, int, int, int]:
        return (self.pulls1, self.successes1, self.pulls2, self.successes2)


@dataclass(frozen=True)
class AggregationFunction:
    """Score of an episode's reward vector.

    Symmetric tables hold ``m + 1`` values indexed by the number of ones.
    General tables hold ``2**m`` values indexed by the reward bit-vector,
    where bit ``j`` of the index is the reward of round ``j``.

    Construct through :meth:`symmetric`, :meth:`general` or :meth:`named`;
    those validate monotonicity, reject constant tables, and normalize so
    that the all-zeros vector scores exactly 0.
    """

    m: int
    table: tuple[float, ...]
    symmetric: bool

    @classmethod
    def symmetric_table(cls, values: Sequence[float]) -> "AggregationFunction":
        values = tuple(float(v) for v in values)
        if len(values) < 2:
            raise ModelError("symmetric table needs at least 2 entries (m >= 1)")
        return validate_f(cls(m=len(values) - 1, table=values, symmetric=True))

    @classmethod
    def general_table(cls, m: int,
                      values: Sequence[float] | Mapping[str, float],
                      ) -> "AggregationFunction":
        if m < 1:
            raise ModelError(f"m must be >= 1, got {m}")
        if m > MAX_GENERAL_M:
            raise ModelError(f"general tables support m <= {MAX_GENERAL_M}, got {m}")
        size = 1 << m
        if isinstance(values, Mapping):
            table = [math.nan] * size
            for key, value in values.items():
                if len(key) != m or any(ch not in "01" for ch in key):
                    raise ModelError(f"general table key {key!r} is not an m-bit string")
                idx = sum(1 << j for j, ch in enumerate(key) if ch == "1")
                table[idx] = float(value)
            missing = [format_bits(i, m) for i, v in enumerate(table) if math.isnan(v)]
            if missing:
                raise ModelError(f"general table missing entries for {missing}")
        else:
            table = [float(v) for v in values]
            if len(table) != size:
                raise ModelError(f"general table for m={m} needs {size} entries, got {len(table)}")
        return validate_f(cls(m=m, table=tuple(table), symmetric=False))

    @classmethod
    def named(cls, name: str, m: int) -> "AggregationFunction":
        if m < 1:
            raise ModelError(f"m must be >= 1, got {m}")
        if name == "min":
            return cls.symmetric_table([0.0] * m + [1.0])
        if name == "max":
            return cls.symmetric_table([0.0] + [1.0] * m)
        if name == "sum":
            return cls.symmetric_table([float(k) for k in range(m + 1)])
        raise ModelError(f"unknown aggregation function name {name!r}")

    def by_ones(self, ones: int) -> float:
        """Score of any reward vector with the given number of ones (symmetric only)."""
        if not self.symmetric:
            raise ModelError("by_ones is only defined for symmetric tables")
        return self.table[ones]

    def by_index(self, index: int) -> float:
        """Score of the reward vector encoded as an integer, bit j = round j."""
        if self.symmetric:
            return self.table[index.bit_count()]
        return self.table[index]

    @property
    def zero_value(self) -> float:
        return self.table[0]

    @property
    def full_value(self) -> float:
        return self.table[-1]


def format_bits(index: int, m: int) -> str:
    """Render a reward-vector index as an m-character bit string, round 0 first."""
    return "".join("1" if index >> j & 1 else "0" for j in range(m))


def validate_f(f: AggregationFunction) -> AggregationFunction:
    """Check monotonicity and non-constancy; return a normalized copy.

    Normalization subtracts the all-zeros score so the returned table has
    f(all-zeros) = 0. Raises :class:`MonotonicityViolation` naming the
    offending pair, or :class:`ConstantFunctionError`.
    """
    if f.symmetric:
        if len(f.table) != f.m + 1:
            raise ModelError(f"symmetric table for m={f.m} needs {f.m + 1} entries")
        for k in range(f.m):
            if f.table[k] > f.table[k + 1]:
                raise MonotonicityViolation(f"ones={k}", f"ones={k + 1}",
                                            f.table[k], f.table[k + 1])
    else:
        if len(f.table) != 1 << f.m:
            raise ModelError(f"general table for m={f.m} needs {1 << f.m} entries")
        for idx in range(1 << f.m):
            for j in range(f.m):
                if not idx >> j & 1:
                    upper = idx | 1 << j
                    if f.table[idx] > f.table[upper]:
                        raise MonotonicityViolation(format_bits(idx, f.m),
                                                    format_bits(upper, f.m),
                                                    f.table[idx], f.table[upper])
    if not f.table[-1] > f.table[0]:
        raise ConstantFunctionError(
            f"aggregation function must satisfy f(all-ones) > f(all-zeros); "
            f"both endpoints are {f.table[0]!r} vs {f.table[-1]!r}")
    base = f.table[0]
    table = f.table if base == 0.0 else tuple(v - base for v in f.table)
    return AggregationFunction(m=f.m, table=table, symmetric=f.symmetric)


@dataclass(frozen=True)
class Instance:
    """A problem instance: priors, aggregation function, cost, episode length.

    Arm 1 is required to be the prior-good arm (strictly larger prior mean);
    instances violating that are rejected rather than silently reordered.
    """

    prior1: BetaParam
    prior2: BetaParam
    f: AggregationFunction
    cost: float
    m: int

    def __post_init__(self):
        if self.m < 1:
            raise ModelError(f"m must be >= 1, got {self.m}")
        if self.f.m != self.m:
            raise ModelError(f"aggregation table is for m={self.f.m}, instance has m={self.m}")
        if not (0 < self.cost <= 1):
            raise ModelError(f"cost must lie in (0, 1], got {self.cost!r}")
        if not self.prior1.mean() > self.prior2.mean():
            raise ModelError(
                "arm 1 must be prior-good: mean(prior1) "
                f"{self.prior1.mean():.6g} <= mean(prior2) {self.prior2.mean():.6g}")

    @property
    def prior_gap(self) -> float:
        """Gap between prior means, strictly positive."""
        return self.prior1.mean() - self.prior2.mean()

    def initial_state(self) -> PosteriorState:
        return PosteriorState(self.prior1, self.prior2)
