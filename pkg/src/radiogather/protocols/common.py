"""Stage counts, wake-up schedules and message payloads shared by the protocols."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..selectors import SelectorLadder, log2_ceil


def theta_for(n: int) -> int:
    """Number of activity stages, ceil((log n - log log n) / 2) + 2."""
    if n <= 2:
        return 2 if n == 1 else 3
    lg = math.log2(n)
    return math.ceil((lg - math.log2(lg)) / 2) + 2


def scc_class_count(n: int) -> int:
    """Size classes 0..count-1 so that 2^(count-1) >= n."""
    return (math.ceil(math.log2(n)) if n > 1 else 0) + 1


def ack_frequencies(n: int) -> int:
    return (math.ceil(math.log2(n)) if n > 1 else 0) + 2


@dataclass(frozen=True)
class BetaSchedule:
    """Stage boundaries: stage j of a node activated at a spans [a + beta[j], a + beta[j+1])."""

    n: int
    theta: int
    lengths: tuple[int, ...]  # selector lengths l_0 .. l_{theta-2}
    beta: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        if len(self.lengths) < self.theta - 1:
            raise ValueError(f"need {self.theta - 1} selector lengths, got {len(self.lengths)}")
        b = [0]
        for g in range(self.theta - 1):
            b.append(b[-1] + self.lengths[g])
        b.append(b[-1] + self.n)
        object.__setattr__(self, "beta", tuple(b))

    @classmethod
    def from_ladder(cls, ladder: SelectorLadder, theta: int) -> "BetaSchedule":
        return cls(ladder.n, theta, ladder.lengths[: theta - 1])

    @property
    def period(self) -> int:
        return self.beta[-1]

    def stage(self, offset: int) -> int:
        """Stage index for a node `offset` steps after its activation (-1 / theta outside)."""
        if offset < 0:
            return -1
        if offset >= self.beta[-1]:
            return self.theta
        for j in range(self.theta):
            if offset < self.beta[j + 1]:
                return j
        return self.theta


@dataclass(frozen=True)
class RumorMessage:
    sender: int
    rumors: frozenset[int]


@dataclass(frozen=True)
class AcyMessage:
    """Stage message: rumors, sender label and its recommended wake-up step.

    `component` is the sender's certified sc-component when sent by the
    ArbGather ACY-subroutine, None in plain AcyclicGather.
    """

    sender: int
    rumors: frozenset[int]
    rws: int
    component: frozenset[int] | None = None


def log_n(n: int) -> int:
    return log2_ceil(n)
