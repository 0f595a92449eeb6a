"""AcyclicGather: staged selector transmissions driven by recommended wake-up steps."""
from __future__ import annotations

from ..selectors import DEFAULT_C_STRONG, SelectorLadder, build_strong_ladder
from ..simulator import EventLog, ProtocolFactory
from .common import AcyMessage, BetaSchedule, theta_for


class ActivityPlan:
    """Transmission schedule of one activity period [alpha, alpha + beta_theta).

    Stage j <= theta-2 runs the strong 2^j-selector on frequency j; stage
    theta-1 runs RoundRobin on frequency theta-1. Selector indices follow
    global time.
    """

    def __init__(self, ladder: SelectorLadder, beta: BetaSchedule, freq_offset: int = 0):
        self.ladder = ladder
        self.beta = beta
        self.theta = beta.theta
        self.n = beta.n
        self.freq_offset = freq_offset

    def next_transmit(self, label: int, alpha: int, step: int) -> int | None:
        b = self.beta.beta
        t = max(step, alpha)
        j = self.beta.stage(t - alpha)
        while j < self.theta - 1:
            end = alpha + b[j + 1]
            cand = self.ladder[j].next_transmit(label, t)
            if cand is not None and cand < end:
                return cand
            t, j = end, j + 1
        if j == self.theta - 1:
            cand = t + (label - t) % self.n
            if cand < alpha + b[self.theta]:
                return cand
        return None

    def frequency(self, label: int, alpha: int, step: int) -> tuple[int, int] | None:
        """(frequency, stage) on which `label` transmits at `step`, or None."""
        j = self.beta.stage(step - alpha)
        if j < 0 or j >= self.theta:
            return None
        if j < self.theta - 1:
            if self.ladder[j].transmits(label, step):
                return self.freq_offset + j, j
            return None
        if step % self.n == label:
            return self.freq_offset + j, j
        return None

    def rws(self, alpha: int, stage: int) -> int:
        return alpha + self.beta.beta[stage + 1]


class AcyclicGatherNode:
    def __init__(self, label, n, in_neighbors, plan: ActivityPlan, log: EventLog):
        self.label = label
        self.n = n
        self.in_neighbors = frozenset(in_neighbors)
        self.plan = plan
        self.log = log
        self.rumors = {label}
        self.rws1: dict[int, int] = {}
        self.alpha: int | None = None
        self._cache: tuple[int, int, AcyMessage] | None = None
        if not self.in_neighbors:
            self.alpha = 0
            log.emit(-1, label, "activate", alpha=0, source=None, rws1=None, heard_at=None)

    def next_wake(self, step):
        if self.alpha is None:
            return None
        return self.plan.next_transmit(self.label, self.alpha, step)

    def transmit(self, step):
        if self.alpha is None:
            return {}
        fs = self.plan.frequency(self.label, self.alpha, step)
        if fs is None:
            return {}
        f, j = fs
        c = self._cache
        if c is None or c[0] != j or c[1] != len(self.rumors):
            msg = AcyMessage(self.label, frozenset(self.rumors), self.plan.rws(self.alpha, j))
            self._cache = c = (j, len(self.rumors), msg)
        return {f: c[2]}

    def receive(self, step, messages, ack):
        if not messages:
            return
        fresh = []
        for f, m in messages:
            u, p = m.sender, m.payload
            if self.alpha is not None and step >= self.alpha + self.plan.beta.period:
                self.log.emit(step, self.label, "late_message", sender=u)
            self.rumors |= p.rumors
            if u not in self.rws1:
                self.rws1[u] = p.rws
                fresh.append((p.rws, u))
        if self.alpha is None and fresh and len(self.rws1) == len(self.in_neighbors):
            # last in-neighbor to get through; ties: largest rws1, then largest label
            rws, u = max(fresh)
            self.alpha = rws
            self.log.emit(step, self.label, "activate", alpha=rws, source=u, rws1=rws, heard_at=step)

    def snapshot(self):
        return {"rumors": sorted(self.rumors), "alpha": self.alpha, "rws1": dict(sorted(self.rws1.items()))}


class AcyclicGather(ProtocolFactory):
    name = "acyclic-gather"
    needs_in_neighbors = True

    def __init__(self, n: int, ladder: SelectorLadder, beta: BetaSchedule):
        self.n = n
        self.ladder = ladder
        self.beta = beta
        self.theta = beta.theta
        self.frequencies = beta.theta
        self.plan = ActivityPlan(ladder, beta)

    def create(self, label, n, in_neighbors, log):
        return AcyclicGatherNode(label, n, in_neighbors, self.plan, log)

    def config(self):
        return {"name": self.name, "theta": self.theta, "c_s": self.ladder.constant,
                "lengths": list(self.ladder.lengths[: self.theta - 1]), "beta": list(self.beta.beta)}


def acyclic_gather(n: int, ladder: SelectorLadder | None = None, beta: BetaSchedule | None = None, *,
                   c_s: int = DEFAULT_C_STRONG, seed: int = 0, srt: bool = True,
                   theta: int | None = None) -> AcyclicGather:
    """Build the protocol; without a ladder one is constructed (strength +1 when srt is off)."""
    theta = theta or (beta.theta if beta else theta_for(n))
    if ladder is None:
        ladder = build_strong_ladder(n, theta - 2, c_s, seed, strength_offset=0 if srt else 1)
    beta = beta or BetaSchedule.from_ladder(ladder, theta)
    return AcyclicGather(n, ladder, beta)
