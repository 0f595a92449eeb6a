"""AcyclicGatherWithAck: half-selectors on log n + 1 frequencies plus RoundRobin, gated by ack bits."""
from __future__ import annotations

from ..selectors import DEFAULT_C_HALF, SelectorLadder, build_half_ladder
from ..simulator import EventLog, ProtocolFactory
from .common import RumorMessage, ack_frequencies


class AckNode:
    def __init__(self, label, n, in_neighbors, ladder: SelectorLadder, kappa: int, log: EventLog,
                 start: str = "all"):
        self.label = label
        self.n = n
        self.ladder = ladder
        self.kappa = kappa
        self.log = log
        self.rumors = {label}
        # a node holding a rumor nobody else has must be active, which at
        # step 0 is every node; "sources" starts only nodes without in-neighbors
        self.active = start == "all" or not in_neighbors
        self._payload = None
        if self.active:
            log.emit(-1, label, "activate")

    def next_wake(self, step):
        if not self.active:
            return None
        best = step + (self.label - step) % self.n
        for fam in self.ladder.families[: self.kappa - 1]:
            w = fam.next_transmit(self.label, step)
            if w is not None and w < best:
                best = w
        return best

    def transmit(self, step):
        if not self.active:
            return {}
        if self._payload is None or len(self._payload.rumors) != len(self.rumors):
            self._payload = RumorMessage(self.label, frozenset(self.rumors))
        out = {}
        for j, fam in enumerate(self.ladder.families[: self.kappa - 1]):
            if fam.transmits(self.label, step):
                out[j] = self._payload
        if step % self.n == self.label:
            out[self.kappa - 1] = self._payload
        return out

    def receive(self, step, messages, ack):
        # the ack refers to this step's transmission, so it is applied before
        # the step's receptions; a node that is both acked and reached stays active
        if ack and self.active:
            self.active = False
            self.log.emit(step, self.label, "deactivate")
        if messages:
            for _, m in messages:
                self.rumors |= m.payload.rumors
            if not self.active:
                self.active = True
                self.log.emit(step, self.label, "activate")

    def snapshot(self):
        return {"rumors": sorted(self.rumors), "active": self.active}


class AcyclicGatherWithAck(ProtocolFactory):
    name = "ack-gather"
    needs_in_neighbors = True
    requires_ack = True

    def __init__(self, n: int, ladder: SelectorLadder, kappa: int | None = None, start: str = "all"):
        if start not in ("all", "sources"):
            raise ValueError(f"start must be 'all' or 'sources', got {start!r}")
        self.n = n
        self.start = start
        self.kappa = kappa or ack_frequencies(n)
        if len(ladder) < self.kappa - 1:
            raise ValueError(f"half ladder has {len(ladder)} levels, need {self.kappa - 1}")
        self.ladder = ladder
        self.frequencies = self.kappa

    def create(self, label, n, in_neighbors, log):
        return AckNode(label, n, in_neighbors, self.ladder, self.kappa, log, self.start)

    def config(self):
        return {"name": self.name, "kappa": self.kappa, "c_h": self.ladder.constant, "start": self.start,
                "lengths": list(self.ladder.lengths)}


def acyclic_gather_with_ack(n: int, half_ladder: SelectorLadder | None = None, *,
                            c_h: int = DEFAULT_C_HALF, seed: int = 0,
                            kappa: int | None = None, start: str = "all") -> AcyclicGatherWithAck:
    kappa = kappa or ack_frequencies(n)
    if half_ladder is None:
        half_ladder = build_half_ladder(n, kappa - 2, c_h, seed)
    return AcyclicGatherWithAck(n, half_ladder, kappa, start)
