from __future__ import annotations

from ..simulator import EventLog, ProtocolFactory
from .common import RumorMessage


class RoundRobinNode:
    def __init__(self, label: int, n: int):
        self.label = label
        self.n = n
        self.rumors = {label}
        self._payload = None

    def next_wake(self, step):
        return step + (self.label - step) % self.n

    def transmit(self, step):
        if step % self.n != self.label:
            return {}
        if self._payload is None or len(self._payload.rumors) != len(self.rumors):
            self._payload = RumorMessage(self.label, frozenset(self.rumors))
        return {0: self._payload}

    def receive(self, step, messages, ack):
        for _, m in messages:
            self.rumors |= m.payload.rumors


class RoundRobinGather(ProtocolFactory):
    """Node w transmits everything it knows exactly at steps tau = w mod n."""

    name = "roundrobin"
    frequencies = 1

    def create(self, label, n, in_neighbors, log: EventLog):
        return RoundRobinNode(label, n)


def roundrobin_gather() -> RoundRobinGather:
    return RoundRobinGather()
