"""Gossip plug-ins for ArbGather's SCC-subroutine.

A plug-in decides frame lengths T_SCC(j) and which steps of a j-frame a node
transmits in. Everything a node has collected in the frame is sent each
time, so the plug-in only shapes the schedule. Contract: if all nodes of a
strongly connected component A with |A| <= 2^j start together at a frame
boundary and no one else uses the frequency, every node of A holds every
starting item of A after T_SCC(j) steps.
"""
from __future__ import annotations

from dataclasses import dataclass

from ..digraph import Digraph, compute_scc
from ..simulator import NetworkModel, Trace, _simulate


class SimpleGossip:
    """2^j RoundRobin cycles over the full label space: T_SCC(j) = 2^j * n.

    Within a strongly connected component of k <= 2^j nodes every item
    advances at least one hop per cycle and the diameter is below k.
    """

    name = "simple"

    def frame_length(self, j: int, n: int) -> int:
        return 2**j * n

    def transmits(self, label: int, j: int, frame: int, offset: int, n: int) -> bool:
        return offset % n == label

    def next_transmit(self, label: int, j: int, step: int, n: int) -> int | None:
        return step + (label - step) % n


class BrokenGossip:
    """SimpleGossip where each node stays silent in a pseudo-random half of its frames.

    Used to show that ArbGather's tests never certify a wrong component,
    whatever the gossip layer does.
    """

    name = "broken"

    def __init__(self, seed: int = 0, inner: SimpleGossip | None = None):
        self.seed = seed
        self.inner = inner or SimpleGossip()

    def dropped(self, label: int, j: int, frame: int) -> bool:
        h = (label * 0x9E3779B1 ^ j * 0x85EBCA77 ^ frame * 0xC2B2AE3D ^ self.seed * 0x27D4EB2F) & 0xFFFFFFFF
        h ^= h >> 15
        h = (h * 0x2C1B3C6D) & 0xFFFFFFFF
        h ^= h >> 12
        return bool(h & 1)

    def frame_length(self, j: int, n: int) -> int:
        return self.inner.frame_length(j, n)

    def transmits(self, label, j, frame, offset, n):
        return self.inner.transmits(label, j, frame, offset, n) and not self.dropped(label, j, frame)

    def next_transmit(self, label, j, step, n):
        T = self.frame_length(j, n)
        for _ in range(64):
            w = self.inner.next_transmit(label, j, step, n)
            if w is None:
                return None
            frame = w // T
            if not self.dropped(label, j, frame):
                return w
            step = (frame + 1) * T
        return None


GOSSIPS = {"simple": SimpleGossip, "broken": BrokenGossip}


def make_gossip(name: str, seed: int = 0):
    if name == "simple":
        return SimpleGossip()
    if name == "broken":
        return BrokenGossip(seed)
    raise ValueError(f"unknown gossip implementation {name!r}")


def gossip_contract(j: int, n: int, gossip=None) -> int:
    """T_SCC(j) for the given plug-in."""
    return (gossip or SimpleGossip()).frame_length(j, n)


class _ContractNode:
    def __init__(self, label, n, j, gossip):
        self.label, self.n, self.j, self.gossip = label, n, j, gossip
        self.rumors = {label}
        self.T = gossip.frame_length(j, n)

    def next_wake(self, step):
        if step >= self.T:
            return None
        w = self.gossip.next_transmit(self.label, self.j, step, self.n)
        return w if w is not None and w < self.T else None

    def transmit(self, step):
        if self.gossip.transmits(self.label, self.j, 0, step, self.n):
            return {0: frozenset(self.rumors)}
        return {}

    def receive(self, step, messages, ack):
        for _, m in messages:
            self.rumors |= m.payload


@dataclass(frozen=True)
class ContractResult:
    ok: bool
    frame_length: int
    missing: dict[int, frozenset[int]]


def check_gossip_contract(gossip, g: Digraph, j: int, component: frozenset[int] | None = None,
                          label_space: int | None = None) -> ContractResult:
    """Run one j-frame of `gossip` on a strongly connected node set and check completeness.

    `g` must induce a strongly connected subgraph on `component` (default: all
    nodes). Only component nodes participate; others stay silent.
    """
    comp = component if component is not None else frozenset(range(g.n))
    scc = compute_scc(Digraph(g.n, frozenset((u, v) for u, v in g.edges if u in comp and v in comp), g.target))
    if len({scc.component_of[v] for v in comp}) != 1:
        raise ValueError("component is not strongly connected")
    if len(comp) > 2**j:
        raise ValueError(f"component of size {len(comp)} does not fit size class {j}")
    n = label_space or g.n
    T = gossip.frame_length(j, n)

    class _Silent:
        def __init__(self, label):
            self.label, self.rumors = label, {label}

        def next_wake(self, step):
            return None

        def transmit(self, step):
            return {}

        def receive(self, step, messages, ack):
            pass

    nodes = [_ContractNode(v, n, j, gossip) if v in comp else _Silent(v) for v in range(g.n)]
    trace = Trace(g, NetworkModel(), {"name": f"gossip-contract-{gossip.name}"})
    _simulate(g, nodes, NetworkModel(), trace, max_steps=T, stop_on_completion=False, period=1)
    missing = {v: frozenset(comp - nodes[v].rumors) for v in comp if comp - nodes[v].rumors}
    return ContractResult(not missing, T, missing)
