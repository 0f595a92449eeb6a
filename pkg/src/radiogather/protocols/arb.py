"""ArbGather: per-component gossip on SCC frequencies, then AcyclicGather on ACY frequencies.

Frequencies 0..theta-1 carry the ACY-subroutine (identical to AcyclicGather
with the ACG-activation time in place of alpha). Frequency theta+j carries
the size-class-j gossip. Time is cut into j-frames of length T_SCC(j); the
even frame of each pair gossips labels, the odd frame gossips vectors
[v, C~(v), N-(v), N~acy(v), R(v)], and Tests 1-3 run right after the odd frame.

A node that has passed transmits its certified component with every ACY
message. A receiver inside that component adopts it instead of recording
the sender as an acyclic in-neighbor, which would otherwise let Test 3
accept a strict subset of the component.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from ..selectors import DEFAULT_C_STRONG, SelectorLadder, build_strong_ladder
from ..simulator import EventLog, ProtocolFactory
from .acyclic import ActivityPlan
from .common import AcyMessage, BetaSchedule, scc_class_count, theta_for
from .gossip import SimpleGossip


@dataclass(frozen=True)
class Vector:
    label: int
    component: frozenset[int]
    in_neighbors: frozenset[int]
    acy_in: frozenset[int]
    rumors: frozenset[int]


@dataclass(frozen=True)
class GossipLabels:
    sender: int
    j: int
    frame: int
    labels: frozenset[int]

    @property
    def rumors(self) -> frozenset[int]:
        return frozenset()


@dataclass(frozen=True)
class GossipVectors:
    sender: int
    j: int
    frame: int
    vectors: tuple[Vector, ...]
    rumors: frozenset[int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rumors", frozenset().union(*(vec.rumors for vec in self.vectors)))


class _ClassState:
    __slots__ = ("frame", "labels", "ctilde", "vectors", "snap_acy_in", "snap_rumors", "cache")

    def __init__(self, label):
        self.frame = 0
        self.labels = {label}
        self.ctilde: frozenset[int] = frozenset()
        self.vectors: dict[int, Vector] = {}
        self.snap_acy_in: frozenset[int] = frozenset()
        self.snap_rumors: frozenset[int] = frozenset({label})
        self.cache = None


def run_tests(label: int, ctilde: frozenset[int], vectors: dict[int, Vector]) -> tuple[bool, bool, bool]:
    """Tests 1-3 for one double frame; a missing vector fails all three."""
    if any(u not in vectors for u in ctilde):
        return False, False, False
    t1 = all(vectors[u].component == ctilde for u in ctilde)
    t2 = frozenset(vectors) == ctilde
    t3 = all((vectors[u].in_neighbors - vectors[u].acy_in) <= ctilde for u in ctilde)
    return t1, t2, t3


class ArbGatherNode:
    def __init__(self, label, n, in_neighbors, plan: ActivityPlan, classes: int, gossip, log: EventLog):
        self.label = label
        self.n = n
        self.in_neighbors = frozenset(in_neighbors)
        self.plan = plan
        self.theta = plan.theta
        self.classes = classes
        self.gossip = gossip
        self.log = log
        self.rumors = {label}
        self.acy_rumors = {label}
        self.acy_in: set[int] = set()
        self.frame_len = [gossip.frame_length(j, n) for j in range(classes)]
        self.state = [_ClassState(label) for _ in range(classes)]
        self.component: frozenset[int] | None = None
        self.alpha: int | None = None
        self.failed_tests = 0
        self._acy_cache = None

    # -- SCC-subroutine ---------------------------------------------------

    def _advance(self, step):
        if self.component is not None:
            return
        passes = []
        for j, st in enumerate(self.state):
            T = self.frame_len[j]
            now = step // T
            while st.frame < now:
                boundary = (st.frame + 1) * T
                if st.frame % 2 == 0:
                    st.ctilde = frozenset(st.labels)
                    st.vectors = {self.label: Vector(self.label, st.ctilde, self.in_neighbors,
                                                     st.snap_acy_in, st.snap_rumors)}
                else:
                    tests = run_tests(self.label, st.ctilde, st.vectors)
                    if all(tests):
                        passes.append((boundary, j, st.frame // 2, st.ctilde, st.vectors))
                    else:
                        self.failed_tests += 1
                    st.labels = {self.label}
                    st.snap_acy_in = frozenset(self.acy_in)
                    st.snap_rumors = frozenset(self.acy_rumors)
                st.frame += 1
                st.cache = None
        if passes:
            boundary, j, r, comp, vectors = min(passes, key=lambda p: (p[0], p[1]))
            gathered = set(self.rumors)
            for vec in vectors.values():
                gathered |= vec.rumors
            self.rumors = gathered
            self._switch(boundary, comp)
            self.log.emit(boundary, self.label, "scc_pass", j=j, r=r, component=sorted(comp),
                          rumors=sorted(gathered), alpha_acy=boundary)

    def _switch(self, alpha, component):
        self.component = component
        self.alpha = alpha
        self.state = []
        self.log.emit(alpha, self.label, "activate", alpha=alpha, source=None, rws1=None, heard_at=None)

    def _gossip_payload(self, j, st):
        key = (st.frame, len(st.labels) if st.frame % 2 == 0 else len(st.vectors))
        if st.cache is not None and st.cache[0] == key:
            return st.cache[1]
        if st.frame % 2 == 0:
            p = GossipLabels(self.label, j, st.frame, frozenset(st.labels))
        else:
            p = GossipVectors(self.label, j, st.frame, tuple(st.vectors[u] for u in sorted(st.vectors)))
        st.cache = (key, p)
        return p

    # -- step interface -----------------------------------------------------

    def next_wake(self, step):
        if self.component is not None:
            return self.plan.next_transmit(self.label, self.alpha, step)
        best = min(step + (-step) % T for T in self.frame_len)
        for j in range(self.classes):
            w = self.gossip.next_transmit(self.label, j, step, self.n)
            if w is not None and w < best:
                best = w
        return best

    def transmit(self, step):
        self._advance(step)
        if self.component is None:
            out = {}
            for j, st in enumerate(self.state):
                T = self.frame_len[j]
                if self.gossip.transmits(self.label, j, st.frame, step - st.frame * T, self.n):
                    out[self.theta + j] = self._gossip_payload(j, st)
            return out
        fs = self.plan.frequency(self.label, self.alpha, step)
        if fs is None:
            return {}
        f, stage = fs
        c = self._acy_cache
        if c is None or c[0] != stage or c[1] != len(self.rumors):
            msg = AcyMessage(self.label, frozenset(self.rumors), self.plan.rws(self.alpha, stage), self.component)
            self._acy_cache = c = (stage, len(self.rumors), msg)
        return {f: c[2]}

    def receive(self, step, messages, ack):
        self._advance(step)
        adopt = None
        for f, m in messages:
            p = m.payload
            if f < self.theta:
                self.rumors |= p.rumors
                self.acy_rumors |= p.rumors
                if self.component is not None:
                    if step >= self.alpha + self.plan.beta.period:
                        self.log.emit(step, self.label, "late_message", sender=m.sender)
                elif p.component is not None and self.label in p.component:
                    adopt = adopt or (m.sender, p.component)
                else:
                    self.acy_in.add(m.sender)
                continue
            if self.component is not None:
                continue
            j = f - self.theta
            st = self.state[j]
            if p.j != j or p.frame != st.frame:
                continue
            if isinstance(p, GossipLabels):
                st.labels |= p.labels
            else:
                for vec in p.vectors:
                    st.vectors.setdefault(vec.label, vec)
                self.rumors |= p.rumors
        if adopt is not None and self.component is None:
            u, comp = adopt
            self._switch(step + 1, comp)
            self.log.emit(step, self.label, "scc_adopt", sender=u, component=sorted(comp),
                          rumors=sorted(self.rumors), alpha_acy=step + 1)

    def snapshot(self):
        return {"rumors": sorted(self.rumors), "alpha_acy": self.alpha,
                "component": sorted(self.component) if self.component is not None else None,
                "acy_in": sorted(self.acy_in), "failed_tests": self.failed_tests}


class ArbGather(ProtocolFactory):
    name = "arb-gather"
    needs_in_neighbors = True

    def __init__(self, n: int, ladder: SelectorLadder, beta: BetaSchedule, gossip=None, classes: int | None = None):
        self.n = n
        self.ladder = ladder
        self.beta = beta
        self.theta = beta.theta
        self.classes = classes or scc_class_count(n)
        self.gossip = gossip or SimpleGossip()
        self.frequencies = self.theta + self.classes
        self.plan = ActivityPlan(ladder, beta)

    def frame_length(self, j: int) -> int:
        return self.gossip.frame_length(j, self.n)

    def create(self, label, n, in_neighbors, log):
        return ArbGatherNode(label, n, in_neighbors, self.plan, self.classes, self.gossip, log)

    def config(self):
        return {"name": self.name, "theta": self.theta, "scc_classes": self.classes,
                "gossip": self.gossip.name, "c_s": self.ladder.constant,
                "lengths": list(self.ladder.lengths[: self.theta - 1]), "beta": list(self.beta.beta)}


def arb_gather(n: int, ladder: SelectorLadder | None = None, beta: BetaSchedule | None = None,
               gossip=None, *, c_s: int = DEFAULT_C_STRONG, seed: int = 0,
               theta: int | None = None) -> ArbGather:
    theta = theta or (beta.theta if beta else theta_for(n))
    if ladder is None:
        ladder = build_strong_ladder(n, theta - 2, c_s, seed)
    beta = beta or BetaSchedule.from_ladder(ladder, theta)
    return ArbGather(n, ladder, beta, gossip)
