"""Discrete-time radio network engine.

Per step: every awake node is asked what it transmits on each frequency,
deliveries are computed by the collision rule, acknowledgement bits are
derived from the deliveries, and only then are deliveries handed to nodes.
A node therefore cannot react to a message within the step it arrives.

Nodes advertise the next step at which they might transmit (``next_wake``);
the engine jumps over steps in which nobody is scheduled. A node whose wake
step passes without it transmitting still gets an (empty) ``receive`` call.
"""
from __future__ import annotations

import hashlib
import heapq
import json
import random
from array import array
from dataclasses import dataclass, field, fields, is_dataclass
from typing import Any, Callable, Iterable, Iterator, Protocol

from .digraph import Digraph, validate_target_reachable
from .selectors import SelectorFamily


class _Silence:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "SILENCE"


# What a receiver gets on a frequency where zero or >= 2 in-neighbors transmitted.
SILENCE = _Silence()


@dataclass(frozen=True)
class NetworkModel:
    frequencies: int = 1
    srt: bool = True
    ack: bool = False

    def __post_init__(self):
        if self.frequencies < 1:
            raise ValueError("need at least one frequency")

    def describe(self) -> str:
        return f"k={self.frequencies},srt={int(self.srt)},ack={int(self.ack)}"


@dataclass(frozen=True)
class Message:
    sender: int
    payload: Any


@dataclass
class StepRecord:
    step: int
    transmissions: dict[int, dict[int, Any]] = field(default_factory=dict)
    deliveries: dict[int, dict[int, Any]] = field(default_factory=dict)
    acks: dict[int, bool] | None = None


class Node(Protocol):
    label: int
    rumors: set[int]

    def next_wake(self, step: int) -> int | None: ...
    def transmit(self, step: int) -> dict[int, Any]: ...
    def receive(self, step: int, messages: list[tuple[int, Message]], ack: bool | None) -> None: ...


class EventLog:
    """Protocol-level events (activations, test passes, ...) for analysis."""

    def __init__(self):
        self.events: list[tuple[int, int, str, dict]] = []

    def emit(self, step: int, node: int, kind: str, **data) -> None:
        self.events.append((step, node, kind, data))


class ProtocolFactory:
    """Creates one node state machine per label.

    Subclasses set ``name``, ``frequencies`` (channels the protocol needs),
    ``needs_in_neighbors`` (run neighbor discovery first), ``requires_ack``
    and ``period`` (runs are only cut at step boundaries that are multiples
    of the period, so wrapped rounds are never truncated).
    """

    name = "protocol"
    frequencies = 1
    needs_in_neighbors = False
    requires_ack = False
    period = 1

    def create(self, label: int, n: int, in_neighbors: frozenset[int] | None, log: EventLog) -> Node:
        raise NotImplementedError

    def config(self) -> dict:
        return {"name": self.name}

    def check_model(self, model: NetworkModel) -> None:
        if model.frequencies < self.frequencies:
            raise ValueError(f"{self.name} needs {self.frequencies} frequencies, model has {model.frequencies}")
        if self.requires_ack and not model.ack:
            raise ValueError(f"{self.name} needs the acknowledgement model (ack=True)")


# -- trace --------------------------------------------------------------------

def to_jsonable(obj: Any) -> Any:
    if obj is None or isinstance(obj, (bool, int, float, str)):
        return obj
    if isinstance(obj, (set, frozenset)):
        return sorted(to_jsonable(x) for x in obj)
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(x) for x in obj]
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in sorted(obj.items(), key=lambda kv: str(kv[0]))}
    if isinstance(obj, LoadedPayload):
        return obj.data
    if is_dataclass(obj):
        out = {"type": type(obj).__name__}
        for f in fields(obj):
            out[f.name] = to_jsonable(getattr(obj, f.name))
        return out
    if obj is SILENCE:
        return None
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def payload_rumors(payload: Any) -> frozenset[int]:
    """Original rumors physically carried by a payload (empty if none)."""
    r = getattr(payload, "rumors", None)
    return frozenset(r) if r is not None else frozenset()


@dataclass(frozen=True)
class LoadedPayload:
    """A payload read back from a JSON-lines trace."""

    data: Any

    @property
    def rumors(self) -> frozenset[int]:
        if isinstance(self.data, dict) and "rumors" in self.data:
            return frozenset(self.data["rumors"])
        return frozenset()

    def __getattr__(self, name):
        data = self.__dict__.get("data")
        if isinstance(data, dict) and name in data:
            return data[name]
        raise AttributeError(name)


class Trace:
    """Column-oriented record of a run.

    Transmissions: parallel arrays (step, freq, sender) plus payload objects.
    Deliveries: (step, freq, receiver, sender) with sender = -1 for a
    collision. Steps with no transmissions are not stored; ``record(step)``
    returns an empty StepRecord for them, so records are dense on demand.
    """

    def __init__(self, graph: Digraph, model: NetworkModel, protocol: dict | None = None):
        self.graph = graph
        self.model = model
        self.protocol = protocol or {}
        self.tx_step = array("q")
        self.tx_freq = array("q")
        self.tx_sender = array("q")
        self.tx_payload: list[Any] = []
        self.dl_step = array("q")
        self.dl_freq = array("q")
        self.dl_receiver = array("q")
        self.dl_sender = array("q")
        self.acks: dict[int, dict[int, bool]] = {}
        self.events: list[tuple[int, int, str, dict]] = []
        self.completion_step: int | None = None
        self.terminal_step: int = 0
        self.budget_hit = False
        self.deadlock = False
        self.max_steps = 0
        self.snapshots: dict[int, dict] = {}
        self.preprocessing: "Trace | None" = None
        self.in_neighbors_known: tuple[frozenset[int], ...] | None = None

    # building
    def add_transmission(self, step, freq, sender, payload):
        self.tx_step.append(step)
        self.tx_freq.append(freq)
        self.tx_sender.append(sender)
        self.tx_payload.append(payload)

    def add_delivery(self, step, freq, receiver, sender):
        self.dl_step.append(step)
        self.dl_freq.append(freq)
        self.dl_receiver.append(receiver)
        self.dl_sender.append(sender)

    # queries
    @property
    def complete(self) -> bool:
        return self.completion_step is not None

    def transmissions(self) -> Iterator[tuple[int, int, int, Any]]:
        return zip(self.tx_step, self.tx_freq, self.tx_sender, self.tx_payload)

    def deliveries(self, include_collisions: bool = False) -> Iterator[tuple[int, int, int, int]]:
        for rec in zip(self.dl_step, self.dl_freq, self.dl_receiver, self.dl_sender):
            if include_collisions or rec[3] >= 0:
                yield rec

    def payload_index(self) -> dict[tuple[int, int, int], Any]:
        return {(s, f, u): p for s, f, u, p in self.transmissions()}

    def delivered_messages(self) -> Iterator[tuple[int, int, int, int, Any]]:
        """(step, freq, sender, receiver, payload) for each successful reception."""
        index = self.payload_index()
        for s, f, v, u in self.deliveries():
            yield s, f, u, v, index[(s, f, u)]

    def events_of(self, kind: str) -> list[tuple[int, int, dict]]:
        return [(s, v, d) for s, v, k, d in self.events if k == kind]

    def steps(self) -> list[int]:
        return sorted(set(self.tx_step))

    def record(self, step: int) -> StepRecord:
        rec = StepRecord(step, acks={} if self.model.ack else None)
        for s, f, u, p in self.transmissions():
            if s == step:
                rec.transmissions.setdefault(f, {})[u] = p
        index = None
        for s, f, v, u in self.deliveries(include_collisions=True):
            if s == step:
                if u < 0:
                    rec.deliveries.setdefault(f, {})[v] = SILENCE
                else:
                    index = index or self.payload_index()
                    rec.deliveries.setdefault(f, {})[v] = Message(u, index[(s, f, u)])
        if self.model.ack:
            rec.acks = dict(self.acks.get(step, {}))
        return rec

    def records(self, dense: bool = False) -> Iterator[StepRecord]:
        by_step: dict[int, StepRecord] = {}
        for s, f, u, p in self.transmissions():
            rec = by_step.setdefault(s, StepRecord(s, acks={} if self.model.ack else None))
            rec.transmissions.setdefault(f, {})[u] = p
        index = self.payload_index()
        for s, f, v, u in self.deliveries(include_collisions=True):
            rec = by_step.setdefault(s, StepRecord(s, acks={} if self.model.ack else None))
            rec.deliveries.setdefault(f, {})[v] = SILENCE if u < 0 else Message(u, index[(s, f, u)])
        for s, acks in self.acks.items():
            by_step.setdefault(s, StepRecord(s, acks={})).acks = dict(acks)
        if not dense:
            yield from (by_step[s] for s in sorted(by_step))
            return
        for s in range(self.terminal_step + 1):
            yield by_step.get(s) or StepRecord(s, acks={} if self.model.ack else None)

    # export
    def meta(self) -> dict:
        return {
            "n": self.graph.n,
            "target": self.graph.target,
            "model": {"frequencies": self.model.frequencies, "srt": self.model.srt, "ack": self.model.ack},
            "protocol": self.protocol,
            "completion_step": self.completion_step,
            "terminal_step": self.terminal_step,
            "budget_hit": self.budget_hit,
            "deadlock": self.deadlock,
            "max_steps": self.max_steps,
        }

    def jsonl_lines(self) -> Iterator[str]:
        """Meta line, then step lines; each distinct payload is written once as a
        {"payload": index, "data": ...} line before the first step that uses it."""
        dumps = lambda obj: json.dumps(obj, sort_keys=True, separators=(",", ":"))
        yield dumps({"meta": self.meta()})
        by_object: dict[int, int] = {}
        by_text: dict[str, int] = {}
        for rec in self.records():
            fresh = []
            tx = {}
            for f, d in sorted(rec.transmissions.items()):
                row = {}
                for u, p in sorted(d.items()):
                    k = by_object.get(id(p))
                    if k is None:
                        text = dumps(_payload_json(p))
                        k = by_text.get(text)
                        if k is None:
                            k = by_text[text] = len(by_text)
                            fresh.append(f'{{"data":{text},"payload":{k}}}')
                        by_object[id(p)] = k
                    row[str(u)] = k
                tx[str(f)] = row
            yield from fresh
            dl = {str(f): {str(v): (None if m is SILENCE else m.sender) for v, m in sorted(d.items())}
                  for f, d in sorted(rec.deliveries.items())}
            acks = None if rec.acks is None else {str(u): b for u, b in sorted(rec.acks.items())}
            yield dumps({"step": rec.step, "freq": sorted(rec.transmissions), "transmitters": tx,
                         "deliveries": dl, "acks": acks})
        for s, v, kind, data in self.events:
            yield dumps({"event": kind, "step": s, "node": v, "data": to_jsonable(data)})
        for v in sorted(self.snapshots):
            yield dumps({"snapshot": v, "state": to_jsonable(self.snapshots[v])})

    def to_jsonl(self) -> str:
        return "\n".join(self.jsonl_lines()) + "\n"

    def digest(self) -> str:
        h = hashlib.sha256()
        for line in self.jsonl_lines():
            h.update(line.encode())
            h.update(b"\n")
        return h.hexdigest()

    @classmethod
    def from_jsonl(cls, text: str, graph: Digraph) -> "Trace":
        lines = [json.loads(line) for line in text.splitlines() if line.strip()]
        meta = lines[0]["meta"]
        if meta["n"] != graph.n or meta["target"] != graph.target:
            raise ValueError("trace does not belong to this graph")
        m = meta["model"]
        tr = cls(graph, NetworkModel(m["frequencies"], m["srt"], m["ack"]), meta.get("protocol"))
        tr.completion_step = meta["completion_step"]
        tr.terminal_step = meta["terminal_step"]
        tr.budget_hit = meta["budget_hit"]
        tr.deadlock = meta["deadlock"]
        tr.max_steps = meta.get("max_steps", 0)
        table: dict[int, LoadedPayload] = {}
        for obj in lines[1:]:
            if "payload" in obj:
                table[obj["payload"]] = LoadedPayload(obj["data"])
            elif "step" in obj and "transmitters" in obj:
                s = obj["step"]
                for f, d in obj["transmitters"].items():
                    for u, k in d.items():
                        tr.add_transmission(s, int(f), int(u), table[k])
                for f, d in obj["deliveries"].items():
                    for v, u in d.items():
                        tr.add_delivery(s, int(f), int(v), -1 if u is None else u)
                if obj["acks"]:
                    tr.acks[s] = {int(u): b for u, b in obj["acks"].items()}
            elif "event" in obj:
                tr.events.append((obj["step"], obj["node"], obj["event"], obj["data"]))
            elif "snapshot" in obj:
                tr.snapshots[obj["snapshot"]] = obj["state"]
        return tr


def _payload_json(p: Any) -> Any:
    data = to_jsonable(p)
    rumors = payload_rumors(p)
    if isinstance(data, dict) and "rumors" not in data and rumors:
        data = dict(data, rumors=sorted(rumors))
    return data


# -- engine -------------------------------------------------------------------

class _Discovery:
    """One RoundRobin cycle in which every node transmits only its label."""

    def __init__(self, label, n):
        self.label = label
        self.n = n
        self.rumors = {label}
        self.heard: set[int] = set()

    def next_wake(self, step):
        return self.label if step <= self.label else None

    def transmit(self, step):
        return {0: ("label", self.label)} if step == self.label else {}

    def receive(self, step, messages, ack):
        for _, m in messages:
            self.heard.add(m.sender)


def preprocess_neighbor_discovery(g: Digraph, model: NetworkModel | None = None) -> tuple[tuple[frozenset[int], ...], Trace]:
    """Run the n-step label-only RoundRobin; every node learns its in-neighbors."""
    model = model or NetworkModel()
    nodes = [_Discovery(v, g.n) for v in range(g.n)]
    trace = Trace(g, model, {"name": "neighbor-discovery"})
    _simulate(g, nodes, model, trace, max_steps=g.n, stop_on_completion=False, period=1)
    return tuple(frozenset(nd.heard) for nd in nodes), trace


def run(g: Digraph, protocol: ProtocolFactory, model: NetworkModel, max_steps: int, *,
        delivery_order_seed: int | None = None) -> Trace:
    """Simulate `protocol` on `g` until the target holds all n rumors or the budget runs out.

    Steps 0..max_steps-1 are available. When the target completes, the run
    continues to the end of the protocol's period block and stops.
    ``delivery_order_seed`` shuffles the order of receive calls and of
    messages within a call; protocols must not care.
    """
    if not validate_target_reachable(g):
        raise ValueError("target is not reachable from every node; refusing to run")
    protocol.check_model(model)
    log = EventLog()
    trace = Trace(g, model, protocol.config())
    known = None
    if protocol.needs_in_neighbors:
        known, trace.preprocessing = preprocess_neighbor_discovery(g)
        trace.in_neighbors_known = known
    nodes = [protocol.create(v, g.n, known[v] if known else None, log) for v in range(g.n)]
    _simulate(g, nodes, model, trace, max_steps=max_steps, stop_on_completion=True,
              period=protocol.period, log=log, order_seed=delivery_order_seed)
    # receive calls may be shuffled; keep each node's own event order
    trace.events = sorted(log.events, key=lambda e: (e[0], e[1]))
    for v, nd in enumerate(nodes):
        snap = getattr(nd, "snapshot", None)
        trace.snapshots[v] = snap() if snap else {"rumors": sorted(nd.rumors)}
    return trace


def _simulate(g, nodes, model, trace, *, max_steps, stop_on_completion, period, log=None, order_seed=None):
    n, t = g.n, g.target
    out = g.out_neighbors
    kappa = model.frequencies
    rng = random.Random(order_seed) if order_seed is not None else None
    trace.max_steps = max_steps

    heap: list[tuple[int, int]] = []
    wake: list[int | None] = [None] * n
    for v, nd in enumerate(nodes):
        w = nd.next_wake(0)
        wake[v] = w
        if w is not None:
            heap.append((w, v))
    heapq.heapify(heap)

    completion = None
    if stop_on_completion and len(nodes[t].rumors) == n:
        completion = 0
    stop_at = None if completion is None else 0
    last = 0

    while True:
        if stop_at is not None and (not heap or heap[0][0] > stop_at):
            last = stop_at
            break
        # drop stale heap entries
        while heap and wake[heap[0][1]] != heap[0][0]:
            heapq.heappop(heap)
        if not heap:
            if stop_at is not None:
                last = stop_at
                break
            trace.deadlock = stop_on_completion
            trace.budget_hit = stop_on_completion
            last = max_steps - 1
            break
        step = heap[0][0]
        if stop_at is not None and step > stop_at:
            last = stop_at
            break
        if step >= max_steps:
            trace.budget_hit = stop_on_completion
            last = max_steps - 1
            break
        woken = []
        while heap and heap[0][0] == step:
            _, v = heapq.heappop(heap)
            if wake[v] == step:
                woken.append(v)
                wake[v] = None
        woken.sort()

        # 1. transmission decisions (before any step-`step` delivery exists)
        tx: dict[int, dict[int, Any]] = {}
        for v in woken:
            msgs = nodes[v].transmit(step)
            if msgs:
                for f, p in msgs.items():
                    if not 0 <= f < kappa:
                        raise ValueError(f"node {v} transmitted on frequency {f}; model has {kappa}")
                tx[v] = msgs

        # 2. collision rule per (frequency, receiver)
        heard: dict[tuple[int, int], list] = {}
        for u in sorted(tx):
            for f in sorted(tx[u]):
                p = tx[u][f]
                trace.add_transmission(step, f, u, p)
                for w in out[u]:
                    slot = heard.get((f, w))
                    if slot is None:
                        heard[(f, w)] = [1, u]
                    else:
                        slot[0] += 1
        inbox: dict[int, list[tuple[int, Message]]] = {}
        succeeded: set[int] = set()
        for (f, w) in sorted(heard):
            count, u = heard[(f, w)]
            if count == 1 and (model.srt or f not in tx.get(w, ())):
                trace.add_delivery(step, f, w, u)
                inbox.setdefault(w, []).append((f, Message(u, tx[u][f])))
                succeeded.add(u)
            else:
                trace.add_delivery(step, f, w, -1)

        # 3. acknowledgement bits
        acks = None
        if model.ack and tx:
            acks = {u: (u in succeeded) for u in tx}
            trace.acks[step] = acks

        # 4. hand over deliveries
        touched_set = set(woken) | set(inbox)
        touched = sorted(touched_set)
        if rng is not None:
            rng.shuffle(touched)
        for v in touched:
            msgs = inbox.get(v, [])
            if rng is not None and len(msgs) > 1:
                msgs = msgs[:]
                rng.shuffle(msgs)
            ack = acks.get(v) if (acks is not None and v in tx) else None
            nodes[v].receive(step, msgs, ack)
        for v in touched:
            w = nodes[v].next_wake(step + 1)
            wake[v] = w
            if w is not None:
                heapq.heappush(heap, (w, v))

        if stop_on_completion and completion is None and t in touched_set and len(nodes[t].rumors) == n:
            completion = step
            stop_at = step + (period - 1 - step % period)
        last = step
        if stop_at is not None and step >= stop_at:
            break

    trace.completion_step = completion
    trace.terminal_step = last if completion is None else max(last, completion)
    if not stop_on_completion:
        trace.terminal_step = max_steps - 1


# -- model reductions ---------------------------------------------------------

class _Multiplexed:
    """Runs an inner kappa-frequency node on one frequency, one round per inner step."""

    def __init__(self, inner, kappa):
        self.inner = inner
        self.kappa = kappa
        self.label = inner.label
        self.round = None  # inner step currently being played out
        self.out: dict[int, Any] = {}
        self.inbox: list[tuple[int, Message]] = []
        self.acked: bool | None = None

    @property
    def rumors(self):
        return self.inner.rumors

    def snapshot(self):
        snap = getattr(self.inner, "snapshot", None)
        return snap() if snap else {"rumors": sorted(self.inner.rumors)}

    def next_wake(self, step):
        k = self.kappa
        if self.round is not None:
            for f in sorted(self.out):
                if self.round * k + f >= step:
                    return self.round * k + f
            return max(step, self.round * k + k - 1)
        s = -(-step // k)
        w = self.inner.next_wake(s)
        return None if w is None else w * k

    def transmit(self, step):
        k = self.kappa
        s, f = divmod(step, k)
        if self.round is None and f == 0:
            self.round = s
            self.out = dict(self.inner.transmit(s))
            self.acked = None
        if self.round == s and f in self.out:
            return {0: self.out[f]}
        return {}

    def receive(self, step, messages, ack):
        k = self.kappa
        s, f = divmod(step, k)
        if self.round is None:
            self.round = s
            self.out = {}
            self.acked = None
        self.inbox.extend((f, m) for _, m in messages)
        if ack is not None:
            self.acked = bool(self.acked) or ack
        if f == k - 1:
            inbox, acked = self.inbox, self.acked
            self.round, self.out, self.inbox, self.acked = None, {}, [], None
            self.inner.receive(s, inbox, acked)


class MultiplexedFactory(ProtocolFactory):
    def __init__(self, inner: ProtocolFactory, kappa: int):
        self.inner = inner
        self.kappa = kappa
        self.name = f"{inner.name}+mux{kappa}"
        self.frequencies = 1
        self.needs_in_neighbors = inner.needs_in_neighbors
        self.requires_ack = inner.requires_ack
        self.period = inner.period * kappa

    def create(self, label, n, in_neighbors, log):
        return _Multiplexed(self.inner.create(label, n, in_neighbors, log), self.kappa)

    def config(self):
        return {"name": self.name, "inner": self.inner.config(), "kappa": self.kappa}

    def check_model(self, model):
        super().check_model(model)
        if self.inner.requires_ack and not model.ack:
            raise ValueError("inner protocol needs acknowledgements")


def multiplex_to_single_frequency(protocol: ProtocolFactory, kappa: int) -> ProtocolFactory:
    if kappa < 1:
        raise ValueError("kappa must be >= 1")
    if kappa < protocol.frequencies:
        raise ValueError(f"{protocol.name} uses {protocol.frequencies} frequencies, kappa={kappa}")
    if kappa == 1:
        return protocol
    return MultiplexedFactory(protocol, kappa)


class _SrtStripped:
    """Replaces each inner step by a segment of |wrap| sub-steps.

    At sub-step i the node transmits its inner message iff it belongs to
    S_i, and listens otherwise.
    """

    def __init__(self, inner, wrap: SelectorFamily):
        self.inner = inner
        self.wrap = wrap
        self.seg = wrap.length
        self.label = inner.label
        self.segment = None
        self.out: dict[int, Any] = {}
        self.inbox: dict[int, Message] = {}
        self.acked: bool | None = None
        self.mine = [i for i in range(self.seg) if self.label in wrap.sets[i]]

    @property
    def rumors(self):
        return self.inner.rumors

    def snapshot(self):
        snap = getattr(self.inner, "snapshot", None)
        return snap() if snap else {"rumors": sorted(self.inner.rumors)}

    def next_wake(self, step):
        L = self.seg
        if self.segment is not None:
            base = self.segment * L
            if self.out:
                for i in self.mine:
                    if base + i >= step:
                        return base + i
            return max(step, base + L - 1)
        s = -(-step // L)
        w = self.inner.next_wake(s)
        return None if w is None else w * L

    def transmit(self, step):
        s, i = divmod(step, self.seg)
        if self.segment is None and i == 0:
            self.segment = s
            self.out = dict(self.inner.transmit(s))
            self.acked = None
        if self.segment == s and self.out and self.label in self.wrap.sets[i]:
            return {0: self.out[0]}
        return {}

    def receive(self, step, messages, ack):
        s, i = divmod(step, self.seg)
        if self.segment is None:
            self.segment = s
            self.out = {}
            self.acked = None
        for _, m in messages:
            self.inbox.setdefault(m.sender, m)
        if ack is not None:
            self.acked = bool(self.acked) or ack
        if i == self.seg - 1:
            inbox = [(0, self.inbox[u]) for u in sorted(self.inbox)]
            acked = self.acked
            self.segment, self.out, self.inbox, self.acked = None, {}, {}, None
            self.inner.receive(s, inbox, acked)


class SrtStrippedFactory(ProtocolFactory):
    def __init__(self, inner: ProtocolFactory, wrap: SelectorFamily):
        self.inner = inner
        self.wrap = wrap
        self.name = f"{inner.name}+nosrt"
        self.frequencies = 1
        self.needs_in_neighbors = inner.needs_in_neighbors
        self.requires_ack = inner.requires_ack
        self.period = inner.period * wrap.length

    def create(self, label, n, in_neighbors, log):
        return _SrtStripped(self.inner.create(label, n, in_neighbors, log), self.wrap)

    def config(self):
        return {"name": self.name, "inner": self.inner.config(), "segment": self.wrap.length}


def strip_srt(protocol: ProtocolFactory, wrap_selector: SelectorFamily) -> ProtocolFactory:
    if protocol.frequencies != 1:
        raise ValueError("strip_srt needs a single-frequency protocol; multiplex first")
    if wrap_selector.kind != "strong" or wrap_selector.k < 2:
        raise ValueError("strip_srt needs a strong (n,2)-selector")
    return SrtStrippedFactory(protocol, wrap_selector)


# -- equivalence checks -------------------------------------------------------

def _delivery_set(trace: Trace, time_map: Callable[[int], int] | None) -> set[tuple[int, int, int, str]]:
    out = set()
    encoded: dict[int, str] = {}
    for s, f, u, v, p in trace.delivered_messages():
        step = time_map(s) if time_map else s
        key = encoded.get(id(p))
        if key is None:
            key = encoded[id(p)] = json.dumps(to_jsonable(p), sort_keys=True)
        out.add((step, u, v, key))
    return out


@dataclass(frozen=True)
class EquivalenceVerdict:
    ok: bool
    equal: bool
    missing: tuple = ()
    extra_count: int = 0


def delivery_equivalence(t1: Trace, t2: Trace, time_map: Callable[[int], int] | None = None, *,
                         horizon: int | str | None = None) -> EquivalenceVerdict:
    """Pass iff every (step, sender, receiver, payload) delivery of t1 appears in t2 after mapping t2's steps.

    Runs stop once the target completes, so two runs may cover different
    time spans. ``horizon`` restricts both sets to steps <= horizon;
    "common" uses the last step both runs reached.
    """
    a = _delivery_set(t1, None)
    b = _delivery_set(t2, time_map)
    if horizon == "common":
        end2 = time_map(t2.terminal_step) if time_map else t2.terminal_step
        horizon = min(t1.terminal_step, end2)
    if horizon is not None:
        a = {x for x in a if x[0] <= horizon}
        b = {x for x in b if x[0] <= horizon}
    missing = a - b
    return EquivalenceVerdict(ok=not missing, equal=a == b, missing=tuple(sorted(missing))[:10],
                              extra_count=len(b - a))


def srt_segment_superset(stripped: Trace, inner_graph: Digraph | None = None) -> EquivalenceVerdict:
    """Check each segment of an SRT-stripped run against the SRT collision rule.

    For every segment, the inner transmissions are read off the trace and the
    deliveries the simultaneous-receive model would produce for those same
    transmissions are computed; the segment's actual deliveries must contain
    them.
    """
    g = inner_graph or stripped.graph
    seg = stripped.protocol.get("segment")
    if not seg:
        raise ValueError("trace was not produced by an SRT-stripped protocol")
    sent: dict[int, dict[int, Any]] = {}
    for s, f, u, p in stripped.transmissions():
        sent.setdefault(s // seg, {})[u] = p
    got: dict[int, set[tuple[int, int]]] = {}
    for s, f, v, u in stripped.deliveries():
        got.setdefault(s // seg, set()).add((u, v))
    missing = []
    for tau, senders in sent.items():
        for u in senders:
            for v in g.out_neighbors[u]:
                rivals = sum(1 for w in g.in_neighbors[v] if w in senders)
                if rivals == 1 and (u, v) not in got.get(tau, ()):
                    missing.append((tau, u, v))
    return EquivalenceVerdict(ok=not missing, equal=False, missing=tuple(missing[:10]))
