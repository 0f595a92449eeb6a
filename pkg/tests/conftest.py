from __future__ import annotations

from radiogather.digraph import Digraph
from radiogather.simulator import EventLog, NetworkModel, ProtocolFactory, Trace, _simulate


class ScriptedNode:
    """Transmits exactly what the script says; records what it hears."""

    def __init__(self, label, script):
        self.label = label
        self.script = script  # {step: {freq: payload}}
        self.rumors = {label}
        self.heard = {}
        self.acks = {}

    def next_wake(self, step):
        later = [s for s in self.script if s >= step]
        return min(later) if later else None

    def transmit(self, step):
        return dict(self.script.get(step, {}))

    def receive(self, step, messages, ack):
        self.heard.setdefault(step, []).extend((f, m.sender, m.payload) for f, m in messages)
        if ack is not None:
            self.acks[step] = ack


def run_script(n, edges, scripts, model=None, target=None, steps=None):
    """Run scripted nodes on a graph; returns (trace, nodes)."""
    model = model or NetworkModel()
    g = Digraph(n, frozenset(edges), n - 1 if target is None else target)
    nodes = [ScriptedNode(v, scripts.get(v, {})) for v in range(n)]
    last = max((s for sc in scripts.values() for s in sc), default=0)
    trace = Trace(g, model, {"name": "scripted"})
    _simulate(g, nodes, model, trace, max_steps=steps or last + 1, stop_on_completion=False, period=1,
              log=EventLog())
    return trace, nodes


class ScriptedFactory(ProtocolFactory):
    name = "scripted"

    def __init__(self, scripts, frequencies=1):
        self.scripts = scripts
        self.frequencies = frequencies

    def create(self, label, n, in_neighbors, log):
        return ScriptedNode(label, self.scripts.get(label, {}))
