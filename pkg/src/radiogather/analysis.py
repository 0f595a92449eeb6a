"""Trace analysis: completion, critical paths, invariant checks and time bounds."""
from __future__ import annotations

import csv
import io
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Iterable

import numpy as np

from .digraph import Digraph, compute_scc, condensation_depth, distances_to_target, layer_decomposition
from .protocols.common import BetaSchedule
from .protocols.gossip import make_gossip
from .selectors import log2_ceil
from .simulator import Trace, payload_rumors


@dataclass
class CheckResult:
    name: str
    ok: bool
    violations: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.ok

    def __str__(self) -> str:
        head = f"{self.name}: {'ok' if self.ok else 'FAIL'}"
        if self.violations:
            head += f" ({len(self.violations)} violations, first: {self.violations[0]})"
        return head


# -- completion -----------------------------------------------------------------

def target_rumor_timeline(trace: Trace) -> list[tuple[int, int]]:
    """(step, |rumors at t|) after every step in which t learned something new."""
    t = trace.graph.target
    known = {t}
    out = []
    index = trace.payload_index()
    mine = sorted((s, f, u) for s, f, v, u in trace.deliveries() if v == t)
    for s, f, u in mine:
        p = index[(s, f, u)]
        before = len(known)
        known |= payload_rumors(p)
        if len(known) != before:
            if out and out[-1][0] == s:
                out[-1] = (s, len(known))
            else:
                out.append((s, len(known)))
    return out


def completion_time(trace: Trace) -> int | None:
    """First step after which t holds all n rumors, rebuilt from deliveries alone."""
    n = trace.graph.n
    if n == 1:
        return 0
    for s, size in target_rumor_timeline(trace):
        if size == n:
            return s
    return None


def rumor_holdings(trace: Trace, before: Iterable[int]) -> dict[int, list[set[int]]]:
    """Rumor sets of all nodes at the start of each step in `before`."""
    cuts = sorted(set(before))
    n = trace.graph.n
    held = [{v} for v in range(n)]
    out = {}
    msgs = sorted(trace.delivered_messages(), key=lambda r: r[0])
    i = 0
    for cut in cuts:
        while i < len(msgs) and msgs[i][0] < cut:
            _, _, _, v, p = msgs[i]
            held[v] |= payload_rumors(p)
            i += 1
        out[cut] = [set(h) for h in held]
    return out


# -- AcyclicGather ----------------------------------------------------------------

def base_config(trace: Trace) -> tuple[dict, int]:
    """Config of the innermost protocol and the outer steps one inner step takes."""
    cfg, factor = trace.protocol, 1
    while "inner" in cfg:
        factor *= cfg.get("kappa") or cfg.get("segment") or 1
        cfg = cfg["inner"]
    return cfg, factor


def _beta(trace: Trace) -> BetaSchedule:
    cfg = base_config(trace)[0]
    if "beta" not in cfg:
        raise ValueError(f"protocol {cfg.get('name')!r} has no activity schedule")
    b = cfg["beta"]
    lengths = tuple(b[j + 1] - b[j] for j in range(cfg["theta"] - 1))
    return BetaSchedule(trace.graph.n, cfg["theta"], lengths)


def activations(trace: Trace) -> dict[int, dict]:
    """First activation event of every node (ArbGather: the ACG activation)."""
    out = {}
    for s, v, d in trace.events_of("activate"):
        if v not in out:
            out[v] = dict(d, step=s)
    return out


def _memo(fn):
    """Cache a per-trace query on the trace object (traces are not mutated after a run)."""
    def wrapper(trace):
        cache = trace.__dict__.setdefault("_analysis_cache", {})
        key = (fn.__name__, len(trace.dl_step))
        if key not in cache:
            cache[key] = fn(trace)
        return cache[key]
    wrapper.__name__, wrapper.__doc__ = fn.__name__, fn.__doc__
    return wrapper


@_memo
def first_reach(trace: Trace) -> dict[tuple[int, int], int]:
    """Step of the first successful delivery from u to v, for every pair that had one."""
    out: dict[tuple[int, int], int] = {}
    for s, f, v, u in trace.deliveries():
        key = (u, v)
        if key not in out or s < out[key]:
            out[key] = s
    return out


@_memo
def first_rws(trace: Trace) -> dict[tuple[int, int], int]:
    """rws carried by the first message u got through to v (largest if several in that step)."""
    out: dict[tuple[int, int], tuple[int, int]] = {}
    for s, f, u, v, p in trace.delivered_messages():
        rws = getattr(p, "rws", None)
        if rws is None:
            continue
        key = (u, v)
        if key not in out or (s, -rws) < (out[key][0], -out[key][1]):
            out[key] = (s, rws)
    return {k: r for k, (_, r) in out.items()}


class TraceInconsistency(RuntimeError):
    """A trace violates a relation the engine guarantees; indicates a bug."""


def critical_path(trace: Trace) -> list[int]:
    """Activation chain v_0 -> ... -> v_p = t, built backwards from t.

    Each v_a is the in-neighbor recorded as the last to reach v_{a+1}, so
    alpha(v_{a+1}) = rws1(v_a, v_{a+1}); the chain ends at a source. If the
    run completed before t itself activated, the chain of the activated
    in-neighbor with the longest chain is used and t appended.
    """
    g = trace.graph
    t = g.target
    act = activations(trace)
    rws = first_rws(trace)

    def chain(v):
        path = [v]
        while True:
            src = act.get(path[-1], {}).get("source")
            if src is None:
                break
            if src in path:
                raise TraceInconsistency(f"activation cycle through {src}")
            w = path[-1]
            if rws.get((src, w)) != act[w]["alpha"]:
                raise TraceInconsistency(f"alpha({w}) != rws1({src},{w})")
            path.append(src)
        if g.in_neighbors[path[-1]]:
            raise TraceInconsistency(f"chain stops at non-source {path[-1]}")
        return path[::-1]

    if g.n == 1:
        return [t]
    if t in act and act[t].get("source") is not None:
        return chain(t)
    best: list[int] = []
    for u in sorted(g.in_neighbors[t]):
        if u in act:
            c = chain(u)
            if len(c) > len(best):
                best = c
    return best + [t]


def acyclic_bound(trace: Trace) -> int:
    """beta_theta * (critical-path hops + 1)."""
    hops = len(critical_path(trace)) - 1
    return _beta(trace).period * (hops + 1)


def stage_increments(trace: Trace, interval: tuple[int, int] | None = None) -> int:
    """Stage-index increments (-1 -> 0 -> ... -> theta) at steps in [lo, hi), summed over nodes.

    Node v enters stage j at alpha(v) + beta_j. Default interval: the whole run.
    """
    beta = _beta(trace)
    lo, hi = interval if interval is not None else (0, trace.terminal_step + 1)
    total = 0
    for v, d in activations(trace).items():
        a = d["alpha"]
        total += sum(1 for j in range(beta.theta + 1) if lo <= a + beta.beta[j] < hi)
    return total


def check_stage_increments(trace: Trace) -> CheckResult:
    beta = _beta(trace)
    total = stage_increments(trace)
    limit = (beta.theta + 1) * trace.graph.n
    return CheckResult("stage-increment budget", total <= limit, [] if total <= limit else [total],
                       {"increments": total, "limit": limit})


def check_frequency_discipline(trace: Trace) -> CheckResult:
    """In stage j a node transmits only on ACY frequency j and only during its activity period.

    For ArbGather, SCC frequencies (>= theta) may only be used before the ACG activation.
    """
    beta = _beta(trace)
    theta = beta.theta
    act = activations(trace)
    bad = []
    for s, f, u, _ in trace.transmissions():
        a = act.get(u, {}).get("alpha")
        if f >= theta:
            if a is not None and s >= a:
                bad.append((s, f, u, "scc frequency after switch"))
            continue
        if a is None:
            bad.append((s, f, u, "transmitted before activation"))
            continue
        j = beta.stage(s - a)
        if j != f:
            bad.append((s, f, u, f"stage {j}"))
    return CheckResult("frequency discipline", not bad, bad)


def check_activation_after_in_neighbors(trace: Trace) -> CheckResult:
    """A non-source activates only once every in-neighbor reached it, at the rws of the last one."""
    g = trace.graph
    reach = first_reach(trace)
    rws = first_rws(trace)
    bad = []
    for v, d in activations(trace).items():
        nbrs = g.in_neighbors[v]
        if not nbrs:
            if d["alpha"] != 0:
                bad.append((v, "source with nonzero alpha"))
            continue
        heard = d.get("heard_at")
        times = [reach.get((u, v)) for u in nbrs]
        if any(x is None or x > heard for x in times):
            bad.append((v, "activated before hearing every in-neighbor"))
            continue
        if max(times) != heard:
            bad.append((v, "activation step is not the last first-reach"))
            continue
        last = [u for u in nbrs if reach[(u, v)] == heard]
        if d["source"] not in last:
            bad.append((v, f"source {d['source']} did not reach v last"))
        elif d["alpha"] != rws[(d["source"], v)] or d["alpha"] != max(rws[(u, v)] for u in last):
            bad.append((v, "alpha is not the largest rws among the last arrivals"))
    return CheckResult("activation after all in-neighbors", not bad, bad)


def check_acyclic_liveness(trace: Trace) -> CheckResult:
    """Nodes whose whole activity period fits in the run reached every out-neighbor during it."""
    g = trace.graph
    beta = _beta(trace)
    reach = first_reach(trace)
    bad = []
    for v, d in activations(trace).items():
        a = d["alpha"]
        if a + beta.period - 1 > trace.terminal_step:
            continue
        for w in g.out_neighbors[v]:
            s = reach.get((v, w))
            if s is None or s >= a + beta.period:
                bad.append((v, w))
    return CheckResult("acyclic liveness", not bad, bad)


def check_late_messages(trace: Trace) -> CheckResult:
    late = trace.events_of("late_message")
    return CheckResult("no late messages", not late, late)


# -- ArbGather ------------------------------------------------------------------

def frame_length(trace: Trace, j: int) -> int:
    cfg = base_config(trace)[0]
    return make_gossip(cfg.get("gossip", "simple")).frame_length(j, trace.graph.n)


def check_arb_safety(trace: Trace, scc=None) -> CheckResult:
    """Every certified component (test pass or adoption) equals the true sc-component."""
    scc = scc or compute_scc(trace.graph)
    bad = []
    for kind in ("scc_pass", "scc_adopt"):
        for s, v, d in trace.events_of(kind):
            truth = scc.component(v)
            if frozenset(d["component"]) != truth:
                bad.append((kind, s, v, sorted(d["component"]), sorted(truth)))
    passes = len(trace.events_of("scc_pass")) + len(trace.events_of("scc_adopt"))
    return CheckResult("arb safety", not bad, bad, {"certifications": passes})


def check_arb_rumor_completeness(trace: Trace, scc=None) -> CheckResult:
    """At a switch, v holds its whole component plus every rumor delivered into it on ACY frequencies
    before the even frame that certified it."""
    g = trace.graph
    scc = scc or compute_scc(g)
    theta = base_config(trace)[0]["theta"]
    acy_in: dict[frozenset, list[tuple[int, frozenset]]] = defaultdict(list)
    for s, f, u, v, p in trace.delivered_messages():
        if f < theta:
            acy_in[scc.component(v)].append((s, payload_rumors(p)))
    bad = []
    for s, v, d in trace.events_of("scc_pass"):
        comp = scc.component(v)
        start = d["alpha_acy"] - 2 * frame_length(trace, d["j"])
        need = set(comp)
        for step, rumors in acy_in[comp]:
            if step < start:
                need |= rumors
        missing = need - set(d["rumors"])
        if missing:
            bad.append((s, v, sorted(missing)))
    for s, v, d in trace.events_of("scc_adopt"):
        missing = set(scc.component(v)) - set(d["rumors"])
        if missing:
            bad.append((s, v, sorted(missing)))
    return CheckResult("arb rumor completeness", not bad, bad)


def arb_bound(trace: Trace, frame_factor: int = 2) -> int:
    """frame_factor * sum_A T_SCC(j_A) + beta_theta * (condensation depth + 1).

    j_A = ceil(log2 |A|). The default charges one double frame per
    component. Frame alignment can add up to another 2 T per component in
    the worst case (frame_factor=4 is the safe version); in practice the
    component's predecessors finish early enough that 2 suffices.
    """
    g = trace.graph
    scc = compute_scc(g)
    total = 0
    for comp in scc.components:
        j = math.ceil(math.log2(len(comp))) if len(comp) > 1 else 0
        total += frame_length(trace, j)
    return frame_factor * total + _beta(trace).period * (condensation_depth(g, scc) + 1)


# -- with-ack protocol ----------------------------------------------------------

def ack_bound(n: int, c_h: int) -> int:
    """4 * c_h * n * ceil(log2 n)."""
    return 4 * c_h * n * log2_ceil(n)


def active_intervals(trace: Trace) -> dict[int, list[tuple[int, int | None]]]:
    """Per node, half-open step ranges [from, to) during which it was active.

    An event at step s changes the state from step s+1 on; "to" is None
    while still active at the end of the run.
    """
    out: dict[int, list[tuple[int, int | None]]] = defaultdict(list)
    state: dict[int, int | None] = {}
    for s, v, kind, _ in trace.events:
        if kind == "activate" and state.get(v) is None:
            state[v] = s + 1
        elif kind == "deactivate" and state.get(v) is not None:
            out[v].append((state[v], s + 1))
            state[v] = None
    for v, start in state.items():
        if start is not None:
            out[v].append((start, None))
    return out


def layer_times(g: Digraph, c_h: int) -> list[int]:
    """tau_i = 4 c_h L * sum_{p<i} |B_p| for i = 0..r."""
    layers = layer_decomposition(g).layers
    L = log2_ceil(g.n)
    taus, acc = [], 0
    for b in layers:
        taus.append(4 * c_h * acc * L)
        acc += len(b)
    return taus


def check_layer_claim(trace: Trace, c_h: int | None = None) -> CheckResult:
    """Layer claim of the ack protocol, for every layer index i.

    (i) every node of B_0..B_{i-1} is dormant at all steps >= tau_i (that the run reached);
    (ii) at step tau_i every rumor is held by some node of B_i..B_r.
    """
    g = trace.graph
    c_h = c_h if c_h is not None else base_config(trace)[0]["c_h"]
    dec = layer_decomposition(g)
    taus = layer_times(g, c_h)
    intervals = active_intervals(trace)
    end = trace.terminal_step
    bad = []
    earlier: set[int] = set()
    reachable_taus = [tau for tau in taus if tau <= end]
    holdings = rumor_holdings(trace, reachable_taus)
    for i, (tau, layer) in enumerate(zip(taus, dec.layers)):
        if tau > end:
            break
        for v in earlier:
            for lo, hi in intervals.get(v, []):
                if hi is None or hi > tau:
                    bad.append(("i", i, tau, v, lo))
                    break
        held = holdings[tau]
        later = set().union(*dec.layers[i:])
        covered = set().union(*(held[v] for v in later))
        missing = set(range(g.n)) - covered
        if missing:
            bad.append(("ii", i, tau, sorted(missing)[:5]))
        earlier |= layer
    return CheckResult("layer claim", not bad, bad, {"taus": taus, "layers": [len(b) for b in dec.layers]})


def activation_counts(trace: Trace) -> dict[int, int]:
    counts: dict[int, int] = defaultdict(int)
    for _, v, _ in trace.events_of("activate"):
        counts[v] += 1
    return dict(counts)


# -- RoundRobin -------------------------------------------------------------------

def roundrobin_bound(g: Digraph) -> int:
    """n * (D + 1), D the largest BFS distance to t."""
    d = distances_to_target(g)
    return g.n * (max(x for x in d if x is not None) + 1)


# -- generic checks -----------------------------------------------------------------

def check_completion(trace: Trace) -> CheckResult:
    """The engine's completion step agrees with the one rebuilt from deliveries.

    Wrapped protocols hand deliveries to the inner node at the end of a
    round, so there the engine may only report completion later.
    """
    rebuilt = completion_time(trace)
    c = trace.completion_step
    wrapped = base_config(trace)[1] > 1
    ok = rebuilt is not None and c is not None and (rebuilt <= c if wrapped else rebuilt == c)
    return CheckResult("completion", ok, [] if ok else [(c, rebuilt)], {"completion_step": c})


def check_bound(trace: Trace, bound: int, name: str = "time bound") -> CheckResult:
    c = trace.completion_step
    ok = c is not None and c <= bound
    return CheckResult(name, ok, [] if ok else [(c, bound)], {"bound": bound})


def _inner_bound(trace: Trace) -> int | None:
    cfg = base_config(trace)[0]
    name = cfg.get("name", "")
    g = trace.graph
    if name == "roundrobin":
        return roundrobin_bound(g)
    if name == "acyclic-gather":
        return acyclic_bound(trace)
    if name == "arb-gather":
        return arb_bound(trace)
    if name == "ack-gather":
        return ack_bound(g.n, cfg["c_h"])
    return None


def bound_for(trace: Trace) -> int | None:
    """The protocol's completion bound, in outer steps for wrapped runs."""
    b = _inner_bound(trace)
    factor = base_config(trace)[1]
    return None if b is None else (b + 1) * factor - 1


def verify_trace(trace: Trace) -> list[CheckResult]:
    """All checks that apply to the protocol that produced `trace`.

    Runs through model reductions get the completion, bound and (ArbGather)
    safety checks; the per-step invariants refer to inner steps and are
    checked on direct runs.
    """
    cfg, factor = base_config(trace)
    name = cfg.get("name", "")
    g = trace.graph
    checks = [check_completion(trace)]
    bound = bound_for(trace)
    if name == "arb-gather":
        scc = compute_scc(g)
        checks.append(check_arb_safety(trace, scc))
    if factor == 1:
        if name == "acyclic-gather":
            checks += [check_frequency_discipline(trace), check_activation_after_in_neighbors(trace),
                       check_stage_increments(trace), check_acyclic_liveness(trace), check_late_messages(trace)]
        elif name == "arb-gather":
            checks += [check_arb_rumor_completeness(trace, scc), check_frequency_discipline(trace)]
        elif name == "ack-gather":
            checks.append(check_layer_claim(trace))
    if bound is not None:
        checks.append(check_bound(trace, bound))
    return checks


# -- reports -------------------------------------------------------------------------

REPORT_COLUMNS = ("run_id", "protocol", "model", "n", "seed", "completion_step", "budget",
                  "bound_value", "margin", "verdicts")


@dataclass
class RunReport:
    run_id: str
    protocol: str
    model: str
    n: int
    seed: int
    completion_step: int | None
    budget: int
    bound_value: int | None
    verdicts: dict[str, bool]
    digest: str = ""

    @property
    def margin(self) -> int | None:
        if self.completion_step is None or self.bound_value is None:
            return None
        return self.bound_value - self.completion_step

    @property
    def ok(self) -> bool:
        return self.completion_step is not None and all(self.verdicts.values())

    def row(self) -> dict:
        return {
            "run_id": self.run_id, "protocol": self.protocol, "model": self.model, "n": self.n,
            "seed": self.seed, "completion_step": "" if self.completion_step is None else self.completion_step,
            "budget": self.budget, "bound_value": "" if self.bound_value is None else self.bound_value,
            "margin": "" if self.margin is None else self.margin,
            "verdicts": ";".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in sorted(self.verdicts.items())),
        }

    def to_json(self) -> str:
        d = asdict(self)
        d["margin"] = self.margin
        return json.dumps(d, sort_keys=True)


def make_report(run_id: str, trace: Trace, seed: int, budget: int, checks: list[CheckResult] | None = None) -> RunReport:
    checks = verify_trace(trace) if checks is None else checks
    return RunReport(run_id, trace.protocol.get("name", "?"), trace.model.describe(), trace.graph.n, seed,
                     trace.completion_step, budget, bound_for(trace), {c.name: c.ok for c in checks},
                     trace.digest())


def reports_to_csv(reports: Iterable[RunReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=REPORT_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.row())
    return buf.getvalue()


def loglog_slope(ns: Iterable[float], values: Iterable[float]) -> float:
    """Least-squares slope of log(value) against log(n)."""
    x = np.log(np.asarray(list(ns), dtype=float))
    y = np.log(np.asarray(list(values), dtype=float))
    if len(x) < 2:
        raise ValueError("need at least two points")
    return float(np.polyfit(x, y, 1)[0])


