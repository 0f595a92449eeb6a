import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radiogather import analysis
from radiogather.digraph import Digraph, compute_scc, generate
from radiogather.protocols import (AcyclicGatherWithAck, ArbGather, BetaSchedule, BrokenGossip, SimpleGossip,
                                   acyclic_gather, acyclic_gather_with_ack, arb_gather, check_gossip_contract,
                                   make_gossip, roundrobin_gather, run_tests, scc_class_count, theta_for)
from radiogather.protocols.arb import Vector
from radiogather.selectors import build_strong_ladder
from radiogather.simulator import EventLog, NetworkModel, Trace, _simulate, run


def model_for(proto):
    return NetworkModel(frequencies=proto.frequencies, ack=proto.requires_ack)


@pytest.mark.parametrize("n, theta", [(1, 2), (2, 3), (4, 3), (16, 3), (64, 4), (256, 5), (1024, 6)])
def test_theta(n, theta):
    assert theta_for(n) == theta


def test_scc_classes_cover_n():
    for n in range(1, 300):
        c = scc_class_count(n)
        assert 2 ** (c - 1) >= n
        assert c == 1 or 2 ** (c - 2) < n


def test_beta_schedule():
    b = BetaSchedule(10, 3, (4, 6))
    assert b.beta == (0, 4, 10, 20)
    assert b.period == 20
    assert [b.stage(x) for x in (-1, 0, 3, 4, 9, 10, 19, 20)] == [-1, 0, 0, 1, 1, 2, 2, 3]
    with pytest.raises(ValueError):
        BetaSchedule(10, 3, (4,))


# -- RoundRobin ---------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(st.integers(1, 20), st.integers(0, 10**6))
def test_roundrobin_within_bound(n, seed):
    g = generate("random_digraph", n, {"density": 0.2}, seed)
    trace = run(g, roundrobin_gather(), NetworkModel(), 10**6)
    assert trace.complete
    assert trace.completion_step <= analysis.roundrobin_bound(g)


def test_roundrobin_never_collides():
    g = generate("random_digraph", 15, {"density": 0.5}, 0)
    trace = run(g, roundrobin_gather(), NetworkModel(), 10**5)
    assert all(u >= 0 for *_, u in trace.deliveries(include_collisions=True))


# -- AcyclicGather --------------------------------------------------------------

def test_acyclic_path_oracle():
    # 0 -> 1 -> 2: node 0 is alone in the full-set stage-0 selector, so 1 hears it
    # at step 0 and wakes at rws = beta_1; t = 2 gets everything at beta_1.
    g = generate("path", 3)
    proto = acyclic_gather(3)
    trace = run(g, proto, model_for(proto), 10**5)
    b1 = proto.beta.beta[1]
    assert trace.completion_step == b1
    assert analysis.critical_path(trace) == [0, 1, 2]
    assert analysis.activations(trace)[1]["alpha"] == b1


def test_acyclic_stages_use_their_frequency():
    g = generate("layered_dag", 40, seed=2)
    proto = acyclic_gather(40)
    trace = run(g, proto, model_for(proto), 10**7)
    assert trace.complete
    for check in analysis.verify_trace(trace):
        assert check.ok, str(check)


def test_acyclic_deadlocks_on_cycle():
    g = Digraph(3, frozenset({(0, 1), (1, 0), (1, 2)}), 2)
    proto = acyclic_gather(3)
    trace = run(g, proto, model_for(proto), 10**4)
    assert not trace.complete
    assert trace.deadlock  # nobody is ever activated, so nothing is scheduled
    assert analysis.activations(trace) == {}


def test_acyclic_cycle_with_source_exhausts():
    # the source runs its period, then everyone is silent and t never completes
    g = Digraph(4, frozenset({(0, 1), (1, 2), (2, 1), (2, 3)}), 3)
    proto = acyclic_gather(4)
    trace = run(g, proto, model_for(proto), 10**4)
    assert not trace.complete
    assert trace.budget_hit


def test_acyclic_without_srt_uses_stronger_selectors():
    base = acyclic_gather(16)
    stronger = acyclic_gather(16, srt=False)
    assert [f.k for f in stronger.ladder.families] == [f.k + 1 for f in base.ladder.families]


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 30), st.integers(0, 10**6))
def test_acyclic_gathers_on_random_dags(n, seed):
    g = generate("random_dag", n, {"density": 0.25}, seed)
    proto = acyclic_gather(n, seed=seed)
    trace = run(g, proto, model_for(proto), 10**7)
    assert trace.complete
    assert trace.completion_step <= analysis.acyclic_bound(trace)
    assert analysis.check_activation_after_in_neighbors(trace).ok


# -- gossip plug-ins -------------------------------------------------------------

def test_simple_gossip_schedule():
    gsp = SimpleGossip()
    assert gsp.frame_length(3, 10) == 80
    assert [gsp.transmits(4, 0, 0, o, 10) for o in (3, 4, 14)] == [False, True, True]
    assert gsp.next_transmit(4, 0, 5, 10) == 14


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 9), st.integers(0, 10**6), st.integers(0, 3))
def test_simple_gossip_contract(k, seed, extra):
    n = k + extra
    sizes = [k] + [1] * extra
    g = generate("scc_chain", n, {"sizes": sizes[::-1], "density": 0.1}, seed)
    comp = max(compute_scc(g).components, key=len)
    j = max(0, (len(comp) - 1).bit_length())
    assert check_gossip_contract(SimpleGossip(), g, j, comp).ok


def test_contract_can_fail_for_broken_gossip():
    g = generate("path", 1)
    ring = Digraph(8, frozenset((i, (i + 1) % 8) for i in range(8)), 0)
    results = [check_gossip_contract(BrokenGossip(seed), ring, 3).ok for seed in range(10)]
    assert not all(results)
    assert g.n == 1


def test_contract_preconditions():
    g = generate("path", 3)
    with pytest.raises(ValueError, match="strongly connected"):
        check_gossip_contract(SimpleGossip(), g, 2)
    ring = Digraph(5, frozenset((i, (i + 1) % 5) for i in range(5)), 0)
    with pytest.raises(ValueError, match="size class"):
        check_gossip_contract(SimpleGossip(), ring, 2)


def test_make_gossip():
    assert isinstance(make_gossip("broken", 3), BrokenGossip)
    with pytest.raises(ValueError):
        make_gossip("flood")


# -- ArbGather ---------------------------------------------------------------------

def vec(label, comp, ins=(), acy=(), rumors=None):
    comp = frozenset(comp)
    return Vector(label, comp, frozenset(ins), frozenset(acy), frozenset(rumors or {label}))


def test_tests_pass_on_closed_component():
    comp = {0, 1}
    vectors = {0: vec(0, comp, {1}), 1: vec(1, comp, {0, 5}, {5})}
    assert run_tests(0, frozenset(comp), vectors) == (True, True, True)


def test_tests_reject_open_in_neighbor():
    comp = {0, 1}
    vectors = {0: vec(0, comp, {1}), 1: vec(1, comp, {0, 5})}
    assert run_tests(0, frozenset(comp), vectors)[2] is False


def test_tests_reject_disagreement_and_missing_vectors():
    vectors = {0: vec(0, {0, 1}, {1}), 1: vec(1, {0, 1, 2}, {0})}
    assert run_tests(0, frozenset({0, 1}), vectors)[0] is False
    assert run_tests(0, frozenset({0, 1}), {0: vectors[0]}) == (False, False, False)
    extra = {0: vectors[0], 1: vec(1, {0, 1}, {0}), 7: vec(7, {7})}
    assert run_tests(0, frozenset({0, 1}), extra)[1] is False


def run_uncut(g, proto, steps):
    """Run without stopping at completion, so that certification always happens."""
    log = EventLog()
    nodes = [proto.create(v, g.n, g.in_neighbors[v], log) for v in range(g.n)]
    trace = Trace(g, model_for(proto), proto.config())
    _simulate(g, nodes, model_for(proto), trace, max_steps=steps, stop_on_completion=False, period=1, log=log)
    trace.events = sorted(log.events, key=lambda e: (e[0], e[1]))
    return trace, nodes


def test_arb_two_cycle_oracle():
    # {0 <-> 1} -> 2 = t: the 2-cycle certifies itself in class 0, after one
    # double frame of 2 * T(0) = 2n steps
    g = Digraph(3, frozenset({(0, 1), (1, 0), (1, 2)}), 2)
    proto = arb_gather(3)
    trace, nodes = run_uncut(g, proto, proto.beta.period + 4 * proto.frame_length(1))
    passes = {v: d for _, v, d in trace.events_of("scc_pass")}
    assert passes[0]["component"] == passes[1]["component"] == [0, 1]
    assert passes[0]["alpha_acy"] == passes[1]["alpha_acy"] == 2 * proto.frame_length(0)
    # t passes Test 3 only once an ACY message from 1 has filled its acyclic in-set
    assert passes[2]["component"] == [2]
    assert passes[2]["alpha_acy"] > passes[1]["alpha_acy"]
    assert nodes[0].component == frozenset({0, 1})
    assert analysis.check_arb_safety(trace).ok


def test_arb_gossip_leaks_rumors_early():
    # gossip frames carry rumors, so t may complete before any certification
    g = Digraph(3, frozenset({(0, 1), (1, 0), (1, 2)}), 2)
    proto = arb_gather(3)
    trace = run(g, proto, model_for(proto), 10**6)
    assert trace.complete
    assert trace.completion_step < 2 * proto.frame_length(0)
    assert trace.events_of("scc_pass") == []


def test_arb_on_dag_matches_singletons():
    g = generate("random_dag", 12, {"density": 0.3}, 4)
    proto = arb_gather(12)
    trace = run(g, proto, model_for(proto), 10**7)
    assert trace.complete
    for _, v, d in trace.events_of("scc_pass") + trace.events_of("scc_adopt"):
        assert d["component"] == [v]


@settings(max_examples=15, deadline=None)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=5), st.integers(0, 10**6))
def test_arb_scc_chain(sizes, seed):
    n = sum(sizes)
    g = generate("scc_chain", n, {"sizes": sizes}, seed)
    proto = arb_gather(n, seed=seed)
    trace = run(g, proto, model_for(proto), 10**7)
    assert trace.complete
    for check in analysis.verify_trace(trace):
        assert check.ok, str(check)


def test_arb_frequencies():
    proto = arb_gather(20)
    assert proto.frequencies == proto.theta + scc_class_count(20)
    assert isinstance(proto, ArbGather)


def test_broken_gossip_never_certifies_wrongly():
    for seed in range(6):
        g = generate("random_digraph", 14, {"density": 0.15}, seed)
        proto = arb_gather(14, gossip=BrokenGossip(seed))
        trace = run(g, proto, model_for(proto), 200_000)
        assert analysis.check_arb_safety(trace).ok


# -- with-ack --------------------------------------------------------------------------

def test_ack_protocol_needs_ack_model():
    proto = acyclic_gather_with_ack(8)
    with pytest.raises(ValueError, match="acknowledgement"):
        run(generate("path", 8), proto, NetworkModel(frequencies=proto.frequencies), 100)


def test_ack_diamond_reactivation():
    g = Digraph(4, frozenset({(0, 1), (0, 2), (1, 2), (1, 3), (2, 3)}), 3)
    proto = acyclic_gather_with_ack(4)
    trace = run(g, proto, model_for(proto), 10**4)
    assert trace.complete
    assert analysis.activation_counts(trace)[2] >= 2
    assert analysis.check_layer_claim(trace).ok


def test_ack_start_validated():
    with pytest.raises(ValueError, match="start"):
        AcyclicGatherWithAck(8, build_strong_ladder(8, 3), start="some")


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(0, 10**6))
def test_ack_gathers_within_bound(n, seed):
    g = generate("random_dag", n, {"density": 0.2}, seed)
    proto = acyclic_gather_with_ack(n, seed=seed)
    trace = run(g, proto, model_for(proto), 10**6)
    assert trace.complete
    assert trace.completion_step < analysis.ack_bound(n, proto.ladder.constant)
    assert analysis.check_layer_claim(trace).ok


def test_ack_sources_only_start_can_lose_rumors():
    # documented failure of the sources-only start: rumors of some non-sources never move
    g = generate("random_dag", 64, seed=1)
    proto = acyclic_gather_with_ack(64, start="sources")
    trace = run(g, proto, model_for(proto), analysis.ack_bound(64, proto.ladder.constant))
    assert not trace.complete
    assert set(range(64)) - set(trace.snapshots[g.target]["rumors"])


@pytest.mark.parametrize("factory", [
    lambda n: roundrobin_gather(),
    lambda n: acyclic_gather(n),
    lambda n: arb_gather(n),
    lambda n: acyclic_gather_with_ack(n),
])
@pytest.mark.parametrize("kind", ["star", "path"])
@pytest.mark.parametrize("n", [1, 2, 9])
def test_degenerate_shapes(factory, kind, n):
    g = generate(kind, n)
    proto = factory(n)
    trace = run(g, proto, model_for(proto), 10**7)
    assert trace.complete
    if n == 1:
        assert trace.completion_step == 0
