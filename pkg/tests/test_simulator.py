import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from radiogather.digraph import Digraph, generate
from radiogather.protocols import acyclic_gather, roundrobin_gather
from radiogather.selectors import build_strong_selector
from radiogather.simulator import (SILENCE, Message, NetworkModel, Trace, delivery_equivalence,
                                   multiplex_to_single_frequency, run, srt_segment_superset, strip_srt)

from conftest import run_script

# in-star: nodes 0..k-1 all point at node 3
STAR_EDGES = [(0, 3), (1, 3), (2, 3)]


@pytest.mark.parametrize("senders, expected", [
    ((), None),
    ((0,), 0),
    ((0, 1), SILENCE),
    ((0, 1, 2), SILENCE),
])
def test_receiver_hears_exactly_one_transmitter(senders, expected):
    scripts = {u: {0: {0: f"m{u}"}} for u in senders}
    trace, nodes = run_script(4, STAR_EDGES, scripts)
    rec = trace.record(0)
    got = rec.deliveries.get(0, {}).get(3)
    if expected is None:
        assert got is None
        assert 0 not in nodes[3].heard
    elif expected is SILENCE:
        assert got is SILENCE
        assert nodes[3].heard.get(0, []) == []
    else:
        assert got == Message(expected, f"m{expected}")
        assert nodes[3].heard[0] == [(0, expected, f"m{expected}")]


def test_collision_is_indistinguishable_from_silence_for_the_node():
    _, quiet = run_script(4, STAR_EDGES, {0: {1: {0: "x"}}})
    _, noisy = run_script(4, STAR_EDGES, {0: {0: {0: "a"}, 1: {0: "x"}}, 1: {0: {0: "b"}}})
    assert quiet[3].heard.get(0, []) == noisy[3].heard.get(0, []) == []


def test_frequencies_are_independent():
    model = NetworkModel(frequencies=2)
    scripts = {0: {0: {0: "a"}}, 1: {0: {0: "b", 1: "c"}}}
    trace, nodes = run_script(4, STAR_EDGES, scripts, model)
    rec = trace.record(0)
    assert rec.deliveries[0][3] is SILENCE
    assert rec.deliveries[1][3] == Message(1, "c")
    assert nodes[3].heard[0] == [(1, 1, "c")]


def test_non_neighbors_do_not_collide():
    # node 2 transmits but is not an in-neighbor of 3
    trace, nodes = run_script(4, [(0, 3), (2, 1)], {0: {0: {0: "a"}}, 2: {0: {0: "b"}}})
    assert nodes[3].heard[0] == [(0, 0, "a")]
    assert nodes[1].heard[0] == [(0, 2, "b")]


@pytest.mark.parametrize("srt", [True, False])
def test_simultaneous_receive_and_transmit(srt):
    model = NetworkModel(frequencies=2, srt=srt)
    # 0 -> 1, and 1 transmits on frequency 0 itself
    scripts = {0: {0: {0: "a", 1: "b"}}, 1: {0: {0: "own"}}}
    _, nodes = run_script(3, [(0, 1), (1, 2)], scripts, model)
    heard = sorted(nodes[1].heard[0])
    if srt:
        assert heard == [(0, 0, "a"), (1, 0, "b")]
    else:
        # same-frequency reception dropped, the other frequency still works
        assert heard == [(1, 0, "b")]
    assert nodes[2].heard[0] == [(0, 1, "own")]


@pytest.mark.parametrize("ack", [True, False])
def test_ack_bit(ack):
    model = NetworkModel(ack=ack)
    # 0 and 1 collide at 3; 2 reaches 4 alone; 0 also reaches 4? no: 0 -> 3 only
    edges = [(0, 3), (1, 3), (1, 4), (2, 5)]
    scripts = {0: {0: {0: "a"}}, 1: {0: {0: "b"}}, 2: {0: {0: "c"}}}
    trace, nodes = run_script(6, edges, scripts, model)
    if not ack:
        assert all(nd.acks == {} for nd in nodes)
        assert trace.record(0).acks is None
        return
    # 1 collides at 3 but is heard alone at 4: at least one success
    assert nodes[0].acks == {0: False}
    assert nodes[1].acks == {0: True}
    assert nodes[2].acks == {0: True}
    assert trace.record(0).acks == {0: False, 1: True, 2: True}
    assert nodes[3].acks == {}  # silent nodes get no bit


def test_ack_without_out_neighbors_is_false():
    _, nodes = run_script(2, [(0, 1)], {1: {0: {0: "x"}}}, NetworkModel(ack=True))
    assert nodes[1].acks == {0: False}


def test_delivery_not_visible_before_transmit_decision():
    """A node deciding what to send at step s has not yet seen step-s messages."""
    seen_at_transmit = []

    class Echo:
        label = 1
        rumors = {1}

        def next_wake(self, step):
            return step if step <= 1 else None

        def transmit(self, step):
            seen_at_transmit.append((step, frozenset(self.rumors)))
            return {}

        def receive(self, step, messages, ack):
            for _, m in messages:
                self.rumors.add(m.payload)

    from conftest import ScriptedNode
    from radiogather.simulator import EventLog, _simulate

    g = Digraph(2, frozenset({(0, 1)}), 1)
    nodes = [ScriptedNode(0, {0: {0: 0}}), Echo()]
    _simulate(g, nodes, NetworkModel(), Trace(g, NetworkModel()), max_steps=2, stop_on_completion=False,
              period=1, log=EventLog())
    assert seen_at_transmit == [(0, frozenset({1})), (1, frozenset({0, 1}))]


def test_bad_frequency_rejected():
    with pytest.raises(ValueError, match="frequency"):
        run_script(2, [(0, 1)], {0: {0: {1: "x"}}})


def test_run_refuses_unreachable_target():
    g = Digraph(3, frozenset({(0, 1)}), 1)
    with pytest.raises(ValueError, match="reachable"):
        run(g, roundrobin_gather(), NetworkModel(), 10)


def test_protocol_model_mismatch():
    g = generate("path", 8)
    with pytest.raises(ValueError, match="frequencies"):
        run(g, acyclic_gather(8), NetworkModel(frequencies=1), 10)


def test_single_node_complete_at_zero():
    g = Digraph(1, frozenset(), 0)
    trace = run(g, roundrobin_gather(), NetworkModel(), 5)
    assert trace.completion_step == 0


def test_roundrobin_path_exact_time():
    # rumor 0 moves one hop per cycle: node i transmits at step i of each cycle
    g = generate("path", 5)
    trace = run(g, roundrobin_gather(), NetworkModel(), 100)
    assert trace.completion_step == 3


def test_trace_jsonl_roundtrip():
    g = generate("random_dag", 12, seed=3)
    trace = run(g, acyclic_gather(12), NetworkModel(frequencies=acyclic_gather(12).frequencies), 10**6)
    back = Trace.from_jsonl(trace.to_jsonl(), g)
    assert back.to_jsonl() == trace.to_jsonl()
    assert back.digest() == trace.digest()
    assert back.completion_step == trace.completion_step


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 10), st.integers(0, 10**6), st.integers(0, 10**6))
def test_delivery_order_does_not_matter(n, gseed, oseed):
    g = generate("random_dag", n, {"density": 0.4}, gseed)
    proto = acyclic_gather(n)
    model = NetworkModel(frequencies=proto.frequencies)
    a = run(g, proto, model, 10**6)
    b = run(g, proto, model, 10**6, delivery_order_seed=oseed)
    assert a.digest() == b.digest()


@settings(max_examples=15, deadline=None)
@given(st.integers(2, 12), st.integers(0, 10**6))
def test_multiplexing_preserves_deliveries(n, seed):
    g = generate("random_dag", n, {"density": 0.3}, seed)
    proto = acyclic_gather(n)
    kappa = proto.frequencies
    direct = run(g, proto, NetworkModel(frequencies=kappa), 10**6)
    muxed = run(g, multiplex_to_single_frequency(proto, kappa), NetworkModel(), 10**7)
    verdict = delivery_equivalence(direct, muxed, time_map=lambda s: s // kappa)
    assert verdict.equal


def test_stripped_run_segments_contain_srt_deliveries():
    n = 10
    g = generate("random_dag", n, {"density": 0.3}, 1)
    inner = multiplex_to_single_frequency(acyclic_gather(n, srt=False), acyclic_gather(n).frequencies)
    wrap = build_strong_selector(n, 2, 64, 0)
    trace = run(g, strip_srt(inner, wrap), NetworkModel(srt=False), 10**8)
    assert trace.complete
    assert srt_segment_superset(trace).ok


def test_strip_srt_rejects_weak_wrapper():
    with pytest.raises(ValueError):
        strip_srt(roundrobin_gather(), build_strong_selector(6, 1, 6))
