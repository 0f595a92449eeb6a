"""ArbGather certifications against Tarjan, with the correct and the frame-dropping gossip.

    python scripts/arb_safety.py --instances 20 --n 64
"""
import argparse
import sys
from collections import Counter

from radiogather import analysis
from radiogather.cli import a_priori_bound
from radiogather.digraph import compute_scc, generate
from radiogather.protocols import BrokenGossip, arb_gather
from radiogather.simulator import NetworkModel, run


def instance(i, n):
    if i % 2:
        return generate("random_digraph", n, {"density": 0.05}, i)
    sizes = [n // 8] * 8
    sizes[-1] += n - sum(sizes)
    return generate("scc_chain", n, {"sizes": sizes}, i)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--instances", type=int, default=20)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--broken-budget", type=int, default=100_000)
    args = ap.parse_args(argv)

    tally = Counter()
    for i in range(args.instances):
        g = instance(i, args.n)
        scc = compute_scc(g)
        for label, gossip, budget in (("simple", None, None), ("broken", BrokenGossip(i), args.broken_budget)):
            proto = arb_gather(g.n, gossip=gossip, seed=i)
            budget = budget or a_priori_bound(g, proto)
            trace = run(g, proto, NetworkModel(frequencies=proto.frequencies), budget)
            safety = analysis.check_arb_safety(trace, scc)
            tally[f"{label}:certifications"] += safety.detail["certifications"]
            tally[f"{label}:wrong"] += len(safety.violations)
            tally[f"{label}:complete"] += trace.complete
            if label == "simple" and trace.complete:
                tally["simple:within_bound"] += trace.completion_step <= analysis.arb_bound(trace)
    for key in sorted(tally):
        print(f"{key:28s} {tally[key]}")
    return 0 if tally["simple:wrong"] == tally["broken:wrong"] == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
