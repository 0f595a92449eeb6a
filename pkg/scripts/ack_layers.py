"""Per-layer view of the with-ack protocol: tau_i, layer sizes, and when each layer went quiet.

    python scripts/ack_layers.py --n 128 --seed 0
"""
import argparse
import sys

from radiogather import analysis
from radiogather.digraph import generate, layer_decomposition
from radiogather.protocols import acyclic_gather_with_ack
from radiogather.simulator import NetworkModel, run


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--generator", default="random_dag")
    ap.add_argument("--start", default="all", choices=("all", "sources"))
    args = ap.parse_args(argv)

    g = generate(args.generator, args.n, {}, args.seed)
    proto = acyclic_gather_with_ack(args.n, seed=args.seed, start=args.start)
    budget = analysis.ack_bound(args.n, proto.ladder.constant)
    trace = run(g, proto, NetworkModel(frequencies=proto.frequencies, ack=True), budget)
    dec = layer_decomposition(g)
    taus = analysis.layer_times(g, proto.ladder.constant)
    intervals = analysis.active_intervals(trace)

    print(f"n={g.n} layers={dec.r + 1} completion={trace.completion_step} bound={budget}")
    print(f"{'i':>3} {'|B_i|':>6} {'tau_i':>8} {'last active':>12}")
    for i, layer in enumerate(dec.layers):
        ends = [hi if hi is not None else trace.terminal_step + 1 for v in layer for _, hi in intervals.get(v, [])]
        print(f"{i:>3} {len(layer):>6} {taus[i]:>8} {max(ends, default='-'):>12}")
    claim = analysis.check_layer_claim(trace)
    counts = analysis.activation_counts(trace)
    print(claim)
    print(f"max activations of one node: {max(counts.values())}")
    return 0 if claim.ok and trace.complete else 1


if __name__ == "__main__":
    sys.exit(main())
