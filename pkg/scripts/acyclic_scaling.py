"""Median AcyclicGather completion on layered DAGs and the log-log slope against n.

    python scripts/acyclic_scaling.py --ns 64,128,256,512,1024 --seeds 3 --out scaling.csv
"""
import argparse
import json
import sys
from statistics import median

from radiogather import analysis
from radiogather.cli import ModelConfig, ProtocolConfig, run_one
from radiogather.digraph import generate


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--ns", default="64,128,256,512,1024")
    ap.add_argument("--seeds", type=int, default=3)
    ap.add_argument("--generator", default="layered_dag")
    ap.add_argument("--out", help="CSV of per-run reports")
    args = ap.parse_args(argv)

    reports, medians = [], {}
    for n in [int(x) for x in args.ns.split(",")]:
        steps = []
        for seed in range(args.seeds):
            g = generate(args.generator, n, {}, seed)
            _, rep = run_one(g, ProtocolConfig("acyclic-gather"), ModelConfig(), seed,
                             run_id=f"acyclic-{args.generator}-n{n}-s{seed}")
            reports.append(rep)
            steps.append(rep.completion_step)
            print(f"n={n:5d} seed={seed} completion={rep.completion_step} bound={rep.bound_value} ok={rep.ok}",
                  file=sys.stderr)
        medians[n] = median(steps)
    slope = analysis.loglog_slope(list(medians), list(medians.values()))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(analysis.reports_to_csv(reports))
    print(json.dumps({"median_completion": medians, "loglog_slope": round(slope, 4)}, indent=2))
    return 0 if all(r.ok for r in reports) else 1


if __name__ == "__main__":
    sys.exit(main())
