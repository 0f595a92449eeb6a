"""Command-line front end: gen, selector, run, experiment, analyze."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from statistics import median

from . import analysis
from .digraph import GENERATORS, Digraph, compute_scc, condensation_depth, distances_to_target, generate, read_graph, write_graph
from .protocols import (acyclic_gather, acyclic_gather_with_ack, arb_gather, make_gossip, roundrobin_gather)
from .selectors import (DEFAULT_C_HALF, DEFAULT_C_STRONG, DEFAULT_VERIFY_BUDGET, HALF, STRONG, build_half_selector,
                        build_strong_selector, half_ladder_length, strong_ladder_length, verify,
                        verify_sampled, write_family)
from .simulator import NetworkModel, ProtocolFactory, Trace, multiplex_to_single_frequency, run, strip_srt

PROTOCOLS = ("roundrobin", "acyclic-gather", "arb-gather", "ack-gather")


def default_seed() -> int:
    return int(os.environ.get("RADIOGATHER_SEED", "0"))


@dataclass
class ProtocolConfig:
    name: str
    c_strong: int = DEFAULT_C_STRONG
    c_half: int = DEFAULT_C_HALF
    theta: int | None = None
    kappa: int | None = None
    gossip: str = "simple"
    ack_start: str = "all"


@dataclass
class ModelConfig:
    frequencies: int | None = None  # None: what the protocol needs
    srt: bool = True
    ack: bool | None = None  # None: on iff the protocol needs it
    single_freq: bool = False
    no_srt: bool = False


@dataclass
class ExperimentSpec:
    protocol: ProtocolConfig
    generator: str = "layered_dag"
    params: dict = field(default_factory=dict)
    graph_file: str | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    ns: list[int] = field(default_factory=lambda: [64])
    seeds: int = 1
    first_seed: int = 0
    budget_multiplier: float = 1.0
    csv_out: str | None = None
    trace_dir: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentSpec":
        d = json.loads(text)
        d["protocol"] = ProtocolConfig(**d["protocol"])
        d["model"] = ModelConfig(**d.get("model", {}))
        return cls(**d)


@dataclass
class Prepared:
    protocol: ProtocolFactory
    model: NetworkModel
    budget: int
    base: ProtocolFactory


def build_protocol(cfg: ProtocolConfig, n: int, seed: int, srt: bool = True) -> ProtocolFactory:
    if cfg.name == "roundrobin":
        return roundrobin_gather()
    if cfg.name == "acyclic-gather":
        return acyclic_gather(n, c_s=cfg.c_strong, seed=seed, srt=srt, theta=cfg.theta)
    if cfg.name == "arb-gather":
        return arb_gather(n, gossip=make_gossip(cfg.gossip, seed), c_s=cfg.c_strong, seed=seed, theta=cfg.theta)
    if cfg.name == "ack-gather":
        return acyclic_gather_with_ack(n, c_h=cfg.c_half, seed=seed, kappa=cfg.kappa, start=cfg.ack_start)
    raise ValueError(f"unknown protocol {cfg.name!r}; choose from {', '.join(PROTOCOLS)}")


def a_priori_bound(g: Digraph, proto: ProtocolFactory) -> int:
    """Step budget known before running: the protocol's bound with worst-case path lengths."""
    n = g.n
    name = proto.name
    if name == "roundrobin":
        d = distances_to_target(g)
        return n * (max(x for x in d if x is not None) + 1)
    if name == "acyclic-gather":
        return proto.beta.period * n
    if name == "arb-gather":
        scc = compute_scc(g)
        frames = sum(proto.frame_length(max(0, (len(c) - 1).bit_length())) for c in scc.components)
        return 4 * frames + proto.beta.period * (condensation_depth(g, scc) + 1)
    if name == "ack-gather":
        return analysis.ack_bound(n, proto.ladder.constant)
    raise ValueError(f"no budget formula for {name}")


def prepare(g: Digraph, cfg: ProtocolConfig, mcfg: ModelConfig, seed: int, multiplier: float = 1.0) -> Prepared:
    n = g.n
    base = build_protocol(cfg, n, seed, srt=mcfg.srt and not mcfg.no_srt)
    budget = a_priori_bound(g, base)
    proto = base
    ack = base.requires_ack if mcfg.ack is None else mcfg.ack
    freqs = mcfg.frequencies or base.frequencies
    srt = mcfg.srt
    if mcfg.single_freq or mcfg.no_srt:
        kappa = base.frequencies
        proto = multiplex_to_single_frequency(base, kappa)
        budget *= kappa
        freqs = mcfg.frequencies or 1
    if mcfg.no_srt and n >= 2:
        wrap = build_strong_selector(n, 2, strong_ladder_length(n, 1, cfg.c_strong), seed)
        proto = strip_srt(proto, wrap)
        budget *= wrap.length
        srt = False
    model = NetworkModel(frequencies=freqs, srt=srt, ack=ack)
    proto.check_model(model)
    return Prepared(proto, model, max(1, int(budget * multiplier)), base)


def run_one(g: Digraph, cfg: ProtocolConfig, mcfg: ModelConfig, seed: int, multiplier: float = 1.0,
            run_id: str = "run") -> tuple[Trace, analysis.RunReport]:
    prep = prepare(g, cfg, mcfg, seed, multiplier)
    trace = run(g, prep.protocol, prep.model, prep.budget)
    report = analysis.make_report(run_id, trace, seed, prep.budget)
    return trace, report


# -- argument parsing ---------------------------------------------------------------

def _params(items: list[str] | None) -> dict:
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ValueError(f"parameter {item!r} must look like key=value")
        k, v = item.split("=", 1)
        try:
            out[k] = json.loads(v)
        except json.JSONDecodeError:
            out[k] = v
    return out


def _on_off(text: str) -> bool:
    if text in ("on", "true", "1", "yes"):
        return True
    if text in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected on/off, got {text!r}")


def _add_protocol_flags(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument("--protocol", required=required, choices=PROTOCOLS)
    p.add_argument("--c-strong", type=int, default=DEFAULT_C_STRONG)
    p.add_argument("--c-half", type=int, default=DEFAULT_C_HALF)
    p.add_argument("--theta", type=int, default=None, help="override the number of activity stages")
    p.add_argument("--kappa", type=int, default=None, help="override the ack protocol's frequency count")
    p.add_argument("--gossip", default="simple", choices=("simple", "broken"))
    p.add_argument("--ack-start", default="all", choices=("all", "sources"),
                   help="ack protocol: which nodes start active")
    p.add_argument("--frequencies", type=int, default=None)
    p.add_argument("--srt", type=_on_off, default=True, metavar="on|off")
    p.add_argument("--ack", type=_on_off, default=None, metavar="on|off")
    p.add_argument("--single-freq", action="store_true", help="multiplex onto one frequency")
    p.add_argument("--no-srt", action="store_true", help="remove simultaneous receive/transmit via a strong 2-selector")
    p.add_argument("--budget-multiplier", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=None)


def _configs(args) -> tuple[ProtocolConfig, ModelConfig]:
    pc = ProtocolConfig(args.protocol, args.c_strong, args.c_half, args.theta, args.kappa, args.gossip, args.ack_start)
    mc = ModelConfig(args.frequencies, args.srt, args.ack, args.single_freq, args.no_srt)
    return pc, mc


def _graph_from_args(args, n: int | None = None, seed: int = 0) -> Digraph:
    if getattr(args, "graph", None):
        return read_graph(args.graph)
    if not args.gen:
        raise ValueError("give --graph FILE or --gen KIND")
    return generate(args.gen, n if n is not None else args.n, _params(args.param), seed)


def cmd_gen(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    g = generate(args.kind, args.n, _params(args.param), seed)
    if args.out:
        write_graph(g, args.out)
    else:
        from .digraph import format_graph
        sys.stdout.write(format_graph(g))
    print(f"generated {args.kind} n={g.n} edges={len(g.edges)} target={g.target}", file=sys.stderr)
    return 0


def cmd_selector(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    kind = STRONG if args.kind == "strong" else HALF
    if args.length is None:
        j = max(0, (args.k - 1).bit_length())
        length = (strong_ladder_length(args.n, j, args.c) if kind == STRONG
                  else half_ladder_length(args.n, j, args.c))
    else:
        length = args.length
    builder = build_strong_selector if kind == STRONG else build_half_selector
    fam = builder(args.n, args.k, length, seed, fallback=args.fallback, budget=args.budget)
    if args.out:
        write_family(fam, args.out)
    ok = True
    if args.verify == "exhaustive":
        verdict = verify(fam, args.budget)
        ok = verdict.status == "pass"
    elif args.verify == "sampled":
        verdict = verify_sampled(fam, args.trials, seed)
        ok = verdict.ok
    else:
        verdict = None
    print(json.dumps({"kind": fam.kind, "n": fam.n, "k": fam.k, "length": fam.length,
                      "construction": fam.construction, "verified": fam.verified,
                      "verdict": None if verdict is None else str(verdict)}))
    return 0 if ok else 1


def cmd_run(args) -> int:
    seed = default_seed() if args.seed is None else args.seed
    g = _graph_from_args(args, seed=seed)
    pc, mc = _configs(args)
    trace, report = run_one(g, pc, mc, seed, args.budget_multiplier, run_id=args.run_id or "run")
    if args.trace:
        Path(args.trace).write_text(trace.to_jsonl())
    if args.report:
        Path(args.report).write_text(report.to_json() + "\n")
    print(f"completion_step={report.completion_step} budget={report.budget} bound={report.bound_value} "
          f"margin={report.margin}")
    for name, ok in sorted(report.verdicts.items()):
        print(f"  {name}: {'ok' if ok else 'FAIL'}")
    if trace.deadlock:
        print("  deadlock: no node has anything left to do and t is incomplete")
    elif trace.budget_hit:
        print("  budget exhausted before completion")
    return 0 if report.ok else 1


def run_experiment(spec: ExperimentSpec) -> tuple[list[analysis.RunReport], dict]:
    reports = []
    for n in spec.ns:
        for seed in range(spec.first_seed, spec.first_seed + spec.seeds):
            if spec.graph_file:
                g = read_graph(spec.graph_file)
            else:
                g = generate(spec.generator, n, spec.params, seed)
            run_id = f"{spec.protocol.name}-{spec.generator if not spec.graph_file else 'file'}-n{g.n}-s{seed}"
            trace, rep = run_one(g, spec.protocol, spec.model, seed, spec.budget_multiplier, run_id)
            if spec.trace_dir:
                Path(spec.trace_dir).mkdir(parents=True, exist_ok=True)
                (Path(spec.trace_dir) / f"{run_id}.jsonl").write_text(trace.to_jsonl())
            reports.append(rep)
    summary: dict = {"runs": len(reports), "failures": sum(not r.ok for r in reports)}
    by_n: dict[int, list[int]] = {}
    for r in reports:
        if r.completion_step is not None:
            by_n.setdefault(r.n, []).append(r.completion_step)
    points = sorted((n, median(v)) for n, v in by_n.items() if len(v) == spec.seeds and median(v) > 0)
    summary["median_completion"] = {str(n): m for n, m in points}
    if len(points) >= 2:
        summary["loglog_slope"] = analysis.loglog_slope([p[0] for p in points], [p[1] for p in points])
    return reports, summary


def cmd_experiment(args) -> int:
    if args.spec:
        spec = ExperimentSpec.from_json(Path(args.spec).read_text())
    else:
        pc, mc = _configs(args)
        seed = default_seed() if args.seed is None else args.seed
        spec = ExperimentSpec(pc, args.gen or "layered_dag", _params(args.param), args.graph, mc,
                              [int(x) for x in args.n.split(",")], args.seeds, seed, args.budget_multiplier,
                              args.out, args.trace_dir)
    reports, summary = run_experiment(spec)
    text = analysis.reports_to_csv(reports)
    if spec.csv_out:
        Path(spec.csv_out).write_text(text)
    else:
        sys.stdout.write(text)
    print(json.dumps(summary, sort_keys=True), file=sys.stderr)
    return 0 if summary["failures"] == 0 else 1


def cmd_analyze(args) -> int:
    g = read_graph(args.graph)
    trace = Trace.from_jsonl(Path(args.trace).read_text(), g)
    checks = analysis.verify_trace(trace)
    report = analysis.make_report(args.run_id or Path(args.trace).stem, trace, args.seed or 0,
                                  trace.max_steps, checks)
    out = {"report": json.loads(report.to_json()), "checks": [str(c) for c in checks]}
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="radiogather", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a graph instance")
    p.add_argument("--kind", required=True, choices=GENERATORS)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="generator parameter (JSON value)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("selector", help="build and verify a selector family")
    p.add_argument("--kind", required=True, choices=("strong", "half"))
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--length", type=int, default=None, help="default: ladder length for the smallest 2^j >= k")
    p.add_argument("--c", type=int, default=DEFAULT_C_STRONG, help="ladder constant for the default length")
    p.add_argument("--fallback", default="auto", choices=("auto", "always", "never"))
    p.add_argument("--verify", default="exhaustive", choices=("exhaustive", "sampled", "none"))
    p.add_argument("--trials", type=int, default=10000)
    p.add_argument("--budget", type=int, default=DEFAULT_VERIFY_BUDGET)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out")
    p.set_defaults(func=cmd_selector)

    p = sub.add_parser("run", help="simulate one protocol run")
    p.add_argument("--graph")
    p.add_argument("--gen", choices=GENERATORS)
    p.add_argument("--n", type=int)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    _add_protocol_flags(p)
    p.add_argument("--trace", help="write the JSON-lines trace here")
    p.add_argument("--report", help="write the JSON run report here")
    p.add_argument("--run-id")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("experiment", help="sweep n and seeds, emit CSV")
    p.add_argument("--spec", help="ExperimentSpec JSON file (overrides other flags)")
    p.add_argument("--graph")
    p.add_argument("--gen", choices=GENERATORS)
    p.add_argument("--n", default="64", help="comma-separated sizes")
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--out", help="CSV path (default stdout)")
    p.add_argument("--trace-dir")
    _add_protocol_flags(p, required=False)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("analyze", help="re-check a stored trace")
    p.add_argument("--graph", required=True)
    p.add_argument("--trace", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--run-id")
    p.set_defaults(func=cmd_analyze)
    return ap


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.command == "experiment" and not args.spec and not args.protocol:
        ap.error("experiment needs --protocol or --spec")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
