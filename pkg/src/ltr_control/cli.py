"""Command-line entry point: validate, simulate, optimize, evaluate, experiment."""

from __future__ import annotations

import argparse
import csv
import io
import logging
import sys
from pathlib import Path

from .diffusion import AlphaTable, ControlInstance, Mode
from .election import ProfileFormatError, ScoringRule, load_preferences
from .evaluation import evaluate, simulated_margins, simulated_scores
from .graph import GraphFormatError, load_edge_list, validate
from .harness import ConfigError, ExperimentConfig, resolve_threads, run_experiment
from .optimizer import Estimator, solve


def _add_graph_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph", required=True, help="edge list: 'u v [w]' per line")
    p.add_argument("--undirected", action="store_true", help="add both directions for every line")
    p.add_argument("--weights", default="given", choices=["given", "uniform", "random"])
    p.add_argument("--weight-seed", type=int, default=0, help="seed for --weights random")


def _add_instance_args(p: argparse.ArgumentParser, budget: bool = False) -> None:
    _add_graph_args(p)
    p.add_argument("--prefs", required=True, help="'node: c1,c2,...' per line")
    p.add_argument("--rule", default="plurality", help="plurality|approval:t|veto:t|borda|custom:s1,s2,..")
    p.add_argument("--target", default="0", help="target candidate label or id")
    p.add_argument("--alpha", default="1.0", help="one value or one per position")
    p.add_argument("--mode", default="constructive", choices=["constructive", "destructive"])
    p.add_argument("--seed", type=int, default=0)
    if budget:
        p.add_argument("--budget", type=int, required=True)
    p.add_argument("--csv", help="also write CSV here ('-' for stdout)")


def _load_instance(args, budget: int = 0) -> ControlInstance:
    graph = load_edge_list(
        Path(args.graph).read_text(), directed=not args.undirected, weight_mode=args.weights, seed=args.weight_seed
    )
    profile = load_preferences(Path(args.prefs).read_text(), graph.labels)
    m = profile.candidate_count
    return ControlInstance(
        graph,
        profile,
        ScoringRule.parse(args.rule, m),
        profile.candidate_id(args.target),
        AlphaTable.parse(args.alpha, m),
        budget,
        Mode.parse(args.mode),
    )


def _parse_seeds(text: str, graph) -> list[int]:
    ids = graph.label_to_id()
    out = []
    for token in (t.strip() for t in text.split(",")):
        if not token:
            continue
        if token not in ids:
            raise ValueError(f"unknown seed node {token!r}")
        out.append(ids[token])
    if len(set(out)) != len(out):
        raise ValueError("seed list contains duplicates")
    return sorted(out)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _emit_csv(dest: str | None, text: str) -> None:
    if dest is None:
        return
    if dest == "-":
        sys.stdout.write(text)
    else:
        Path(dest).write_text(text)


def _table(rows) -> str:
    width = max(len(str(k)) for k, _ in rows) if rows else 0
    return "".join(f"{str(k):<{width}}  {v}\n" for k, v in rows)


def cmd_validate(args) -> int:
    text = Path(args.graph).read_text()
    graph = load_edge_list(text, directed=not args.undirected, weight_mode=args.weights, seed=args.weight_seed, check=False)
    problems = validate(graph)
    for p in problems:
        where = f" (node {graph.labels[p.node]})" if p.node is not None and 0 <= p.node < graph.node_count else ""
        print(f"{p.rule}: {p.message}{where}")
    if problems:
        return 1
    print(f"ok: {graph.node_count} nodes, {graph.edge_count} edges")
    return 0


def cmd_simulate(args) -> int:
    inst = _load_instance(args)
    seeds = _parse_seeds(args.seeds, inst.graph)
    scores = simulated_scores(inst, seeds, args.runs, args.seed, threads=resolve_threads(args.threads))
    margins = simulated_margins(scores, inst.target)
    labels = inst.profile.candidate_labels
    rows = []
    for i, (s, mg) in enumerate(zip(scores.tolist(), margins.tolist())):
        if mg < 0:
            winner = inst.target
        else:
            # strongest opponent, lowest id on ties; a tie is a loss for the target
            winner = max((c for c in range(inst.m) if c != inst.target), key=lambda c: (s[c], -c))
        rows.append((i, s[inst.target], labels[winner], mg))
    text = _csv_text(("run", "target_score", "winner", "margin"), rows)
    _emit_csv(args.csv if args.csv is not None else "-", text)
    return 0


def cmd_optimize(args) -> int:
    inst = _load_instance(args, budget=args.budget)
    est = Estimator(args.samples, args.seed)
    result = solve(inst, est)
    labels = inst.graph.labels
    lines = [("step", "node  gain")]
    lines += [(str(i + 1), f"{labels[v]}  {g:.6f}") for i, (v, g) in enumerate(zip(result.nodes, result.gains))]
    lines += [("seeds", ",".join(labels[v] for v in result.nodes)), ("estimate", f"{result.estimate:.6f}"), ("baseline", f"{result.baseline:.6f}")]
    print(_table(lines), end="")
    if len(result.nodes) < inst.budget:
        print(f"note: stopped after {len(result.nodes)} seeds, no node adds score")
    rows = [(i + 1, labels[v], repr(g), repr(result.baseline + sum(result.gains[: i + 1]))) for i, (v, g) in enumerate(zip(result.nodes, result.gains))]
    _emit_csv(args.csv, _csv_text(("step", "node", "gain", "estimate"), rows))
    return 0


def cmd_evaluate(args) -> int:
    inst = _load_instance(args)
    seeds = _parse_seeds(args.seeds, inst.graph)
    report = evaluate(inst, seeds, Estimator(args.samples, args.seed), args.pov_runs, args.seed)
    rows = report.rows(inst.profile.candidate_labels)
    print(_table(rows), end="")
    _emit_csv(args.csv, _csv_text([k for k, _ in rows], [[v for _, v in rows]]))
    return 0


def cmd_experiment(args) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    if args.output:
        cfg.output = args.output
    result = run_experiment(cfg, threads=args.threads)
    print(f"wrote {len(result.detail)} detail rows to {result.detail_path}")
    print(f"wrote {len(result.aggregate)} aggregate rows to {result.aggregate_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ltr-control", description="Election control under linear threshold ranking")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check an influence graph")
    _add_graph_args(p)
    p.add_argument("--seed", dest="weight_seed", type=int, default=argparse.SUPPRESS, help="alias of --weight-seed")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("simulate", help="run the diffusion and tally each run")
    _add_instance_args(p)
    p.add_argument("--seeds", default="", help="comma-separated seed node labels")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("optimize", help="greedy seed selection")
    _add_instance_args(p, budget=True)
    p.add_argument("--samples", type=int, default=256)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("evaluate", help="expected MoV and PoV of a seed set")
    _add_instance_args(p)
    p.add_argument("--seeds", default="")
    p.add_argument("--samples", type=int, default=256)
    p.add_argument("--pov-runs", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a parameter sweep from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--output", help="override the config's output directory")
    p.add_argument("--threads", type=int, help="worker threads (default: $LTR_THREADS or 1)")
    p.set_defaults(func=cmd_experiment)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (GraphFormatError, ProfileFormatError, ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
