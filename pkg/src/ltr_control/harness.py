"""Experiment sweeps: random preferences, seed selection, PoV and MoV tables.

A config is a flat INI-style key/value file (lists are comma separated)::

    graph = synthetic:ba:200:2
    undirected = true
    weights = random
    candidates = 10
    budgets = 5,10,15
    alphas = 0.1,0.5,1.0
    rules = plurality,borda
    permutations = 3
    runs = 20
    samples = 256
    seed = 7
    strategies = greedy,random,degree
    output = results

Every random draw is derived from ``seed`` and the cell's indices, so the CSV
output does not depend on the thread count or completion order.
"""

from __future__ import annotations

import configparser
import csv
import io
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import derive_rng
from .diffusion import AlphaTable, ControlInstance, Mode
from .election import PreferenceProfile, ScoringRule, margin_from_scores, score_table
from .evaluation import expected_mov, simulated_margins, simulated_scores, wins
from .graph import InfluenceGraph, WeightMode, from_networkx, load_edge_list
from .optimizer import Estimator, solve

log = logging.getLogger(__name__)

SCHEMA = "ltr-experiment/1"
THREADS_ENV = "LTR_THREADS"

DETAIL_FIELDS = [
    "schema", "dataset", "rule", "m", "budget", "alpha", "permutation", "strategy", "seeds",
    "pov", "mov_mean", "mov_std", "neg_margin_mean", "runs", "expected_mov", "expected_mov_stderr",
]
AGGREGATE_FIELDS = [
    "schema", "dataset", "rule", "m", "budget", "alpha", "strategy", "permutations",
    "pov_mu", "pov_sigma", "mov_mu", "mov_sigma", "mov_stderr", "neg_margin_mu", "neg_margin_sigma",
    "expected_mov_mu",
]
STRATEGIES = ("greedy", "random", "degree")


class ConfigError(ValueError):
    pass


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _words(text: str) -> list[str]:
    return [x.strip() for x in text.split(",") if x.strip()]


def _bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


@dataclass
class ExperimentConfig:
    graph: str
    candidates: int
    budgets: list[int]
    alphas: list[float]
    rules: list[str]
    undirected: bool = False
    weights: str = "random"
    permutations: int = 10
    runs: int = 20
    samples: int = 256
    seed: int = 0
    target: int = 0
    mode: str = "constructive"
    strategies: list[str] = field(default_factory=lambda: ["greedy"])
    output: str = "results"
    plots: bool = False

    def __post_init__(self):
        if self.candidates < 2:
            raise ConfigError("candidates must be >= 2")
        for name in ("budgets", "alphas", "rules", "strategies"):
            if not getattr(self, name):
                raise ConfigError(f"{name} must not be empty")
        if self.permutations < 1 or self.runs < 1 or self.samples < 1:
            raise ConfigError("permutations, runs and samples must be positive")
        for s in self.strategies:
            if s not in STRATEGIES:
                raise ConfigError(f"unknown strategy {s!r} (choose from {', '.join(STRATEGIES)})")
        for a in self.alphas:
            if not 0.0 <= a <= 1.0:
                raise ConfigError(f"alpha {a} outside [0,1]")
        for rule in self.rules:
            ScoringRule.parse(rule, self.candidates)
        WeightMode.parse(self.weights)
        Mode.parse(self.mode)
        if not 0 <= self.target < self.candidates:
            raise ConfigError(f"target {self.target} outside 0..{self.candidates - 1}")

    @classmethod
    def from_text(cls, text: str, base_dir: str | Path | None = None) -> "ExperimentConfig":
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        if not any(line.strip().startswith("[") for line in text.splitlines()):
            text = "[experiment]\n" + text
        parser.read_string(text)
        section = parser[parser.sections()[0]]
        known = {f.name: f for f in fields(cls)}
        kwargs = {}
        for key, raw in section.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            if key in ("budgets",):
                kwargs[key] = _ints(raw)
            elif key == "alphas":
                kwargs[key] = _floats(raw)
            elif key in ("rules", "strategies"):
                kwargs[key] = _words(raw)
            elif key in ("undirected", "plots"):
                kwargs[key] = _bool(raw)
            elif key in ("candidates", "permutations", "runs", "samples", "seed", "target"):
                kwargs[key] = int(raw)
            else:
                kwargs[key] = raw.strip()
        for required in ("graph", "candidates", "budgets", "alphas", "rules"):
            if required not in kwargs:
                raise ConfigError(f"missing required key {required!r}")
        if base_dir is not None:
            for key in ("graph", "output"):
                value = kwargs.get(key)
                if value and not value.startswith("synthetic:") and not os.path.isabs(value):
                    kwargs[key] = str(Path(base_dir) / value)
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        path = Path(path)
        cfg = cls.from_text(path.read_text(), base_dir=path.parent)
        return cfg

    @property
    def dataset(self) -> str:
        if self.graph.startswith("synthetic:"):
            return self.graph
        return Path(self.graph).stem


def synthetic_graph(spec: str, weights: str, seed: int) -> InfluenceGraph:
    """``synthetic:ba:<n>:<k>`` (Barabasi-Albert) or ``synthetic:er:<n>:<p>``, doubled into both directions."""
    import networkx as nx

    parts = spec.split(":")
    if len(parts) != 4:
        raise ConfigError(f"bad synthetic graph spec {spec!r}")
    kind, n = parts[1], int(parts[2])
    topo_seed = int(derive_rng(seed, 0, 0).integers(2**31))
    if kind == "ba":
        g = nx.barabasi_albert_graph(n, int(parts[3]), seed=topo_seed)
    elif kind == "er":
        g = nx.gnp_random_graph(n, float(parts[3]), seed=topo_seed)
    else:
        raise ConfigError(f"unknown synthetic graph kind {kind!r}")
    return from_networkx(g, weights, seed=int(derive_rng(seed, 0, 1).integers(2**63)))


def load_graph(config: ExperimentConfig) -> InfluenceGraph:
    weight_seed = int(derive_rng(config.seed, 0, 1).integers(2**63))
    if config.graph.startswith("synthetic:"):
        return synthetic_graph(config.graph, config.weights, config.seed)
    text = Path(config.graph).read_text()
    return load_edge_list(text, directed=not config.undirected, weight_mode=config.weights, seed=weight_seed)


def assign_random_preferences(node_count: int, m: int, seed: int | np.random.Generator) -> PreferenceProfile:
    """Independent uniformly random ranking for every node."""
    if m < 2:
        raise ValueError(f"need at least 2 candidates, got {m}")
    rng = seed if isinstance(seed, np.random.Generator) else derive_rng(seed)
    base = np.broadcast_to(np.arange(m), (node_count, m))
    return PreferenceProfile(rng.permuted(base, axis=1))


@dataclass
class ExperimentResult:
    detail: list[dict]
    aggregate: list[dict]
    detail_path: Path | None = None
    aggregate_path: Path | None = None


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[dict]) -> None:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(header), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _fmt(row[k]) for k in header})
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(buf.getvalue())
    tmp.replace(path)


def _group_cells(config: ExperimentConfig, graph: InfluenceGraph, rule_i: int, perm: int) -> list[tuple[tuple, dict]]:
    """All rows for one (rule, permutation): every alpha, budget and strategy.

    Seed sets are computed once at the largest budget and truncated, so
    smaller budgets see prefixes of the same greedy run.
    """
    m = config.candidates
    rule = ScoringRule.parse(config.rules[rule_i], m)
    profile = assign_random_preferences(graph.node_count, m, derive_rng(config.seed, 1, perm))
    mode = Mode.parse(config.mode)
    max_budget = min(max(config.budgets), graph.node_count)
    labels = graph.labels
    out = []
    for alpha_i, alpha in enumerate(config.alphas):
        inst = ControlInstance(graph, profile, rule, config.target, AlphaTable.constant(alpha, m), max_budget, mode)
        est = Estimator(config.samples, int(derive_rng(config.seed, 2, rule_i, alpha_i, perm).integers(2**63)))
        orders: dict[str, list[int]] = {}
        for strategy in config.strategies:
            if strategy == "greedy":
                orders[strategy] = solve(inst, est).nodes
            elif strategy == "degree":
                deg = graph.out_degree()
                orders[strategy] = np.lexsort((np.arange(graph.node_count), -deg))[:max_budget].tolist()
            else:
                rng = derive_rng(config.seed, 4, rule_i, alpha_i, perm)
                orders[strategy] = rng.permutation(graph.node_count)[:max_budget].tolist()
        # same thresholds for every strategy and budget within a (rule, alpha, permutation)
        sim_key = (3, rule_i, perm)
        mu0 = margin_from_scores(score_table(profile, rule).tolist(), config.target)
        for budget_i, budget in enumerate(config.budgets):
            for strat_i, strategy in enumerate(config.strategies):
                seeds = sorted(orders[strategy][: min(budget, graph.node_count)])
                t0 = time.perf_counter()
                scores = simulated_scores(inst, seeds, config.runs, config.seed, *sim_key)
                margins = simulated_margins(scores, config.target).astype(np.float64)
                mov = (mu0 - margins) if mode is Mode.CONSTRUCTIVE else (margins - mu0)
                report = expected_mov(inst, seeds, est)
                row = {
                    "schema": SCHEMA,
                    "dataset": config.dataset,
                    "rule": rule.name,
                    "m": m,
                    "budget": budget,
                    "alpha": float(alpha),
                    "permutation": perm,
                    "strategy": strategy,
                    "seeds": " ".join(labels[s] for s in seeds),
                    "pov": float(wins(scores, config.target).mean()),
                    "mov_mean": float(mov.mean()),
                    "mov_std": float(mov.std()),
                    "neg_margin_mean": float((-margins).mean()),
                    "runs": config.runs,
                    "expected_mov": report.expected_mov,
                    "expected_mov_stderr": report.stderr,
                    # kept out of the CSVs so reruns stay byte-identical
                    "runtime": time.perf_counter() - t0,
                }
                log.info("cell rule=%s alpha=%s B=%s perm=%s %s done in %.2fs", rule.name, alpha, budget, perm, strategy, row["runtime"])
                out.append(((rule_i, budget_i, alpha_i, perm, strat_i), row))
    return out


def aggregate(detail: Sequence[dict]) -> list[dict]:
    """Mean and spread over permutations for each (rule, budget, alpha, strategy)."""
    groups: dict[tuple, list[dict]] = {}
    for row in detail:
        key = (row["dataset"], row["rule"], row["m"], row["budget"], row["alpha"], row["strategy"])
        groups.setdefault(key, []).append(row)
    out = []
    for key, rows in groups.items():
        pov = np.array([r["pov"] for r in rows])
        mov = np.array([r["mov_mean"] for r in rows])
        neg = np.array([r["neg_margin_mean"] for r in rows])
        runs = np.array([r["runs"] for r in rows], dtype=np.float64)
        # pooled over every simulated run of every permutation
        second = np.array([r["mov_std"] ** 2 + r["mov_mean"] ** 2 for r in rows])
        total = runs.sum()
        grand = float((runs * mov).sum() / total)
        pooled_var = max(0.0, float((runs * second).sum() / total) - grand**2)
        out.append({
            "schema": SCHEMA,
            "dataset": key[0], "rule": key[1], "m": key[2], "budget": key[3], "alpha": key[4], "strategy": key[5],
            "permutations": len(rows),
            "pov_mu": float(pov.mean()), "pov_sigma": float(pov.std()),
            "mov_mu": float(mov.mean()), "mov_sigma": float(mov.std()),
            "mov_stderr": math.sqrt(pooled_var / total),
            "neg_margin_mu": float(neg.mean()), "neg_margin_sigma": float(neg.std()),
            "expected_mov_mu": float(np.mean([r["expected_mov"] for r in rows])),
        })
    return out


def resolve_threads(threads: int | None) -> int:
    if threads is not None:
        return max(1, threads)
    env = os.environ.get(THREADS_ENV)
    return max(1, int(env)) if env else 1


def run_experiment(config: ExperimentConfig, threads: int | None = None, write: bool = True) -> ExperimentResult:
    graph = load_graph(config)
    for b in config.budgets:
        if b > graph.node_count:
            raise ConfigError(f"budget {b} exceeds the {graph.node_count} nodes")
    out_dir = Path(config.output)
    partial = None
    if write:
        out_dir.mkdir(parents=True, exist_ok=True)
        partial = (out_dir / "results_detail.csv.partial").open("w")
        partial.write(",".join(DETAIL_FIELDS) + "\n")
    jobs = [(rule_i, perm) for rule_i in range(len(config.rules)) for perm in range(config.permutations)]
    cells: list[tuple[tuple, dict]] = []

    def work(job):
        return _group_cells(config, graph, *job)

    try:
        with ThreadPoolExecutor(max_workers=resolve_threads(threads)) as pool:
            for rows in pool.map(work, jobs):
                cells.extend(rows)
                if partial is not None:
                    for _, row in rows:
                        partial.write(",".join(_fmt(row[k]) for k in DETAIL_FIELDS) + "\n")
                    partial.flush()
    finally:
        if partial is not None:
            partial.close()

    cells.sort(key=lambda kv: kv[0])
    detail = [row for _, row in cells]
    agg = aggregate(detail)
    result = ExperimentResult(detail, agg)
    if write:
        result.detail_path = out_dir / "results_detail.csv"
        result.aggregate_path = out_dir / "results_aggregate.csv"
        _write_csv(result.detail_path, DETAIL_FIELDS, detail)
        _write_csv(result.aggregate_path, AGGREGATE_FIELDS, agg)
        (out_dir / "results_detail.csv.partial").unlink(missing_ok=True)
        if config.plots:
            write_plots(detail, out_dir / "plots")
    return result


def write_plots(detail: Sequence[dict], plot_dir: Path) -> list[Path]:
    """One SVG per (rule, budget): MoV across permutations, boxed per alpha and strategy."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plot_dir.mkdir(parents=True, exist_ok=True)
    written = []
    keys = sorted({(r["rule"], r["budget"]) for r in detail})
    for rule, budget in keys:
        rows = [r for r in detail if r["rule"] == rule and r["budget"] == budget]
        groups: dict[tuple, list[float]] = {}
        for r in rows:
            groups.setdefault((r["alpha"], r["strategy"]), []).append(r["neg_margin_mean"])
        labels = [f"a={a:g}\n{s}" for a, s in groups]
        fig, ax = plt.subplots(figsize=(max(4, len(groups) * 0.9), 3.5))
        ax.boxplot(list(groups.values()))
        ax.set_xticks(range(1, len(labels) + 1), labels, fontsize=7)
        ax.set_ylabel("MoV (-margin after)")
        ax.set_title(f"{rule}, B={budget}")
        fig.tight_layout()
        path = plot_dir / f"mov_{rule.replace(':', '-')}_B{budget}.svg"
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written
