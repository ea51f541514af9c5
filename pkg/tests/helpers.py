"""Random tiny instances and small builders shared by the test modules."""

from __future__ import annotations

import itertools

import numpy as np

from ltr_control.diffusion import AlphaTable, ControlInstance, Mode
from ltr_control.election import PreferenceProfile, ScoringRule
from ltr_control.graph import InfluenceGraph


def make_instance(edges, rankings, rule="plurality", target=0, alpha=1.0, budget=1, mode="constructive", n=None):
    rankings = np.asarray(rankings)
    n = rankings.shape[0] if n is None else n
    m = rankings.shape[1]
    graph = InfluenceGraph.from_edges(n, edges)
    rule = ScoringRule.parse(rule, m) if isinstance(rule, str) else rule
    alpha = AlphaTable.constant(alpha, m) if np.isscalar(alpha) else AlphaTable.custom(alpha)
    return ControlInstance(graph, PreferenceProfile(rankings), rule, target, alpha, budget, Mode.parse(mode))


def random_graph(rng, n, max_edges=5, full_weight_prob=0.2):
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    k = int(rng.integers(1, min(max_edges, len(pairs)) + 1))
    chosen = [pairs[i] for i in rng.choice(len(pairs), size=k, replace=False)]
    raw = 1.0 - rng.random(k)
    edges = []
    by_target: dict[int, list[int]] = {}
    for i, (u, v) in enumerate(chosen):
        by_target.setdefault(v, []).append(i)
    w = raw.copy()
    for v, idx in by_target.items():
        s = raw[idx].sum()
        # sometimes saturate the node so the "no edge" branch vanishes
        scale = s if rng.random() < full_weight_prob else max(1.0, s)
        w[idx] = raw[idx] / scale
        while w[idx].sum() > 1.0:
            w[idx] = np.nextafter(w[idx], 0.0)
    for i, (u, v) in enumerate(chosen):
        edges.append((u, v, float(w[i])))
    return InfluenceGraph.from_edges(n, edges)


RULES = ("plurality", "borda", "approval:2", "veto:1")


def random_instance(rng, max_nodes=4, max_edges=5, max_m=4, mode="constructive", budget=None):
    n = int(rng.integers(2, max_nodes + 1))
    m = int(rng.integers(2, max_m + 1))
    graph = random_graph(rng, n, max_edges)
    rankings = np.array([rng.permutation(m) for _ in range(n)])
    rule_name = RULES[int(rng.integers(len(RULES)))]
    if rule_name == "approval:2" and m < 3:
        rule_name = "plurality"
    rule = ScoringRule.parse(rule_name, m)
    alpha = AlphaTable.custom(rng.random(m).round(3))
    target = int(rng.integers(m))
    budget = int(rng.integers(1, 3)) if budget is None else budget
    budget = min(budget, n)
    return ControlInstance(graph, PreferenceProfile(rankings), rule, target, alpha, budget, Mode.parse(mode))


def random_seeds(rng, n, max_size=2):
    size = int(rng.integers(1, min(max_size, n) + 1))
    return sorted(rng.choice(n, size=size, replace=False).tolist())


def subsets(n, size):
    return [list(c) for c in itertools.combinations(range(n), size)]


def all_subsets(n):
    return [list(c) for k in range(n + 1) for c in itertools.combinations(range(n), k)]


def has_cycle(graph: InfluenceGraph) -> bool:
    out = graph.out_neighbors()
    color = [0] * graph.node_count

    def visit(u):
        color[u] = 1
        for v in out[u]:
            if color[v] == 1 or (color[v] == 0 and visit(v)):
                return True
        color[u] = 2
        return False

    return any(color[u] == 0 and visit(u) for u in range(graph.node_count))
