"""Live-edge graphs and the dice-roll process equivalent to the ranking shift.

Every node keeps at most one incoming edge, edge ``(u, v)`` with probability
``b_uv``.  Nodes reachable from the seeds then roll a biased die for the
target's final position (``shift_distribution``).  For tiny graphs the whole
family of live-edge graphs can be enumerated, which gives exact expectations.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from .diffusion import ControlInstance, DiffusionOutcome, Mode, _seed_array
from .election import PreferenceProfile, apply_shift
from .graph import InfluenceGraph

ENUMERATION_LIMIT = 10**6


class EnumerationTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class LiveEdgeGraph:
    """``parent[v]`` is the source of v's kept in-edge, or -1 when none is kept."""

    parent: tuple[int, ...]

    @property
    def node_count(self) -> int:
        return len(self.parent)

    def chosen_edges(self) -> list[tuple[int, int]]:
        return [(u, v) for v, u in enumerate(self.parent) if u >= 0]

    def children(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in self.parent]
        for v, u in enumerate(self.parent):
            if u >= 0:
                out[u].append(v)
        return out


@dataclass(frozen=True)
class ShiftDistribution:
    """Final-position law of the target for a reached node.

    ``probs[i]`` is the probability of ending at position ``first + i``.
    """

    r: int
    probs: tuple[float, ...]
    first: int = 1

    def prob(self, position: int) -> float:
        i = position - self.first
        return self.probs[i] if 0 <= i < len(self.probs) else 0.0

    def positions(self) -> range:
        return range(self.first, self.first + len(self.probs))


def shift_distribution(r: int, alpha_r: float) -> ShiftDistribution:
    """Upward dice for a node ranking the target at ``r``.

    Position 1 gets ``alpha/(r-1)``, position ``l`` in 2..r-1 gets
    ``alpha/(r-l) - alpha/(r-l+1)`` and staying put gets ``1 - alpha``.
    """
    if r < 1:
        raise ValueError(f"position must be >= 1, got {r}")
    if not 0.0 <= alpha_r <= 1.0:
        raise ValueError(f"alpha must lie in [0,1], got {alpha_r}")
    if r == 1:
        return ShiftDistribution(1, (1.0,))
    probs = [alpha_r / (r - 1)]
    for ell in range(2, r):
        probs.append(alpha_r / (r - ell) - alpha_r / (r - ell + 1))
    probs.append(1.0 - alpha_r)
    return ShiftDistribution(r, tuple(probs))


def shift_distribution_down(r: int, alpha_r: float, m: int) -> ShiftDistribution:
    """Downward dice: the drop ``k = min(m - r, floor(alpha/s))`` for uniform ``s``.

    ``Pr[k >= j] = alpha / j`` for ``1 <= j <= m - r``.
    """
    if not 1 <= r <= m:
        raise ValueError(f"position {r} outside 1..{m}")
    cap = m - r
    if cap == 0:
        return ShiftDistribution(r, (1.0,), first=r)
    probs = [1.0 - alpha_r]
    for j in range(1, cap):
        probs.append(alpha_r / j - alpha_r / (j + 1))
    probs.append(alpha_r / cap)
    return ShiftDistribution(r, tuple(probs), first=r)


def node_distribution(instance: ControlInstance, r: int) -> ShiftDistribution:
    a = instance.alpha(r)
    if instance.mode is Mode.CONSTRUCTIVE:
        return shift_distribution(r, a)
    return shift_distribution_down(r, a, instance.m)


def reach_score_deltas(instance: ControlInstance) -> np.ndarray:
    """Expected score change of every candidate when a node is reached (n x m).

    A reached node rolls its die; candidates the target passes slide by one.
    """
    n, m = instance.node_count, instance.m
    f = instance.rule.as_array().astype(np.float64)
    pos = instance.profile.positions
    table: dict[int, np.ndarray] = {}
    for r in range(1, m + 1):
        dist = node_distribution(instance, r)
        # delta[k] indexed by the 1-based position a candidate holds before the move
        delta = np.zeros(m + 1)
        for ell, p in zip(dist.positions(), dist.probs):
            if p == 0.0 or ell == r:
                continue
            delta[r] += p * (f[ell - 1] - f[r - 1])
            if ell < r:
                for h in range(ell, r):
                    delta[h] += p * (f[h] - f[h - 1])
            else:
                for h in range(r + 1, ell + 1):
                    delta[h] += p * (f[h - 2] - f[h - 1])
        table[r] = delta
    out = np.empty((n, m))
    for v in range(n):
        out[v] = table[int(pos[v, instance.target])][pos[v]]
    return out


def sample_parents(graph: InfluenceGraph, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` independent live-edge graphs as a (count x n) parent array."""
    n = graph.node_count
    parents = np.full((count, n), -1, dtype=np.int64)
    if graph.edge_count == 0 or n == 0:
        return parents
    draws = rng.random((count, n))
    offsets = graph._in_offsets
    deg = np.diff(offsets)
    cum = np.zeros(graph.edge_count)
    for v in np.flatnonzero(deg):
        lo, hi = offsets[v], offsets[v + 1]
        cum[lo:hi] = np.cumsum(graph.weights[lo:hi])
    # edge j of v is kept when cum[j-1] <= draw < cum[j]
    for v in np.flatnonzero(deg):
        lo, hi = offsets[v], offsets[v + 1]
        idx = np.searchsorted(cum[lo:hi], draws[:, v], side="right")
        hit = idx < hi - lo
        parents[hit, v] = graph.sources[lo + idx[hit]]
    return parents


def sample_live_edge(graph: InfluenceGraph, rng: np.random.Generator) -> LiveEdgeGraph:
    return LiveEdgeGraph(tuple(sample_parents(graph, 1, rng)[0].tolist()))


def live_edge_probability(graph: InfluenceGraph, g: LiveEdgeGraph) -> float:
    """Product of kept weights times ``1 - sum`` for nodes keeping nothing."""
    if g.node_count != graph.node_count:
        raise ValueError("live-edge graph and influence graph differ in size")
    prob = 1.0
    for v, u in enumerate(g.parent):
        srcs, ws = graph.in_edges(v)
        if u < 0:
            if len(srcs):
                prob *= 1.0 - math.fsum(ws.tolist())
            continue
        hit = np.flatnonzero(srcs == u)
        if hit.size == 0:
            raise ValueError(f"edge ({u},{v}) is not in the graph")
        prob *= float(ws[hit[0]])
    return prob


def reachable(g: LiveEdgeGraph, seeds: Iterable[int]) -> frozenset[int]:
    """Forward closure of ``seeds`` along kept edges."""
    children = g.children()
    seen = set(int(s) for s in seeds)
    queue = deque(seen)
    while queue:
        u = queue.popleft()
        for v in children[u]:
            if v not in seen:
                seen.add(v)
                queue.append(v)
    return frozenset(seen)


def _reach_depth(g: LiveEdgeGraph, seeds: Iterable[int]) -> tuple[frozenset[int], int]:
    children = g.children()
    depth = {int(s): 0 for s in seeds}
    queue = deque(depth)
    while queue:
        u = queue.popleft()
        for v in children[u]:
            if v not in depth:
                depth[v] = depth[u] + 1
                queue.append(v)
    return frozenset(depth), max(depth.values(), default=0)


def enumeration_size(graph: InfluenceGraph) -> int:
    size = 1
    for v in range(graph.node_count):
        srcs, ws = graph.in_edges(v)
        size *= len(srcs) + 1
    return size


def enumerate_live_edges(
    graph: InfluenceGraph, limit: int = ENUMERATION_LIMIT
) -> Iterator[tuple[LiveEdgeGraph, float]]:
    """Every live-edge graph with its probability (zero-probability members skipped)."""
    size = enumeration_size(graph)
    if size > limit:
        raise EnumerationTooLarge(f"{size} live-edge graphs exceed the limit of {limit}")
    options: list[list[tuple[int, float]]] = []
    for v in range(graph.node_count):
        srcs, ws = graph.in_edges(v)
        opts = [(int(u), float(w)) for u, w in zip(srcs, ws)]
        if opts:
            opts.append((-1, 1.0 - math.fsum(w for _, w in opts)))
        else:
            opts.append((-1, 1.0))
        options.append(opts)
    for combo in itertools.product(*options):
        prob = math.prod(p for _, p in combo)
        if prob <= 0.0:
            continue
        yield LiveEdgeGraph(tuple(u for u, _ in combo)), prob


def run_ldr(instance: ControlInstance, seeds: Iterable[int], rng: np.random.Generator) -> DiffusionOutcome:
    """Sample a live-edge graph, then let every reached node roll its die."""
    if instance.mode is not Mode.CONSTRUCTIVE:
        raise ValueError("run_ldr models constructive shifts; transform destructive instances first")
    seed_idx = _seed_array(seeds, instance.node_count)
    g = sample_live_edge(instance.graph, rng)
    reached, depth = _reach_depth(g, seed_idx.tolist())
    rankings = [tuple(row) for row in instance.profile.rankings.tolist()]
    pos = instance.target_positions()
    for v in sorted(reached):
        r = int(pos[v])
        if r == 1:
            continue
        dist = shift_distribution(r, instance.alpha(r))
        probs = np.asarray(dist.probs)
        ell = int(rng.choice(np.arange(1, r + 1), p=probs / probs.sum()))
        rankings[v] = apply_shift(rankings[v], instance.target, ell)
    return DiffusionOutcome(
        reached, PreferenceProfile(np.array(rankings, dtype=np.int64).reshape(instance.profile.rankings.shape), instance.profile.candidate_labels), depth
    )


def exact_position_distribution(instance: ControlInstance, seeds: Iterable[int]) -> np.ndarray:
    """Exact law of the target's final position per node (n x m, column l-1 = position l)."""
    n, m = instance.node_count, instance.m
    seeds = list(seeds)
    pos = instance.target_positions()
    out = np.zeros((n, m))
    dists = {r: node_distribution(instance, r) for r in range(1, m + 1)}
    for g, prob in enumerate_live_edges(instance.graph):
        reached = reachable(g, seeds)
        for v in range(n):
            r = int(pos[v])
            if v in reached:
                for ell, p in zip(dists[r].positions(), dists[r].probs):
                    out[v, ell - 1] += prob * p
            else:
                out[v, r - 1] += prob
    return out


def exact_expected_score(instance: ControlInstance, seeds: Iterable[int]) -> float:
    """Exact expected total score of the target, by enumerating live-edge graphs."""
    f = instance.rule.scores
    seeds = list(seeds)
    pos = instance.target_positions().tolist()
    reached_value = {
        r: math.fsum(f[ell - 1] * p for ell, p in zip(d.positions(), d.probs))
        for r, d in ((r, node_distribution(instance, r)) for r in range(1, instance.m + 1))
    }
    total = 0.0
    for g, prob in enumerate_live_edges(instance.graph):
        reached = reachable(g, seeds)
        value = math.fsum(reached_value[r] if v in reached else f[r - 1] for v, r in enumerate(pos))
        total += prob * value
    return total


def exact_candidate_scores(instance: ControlInstance, seeds: Iterable[int]) -> Iterator[tuple[float, np.ndarray]]:
    """Per live-edge graph: its probability and every candidate's expected score on it.

    The expectation over dice is taken by applying each possible shift to the
    node's ranking, independently of :func:`reach_score_deltas`.
    """
    f = instance.rule.scores
    m, target = instance.m, instance.target
    seeds = list(seeds)
    rankings = [tuple(row) for row in instance.profile.rankings.tolist()]
    per_node_reached = []
    per_node_static = []
    for v, ranking in enumerate(rankings):
        static = np.zeros(m)
        for k, c in enumerate(ranking):
            static[c] = f[k]
        r = ranking.index(target) + 1
        moved = np.zeros(m)
        for ell, p in zip(node_distribution(instance, r).positions(), node_distribution(instance, r).probs):
            new = apply_shift(ranking, target, ell)
            for k, c in enumerate(new):
                moved[c] += p * f[k]
        per_node_static.append(static)
        per_node_reached.append(moved)
    for g, prob in enumerate_live_edges(instance.graph):
        reached = reachable(g, seeds)
        scores = np.zeros(m)
        for v in range(len(rankings)):
            scores += per_node_reached[v] if v in reached else per_node_static[v]
        yield prob, scores
