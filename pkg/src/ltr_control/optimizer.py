"""Monte-Carlo score estimation and greedy seed selection.

The expected score of the target is estimated on a fixed set of sampled
live-edge graphs (common random numbers).  On such a sample the estimate is a
non-negative combination of coverage functions, so greedy selection enjoys the
usual ``1 - 1/e`` guarantee with respect to the sampled objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ._rng import derive_rng
from .diffusion import AlphaTable, ControlInstance, Mode, _seed_array
from .live_edge import reach_score_deltas, sample_parents

DEFAULT_SAMPLES = 256
# Relative slack under which two marginal gains count as tied.
TIE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Estimator:
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    common_random_numbers: bool = True

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("an estimator needs at least one sample")


@dataclass
class SeedSet:
    nodes: list[int] = field(default_factory=list)
    gains: list[float] = field(default_factory=list)
    estimate: float = 0.0
    baseline: float = 0.0

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self):
        return iter(self.nodes)


def _ancestor_pairs(parent: Sequence[int]) -> tuple[list[int], list[int]]:
    """All (node, ancestor) pairs of one live-edge graph, ancestors including the node.

    A node is reached from a seed set iff one of its ancestors is a seed.  Nodes
    on a cycle have exactly the cycle as ancestors.
    """
    n = len(parent)
    state = [0] * n  # 0 unvisited, 1 on stack, 2 done
    anc: list[list[int] | None] = [None] * n
    for start in range(n):
        if state[start]:
            continue
        path = []
        v = start
        while v >= 0 and state[v] == 0:
            state[v] = 1
            path.append(v)
            v = parent[v]
        if v >= 0 and state[v] == 1:
            # closed a cycle: everything from v onwards on the path
            i = path.index(v)
            cycle = path[i:]
            for c in cycle:
                anc[c] = cycle
                state[c] = 2
            path = path[:i]
            tail = cycle
        else:
            tail = anc[v] if v >= 0 else []
        for node in reversed(path):
            anc[node] = [node] + tail  # type: ignore[operator]
            state[node] = 2
            tail = anc[node]  # type: ignore[assignment]
    nodes: list[int] = []
    ancestors: list[int] = []
    for v in range(n):
        a = anc[v]
        nodes.extend([v] * len(a))  # type: ignore[arg-type]
        ancestors.extend(a)  # type: ignore[arg-type]
    return nodes, ancestors


class LiveEdgeSample:
    """A fixed batch of live-edge graphs with precomputed reachability structure."""

    def __init__(self, parents: np.ndarray):
        self.parents = parents
        self.count, self.node_count = parents.shape
        sample_idx, node_idx, anc_idx = [], [], []
        for s, row in enumerate(parents.tolist()):
            nodes, ancestors = _ancestor_pairs(row)
            sample_idx.append(np.full(len(nodes), s, dtype=np.int64))
            node_idx.append(np.asarray(nodes, dtype=np.int64))
            anc_idx.append(np.asarray(ancestors, dtype=np.int64))
        self._sample = np.concatenate(sample_idx) if sample_idx else np.zeros(0, np.int64)
        self._node = np.concatenate(node_idx) if node_idx else np.zeros(0, np.int64)
        self._anc = np.concatenate(anc_idx) if anc_idx else np.zeros(0, np.int64)

    @classmethod
    def draw(cls, instance: ControlInstance, est: Estimator, *keys: int) -> "LiveEdgeSample":
        rng = derive_rng(est.seed, *keys)
        return cls(sample_parents(instance.graph, est.samples, rng))

    def reached(self, seeds: Iterable[int]) -> np.ndarray:
        """(samples x n) mask of nodes reached from ``seeds`` in each graph."""
        mask = np.zeros((self.count, self.node_count), dtype=bool)
        seeds = np.asarray(sorted(set(int(s) for s in seeds)), dtype=np.int64)
        if seeds.size:
            hit = np.isin(self._anc, seeds)
            mask[self._sample[hit], self._node[hit]] = True
        return mask

    def marginal_gains(self, uncovered_value: np.ndarray) -> np.ndarray:
        """Total over samples of the value newly reached by each single extra seed.

        ``uncovered_value`` is (samples x n): value of each node not yet reached.
        """
        weights = uncovered_value[self._sample, self._node]
        return np.bincount(self._anc, weights=weights, minlength=self.node_count)

    def cover(self, reached: np.ndarray, node: int) -> None:
        hit = self._anc == node
        reached[self._sample[hit], self._node[hit]] = True


def per_sample_scores(instance: ControlInstance, seeds: Iterable[int], sample: LiveEdgeSample) -> np.ndarray:
    """Expected score of every candidate on each sampled graph (samples x m)."""
    from .election import score_table

    base = score_table(instance.profile, instance.rule).astype(np.float64)
    deltas = reach_score_deltas(instance)
    reached = sample.reached(seeds).astype(np.float64)
    return base[None, :] + reached @ deltas


def estimate_score(instance: ControlInstance, seeds: Iterable[int], est: Estimator) -> float:
    """Sample mean of the target's closed-form expected score over live-edge graphs."""
    sample = LiveEdgeSample.draw(instance, est)
    return float(per_sample_scores(instance, seeds, sample)[:, instance.target].mean())


def estimate_score_with_error(instance: ControlInstance, seeds: Iterable[int], est: Estimator) -> tuple[float, float]:
    sample = LiveEdgeSample.draw(instance, est)
    values = per_sample_scores(instance, seeds, sample)[:, instance.target]
    err = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return float(values.mean()), err


def greedy_select(instance: ControlInstance, est: Estimator, budget: int | None = None) -> SeedSet:
    """Repeatedly add the node with the largest estimated marginal score gain.

    Ties go to the lowest node id; selection stops early once no node adds
    anything.  With ``common_random_numbers`` one sample is shared by the whole
    run, otherwise each iteration draws a fresh one.
    """
    if instance.mode is not Mode.CONSTRUCTIVE:
        raise ValueError("greedy_select expects a constructive instance; use solve() for destructive control")
    budget = instance.budget if budget is None else budget
    n = instance.node_count
    if budget > n:
        raise ValueError(f"budget {budget} exceeds the {n} nodes")
    gain_per_node = reach_score_deltas(instance)[:, instance.target]
    f0 = float(instance.rule.as_array()[instance.target_positions() - 1].sum())
    result = SeedSet(estimate=f0, baseline=f0)
    if budget == 0:
        return result

    sample = LiveEdgeSample.draw(instance, est, 0)
    reached = np.zeros((sample.count, n), dtype=bool)
    chosen: list[int] = []
    for it in range(budget):
        if not est.common_random_numbers and it:
            sample = LiveEdgeSample.draw(instance, est, it)
            reached = sample.reached(chosen)
        uncovered = np.where(reached, 0.0, gain_per_node[None, :])
        gains = sample.marginal_gains(uncovered) / sample.count
        gains[chosen] = -np.inf
        best = float(gains.max())
        if best <= TIE_TOLERANCE * max(1.0, f0):
            break
        node = int(np.flatnonzero(gains >= best - TIE_TOLERANCE * max(1.0, abs(best)))[0])
        if est.common_random_numbers and result.gains:
            # the sampled objective is a coverage function: gains can only shrink
            assert best <= result.gains[-1] + TIE_TOLERANCE * max(1.0, abs(best)), "estimated score is not submodular"
        assert best >= 0.0, "estimated score is not monotone"
        chosen.append(node)
        sample.cover(reached, node)
        result.nodes.append(node)
        result.gains.append(best)
        result.estimate += best
    return result


def destructive_transform(instance: ControlInstance) -> ControlInstance:
    """Reverse every ranking and complement the rule, turning demotion into promotion.

    Alpha is re-indexed so that a node consults the value for its original
    position: ``alpha'(r) = alpha(m - r + 1)``.
    """
    if instance.mode is not Mode.DESTRUCTIVE:
        raise ValueError("destructive_transform expects a destructive instance")
    return ControlInstance(
        instance.graph,
        instance.profile.reversed(),
        instance.rule.complement(),
        instance.target,
        AlphaTable(instance.alpha.values[::-1]),
        instance.budget,
        Mode.CONSTRUCTIVE,
    )


def solve(instance: ControlInstance, est: Estimator) -> SeedSet:
    if instance.mode is Mode.DESTRUCTIVE:
        return greedy_select(destructive_transform(instance), est)
    return greedy_select(instance, est)


def top_degree_seeds(instance: ControlInstance, budget: int | None = None) -> list[int]:
    """Baseline: highest out-degree first, lowest id on ties."""
    budget = instance.budget if budget is None else budget
    deg = instance.graph.out_degree()
    order = np.lexsort((np.arange(instance.node_count), -deg))
    return sorted(order[:budget].tolist())


def random_seeds(instance: ControlInstance, rng: np.random.Generator, budget: int | None = None) -> list[int]:
    budget = instance.budget if budget is None else budget
    return sorted(rng.choice(instance.node_count, size=budget, replace=False).tolist())
