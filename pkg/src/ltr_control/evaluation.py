"""Margin of victory (MoV) and probability of victory (PoV).

The margin is the best opponent's score minus the target's.  Constructive MoV is
``margin_before - margin_after`` (how much the gap closed); destructive MoV is
``margin_after - margin_before``.  On a fixed live-edge graph the dice are
averaged inside each candidate's score, which is the closed form the
approximation guarantees are stated for.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from ._rng import derive_rng
from .diffusion import RUN_CHUNK, ControlInstance, Mode, candidate_scores, simulate_ltr
from .election import margin_from_scores, score_table
from .live_edge import LiveEdgeGraph, exact_candidate_scores, node_distribution, reachable
from .optimizer import Estimator, LiveEdgeSample, per_sample_scores


@dataclass
class MovReport:
    expected_mov: float
    stderr: float
    mov_samples: int
    mu_empty: int
    mu_after: float
    expected_scores: list[float] = field(default_factory=list)
    pov: float = float("nan")
    pov_runs: int = 0

    def rows(self, labels: Iterable[str] | None = None) -> list[tuple[str, str]]:
        labels = list(labels) if labels is not None else [str(i) for i in range(len(self.expected_scores))]
        out = [
            ("expected_mov", f"{self.expected_mov:.6f}"),
            ("stderr", f"{self.stderr:.6f}"),
            ("mov_samples", str(self.mov_samples)),
            ("mu_empty", str(self.mu_empty)),
            ("mu_after", f"{self.mu_after:.6f}"),
            ("pov", "" if self.pov_runs == 0 else f"{self.pov:.6f}"),
            ("pov_runs", str(self.pov_runs)),
        ]
        out += [(f"score[{lab}]", f"{s:.6f}") for lab, s in zip(labels, self.expected_scores)]
        return out


def mu_empty(instance: ControlInstance) -> int:
    scores = score_table(instance.profile, instance.rule).tolist()
    return int(margin_from_scores(scores, instance.target))


def mov_from_margins(instance: ControlInstance, margin_after):
    if instance.mode is Mode.CONSTRUCTIVE:
        return mu_empty(instance) - margin_after
    return margin_after - mu_empty(instance)


def mov_on_live_edge(instance: ControlInstance, seeds: Iterable[int], g: LiveEdgeGraph) -> float:
    """Closed-form MoV on one live-edge graph, written as gain and opponent terms.

    Constructive: target gain plus ``min`` over opponents of (pre-election best
    score - opponent's score + opponent's expected loss).  Destructive mirrors
    it with the target's expected loss and the opponents' expected gains.
    """
    f = instance.rule.scores
    m, target = instance.m, instance.target
    pos = instance.profile.positions
    base = score_table(instance.profile, instance.rule).tolist()
    opponents = [c for c in range(m) if c != target]
    best_before = max(base[c] for c in opponents)
    reached = reachable(g, seeds)

    target_change = 0.0
    opp_change = [0.0] * m
    for v in sorted(reached):
        r = int(pos[v, target])
        dist = node_distribution(instance, r)
        for ell, p in zip(dist.positions(), dist.probs):
            if ell == r or p == 0.0:
                continue
            target_change += p * (f[ell - 1] - f[r - 1])
            for z in opponents:
                h = int(pos[v, z])
                if ell <= h < r:  # overtaken: drops from h to h + 1
                    opp_change[z] += p * (f[h] - f[h - 1])
                elif r < h <= ell:  # passed over on the way down: climbs to h - 1
                    opp_change[z] += p * (f[h - 2] - f[h - 1])

    if instance.mode is Mode.CONSTRUCTIVE:
        # opp_change holds losses as non-positive numbers
        return target_change + min(best_before - base[z] - opp_change[z] for z in opponents)
    return -target_change + max(base[z] + opp_change[z] for z in opponents) - best_before


def expected_mov(instance: ControlInstance, seeds: Iterable[int], est: Estimator) -> MovReport:
    """Mean and standard error of the closed-form MoV over sampled live-edge graphs."""
    seeds = list(seeds)
    sample = LiveEdgeSample.draw(instance, est, 1)
    scores = per_sample_scores(instance, seeds, sample)
    target = instance.target
    others = np.delete(scores, target, axis=1)
    margin_after = others.max(axis=1) - scores[:, target]
    mov = mov_from_margins(instance, margin_after)
    err = float(mov.std(ddof=1) / np.sqrt(mov.size)) if mov.size > 1 else 0.0
    return MovReport(
        expected_mov=float(mov.mean()),
        stderr=err,
        mov_samples=int(mov.size),
        mu_empty=mu_empty(instance),
        mu_after=float(margin_after.mean()),
        expected_scores=scores.mean(axis=0).tolist(),
    )


def exact_expected_mov(instance: ControlInstance, seeds: Iterable[int]) -> float:
    """Probability-weighted closed-form MoV over every live-edge graph."""
    total = 0.0
    for prob, scores in exact_candidate_scores(instance, seeds):
        after = margin_from_scores(scores.tolist(), instance.target)
        total += prob * mov_from_margins(instance, after)
    return total


def simulated_scores(
    instance: ControlInstance, seeds: Iterable[int], runs: int, master_seed: int, *keys: int, threads: int = 1
) -> np.ndarray:
    """Tallied candidate scores of ``runs`` independent full simulations (runs x m).

    Chunks carry their own generators, so ``threads`` never changes the result.
    """
    if runs < 1:
        raise ValueError("need at least one run")
    seeds = list(seeds)
    n_chunks = -(-runs // RUN_CHUNK)

    def chunk(i):
        size = min(RUN_CHUNK, runs - i * RUN_CHUNK)
        batch = simulate_ltr(instance, seeds, size, derive_rng(master_seed, *keys, i))
        return candidate_scores(instance, batch.final_position)

    if threads > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(chunk, range(n_chunks)))
    else:
        parts = [chunk(i) for i in range(n_chunks)]
    return np.concatenate(parts, axis=0)


def wins(scores: np.ndarray, target: int) -> np.ndarray:
    """Runs in which the target strictly beats every opponent (ties are losses)."""
    others = np.delete(scores, target, axis=1)
    return scores[:, target] > others.max(axis=1)


def simulated_margins(scores: np.ndarray, target: int) -> np.ndarray:
    others = np.delete(scores, target, axis=1)
    return others.max(axis=1) - scores[:, target]


def pov(instance: ControlInstance, seeds: Iterable[int], runs: int, master_seed: int) -> float:
    """Fraction of simulated elections the target wins outright."""
    scores = simulated_scores(instance, seeds, runs, master_seed)
    return float(wins(scores, instance.target).mean())


def evaluate(
    instance: ControlInstance, seeds: Iterable[int], est: Estimator, pov_runs: int = 0, master_seed: int | None = None
) -> MovReport:
    seeds = list(seeds)
    report = expected_mov(instance, seeds, est)
    if pov_runs:
        report.pov = pov(instance, seeds, pov_runs, est.seed if master_seed is None else master_seed)
        report.pov_runs = pov_runs
    return report
