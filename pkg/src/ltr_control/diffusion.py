"""Linear threshold activation followed by the ranking-shift phase.

After the threshold process quiesces, each node with active in-neighbours moves
the target candidate up (constructive) or down (destructive) by

    min(cap, floor(alpha(r) * W / s))

where ``r`` is the target's current position, ``W`` the total weight of active
in-neighbours and ``s`` a fresh uniform (0, 1] draw.  Seeds are treated as fully
influenced (``W = 1``): they are reached in every live-edge graph, and this is the
weight under which their shift has the same distribution as the dice roll of the
live-edge process.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from ._rng import derive_rng, uniform_open_closed
from .election import PreferenceProfile, ScoringRule
from .graph import InfluenceGraph

# Fixed chunk size for batched simulation; results depend on it, so it is not a tuning knob.
RUN_CHUNK = 4096


class Mode(enum.Enum):
    CONSTRUCTIVE = "constructive"
    DESTRUCTIVE = "destructive"

    @classmethod
    def parse(cls, value: str | "Mode") -> "Mode":
        return value if isinstance(value, cls) else cls(str(value).lower())


@dataclass(frozen=True)
class AlphaTable:
    """Shift rate per target position; ``values[r - 1]`` is alpha(r)."""

    values: tuple[float, ...]

    def __post_init__(self):
        vals = tuple(float(a) for a in self.values)
        if not vals:
            raise ValueError("alpha table is empty")
        for a in vals:
            if not 0.0 <= a <= 1.0:
                raise ValueError(f"alpha values must lie in [0,1], got {a}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, a: float, m: int) -> "AlphaTable":
        return cls((a,) * m)

    @classmethod
    def custom(cls, values: Sequence[float]) -> "AlphaTable":
        return cls(tuple(values))

    @classmethod
    def parse(cls, text: str, m: int) -> "AlphaTable":
        parts = [p for p in str(text).split(",") if p.strip()]
        if len(parts) == 1:
            return cls.constant(float(parts[0]), m)
        if len(parts) != m:
            raise ValueError(f"alpha needs 1 or {m} values, got {len(parts)}")
        return cls.custom([float(p) for p in parts])

    def __call__(self, position: int) -> float:
        return self.values[position - 1]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=np.float64)

    def reversed(self) -> "AlphaTable":
        return AlphaTable(self.values[::-1])


@dataclass(frozen=True, eq=False)
class ControlInstance:
    graph: InfluenceGraph
    profile: PreferenceProfile
    rule: ScoringRule
    target: int
    alpha: AlphaTable
    budget: int
    mode: Mode = Mode.CONSTRUCTIVE

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode.parse(self.mode))
        m = self.profile.candidate_count
        if self.profile.node_count != self.graph.node_count:
            raise ValueError(
                f"profile covers {self.profile.node_count} nodes, graph has {self.graph.node_count}"
            )
        if self.rule.m != m:
            raise ValueError(f"rule has {self.rule.m} positions for {m} candidates")
        if len(self.alpha.values) != m:
            raise ValueError(f"alpha has {len(self.alpha.values)} entries for {m} candidates")
        if not 0 <= self.target < m:
            raise ValueError(f"target {self.target} outside 0..{m - 1}")
        if not 0 <= self.budget <= self.graph.node_count:
            raise ValueError(f"budget {self.budget} outside 0..{self.graph.node_count}")

    @property
    def m(self) -> int:
        return self.profile.candidate_count

    @property
    def node_count(self) -> int:
        return self.graph.node_count

    def target_positions(self) -> np.ndarray:
        return self.profile.positions[:, self.target]

    def with_budget(self, budget: int) -> "ControlInstance":
        return ControlInstance(self.graph, self.profile, self.rule, self.target, self.alpha, budget, self.mode)


@dataclass(frozen=True, eq=False)
class DiffusionOutcome:
    active_set: frozenset[int]
    shifted_profile: PreferenceProfile
    rounds: int


def _seed_array(seeds: Iterable[int], n: int) -> np.ndarray:
    seeds = sorted(set(int(s) for s in seeds))
    for s in seeds:
        if not 0 <= s < n:
            raise ValueError(f"seed {s} outside 0..{n - 1}")
    return np.asarray(seeds, dtype=np.int64)


def _ltm_batch(graph: InfluenceGraph, seeds: np.ndarray, thresholds: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Synchronous threshold process for a batch of threshold vectors (runs x n)."""
    runs, n = thresholds.shape
    active = np.zeros((runs, n), dtype=bool)
    active[:, seeds] = True
    rounds = np.zeros(runs, dtype=np.int64)
    if seeds.size == 0 or graph.edge_count == 0:
        return active, rounds
    mt = graph.weight_matrix().T.tocsr()
    for step in range(1, n + 1):
        weight = (mt @ active.T.astype(np.float64)).T
        nxt = active | (weight >= thresholds)
        changed = (nxt != active).any(axis=1)
        if not changed.any():
            break
        rounds[changed] = step
        active = nxt
    return active, rounds


def run_ltm(graph: InfluenceGraph, seeds: Iterable[int], thresholds: Sequence[float]) -> set[int]:
    """Final active set of the linear threshold process for fixed thresholds."""
    t = np.asarray(thresholds, dtype=np.float64)
    if t.shape != (graph.node_count,):
        raise ValueError(f"need {graph.node_count} thresholds, got shape {t.shape}")
    if ((t <= 0.0) | (t > 1.0)).any():
        raise ValueError("thresholds must lie in (0, 1]")
    active, _ = _ltm_batch(graph, _seed_array(seeds, graph.node_count), t[None, :])
    return set(np.flatnonzero(active[0]).tolist())


def shift_up(position: int, alpha_r: float, threshold: float, active_weight: float) -> int:
    """Positions the target climbs: ``min(r - 1, floor(alpha_r * W / t))``."""
    if active_weight <= 0.0:
        return 0
    return int(min(position - 1, math.floor(alpha_r * active_weight / threshold)))


def shift_down(position: int, alpha_r: float, threshold: float, active_weight: float, m: int) -> int:
    """Positions the target drops: ``min(m - r, floor(alpha_r * W / t))``."""
    if active_weight <= 0.0:
        return 0
    return int(min(m - position, math.floor(alpha_r * active_weight / threshold)))


@dataclass(frozen=True, eq=False)
class LtrBatch:
    """Many independent runs of the full process, one row per run."""

    active: np.ndarray  # runs x n, bool
    final_position: np.ndarray  # runs x n, target's position after the shift
    rounds: np.ndarray  # runs


def simulate_ltr(instance: ControlInstance, seeds: Iterable[int], runs: int, rng: np.random.Generator) -> LtrBatch:
    """Vectorised runs sharing one generator: thresholds first, then shift draws."""
    graph = instance.graph
    n = graph.node_count
    seed_idx = _seed_array(seeds, n)
    thresholds = uniform_open_closed(rng, (runs, n))
    shift_draws = uniform_open_closed(rng, (runs, n))
    active, rounds = _ltm_batch(graph, seed_idx, thresholds)

    if graph.edge_count:
        weight = (graph.weight_matrix().T.tocsr() @ active.T.astype(np.float64)).T
    else:
        weight = np.zeros((runs, n))
    weight[:, seed_idx] = 1.0

    r = instance.target_positions()[None, :]
    alpha_r = instance.alpha.as_array()[r - 1]
    with np.errstate(over="ignore"):
        raw = np.floor(alpha_r * weight / shift_draws)
    if instance.mode is Mode.CONSTRUCTIVE:
        step = np.minimum(r - 1, raw).astype(np.int64)
        final = r - step
    else:
        step = np.minimum(instance.m - r, raw).astype(np.int64)
        final = r + step
    return LtrBatch(active, final, rounds)


def iter_ltr_batches(
    instance: ControlInstance, seeds: Iterable[int], runs: int, master_seed: int, *keys: int
) -> Iterator[LtrBatch]:
    """Runs in fixed-size chunks, each with its own derived generator."""
    seeds = list(seeds)
    for chunk, start in enumerate(range(0, runs, RUN_CHUNK)):
        size = min(RUN_CHUNK, runs - start)
        yield simulate_ltr(instance, seeds, size, derive_rng(master_seed, *keys, chunk))


def shifted_positions(profile: PreferenceProfile, target: int, final_position: np.ndarray) -> np.ndarray:
    """Positions of every candidate once the target moves to ``final_position``.

    ``final_position`` is (runs x n); the result is (runs x n x m).
    """
    pos = profile.positions[None, :, :]
    r = profile.positions[None, :, target][..., None]
    ell = final_position[..., None]
    new = pos + ((pos >= ell) & (pos < r)) - ((pos > r) & (pos <= ell))
    new[..., target] = final_position
    return new


def candidate_scores(instance: ControlInstance, final_position: np.ndarray) -> np.ndarray:
    """Tallied score of every candidate per run (runs x m)."""
    f = instance.rule.as_array()
    out = np.empty((final_position.shape[0], instance.m), dtype=np.int64)
    step = max(1, 2_000_000 // max(1, instance.node_count * instance.m))
    for lo in range(0, final_position.shape[0], step):
        new = shifted_positions(instance.profile, instance.target, final_position[lo : lo + step])
        out[lo : lo + step] = f[new - 1].sum(axis=1)
    return out


def run_ltr(instance: ControlInstance, seeds: Iterable[int], rng: np.random.Generator) -> DiffusionOutcome:
    """One run of activation plus ranking shift."""
    batch = simulate_ltr(instance, seeds, 1, rng)
    new_pos = shifted_positions(instance.profile, instance.target, batch.final_position)[0]
    rankings = np.argsort(new_pos, axis=1)
    return DiffusionOutcome(
        frozenset(np.flatnonzero(batch.active[0]).tolist()),
        PreferenceProfile(rankings, instance.profile.candidate_labels),
        int(batch.rounds[0]),
    )
