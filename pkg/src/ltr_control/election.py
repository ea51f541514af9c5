"""Candidates, preference profiles and positional scoring rules.

Positions are 1-based throughout (1 = most preferred), matching the usual
notation for scoring functions.  Ties among opponents are broken towards the
lowest candidate id.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np


class ProfileFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ScoringRule:
    """Nonincreasing map from ranking position to points."""

    scores: tuple[int, ...]
    name: str = "custom"

    def __post_init__(self):
        if len(self.scores) < 1:
            raise ValueError("a scoring rule needs at least one position")
        for s in self.scores:
            if int(s) != s or s < 0:
                raise ValueError(f"scores must be non-negative integers, got {self.scores}")
        if any(a < b for a, b in zip(self.scores, self.scores[1:])):
            raise ValueError(f"scores must be nonincreasing, got {self.scores}")
        object.__setattr__(self, "scores", tuple(int(s) for s in self.scores))

    @property
    def m(self) -> int:
        return len(self.scores)

    @classmethod
    def plurality(cls, m: int) -> "ScoringRule":
        return cls((1,) + (0,) * (m - 1), "plurality")

    @classmethod
    def approval(cls, m: int, t: int) -> "ScoringRule":
        if not 0 <= t <= m:
            raise ValueError(f"t-approval needs 0 <= t <= m, got t={t}, m={m}")
        return cls((1,) * t + (0,) * (m - t), f"approval:{t}")

    @classmethod
    def veto(cls, m: int, t: int) -> "ScoringRule":
        if not 0 <= t <= m:
            raise ValueError(f"t-veto needs 0 <= t <= m, got t={t}, m={m}")
        return cls((1,) * (m - t) + (0,) * t, f"veto:{t}")

    @classmethod
    def borda(cls, m: int) -> "ScoringRule":
        return cls(tuple(m - pos for pos in range(1, m + 1)), "borda")

    @classmethod
    def custom(cls, scores: Sequence[int]) -> "ScoringRule":
        return cls(tuple(scores), "custom:" + ",".join(str(int(s)) for s in scores))

    @classmethod
    def parse(cls, text: str, m: int) -> "ScoringRule":
        """Build a rule from ``plurality``, ``approval:t``, ``veto:t``, ``borda`` or ``custom:s1,s2,...``."""
        kind, _, arg = text.strip().partition(":")
        kind = kind.lower()
        if kind == "plurality":
            return cls.plurality(m)
        if kind == "borda":
            return cls.borda(m)
        if kind in ("approval", "veto"):
            if not arg:
                raise ValueError(f"{kind} needs a parameter, e.g. {kind}:2")
            return cls.approval(m, int(arg)) if kind == "approval" else cls.veto(m, int(arg))
        if kind == "custom":
            rule = cls.custom([int(x) for x in arg.split(",")])
            if rule.m != m:
                raise ValueError(f"custom rule has {rule.m} scores but there are {m} candidates")
            return rule
        raise ValueError(f"unknown scoring rule {text!r}")

    def as_array(self) -> np.ndarray:
        return np.asarray(self.scores, dtype=np.int64)

    def complement(self) -> "ScoringRule":
        """``f'(r) = f_max - f(m - r + 1)``, used by the destructive reduction."""
        fmax = max(self.scores)
        m = self.m
        return ScoringRule(tuple(fmax - self.scores[m - r] for r in range(1, m + 1)), f"complement({self.name})")


def score_of(rule: ScoringRule, position: int) -> int:
    if not 1 <= position <= rule.m:
        raise ValueError(f"position {position} outside 1..{rule.m}")
    return rule.scores[position - 1]


@dataclass(frozen=True, eq=False)
class PreferenceProfile:
    """One ranking per node.

    ``rankings[v, k]`` is the candidate at position ``k + 1`` for node ``v``;
    ``positions[v, c]`` is the 1-based position of candidate ``c``.
    """

    rankings: np.ndarray
    candidate_labels: tuple[str, ...] = ()
    positions: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        r = np.array(self.rankings, dtype=np.int64, copy=True)
        if r.ndim != 2:
            raise ValueError("rankings must be a 2-d array (nodes x candidates)")
        n, m = r.shape
        if m < 2:
            raise ValueError(f"need at least 2 candidates, got {m}")
        if n and not np.array_equal(np.sort(r, axis=1), np.broadcast_to(np.arange(m), (n, m))):
            bad = int(np.flatnonzero((np.sort(r, axis=1) != np.arange(m)).any(axis=1))[0])
            raise ValueError(f"ranking of node {bad} is not a permutation of 0..{m - 1}")
        r.setflags(write=False)
        pos = np.empty_like(r)
        rows = np.arange(n)[:, None]
        pos[rows, r] = np.arange(1, m + 1)
        pos.setflags(write=False)
        object.__setattr__(self, "rankings", r)
        object.__setattr__(self, "positions", pos)
        if not self.candidate_labels:
            object.__setattr__(self, "candidate_labels", tuple(str(c) for c in range(m)))

    @property
    def node_count(self) -> int:
        return self.rankings.shape[0]

    @property
    def candidate_count(self) -> int:
        return self.rankings.shape[1]

    def position(self, v: int, candidate: int) -> int:
        return int(self.positions[v, candidate])

    def nodes_with(self, candidate: int, position: int) -> np.ndarray:
        """Nodes ranking ``candidate`` at ``position``."""
        return np.flatnonzero(self.positions[:, candidate] == position)

    def reversed(self) -> "PreferenceProfile":
        return PreferenceProfile(self.rankings[:, ::-1], self.candidate_labels)

    def candidate_id(self, token: str | int) -> int:
        token = str(token)
        if token in self.candidate_labels:
            return self.candidate_labels.index(token)
        try:
            c = int(token)
        except ValueError:
            raise ValueError(f"unknown candidate {token!r}") from None
        if not 0 <= c < self.candidate_count:
            raise ValueError(f"candidate id {c} outside 0..{self.candidate_count - 1}")
        return c


def score_table(profile: PreferenceProfile, rule: ScoringRule) -> np.ndarray:
    """Total score of every candidate."""
    if rule.m != profile.candidate_count:
        raise ValueError(f"rule has {rule.m} positions but profile has {profile.candidate_count} candidates")
    f = rule.as_array()
    return f[profile.positions - 1].sum(axis=0)


def total_score(profile: PreferenceProfile, rule: ScoringRule, candidate: int) -> int:
    return int(score_table(profile, rule)[candidate])


def strongest_opponent(scores: Sequence[float], target: int) -> int:
    """Highest-scoring candidate other than ``target``; lowest id on ties."""
    best = None
    for c, s in enumerate(scores):
        if c == target:
            continue
        if best is None or s > scores[best]:
            best = c
    assert best is not None
    return best


def margin_from_scores(scores: Sequence[float], target: int) -> float:
    return scores[strongest_opponent(scores, target)] - scores[target]


def margin(profile: PreferenceProfile, rule: ScoringRule, target: int) -> int:
    """Best opponent's total score minus the target's (negative when the target leads)."""
    return int(margin_from_scores(score_table(profile, rule).tolist(), target))


def apply_shift(ranking: Sequence[int], target: int, new_position: int) -> tuple[int, ...]:
    """Move ``target`` to ``new_position``; the candidates in between slide one slot."""
    order = list(ranking)
    if not 1 <= new_position <= len(order):
        raise ValueError(f"position {new_position} outside 1..{len(order)}")
    order.remove(target)
    order.insert(new_position - 1, target)
    return tuple(order)


def load_preferences(text: str | TextIO, node_labels: Sequence[str]) -> PreferenceProfile:
    """Parse ``node_label: c3,c1,c2`` lines (most preferred first).

    Candidate labels are mapped to ids in order of first appearance; every
    node of the graph must appear exactly once.
    """
    lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()
    node_index = {label: i for i, label in enumerate(node_labels)}
    cand_index: dict[str, int] = {}
    rows: dict[int, list[int]] = {}
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        node, sep, rest = stripped.partition(":")
        if not sep:
            raise ProfileFormatError(f"line {lineno}: expected 'node: c1,c2,...'")
        node = node.strip()
        if node not in node_index:
            raise ProfileFormatError(f"line {lineno}: node {node!r} is not in the graph")
        v = node_index[node]
        if v in rows:
            raise ProfileFormatError(f"line {lineno}: node {node!r} listed twice")
        ranking = []
        for token in (t.strip() for t in rest.split(",")):
            if not token:
                raise ProfileFormatError(f"line {lineno}: empty candidate name")
            ranking.append(cand_index.setdefault(token, len(cand_index)))
        rows[v] = ranking
    missing = [label for label, i in node_index.items() if i not in rows]
    if missing:
        raise ProfileFormatError(f"missing preferences for {len(missing)} node(s), e.g. {missing[:3]}")
    m = len(cand_index)
    for v, ranking in rows.items():
        if sorted(ranking) != list(range(m)):
            raise ProfileFormatError(f"node {node_labels[v]!r} does not rank all {m} candidates exactly once")
    labels = tuple(sorted(cand_index, key=cand_index.get))
    return PreferenceProfile(np.array([rows[v] for v in range(len(node_labels))], dtype=np.int64).reshape(len(node_labels), m), labels)


def dump_preferences(profile: PreferenceProfile, node_labels: Sequence[str]) -> str:
    labels = profile.candidate_labels
    return "".join(
        f"{node_labels[v]}: {','.join(labels[c] for c in profile.rankings[v])}\n" for v in range(profile.node_count)
    )
