"""Directed influence graphs for the linear threshold model.

An :class:`InfluenceGraph` stores edges ``(u, v, b_uv)`` meaning *u influences v*
with weight ``b_uv``.  Node ids are dense integers ``0..n-1``; the labels seen in
input files are kept in ``labels`` for reporting.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence, TextIO

import numpy as np
from scipy import sparse

from ._rng import as_generator

# Slack allowed on the incoming-weight sum before a node counts as violating.
LTM_TOLERANCE = 1e-12


class GraphFormatError(ValueError):
    """Raised when an edge list cannot be parsed or violates the model."""


class WeightMode(enum.Enum):
    AS_GIVEN = "given"
    UNIFORM_BY_IN_DEGREE = "uniform"
    RANDOM_NORMALIZED = "random"

    @classmethod
    def parse(cls, value: str | "WeightMode") -> "WeightMode":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown weight mode {value!r} (choose from {choices})") from None


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    node: int | None = None
    edge: tuple[int, int] | None = None

    def __str__(self) -> str:
        return f"{self.rule}: {self.message}"


@dataclass(frozen=True, eq=False)
class InfluenceGraph:
    """Immutable directed weighted graph.

    ``sources``, ``targets`` and ``weights`` are parallel arrays sorted by
    ``(target, source)`` so that the in-edges of a node are contiguous; use
    :meth:`in_edges` to get them.
    """

    node_count: int
    sources: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    labels: tuple[str, ...] = ()
    _in_offsets: np.ndarray = field(repr=False, default=None)  # type: ignore[assignment]

    @classmethod
    def from_edges(
        cls,
        node_count: int,
        edges: Iterable[tuple[int, int, float]],
        labels: Sequence[str] | None = None,
        check: bool = True,
    ) -> "InfluenceGraph":
        edges = list(edges)
        src = np.array([int(e[0]) for e in edges], dtype=np.int64)
        dst = np.array([int(e[1]) for e in edges], dtype=np.int64)
        w = np.array([float(e[2]) for e in edges], dtype=np.float64)
        order = np.lexsort((src, dst))
        src, dst, w = src[order], dst[order], w[order]
        counts = np.bincount(dst[(dst >= 0) & (dst < node_count)], minlength=node_count) if node_count else np.zeros(0, np.int64)
        offsets = np.zeros(node_count + 1, dtype=np.int64)
        np.cumsum(counts, out=offsets[1:])
        if labels is None:
            labels = [str(i) for i in range(node_count)]
        for arr in (src, dst, w, offsets):
            arr.setflags(write=False)
        graph = cls(node_count, src, dst, w, tuple(labels), offsets)
        if check:
            problems = validate(graph)
            if problems:
                raise GraphFormatError("; ".join(str(p) for p in problems[:5]))
        return graph

    @property
    def edge_count(self) -> int:
        return int(self.sources.size)

    def edges(self) -> list[tuple[int, int, float]]:
        return [(int(u), int(v), float(w)) for u, v, w in zip(self.sources, self.targets, self.weights)]

    def in_edges(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """In-neighbours of ``v`` and the matching weights."""
        lo, hi = self._in_offsets[v], self._in_offsets[v + 1]
        return self.sources[lo:hi], self.weights[lo:hi]

    def in_degree(self) -> np.ndarray:
        return np.diff(self._in_offsets)

    def out_degree(self) -> np.ndarray:
        return np.bincount(self.sources, minlength=self.node_count)

    def in_weight_sums(self) -> np.ndarray:
        return np.bincount(self.targets, weights=self.weights, minlength=self.node_count)

    def out_neighbors(self) -> list[list[int]]:
        out: list[list[int]] = [[] for _ in range(self.node_count)]
        for u, v in zip(self.sources.tolist(), self.targets.tolist()):
            out[u].append(v)
        return out

    def weight_matrix(self) -> sparse.csr_matrix:
        """Sparse matrix ``M`` with ``M[u, v] = b_uv``."""
        return sparse.csr_matrix(
            (self.weights, (self.sources, self.targets)), shape=(self.node_count, self.node_count)
        )

    def label_to_id(self) -> dict[str, int]:
        return {label: i for i, label in enumerate(self.labels)}


def validate(graph: InfluenceGraph) -> list[Violation]:
    """Check every structural rule; an empty list means the graph is valid."""
    out: list[Violation] = []
    n = graph.node_count
    seen: set[tuple[int, int]] = set()
    for u, v, w in graph.edges():
        if not (0 <= u < n and 0 <= v < n):
            out.append(Violation("node-range", f"edge ({u},{v}) has an id outside 0..{n - 1}", edge=(u, v)))
            continue
        if u == v:
            out.append(Violation("self-loop", f"self-loop on node {u}", node=u, edge=(u, v)))
        if (u, v) in seen:
            out.append(Violation("duplicate", f"duplicate edge ({u},{v})", edge=(u, v)))
        seen.add((u, v))
        if not (0.0 <= w <= 1.0) or math.isnan(w):
            out.append(Violation("weight-range", f"edge ({u},{v}) weight {w} outside [0,1]", edge=(u, v)))
    if n:
        ok = (graph.targets >= 0) & (graph.targets < n)
        sums = np.bincount(graph.targets[ok], weights=graph.weights[ok], minlength=n)
        for v in np.flatnonzero(sums > 1.0 + LTM_TOLERANCE):
            out.append(
                Violation("ltm-sum", f"node {int(v)} incoming sum {sums[v]:.6g} > 1", node=int(v))
            )
    return out


def _normalize_incoming(targets: np.ndarray, raw: np.ndarray, n: int) -> np.ndarray:
    sums = np.bincount(targets, weights=raw, minlength=n)
    scale = np.maximum(1.0, sums)
    w = raw / scale[targets]
    # Division can overshoot 1 by an ulp; shave those nodes until the sum fits.
    for v in np.flatnonzero(sums > 1.0):
        idx = np.flatnonzero(targets == v)
        while math.fsum(w[idx]) > 1.0:
            w[idx] = np.nextafter(w[idx], 0.0)
    return w


def load_edge_list(
    text: str | TextIO,
    directed: bool = True,
    weight_mode: WeightMode | str = WeightMode.AS_GIVEN,
    seed: int = 0,
    check: bool = True,
) -> InfluenceGraph:
    """Parse a whitespace-separated edge list.

    Lines are ``u v`` or ``u v w``; lines starting with ``#`` or ``%`` are
    comments.  Labels get dense ids in order of first appearance.  With
    ``directed=False`` every line contributes both ``(u, v)`` and ``(v, u)``.

    ``check=False`` skips model validation so that :func:`validate` can report
    every violation instead of failing on the first.
    """
    mode = WeightMode.parse(weight_mode)
    lines = text.splitlines() if isinstance(text, str) else text.read().splitlines()
    ids: dict[str, int] = {}
    labels: list[str] = []
    edges: list[tuple[int, int, float]] = []
    seen: dict[tuple[int, int], int] = {}

    def node_id(token: str) -> int:
        if token not in ids:
            ids[token] = len(labels)
            labels.append(token)
        return ids[token]

    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#%":
            continue
        parts = stripped.split()
        if len(parts) not in (2, 3):
            raise GraphFormatError(f"line {lineno}: expected 'u v' or 'u v w', got {stripped!r}")
        weight = math.nan
        if len(parts) == 3:
            try:
                weight = float(parts[2])
            except ValueError:
                raise GraphFormatError(f"line {lineno}: bad weight {parts[2]!r}") from None
        if mode is WeightMode.AS_GIVEN:
            if len(parts) == 2:
                raise GraphFormatError(f"line {lineno}: weight missing (weights=given)")
            if check and not 0.0 <= weight <= 1.0:
                raise GraphFormatError(f"line {lineno}: weight {weight} outside [0,1]")
        u, v = node_id(parts[0]), node_id(parts[1])
        if check and u == v:
            raise GraphFormatError(f"line {lineno}: self-loop on {parts[0]!r}")
        pairs = [(u, v)] if directed else [(u, v), (v, u)]
        for pair in pairs:
            if pair in seen and check:
                raise GraphFormatError(
                    f"line {lineno}: duplicate edge ({labels[pair[0]]},{labels[pair[1]]}), first seen on line {seen[pair]}"
                )
            seen.setdefault(pair, lineno)
            edges.append((pair[0], pair[1], weight))

    n = len(labels)
    src = np.array([e[0] for e in edges], dtype=np.int64)
    dst = np.array([e[1] for e in edges], dtype=np.int64)
    if mode is WeightMode.AS_GIVEN:
        w = np.array([e[2] for e in edges], dtype=np.float64)
    elif mode is WeightMode.UNIFORM_BY_IN_DEGREE:
        indeg = np.bincount(dst, minlength=n)
        w = 1.0 / indeg[dst] if edges else np.zeros(0)
    else:
        rng = as_generator(seed)
        raw = 1.0 - rng.random(len(edges))  # uniform on (0, 1]
        w = _normalize_incoming(dst, raw, n)

    graph = InfluenceGraph.from_edges(n, zip(src.tolist(), dst.tolist(), w.tolist()), labels, check=False)
    if check:
        sums = graph.in_weight_sums()
        for v in np.flatnonzero(sums > 1.0 + LTM_TOLERANCE):
            raise GraphFormatError(f"node {labels[v]} incoming sum {sums[v]:.6g} > 1")
    return graph


def reweight(graph: InfluenceGraph, weight_mode: WeightMode | str, seed: int = 0) -> InfluenceGraph:
    """Same topology with weights reassigned under ``weight_mode``."""
    mode = WeightMode.parse(weight_mode)
    n = graph.node_count
    if mode is WeightMode.AS_GIVEN:
        return graph
    if mode is WeightMode.UNIFORM_BY_IN_DEGREE:
        w = 1.0 / graph.in_degree()[graph.targets] if graph.edge_count else np.zeros(0)
    else:
        raw = 1.0 - as_generator(seed).random(graph.edge_count)
        w = _normalize_incoming(graph.targets, raw, n)
    return InfluenceGraph.from_edges(
        n, zip(graph.sources.tolist(), graph.targets.tolist(), w.tolist()), graph.labels
    )


def from_networkx(nx_graph, weight_mode: WeightMode | str = WeightMode.RANDOM_NORMALIZED, seed: int = 0) -> InfluenceGraph:
    """Convert a networkx graph; undirected graphs are doubled into both directions."""
    nodes = list(nx_graph.nodes())
    index = {node: i for i, node in enumerate(nodes)}
    pairs = []
    for a, b in nx_graph.edges():
        if a == b:
            continue
        pairs.append((index[a], index[b]))
        if not nx_graph.is_directed():
            pairs.append((index[b], index[a]))
    base = InfluenceGraph.from_edges(len(nodes), [(u, v, 0.0) for u, v in pairs], [str(x) for x in nodes])
    return reweight(base, weight_mode, seed)
