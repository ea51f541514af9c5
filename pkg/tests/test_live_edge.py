import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import has_cycle, make_instance, random_instance
from ltr_control._rng import derive_rng
from ltr_control.diffusion import _ltm_batch, simulate_ltr
from ltr_control.graph import InfluenceGraph
from ltr_control.live_edge import (
    EnumerationTooLarge,
    LiveEdgeGraph,
    enumerate_live_edges,
    exact_expected_score,
    exact_position_distribution,
    live_edge_probability,
    reachable,
    run_ldr,
    sample_live_edge,
    sample_parents,
    shift_distribution,
    shift_distribution_down,
)


def test_sampling_examples():
    g = InfluenceGraph.from_edges(3, [(0, 1, 1.0)])
    for k in range(20):
        le = sample_live_edge(g, derive_rng(0, k))
        assert le.parent == (-1, 0, -1)
    two = InfluenceGraph.from_edges(3, [(0, 2, 0.3), (1, 2, 0.4)])
    draws = sample_parents(two, 100_000, derive_rng(1))[:, 2]
    for value, p in ((0, 0.3), (1, 0.4), (-1, 0.3)):
        freq = float((draws == value).mean())
        assert abs(freq - p) < 3 * math.sqrt(p * (1 - p) / 100_000)


def test_probability_examples():
    assert live_edge_probability(InfluenceGraph.from_edges(1, []), LiveEdgeGraph((-1,))) == 1.0
    g = InfluenceGraph.from_edges(4, [(0, 1, 0.5), (2, 3, 0.5)])
    assert live_edge_probability(g, LiveEdgeGraph((-1, 0, -1, 2))) == 0.25
    two = InfluenceGraph.from_edges(3, [(0, 2, 0.3), (1, 2, 0.4)])
    assert live_edge_probability(two, LiveEdgeGraph((-1, -1, -1))) == pytest.approx(0.3, abs=1e-15)
    with pytest.raises(ValueError):
        live_edge_probability(two, LiveEdgeGraph((-1, 2, -1)))


def test_reachable_examples():
    chain = LiveEdgeGraph((-1, 0, 1))
    assert reachable(chain, {0}) == {0, 1, 2}
    assert reachable(chain, set()) == frozenset()
    assert reachable(LiveEdgeGraph((-1, 0, -1)), {2}) == {2}


def test_shift_distribution_examples():
    assert shift_distribution(3, 1.0).probs == pytest.approx((0.5, 0.5, 0.0))
    assert shift_distribution(4, 0.6).probs == pytest.approx((0.2, 0.1, 0.3, 0.4))
    assert shift_distribution(2, 0.0).probs == (0.0, 1.0)
    assert shift_distribution(1, 0.7).probs == (1.0,)


def test_downward_distribution():
    d = shift_distribution_down(2, 1.0, 5)
    # Pr[drop >= j] = 1/j for j=1..3
    assert d.positions() == range(2, 6)
    assert d.probs == pytest.approx((0.0, 0.5, 1 / 6, 1 / 3))
    assert shift_distribution_down(5, 0.4, 5).probs == (1.0,)


@pytest.mark.parametrize("r", range(1, 13))
def test_distributions_are_probability_vectors(r):
    for a in np.round(np.arange(0, 1.0001, 0.05), 10):
        up = shift_distribution(r, float(a)).probs
        assert min(up) >= 0 and abs(math.fsum(up) - 1) <= 1e-12
        down = shift_distribution_down(r, float(a), 12).probs
        assert min(down) >= 0 and abs(math.fsum(down) - 1) <= 1e-12


def test_plurality_projection_of_the_dice():
    # only the top position scores under plurality: a coin with success alpha/(r-1)
    for r in range(2, 9):
        for a in (0.1, 0.5, 1.0):
            assert shift_distribution(r, a).prob(1) == pytest.approx(a / (r - 1))


def test_enumeration_examples():
    one = list(enumerate_live_edges(InfluenceGraph.from_edges(2, [(0, 1, 0.6)])))
    assert sorted(p for _, p in one) == pytest.approx([0.4, 0.6])
    certain = list(enumerate_live_edges(InfluenceGraph.from_edges(2, [(0, 1, 1.0), (1, 0, 1.0)])))
    assert len(certain) == 1 and certain[0][1] == 1.0
    three = list(enumerate_live_edges(InfluenceGraph.from_edges(3, [(0, 2, 0.3), (1, 2, 0.4)])))
    assert sorted(p for _, p in three) == pytest.approx([0.3, 0.3, 0.4])
    big = InfluenceGraph.from_edges(8, [(u, v, 0.1) for u in range(8) for v in range(8) if u != v])
    with pytest.raises(EnumerationTooLarge):
        list(enumerate_live_edges(big))


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32))
def test_enumeration_sums_to_one(seed):
    inst = random_instance(np.random.default_rng(seed), max_nodes=5, max_edges=8)
    probs = [p for _, p in enumerate_live_edges(inst.graph)]
    assert abs(math.fsum(probs) - 1.0) <= 1e-9
    assert all(p > 0 for p in probs)


def test_exact_expected_score_examples():
    inst = make_instance([(0, 1, 1.0)], [[0, 1], [1, 0]], alpha=1.0)
    assert exact_expected_score(inst, []) == 1.0
    assert exact_expected_score(inst, [0]) == 2.0
    half = make_instance([(0, 1, 0.5)], [[0, 1], [1, 0]], alpha=1.0)
    assert exact_expected_score(half, [0]) == pytest.approx(1.5)


def test_ldr_examples():
    inst = make_instance([(0, 1, 1.0)], [[0, 1], [1, 0]], alpha=1.0)
    for k in range(20):
        out = run_ldr(inst, [0], derive_rng(2, k))
        assert out.shifted_profile.position(1, 0) == 1
    out = run_ldr(inst, [], derive_rng(3))
    assert np.array_equal(out.shifted_profile.rankings, inst.profile.rankings)
    # star: the centre is a seed and ranks the target first; one leaf with b=0.5, r=3
    star = make_instance([(0, 1, 0.5)], [[0, 1, 2], [1, 2, 0]], alpha=1.0)
    assert exact_position_distribution(star, [0])[1] == pytest.approx([0.25, 0.25, 0.5])
    runs = 40_000
    counts = np.zeros(3)
    rng = derive_rng(4)
    for _ in range(runs):
        counts[run_ldr(star, [0], rng).shifted_profile.position(1, 0) - 1] += 1
    for got, p in zip(counts / runs, (0.25, 0.25, 0.5)):
        assert abs(got - p) < 3 * math.sqrt(p * (1 - p) / runs)


def test_reached_sets_match_ltm_active_sets():
    """Reachable-set law from enumeration equals the simulated active-set law."""
    rng = np.random.default_rng(21)
    runs = 100_000
    for k in range(15):
        inst = random_instance(rng)
        g = inst.graph
        n = g.node_count
        seeds = sorted(rng.choice(n, size=int(rng.integers(1, 3)), replace=False).tolist())
        exact: dict[frozenset, float] = {}
        for le, p in enumerate_live_edges(g):
            key = reachable(le, seeds)
            exact[key] = exact.get(key, 0.0) + p
        t = 1.0 - derive_rng(22, k).random((runs, n))
        active, _ = _ltm_batch(g, np.asarray(seeds), t)
        codes = active.astype(np.int64) @ (1 << np.arange(n))
        observed = np.bincount(codes, minlength=1 << n) / runs
        for code in range(1 << n):
            key = frozenset(v for v in range(n) if code >> v & 1)
            p = exact.get(key, 0.0)
            tol = 3 * math.sqrt(max(p * (1 - p), 0.0) / runs) + 1e-9
            assert abs(observed[code] - p) <= tol, (k, sorted(key), observed[code], p)


def test_dice_equivalence_on_acyclic_graphs():
    rng = np.random.default_rng(31)
    runs = 100_000
    done = cells = bad = 0
    while done < 20:
        inst = random_instance(rng)
        if has_cycle(inst.graph):
            continue
        seeds = sorted(rng.choice(inst.node_count, size=int(rng.integers(1, 3)), replace=False).tolist())
        exact = exact_position_distribution(inst, seeds)
        batch = simulate_ltr(inst, seeds, runs, derive_rng(32, done))
        for v in range(inst.node_count):
            emp = np.bincount(batch.final_position[:, v] - 1, minlength=inst.m) / runs
            for ell in range(inst.m):
                p = exact[v, ell]
                cells += 1
                bad += abs(emp[ell] - p) > 3 * math.sqrt(max(p * (1 - p), 0.0) / runs) + 1e-9
        done += 1
    assert bad / cells <= 0.01, (bad, cells)


def test_cycle_through_the_node_breaks_dice_equivalence():
    """A node's own activation can feed weight back to it around a cycle.

    seed s -> v (0.5), v -> u (1.0), u -> v (0.5); m = 2, alpha = 1.
    v is active with probability 0.5, and then u is active too, so v's active
    in-weight is 1.0 half the time and 0.5 otherwise: v promotes the target
    with probability 0.75.  The live-edge dice only reach v when its kept edge
    comes from s, which has probability 0.5.
    """
    s, v, u = 0, 1, 2
    inst = make_instance([(s, v, 0.5), (v, u, 1.0), (u, v, 0.5)], [[0, 1], [1, 0], [1, 0]], alpha=1.0)
    assert exact_position_distribution(inst, [s])[v, 0] == pytest.approx(0.5)
    runs = 200_000
    batch = simulate_ltr(inst, [s], runs, derive_rng(41))
    p = float((batch.final_position[:, v] == 1).mean())
    assert abs(p - 0.75) < 3 * math.sqrt(0.75 * 0.25 / runs)
