"""Layers, classes, effective pairs, graphs, and matchings."""

from fractions import Fraction
from itertools import combinations
from math import comb

import pytest
from hypothesis import given, settings, strategies as st

from tricache.pairing import (
    Depth,
    SCHEME_AUTO,
    SCHEME_IMPROVED,
    SCHEME_LAP,
    PairGraph,
    build_graphs,
    build_layers,
    check_saturation,
    class_members,
    count_unpaired,
    exhaustive_max_matching_size,
    improved_middle_graphs,
    is_effective_pair,
    lap_middle_graph,
    layer_weight,
    max_matching,
    middle_pairing,
    middle_weights,
    outer_graphs,
    partition_classes,
    regime_of_lambda,
    single_layer_weights,
    vertex_degree,
    _hopcroft_karp,
)
from tricache.analysis import four_way_class_size, general_class_size
from tricache.system import build_config, mask_of, subsets_colex

from conftest import mask


# ---------------------------------------------------------------------------
# effective pairs

def test_effective_pair_examples_k4():
    cfg = build_config(4, 1, 4)
    s_a1a2 = mask(0, 1)
    s_a1b1 = mask(0, 2)
    assert is_effective_pair(s_a1a2, s_a1b1, cfg)
    assert not is_effective_pair(s_a1a2, s_a1a2, cfg)
    # surplus on the wrong side: {a1,b1} vs {a2,b1}
    assert not is_effective_pair(mask(0, 2), mask(1, 2), cfg)


def test_effective_pair_size_mismatch_rejected():
    cfg = build_config(4, 1, 4)
    with pytest.raises(ValueError, match="size"):
        is_effective_pair(mask(0, 1, 2), mask(0, 1), cfg)


def test_effective_pairs_enumerated_k4_t1():
    # frozen by enumerating the set-difference predicate over all 2-subsets
    cfg = build_config(4, 1, 4)
    subs = [mask_of(s) for s in subsets_colex(range(4), 2)]
    found = {
        (s1, s2)
        for s1 in subs
        for s2 in subs
        if s1 != s2
        and layer_weight(s1, cfg) > layer_weight(s2, cfg)
        and is_effective_pair(s1, s2, cfg)
    }
    a1a2, b1b2 = mask(0, 1), mask(2, 3)
    middles = [mask(0, 2), mask(0, 3), mask(1, 2), mask(1, 3)]
    expected = {(a1a2, m) for m in middles} | {(a1a2, b1b2)} | {(m, b1b2) for m in middles}
    assert found == expected


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_effective_pair_orientation_unique(data):
    cfg = build_config(6, 3, 6)
    subs = [mask_of(s) for s in subsets_colex(range(6), 4)]
    s1 = data.draw(st.sampled_from(subs))
    s2 = data.draw(st.sampled_from(subs))
    if s1 == s2:
        return
    both = is_effective_pair(s1, s2, cfg) and is_effective_pair(s2, s1, cfg)
    assert not both
    if is_effective_pair(s1, s2, cfg):
        assert layer_weight(s1, cfg) > layer_weight(s2, cfg)


# ---------------------------------------------------------------------------
# layers and classes

def test_layer_cardinalities_k6():
    cfg = build_config(6, 3, 6)
    layers = build_layers(cfg)
    assert len(layers[2].members) == comb(3, 2) ** 2 == 9
    assert sum(len(l.members) for l in layers) == comb(6, 4) == 15
    for w in range(cfg.t + 2):
        assert len(layers[w].members) == len(layers[cfg.t + 1 - w].members)
        assert len(layers[w].members) == comb(3, w) * comb(3, cfg.t + 1 - w)


def test_layers_reject_asymmetric():
    cfg = build_config(6, 3, 6, partition=([0, 1], [2, 3, 4, 5]))
    with pytest.raises(ValueError):
        build_layers(cfg)


def test_partition_four_way_sizes():
    # K=10, t=3, w=2: the class containing both first users has 4*4 members
    cfg = build_config(10, 3, 10)
    layers = build_layers(cfg)
    classes = partition_classes(layers[2], cfg, Depth.FOUR)
    sizes = {(k.h1, k.h2): len(v) for k, v in classes.items()}
    assert sizes[(1, 1)] == comb(4, 1) * comb(4, 1) == 16
    assert sum(sizes.values()) == len(layers[2].members)
    for (h1, h2), size in sizes.items():
        assert size == four_way_class_size(10, 3, 2, h1 == 1, h2 == 1)


def test_partition_four_way_k6():
    cfg = build_config(6, 3, 6)
    layers = build_layers(cfg)
    classes = partition_classes(layers[2], cfg, Depth.FOUR)
    by_flags = {(k.h1, k.h2): len(v) for k, v in classes.items()}
    assert by_flags[(2, 2)] == 1  # no a1, no b1


def test_partition_full_depth_matches_closed_form():
    cfg = build_config(10, 5, 10)
    layers = build_layers(cfg)
    for w in range(cfg.t + 2):
        classes = partition_classes(layers[w], cfg, Depth.FULL)
        assert sum(len(v) for v in classes.values()) == len(layers[w].members)
        for key, members in classes.items():
            assert len(members) == general_class_size(cfg.K, cfg.t, w, key.h1, key.h2)


def test_general_cardinality_identity():
    # summing the least-rank class formula over its index ranges refills the layer
    for K, t in ((6, 3), (10, 5)):
        half = K // 2
        for w in range(1, t + 1):
            total = sum(
                general_class_size(K, t, w, h1, h2)
                for h1 in range(1, half - w + 2)
                for h2 in range(1, half - t + w + 1)
            )
            assert total == comb(half, w) * comb(half, t + 1 - w)


# ---------------------------------------------------------------------------
# degrees

def test_degree_table_entry_and_reverse():
    cfg = build_config(14, 7, 14)
    layers = build_layers(cfg)
    t, K = cfg.t, cfg.K
    mid_ff = class_members(cfg, layers, 4, False, False)
    low_ft = class_members(cfg, layers, 3, False, True)
    for v in mid_ff[:25]:
        assert vertex_degree(v, low_ft, cfg) == (t + 1) // 2
    for v in low_ft[:25]:
        assert vertex_degree(v, mid_ff, cfg) == (K - t - 1) // 2


def test_degree_zero_class_pair():
    # adding A-users can never delete a1, so (low; a1,b1) has no edges into (mid; no-a1, b1)
    cfg = build_config(14, 7, 14)
    layers = build_layers(cfg)
    low_tt = class_members(cfg, layers, 3, True, True)
    mid_ft = class_members(cfg, layers, 4, False, True)
    for v in low_tt[:20]:
        assert vertex_degree(v, mid_ft, cfg) == 0


# ---------------------------------------------------------------------------
# graphs and regimes

def test_regime_selection():
    assert regime_of_lambda(Fraction(3, 10)) == 1
    assert regime_of_lambda(Fraction(1, 2)) == 2
    assert regime_of_lambda(Fraction(7, 10)) == 3
    # golden-ratio boundaries: nearby rationals on each side
    assert regime_of_lambda(Fraction(38, 100)) == 1
    assert regime_of_lambda(Fraction(39, 100)) == 2
    assert regime_of_lambda(Fraction(61, 100)) == 2
    assert regime_of_lambda(Fraction(62, 100)) == 3


def test_build_graphs_regime2_counts():
    cfg = build_config(6, 3, 6)
    graphs = build_graphs(cfg, SCHEME_IMPROVED)
    assert len(graphs) == 6
    assert all(g.label.startswith("BG2") for g in graphs)


def test_build_graphs_regime1_has_merged_side():
    cfg = build_config(10, 3, 10)  # lambda = 0.3
    graphs = build_graphs(cfg, SCHEME_IMPROVED)
    assert len(graphs) == 5
    g1 = graphs[0]
    weights = {layer_weight(m, cfg) for m in g1.y}
    assert weights == {1, 3}  # the y side merges two layers


def test_build_graphs_even_t():
    cfg = build_config(8, 4, 8)
    graphs = build_graphs(cfg, SCHEME_LAP)
    assert [g.label for g in graphs] == ["layers-1x4", "layers-2x3"]
    assert single_layer_weights(cfg) == (0, 5)


def test_single_layers_absent_inside_middle_band():
    cfg = build_config(6, 1, 6)  # t = 1: layers 0 and 2 join the middle band
    assert single_layer_weights(cfg) == ()
    cfg2 = build_config(10, 3, 10)  # t = 3: extremes are singles again
    assert single_layer_weights(cfg2) == (0, 4)


def test_graph_edges_are_effective_pairs():
    cfg = build_config(6, 3, 6)
    for g in build_graphs(cfg, SCHEME_LAP) + build_graphs(cfg, SCHEME_IMPROVED):
        for x, nbrs in g.adj.items():
            for y in nbrs:
                hi, lo = (x, y) if layer_weight(x, cfg) > layer_weight(y, cfg) else (y, x)
                assert is_effective_pair(hi, lo, cfg)


# ---------------------------------------------------------------------------
# matching

def test_max_matching_empty_side():
    cfg = build_config(6, 3, 6)
    layers = build_layers(cfg)
    graphs = improved_middle_graphs(cfg, layers)
    g2 = graphs[1]  # y side V_{1;a1,b1-free} is empty at this size
    assert g2.y == ()
    assert max_matching(g2) == []


def test_matching_is_vertex_disjoint_and_valid():
    cfg = build_config(6, 3, 6)
    for g in build_graphs(cfg, SCHEME_LAP) + build_graphs(cfg, SCHEME_IMPROVED):
        m = max_matching(g)
        seen = set()
        for s1, s2 in m:
            assert is_effective_pair(s1, s2, cfg)
            assert s1 not in seen and s2 not in seen
            seen.update((s1, s2))


def test_matcher_equals_oracle_on_toy_graphs():
    cfg = build_config(6, 3, 6)
    layers = build_layers(cfg)
    graphs = [lap_middle_graph(cfg, layers)]
    for regime in (1, 2, 3):
        graphs.extend(improved_middle_graphs(cfg, layers, regime))
    checked = 0
    for g in graphs:
        if len(g.x) + len(g.y) <= 20:
            assert len(max_matching(g)) == exhaustive_max_matching_size(g)
            checked += 1
    assert checked >= 10


def test_exhaustive_oracle_guard():
    cfg = build_config(14, 7, 14)
    layers = build_layers(cfg)
    g = lap_middle_graph(cfg, layers)
    with pytest.raises(ValueError, match="capped"):
        exhaustive_max_matching_size(g)


def brute_matching_size(adj, ny):
    best = 0

    def go(i, used):
        nonlocal best
        if i == len(adj):
            best = max(best, used.bit_count())
            return
        go(i + 1, used)
        for y in adj[i]:
            if not used >> y & 1:
                go(i + 1, used | 1 << y)

    go(0, 0)
    return best


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_hopcroft_karp_matches_brute_force(data):
    nx = data.draw(st.integers(0, 5))
    ny = data.draw(st.integers(0, 5))
    adj = [
        sorted(data.draw(st.sets(st.integers(0, max(ny - 1, 0)), max_size=ny)))
        if ny
        else []
        for _ in range(nx)
    ]
    match_x, match_y = _hopcroft_karp(adj, ny)
    size = sum(1 for y in match_x if y >= 0)
    assert size == brute_matching_size(adj, ny)
    for x, y in enumerate(match_x):
        if y >= 0:
            assert match_y[y] == x
            assert y in adj[x]


def test_saturation_at_k14_regime2_g3():
    cfg = build_config(14, 7, 14)
    layers = build_layers(cfg)
    g3 = improved_middle_graphs(cfg, layers, 2)[2]
    m = max_matching(g3)
    assert len(m) == min(len(g3.x), len(g3.y))
    check_saturation(g3, m)


# ---------------------------------------------------------------------------
# unpaired counts

def test_count_unpaired_lap_k6():
    cfg = build_config(6, 3, 6)
    uc = count_unpaired(cfg, SCHEME_LAP)
    assert uc.n == abs(comb(3, 2) ** 2 - 2 * comb(3, 1) * comb(3, 3)) == 3
    assert uc.delta == Fraction(3, 15) == Fraction(1, 5)


def test_count_unpaired_lap_k14():
    cfg = build_config(14, 7, 14)
    uc = count_unpaired(cfg, SCHEME_LAP)
    assert uc.n == abs(comb(7, 4) ** 2 - 2 * comb(7, 3) * comb(7, 5)) == 245


def test_count_unpaired_improved_k14():
    # class-cardinality oracle: sum of |size(X) - size(Y)| over the regime-2 graphs
    cfg = build_config(14, 7, 14)
    layers = build_layers(cfg)
    expected = 0
    for g in improved_middle_graphs(cfg, layers, 2):
        expected += abs(len(g.x) - len(g.y))
    assert expected == 595
    uc = count_unpaired(cfg, SCHEME_IMPROVED)
    assert uc.n == expected
    assert uc.n > count_unpaired(cfg, SCHEME_LAP).n  # the gain is asymptotic


def test_count_unpaired_auto_takes_smaller():
    cfg = build_config(14, 7, 14)
    auto = count_unpaired(cfg, SCHEME_AUTO)
    assert auto.scheme == SCHEME_LAP
    assert auto.n == 245
    cfg62ish = build_config(10, 5, 10)
    assert count_unpaired(cfg62ish, SCHEME_AUTO).n == 0


def test_count_unpaired_requires_odd_t():
    cfg = build_config(8, 4, 8)
    with pytest.raises(ValueError):
        count_unpaired(cfg, SCHEME_LAP)


def test_build_graphs_auto_picks_winner():
    cfg = build_config(14, 7, 14)
    labels = [g.label for g in build_graphs(cfg, SCHEME_AUTO)]
    assert "lap-middle" in labels  # the baseline wins at this size
    assert not any(l.startswith("BG") for l in labels)


def test_graph_orientation():
    cfg = build_config(6, 3, 6)
    layers = build_layers(cfg)
    g1 = improved_middle_graphs(cfg, layers, 2)[0]  # x in the middle layer, y below
    assert g1.orientation == "x"
    assert lap_middle_graph(cfg, layers).orientation == "mixed"


def test_middle_pairing_t1():
    # t = 1 keeps layers 0 and 2 inside the pairing; leftovers sit in layer 1
    cfg = build_config(6, 1, 6)
    pairing = middle_pairing(cfg, SCHEME_LAP)
    assert len(pairing.unmatched) == 3
    assert all(layer_weight(m, cfg) == 1 for m in pairing.unmatched)


def test_unpaired_ratio_monotone_at_half():
    from tricache.analysis import improved_unpaired_count, lap_unpaired_count

    ratios = []
    for K in (14, 22, 30):
        t = K // 2
        _, ni = improved_unpaired_count(K, t)
        ratios.append(Fraction(ni, lap_unpaired_count(K, t)))
    assert ratios[0] > ratios[1] > ratios[2]
