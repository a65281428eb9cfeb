"""Subset layers, effective-pair bipartite graphs, and matchings.

Two (t+1)-subsets form an effective pair when the first one's surplus lies
entirely on the A side and the second one's surplus entirely on the B side:
S1 = Q union Q'_A, S2 = Q union Q'_B with Q shared.  Such a pair lets the
three servers replace two single-server broadcasts with three (one each from
A, B and the parity), so the delivery cost per index set drops from 1 to 1/2
plus a correction for sets no pairing covers.

Layer w collects the (t+1)-subsets with exactly w users on the A side.  For
odd t the three middle layers (t-1)/2, (t+1)/2, (t+3)/2 cannot pair up
perfectly; the baseline construction ("lap") matches the middle layer against
the union of its neighbours, while the improved construction splits each
middle layer into four classes by membership of the first A-user and first
B-user and picks one of three class pairings depending on the cache fraction.

Subsets in this module are int bitmasks (bit u set = user u present); numeric
order on masks of equal size is exactly colexicographic order, which fixes
the deterministic iteration order used everywhere.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Iterable, Iterator, NamedTuple, Sequence

from .system import SystemConfig, mask_of

SCHEME_LAP = "lap"
SCHEME_IMPROVED = "improved"
SCHEME_AUTO = "auto"

LOW = "low"
MID = "mid"
HIGH = "high"

# Class-level layout of the improved constructions, one entry per regime.
# Classes are (layer, has_a1, has_b1) with layer one of LOW/MID/HIGH; each
# graph is (label, x classes, y classes); standalone classes join no graph.
REGIME_GRAPH_SPECS: dict[int, tuple[tuple[str, tuple, tuple], ...]] = {
    1: (
        ("BG1-1", ((MID, False, False),), ((LOW, False, True), (HIGH, True, False))),
        ("BG1-2", ((MID, False, True),), ((HIGH, False, True),)),
        ("BG1-3", ((MID, True, False),), ((LOW, True, False),)),
        ("BG1-4", ((LOW, False, False),), ((HIGH, False, False),)),
        ("BG1-5", ((LOW, True, True),), ((HIGH, True, True),)),
    ),
    2: (
        ("BG2-1", ((MID, True, True),), ((LOW, False, True),)),
        ("BG2-2", ((MID, True, False),), ((LOW, True, False),)),
        ("BG2-3", ((MID, False, True),), ((HIGH, False, True),)),
        ("BG2-4", ((MID, False, False),), ((HIGH, True, False),)),
        ("BG2-5", ((LOW, True, True),), ((HIGH, True, True),)),
        ("BG2-6", ((LOW, False, False),), ((HIGH, False, False),)),
    ),
    3: (
        ("BG3-1", ((MID, True, True),), ((LOW, False, True), (HIGH, True, False))),
        ("BG3-2", ((MID, True, False),), ((LOW, True, False),)),
        ("BG3-3", ((MID, False, True),), ((HIGH, False, True),)),
        ("BG3-4", ((LOW, False, False),), ((HIGH, False, False),)),
        ("BG3-5", ((LOW, True, True),), ((HIGH, True, True),)),
    ),
}

REGIME_STANDALONE: dict[int, tuple[tuple[str, bool, bool], ...]] = {
    1: ((MID, True, True),),
    2: (),
    3: ((MID, False, False),),
}


def regime_of_lambda(lam: Fraction) -> int:
    """Regime index for a cache fraction, with exact rational comparisons.

    Boundaries are (3 - sqrt5)/2 and (sqrt5 - 1)/2; each boundary belongs to
    the regime on its left.  For rational lam equality never occurs, but the
    squared comparisons keep the closed-left convention anyway.
    """
    lam = Fraction(lam)
    if not 0 < lam < 1:
        raise ValueError(f"cache fraction {lam} must lie in (0, 1)")
    if (3 - 2 * lam) ** 2 >= 5:
        return 1
    if (2 * lam + 1) ** 2 <= 5:
        return 2
    return 3


def middle_weights(t: int) -> tuple[int, int, int]:
    if t % 2 == 0:
        raise ValueError("middle layers exist only for odd t")
    return ((t - 1) // 2, (t + 1) // 2, (t + 3) // 2)


# ---------------------------------------------------------------------------
# layers and classes

@dataclass(frozen=True)
class Layer:
    """All (t+1)-subsets with exactly w users on the A side, in colex order."""

    w: int
    members: tuple[int, ...]


def build_layers(config: SystemConfig) -> list[Layer]:
    """Layers 0 .. t+1; requires a symmetric user partition."""
    if not config.is_symmetric:
        raise ValueError("layer construction needs |users_a| == |users_b|")
    t = config.t
    layers = []
    for w in range(t + 2):
        members = [
            amask | bmask
            for amask in _weight_masks(config.users_a, w)
            for bmask in _weight_masks(config.users_b, t + 1 - w)
        ]
        members.sort()
        layers.append(Layer(w=w, members=tuple(members)))
    return layers


def _weight_masks(users: Sequence[int], size: int) -> list[int]:
    if size < 0 or size > len(users):
        return []
    return [mask_of(c) for c in combinations(users, size)]


def layer_weight(mask: int, config: SystemConfig) -> int:
    return (mask & config.mask_a).bit_count()


class Depth(enum.Enum):
    """How finely to split a layer: by membership of a_1/b_1, or by the exact
    least-index A- and B-user."""

    FOUR = "four"
    FULL = "full"


class ClassKey(NamedTuple):
    """h1/h2 are the 1-based ranks of the least A- and B-user in the subset.

    None means the subset has no user on that side.  At Depth.FOUR the value
    2 stands for "rank greater than one", so keys range over {1, 2, None}.
    """

    w: int
    h1: int | None
    h2: int | None


def partition_classes(
    layer: Layer, config: SystemConfig, depth: Depth = Depth.FOUR
) -> dict[ClassKey, tuple[int, ...]]:
    """Split a layer into disjoint classes covering it exactly."""
    buckets: dict[ClassKey, list[int]] = {}
    a1_bit = 1 << config.users_a[0]
    for mask in layer.members:
        if depth is Depth.FOUR:
            h1 = _four_rank(mask, a1_bit, config.mask_a)
            h2 = _four_rank(mask, 1 << config.users_b[0], config.mask_b)
        else:
            h1 = _least_rank(mask, config.users_a)
            h2 = _least_rank(mask, config.users_b)
        buckets.setdefault(ClassKey(layer.w, h1, h2), []).append(mask)
    ordered = sorted(buckets, key=lambda key: (key.h1 or 0, key.h2 or 0))
    return {key: tuple(buckets[key]) for key in ordered}


def _four_rank(mask: int, first_bit: int, side_mask: int) -> int | None:
    if mask & first_bit:
        return 1
    if mask & side_mask:
        return 2
    return None


def _least_rank(mask: int, side_users: Sequence[int]) -> int | None:
    for rank, u in enumerate(side_users, 1):
        if mask >> u & 1:
            return rank
    return None


def class_members(
    config: SystemConfig,
    layers: Sequence[Layer],
    w: int,
    has_a1: bool,
    has_b1: bool,
) -> tuple[int, ...]:
    """Members of one a_1/b_1 class of layer w, in colex order."""
    a1_bit = 1 << config.users_a[0]
    b1_bit = 1 << config.users_b[0]
    return tuple(
        m
        for m in layers[w].members
        if bool(m & a1_bit) == has_a1 and bool(m & b1_bit) == has_b1
    )


# ---------------------------------------------------------------------------
# the pairing predicate

def is_effective_pair(s1: int, s2: int, config: SystemConfig) -> bool:
    """True when s1's surplus is all A-side and s2's surplus all B-side.

    Both masks must have exactly t+1 users; s1 is the A-heavy member.
    """
    size = config.t + 1
    if s1.bit_count() != size or s2.bit_count() != size:
        raise ValueError(f"effective pairs join two subsets of size {size}")
    if s1 == s2:
        return False
    return (s1 & ~s2 & ~config.mask_a) == 0 and (s2 & ~s1 & ~config.mask_b) == 0


def orient_pair(s1: int, s2: int, config: SystemConfig) -> tuple[int, int]:
    """Order a pair so the member with more A-side users comes first."""
    if layer_weight(s1, config) >= layer_weight(s2, config):
        return s1, s2
    return s2, s1


def vertex_degree(mask: int, opposing: Iterable[int], config: SystemConfig) -> int:
    """Brute-force count of effective-pair neighbours inside an opposing class."""
    degree = 0
    for other in opposing:
        hi, lo = orient_pair(mask, other, config)
        if hi != lo and is_effective_pair(hi, lo, config):
            degree += 1
    return degree


# ---------------------------------------------------------------------------
# graphs

@dataclass(frozen=True, eq=False)
class PairGraph:
    """A bipartite graph whose edges are exactly the effective pairs between
    the two sides.  Adjacency is materialised x-vertex by x-vertex in colex
    order; the A-heavy member of each edge is determined per pair by layer
    weight (a side built from a union of layers can carry both directions).
    """

    config: SystemConfig
    label: str
    x: tuple[int, ...]
    y: tuple[int, ...]
    adj: dict[int, tuple[int, ...]]

    @property
    def orientation(self) -> str:
        """Which side carries the extra A-users: 'x', 'y', or 'mixed'."""
        wx = {layer_weight(m, self.config) for m in self.x}
        wy = {layer_weight(m, self.config) for m in self.y}
        if not wx or not wy:
            return "mixed"
        if min(wx) > max(wy):
            return "x"
        if max(wx) < min(wy):
            return "y"
        return "mixed"

    def edge_count(self) -> int:
        return sum(len(v) for v in self.adj.values())


def build_pair_graph(
    config: SystemConfig, label: str, x_members: Sequence[int], y_members: Sequence[int]
) -> PairGraph:
    """Materialise adjacency by structural swap moves instead of all-pairs scans.

    A vertex's neighbours at distance delta in layer weight are produced by
    exchanging delta A-users for delta B-users (or vice versa) and filtering
    against the opposing side's membership set.
    """
    x = tuple(sorted(x_members))
    y = tuple(sorted(y_members))
    by_weight: dict[int, set[int]] = {}
    for m in y:
        by_weight.setdefault(layer_weight(m, config), set()).add(m)
    adj: dict[int, tuple[int, ...]] = {}
    for mask in x:
        wx = layer_weight(mask, config)
        found: list[int] = []
        for wy, members in by_weight.items():
            delta = wx - wy
            if delta > 0:
                candidates = _swap_moves(mask, delta, config.mask_a, config.mask_b)
            elif delta < 0:
                candidates = _swap_moves(mask, -delta, config.mask_b, config.mask_a)
            else:
                continue
            found.extend(c for c in candidates if c in members)
        adj[mask] = tuple(sorted(found))
    return PairGraph(config=config, label=label, x=x, y=y, adj=adj)


def _swap_moves(mask: int, delta: int, drop_side: int, add_side: int) -> Iterator[int]:
    """Masks reachable by dropping delta bits of one side and adding delta of the other."""
    drop_bits = _bits(mask & drop_side)
    add_bits = _bits(add_side & ~mask)
    if len(drop_bits) < delta or len(add_bits) < delta:
        return
    for drop in combinations(drop_bits, delta):
        removed = mask
        for b in drop:
            removed ^= b
        for add in combinations(add_bits, delta):
            cand = removed
            for b in add:
                cand |= b
            yield cand


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low)
        mask ^= low
    return out


def side_degrees(graph: PairGraph) -> tuple[set[int], set[int]]:
    """Distinct vertex degrees on the x and y sides."""
    x_degrees = {len(graph.adj[m]) for m in graph.x}
    y_counts: dict[int, int] = {m: 0 for m in graph.y}
    for nbrs in graph.adj.values():
        for m in nbrs:
            y_counts[m] += 1
    y_degrees = set(y_counts.values())
    return x_degrees, y_degrees


# ---------------------------------------------------------------------------
# graph families per scheme

def outer_graphs(config: SystemConfig, layers: Sequence[Layer]) -> list[PairGraph]:
    """Perfectly pairable layer graphs (V_w, V_{t+1-w}) outside the middle band."""
    t = config.t
    top = (t - 3) // 2 if t % 2 else t // 2
    out = []
    for w in range(1, top + 1):
        out.append(
            build_pair_graph(
                config,
                f"layers-{w}x{t + 1 - w}",
                layers[w].members,
                layers[t + 1 - w].members,
            )
        )
    return out


def lap_middle_graph(config: SystemConfig, layers: Sequence[Layer]) -> PairGraph:
    lo, mid, hi = middle_weights(config.t)
    x = layers[lo].members + layers[hi].members
    return build_pair_graph(config, "lap-middle", x, layers[mid].members)


def improved_middle_graphs(
    config: SystemConfig, layers: Sequence[Layer], regime: int | None = None
) -> list[PairGraph]:
    if regime is None:
        regime = regime_of_lambda(config.lam)
    lo, mid, hi = middle_weights(config.t)
    weight_of = {LOW: lo, MID: mid, HIGH: hi}
    graphs = []
    for label, x_specs, y_specs in REGIME_GRAPH_SPECS[regime]:
        x: tuple[int, ...] = ()
        for layer_name, a1, b1 in x_specs:
            x += class_members(config, layers, weight_of[layer_name], a1, b1)
        y: tuple[int, ...] = ()
        for layer_name, a1, b1 in y_specs:
            y += class_members(config, layers, weight_of[layer_name], a1, b1)
        graphs.append(build_pair_graph(config, label, x, y))
    return graphs


def single_layer_weights(config: SystemConfig) -> tuple[int, ...]:
    """Layers served by one data server alone: 0 and t+1 when not in the middle band."""
    t = config.t
    extremes = (0, t + 1)
    if t % 2 == 0:
        return extremes
    return tuple(w for w in extremes if w not in middle_weights(t))


def build_graphs(config: SystemConfig, scheme: str) -> list[PairGraph]:
    """Every pairing graph the scheme uses (outer layer pairs plus the middle
    construction for odd t).  Scheme 'auto' keeps whichever middle construction
    leaves fewer subsets unpaired."""
    if not config.is_symmetric:
        raise ValueError("pairing requires a symmetric user partition")
    layers = build_layers(config)
    graphs = outer_graphs(config, layers)
    if config.t % 2 == 1:
        graphs.extend(_middle_graphs_for(config, layers, scheme)[0])
    return graphs


def _middle_graphs_for(
    config: SystemConfig, layers: Sequence[Layer], scheme: str
) -> tuple[list[PairGraph], str]:
    if scheme == SCHEME_LAP:
        return [lap_middle_graph(config, layers)], SCHEME_LAP
    if scheme == SCHEME_IMPROVED:
        return improved_middle_graphs(config, layers), SCHEME_IMPROVED
    if scheme == SCHEME_AUTO:
        lap = middle_pairing(config, SCHEME_LAP, layers)
        improved = middle_pairing(config, SCHEME_IMPROVED, layers)
        winner = improved if len(improved.unmatched) < len(lap.unmatched) else lap
        return list(winner.graphs), winner.scheme
    raise ValueError(f"unknown scheme {scheme!r}")


# ---------------------------------------------------------------------------
# maximum matching

def max_matching(graph: PairGraph) -> list[tuple[int, int]]:
    """Maximum matching via Hopcroft-Karp augmenting phases.

    Returns vertex-disjoint pairs ordered A-heavy first, sorted by the heavy
    member; ties in the search are broken by colex vertex order.
    """
    if not graph.x or not graph.y:
        return []
    x_list = graph.x
    y_index = {m: i for i, m in enumerate(graph.y)}
    adj = [[y_index[m] for m in graph.adj[x]] for x in x_list]
    match_x, match_y = _hopcroft_karp(adj, len(graph.y))
    pairs = []
    for xi, yi in enumerate(match_x):
        if yi >= 0:
            pairs.append(orient_pair(x_list[xi], graph.y[yi], graph.config))
    pairs.sort()
    return pairs


def _hopcroft_karp(adj: list[list[int]], ny: int) -> tuple[list[int], list[int]]:
    nx = len(adj)
    match_x = [-1] * nx
    match_y = [-1] * ny
    for x in range(nx):
        for y in adj[x]:
            if match_y[y] == -1:
                match_x[x] = y
                match_y[y] = x
                break
    infinity = nx + ny + 1
    while True:
        # BFS layers from free x-vertices.
        dist = [-1] * nx
        queue = [x for x in range(nx) if match_x[x] == -1]
        for x in queue:
            dist[x] = 0
        found_free_y = False
        head = 0
        while head < len(queue):
            x = queue[head]
            head += 1
            for y in adj[x]:
                nxt = match_y[y]
                if nxt == -1:
                    found_free_y = True
                elif dist[nxt] == -1:
                    dist[nxt] = dist[x] + 1
                    queue.append(nxt)
        if not found_free_y:
            break
        # One DFS pass along the layering, iterative with per-vertex arc pointers.
        ptr = [0] * nx
        for x0 in range(nx):
            if match_x[x0] != -1:
                continue
            stack: list[tuple[int, int]] = [(x0, -1)]  # (x, matched edge used to reach it)
            while stack:
                x, _ = stack[-1]
                advanced = False
                while ptr[x] < len(adj[x]):
                    y = adj[x][ptr[x]]
                    ptr[x] += 1
                    nxt = match_y[y]
                    if nxt == -1:
                        cur = y
                        for fx, fy in reversed(stack):
                            match_x[fx] = cur
                            match_y[cur] = fx
                            cur = fy
                        stack = []
                        advanced = True
                        break
                    if dist[nxt] == dist[x] + 1:
                        stack.append((nxt, y))
                        advanced = True
                        break
                if not advanced:
                    dist[x] = infinity  # dead end for this phase
                    stack.pop()
    return match_x, match_y


def exhaustive_max_matching_size(
    graph: PairGraph, *, max_vertices: int = 20, max_edges: int = 60
) -> int:
    """Exact maximum matching size by exhaustive branch-and-bound.

    Guarded to toy sizes; use max_matching beyond them.
    """
    n_vertices = len(graph.x) + len(graph.y)
    n_edges = graph.edge_count()
    if n_vertices > max_vertices or n_edges > max_edges:
        raise ValueError(
            f"exhaustive oracle capped at {max_vertices} vertices / {max_edges} edges, "
            f"got {n_vertices} / {n_edges}"
        )
    y_index = {m: i for i, m in enumerate(graph.y)}
    adj = [[y_index[m] for m in graph.adj[x]] for x in graph.x]

    def best(i: int, used: int) -> int:
        if i == len(adj):
            return 0
        score = best(i + 1, used)  # leave x_i unmatched
        for y in adj[i]:
            if not used >> y & 1:
                score = max(score, 1 + best(i + 1, used | 1 << y))
        return score

    return best(0, 0)


def check_saturation(graph: PairGraph, matching: Sequence[tuple[int, int]]) -> None:
    """On biregular graphs a maximum matching must saturate the smaller side
    (Hall's condition holds when every vertex of one side has the same degree);
    raise if the matcher ever violates that."""
    if not graph.x or not graph.y:
        return
    x_deg, y_deg = side_degrees(graph)
    if len(x_deg) == 1 and len(y_deg) == 1 and min(x_deg) > 0 and min(y_deg) > 0:
        expected = min(len(graph.x), len(graph.y))
        if len(matching) != expected:
            raise RuntimeError(
                f"graph {graph.label}: biregular sides must saturate the smaller "
                f"side ({expected}), matcher found {len(matching)}"
            )


# ---------------------------------------------------------------------------
# unpaired accounting

@dataclass(frozen=True)
class MiddlePairing:
    """Matchings over the middle band plus the leftovers, for one scheme."""

    scheme: str
    graphs: tuple[PairGraph, ...]
    matchings: tuple[tuple[tuple[int, int], ...], ...]
    unmatched: tuple[int, ...]


def middle_pairing(
    config: SystemConfig, scheme: str, layers: Sequence[Layer] | None = None
) -> MiddlePairing:
    """Match the middle band for a scheme and collect the unmatched subsets."""
    if config.t % 2 == 0:
        raise ValueError("the middle band exists only for odd t")
    if layers is None:
        layers = build_layers(config)
    if scheme == SCHEME_AUTO:
        lap = middle_pairing(config, SCHEME_LAP, layers)
        improved = middle_pairing(config, SCHEME_IMPROVED, layers)
        return improved if len(improved.unmatched) < len(lap.unmatched) else lap
    graphs, used = _middle_graphs_for(config, layers, scheme)
    matchings = []
    matched: set[int] = set()
    for g in graphs:
        m = max_matching(g)
        check_saturation(g, m)
        matchings.append(tuple(m))
        for s1, s2 in m:
            matched.add(s1)
            matched.add(s2)
    middle_members: list[int] = []
    for w in middle_weights(config.t):
        middle_members.extend(layers[w].members)
    unmatched = tuple(sorted(m for m in middle_members if m not in matched))
    return MiddlePairing(
        scheme=used,
        graphs=tuple(graphs),
        matchings=tuple(matchings),
        unmatched=unmatched,
    )


@dataclass(frozen=True)
class UnpairedCount:
    n: int
    delta: Fraction
    scheme: str


def count_unpaired(config: SystemConfig, scheme: str) -> UnpairedCount:
    """Number and ratio of middle-band subsets the scheme's matchings leave
    unpaired.  For 'auto' the cheaper of the two constructions is reported."""
    pairing = middle_pairing(config, scheme)
    n = len(pairing.unmatched)
    return UnpairedCount(
        n=n,
        delta=Fraction(n, comb(config.K, config.t + 1)),
        scheme=pairing.scheme,
    )
