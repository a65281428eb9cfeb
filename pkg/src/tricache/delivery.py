"""Turns matchings into three-server broadcast plans and measures their rate.

For an effective pair (S1, S2) the three servers send one message each:

  m_A over S1: the A-side segment of every member's request (for B-side
       requesters this is the twin A-file with the same index),
  m_B over S2: the B-side segments symmetrically,
  m_P over S1 and S2: twin A+B parity pairs for the shared users, which lets
       each shared user cancel the unwanted twin and extract its second
       segment.

Index sets no matching covers are broadcast by two servers; the two
fragments XOR to the single-server signal.  Sets drawn entirely from one
side's users (layers 0 and t+1) are served by their own data server alone.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb
from typing import Iterable

from .mn import (
    ORIGIN_A,
    ORIGIN_B,
    ORIGIN_P,
    Broadcast,
    RecoveryReport,
    origin_violations,
    verify_full_recovery,
)
from .pairing import (
    SCHEME_LAP,
    build_layers,
    check_saturation,
    is_effective_pair,
    layer_weight,
    max_matching,
    middle_pairing,
    orient_pair,
    outer_graphs,
    single_layer_weights,
)
from .system import Demand, GF2Combination, PacketId, SystemConfig, users_of

SERVER_PAIR_ROTATION: tuple[tuple[str, str], ...] = (
    (ORIGIN_A, ORIGIN_B),
    (ORIGIN_A, ORIGIN_P),
    (ORIGIN_B, ORIGIN_P),
)


class CoverageError(RuntimeError):
    """A delivery plan failed to serve every (t+1)-subset exactly once."""


@dataclass(frozen=True)
class PairedTriple:
    s1: tuple[int, ...]
    s2: tuple[int, ...]
    m_a: Broadcast
    m_b: Broadcast
    m_p: Broadcast


@dataclass(frozen=True)
class UnpairedAssignment:
    subset: tuple[int, ...]
    servers: tuple[str, str]
    broadcasts: tuple[Broadcast, Broadcast]


@dataclass(frozen=True)
class SingleAssignment:
    subset: tuple[int, ...]
    server: str
    broadcast: Broadcast


@dataclass(frozen=True)
class DeliveryPlan:
    config: SystemConfig
    demand: Demand
    scheme: str
    paired: tuple[PairedTriple, ...]
    unpaired: tuple[UnpairedAssignment, ...]
    singles: tuple[SingleAssignment, ...]

    def all_broadcasts(self) -> list[Broadcast]:
        out: list[Broadcast] = []
        for triple in self.paired:
            out.extend((triple.m_a, triple.m_b, triple.m_p))
        for u in self.unpaired:
            out.extend(u.broadcasts)
        for s in self.singles:
            out.append(s.broadcast)
        return out

    def served_sets(self) -> list[tuple[int, ...]]:
        sets: list[tuple[int, ...]] = []
        for triple in self.paired:
            sets.append(triple.s1)
            sets.append(triple.s2)
        sets.extend(u.subset for u in self.unpaired)
        sets.extend(s.subset for s in self.singles)
        return sets


def _segment(demand: Demand, server: str, k: int, index_set: int) -> PacketId:
    rest = users_of(index_set & ~(1 << k))
    return PacketId(server, demand.file_index(k), rest)


def synthesize_pair_messages(
    s1: int, s2: int, demand: Demand, config: SystemConfig
) -> tuple[Broadcast, Broadcast, Broadcast]:
    """The three broadcasts serving an effective pair; s1 must be the A-heavy member."""
    if not is_effective_pair(s1, s2, config):
        raise ValueError("not an effective pair (A-heavy member must come first)")
    if not demand.is_symmetric(config):
        raise ValueError("pair messages require a symmetric demand")
    shared = s1 & s2
    q_a = shared & config.mask_a
    q_b = shared & config.mask_b
    m_a = Broadcast(
        origin=ORIGIN_A,
        index_sets=(users_of(s1),),
        payload=GF2Combination.from_terms(
            _segment(demand, "A", k, s1) for k in users_of(s1)
        ),
    )
    m_b = Broadcast(
        origin=ORIGIN_B,
        index_sets=(users_of(s2),),
        payload=GF2Combination.from_terms(
            _segment(demand, "B", k, s2) for k in users_of(s2)
        ),
    )
    parity_terms = []
    for k in users_of(q_b):
        parity_terms.append(_segment(demand, "A", k, s1))
        parity_terms.append(_segment(demand, "B", k, s1))
    for k in users_of(q_a):
        parity_terms.append(_segment(demand, "B", k, s2))
        parity_terms.append(_segment(demand, "A", k, s2))
    m_p = Broadcast(
        origin=ORIGIN_P,
        index_sets=(users_of(s1), users_of(s2)),
        payload=GF2Combination.from_terms(parity_terms),
    )
    return m_a, m_b, m_p


def synthesize_unpaired(
    subset: int, server_pair: tuple[str, str], demand: Demand, config: SystemConfig
) -> tuple[Broadcast, Broadcast]:
    """Two broadcasts that jointly reproduce the single-server signal for one set."""
    pair = tuple(sorted(server_pair))
    index_sets = (users_of(subset),)
    members = users_of(subset)
    a_members = users_of(subset & config.mask_a)
    b_members = users_of(subset & config.mask_b)
    if pair == (ORIGIN_A, ORIGIN_B):
        first = Broadcast(
            ORIGIN_A,
            index_sets,
            GF2Combination.from_terms(_segment(demand, "A", k, subset) for k in a_members),
        )
        second = Broadcast(
            ORIGIN_B,
            index_sets,
            GF2Combination.from_terms(_segment(demand, "B", k, subset) for k in b_members),
        )
    elif pair == (ORIGIN_A, ORIGIN_P):
        first = Broadcast(
            ORIGIN_A,
            index_sets,
            GF2Combination.from_terms(_segment(demand, "A", k, subset) for k in members),
        )
        terms = []
        for k in b_members:
            terms.append(_segment(demand, "A", k, subset))
            terms.append(_segment(demand, "B", k, subset))
        second = Broadcast(ORIGIN_P, index_sets, GF2Combination.from_terms(terms))
    elif pair == (ORIGIN_B, ORIGIN_P):
        first = Broadcast(
            ORIGIN_B,
            index_sets,
            GF2Combination.from_terms(_segment(demand, "B", k, subset) for k in members),
        )
        terms = []
        for k in a_members:
            terms.append(_segment(demand, "B", k, subset))
            terms.append(_segment(demand, "A", k, subset))
        second = Broadcast(ORIGIN_P, index_sets, GF2Combination.from_terms(terms))
    else:
        raise ValueError(f"unknown server pair {server_pair!r}")
    return first, second


def _synthesize_single(subset: int, demand: Demand, config: SystemConfig) -> SingleAssignment:
    w = layer_weight(subset, config)
    if w == config.t + 1:
        server = ORIGIN_A
    elif w == 0:
        server = ORIGIN_B
    else:
        raise ValueError("single broadcasts serve one-sided subsets only")
    payload = GF2Combination.from_terms(
        _segment(demand, server, k, subset) for k in users_of(subset)
    )
    return SingleAssignment(
        subset=users_of(subset),
        server=server,
        broadcast=Broadcast(server, (users_of(subset),), payload),
    )


def assemble_plan(
    config: SystemConfig,
    demand: Demand,
    pairs: Iterable[tuple[int, int]],
    unmatched: Iterable[int],
    scheme: str = SCHEME_LAP,
) -> DeliveryPlan:
    """Assemble the full plan: paired triples, balanced two-server unpaired
    assignments, and one-server singles for layers 0 and t+1.

    Unpaired server pairs are chosen greedily to minimize the running maximum
    load (the whole sorted load vector breaks ties, then the fixed rotation
    A+B, A+P, B+P); with no singles this reproduces an even 2n/3 split.
    A coverage gap is a hard failure.
    """
    paired = []
    for s1, s2 in pairs:
        s1, s2 = orient_pair(s1, s2, config)
        m_a, m_b, m_p = synthesize_pair_messages(s1, s2, demand, config)
        paired.append(PairedTriple(users_of(s1), users_of(s2), m_a, m_b, m_p))
    paired.sort(key=lambda tr: tuple(reversed(tr.s1)))

    layers = build_layers(config)
    singles = []
    for w in single_layer_weights(config):
        for mask in layers[w].members:
            singles.append(_synthesize_single(mask, demand, config))

    loads = {ORIGIN_A: len(paired), ORIGIN_B: len(paired), ORIGIN_P: len(paired)}
    for s in singles:
        loads[s.server] += 1

    unpaired = []
    for mask in sorted(unmatched):
        w = layer_weight(mask, config)
        if w == 0 or w == config.t + 1:
            raise CoverageError(
                f"one-sided subset {users_of(mask)} cannot take a two-server split"
            )
        best_pair = None
        best_key = None
        for cand in SERVER_PAIR_ROTATION:
            trial = dict(loads)
            trial[cand[0]] += 1
            trial[cand[1]] += 1
            key = tuple(sorted(trial.values(), reverse=True))
            if best_key is None or key < best_key:
                best_key = key
                best_pair = cand
        assert best_pair is not None
        loads[best_pair[0]] += 1
        loads[best_pair[1]] += 1
        unpaired.append(
            UnpairedAssignment(
                subset=users_of(mask),
                servers=best_pair,
                broadcasts=synthesize_unpaired(mask, best_pair, demand, config),
            )
        )

    plan = DeliveryPlan(
        config=config,
        demand=demand,
        scheme=scheme,
        paired=tuple(paired),
        unpaired=tuple(unpaired),
        singles=tuple(singles),
    )
    problems = coverage_errors(plan)
    if problems:
        raise CoverageError("; ".join(problems))
    return plan


def build_plan(config: SystemConfig, demand: Demand, scheme: str) -> DeliveryPlan:
    """Drive the full pipeline for one scheme: graphs, matchings, assembly."""
    if not config.is_symmetric:
        raise ValueError("three-server delivery requires a symmetric partition")
    if not demand.is_symmetric(config):
        raise ValueError("three-server delivery requires a symmetric demand")
    layers = build_layers(config)
    pairs: list[tuple[int, int]] = []
    for g in outer_graphs(config, layers):
        m = max_matching(g)
        check_saturation(g, m)
        if len(m) != min(len(g.x), len(g.y)):
            raise CoverageError(f"outer graph {g.label} did not pair perfectly")
        pairs.extend(m)
    unmatched: list[int] = []
    used_scheme = scheme
    if config.t % 2 == 1:
        middle = middle_pairing(config, scheme, layers)
        used_scheme = middle.scheme
        for m in middle.matchings:
            pairs.extend(m)
        unmatched = list(middle.unmatched)
    return assemble_plan(config, demand, pairs, unmatched, scheme=used_scheme)


# ---------------------------------------------------------------------------
# audits and measurement

def coverage_errors(plan: DeliveryPlan) -> list[str]:
    """Check every (t+1)-subset of users is served exactly once."""
    config = plan.config
    layers = build_layers(config)
    universe = {users_of(m) for layer in layers for m in layer.members}
    problems = []
    seen: dict[tuple[int, ...], int] = {}
    for sub in plan.served_sets():
        seen[sub] = seen.get(sub, 0) + 1
    for sub, count in sorted(seen.items()):
        if count > 1:
            problems.append(f"subset {sub} served {count} times")
        if sub not in universe:
            problems.append(f"subset {sub} is not a valid index set")
    for sub in sorted(universe - set(seen)):
        problems.append(f"subset {sub} is not served by any broadcast")
    return problems


def origin_errors(plan: DeliveryPlan) -> list[str]:
    problems = []
    for bc in plan.all_broadcasts():
        problems.extend(origin_violations(bc))
    return problems


def verify_plan(plan: DeliveryPlan) -> tuple[list[str], RecoveryReport]:
    """Structural audits plus the full per-user decodability check."""
    problems = coverage_errors(plan) + origin_errors(plan)
    report = verify_full_recovery(plan.config, plan.demand, plan.all_broadcasts())
    return problems, report


@dataclass(frozen=True)
class RateReport:
    load_a: int
    load_b: int
    load_p: int
    packets_per_file: int
    rate: Fraction
    delta_measured: Fraction
    rate_formula: Fraction
    slack: Fraction
    pairs: int
    unpaired: int
    singles: int

    @property
    def loads(self) -> dict[str, int]:
        return {ORIGIN_A: self.load_a, ORIGIN_B: self.load_b, ORIGIN_P: self.load_p}


def measure_rate(plan: DeliveryPlan) -> RateReport:
    """Count per-server broadcasts and compare against the rate formula.

    The formula value uses the plan's own measured unpaired fraction: half the
    single-server rate for even t, plus delta/6 for odd t.  Slack is the
    leftover from integer load rounding and one-sided singles.
    """
    config = plan.config
    loads = {ORIGIN_A: 0, ORIGIN_B: 0, ORIGIN_P: 0}
    for bc in plan.all_broadcasts():
        loads[bc.origin] += 1
    F = config.packets_per_file
    rate = Fraction(max(loads.values()), F)
    total_sets = comb(config.K, config.t + 1)
    delta = Fraction(len(plan.unpaired), total_sets)
    base = Fraction(config.K - config.t, config.t + 1)
    if config.t % 2 == 0:
        formula = base / 2
    else:
        formula = (Fraction(1, 2) + delta / 6) * base
    return RateReport(
        load_a=loads[ORIGIN_A],
        load_b=loads[ORIGIN_B],
        load_p=loads[ORIGIN_P],
        packets_per_file=F,
        rate=rate,
        delta_measured=delta,
        rate_formula=formula,
        slack=rate - formula,
        pairs=len(plan.paired),
        unpaired=len(plan.unpaired),
        singles=len(plan.singles),
    )
