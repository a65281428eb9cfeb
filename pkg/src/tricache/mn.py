"""Single-server MN delivery and the GF(2) decoder used to certify every scheme.

The MN scheme sends one XOR per (t+1)-subset S of users: the payload combines,
for each k in S, the packet of k's requested file indexed by S without k.
Every user in S holds all terms but its own in cache, so each broadcast serves
t+1 users at once.  The decoder below does not assume that structure: it checks
exact GF(2) span membership, because the three-server pairing scheme requires
combining messages from several servers to extract a segment.

Verification returns structured reports instead of raising; failures are data.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Collection, Iterable, Sequence

from .gf2 import GF2Basis
from .system import (
    Demand,
    GF2Combination,
    PacketId,
    SystemConfig,
    colex_key,
    is_cached,
    subsets_colex,
    twin,
)

ORIGIN_SINGLE = "SINGLE"
ORIGIN_A = "A"
ORIGIN_B = "B"
ORIGIN_P = "P"


@dataclass(frozen=True)
class Broadcast:
    """One transmitted XOR: origin server, the subsets it serves, and its payload.

    Origin A carries only server-A packets, origin B only server-B packets,
    and origin P only twin pairs (the A and B packet with identical file index
    and subset), since the parity server can only combine its stored parities.
    """

    origin: str
    index_sets: tuple[tuple[int, ...], ...]
    payload: GF2Combination


def origin_violations(broadcast: Broadcast) -> list[str]:
    """Audit the origin invariant; returns human-readable violations."""
    problems: list[str] = []
    if broadcast.origin in (ORIGIN_A, ORIGIN_B):
        for p in broadcast.payload:
            if p.server != broadcast.origin:
                problems.append(
                    f"origin {broadcast.origin} payload holds foreign packet {p}"
                )
    elif broadcast.origin == ORIGIN_P:
        terms = set(broadcast.payload)
        for p in terms:
            if twin(p) not in terms:
                problems.append(f"parity payload term {p} lacks its twin")
    elif broadcast.origin != ORIGIN_SINGLE:
        problems.append(f"unknown origin {broadcast.origin!r}")
    return problems


def mn_delivery(config: SystemConfig, demand: Demand) -> list[Broadcast]:
    """The C(K, t+1) single-server broadcasts, one per (t+1)-subset in colex order."""
    out = []
    for sub in subsets_colex(config.users, config.t + 1):
        terms = []
        for k in sub:
            server, idx = demand.of(k)
            rest = tuple(u for u in sub if u != k)
            terms.append(PacketId(server, idx, rest))
        out.append(
            Broadcast(
                origin=ORIGIN_SINGLE,
                index_sets=(sub,),
                payload=GF2Combination.from_terms(terms),
            )
        )
    return out


def mn_rate(config: SystemConfig) -> Fraction:
    """Broadcast volume per file: C(K,t+1)/C(K,t) = (K-t)/(t+1)."""
    return Fraction(config.K - config.t, config.t + 1)


def user_can_decode(
    cache: Collection[PacketId],
    broadcasts: Iterable[Broadcast],
    target: PacketId,
) -> bool:
    """Exact decodability: is the target's unit vector in the GF(2) span of the
    cached unit vectors plus the received payload vectors?

    Cached packets are known values, so each payload is first reduced to its
    uncached support; the target is then checked against that reduced span.
    """
    if target in cache:
        return True
    cache_set = set(cache)
    col: dict[PacketId, int] = {}
    basis = GF2Basis()
    for bc in broadcasts:
        row = 0
        for p in bc.payload.sorted_terms():
            if p in cache_set:
                continue
            bit = col.setdefault(p, len(col))
            row |= 1 << bit
        if row:
            basis.add(row)
    if target not in col:
        return False
    return basis.contains(1 << col[target])


@dataclass(frozen=True)
class UserRecovery:
    user: int
    ok: bool
    first_failed: PacketId | None
    missing: int


@dataclass(frozen=True)
class RecoveryReport:
    users: tuple[UserRecovery, ...]

    @property
    def all_ok(self) -> bool:
        return all(u.ok for u in self.users)

    def failures(self) -> list[UserRecovery]:
        return [u for u in self.users if not u.ok]


def verify_full_recovery(
    config: SystemConfig,
    demand: Demand,
    broadcasts: Sequence[Broadcast],
) -> RecoveryReport:
    """Check that every user can decode every uncached packet of its file.

    Every user hears every broadcast (audiences on broadcasts are
    informational).  Each user's check is independent and pure, so callers may
    fan the users out to parallel workers; this routine runs them in order.
    """
    results = []
    for k in config.users:
        results.append(_recover_one(config, demand, broadcasts, k))
    return RecoveryReport(tuple(results))


def _recover_one(
    config: SystemConfig,
    demand: Demand,
    broadcasts: Sequence[Broadcast],
    user: int,
) -> UserRecovery:
    col: dict[PacketId, int] = {}
    basis = GF2Basis()
    for bc in broadcasts:
        row = 0
        for p in bc.payload.sorted_terms():
            if is_cached(user, p):
                continue
            bit = col.setdefault(p, len(col))
            row |= 1 << bit
        if row:
            basis.add(row)
    server, idx = demand.of(user)
    others = sorted(u for u in config.users if u != user)
    first_failed = None
    missing = 0
    for sub in sorted(combinations(others, config.t), key=colex_key):
        packet = PacketId(server, idx, sub)
        bit = col.get(packet)
        if bit is None or not basis.contains(1 << bit):
            missing += 1
            if first_failed is None:
                first_failed = packet
    return UserRecovery(user=user, ok=missing == 0, first_failed=first_failed, missing=missing)


def expected_mn_broadcast_count(config: SystemConfig) -> int:
    return comb(config.K, config.t + 1)
