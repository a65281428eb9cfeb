"""Core model of a (K, M, N) caching system with two data servers and a parity.

The N files are split evenly between server A (files A_1 .. A_{N/2}) and
server B (B_1 .. B_{N/2}); a parity server P stores the bitwise XOR of the
twin files A_i and B_i.  Every file is cut into C(K, t) equal packets, one
per t-subset of users, and user k caches exactly the packets whose subset
contains k (the Maddah-Ali-Niesen placement).  Packets are symbolic ids,
never byte payloads: correctness questions reduce to linear algebra over
GF(2) in the packet basis.

Users are 0-based integers.  By default the first K/2 users request from
server A and the rest from server B; an explicit partition may override.
Subsets are kept sorted and iterated in colexicographic order so that every
derived structure (layers, matchings, plans) is deterministic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
from math import comb
from typing import Iterable, Iterator, NamedTuple

SERVER_A = "A"
SERVER_B = "B"


class PacketId(NamedTuple):
    """One file segment W_{i,T}: a server tag, a file index, and the caching t-subset."""

    server: str
    file_index: int
    subset: tuple[int, ...]


def twin(packet: PacketId) -> PacketId:
    """The packet of the other data server with the same file index and subset."""
    other = SERVER_B if packet.server == SERVER_A else SERVER_A
    return PacketId(other, packet.file_index, packet.subset)


@dataclass(frozen=True)
class GF2Combination:
    """A sparse XOR-set of packets: presence means coefficient 1 over GF(2).

    XOR of two combinations is the symmetric difference of their packet sets;
    the empty combination is the zero element.
    """

    packets: frozenset[PacketId] = frozenset()

    @classmethod
    def from_terms(cls, terms: Iterable[PacketId]) -> "GF2Combination":
        """Build from a term list, cancelling packets that appear an even number of times."""
        acc: set[PacketId] = set()
        for p in terms:
            if p in acc:
                acc.discard(p)
            else:
                acc.add(p)
        return cls(frozenset(acc))

    def __xor__(self, other: "GF2Combination") -> "GF2Combination":
        return GF2Combination(self.packets ^ other.packets)

    def __iter__(self) -> Iterator[PacketId]:
        return iter(self.packets)

    def __len__(self) -> int:
        return len(self.packets)

    def __contains__(self, packet: PacketId) -> bool:
        return packet in self.packets

    def is_zero(self) -> bool:
        return not self.packets

    def sorted_terms(self) -> list[PacketId]:
        return sorted(self.packets)


ZERO_COMBINATION = GF2Combination()


@dataclass(frozen=True)
class SystemConfig:
    """A validated (K, M, N) system with its user partition.

    t = K*M/N is the replication parameter: the number of users caching each
    packet.  lam = M/N is the cache fraction.
    """

    K: int
    M: Fraction
    N: int
    t: int
    lam: Fraction
    users_a: tuple[int, ...]
    users_b: tuple[int, ...]

    @property
    def users(self) -> range:
        return range(self.K)

    @property
    def packets_per_file(self) -> int:
        return comb(self.K, self.t)

    @property
    def is_symmetric(self) -> bool:
        return len(self.users_a) == len(self.users_b)

    @cached_property
    def mask_a(self) -> int:
        return mask_of(self.users_a)

    @cached_property
    def mask_b(self) -> int:
        return mask_of(self.users_b)

    @cached_property
    def a_rank(self) -> dict[int, int]:
        """1-based rank of each A-user in the partition order (a_1 is rank 1)."""
        return {u: i for i, u in enumerate(self.users_a, 1)}

    @cached_property
    def b_rank(self) -> dict[int, int]:
        return {u: i for i, u in enumerate(self.users_b, 1)}

    def files(self) -> list[tuple[str, int]]:
        half = self.N // 2
        return [(SERVER_A, i) for i in range(1, half + 1)] + [
            (SERVER_B, i) for i in range(1, half + 1)
        ]


def build_config(
    K: int,
    M: int | Fraction,
    N: int,
    partition: tuple[Iterable[int], Iterable[int]] | None = None,
) -> SystemConfig:
    """Validate and construct a system configuration.

    Requires K and N even and t = K*M/N an integer in [1, K-1].  The default
    partition assigns users [0, K/2) to server A and [K/2, K) to server B.
    """
    if K <= 0 or K % 2 != 0:
        raise ValueError(f"user count K={K} must be a positive even integer")
    if N <= 0:
        raise ValueError(f"file count N={N} must be positive")
    M = Fraction(M)
    t_frac = Fraction(K) * M / N
    if t_frac.denominator != 1:
        raise ValueError(
            f"t = K*M/N = {t_frac} is not an integer; choose K, M, N so the "
            f"replication parameter is integral"
        )
    t = int(t_frac)
    if not 1 <= t <= K - 1:
        raise ValueError(f"t = {t} must lie in [1, {K - 1}]")
    if N % 2 != 0:
        raise ValueError(f"file count N={N} must be even to split across two servers")
    if partition is None:
        users_a = tuple(range(K // 2))
        users_b = tuple(range(K // 2, K))
    else:
        users_a = tuple(partition[0])
        users_b = tuple(partition[1])
        if sorted(users_a + users_b) != list(range(K)):
            raise ValueError("partition must split users 0..K-1 into two disjoint lists")
    return SystemConfig(
        K=K,
        M=M,
        N=N,
        t=t,
        lam=M / N,
        users_a=users_a,
        users_b=users_b,
    )


# ---------------------------------------------------------------------------
# subsets: tuples are sorted user lists; masks are int bitsets (bit u = user u)

def mask_of(users: Iterable[int]) -> int:
    m = 0
    for u in users:
        m |= 1 << u
    return m


def users_of(mask: int) -> tuple[int, ...]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return tuple(out)


def colex_key(subset: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(reversed(subset))


def subsets_colex(universe: Iterable[int], size: int) -> list[tuple[int, ...]]:
    """All size-subsets of the universe as sorted tuples, in colex order."""
    return sorted(combinations(sorted(universe), size), key=colex_key)


# ---------------------------------------------------------------------------
# placement

def place_caches(config: SystemConfig) -> dict[int, frozenset[PacketId]]:
    """Cache contents per user: every packet of every file whose subset contains the user.

    Placement is demand independent.  Each cache holds N * C(K-1, t-1)
    packets, i.e. the fraction t/K = M/N of every file.
    """
    tsubs = subsets_colex(config.users, config.t)
    files = config.files()
    caches: dict[int, frozenset[PacketId]] = {}
    for k in config.users:
        caches[k] = frozenset(
            PacketId(server, idx, sub)
            for sub in tsubs
            if k in sub
            for (server, idx) in files
        )
    return caches


def is_cached(user: int, packet: PacketId) -> bool:
    return user in packet.subset


def packets_of_file(config: SystemConfig, server: str, file_index: int) -> Iterator[PacketId]:
    for sub in subsets_colex(config.users, config.t):
        yield PacketId(server, file_index, sub)


def uncached_packets(
    config: SystemConfig, user: int, server: str, file_index: int
) -> Iterator[PacketId]:
    """Packets of one file the user must decode: those whose subset misses the user."""
    others = [u for u in config.users if u != user]
    for sub in subsets_colex(others, config.t):
        yield PacketId(server, file_index, sub)


# ---------------------------------------------------------------------------
# demands

@dataclass(frozen=True)
class Demand:
    """One request per user: requests[k] = (server tag, file index)."""

    requests: tuple[tuple[str, int], ...]

    def of(self, user: int) -> tuple[str, int]:
        return self.requests[user]

    def file_index(self, user: int) -> int:
        return self.requests[user][1]

    def is_symmetric(self, config: SystemConfig) -> bool:
        """True when every user requests a file held by its own data server."""
        return all(self.requests[u][0] == SERVER_A for u in config.users_a) and all(
            self.requests[u][0] == SERVER_B for u in config.users_b
        )


def worst_demand(config: SystemConfig) -> Demand:
    """All users request distinct files; needs N >= K."""
    if config.N < config.K:
        raise ValueError(f"worst demand needs N >= K, got N={config.N}, K={config.K}")
    requests: list[tuple[str, int]] = [("", 0)] * config.K
    for i, u in enumerate(config.users_a, 1):
        requests[u] = (SERVER_A, i)
    for i, u in enumerate(config.users_b, 1):
        requests[u] = (SERVER_B, i)
    return Demand(tuple(requests))


def random_demand(config: SystemConfig, rng: random.Random) -> Demand:
    """Uniform demand over each user's own data server."""
    half = config.N // 2
    requests: list[tuple[str, int]] = [("", 0)] * config.K
    for u in config.users_a:
        requests[u] = (SERVER_A, rng.randint(1, half))
    for u in config.users_b:
        requests[u] = (SERVER_B, rng.randint(1, half))
    return Demand(tuple(requests))


def demand_from_mapping(config: SystemConfig, mapping: dict[int, tuple[str, int]]) -> Demand:
    if sorted(mapping) != list(config.users):
        raise ValueError("demand must map every user exactly once")
    half = config.N // 2
    requests = []
    for u in config.users:
        server, idx = mapping[u]
        if server not in (SERVER_A, SERVER_B) or not 1 <= idx <= half:
            raise ValueError(f"user {u}: invalid request ({server!r}, {idx})")
        requests.append((server, idx))
    return Demand(tuple(requests))
