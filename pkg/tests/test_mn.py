"""Single-server delivery and the span decoder, checked against a peeling oracle."""

import random
from fractions import Fraction
from math import comb

from hypothesis import given, settings, strategies as st

from tricache.mn import (
    Broadcast,
    mn_delivery,
    mn_rate,
    user_can_decode,
    verify_full_recovery,
)
from tricache.system import (
    GF2Combination,
    PacketId,
    build_config,
    place_caches,
    random_demand,
    worst_demand,
)


def test_broadcast_count_k4():
    cfg = build_config(4, 2, 4)
    assert len(mn_delivery(cfg, worst_demand(cfg))) == comb(4, 3) == 4


def test_rate_identity_sweep():
    for K in (4, 6, 8, 10):
        for t in range(1, K):
            cfg = build_config(K, t, K)
            assert mn_rate(cfg) == Fraction(K - t, t + 1)
            assert Fraction(comb(K, t + 1), comb(K, t)) == mn_rate(cfg)


def test_payload_instantiation():
    # the broadcast for S = {0,1,2} combines each member's request indexed by S minus it
    cfg = build_config(4, 2, 4)
    demand = worst_demand(cfg)
    bcs = {bc.index_sets[0]: bc for bc in mn_delivery(cfg, demand)}
    payload = bcs[(0, 1, 2)].payload
    assert payload == GF2Combination(
        frozenset(
            {
                PacketId("A", 1, (1, 2)),
                PacketId("A", 2, (0, 2)),
                PacketId("B", 1, (0, 1)),
            }
        )
    )


def test_decoder_trivial_cases():
    target = PacketId("A", 1, (1, 2))
    assert user_can_decode({target}, [], target)
    assert not user_can_decode(set(), [], target)


def test_decoder_single_mn_message():
    cfg = build_config(4, 2, 4)
    demand = worst_demand(cfg)
    caches = place_caches(cfg)
    bcs = mn_delivery(cfg, demand)
    # user 0 obtains its segment for every broadcast whose subset contains it
    for bc in bcs:
        sub = bc.index_sets[0]
        if 0 not in sub:
            continue
        server, idx = demand.of(0)
        target = PacketId(server, idx, tuple(u for u in sub if u != 0))
        assert user_can_decode(caches[0], [bc], target)


def peel_oracle(cache, broadcasts, target):
    """Forward-substitution: repeatedly learn the unique unknown of any equation."""
    known = set(cache)
    pending = [set(bc.payload) for bc in broadcasts]
    progress = True
    while progress:
        progress = False
        for eq in pending:
            unknown = [p for p in eq if p not in known]
            if len(unknown) == 1:
                known.add(unknown[0])
                progress = True
    return target in known


def test_decoder_agrees_with_peeling_on_mn_plans():
    rng = random.Random(11)
    for K, t in ((4, 2), (6, 3), (6, 2)):
        cfg = build_config(K, t, K)
        for demand in (worst_demand(cfg), random_demand(cfg, rng)):
            caches = place_caches(cfg)
            bcs = mn_delivery(cfg, demand)
            for user in cfg.users:
                server, idx = demand.of(user)
                for sub in (bc.index_sets[0] for bc in bcs):
                    if user not in sub:
                        continue
                    target = PacketId(server, idx, tuple(u for u in sub if u != user))
                    assert user_can_decode(caches[user], bcs, target) == peel_oracle(
                        caches[user], bcs, target
                    )


@settings(max_examples=40, deadline=None)
@given(st.data())
def test_decoder_monotone(data):
    cfg = build_config(4, 2, 4)
    demand = worst_demand(cfg)
    caches = place_caches(cfg)
    bcs = mn_delivery(cfg, demand)
    picked = data.draw(st.lists(st.booleans(), min_size=len(bcs), max_size=len(bcs)))
    subset = [bc for bc, keep in zip(bcs, picked) if keep]
    user = data.draw(st.integers(0, cfg.K - 1))
    server, idx = demand.of(user)
    sub = data.draw(st.sampled_from([bc.index_sets[0] for bc in bcs if user in bc.index_sets[0]]))
    target = PacketId(server, idx, tuple(u for u in sub if u != user))
    if user_can_decode(caches[user], subset, target):
        assert user_can_decode(caches[user], bcs, target)


def test_full_recovery_mn():
    cfg = build_config(6, 3, 6)
    demand = worst_demand(cfg)
    report = verify_full_recovery(cfg, demand, mn_delivery(cfg, demand))
    assert report.all_ok


def test_full_recovery_detects_missing_broadcast():
    cfg = build_config(6, 3, 6)
    demand = worst_demand(cfg)
    bcs = mn_delivery(cfg, demand)
    report = verify_full_recovery(cfg, demand, bcs[1:])
    assert not report.all_ok
    failing = report.failures()
    assert failing and all(u.first_failed is not None for u in failing)


def test_full_recovery_t_equals_k_minus_1():
    # every user caches all but one packet of each file; one broadcast suffices
    cfg = build_config(4, 3, 4)
    demand = worst_demand(cfg)
    bcs = mn_delivery(cfg, demand)
    assert len(bcs) == 1
    assert verify_full_recovery(cfg, demand, bcs).all_ok


def test_repeated_requests_still_decode():
    cfg = build_config(4, 2, 4)
    demand = random_demand(cfg, random.Random(3))
    assert verify_full_recovery(cfg, demand, mn_delivery(cfg, demand)).all_ok
