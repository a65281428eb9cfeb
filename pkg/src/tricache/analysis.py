"""Closed-form calculators: unpaired ratios, rate formulas, and curve data.

Everything here is exact big-integer or rational arithmetic; floats appear
only when callers render output.  The improved-scheme unpaired counts are
computed from the per-class cardinalities (products of binomials), with the
published single-fraction simplifications recomputed as a redundant check.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from math import comb

from .pairing import (
    HIGH,
    LOW,
    MID,
    REGIME_GRAPH_SPECS,
    REGIME_STANDALONE,
    SCHEME_AUTO,
    SCHEME_IMPROVED,
    SCHEME_LAP,
    middle_weights,
    regime_of_lambda,
)


def binom(n: int, k: int) -> int:
    """C(n, k) with the combinatorial convention: 0 outside 0 <= k <= n."""
    if k < 0 or n < 0 or k > n:
        return 0
    return comb(n, k)


def mn_rate_formula(K: int, t: int) -> Fraction:
    return Fraction(K - t, t + 1)


def layer_size(K: int, t: int, w: int) -> int:
    return binom(K // 2, w) * binom(K // 2, t + 1 - w)


def four_way_class_size(K: int, t: int, w: int, has_a1: bool, has_b1: bool) -> int:
    """Size of the a_1/b_1 class of layer w in a symmetric system.

    Containing a_1 fixes one of the w A-side slots; the remaining choices on
    each side come from the K/2 - 1 other users.
    """
    m = K // 2 - 1
    a_choices = binom(m, w - 1) if has_a1 else binom(m, w)
    b_choices = binom(m, t - w) if has_b1 else binom(m, t + 1 - w)
    return a_choices * b_choices


def general_class_size(K: int, t: int, w: int, h1: int | None, h2: int | None) -> int:
    """Size of the class whose least A-user has rank h1 and least B-user rank h2.

    A rank of None means the subset has no user on that side, which forces
    w = 0 (A side) or w = t+1 (B side).
    """
    half = K // 2
    if h1 is None:
        a_choices = 1 if w == 0 else 0
    else:
        a_choices = binom(half - h1, w - 1)
    if h2 is None:
        b_choices = 1 if w == t + 1 else 0
    else:
        b_choices = binom(half - h2, t - w)
    return a_choices * b_choices


def lap_unpaired_count(K: int, t: int) -> int:
    """Middle-band subsets the baseline layer pairing leaves unmatched."""
    if t % 2 == 0:
        raise ValueError("the baseline unpaired count is defined for odd t only")
    half = K // 2
    return abs(
        comb(half, (t + 1) // 2) ** 2
        - 2 * comb(half, (t - 1) // 2) * comb(half, (t + 3) // 2)
    )


def delta_lap_exact(K: int, t: int) -> Fraction:
    """Unpaired fraction of the baseline pairing, exact."""
    return Fraction(lap_unpaired_count(K, t), comb(K, t + 1))


def improved_unpaired_count(K: int, t: int, regime: int | None = None) -> tuple[int, int]:
    """(regime, count) for the improved class pairing, from class cardinalities.

    Each graph of the regime contributes the absolute size difference of its
    two sides (the smaller side saturates); classes outside every graph are
    fully unpaired.
    """
    if t % 2 == 0:
        raise ValueError("the improved unpaired count is defined for odd t only")
    if regime is None:
        regime = regime_of_lambda(Fraction(t, K))
    lo, mid, hi = middle_weights(t)
    weight_of = {LOW: lo, MID: mid, HIGH: hi}

    def class_size(spec: tuple[str, bool, bool]) -> int:
        layer_name, a1, b1 = spec
        return four_way_class_size(K, t, weight_of[layer_name], a1, b1)

    n = 0
    for _, x_specs, y_specs in REGIME_GRAPH_SPECS[regime]:
        x_size = sum(class_size(s) for s in x_specs)
        y_size = sum(class_size(s) for s in y_specs)
        n += abs(x_size - y_size)
    for spec in REGIME_STANDALONE[regime]:
        n += class_size(spec)
    return regime, n


@dataclass(frozen=True)
class ImprovedDelta:
    regime: int
    n: int
    delta_prime: Fraction


def delta_improved_exact(K: int, t: int) -> ImprovedDelta:
    regime, n = improved_unpaired_count(K, t)
    return ImprovedDelta(regime=regime, n=n, delta_prime=Fraction(n, comb(K, t + 1)))


def improved_count_simplified(K: int, t: int, regime: int | None = None) -> int:
    """The published single-fraction forms of the unpaired counts, used as a
    redundant cross-check of the class-cardinality sums.

    The regime-3 form is evaluated with t+1 (not K) in its middle term; the
    class sums and the step-by-step expansion both fix that coefficient.
    """
    if regime is None:
        regime = regime_of_lambda(Fraction(t, K))
    base = comb(K // 2 - 1, (t + 1) // 2) ** 2
    if regime == 1:
        coeff = Fraction(abs(K - 3 * t - 3), K - t - 1) + Fraction(
            (t + 1) ** 2 * (K - t + 1) * (t + 3) + 8 * K * (t + 1) * (K - t - 1),
            (K - t - 1) ** 2 * (t + 3) * (K - t + 1),
        )
    elif regime == 2:
        coeff = Fraction(K * abs(2 * t + 2 - K), (K - t - 1) ** 2) + Fraction(
            8 * K * (t + 1), (K - t - 1) * (t + 3) * (K - t + 1)
        )
    elif regime == 3:
        coeff = (
            1
            + Fraction((t + 1) * abs(3 * t + 3 - 2 * K), (K - t - 1) ** 2)
            + Fraction(8 * K * (t + 1), (K - t - 1) * (t + 3) * (K - t + 1))
        )
    else:
        raise ValueError(f"unknown regime {regime}")
    value = coeff * base
    if value.denominator != 1:
        raise ArithmeticError(f"simplified count is not integral: {value}")
    return int(value)


# ---------------------------------------------------------------------------
# asymptotes (large-K limits at a fixed cache fraction)

_RATIO_BRANCHES = {
    1: lambda lam: abs(1 - 3 * lam) * (1 - lam) + lam * lam,
    2: lambda lam: abs(2 * lam - 1),
    3: lambda lam: (1 - lam) ** 2 + lam * abs(3 * lam - 2),
}


def ratio_asymptote(lam: Fraction) -> Fraction:
    """Limit of n_i / n: the improved-over-baseline unpaired ratio."""
    lam = Fraction(lam)
    return _RATIO_BRANCHES[regime_of_lambda(lam)](lam)


def delta_prime_asymptote(lam: Fraction) -> Fraction:
    """Limit of the improved unpaired fraction itself (one third of the ratio)."""
    return ratio_asymptote(lam) / 3


@dataclass(frozen=True)
class RegimeFormulas:
    """Bundled evaluators for one regime: exact big-integer counts and the
    large-K limit of the unpaired fraction."""

    regime: int

    def exact_count(self, K: int, t: int) -> int:
        return improved_unpaired_count(K, t, self.regime)[1]

    def asymptote(self, lam: Fraction) -> Fraction:
        return _RATIO_BRANCHES[self.regime](Fraction(lam))

    def delta_prime_asymptote(self, lam: Fraction) -> Fraction:
        return self.asymptote(lam) / 3


# ---------------------------------------------------------------------------
# rates

def rate_theorem(K: int, t: int, scheme: str = SCHEME_IMPROVED) -> Fraction:
    """Peak per-server rate of the three-server system, exact.

    Even t halves the single-server rate.  Odd t adds one sixth of the
    scheme's unpaired fraction: each unpaired subset costs a transmission on
    two of the three servers instead of sharing one three-way pair.
    """
    base = mn_rate_formula(K, t)
    if t % 2 == 0:
        return base / 2
    if scheme == SCHEME_LAP:
        delta = delta_lap_exact(K, t)
    elif scheme == SCHEME_IMPROVED:
        delta = delta_improved_exact(K, t).delta_prime
    elif scheme == SCHEME_AUTO:
        delta = min(delta_lap_exact(K, t), delta_improved_exact(K, t).delta_prime)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    return (Fraction(1, 2) + delta / 6) * base


@dataclass(frozen=True)
class AsymmetricRate:
    value: Fraction
    terms_used: int
    terms_skipped: int


def asymmetric_rate(K_A: int, K_B: int, t: int, scheme: str = SCHEME_IMPROVED) -> AsymmetricRate:
    """Peak rate for unequal request counts, evaluated as the printed sum

        sum_{l=0}^{t+1} C(K_A - K_B, l) * R_T(2 K_B, t - l).

    Terms whose inner parameters fall outside the model (t - l not in
    [1, 2 K_B - 1]) are skipped and counted; zero binomials simply vanish.
    """
    if K_A <= K_B:
        raise ValueError("asymmetric rate needs K_A > K_B; use the symmetric path otherwise")
    if K_B < 1:
        raise ValueError("K_B must be at least 1")
    total = Fraction(0)
    used = skipped = 0
    for l in range(t + 2):
        weight = comb(K_A - K_B, l)
        if weight == 0:
            continue
        inner_t = t - l
        if not 1 <= inner_t <= 2 * K_B - 1:
            skipped += 1
            continue
        total += weight * rate_theorem(2 * K_B, inner_t, scheme)
        used += 1
    return AsymmetricRate(value=total, terms_used=used, terms_skipped=skipped)


def multi_server_rate(L: int, K: int, t: int, with_two_parities: bool = False) -> Fraction:
    """Normalized peak rate with L data servers and one parity, or two parities
    over a higher-order field when with_two_parities is set."""
    if L < 2:
        raise ValueError("need at least two data servers")
    if not with_two_parities:
        return Fraction((L - 1) * (K - t), L * (1 + t))
    if t % 2 == 0:
        delta_prime = Fraction(0)
    else:
        delta_prime = delta_improved_exact(K, t).delta_prime
    return (Fraction(1, 2) + Fraction(L - 2, 2 * L + 4) * delta_prime) * mn_rate_formula(K, t)


def server_load_for_requests(K: int, t: int, m: int) -> Fraction:
    """Messages a data server transmits when m users request its files, per file."""
    if not 0 <= m <= K:
        raise ValueError("m must lie in [0, K]")
    return Fraction(comb(K, t + 1) - comb(K - m, t + 1), comb(K, t))


# ---------------------------------------------------------------------------
# curve data (analytic figure reproduction)

@dataclass(frozen=True)
class CurveRow:
    lam: Fraction
    K: int
    t: int
    regime: int
    n: int
    n_i: int
    ni_over_n: Fraction | None
    asymptote: Fraction
    delta: Fraction
    delta_prime: Fraction
    delta_ratio: Fraction | None


@dataclass(frozen=True)
class SkippedPoint:
    lam: Fraction
    K: int
    reason: str


def ratio_curves(
    K_values: list[int], lambdas: list[Fraction]
) -> tuple[list[CurveRow], list[SkippedPoint]]:
    """Rows of the ratio curves over a (lambda, K) grid.

    A grid point is admitted when t = K * lambda is an odd integer in
    [1, K-1] and K is even; everything else is skipped with a reason
    (constructions for even t leave nothing unpaired, so the curves are
    defined for odd t only).
    """
    rows: list[CurveRow] = []
    skipped: list[SkippedPoint] = []
    for lam in lambdas:
        lam = Fraction(lam)
        for K in K_values:
            if K % 2 != 0:
                skipped.append(SkippedPoint(lam, K, "K must be even"))
                continue
            t_frac = lam * K
            if t_frac.denominator != 1:
                skipped.append(SkippedPoint(lam, K, f"t = K*lambda = {t_frac} not integral"))
                continue
            t = int(t_frac)
            if not 1 <= t <= K - 1:
                skipped.append(SkippedPoint(lam, K, f"t = {t} outside [1, {K - 1}]"))
                continue
            if t % 2 == 0:
                skipped.append(SkippedPoint(lam, K, f"t = {t} is even"))
                continue
            n = lap_unpaired_count(K, t)
            regime, n_i = improved_unpaired_count(K, t)
            total = comb(K, t + 1)
            ratio = Fraction(n_i, n) if n else None
            rows.append(
                CurveRow(
                    lam=lam,
                    K=K,
                    t=t,
                    regime=regime,
                    n=n,
                    n_i=n_i,
                    ni_over_n=ratio,
                    asymptote=ratio_asymptote(lam),
                    delta=Fraction(n, total),
                    delta_prime=Fraction(n_i, total),
                    delta_ratio=ratio,
                )
            )
    return rows, skipped
