"""Symbol alphabets, emission maps, decoders, and threshold design.

Three modulation families are supported:

* CSK    -- one molecule type, symbols are diffusion rates; the decision
            cuts adapt to the previously decoded symbol.
* MOSK   -- one molecule type per symbol, decoded by threshold exceedance.
* MOCSK  -- rate-encoded symbols on a molecule type that alternates with
            slot parity, so decoding needs no history.

Slot indices count from 1. Odd slots use molecule type 0, even slots type 1
for MOCSK.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Union

from .channel import ChannelParams, poisson_pmf


class Family(str, Enum):
    CSK = "CSK"
    MOSK = "MOSK"
    MOCSK = "MOCSK"


class NonIdentifiableError(ValueError):
    """The symbol alphabet induces identical received statistics."""


@dataclass(frozen=True)
class SchemeSpec:
    """A modulation scheme: family, alphabet, and per-symbol emission rates.

    rate_per_symbol[s] is the diffusion rate used for symbol s. For MOSK all
    entries are equal (the rate goes on the symbol's own molecule type); for
    CSK/MOCSK the rates form the amplitude alphabet on a shared type.
    """

    family: Family
    levels: int
    num_molecule_types: int
    rate_per_symbol: tuple[float, ...]
    avg_power_per_bit: float

    def __post_init__(self):
        if self.levels not in (2, 4):
            raise ValueError(f"levels must be 2 or 4, got {self.levels}")
        expected_types = {
            Family.CSK: 1,
            Family.MOSK: self.levels,
            Family.MOCSK: 2,
        }[self.family]
        if self.num_molecule_types != expected_types:
            raise ValueError(
                f"{self.family.value} with {self.levels} levels needs "
                f"{expected_types} molecule types, got {self.num_molecule_types}"
            )
        if len(self.rate_per_symbol) != self.levels:
            raise ValueError(
                f"need one rate per symbol ({self.levels}), got {len(self.rate_per_symbol)}"
            )
        if any(r < 0 for r in self.rate_per_symbol):
            raise ValueError("diffusion rates must be nonnegative")
        bits = math.log2(self.levels)
        mean_rate = sum(self.rate_per_symbol) / self.levels
        if not math.isclose(mean_rate / bits, self.avg_power_per_bit, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError(
                f"mean rate {mean_rate} over {bits} bits does not match "
                f"declared power per bit {self.avg_power_per_bit}"
            )

    @property
    def bits(self) -> float:
        return math.log2(self.levels)


SCHEME_NAMES = {
    "BCSK": (Family.CSK, 2),
    "QCSK": (Family.CSK, 4),
    "BMOSK": (Family.MOSK, 2),
    "QMOSK": (Family.MOSK, 4),
    "BMOCSK": (Family.MOCSK, 2),
    "QMOCSK": (Family.MOCSK, 4),
}


def scheme_for_power(family: Family, levels: int, power_per_bit: float) -> SchemeSpec:
    """Build a scheme whose mean diffusion rate per bit equals power_per_bit.

    CSK/MOCSK use the equally spaced rate alphabet {0, d, ..., (L-1)d};
    MOSK puts the same rate on every symbol's own type (equal energy,
    since orthogonal signaling carries no amplitude information).
    """
    if power_per_bit <= 0:
        raise ValueError(f"power per bit must be positive, got {power_per_bit}")
    bits = math.log2(levels)
    if family is Family.MOSK:
        r = power_per_bit * bits
        rates = tuple([r] * levels)
        types = levels
    else:
        delta = 2.0 * power_per_bit * bits / (levels - 1)
        rates = tuple(delta * s for s in range(levels))
        types = 1 if family is Family.CSK else 2
    return SchemeSpec(family, levels, types, rates, power_per_bit)


def scheme_from_name(name: str, power_per_bit: float) -> SchemeSpec:
    try:
        family, levels = SCHEME_NAMES[name.upper()]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; expected one of {sorted(SCHEME_NAMES)}")
    return scheme_for_power(family, levels, power_per_bit)


def _check_cuts(cuts):
    if any(c < 0 for c in cuts):
        raise ValueError("thresholds must be nonnegative")
    if any(b <= a for a, b in zip(cuts, cuts[1:])):
        raise ValueError("threshold list must be strictly increasing")


@dataclass(frozen=True)
class CskThresholds:
    """Decision cut lists keyed by the previously decoded symbol."""

    per_prev: dict[int, tuple[int, ...]]

    def __post_init__(self):
        for cuts in self.per_prev.values():
            _check_cuts(cuts)


@dataclass(frozen=True)
class MoskThreshold:
    """Single exceedance threshold shared by every molecule type."""

    tau: int

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError("threshold must be nonnegative")


@dataclass(frozen=True)
class MocskThresholds:
    """One cut list applied in every slot, independent of history."""

    cuts: tuple[int, ...]

    def __post_init__(self):
        _check_cuts(self.cuts)


ThresholdSet = Union[CskThresholds, MoskThreshold, MocskThresholds]


def active_type(slot_index: int) -> int:
    """MOCSK molecule type for a 1-based slot index: odd slots 0, even slots 1."""
    if slot_index < 1:
        raise ValueError(f"slot indices count from 1, got {slot_index}")
    return 0 if slot_index % 2 == 1 else 1


def emission_for(spec: SchemeSpec, symbol: int, slot_index: int) -> dict[int, float]:
    """Diffusion rate per molecule type for transmitting `symbol` in `slot_index`."""
    if not 0 <= symbol < spec.levels:
        raise ValueError(f"symbol {symbol} out of range for {spec.levels} levels")
    if slot_index < 1:
        raise ValueError(f"slot indices count from 1, got {slot_index}")
    rate = spec.rate_per_symbol[symbol]
    if spec.family is Family.CSK:
        return {0: rate}
    if spec.family is Family.MOSK:
        out = {t: 0.0 for t in range(spec.num_molecule_types)}
        out[symbol] = rate
        return out
    out = {0: 0.0, 1: 0.0}
    out[active_type(slot_index)] = rate
    return out


def decode(
    spec: SchemeSpec,
    thresholds: ThresholdSet,
    counts: Mapping[int, int],
    prev_decoded: int,
    slot_index: int,
) -> tuple[int, bool]:
    """Hard symbol decision from per-type molecule counts.

    Returns (symbol, error_flagged). A count equal to a cut decodes to the
    higher side (the decision is count < cut -> lower interval). For MOSK the
    flag marks ambiguous outcomes (no type or several types above the
    threshold); the emitted symbol is then the max-count type, ties to the
    lowest index, and is bookkeeping only since MOSK never feeds back.
    """
    if spec.family is Family.CSK:
        cuts = thresholds.per_prev[prev_decoded]
        return bisect_right(cuts, counts[0]), False
    if spec.family is Family.MOCSK:
        # history-free by construction: prev_decoded is ignored
        return bisect_right(thresholds.cuts, counts[active_type(slot_index)]), False
    tau = thresholds.tau
    above = [t for t in range(spec.num_molecule_types) if counts[t] > tau]
    if len(above) == 1:
        return above[0], False
    best = max(range(spec.num_molecule_types), key=lambda t: (counts[t], -t))
    return best, True


def _map_boundary(lam_low: float, lam_high: float) -> int:
    """Smallest count k where Poisson(lam_high) outweighs Poisson(lam_low)."""
    if lam_low == 0:
        return 1 if lam_high > 0 else 0
    # pmf(k, hi) >= pmf(k, lo)  <=>  k >= (hi - lo) / ln(hi / lo)
    return max(0, math.ceil((lam_high - lam_low) / math.log(lam_high / lam_low)))


def _seed_cuts(rates, params: ChannelParams, interferer_rate: float) -> list[int]:
    """MAP interval boundaries between adjacent symbols, repaired to be
    strictly increasing."""
    lams = [params.p1 * r + params.p2 * interferer_rate + params.lambda0 for r in rates]
    cuts = []
    for lo, hi in zip(lams, lams[1:]):
        cuts.append(_map_boundary(lo, hi))
    for i in range(1, len(cuts)):
        cuts[i] = max(cuts[i], cuts[i - 1] + 1)
    if cuts and cuts[0] < 0:
        cuts[0] = 0
    return cuts


def _descend_cuts(state: dict, objective, positions) -> dict:
    """Greedy +-1 coordinate descent over integer cuts.

    Accepts only strict improvements, so it terminates and the result is
    locally optimal against every single-threshold +-1 move that keeps the
    cut lists strictly increasing and nonnegative.
    """
    best = objective(state)
    improved = True
    while improved:
        improved = False
        for key, i in positions:
            cuts = state[key]
            for delta in (-1, 1):
                cand = list(cuts)
                cand[i] += delta
                if cand[i] < 0:
                    continue
                if i > 0 and cand[i] <= cand[i - 1]:
                    continue
                if i + 1 < len(cand) and cand[i] >= cand[i + 1]:
                    continue
                trial = dict(state)
                trial[key] = tuple(cand)
                pe = objective(trial)
                if pe < best:
                    best = pe
                    state = trial
                    improved = True
    return state


def design_thresholds(spec: SchemeSpec, params: ChannelParams) -> ThresholdSet:
    """Pick integer thresholds minimizing the analytic average error probability.

    CSK/MOCSK seed at the MAP interval boundaries (for CSK, assuming the
    previous symbol was decoded correctly) and then run +-1 coordinate
    descent on the exact analytic error. MOSK scans every integer threshold
    up to lambda_max + 10*sqrt(lambda_max). Counts are integers, so only
    integer thresholds are worth searching.
    """
    from . import analysis  # deferred: analysis depends on these types

    rates = spec.rate_per_symbol
    if spec.family is Family.MOSK:
        if rates[0] == 0:
            raise NonIdentifiableError("MOSK with zero emission rate cannot signal")
        lam_max = (params.p1 + params.p2) * max(rates) + params.lambda0
        hi = math.ceil(lam_max + 10 * math.sqrt(lam_max))
        best_tau, best_pe = 0, math.inf
        for tau in range(hi + 1):
            pe = analysis.mosk_error_prob(spec, MoskThreshold(tau), params).avg_pe
            if pe < best_pe:
                best_tau, best_pe = tau, pe
        return MoskThreshold(best_tau)

    if len(set(rates)) < spec.levels:
        raise NonIdentifiableError(
            f"rate alphabet {rates} has symbols with identical received statistics"
        )

    if spec.family is Family.MOCSK:
        seed = {0: tuple(_seed_cuts(rates, params, 0.0))}

        def objective(state):
            return analysis.mocsk_error_prob(spec, MocskThresholds(state[0]), params).avg_pe

        positions = [(0, i) for i in range(spec.levels - 1)]
        final = _descend_cuts(seed, objective, positions)
        return MocskThresholds(final[0])

    seed = {
        p: tuple(_seed_cuts(rates, params, rates[p])) for p in range(spec.levels)
    }

    def objective(state):
        return analysis.csk_error_prob(spec, CskThresholds(dict(state)), params).avg_pe

    positions = [(p, i) for p in range(spec.levels) for i in range(spec.levels - 1)]
    final = _descend_cuts(seed, objective, positions)
    return CskThresholds(dict(final))
