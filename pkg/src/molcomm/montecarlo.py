"""Stream-level simulation oracle.

Generates a uniform i.i.d. symbol stream, composes per-slot per-type Poisson
rates (current emission + previous slot residue + noise), draws arrivals,
decodes sequentially with decoded-symbol feedback for CSK, and reports the
empirical error rate with a confidence interval.

The channel is realized at rate level: arrivals are drawn directly from the
composed Poisson rate, which is equivalent to tracking individual molecules
by thinning/superposition and much faster. Draw order is fixed (symbols
first, then the full arrival matrix), so a seed pins the entire run.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import beta

from .analysis import SIMULATED, ErrorReport
from .channel import ChannelParams
from .modems import Family, SchemeSpec, ThresholdSet, active_type

# below this many observed errors the normal CI is unreliable; use exact bounds
_EXACT_CI_ERRORS = 30


@dataclass(frozen=True)
class SimConfig:
    scheme: SchemeSpec
    thresholds: ThresholdSet
    params: ChannelParams
    num_symbols: int
    seed: int

    def __post_init__(self):
        if self.num_symbols < 1:
            raise ValueError(f"need at least one symbol, got {self.num_symbols}")


def emission_matrix(spec: SchemeSpec, symbols: np.ndarray) -> np.ndarray:
    """Per-slot, per-type diffusion rates for a symbol stream (slot i is row i-1)."""
    k = len(symbols)
    rates = np.asarray(spec.rate_per_symbol)
    X = np.zeros((k, spec.num_molecule_types))
    if spec.family is Family.CSK:
        X[:, 0] = rates[symbols]
    elif spec.family is Family.MOSK:
        X[np.arange(k), symbols] = rates[symbols]
    else:
        types = np.array([active_type(i) for i in range(1, k + 1)])
        X[np.arange(k), types] = rates[symbols]
    return X


def slot_rates(spec: SchemeSpec, params: ChannelParams, symbols: np.ndarray) -> np.ndarray:
    """Composed Poisson arrival rates per slot and molecule type.

    A slot sees p1 times its own emission plus p2 times the previous slot's
    emission plus noise; there is no older residue. The slot before the
    stream is silent (cold start).
    """
    X = emission_matrix(spec, symbols)
    prev = np.vstack([np.zeros((1, X.shape[1])), X[:-1]])
    return params.p1 * X + params.p2 * prev + params.lambda0


def decode_stream(
    spec: SchemeSpec, thresholds: ThresholdSet, counts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized decoding of a whole count stream.

    Matches modems.decode slot by slot; CSK is the only sequential case
    because its cuts depend on the previously decoded symbol.
    """
    k = counts.shape[0]
    flagged = np.zeros(k, dtype=bool)
    if spec.family is Family.MOCSK:
        cuts = np.asarray(thresholds.cuts)
        types = np.array([active_type(i) for i in range(1, k + 1)])
        observed = counts[np.arange(k), types]
        return np.searchsorted(cuts, observed, side="right"), flagged
    if spec.family is Family.MOSK:
        above = counts > thresholds.tau
        n_above = above.sum(axis=1)
        flagged = n_above != 1
        # argmax picks the first maximum, i.e. ties go to the lowest index
        decoded = np.where(flagged, counts.argmax(axis=1), above.argmax(axis=1))
        return decoded, flagged
    observed = counts[:, 0]
    per_prev = [
        np.searchsorted(np.asarray(thresholds.per_prev[p]), observed, side="right").tolist()
        for p in range(spec.levels)
    ]
    decoded = np.empty(k, dtype=np.int64)
    prev = 0  # cold start: lowest symbol, consistent with the silent slot 0
    for i in range(k):
        prev = per_prev[prev][i]
        decoded[i] = prev
    return decoded, flagged


def _ci_halfwidth(errors: int, n: int) -> float:
    """95% CI halfwidth: normal approximation, or Clopper-Pearson when the
    error count is too small for it."""
    if n == 0:
        return 0.0
    p = errors / n
    if errors >= _EXACT_CI_ERRORS and n - errors >= _EXACT_CI_ERRORS:
        return 1.96 * math.sqrt(p * (1.0 - p) / n)
    lo = 0.0 if errors == 0 else float(beta.ppf(0.025, errors, n - errors + 1))
    hi = 1.0 if errors == n else float(beta.ppf(0.975, errors + 1, n - errors))
    return (hi - lo) / 2.0


def simulate(config: SimConfig) -> ErrorReport:
    """Run one end-to-end stream and estimate the symbol error probability.

    The first symbol has no predecessor and is excluded from the error
    accounting (its decode still seeds the CSK feedback). Conditional error
    rates are keyed by (sent, previous sent, previous decoded) and carry the
    observed slot counts as weights.
    """
    spec, params = config.scheme, config.params
    L = spec.levels
    rng = np.random.default_rng(config.seed)
    symbols = rng.integers(0, L, size=config.num_symbols)
    counts = rng.poisson(slot_rates(spec, params, symbols))
    decoded, flagged = decode_stream(spec, config.thresholds, counts)

    err = decoded != symbols
    if spec.family is Family.MOSK:
        # ambiguous exceedance is an error even if the tie-break guess is right
        err = err | flagged

    sent = symbols[1:]
    prev_sent = symbols[:-1]
    prev_dec = decoded[:-1]
    err = err[1:]
    n = len(sent)

    combo = (sent * L + prev_sent) * L + prev_dec
    totals = np.bincount(combo, minlength=L**3)
    errors = np.bincount(combo[err], minlength=L**3)

    cond_pe = {}
    cond_w = {}
    for idx in np.flatnonzero(totals):
        key = (int(idx) // (L * L), (int(idx) // L) % L, int(idx) % L)
        cond_pe[key] = int(errors[idx]) / int(totals[idx])
        cond_w[key] = int(totals[idx])

    total_errors = int(errors.sum())
    avg = total_errors / n if n else 0.0
    return ErrorReport(
        spec,
        avg,
        cond_pe,
        SIMULATED,
        ci_halfwidth=_ci_halfwidth(total_errors, n),
        conditional_weight=cond_w,
    )
