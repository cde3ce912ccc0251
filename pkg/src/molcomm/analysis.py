"""Closed-form average symbol error probabilities.

CSK decoding depends on the previously decoded symbol, so its error
probability couples to itself through the stationary misdecode matrix
q[s_p, sp_hat] = P(previous symbol s_p was decoded as sp_hat). Those
unknowns satisfy a linear system once the interference entering the
previous decode is marginalized with the uniform symbol prior (one-symbol
memory closure; for binary alphabets this is exactly the two-unknown
recursion in terms of P(E|0), P(E|1)). MOSK and MOCSK need no recursion.
"""

from dataclasses import dataclass, field
from math import fsum

import numpy as np

from .channel import ChannelParams, poisson_cdf
from .modems import (
    CskThresholds,
    Family,
    MocskThresholds,
    MoskThreshold,
    SchemeSpec,
)

ANALYTIC = "analytic"
SIMULATED = "simulated"


@dataclass(frozen=True)
class ErrorReport:
    """Average and conditional symbol error probabilities with provenance.

    conditional_pe keys are condition tuples: (s_c,) for CSK/MOCSK analytics,
    (s_c, s_p) for MOSK analytics, (s_c, s_p, sp_hat) for simulations.
    Analytic reports weight conditions uniformly; simulated reports carry the
    observed slot count per condition in conditional_weight.
    """

    scheme: SchemeSpec
    avg_pe: float
    conditional_pe: dict[tuple[int, ...], float]
    method: str
    ci_halfwidth: float | None = None
    conditional_weight: dict[tuple[int, ...], int] | None = None


def interval_prob(cuts: tuple[int, ...], symbol: int, lam: float) -> float:
    """Poisson(lam) mass of the decision interval of `symbol` under `cuts`.

    Interval s is [cuts[s-1], cuts[s]) with the outer intervals unbounded;
    a count equal to a cut belongs to the higher interval.
    """
    upper = cuts[symbol] if symbol < len(cuts) else None
    lower = cuts[symbol - 1] if symbol > 0 else None
    hi = 1.0 if upper is None else poisson_cdf(upper - 1, lam)
    lo = 0.0 if lower is None else poisson_cdf(lower - 1, lam)
    return min(1.0, max(0.0, hi - lo))


def _require_family(spec: SchemeSpec, family: Family):
    if spec.family is not family:
        raise ValueError(f"expected a {family.value} scheme, got {spec.family.value}")


def conditional_success_csk(
    spec: SchemeSpec,
    thresholds: CskThresholds,
    params: ChannelParams,
    s_c: int,
    s_p: int,
    sp_hat: int,
) -> float:
    """P(decode s_c correctly | sent s_c, previous sent s_p, previous decoded sp_hat)."""
    _require_family(spec, Family.CSK)
    lam = (
        params.p1 * spec.rate_per_symbol[s_c]
        + params.p2 * spec.rate_per_symbol[s_p]
        + params.lambda0
    )
    return interval_prob(thresholds.per_prev[sp_hat], s_c, lam)


def csk_decode_tensor(
    spec: SchemeSpec, thresholds: CskThresholds, params: ChannelParams
) -> np.ndarray:
    """D[s, s_pp, sph, shat]: P(decode shat | sent s, interferer s_pp, cuts of sph)."""
    L = spec.levels
    r = spec.rate_per_symbol
    D = np.empty((L, L, L, L))
    for s in range(L):
        for s_pp in range(L):
            lam = params.p1 * r[s] + params.p2 * r[s_pp] + params.lambda0
            for sph in range(L):
                cuts = thresholds.per_prev[sph]
                for shat in range(L):
                    D[s, s_pp, sph, shat] = interval_prob(cuts, shat, lam)
    return D


def solve_misdecode_system(decode_tensor: np.ndarray) -> np.ndarray:
    """Stationary misdecode matrix q from the conditional decode tensor.

    q satisfies q[s, shat] = (1/L) sum_{s_pp, sph} q[s_pp, sph] * D[s, s_pp, sph, shat]
    with rows summing to one. Substituting the diagonal via the row-sum
    constraint leaves L*(L-1) unknowns in a linear system.
    """
    D = decode_tensor
    L = D.shape[0]
    n = L * (L - 1)

    def widx(s, shat):
        return s * (L - 1) + (shat if shat < s else shat - 1)

    A = np.zeros((n, n))
    b = np.zeros(n)
    for s in range(L):
        for shat in range(L):
            if shat == s:
                continue
            row = widx(s, shat)
            for s_pp in range(L):
                base = D[s, s_pp, s_pp, shat]
                b[row] += base / L
                for sph in range(L):
                    if sph == s_pp:
                        continue
                    A[row, widx(s_pp, sph)] += (D[s, s_pp, sph, shat] - base) / L
    try:
        w = np.linalg.solve(np.eye(n) - A, b)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError(
            "misdecode system is singular; decode probabilities are internally inconsistent"
        ) from exc
    q = np.zeros((L, L))
    for s in range(L):
        for shat in range(L):
            if shat != s:
                q[s, shat] = w[widx(s, shat)]
        q[s, s] = 1.0 - q[s].sum()
    return q


def csk_misdecode_matrix(
    spec: SchemeSpec, thresholds: CskThresholds, params: ChannelParams
) -> np.ndarray:
    _require_family(spec, Family.CSK)
    return solve_misdecode_system(csk_decode_tensor(spec, thresholds, params))


def csk_fixed_point_residual(
    spec: SchemeSpec,
    thresholds: CskThresholds,
    params: ChannelParams,
    q: np.ndarray | None = None,
) -> float:
    """Max |T(q) - q| where T is the one-step misdecode update; ~0 at the solution."""
    _require_family(spec, Family.CSK)
    D = csk_decode_tensor(spec, thresholds, params)
    if q is None:
        q = solve_misdecode_system(D)
    L = spec.levels
    Tq = np.einsum("ps,cpsd->cd", q, D) / L
    return float(np.max(np.abs(Tq - q)))


def csk_error_prob(
    spec: SchemeSpec, thresholds: CskThresholds, params: ChannelParams
) -> ErrorReport:
    """Average CSK error probability including error propagation."""
    _require_family(spec, Family.CSK)
    L = spec.levels
    D = csk_decode_tensor(spec, thresholds, params)
    q = solve_misdecode_system(D)
    cond = {}
    for s_c in range(L):
        err = fsum(
            q[s_p, sph] * (1.0 - D[s_c, s_p, sph, s_c]) / L
            for s_p in range(L)
            for sph in range(L)
        )
        cond[(s_c,)] = err
    avg = fsum(cond.values()) / L
    return ErrorReport(spec, avg, cond, ANALYTIC)


def mosk_error_prob(
    spec: SchemeSpec, thresholds: MoskThreshold, params: ChannelParams
) -> ErrorReport:
    """Average MOSK error probability.

    Decoding succeeds only when exactly the sent symbol's type exceeds the
    threshold. Ambient noise makes every type observable, so every inactive
    type contributes a below-threshold factor at rate lambda0; the previous
    symbol's type carries the residual rate p2*r on top of the noise.
    """
    _require_family(spec, Family.MOSK)
    L = spec.levels
    tau = thresholds.tau
    r = spec.rate_per_symbol
    cond = {}
    for s_c in range(L):
        for s_p in range(L):
            lam = [params.lambda0] * L
            lam[s_c] += params.p1 * r[s_c]
            lam[s_p] += params.p2 * r[s_p]  # folds onto lam[s_c] when s_p == s_c
            success = 1.0 - poisson_cdf(tau, lam[s_c])
            for t in range(L):
                if t != s_c:
                    success *= poisson_cdf(tau, lam[t])
            cond[(s_c, s_p)] = 1.0 - success
    avg = fsum(cond.values()) / L**2
    return ErrorReport(spec, avg, cond, ANALYTIC)


def mocsk_error_prob(
    spec: SchemeSpec, thresholds: MocskThresholds, params: ChannelParams
) -> ErrorReport:
    """Average MOCSK error probability.

    The previous slot used the other molecule type, so the only rate seen by
    the decoder is p1*r(s_c) + lambda0: no interference term and no
    dependence on decoding history.
    """
    _require_family(spec, Family.MOCSK)
    cond = {}
    for s_c in range(spec.levels):
        lam = params.p1 * spec.rate_per_symbol[s_c] + params.lambda0
        cond[(s_c,)] = 1.0 - interval_prob(thresholds.cuts, s_c, lam)
    avg = fsum(cond.values()) / spec.levels
    return ErrorReport(spec, avg, cond, ANALYTIC)


def error_prob(spec: SchemeSpec, thresholds, params: ChannelParams) -> ErrorReport:
    """Dispatch to the family-specific analytic error probability."""
    if spec.family is Family.CSK:
        return csk_error_prob(spec, thresholds, params)
    if spec.family is Family.MOSK:
        return mosk_error_prob(spec, thresholds, params)
    return mocsk_error_prob(spec, thresholds, params)
