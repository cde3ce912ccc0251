"""Poisson arithmetic for the diffusion channel.

Arrivals of one molecule type within a slot are Poisson with a rate composed
from the current emission, the residue of the previous slot's emission, and
ambient noise. This module owns that rate composition plus numerically stable
pmf/cdf evaluation and reproducible sampling.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaincc


@dataclass(frozen=True)
class ChannelParams:
    """Hitting probabilities for the current/next slot and ambient noise rate.

    p1 is the probability an emitted molecule arrives within its own slot,
    p2 the probability it arrives one slot late. Everything later is ignored
    (one-slot memory). lambda0 is the mean count of background molecules
    per slot per type.
    """

    p1: float
    p2: float
    lambda0: float

    def __post_init__(self):
        if self.p1 < 0 or self.p2 < 0 or self.p1 + self.p2 > 1:
            raise ValueError(
                f"need 0 <= p1, p2 and p1 + p2 <= 1, got p1={self.p1}, p2={self.p2}"
            )
        if self.lambda0 < 0:
            raise ValueError(f"noise rate must be nonnegative, got {self.lambda0}")


@dataclass(frozen=True)
class EmissionPair:
    """Diffusion rates of one molecule type in the current and previous slot."""

    x_current: float
    x_previous: float

    def __post_init__(self):
        if self.x_current < 0 or self.x_previous < 0:
            raise ValueError("diffusion rates must be nonnegative")


def received_rate(emission: EmissionPair, params: ChannelParams) -> float:
    """Mean arrival count of one molecule type in the current slot."""
    return (
        params.p1 * emission.x_current
        + params.p2 * emission.x_previous
        + params.lambda0
    )


def poisson_pmf(k: int, lam: float) -> float:
    """P(Y = k) for Y ~ Poisson(lam), evaluated in log space.

    Stays finite for rates up to ~1e6 where naive factorials overflow.
    lam = 0 is the point mass at zero; k < 0 carries no mass.
    """
    if lam < 0:
        raise ValueError(f"Poisson rate must be nonnegative, got {lam}")
    if k < 0:
        return 0.0
    if lam == 0:
        return 1.0 if k == 0 else 0.0
    return math.exp(k * math.log(lam) - lam - math.lgamma(k + 1))


def poisson_cdf(k: int, lam: float) -> float:
    """P(Y <= k) for Y ~ Poisson(lam).

    Uses the regularized upper incomplete gamma identity
    sum_{j<=k} e^-lam lam^j/j! = Q(k+1, lam), which is stable both deep in
    the lower tail and when k is far above lam.
    """
    if lam < 0:
        raise ValueError(f"Poisson rate must be nonnegative, got {lam}")
    if k < 0:
        return 0.0
    if lam == 0:
        return 1.0
    return float(gammaincc(k + 1, lam))


def sample_count(lam: float, rng: np.random.Generator) -> int:
    """Draw one Poisson(lam) arrival count from the caller-owned generator.

    The caller supplies (and owns) the generator, so streams are reproducible
    per seed and independent execution strands never share state.
    """
    if lam < 0:
        raise ValueError(f"Poisson rate must be nonnegative, got {lam}")
    return int(rng.poisson(lam))
