"""Physical model of the type-II down-conversion source and lossy link.

The source emits n photon pairs per pulse with the thermal-pair distribution
p_n = (n+1) x^n / (1+lam)^(n+2), x = lam/(1+lam); the mean pair number is
2*lam.  Photons travel half the total distance to each side, survive the
fiber and the detector with a per-photon probability, and a number-resolving
post-selection keeps only pulses that arrive as exactly one photon on both
sides.  The module evaluates the coincidence probability of that
post-selection and the error rate of the surviving pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ConvergenceError, ParameterError

# Truncation control for the pair-number sums: cut once the exact tail of
# sum(p_n) drops below TAIL_TOL (the tail bounds every weighted sum used
# here because W_n <= p_n).
TAIL_TOL = 1e-14
MAX_TERMS = 100_000


def channel_transmittance(alpha_db_per_km: float, length_km: float) -> float:
    """Photon survival probability of a fiber span: 10^(-alpha*L/10)."""
    if alpha_db_per_km < 0.0:
        raise ParameterError(f"attenuation {alpha_db_per_km!r} dB/km must be >= 0")
    if length_km < 0.0:
        raise ParameterError(f"length {length_km!r} km must be >= 0")
    return 10.0 ** (-alpha_db_per_km * length_km / 10.0)


@dataclass(frozen=True)
class SetupParams:
    """Physical configuration of source, channel and detectors.

    brightness is the pair-intensity parameter of the source: the mean
    photon-pair number per pulse is 2*brightness.  The source sits midway,
    so each side sees half of distance_km.  misalignment is the per-photon
    probability of a basis-frame error at the detection stage.
    """

    brightness: float
    distance_km: float = 0.0
    attenuation_db_per_km: float = 0.17
    eta_det_alice: float = 1.0
    eta_det_bob: float = 1.0
    misalignment: float = 0.0

    def __post_init__(self):
        if not self.brightness > 0.0:
            raise ParameterError(f"brightness = {self.brightness!r} must be > 0")
        if self.distance_km < 0.0:
            raise ParameterError(f"distance_km = {self.distance_km!r} must be >= 0")
        if self.attenuation_db_per_km < 0.0:
            raise ParameterError(
                f"attenuation_db_per_km = {self.attenuation_db_per_km!r} must be >= 0")
        for name, eta in (("eta_det_alice", self.eta_det_alice),
                          ("eta_det_bob", self.eta_det_bob)):
            if not 0.0 < eta <= 1.0:
                raise ParameterError(f"{name} = {eta!r} outside (0, 1]")
        if not 0.0 <= self.misalignment <= 0.5:
            raise ParameterError(
                f"misalignment = {self.misalignment!r} outside [0, 1/2]")


@dataclass(frozen=True)
class EffectiveTransmittances:
    """Total per-photon survival probability on each side (fiber * detector)."""

    eta_a: float
    eta_b: float

    def __post_init__(self):
        for name, eta in (("eta_a", self.eta_a), ("eta_b", self.eta_b)):
            if not 0.0 < eta <= 1.0:
                raise ParameterError(f"{name} = {eta!r} outside (0, 1]")

    @classmethod
    def from_setup(cls, setup: SetupParams) -> "EffectiveTransmittances":
        half = channel_transmittance(setup.attenuation_db_per_km,
                                     setup.distance_km / 2.0)
        return cls(eta_a=setup.eta_det_alice * half,
                   eta_b=setup.eta_det_bob * half)


def photon_pair_prob(n: int, brightness: float) -> float:
    """Probability that the source emits exactly n photon pairs in a pulse."""
    if n < 0:
        raise ParameterError(f"pair number n = {n} must be >= 0")
    if not brightness > 0.0:
        raise ParameterError(f"brightness = {brightness!r} must be > 0")
    x = brightness / (1.0 + brightness)
    return (n + 1.0) * x**n / (1.0 + brightness) ** 2


def pair_number_tail(n: int, brightness: float) -> float:
    """Exact tail sum of the pair-number distribution beyond n.

    Closed form of sum_{k > n} p_k; used to pick the truncation order for
    every pair-number series.
    """
    if n < 0:
        raise ParameterError(f"pair number n = {n} must be >= 0")
    x = brightness / (1.0 + brightness)
    return x ** (n + 1) * ((n + 2.0) - (n + 1.0) * x)


def _truncation_order(brightness: float) -> int:
    """Smallest n with an exact distribution tail below TAIL_TOL."""
    if pair_number_tail(MAX_TERMS, brightness) >= TAIL_TOL:
        raise ConvergenceError(
            f"pair-number series tail still {pair_number_tail(MAX_TERMS, brightness):.3e} "
            f"at the {MAX_TERMS}-term cap (brightness = {brightness!r})")
    lo, hi = 1, 2
    while pair_number_tail(hi, brightness) >= TAIL_TOL:
        lo, hi = hi, hi * 2
    while lo < hi:
        mid = (lo + hi) // 2
        if pair_number_tail(mid, brightness) < TAIL_TOL:
            hi = mid
        else:
            lo = mid + 1
    return lo


def single_photon_weight(n: int, brightness: float,
                         eta_a: float, eta_b: float) -> float:
    """Probability that an n-pair pulse arrives as one photon on each side.

    p_n * n^2 * (1-eta_a)^(n-1) * (1-eta_b)^(n-1) * eta_a * eta_b; the n^2
    counts which photon on each side survived.
    """
    if n < 1:
        raise ParameterError(f"pair number n = {n} must be >= 1")
    for name, eta in (("eta_a", eta_a), ("eta_b", eta_b)):
        if not 0.0 < eta <= 1.0:
            raise ParameterError(f"{name} = {eta!r} outside (0, 1]")
    return (photon_pair_prob(n, brightness) * n * n
            * (1.0 - eta_a) ** (n - 1) * (1.0 - eta_b) ** (n - 1)
            * eta_a * eta_b)


def intrinsic_qber(n: int) -> float:
    """Error rate contributed by an n-pair emission that survives as a pair.

    Zero for a single pair (maximally entangled), approaching 1/2 as the
    surviving photons become uncorrelated.
    """
    if n < 1:
        raise ParameterError(f"pair number n = {n} must be >= 1")
    return 0.5 * (1.0 - 2.0 / (n + 1.0))


def misalignment_error(eta_m: float) -> float:
    """Error probability from detector misalignment: 2*eta_m*(1 - eta_m)."""
    if not 0.0 <= eta_m <= 0.5:
        raise ParameterError(f"misalignment = {eta_m!r} outside [0, 1/2]")
    return 2.0 * eta_m * (1.0 - eta_m)


@lru_cache(maxsize=4096)
def _weight_moments(brightness: float, eta_a: float, eta_b: float) -> tuple:
    """(sum W_n, sum e_n * W_n) over the truncated pair-number series."""
    n_max = _truncation_order(brightness)
    n = np.arange(1, n_max + 1, dtype=np.float64)
    x = brightness / (1.0 + brightness)
    p_n = (n + 1.0) * np.power(x, n) / (1.0 + brightness) ** 2
    w_n = (p_n * n * n * np.power(1.0 - eta_a, n - 1.0)
           * np.power(1.0 - eta_b, n - 1.0) * eta_a * eta_b)
    e_n = 0.5 * (1.0 - 2.0 / (n + 1.0))
    return float(np.sum(w_n)), float(np.sum(e_n * w_n))


def coincidence_probability(setup: SetupParams) -> float:
    """Probability that a pulse survives post-selection as a photon pair."""
    eta = EffectiveTransmittances.from_setup(setup)
    p11, _ = _weight_moments(setup.brightness, eta.eta_a, eta.eta_b)
    return p11


def expected_qber(setup: SetupParams) -> float:
    """Error rate of the post-selected pairs; identical in all three bases.

    Weighted average of e_m*(1-e_n) + (1-e_m)*e_n over the surviving-pair
    weights (the cross term e_m*e_n produces correlated outcomes and is
    excluded).
    """
    eta = EffectiveTransmittances.from_setup(setup)
    p11, s1 = _weight_moments(setup.brightness, eta.eta_a, eta.eta_b)
    if p11 == 0.0:
        raise ZeroDivisionError(
            "coincidence probability underflowed to 0; no surviving pairs")
    e_m = misalignment_error(setup.misalignment)
    return e_m + (1.0 - 2.0 * e_m) * (s1 / p11)
