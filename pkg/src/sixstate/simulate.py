"""Event-level Monte Carlo run of the protocol's quantum phase.

Samples pair emissions from the source distribution, thins each side's
photons through fiber and detector losses, applies the number-resolving
post-selection, draws biased basis choices, and flips matched-basis
outcomes with the per-emission error probability.  The tallies estimate
the coincidence probability and per-basis error rates independently of
the closed-form model, so the two can cross-check each other.

Pulses are processed in fixed-size shards with independent child RNG
streams spawned from one recorded seed; shard tallies merge in shard
order, so a run is bit-reproducible regardless of how it is scheduled.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .bounds import QberTriple
from .errors import EmptyPESampleError, ParameterError
from .rates import ProtocolCounts, RateResult, SecurityBudget, SiftingProbabilities, _assemble
from .spdc import EffectiveTransmittances, SetupParams, misalignment_error

BASES = ("X", "Y", "Z")
_SHARD_SIZE = 2**21


@dataclass(frozen=True)
class DetectionRecord:
    """One side's record of a single pulse.

    tag indexes the pulse; click_0/click_1 are the two detectors;
    single_photon_flag is the number-resolving check; basis is the
    measurement direction.
    """

    tag: int
    click_0: bool
    click_1: bool
    single_photon_flag: bool
    basis: str


@dataclass
class SimTally:
    """Counters accumulated over a simulation run."""

    n_pulses: int
    seed: int
    p_x: float
    coincidences: int
    sifted: dict
    errors: dict
    basis_counts_alice: dict
    basis_counts_bob: dict
    coincidences_by_pair_number: dict = field(default_factory=dict)

    def __post_init__(self):
        if sum(self.sifted.values()) > self.coincidences:
            raise ParameterError("sifted pairs exceed coincidences")
        for basis in BASES:
            if self.errors[basis] > self.sifted[basis]:
                raise ParameterError(f"errors exceed sifted pairs in basis {basis}")

    @property
    def sifted_total(self) -> int:
        return sum(self.sifted.values())

    @property
    def errors_total(self) -> int:
        return sum(self.errors.values())


def _basis_codes(rng: np.random.Generator, count: int, p_x: float) -> np.ndarray:
    """Draw basis indices 0=X, 1=Y, 2=Z with probabilities (p_x, p_x, p_z)."""
    edges = np.array([p_x, 2.0 * p_x])
    return np.searchsorted(edges, rng.random(count), side="left")


def _simulate_shard(setup: SetupParams, sifting: SiftingProbabilities,
                    count: int, rng: np.random.Generator) -> dict:
    eta = EffectiveTransmittances.from_setup(setup)
    e_m = misalignment_error(setup.misalignment)

    # Pair-number distribution (n+1) x^n (1-x)^2 with x = lam/(1+lam) is a
    # negative binomial with 2 required successes of probability 1/(1+lam).
    pairs = rng.negative_binomial(2, 1.0 / (1.0 + setup.brightness), size=count)
    pairs = pairs[pairs >= 1]
    alive_a = rng.binomial(pairs, eta.eta_a)
    alive_b = rng.binomial(pairs, eta.eta_b)
    both_single = (alive_a == 1) & (alive_b == 1)
    pair_origin = pairs[both_single]
    n_coinc = pair_origin.size

    basis_a = _basis_codes(rng, n_coinc, sifting.p_x)
    basis_b = _basis_codes(rng, n_coinc, sifting.p_x)
    matched = basis_a == basis_b
    origin_m = pair_origin[matched]
    basis_m = basis_a[matched]
    intrinsic = 0.5 * (1.0 - 2.0 / (origin_m + 1.0))
    p_error = e_m + (1.0 - 2.0 * e_m) * intrinsic
    flips = rng.random(origin_m.size) < p_error

    return {
        "coincidences": int(n_coinc),
        "sifted": np.bincount(basis_m, minlength=3),
        "errors": np.bincount(basis_m[flips], minlength=3),
        "basis_a": np.bincount(basis_a, minlength=3),
        "basis_b": np.bincount(basis_b, minlength=3),
        "by_pair_number": np.bincount(pair_origin),
    }


def simulate(setup: SetupParams, sifting: SiftingProbabilities,
             n_pulses: int, seed: int) -> SimTally:
    """Run the quantum phase for n_pulses emissions and tally the outcome."""
    n_pulses = int(n_pulses)
    if n_pulses < 1:
        raise ParameterError(f"n_pulses = {n_pulses!r} must be >= 1")
    n_shards = (n_pulses + _SHARD_SIZE - 1) // _SHARD_SIZE
    streams = np.random.SeedSequence(seed).spawn(n_shards)

    coincidences = 0
    sifted = np.zeros(3, dtype=np.int64)
    errors = np.zeros(3, dtype=np.int64)
    basis_a = np.zeros(3, dtype=np.int64)
    basis_b = np.zeros(3, dtype=np.int64)
    by_pair: dict = {}
    left = n_pulses
    for stream in streams:
        count = min(_SHARD_SIZE, left)
        left -= count
        shard = _simulate_shard(setup, sifting, count,
                                np.random.Generator(np.random.PCG64(stream)))
        coincidences += shard["coincidences"]
        sifted += shard["sifted"]
        errors += shard["errors"]
        basis_a += shard["basis_a"]
        basis_b += shard["basis_b"]
        for n, c in enumerate(shard["by_pair_number"]):
            if c and n >= 1:
                by_pair[int(n)] = by_pair.get(int(n), 0) + int(c)

    return SimTally(
        n_pulses=n_pulses,
        seed=int(seed),
        p_x=sifting.p_x,
        coincidences=coincidences,
        sifted={b: int(sifted[i]) for i, b in enumerate(BASES)},
        errors={b: int(errors[i]) for i, b in enumerate(BASES)},
        basis_counts_alice={b: int(basis_a[i]) for i, b in enumerate(BASES)},
        basis_counts_bob={b: int(basis_b[i]) for i, b in enumerate(BASES)},
        coincidences_by_pair_number=dict(sorted(by_pair.items())),
    )


def empirical_rate_check(tally: SimTally, budget: SecurityBudget,
                         f_ec: float, *, strict_pe: bool = False,
                         conservative_leak: bool = False) -> RateResult:
    """Key length evaluated on observed counts instead of expectations.

    Rebuilds the bit accounting from the tallied coincidences and feeds the
    tallied per-basis error rates through the same bound as the analytic
    path, so the two pipelines can be compared at identical parameters.
    """
    sifting = SiftingProbabilities(tally.p_x)
    counts = ProtocolCounts.from_coincidences(tally.n_pulses,
                                              tally.coincidences, sifting)
    if tally.coincidences == 0:
        from .rates import RateBreakdown
        breakdown = RateBreakdown(0.0, 0.0, 0.0, 0.0, 0.0)
        zero = QberTriple.symmetric(0.0)
        return RateResult(key_length_bits=0.0, rate=0.0, feasible=False,
                          breakdown=breakdown, counts=counts,
                          observed_qber=zero, worst_qber=zero,
                          p11=0.0, params=None)
    for basis in BASES:
        if tally.sifted[basis] == 0:
            raise EmptyPESampleError(f"no sifted pairs in basis {basis}")
    observed = QberTriple(
        *(min(tally.errors[b] / tally.sifted[b], 0.5) for b in BASES))
    p11_emp = tally.coincidences / tally.n_pulses
    return _assemble(counts, observed, budget, f_ec, p11_emp, None,
                     strict_pe, conservative_leak)


def sample_detection_records(setup: SetupParams, sifting: SiftingProbabilities,
                             n_pulses: int, seed: int):
    """Per-pulse detection records for both sides, for inspection and tests.

    Unvectorized; meant for small n_pulses.  Multi-photon arrivals spread
    their clicks over both detectors; post-selected pairs carry correlated
    bits with the same error statistics the tally path uses.
    """
    if n_pulses > 100_000:
        raise ParameterError("record sampling is for small runs; use simulate()")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    eta = EffectiveTransmittances.from_setup(setup)
    e_m = misalignment_error(setup.misalignment)
    records_a, records_b = [], []
    for tag in range(int(n_pulses)):
        n = int(rng.negative_binomial(2, 1.0 / (1.0 + setup.brightness)))
        alive_a = int(rng.binomial(n, eta.eta_a)) if n else 0
        alive_b = int(rng.binomial(n, eta.eta_b)) if n else 0
        basis_a = BASES[int(_basis_codes(rng, 1, sifting.p_x)[0])]
        basis_b = BASES[int(_basis_codes(rng, 1, sifting.p_x)[0])]
        if alive_a == 1 and alive_b == 1:
            bit_a = int(rng.integers(0, 2))
            if basis_a == basis_b:
                intrinsic = 0.5 * (1.0 - 2.0 / (n + 1.0))
                p_error = e_m + (1.0 - 2.0 * e_m) * intrinsic
                bit_b = bit_a ^ int(rng.random() < p_error)
            else:
                bit_b = int(rng.integers(0, 2))
            clicks_a = (bit_a == 0, bit_a == 1)
            clicks_b = (bit_b == 0, bit_b == 1)
        else:
            clicks_a = _spread_clicks(rng, alive_a)
            clicks_b = _spread_clicks(rng, alive_b)
        records_a.append(DetectionRecord(tag, *clicks_a, alive_a == 1, basis_a))
        records_b.append(DetectionRecord(tag, *clicks_b, alive_b == 1, basis_b))
    return records_a, records_b


def _spread_clicks(rng: np.random.Generator, photons: int) -> tuple:
    if photons == 0:
        return False, False
    hits_0 = int(rng.binomial(photons, 0.5))
    return hits_0 > 0, (photons - hits_0) > 0


def zscore_p11(tally: SimTally, p11_model: float) -> Optional[float]:
    """Standard-normal deviation of the observed coincidence fraction."""
    variance = p11_model * (1.0 - p11_model) / tally.n_pulses
    if variance <= 0.0:
        return None
    observed = tally.coincidences / tally.n_pulses
    return (observed - p11_model) / math.sqrt(variance)


def zscore_qber(tally: SimTally, qber_model: float) -> Optional[float]:
    """Standard-normal deviation of the pooled observed error rate."""
    m = tally.sifted_total
    if m == 0:
        return None
    variance = qber_model * (1.0 - qber_model) / m
    if variance <= 0.0:
        return None
    observed = tally.errors_total / m
    return (observed - qber_model) / math.sqrt(variance)
