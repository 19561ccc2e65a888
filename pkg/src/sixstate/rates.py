"""Finite-key and asymptotic secret-key rates for the six-state protocol.

Assembles the extractable-key-length bound from the pieces in `bounds` and
the source/channel statistics in `spdc`: protocol bit accounting under
biased basis choice, the worst-case parameter-estimation penalty, the
error-correction and hashing costs, the asymptotic rate, the tolerable-QBER
threshold, and the search for the smallest pulse budget that yields a key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

from .bounds import (
    QberTriple,
    binary_entropy,
    conditional_entropy,
    finite_size_correction,
    leak_ec,
    worst_case_qber,
)
from .errors import EmptyPESampleError, InfeasibleError, ParameterError
from .spdc import SetupParams, coincidence_probability, expected_qber

# Relative slack on the epsilon-budget sum so that parameter points built to
# sit exactly on the budget boundary survive floating-point round-off.
_BUDGET_SLACK = 1e-12


@dataclass(frozen=True)
class SecurityBudget:
    """Failure-probability budget of one protocol run.

    The distilled key is eps_total-secure provided
    eps_bar + eps_ec + eps_pa + eps_pe <= eps_total.
    """

    eps_total: float
    eps_ec: float
    eps_pa: float
    eps_pe: float
    eps_bar: float

    def __post_init__(self):
        for name in ("eps_total", "eps_ec", "eps_pa", "eps_pe", "eps_bar"):
            value = getattr(self, name)
            if not 0.0 < value < 1.0:
                raise ParameterError(f"{name} = {value!r} outside (0, 1)")
        total = self.eps_bar + self.eps_ec + self.eps_pa + self.eps_pe
        if total > self.eps_total * (1.0 + _BUDGET_SLACK):
            raise ParameterError(
                f"epsilon budget violated: eps_bar + eps_ec + eps_pa + eps_pe = "
                f"{total!r} exceeds eps_total = {self.eps_total!r}")

    @classmethod
    def even_split(cls, eps_total: float, eps_ec: float) -> "SecurityBudget":
        """Split the budget left after error verification evenly three ways."""
        remaining = eps_total - eps_ec
        if remaining <= 0.0:
            raise ParameterError(
                f"eps_ec = {eps_ec!r} leaves no budget out of eps_total = {eps_total!r}")
        share = remaining / 3.0
        return cls(eps_total=eps_total, eps_ec=eps_ec,
                   eps_pa=share, eps_pe=share, eps_bar=share)


@dataclass(frozen=True)
class SiftingProbabilities:
    """Biased basis-choice probabilities: Z is favored, X and Y share p_x."""

    p_x: float

    def __post_init__(self):
        if not 0.0 < self.p_x < 1.0 / 3.0:
            raise ParameterError(
                f"p_x = {self.p_x!r} outside (0, 1/3); the Z bias requires "
                f"p_z**2 - p_x**2 > 0")

    @property
    def p_y(self) -> float:
        return self.p_x

    @property
    def p_z(self) -> float:
        return 1.0 - 2.0 * self.p_x

    @property
    def key_fraction(self) -> float:
        """Fraction of post-selected pairs left for the key: p_z^2 - p_x^2."""
        return self.p_z**2 - self.p_x**2

    @property
    def pe_fraction(self) -> float:
        """Fraction of post-selected pairs sampled per basis: p_x^2."""
        return self.p_x**2


@dataclass(frozen=True)
class ProtocolCounts:
    """Bit accounting from emitted pulses down to the key block.

    The fields are real-valued expectations (or observed realizations);
    `key_block_bits` and `pe_sample_bits` floor them to the integers that
    enter the fluctuation and key-length bounds.  Flooring is the
    conservative direction for both.
    """

    n_source: int
    n_sifted: float
    n_key: float
    m_pe: float

    def __post_init__(self):
        if self.n_source < 1:
            raise ParameterError(f"n_source = {self.n_source!r} must be >= 1")
        for name in ("n_sifted", "n_key", "m_pe"):
            if getattr(self, name) < 0.0:
                raise ParameterError(f"{name} must be >= 0")

    @classmethod
    def expected(cls, n_source: int, p11: float,
                 sifting: SiftingProbabilities) -> "ProtocolCounts":
        n_sifted = n_source * p11
        return cls(n_source=int(n_source), n_sifted=n_sifted,
                   n_key=n_sifted * sifting.key_fraction,
                   m_pe=n_sifted * sifting.pe_fraction)

    @classmethod
    def from_coincidences(cls, n_source: int, coincidences: int,
                          sifting: SiftingProbabilities) -> "ProtocolCounts":
        return cls(n_source=int(n_source), n_sifted=float(coincidences),
                   n_key=coincidences * sifting.key_fraction,
                   m_pe=coincidences * sifting.pe_fraction)

    @property
    def key_block_bits(self) -> int:
        return int(math.floor(self.n_key))

    @property
    def pe_sample_bits(self) -> int:
        return int(math.floor(self.m_pe))


@dataclass(frozen=True)
class FreeParams:
    """The protocol parameters the key-length bound is maximized over."""

    brightness: float
    p_x: float
    eps_bar: float
    eps_pe: float
    eps_pa: float


@dataclass(frozen=True)
class RateBreakdown:
    """Per-term bookkeeping of the key-length bound, all in bits."""

    entropy_bits: float
    finite_size_bits: float
    leak_ec_bits: float
    pa_bits: float
    ec_verify_bits: float

    @property
    def raw_bits(self) -> float:
        """The bound before clamping at zero."""
        return (self.entropy_bits - self.finite_size_bits - self.leak_ec_bits
                - self.pa_bits - self.ec_verify_bits)


@dataclass(frozen=True)
class RateResult:
    """Key length, rate per emitted pulse, and how the bound decomposed."""

    key_length_bits: float
    rate: float
    feasible: bool
    breakdown: RateBreakdown
    counts: ProtocolCounts
    observed_qber: QberTriple
    worst_qber: QberTriple
    p11: float
    params: Optional[FreeParams] = None


def _assemble(counts: ProtocolCounts, observed: QberTriple,
              budget: SecurityBudget, f_ec: float, p11: float,
              params: Optional[FreeParams], strict_pe: bool,
              conservative_leak: bool) -> RateResult:
    """Evaluate the key-length bound on already-built counts and QBERs."""
    if f_ec < 1.0:
        raise ParameterError(f"f_ec = {f_ec!r} must be >= 1")
    m = counts.pe_sample_bits
    if m < 1:
        raise EmptyPESampleError(
            f"PE sample empty: m_pe = {counts.m_pe!r} floors below 1 bit")
    eps_pe_each = budget.eps_pe / 3.0 if strict_pe else budget.eps_pe
    worst = worst_case_qber(observed, eps_pe_each, m, m, m)

    n = counts.key_block_bits
    pa_bits = 2.0 * math.log2(1.0 / budget.eps_pa)
    ec_verify_bits = math.log2(2.0 / budget.eps_ec)
    if n >= 1:
        entropy_bits = n * conditional_entropy(worst)
        finite_size_bits = n * finite_size_correction(n, budget.eps_bar)
        leak_e = worst.e_z if conservative_leak else observed.e_z
        leak_bits = leak_ec(n, leak_e, f_ec)
    else:
        # Empty key block: every n-proportional term vanishes, only the
        # fixed hashing costs remain and the bound is negative.
        entropy_bits = 0.0
        finite_size_bits = 0.0
        leak_bits = 0.0
    breakdown = RateBreakdown(entropy_bits=entropy_bits,
                              finite_size_bits=finite_size_bits,
                              leak_ec_bits=leak_bits,
                              pa_bits=pa_bits,
                              ec_verify_bits=ec_verify_bits)
    raw = breakdown.raw_bits
    key_bits = raw if raw > 0.0 else 0.0
    return RateResult(key_length_bits=key_bits,
                      rate=key_bits / counts.n_source,
                      feasible=raw > 0.0,
                      breakdown=breakdown,
                      counts=counts,
                      observed_qber=observed,
                      worst_qber=worst,
                      p11=p11,
                      params=params)


def key_length(setup: SetupParams, sifting: SiftingProbabilities,
               budget: SecurityBudget, n_source: int, f_ec: float, *,
               strict_pe: bool = False,
               conservative_leak: bool = False) -> RateResult:
    """Extractable key length for one fixed protocol configuration.

    Derives the expected counts from the source statistics, inflates the
    model QBER by the parameter-estimation fluctuation, and evaluates the
    bound.  Error correction is charged on the observed (model) Z error
    rate; pass conservative_leak=True to charge the worst case instead.
    A non-positive bound is reported as an infeasible result, not an error.
    """
    if n_source < 1:
        raise ParameterError(f"n_source = {n_source!r} must be >= 1")
    p11 = coincidence_probability(setup)
    e_model = expected_qber(setup)
    counts = ProtocolCounts.expected(int(n_source), p11, sifting)
    params = FreeParams(brightness=setup.brightness, p_x=sifting.p_x,
                        eps_bar=budget.eps_bar, eps_pe=budget.eps_pe,
                        eps_pa=budget.eps_pa)
    return _assemble(counts, QberTriple.symmetric(e_model), budget, f_ec,
                     p11, params, strict_pe, conservative_leak)


def sifted_pair_rate(e: float) -> float:
    """Asymptotic key bits per post-selected pair at symmetric QBER e.

    (1-e)*(1 - h((1 - 3e/2)/(1-e))) - h(e); positive below the tolerable
    QBER of the protocol and negative above it.
    """
    if not 0.0 <= e <= 0.5:
        raise ParameterError(f"QBER e = {e!r} outside [0, 1/2]")
    inner = (1.0 - 1.5 * e) / (1.0 - e)
    return (1.0 - e) * (1.0 - binary_entropy(inner)) - binary_entropy(e)


def asymptotic_rate(setup: SetupParams) -> float:
    """Secret-key bits per emitted pulse with unlimited statistics.

    Perfect error correction and exact parameter knowledge; clamped at
    zero when the source QBER exceeds the tolerable threshold.
    """
    factor = sifted_pair_rate(expected_qber(setup))
    return coincidence_probability(setup) * max(0.0, factor)


# Regression constant: root of sifted_pair_rate pinned by an independent
# high-precision bisection oracle; reproduced by qber_threshold() at 1e-10.
QBER_THRESHOLD_REFERENCE = 0.12619308327682118


@lru_cache(maxsize=1)
def qber_threshold() -> float:
    """Largest tolerable symmetric QBER: the root of sifted_pair_rate.

    Bisection on (0, 1/2) to absolute tolerance 1e-10.
    """
    lo, hi = 1e-6, 0.5 - 1e-6
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if sifted_pair_rate(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def min_pulses_for_key(setup: SetupParams, budget: SecurityBudget,
                       f_ec: float, target_bits: int = 1, *,
                       space=None, strict_pe: bool = False) -> int:
    """Smallest pulse budget whose optimized key length reaches target_bits.

    Only eps_total and eps_ec of the budget bind; the free epsilons, the
    brightness and the basis bias are re-optimized at every probe.
    Exponential bracketing followed by integer bisection; raises
    InfeasibleError when no brightness gives a positive asymptotic rate.
    """
    from .optimize import SearchSpace, optimize_asymptotic, optimize_key_length

    if target_bits < 1:
        raise ParameterError(f"target_bits = {target_bits!r} must be >= 1")
    if space is None:
        space = SearchSpace()
    # Requires a positive asymptotic rate somewhere; raises otherwise.
    optimize_asymptotic(setup, lambda_range=space.lambda_range)

    def reaches_target(n_source: int) -> bool:
        best = optimize_key_length(setup, budget.eps_total, budget.eps_ec,
                                   n_source, f_ec, space=space,
                                   strict_pe=strict_pe)
        return best.best_value >= target_bits

    lo, hi = 1, 16
    while not reaches_target(hi):
        lo, hi = hi, hi * 2
        if hi > 10**16:
            raise InfeasibleError(
                f"no pulse budget up to 1e16 reaches {target_bits} key bits")
    while lo < hi:
        mid = (lo + hi) // 2
        if reaches_target(mid):
            hi = mid
        else:
            lo = mid + 1
    return lo
