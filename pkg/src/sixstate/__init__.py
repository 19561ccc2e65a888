"""Secret-key rates for the entanglement-based six-state protocol.

Models a midpoint down-conversion source with number-resolving
post-selection, evaluates finite-size and asymptotic secret-key rates with
an explicit security budget, optimizes the free protocol parameters, and
cross-validates the closed-form model against an event-level Monte Carlo
run of the protocol.
"""

from .bounds import (
    QberTriple,
    binary_entropy,
    conditional_entropy,
    entropy_bound,
    finite_size_correction,
    leak_ec,
    qber_fluctuation,
    worst_case_qber,
)
from .errors import (
    ConvergenceError,
    EmptyPESampleError,
    InfeasibleError,
    ParameterError,
)
from .optimize import Optimum, SearchSpace, optimize_asymptotic, optimize_key_length
from .rates import (
    FreeParams,
    ProtocolCounts,
    RateBreakdown,
    RateResult,
    SecurityBudget,
    SiftingProbabilities,
    asymptotic_rate,
    key_length,
    min_pulses_for_key,
    qber_threshold,
    sifted_pair_rate,
)
from .simulate import (
    DetectionRecord,
    SimTally,
    empirical_rate_check,
    sample_detection_records,
    simulate,
    zscore_p11,
    zscore_qber,
)
from .spdc import (
    EffectiveTransmittances,
    SetupParams,
    channel_transmittance,
    coincidence_probability,
    expected_qber,
    intrinsic_qber,
    misalignment_error,
    pair_number_tail,
    photon_pair_prob,
    single_photon_weight,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DetectionRecord",
    "EffectiveTransmittances",
    "EmptyPESampleError",
    "FreeParams",
    "InfeasibleError",
    "Optimum",
    "ParameterError",
    "ProtocolCounts",
    "QberTriple",
    "RateBreakdown",
    "RateResult",
    "SearchSpace",
    "SecurityBudget",
    "SetupParams",
    "SiftingProbabilities",
    "SimTally",
    "asymptotic_rate",
    "binary_entropy",
    "channel_transmittance",
    "coincidence_probability",
    "conditional_entropy",
    "empirical_rate_check",
    "entropy_bound",
    "expected_qber",
    "finite_size_correction",
    "intrinsic_qber",
    "key_length",
    "leak_ec",
    "min_pulses_for_key",
    "misalignment_error",
    "optimize_asymptotic",
    "optimize_key_length",
    "pair_number_tail",
    "photon_pair_prob",
    "qber_fluctuation",
    "qber_threshold",
    "sample_detection_records",
    "sifted_pair_rate",
    "simulate",
    "single_photon_weight",
    "worst_case_qber",
    "zscore_p11",
    "zscore_qber",
]
