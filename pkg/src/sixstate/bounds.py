"""Numerically hardened primitives for the finite-key security bound.

Everything here is a pure function of its arguments: the binary Shannon
entropy, the statistical-fluctuation penalty added to a sampled QBER, the
error-correction leakage model, and the conditional-entropy lower bound
evaluated on a per-basis QBER triple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ParameterError

# Absolute slack for inputs that sit on a domain boundary only through
# floating-point round-off; anything farther out is a real domain error.
BOUNDARY_TOL = 1e-12


def _clamp_unit(value: float, name: str) -> float:
    """Clamp to [0, 1] within BOUNDARY_TOL, raise beyond it."""
    if value < -BOUNDARY_TOL or value > 1.0 + BOUNDARY_TOL:
        raise ParameterError(f"{name} = {value!r} outside [0, 1]")
    return min(max(value, 0.0), 1.0)


def binary_entropy(e: float) -> float:
    """Binary Shannon entropy h(e) in bits, with the 0*log(0) = 0 convention.

    Symmetric under e -> 1-e; h(0) = h(1) = 0; h(1/2) = 1.
    """
    e = _clamp_unit(e, "binary_entropy argument")
    if e == 0.0 or e == 1.0:
        return 0.0
    return -e * math.log2(e) - (1.0 - e) * math.log2(1.0 - e)


def qber_fluctuation(eps_pe: float, m: int) -> float:
    """Statistical fluctuation of a QBER estimated from m sampled bits.

    Returns sqrt((ln(1/eps_pe) + 2 ln(m+1)) / (8m)): the half-width by
    which the true error rate can exceed the sample mean except with
    probability eps_pe.  Strictly decreasing in both arguments.
    """
    if not 0.0 < eps_pe < 1.0:
        raise ParameterError(f"eps_pe = {eps_pe!r} outside (0, 1)")
    m = int(m)
    if m < 1:
        raise ParameterError(f"sample size m = {m} must be >= 1")
    return math.sqrt((math.log(1.0 / eps_pe) + 2.0 * math.log(m + 1.0)) / (8.0 * m))


@dataclass(frozen=True)
class QberTriple:
    """Quantum bit error rates along the three measurement directions."""

    e_x: float
    e_y: float
    e_z: float

    def __post_init__(self):
        for name, value in (("e_x", self.e_x), ("e_y", self.e_y), ("e_z", self.e_z)):
            if not 0.0 <= value <= 0.5:
                raise ParameterError(f"{name} = {value!r} outside [0, 1/2]")
        total = self.e_x + self.e_y + self.e_z
        if total > 1.5 + BOUNDARY_TOL:
            raise ParameterError(f"QBER sum {total!r} exceeds 3/2")

    @classmethod
    def symmetric(cls, e: float) -> "QberTriple":
        return cls(e, e, e)


def worst_case_qber(observed: QberTriple, eps_pe: float,
                    m_x: int, m_y: int, m_z: int) -> QberTriple:
    """Worst-case QBER triple compatible with the sampled values.

    Each component gets the additive penalty 2*qber_fluctuation for its own
    sample size, capped at the physical maximum 1/2.
    """
    bumped = [
        min(obs + 2.0 * qber_fluctuation(eps_pe, m), 0.5)
        for obs, m in ((observed.e_x, m_x), (observed.e_y, m_y), (observed.e_z, m_z))
    ]
    return QberTriple(*bumped)


def leak_ec(n: int, e: float, f_ec: float) -> float:
    """Bits disclosed by one-way error correction on an n-bit block.

    Models the leakage as f_ec * n * h(e), the asymptotic cost of a perfect
    code times the inefficiency factor of the real protocol.
    """
    if n < 0:
        raise ParameterError(f"block size n = {n} must be >= 0")
    if not 0.0 <= e <= 0.5 + BOUNDARY_TOL:
        raise ParameterError(f"error rate e = {e!r} outside [0, 1/2]")
    if f_ec < 1.0:
        raise ParameterError(f"f_ec = {f_ec!r} must be >= 1")
    return f_ec * n * binary_entropy(e)


def conditional_entropy(e: QberTriple) -> float:
    """Eavesdropper-conditional entropy per key bit for single-photon pairs.

    Evaluates
        1 - e_z*h((1 + (e_x - e_y)/e_z)/2)
          - (1 - e_z)*h((1 - (e_x + e_y + e_z)/2)/(1 - e_z))
    with the e_z -> 0 limit of the first term taken as 0 (h is bounded, so
    the prefactor wins).  Raises if either h argument leaves [0, 1] by more
    than round-off: that signals a QBER triple no quantum state produces.
    """
    if e.e_z == 0.0:
        first = 0.0
    else:
        arg1 = _clamp_unit((1.0 + (e.e_x - e.e_y) / e.e_z) / 2.0,
                           "conditional_entropy direction-asymmetry argument")
        first = e.e_z * binary_entropy(arg1)
    arg2 = _clamp_unit((1.0 - (e.e_x + e.e_y + e.e_z) / 2.0) / (1.0 - e.e_z),
                       "conditional_entropy correlation argument")
    return 1.0 - first - (1.0 - e.e_z) * binary_entropy(arg2)


def finite_size_correction(n: int, eps_bar: float) -> float:
    """Per-bit entropy penalty for smoothing on a finite n-bit block."""
    n = int(n)
    if n < 1:
        raise ParameterError(f"block size n = {n} must be >= 1")
    if not 0.0 < eps_bar < 1.0:
        raise ParameterError(f"eps_bar = {eps_bar!r} outside (0, 1)")
    return 5.0 * math.sqrt(math.log2(2.0 / eps_bar) / n)


def entropy_bound(e: QberTriple, n: int, eps_bar: float) -> float:
    """Finite-size conditional-entropy bound per key bit (may be negative)."""
    return conditional_entropy(e) - finite_size_correction(n, eps_bar)
