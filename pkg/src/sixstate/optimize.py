"""Constrained maximization of the key length over the free parameters.

The search runs over (brightness, p_x, eps_bar, eps_pe, eps_pa) under the
epsilon-budget and basis-bias constraints.  Feasibility is kept by
construction: the three free epsilons are parameterized as stick-breaking
fractions of the budget left after error verification, brightness and the
fractions live on log scales, p_x on a linear one.  A coarse multi-start
grid locates the basin, a deterministic simplex refinement polishes it, and
the result is never below the best grid point.  No randomness anywhere, so
repeated runs are bit-identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from .errors import EmptyPESampleError, InfeasibleError, ParameterError
from .rates import (
    FreeParams,
    SecurityBudget,
    SiftingProbabilities,
    asymptotic_rate,
    key_length,
)
from .spdc import SetupParams

_P_X_CAP = 1.0 / 3.0 - 1e-9


@dataclass(frozen=True)
class SearchSpace:
    """Bounds and grid resolution for the key-length search.

    eps_fraction_range bounds the stick-breaking fractions that carve the
    free epsilon budget; every sampled point satisfies the budget and
    sifting invariants by construction.  A degenerate range (lo == hi) pins
    that coordinate.
    """

    lambda_range: tuple = (1e-4, 50.0)
    p_x_range: tuple = (0.005, 0.33)
    eps_fraction_range: tuple = (1e-3, 0.9)
    lambda_points: int = 7
    p_x_points: int = 7
    eps_points: int = 5

    def __post_init__(self):
        lo, hi = self.lambda_range
        if not 0.0 < lo <= hi:
            raise ParameterError(f"lambda_range {self.lambda_range!r} invalid")
        lo, hi = self.p_x_range
        if not (0.0 < lo <= hi < 1.0 / 3.0 + 1e-15):
            raise ParameterError(
                f"p_x_range {self.p_x_range!r} not inside (0, 1/3)")
        lo, hi = self.eps_fraction_range
        if not 0.0 < lo <= hi < 1.0:
            raise ParameterError(
                f"eps_fraction_range {self.eps_fraction_range!r} not inside (0, 1)")
        for name, points, (lo, hi) in (
                ("lambda_points", self.lambda_points, self.lambda_range),
                ("p_x_points", self.p_x_points, self.p_x_range),
                ("eps_points", self.eps_points, self.eps_fraction_range)):
            if lo == hi:
                continue
            if points < 5:
                raise ParameterError(
                    f"{name} = {points} too coarse; the grid needs >= 5 points "
                    f"per non-degenerate dimension")

    @classmethod
    def pinned(cls, brightness: Optional[float] = None,
               p_x: Optional[float] = None, **kwargs) -> "SearchSpace":
        """Space with brightness and/or p_x held fixed."""
        if brightness is not None:
            kwargs["lambda_range"] = (brightness, brightness)
        if p_x is not None:
            kwargs["p_x_range"] = (p_x, p_x)
        return cls(**kwargs)


@dataclass(frozen=True)
class Optimum:
    """Best point found, its re-evaluated value, and search diagnostics."""

    best_params: FreeParams
    best_value: float
    evaluations: int
    converged: bool
    feasible: bool


def _epsilons_from_fractions(remaining: float, f_bar: float, f_pe: float,
                             f_pa: float) -> tuple:
    """Stick-breaking: fractions in (0,1) -> positive epsilons summing < remaining."""
    eps_bar = remaining * f_bar
    eps_pe = (remaining - eps_bar) * f_pe
    eps_pa = (remaining - eps_bar - eps_pe) * f_pa
    return eps_bar, eps_pe, eps_pa


def _axis(lo: float, hi: float, points: int, log: bool) -> np.ndarray:
    if lo == hi:
        return np.array([lo])
    if log:
        return np.geomspace(lo, hi, points)
    return np.linspace(lo, hi, points)


def optimize_key_length(setup: SetupParams, eps_total: float, eps_ec: float,
                        n_source: int, f_ec: float,
                        space: Optional[SearchSpace] = None, *,
                        strict_pe: bool = False,
                        conservative_leak: bool = False) -> Optimum:
    """Maximize the finite key length over all free protocol parameters.

    setup supplies the physical configuration; its brightness is replaced
    by the searched value.  Points whose PE sample is empty or whose bound
    is negative rank by how negative the bound is, so the refinement can
    climb toward feasibility.  best_value is the key length re-evaluated
    at best_params, bit-identical to a direct key_length call.
    """
    if space is None:
        space = SearchSpace()
    remaining = eps_total - eps_ec
    if remaining <= 0.0:
        raise ParameterError(
            f"eps_ec = {eps_ec!r} leaves no budget out of eps_total = {eps_total!r}")

    evaluations = 0

    def raw_value(brightness, p_x, f_bar, f_pe, f_pa) -> float:
        nonlocal evaluations
        evaluations += 1
        eps_bar, eps_pe, eps_pa = _epsilons_from_fractions(
            remaining, f_bar, f_pe, f_pa)
        budget = SecurityBudget(eps_total=eps_total, eps_ec=eps_ec,
                                eps_pa=eps_pa, eps_pe=eps_pe, eps_bar=eps_bar)
        try:
            result = key_length(replace(setup, brightness=brightness),
                                SiftingProbabilities(min(p_x, _P_X_CAP)),
                                budget, n_source, f_ec, strict_pe=strict_pe,
                                conservative_leak=conservative_leak)
        except EmptyPESampleError:
            return -math.inf
        return result.breakdown.raw_bits

    lam_axis = _axis(*space.lambda_range, space.lambda_points, log=True)
    px_axis = _axis(*space.p_x_range, space.p_x_points, log=False)
    frac_axis = _axis(*space.eps_fraction_range, space.eps_points, log=True)

    best_raw = -math.inf
    best_point = (lam_axis[0], px_axis[0], frac_axis[0], frac_axis[0], frac_axis[0])
    for lam in lam_axis:
        for px in px_axis:
            for f_bar in frac_axis:
                for f_pe in frac_axis:
                    for f_pa in frac_axis:
                        value = raw_value(lam, px, f_bar, f_pe, f_pa)
                        if value > best_raw:
                            best_raw = value
                            best_point = (lam, px, f_bar, f_pe, f_pa)

    # Simplex refinement in transformed coordinates (log for brightness and
    # fractions, linear for p_x), over the non-degenerate dimensions only.
    # Coordinates are projected back into the box inside the objective, so
    # every iterate stays feasible.
    lows = np.array([math.log10(space.lambda_range[0]), space.p_x_range[0],
                     math.log10(space.eps_fraction_range[0]),
                     math.log10(space.eps_fraction_range[0]),
                     math.log10(space.eps_fraction_range[0])])
    highs = np.array([math.log10(space.lambda_range[1]), space.p_x_range[1],
                      math.log10(space.eps_fraction_range[1]),
                      math.log10(space.eps_fraction_range[1]),
                      math.log10(space.eps_fraction_range[1])])
    x_full = np.array([math.log10(best_point[0]), best_point[1],
                       math.log10(best_point[2]), math.log10(best_point[3]),
                       math.log10(best_point[4])])
    active = highs > lows

    def decode(x_active: np.ndarray) -> tuple:
        x = x_full.copy()
        x[active] = x_active
        x = np.clip(x, lows, highs)
        return (float(10.0 ** x[0]), float(x[1]), float(10.0 ** x[2]),
                float(10.0 ** x[3]), float(10.0 ** x[4]))

    converged = False
    if best_raw > -math.inf and np.any(active):
        def negated(x_active: np.ndarray) -> float:
            value = raw_value(*decode(x_active))
            return math.inf if value == -math.inf else -value

        result = minimize(negated, x_full[active], method="Nelder-Mead",
                          options={"maxfev": 1200, "xatol": 1e-5,
                                   "fatol": 1e-8 * max(1.0, abs(best_raw)),
                                   "disp": False})
        converged = bool(result.success)
        refined_point = decode(result.x)
        refined_raw = raw_value(*refined_point)
        if refined_raw > best_raw:
            best_raw = refined_raw
            best_point = refined_point

    eps_bar, eps_pe, eps_pa = _epsilons_from_fractions(remaining, *best_point[2:])
    best_params = FreeParams(brightness=float(best_point[0]),
                             p_x=float(min(best_point[1], _P_X_CAP)),
                             eps_bar=float(eps_bar), eps_pe=float(eps_pe),
                             eps_pa=float(eps_pa))
    if best_raw == -math.inf:
        return Optimum(best_params=best_params, best_value=0.0,
                       evaluations=evaluations, converged=False,
                       feasible=False)
    final = key_length(
        replace(setup, brightness=best_params.brightness),
        SiftingProbabilities(best_params.p_x),
        SecurityBudget(eps_total=eps_total, eps_ec=eps_ec,
                       eps_pa=best_params.eps_pa, eps_pe=best_params.eps_pe,
                       eps_bar=best_params.eps_bar),
        n_source, f_ec, strict_pe=strict_pe,
        conservative_leak=conservative_leak)
    return Optimum(best_params=best_params,
                   best_value=final.key_length_bits,
                   evaluations=evaluations,
                   converged=converged,
                   feasible=final.feasible)


def optimize_asymptotic(setup: SetupParams,
                        lambda_range: tuple = (1e-4, 50.0)) -> tuple:
    """Maximize the asymptotic rate over the source brightness.

    setup's own brightness is ignored.  A log-spaced scan locates the basin
    and golden-section refines it to 1e-6 relative on the rate.  Returns
    (brightness_opt, rate); raises InfeasibleError when the rate is zero
    across the whole range.
    """
    lo, hi = lambda_range
    if not 0.0 < lo <= hi:
        raise ParameterError(f"lambda_range {lambda_range!r} invalid")

    def rate_at(brightness: float) -> float:
        return asymptotic_rate(replace(setup, brightness=brightness))

    if lo == hi:
        rate = rate_at(lo)
        if rate <= 0.0:
            raise InfeasibleError(
                f"asymptotic rate is zero at pinned brightness {lo!r}")
        return lo, rate

    grid = np.geomspace(lo, hi, 200)
    rates = np.array([rate_at(lam) for lam in grid])
    best = int(np.argmax(rates))
    if rates[best] <= 0.0:
        raise InfeasibleError(
            "asymptotic rate is zero across the whole brightness range")

    u_lo = math.log(grid[max(best - 1, 0)])
    u_hi = math.log(grid[min(best + 1, len(grid) - 1)])
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    u_c = u_hi - invphi * (u_hi - u_lo)
    u_d = u_lo + invphi * (u_hi - u_lo)
    f_c = rate_at(math.exp(u_c))
    f_d = rate_at(math.exp(u_d))
    while (u_hi - u_lo) > 1e-12 and abs(f_c - f_d) > 1e-6 * max(f_c, f_d):
        if f_c > f_d:
            u_hi, u_d, f_d = u_d, u_c, f_c
            u_c = u_hi - invphi * (u_hi - u_lo)
            f_c = rate_at(math.exp(u_c))
        else:
            u_lo, u_c, f_c = u_c, u_d, f_d
            u_d = u_lo + invphi * (u_hi - u_lo)
            f_d = rate_at(math.exp(u_d))
    candidates = [(f_c, math.exp(u_c)), (f_d, math.exp(u_d)),
                  (float(rates[best]), float(grid[best]))]
    top_rate, top_lambda = max(candidates, key=lambda pair: pair[0])
    return top_lambda, top_rate
