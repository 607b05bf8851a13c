"""Selection-induced bias and Type I error inflation for binary endpoints.

Picking the arm with the higher observed mean utility inflates the selected
arm's estimated response rate under the null.  The shift is
Cov(X, U) / (sigma_U * sqrt(n1)) times a truncated-selection factor, decays
with the selection threshold, and dilutes by n1/(n1+n2) when Stage 1 data
are pooled into a confirmatory analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import binom, norm

from .outcomes import UtilityMoments

__all__ = [
    "TwoStagePlan",
    "BiasReport",
    "truncated_selection_expectation",
    "selection_bias",
    "max_bias",
    "combined_bias",
    "z_test_type1",
    "binomial_critical",
    "binomial_type1",
    "binary_bias_report",
]

SQRT_PI = math.sqrt(math.pi)


@dataclass(frozen=True)
class TwoStagePlan:
    """Stage sizes, selection threshold, null rate, and one-sided level."""

    n1: int
    n2: int
    lambda_u: float = 0.0
    p0: float = 0.5
    alpha: float = 0.025

    def __post_init__(self):
        if self.n1 < 1:
            raise ValueError(f"n1 must be >= 1, got {self.n1}")
        if self.n2 < 0:
            raise ValueError(f"n2 must be >= 0, got {self.n2}")
        if not (0 < self.p0 < 1):
            raise ValueError(f"p0 must lie in (0, 1), got {self.p0}")
        if not (0 < self.alpha < 0.5):
            raise ValueError(f"alpha must lie in (0, 0.5), got {self.alpha}")

    @property
    def n_total(self) -> int:
        return self.n1 + self.n2

    @property
    def dilution(self) -> float:
        return self.n1 / self.n_total

    @property
    def se0(self) -> float:
        return math.sqrt(self.p0 * (1 - self.p0) / self.n_total)


@dataclass(frozen=True)
class BiasReport:
    stage1_bias: float
    combined_bias: float
    max_bias: float
    max_combined_bias: float
    z_type1: float
    z_type1_max: float
    binom_type1: float
    binom_type1_max: float
    binom_critical: int


def truncated_selection_expectation(k: float) -> float:
    """E[Z_H 1{Z_H - Z_L > k} + Z_L 1{Z_H - Z_L <= k}] for iid standard normals.

    Closed form exp(-k^2/4) / sqrt(pi); equals 1/sqrt(pi) at k = 0, the
    classical expected maximum of two standard normals.
    """
    return math.exp(-k * k / 4.0) / SQRT_PI


def selection_bias(moments: UtilityMoments, n1: int, lambda_u: float = 0.0,
                   cov: float | None = None) -> float:
    """Stage-1 bias of the selected arm's mean endpoint under the null.

    ``cov`` defaults to Cov(X, U) from the utility moments; pass Cov(W, U)
    for any other endpoint W observed alongside the utility score (landmark
    survival indicators, survival times, ...).
    """
    if n1 < 1:
        raise ValueError(f"n1 must be >= 1, got {n1}")
    if moments.sigma2 <= 0:
        raise ValueError("utility variance must be positive; no selection variability")
    if cov is None:
        cov = moments.cov_xu
    sigma_u = math.sqrt(moments.sigma2)
    k = lambda_u * math.sqrt(n1) / sigma_u
    return cov / (sigma_u * math.sqrt(n1)) * truncated_selection_expectation(k)


def max_bias(p0: float, n1: int, lambda_u: float = 0.0,
             sigma_u: float | None = None) -> float:
    """Upper bound sqrt(p0(1-p0)/(n1*pi)): selection driven by efficacy alone.

    Attained by response-only scores with lambda_u = 0.  A positive
    threshold still attenuates the bound but requires sigma_u to evaluate
    the exponential factor.
    """
    if not (0 < p0 < 1):
        raise ValueError(f"p0 must lie in (0, 1), got {p0}")
    if n1 < 1:
        raise ValueError(f"n1 must be >= 1, got {n1}")
    base = math.sqrt(p0 * (1 - p0)) / math.sqrt(n1 * math.pi)
    if lambda_u > 0:
        if sigma_u is None:
            raise ValueError("sigma_u is required to attenuate the bound when lambda_u > 0")
        base *= math.exp(-lambda_u ** 2 * n1 / (4.0 * sigma_u ** 2))
    return base


def combined_bias(stage1_bias: float, n1: int, n2: int) -> float:
    """Dilute a Stage-1 bias by the pooled-analysis weight n1/(n1+n2)."""
    if n1 < 1 or n2 < 0:
        raise ValueError(f"need n1 >= 1 and n2 >= 0, got n1={n1}, n2={n2}")
    return stage1_bias * n1 / (n1 + n2)


def z_test_type1(plan: TwoStagePlan, delta_p_combined: float) -> float:
    """Size of the pooled one-sided Z-test when the null mean is shifted."""
    z = norm.ppf(1 - plan.alpha)
    return float(1.0 - norm.cdf(z - delta_p_combined / plan.se0))


def binomial_critical(n_total: int, p0: float, alpha: float) -> int:
    """Smallest k_c with Pr(X > k_c | n_total, p0) <= alpha (exact tail)."""
    if n_total < 1:
        raise ValueError(f"n_total must be >= 1, got {n_total}")
    k = int(binom.isf(alpha, n_total, p0))
    while binom.sf(k, n_total, p0) > alpha:
        k += 1
    while k > 0 and binom.sf(k - 1, n_total, p0) <= alpha:
        k -= 1
    return k


def binomial_type1(plan: TwoStagePlan, delta_p_combined: float) -> float:
    """Exact binomial-test size at success probability p0 + shift."""
    p_shift = plan.p0 + delta_p_combined
    if not (0 < p_shift < 1):
        raise ValueError(f"shifted success probability {p_shift:.6g} outside (0, 1)")
    k_c = binomial_critical(plan.n_total, plan.p0, plan.alpha)
    return float(binom.sf(k_c, plan.n_total, p_shift))


def binary_bias_report(moments: UtilityMoments, plan: TwoStagePlan) -> BiasReport:
    """Assemble plugin and worst-case bias/Type-I figures for one plan."""
    sigma_u = math.sqrt(moments.sigma2)
    b1 = selection_bias(moments, plan.n1, plan.lambda_u)
    bmax = max_bias(plan.p0, plan.n1, plan.lambda_u, sigma_u)
    bc = combined_bias(b1, plan.n1, plan.n2)
    bc_max = combined_bias(bmax, plan.n1, plan.n2)
    return BiasReport(
        stage1_bias=b1,
        combined_bias=bc,
        max_bias=bmax,
        max_combined_bias=bc_max,
        z_type1=z_test_type1(plan, bc),
        z_type1_max=z_test_type1(plan, bc_max),
        binom_type1=binomial_type1(plan, bc),
        binom_type1_max=binomial_type1(plan, bc_max),
        binom_critical=binomial_critical(plan.n_total, plan.p0, plan.alpha),
    )
