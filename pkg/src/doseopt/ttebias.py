"""Propagation of selection bias to time-to-event confirmatory endpoints.

When response and survival are correlated, the Stage-1 selection shift in
the utility score carries into pooled survival analyses.  The landmark
survival rate behaves like a binary endpoint; hazard-scale quantities pick
up the bias through delta-method steps (mean time -> hazard -> log hazard),
all driven by the common factor B = Bias(mean survival time).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import norm

from .bias import truncated_selection_expectation

__all__ = [
    "TtePlan",
    "TteBiasReport",
    "landmark_bias",
    "landmark_bias_max",
    "landmark_type1",
    "exp_test_type1",
    "cox_type1",
    "cox_type1_from_beta",
    "landmark_hazard_bridge",
    "expected_events",
    "tte_bias_report",
]


@dataclass(frozen=True)
class TtePlan:
    """Hazard, landmark time, stage sizes, and event counts for TTE tests.

    ``d_events`` feeds the one-sample exponential test and ``d_total`` the
    two-sample Cox/log-rank information; both are caller supplied (observed
    counts in the empirical protocol, expected counts under the null in the
    analytic protocol, see ``expected_events``).
    """

    lambda0: float
    tau: float
    n1: int
    n2: int
    d_events: float
    d_total: float
    lambda_u: float = 0.0
    alpha: float = 0.025

    def __post_init__(self):
        if self.lambda0 <= 0:
            raise ValueError(f"lambda0 must be positive, got {self.lambda0}")
        if self.tau <= 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if self.n1 < 1 or self.n2 < 0:
            raise ValueError(f"need n1 >= 1 and n2 >= 0, got n1={self.n1}, n2={self.n2}")
        if self.d_events < 1 or self.d_total < 1:
            raise ValueError("event counts must be >= 1")
        if not (0 < self.alpha < 0.5):
            raise ValueError(f"alpha must lie in (0, 0.5), got {self.alpha}")

    @property
    def dilution(self) -> float:
        return self.n1 / (self.n1 + self.n2)

    @property
    def s0_tau(self) -> float:
        """Null landmark survival probability exp(-lambda0 * tau)."""
        return math.exp(-self.lambda0 * self.tau)


@dataclass(frozen=True)
class TteBiasReport:
    landmark_bias: float
    landmark_bias_max: float
    landmark_type1: float
    mean_time_bias: float
    hazard_bias: float
    log_hazard_bias_combined: float
    exp_type1: float
    beta_bias_combined: float
    cox_type1: float
    bridge_hazard_bias_upper: float
    bridge_beta_bias_upper: float
    bridge_cox_type1: float


def landmark_bias(cov_su: float, sigma_u: float, n1: int,
                  lambda_u: float = 0.0, w1: float = 1.0) -> float:
    """Combined-stage bias of the landmark survival rate.

    Same structure as the response-rate bias with Cov(S(tau), U) in place
    of Cov(X, U); vanishes entirely when survival at tau is uncorrelated
    with the utility score.
    """
    if sigma_u <= 0:
        raise ValueError("sigma_u must be positive")
    if n1 < 1:
        raise ValueError(f"n1 must be >= 1, got {n1}")
    k = lambda_u * math.sqrt(n1) / sigma_u
    return w1 * cov_su / (sigma_u * math.sqrt(n1)) * truncated_selection_expectation(k)


def landmark_bias_max(s0_tau: float, n1: int, lambda_u: float = 0.0,
                      sigma_u: float | None = None) -> float:
    """Cauchy-Schwarz bound sqrt(s0(1-s0)/(n1*pi)) on the Stage-1 landmark bias."""
    if not (0 < s0_tau < 1):
        raise ValueError(f"s0_tau must lie in (0, 1), got {s0_tau}")
    if n1 < 1:
        raise ValueError(f"n1 must be >= 1, got {n1}")
    base = math.sqrt(s0_tau * (1 - s0_tau)) / math.sqrt(n1 * math.pi)
    if lambda_u > 0:
        if sigma_u is None:
            raise ValueError("sigma_u is required when lambda_u > 0")
        base *= math.exp(-lambda_u ** 2 * n1 / (4.0 * sigma_u ** 2))
    return base


def landmark_type1(plan: TtePlan, landmark_bias_combined: float, s0: float) -> float:
    """Shifted-normal size of the one-sided landmark Z-test against S0."""
    if not (0 < s0 < 1):
        raise ValueError(f"s0 must lie in (0, 1), got {s0}")
    se0 = math.sqrt(s0 * (1 - s0) / (plan.n1 + plan.n2))
    z = norm.ppf(1 - plan.alpha)
    return float(1.0 - norm.cdf(z - landmark_bias_combined / se0))


def exp_test_type1(plan: TtePlan, mean_time_bias: float) -> tuple[float, float]:
    """One-sample exponential test: (bias of the Z statistic, inflated size).

    The log-hazard bias is -lambda0 * w1 * B; the statistic rejects in the
    lower tail, so a positive B inflates the size.
    """
    log_hazard_bias = -plan.lambda0 * plan.dilution * mean_time_bias
    bias_z = log_hazard_bias * math.sqrt(plan.d_events)
    z = norm.ppf(1 - plan.alpha)
    return bias_z, float(norm.cdf(-z - bias_z))


def cox_type1(plan: TtePlan, mean_time_bias: float) -> tuple[float, float, float]:
    """Two-sample Cox test: (beta bias, Z bias, inflated size).

    The log hazard ratio inherits the same -lambda0 * w1 * B shift as the
    one-sample log hazard (the control arm is untouched by selection);
    information is d_total/4 under equal allocation.
    """
    beta_bias = -plan.lambda0 * plan.dilution * mean_time_bias
    return (beta_bias,) + cox_type1_from_beta(plan, beta_bias)


def cox_type1_from_beta(plan: TtePlan, beta_bias_combined: float) -> tuple[float, float]:
    """(Z bias, size) for a given combined-stage log-hazard-ratio bias."""
    bias_z = beta_bias_combined * math.sqrt(plan.d_total / 4.0)
    z = norm.ppf(1 - plan.alpha)
    return bias_z, float(norm.cdf(-z - bias_z))


def landmark_hazard_bridge(s0_tau: float, tau: float, lambda0: float,
                           landmark_bias_max_value: float,
                           w1: float = 1.0) -> tuple[float, float]:
    """Conservative hazard-scale bounds from the landmark bias bound.

    Two delta-method steps: S(tau) -> lambda via -log(S)/tau, then lambda
    -> log lambda.  Returns (stage-1 hazard bias upper, combined log-hazard
    -ratio bias upper with dilution w1 applied).  Each step overstates the
    magnitude, so Type I errors computed from these bounds are conservative.
    """
    if not (0 < s0_tau < 1):
        raise ValueError(f"s0_tau must lie in (0, 1), got {s0_tau}")
    if tau <= 0 or lambda0 <= 0:
        raise ValueError("tau and lambda0 must be positive")
    hazard_upper = -landmark_bias_max_value / (tau * s0_tau)
    beta_upper = w1 * hazard_upper / lambda0
    return hazard_upper, beta_upper


def expected_events(lambda0: float, t_entry: float, t_admin: float, n: float) -> float:
    """Expected event count under exponential survival with uniform accrual.

    Patients enroll uniformly on [0, t_entry] and are censored at calendar
    time t_admin, so Pr(event) = 1 - (e^{-l(t_admin-t_entry)} - e^{-l*t_admin})
    / (l*t_entry).
    """
    if t_entry <= 0 or t_admin < t_entry:
        raise ValueError("need 0 < t_entry <= t_admin")
    lam = lambda0
    p_censor = (math.exp(-lam * (t_admin - t_entry)) - math.exp(-lam * t_admin)) / (lam * t_entry)
    return n * (1.0 - p_censor)


def tte_bias_report(plan: TtePlan, sigma_u: float, cov_su: float,
                    cov_tu: float) -> TteBiasReport:
    """Full bias/Type-I panel from plugin covariances Cov(S(tau),U), Cov(T,U)."""
    w1 = plan.dilution
    s0 = plan.s0_tau
    lm = landmark_bias(cov_su, sigma_u, plan.n1, plan.lambda_u, w1)
    lm_max = landmark_bias_max(s0, plan.n1, plan.lambda_u, sigma_u)
    k = plan.lambda_u * math.sqrt(plan.n1) / sigma_u
    mean_time_bias = cov_tu / (sigma_u * math.sqrt(plan.n1)) * truncated_selection_expectation(k)
    hazard_bias = -plan.lambda0 ** 2 * mean_time_bias
    _, exp_t1 = exp_test_type1(plan, mean_time_bias)
    beta_bias, _, cox_t1 = cox_type1(plan, mean_time_bias)
    bridge_hazard, bridge_beta = landmark_hazard_bridge(s0, plan.tau, plan.lambda0, lm_max, w1)
    _, bridge_t1 = cox_type1_from_beta(plan, bridge_beta)
    return TteBiasReport(
        landmark_bias=lm,
        landmark_bias_max=lm_max,
        landmark_type1=landmark_type1(plan, lm, s0),
        mean_time_bias=mean_time_bias,
        hazard_bias=hazard_bias,
        log_hazard_bias_combined=-plan.lambda0 * w1 * mean_time_bias,
        exp_type1=exp_t1,
        beta_bias_combined=beta_bias,
        cox_type1=cox_t1,
        bridge_hazard_bias_upper=bridge_hazard,
        bridge_beta_bias_upper=bridge_beta,
        bridge_cox_type1=bridge_t1,
    )
