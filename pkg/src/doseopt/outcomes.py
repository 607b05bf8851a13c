"""Joint binary efficacy/safety outcome model and utility scores.

A treated patient contributes a response indicator X and a no-adverse-event
indicator Y.  The four joint outcomes (X, Y) = (1,1), (1,0), (0,1), (0,0)
occur with probabilities pi1..pi4 and are valued with utility scores
u1 >= u2 >= u3 >= u4.  The joint distribution is parameterized by the
marginal rates (p, q) and the Pearson correlation phi between X and Y.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

__all__ = [
    "UtilitySpec",
    "JointOutcomeModel",
    "UtilityMoments",
    "CountTable",
    "utility_from_margins",
    "response_only_utilities",
    "phi_bounds",
    "joint_probs",
    "estimate_model",
    "utility_moments",
    "mean_utility_decomposed",
    "marginal_rate_of_substitution",
]

_ORDER_TOL = 1e-12


@dataclass(frozen=True)
class UtilitySpec:
    """Ordered utility scores for the four joint outcomes.

    ``r`` is the efficacy/safety trade-off ratio when the scores were
    derived from clinical margins; ``swapped`` marks the r > 1 case where
    the two middle scores were exchanged to restore the ordering.
    """

    u1: float
    u2: float
    u3: float
    u4: float
    r: float | None = None
    swapped: bool = False

    def __post_init__(self):
        scores = (self.u1, self.u2, self.u3, self.u4)
        if any(s < -_ORDER_TOL or s > 1 + _ORDER_TOL for s in scores):
            raise ValueError(f"utility scores must lie in [0, 1], got {scores}")
        if not (self.u1 >= self.u2 - _ORDER_TOL
                and self.u2 >= self.u3 - _ORDER_TOL
                and self.u3 >= self.u4 - _ORDER_TOL):
            raise ValueError(f"utility scores must be non-increasing, got {scores}")

    @property
    def scores(self) -> tuple[float, float, float, float]:
        return (self.u1, self.u2, self.u3, self.u4)

    @property
    def eta(self) -> float:
        """Interaction term u1 - u2 - u3 + u4; zero under utility independence."""
        return self.u1 - self.u2 - self.u3 + self.u4


@dataclass(frozen=True)
class JointOutcomeModel:
    """Outcome probabilities for one dose: marginals (p, q), correlation phi.

    ``degenerate`` flags models estimated from tables where the correlation
    denominator vanished (some marginal count was zero) and phi was set to 0.
    """

    p: float
    q: float
    phi: float
    pi: tuple[float, float, float, float]
    degenerate: bool = False

    def __post_init__(self):
        if any(pk < -1e-12 for pk in self.pi):
            raise ValueError(f"negative outcome probability in {self.pi}")
        if abs(sum(self.pi) - 1.0) > 1e-9:
            raise ValueError(f"outcome probabilities must sum to 1, got {self.pi}")
        if abs(self.pi[0] + self.pi[1] - self.p) > 1e-9:
            raise ValueError("pi1 + pi2 must equal the response rate p")
        if abs(self.pi[0] + self.pi[2] - self.q) > 1e-9:
            raise ValueError("pi1 + pi3 must equal the no-AE rate q")


@dataclass(frozen=True)
class UtilityMoments:
    mu: float
    sigma2: float
    cov_xu: float


@dataclass(frozen=True)
class CountTable:
    """Historical counts of the four joint outcomes (n11 = response & no AE)."""

    n11: int
    n10: int
    n01: int
    n00: int

    def __post_init__(self):
        counts = (self.n11, self.n10, self.n01, self.n00)
        if any(c < 0 for c in counts):
            raise ValueError(f"counts must be nonnegative, got {counts}")
        if sum(counts) <= 0:
            raise ValueError("count table must contain at least one observation")

    @property
    def n(self) -> int:
        return self.n11 + self.n10 + self.n01 + self.n00


def utility_from_margins(delta: float, d: float) -> UtilitySpec:
    """Derive utility scores from an efficacy margin delta and safety margin d.

    With trade-off ratio r = delta/d the scores are anchored at u1 = 1,
    u4 = 0 with u2 = 1/(1+r) and u3 = r/(1+r), so a delta efficacy gain and
    a d safety gain move the mean utility equally.  When r > 1 the raw
    assignment would put u3 above u2; the two are swapped to restore the
    ordering and the result is flagged, since r > 1 usually means the
    margins deserve a second look.
    """
    if not (0 < delta <= 1):
        raise ValueError(f"efficacy margin must be in (0, 1], got {delta}")
    if not (0 < d <= 1):
        raise ValueError(f"safety margin must be in (0, 1], got {d}")
    r = delta / d
    u2 = 1.0 / (1.0 + r)
    u3 = r / (1.0 + r)
    if r > 1:
        return UtilitySpec(1.0, u3, u2, 0.0, r=r, swapped=True)
    return UtilitySpec(1.0, u2, u3, 0.0, r=r)


def response_only_utilities() -> UtilitySpec:
    """Scores (1, 1, 0, 0): utility equals the response indicator."""
    return UtilitySpec(1.0, 1.0, 0.0, 0.0)


def phi_bounds(p: float, q: float) -> tuple[float, float]:
    """Feasible range of the X-Y correlation for marginals (p, q).

    The joint success probability pi1 must satisfy
    max(0, p+q-1) <= pi1 <= min(p, q), which translates into closed-form
    bounds on phi.
    """
    _check_open_unit(p, "p")
    _check_open_unit(q, "q")
    s = math.sqrt(p * (1 - p) * q * (1 - q))
    lo = (max(0.0, p + q - 1.0) - p * q) / s
    hi = (min(p, q) - p * q) / s
    return lo, hi


def joint_probs(p: float, q: float, phi: float, truncate: bool = False) -> JointOutcomeModel:
    """Outcome probabilities pi1..pi4 from (p, q, phi).

    phi outside the feasible bounds raises unless ``truncate`` is set, in
    which case it is clamped to the nearest bound.  Boundary values are
    allowed and produce exact zero cells.
    """
    _check_open_unit(p, "p")
    _check_open_unit(q, "q")
    lo, hi = phi_bounds(p, q)
    if phi < lo - 1e-12 or phi > hi + 1e-12:
        if not truncate:
            raise ValueError(
                f"phi={phi:.6g} outside feasible bounds [{lo:.6g}, {hi:.6g}] "
                f"for p={p}, q={q}"
            )
        phi = min(max(phi, lo), hi)
    else:
        phi = min(max(phi, lo), hi)
    pi1 = p * q + phi * math.sqrt(p * (1 - p) * q * (1 - q))
    pi = _pi_vector(p, q, pi1)
    return JointOutcomeModel(p=p, q=q, phi=phi, pi=pi)


def estimate_model(counts: CountTable) -> JointOutcomeModel:
    """Estimate (p, q, phi) from a historical 2x2 table.

    phi-hat is the Pearson correlation of the 0/1 data, truncated into the
    feasible bounds of the estimated marginals.  A vanishing denominator
    (some marginal count zero) yields phi-hat = 0 with the ``degenerate``
    flag set instead of an error, so batch ingestion never aborts.
    """
    n = counts.n
    p = (counts.n11 + counts.n10) / n
    q = (counts.n11 + counts.n01) / n
    den = ((counts.n11 + counts.n10) * (counts.n11 + counts.n01)
           * (counts.n10 + counts.n00) * (counts.n01 + counts.n00))
    degenerate = den == 0
    if degenerate:
        phi = 0.0
    else:
        phi = (n * counts.n11 - (counts.n11 + counts.n10) * (counts.n11 + counts.n01)) / math.sqrt(den)
        lo, hi = phi_bounds(p, q)
        phi = min(max(phi, lo), hi)
    pi1 = p * q + phi * math.sqrt(max(p * (1 - p) * q * (1 - q), 0.0))
    return JointOutcomeModel(p=p, q=q, phi=phi, pi=_pi_vector(p, q, pi1), degenerate=degenerate)


def utility_moments(u: UtilitySpec, m: JointOutcomeModel) -> UtilityMoments:
    """Mean, variance, and response covariance of a single patient's utility.

    cov_xu = Cov(X, U) = u1*pi1 + u2*pi2 - p*mu drives the selection bias
    formulas downstream.
    """
    pi = m.pi
    scores = u.scores
    mu = sum(uk * pk for uk, pk in zip(scores, pi))
    m2 = sum(uk * uk * pk for uk, pk in zip(scores, pi))
    sigma2 = max(m2 - mu * mu, 0.0)
    cov_xu = u.u1 * pi[0] + u.u2 * pi[1] - m.p * mu
    return UtilityMoments(mu=mu, sigma2=sigma2, cov_xu=cov_xu)


def mean_utility_decomposed(u: UtilitySpec, p: float, q: float, phi: float) -> tuple[float, float]:
    """Mean utility written as eta*pi1 + (u2-u4)*p + (u3-u4)*q + u4.

    Returns (mu, eta).  eta = 0 for margin-derived scores, in which case
    efficacy and safety contribute additively.
    """
    model = joint_probs(p, q, phi)
    eta = u.eta
    mu = eta * model.pi[0] + (u.u2 - u.u4) * p + (u.u3 - u.u4) * q + u.u4
    return mu, eta


def marginal_rate_of_substitution(u: UtilitySpec, p: float, q: float, phi: float) -> float:
    """Efficacy gain required per unit safety loss at constant mean utility.

    Computed as (dmu/dq) / (dmu/dp) from the analytic partial derivatives.
    Under utility independence this is (u3-u4)/(u2-u4) for every (p, q, phi).
    """
    _check_open_unit(p, "p")
    _check_open_unit(q, "q")
    eta = u.eta
    dp = eta * (q + 0.5 * phi * math.sqrt(q * (1 - q) / (p * (1 - p))) * (1 - 2 * p)) + (u.u2 - u.u4)
    dq = eta * (p + 0.5 * phi * math.sqrt(p * (1 - p) / (q * (1 - q))) * (1 - 2 * q)) + (u.u3 - u.u4)
    if abs(dp) < 1e-14:
        raise ValueError("mean utility is insensitive to p; MRS undefined")
    return dq / dp


def _pi_vector(p: float, q: float, pi1: float) -> tuple[float, float, float, float]:
    # clip tiny negatives from float cancellation at the Frechet boundary
    pi = (pi1, p - pi1, q - pi1, 1.0 - p - q + pi1)
    return tuple(0.0 if -1e-12 < pk < 0 else pk for pk in pi)


def _check_open_unit(x: float, name: str) -> None:
    if not (0 < x < 1):
        raise ValueError(f"{name} must lie strictly in (0, 1), got {x}")
