"""Per-arm sample size determination for two-dose selection designs.

A design must select Dose L with probability >= alpha_L when H is worse by
the safety margin (scenario S_L) and select Dose H with probability >=
alpha_H when H is better by the efficacy margin (scenario S_H).  Sizes are
available from the closed-form normal approximation and from an exact
search driven by the lattice distribution of utility sums.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.stats import norm

from .errors import ResourceLimitError
from .lattice import Lattice, rationalize_utilities, select_high_prob, utility_sum_pmf
from .outcomes import (JointOutcomeModel, UtilitySpec, joint_probs,
                       response_only_utilities, utility_from_margins,
                       utility_moments)

__all__ = [
    "DesignScenario",
    "ScenarioMoments",
    "DesignResult",
    "GridSpec",
    "scenario_moments",
    "n_for_threshold",
    "optimal_design_approx",
    "optimal_design_exact",
    "rose_design",
]

N_DIRECT_CAP = 10 ** 7


@dataclass(frozen=True)
class DesignScenario:
    """Reference rates, margins, correlation, utilities, and PCS targets.

    Scenario S_L puts the safety deficit on Dose H: L=(p, q), H=(p, q-d).
    Scenario S_H puts the efficacy deficit on Dose L: L=(p-delta, q), H=(p, q).
    ``utilities`` defaults to the margin-derived scores for (delta, d); pass
    explicit scores to size with a different utility than the margins imply.
    """

    p: float
    q: float
    delta: float
    d: float
    phi: float
    alpha_l: float
    alpha_h: float
    utilities: UtilitySpec | None = None

    def __post_init__(self):
        if not (0 < self.p < 1 and 0 < self.q < 1):
            raise ValueError(f"p and q must lie in (0, 1), got p={self.p}, q={self.q}")
        if self.p - self.delta <= 0:
            raise ValueError(f"p - delta must be positive, got {self.p - self.delta}")
        if self.q - self.d <= 0:
            raise ValueError(f"q - d must be positive, got {self.q - self.d}")
        for name, a in (("alpha_l", self.alpha_l), ("alpha_h", self.alpha_h)):
            if not (0.5 < a < 1):
                raise ValueError(f"{name} must lie in (0.5, 1), got {a}")
        if self.utilities is None:
            object.__setattr__(self, "utilities", utility_from_margins(self.delta, self.d))

    def arm_models(self, scenario: str) -> tuple[JointOutcomeModel, JointOutcomeModel]:
        """(Dose L, Dose H) outcome models under 'S_L' or 'S_H'."""
        if scenario == "S_L":
            pairs = ((self.p, self.q), (self.p, self.q - self.d))
        elif scenario == "S_H":
            pairs = ((self.p - self.delta, self.q), (self.p, self.q))
        else:
            raise ValueError(f"scenario must be 'S_L' or 'S_H', got {scenario!r}")
        models = []
        for arm, (p, q) in zip(("L", "H"), pairs):
            try:
                models.append(joint_probs(p, q, self.phi))
            except ValueError as exc:
                raise ValueError(f"scenario {scenario}, dose {arm}: {exc}") from exc
        return tuple(models)


@dataclass(frozen=True)
class ScenarioMoments:
    dmu_l: float   # mean utility difference (H - L) under S_L, negative
    v_l: float     # sum of per-arm utility variances under S_L
    dmu_h: float   # mean utility difference under S_H, positive
    v_h: float


@dataclass(frozen=True)
class DesignResult:
    n: int
    lambda_u: float
    method: str                 # 'approximate' or 'exact'
    pcs_l: float
    pcs_h: float
    binding: str                # 'S_L', 'S_H', or 'both'
    scale: int | None = None    # lattice denominator (exact method)
    lattice_k: int | None = None  # integer threshold: lambda_u = k / (n * scale)


@dataclass(frozen=True)
class GridSpec:
    """Threshold grid for the exact search.

    'lattice' evaluates every k/(n*scale) in the open mean-difference
    interval; PCS is a step function that changes only at these points, so
    the lattice grid is lossless.  'uniform' evaluates an evenly spaced
    grid with the given step for comparison purposes.
    """

    kind: str = "lattice"
    step: float | None = None

    def __post_init__(self):
        if self.kind not in ("lattice", "uniform"):
            raise ValueError(f"grid kind must be 'lattice' or 'uniform', got {self.kind!r}")
        if self.kind == "uniform" and (self.step is None or self.step <= 0):
            raise ValueError("uniform grid requires a positive step")


def scenario_moments(s: DesignScenario) -> ScenarioMoments:
    """Mean utility differences and variance sums under both sizing scenarios."""
    out = []
    for name in ("S_L", "S_H"):
        lo, hi = s.arm_models(name)
        m_lo = utility_moments(s.utilities, lo)
        m_hi = utility_moments(s.utilities, hi)
        out.append((m_hi.mu - m_lo.mu, m_lo.sigma2 + m_hi.sigma2))
    (dmu_l, v_l), (dmu_h, v_h) = out
    # response-only scores give dmu(S_L) = 0 exactly: Dose L is then only
    # weakly correct under S_L and the admissible thresholds are positive
    if not (dmu_l <= 0 < dmu_h):
        raise ValueError(
            f"scenario mean-utility differences must satisfy dmu(S_L) <= 0 < "
            f"dmu(S_H), got dmu(S_L)={dmu_l:.6g}, dmu(S_H)={dmu_h:.6g}")
    return ScenarioMoments(dmu_l=dmu_l, v_l=v_l, dmu_h=dmu_h, v_h=v_h)


def n_for_threshold(s: DesignScenario, lambda_u: float,
                    n_cap: int = N_DIRECT_CAP) -> tuple[int, int, int]:
    """Per-scenario sizes (n_L, n_H) and their max for a prespecified threshold.

    Each size has the structure of a one-sided Z-test detecting a shift of
    |lambda_u - dmu(S)| in a normal mean with variance v(S)/n.
    """
    mm = scenario_moments(s)
    if not (mm.dmu_l < lambda_u < mm.dmu_h):
        raise ValueError(
            f"lambda_u={lambda_u:.6g} must lie in the open interval "
            f"({mm.dmu_l:.6g}, {mm.dmu_h:.6g}); no finite sample size exists outside it")
    z_l = norm.ppf(s.alpha_l)
    z_h = norm.ppf(s.alpha_h)
    n_l = z_l ** 2 * mm.v_l / (lambda_u - mm.dmu_l) ** 2
    n_h = z_h ** 2 * mm.v_h / (mm.dmu_h - lambda_u) ** 2
    if max(n_l, n_h) > n_cap:
        raise ResourceLimitError(
            f"required per-arm size {max(n_l, n_h):.3g} exceeds cap {n_cap}")
    return math.ceil(n_l), math.ceil(n_h), max(math.ceil(n_l), math.ceil(n_h))


def optimal_design_approx(s: DesignScenario) -> DesignResult:
    """Jointly optimal (n, lambda_u) from the normal approximation.

    The real-valued optimum equalizes the two scenario requirements; n is
    rounded up and the threshold is then recomputed at the integer n so the
    reported pair satisfies its own constraints.  PCS values are the
    normal-model probabilities at (n, lambda_u): pcs_h equals alpha_h by
    construction and pcs_l carries the ceiling slack.
    """
    mm = scenario_moments(s)
    z_l = norm.ppf(s.alpha_l)
    z_h1 = norm.ppf(1.0 - s.alpha_h)
    n_real = ((z_l * math.sqrt(mm.v_l) - z_h1 * math.sqrt(mm.v_h))
              / (mm.dmu_h - mm.dmu_l)) ** 2
    n = math.ceil(n_real)
    lam = mm.dmu_h + z_h1 * math.sqrt(mm.v_h / n)
    pcs_l = float(norm.cdf((lam - mm.dmu_l) * math.sqrt(n / mm.v_l)))
    pcs_h = float(norm.cdf((mm.dmu_h - lam) * math.sqrt(n / mm.v_h)))
    return DesignResult(n=n, lambda_u=lam, method="approximate",
                        pcs_l=pcs_l, pcs_h=pcs_h,
                        binding=_binding(pcs_l - s.alpha_l, pcs_h - s.alpha_h))


def exact_pcs(s: DesignScenario, n: int, lambda_u: float,
              lattice: Lattice | None = None) -> tuple[float, float]:
    """Exact (PCS_L, PCS_H) at a given design via the lattice distribution."""
    if lattice is None:
        lattice = rationalize_utilities(s.utilities)
    pl_lo, pl_hi = s.arm_models("S_L")
    ph_lo, ph_hi = s.arm_models("S_H")
    u = s.utilities
    pcs_l = 1.0 - select_high_prob(utility_sum_pmf(n, pl_hi, u, lattice),
                                   utility_sum_pmf(n, pl_lo, u, lattice), lambda_u)
    pcs_h = select_high_prob(utility_sum_pmf(n, ph_hi, u, lattice),
                             utility_sum_pmf(n, ph_lo, u, lattice), lambda_u)
    return pcs_l, pcs_h


def optimal_design_exact(s: DesignScenario, lambda_grid: GridSpec | None = None,
                         n_cap: int = 5000, window: int = 15) -> DesignResult:
    """Smallest n whose exact PCS meets both targets for some grid threshold.

    The search ascends from just below the approximate n; feasibility on a
    lattice is not assumed monotone, so if the very first candidate is
    already feasible the scan walks downward (up to ``window`` steps of
    contiguous feasibility) before settling.  Among feasible thresholds at
    the chosen n, the largest is returned, which leaves pcs_h closest to
    its target and pcs_l with the slack.
    """
    if lambda_grid is None:
        lambda_grid = GridSpec()
    if n_cap < 1:
        raise ValueError("n_cap must be >= 1")
    mm = scenario_moments(s)
    lattice = rationalize_utilities(s.utilities)
    n_start = max(1, optimal_design_approx(s).n - 10)

    best_slack, best_pcs = -math.inf, (0.0, 0.0)

    def feasible_at(n: int):
        nonlocal best_slack, best_pcs
        pl_lo, pl_hi = s.arm_models("S_L")
        ph_lo, ph_hi = s.arm_models("S_H")
        pmf_l_lo = utility_sum_pmf(n, pl_lo, s.utilities, lattice)
        pmf_l_hi = utility_sum_pmf(n, pl_hi, s.utilities, lattice)
        pmf_h_lo = utility_sum_pmf(n, ph_lo, s.utilities, lattice)
        pmf_h_hi = utility_sum_pmf(n, ph_hi, s.utilities, lattice)
        for lam, k in _threshold_candidates(n, lattice.scale, mm, lambda_grid):
            pcs_l = 1.0 - select_high_prob(pmf_l_hi, pmf_l_lo, lam)
            pcs_h = select_high_prob(pmf_h_hi, pmf_h_lo, lam)
            slack = min(pcs_l - s.alpha_l, pcs_h - s.alpha_h)
            if slack > best_slack:
                best_slack, best_pcs = slack, (pcs_l, pcs_h)
            if pcs_l >= s.alpha_l and pcs_h >= s.alpha_h:
                return lam, k, pcs_l, pcs_h
        return None

    found = None
    for n in range(n_start, n_cap + 1):
        hit = feasible_at(n)
        if hit is not None:
            found = (n, hit)
            if n == n_start:
                # the window may have started inside a feasible region
                for n_down in range(n_start - 1, max(0, n_start - window) - 1, -1):
                    hit_down = feasible_at(n_down) if n_down >= 1 else None
                    if hit_down is None:
                        break
                    found = (n_down, hit_down)
            break
    if found is None:
        raise ResourceLimitError(
            f"no feasible exact design with n <= {n_cap}; best PCS pair "
            f"(pcs_l={best_pcs[0]:.4f}, pcs_h={best_pcs[1]:.4f})")
    n, (lam, k, pcs_l, pcs_h) = found
    return DesignResult(n=n, lambda_u=lam, method="exact", pcs_l=pcs_l, pcs_h=pcs_h,
                        binding=_binding(pcs_l - s.alpha_l, pcs_h - s.alpha_h),
                        scale=lattice.scale, lattice_k=k)


def rose_design(p: float, delta: float, alpha: float, method: str = "approximate",
                **exact_kwargs) -> DesignResult:
    """Efficacy-only special case: scores (1, 1, 0, 0) make utility equal X.

    Safety parameters are irrelevant to the utility distribution here; the
    scenario is built with placeholder q and d.  Note dmu(S_L) = 0, so only
    strictly positive thresholds are admissible.
    """
    s = DesignScenario(p=p, q=0.5, delta=delta, d=0.1, phi=0.0,
                       alpha_l=alpha, alpha_h=alpha,
                       utilities=response_only_utilities())
    if method in ("approx", "approximate"):
        return optimal_design_approx(s)
    if method == "exact":
        return optimal_design_exact(s, **exact_kwargs)
    raise ValueError(f"method must be 'approximate' or 'exact', got {method!r}")


def _threshold_candidates(n: int, scale: int, mm: ScenarioMoments, grid: GridSpec):
    """Yield (lambda_u, lattice_k) pairs in the open interval, largest first."""
    if grid.kind == "lattice":
        big_n = n * scale
        k_lo = math.floor(mm.dmu_l * big_n) + 1
        k_hi = math.ceil(mm.dmu_h * big_n) - 1
        for k in range(k_hi, k_lo - 1, -1):
            yield k / big_n, k
    else:
        m = math.floor((mm.dmu_h - mm.dmu_l) / grid.step)
        for i in range(m, 0, -1):
            lam = mm.dmu_l + i * grid.step
            if mm.dmu_l < lam < mm.dmu_h:
                yield lam, None


def _binding(slack_l: float, slack_h: float) -> str:
    if abs(slack_l - slack_h) < 1e-12:
        return "both"
    return "S_L" if slack_l < slack_h else "S_H"
