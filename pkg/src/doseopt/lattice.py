"""Exact distribution of per-arm utility sums on an integer lattice.

Margin-derived utility scores are rational, so the sum of n patient
utilities lives on a lattice {k / scale : k integer}.  The n-fold sum of
the single-patient four-point distribution is built by iterated dense
convolution, which is exact up to floating accumulation and replaces the
combinatorial enumeration of multinomial count vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ResourceLimitError
from .outcomes import JointOutcomeModel, UtilitySpec

__all__ = [
    "Lattice",
    "LatticePmf",
    "rationalize_utilities",
    "utility_sum_pmf",
    "select_high_prob",
    "selection_split",
    "MAX_SUPPORT",
]

# cap on the dense support length of one PMF
MAX_SUPPORT = 50_000_000

APPROX_FALLBACK_SCALE = 10 ** 6
_INT_TOL = 1e-9


@dataclass(frozen=True)
class Lattice:
    scale: int
    scores: tuple[int, int, int, int]
    approximate: bool = False


@dataclass(frozen=True)
class LatticePmf:
    """PMF of an n-patient utility sum; offsets are lattice indices (sum * scale)."""

    scale: int
    n: int
    offsets: np.ndarray
    masses: np.ndarray

    def mean(self) -> float:
        return float(np.dot(self.offsets, self.masses)) / self.scale

    def variance(self) -> float:
        m = float(np.dot(self.offsets, self.masses))
        m2 = float(np.dot(self.offsets.astype(float) ** 2, self.masses))
        return (m2 - m * m) / self.scale ** 2


def rationalize_utilities(u: UtilitySpec, max_denominator: int = 1000) -> Lattice:
    """Smallest common denominator putting all four scores on an integer lattice.

    Falls back to a fixed scale of 10^6 with rounding (flagged approximate)
    when no denominator up to the limit represents the scores within 1e-9.
    """
    if max_denominator < 1:
        raise ValueError("max_denominator must be >= 1")
    for scale in range(1, max_denominator + 1):
        scaled = [uk * scale for uk in u.scores]
        if all(abs(s - round(s)) <= _INT_TOL for s in scaled):
            return Lattice(scale=scale, scores=tuple(int(round(s)) for s in scaled))
    scale = APPROX_FALLBACK_SCALE
    return Lattice(scale=scale,
                   scores=tuple(int(round(uk * scale)) for uk in u.scores),
                   approximate=True)


def utility_sum_pmf(n: int, m: JointOutcomeModel, u: UtilitySpec,
                    lattice: Lattice | None = None,
                    max_support: int = MAX_SUPPORT) -> LatticePmf:
    """Exact PMF of the sum of n i.i.d. patient utilities under model ``m``.

    Equivalent to pushing the Multinomial(n, pi) count vector through the
    score sum, computed as n dense convolutions with the single-patient
    kernel (low-to-high index accumulation order).
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if lattice is None:
        lattice = rationalize_utilities(u)
    scores = lattice.scores
    smin, smax = min(scores), max(scores)
    support = n * (smax - smin) + 1
    if support > max_support:
        raise ResourceLimitError(
            f"utility-sum support {support} exceeds cap {max_support} "
            f"(n={n}, scale={lattice.scale})")
    kernel = np.zeros(smax - smin + 1)
    for s, pk in zip(scores, m.pi):
        kernel[s - smin] += pk
    masses = np.ones(1)
    for _ in range(n):
        masses = np.convolve(masses, kernel)
    offsets = np.arange(n * smin, n * smax + 1, dtype=np.int64)
    return LatticePmf(scale=lattice.scale, n=n, offsets=offsets, masses=masses)


def selection_split(pmf_h: LatticePmf, pmf_l: LatticePmf,
                    lambda_u: float) -> tuple[float, float, float]:
    """Decompose the selection event: (Pr select H, Pr tie at threshold, Pr select L).

    Dose H is selected when the utility-sum difference strictly exceeds
    n * lambda_u * scale; an exact tie at the threshold (possible only when
    the threshold lands on a lattice point) selects Dose L, and its mass is
    reported separately.
    """
    if pmf_h.scale != pmf_l.scale:
        raise ValueError(f"lattice scales differ: {pmf_h.scale} vs {pmf_l.scale}")
    if pmf_h.n != pmf_l.n:
        raise ValueError(f"per-arm sizes differ: {pmf_h.n} vs {pmf_l.n}")
    tau = lambda_u * pmf_h.n * pmf_h.scale
    tau_int = round(tau)
    on_lattice = abs(tau - tau_int) <= 1e-9 * max(1.0, abs(tau))
    k = int(tau_int) if on_lattice else math.floor(tau)

    f_h, f_l = pmf_h.masses, pmf_l.masses
    off_h0, off_l0 = int(pmf_h.offsets[0]), int(pmf_l.offsets[0])
    cdf_l = np.cumsum(f_l)
    # Pr(S_H - S_L > tau) = sum_i f_h[i] * Pr(S_L <= s_h(i) - k - 1)
    idx = (np.arange(len(f_h)) + off_h0) - k - 1 - off_l0
    valid = idx >= 0
    take = np.clip(idx, 0, len(cdf_l) - 1)
    p_h = float(np.sum(f_h[valid] * cdf_l[take[valid]]))
    p_tie = 0.0
    if on_lattice:
        idx_t = (np.arange(len(f_h)) + off_h0) - k - off_l0
        ok = (idx_t >= 0) & (idx_t < len(f_l))
        p_tie = float(np.sum(f_h[ok] * f_l[idx_t[ok]]))
    p_h = min(max(p_h, 0.0), 1.0)
    return p_h, p_tie, max(1.0 - p_h, 0.0)


def select_high_prob(pmf_h: LatticePmf, pmf_l: LatticePmf, lambda_u: float) -> float:
    """Pr(select Dose H) under the strict threshold rule; ties go to Dose L."""
    p_h, _, _ = selection_split(pmf_h, pmf_l, lambda_u)
    return p_h
