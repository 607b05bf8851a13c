"""Monte Carlo engine for two-stage selection-then-confirm studies.

Replications are processed in fixed-size batches; each batch owns a
counter-based RNG stream keyed by (seed, scenario id, batch index) and
returns partial sums that are reduced in batch order, so results are
bit-identical for any worker count.  The hot paths are vectorized over
replications; record-level equivalents of the per-trial operations are
provided for inspection and testing.

Stage 1 randomizes n1 patients per dose and selects on mean utility; the
pooled confirmatory analysis adds n2 patients on the selected dose (and a
concurrent control arm of equal total size for two-sample survival tests).
Efficacy-survival dependence is a Gaussian copula: X = 1{Phi(Z1) <= p} and
T = -log(Phi(Z2))/lambda0 with corr(Z1, Z2) = rho_c, so positive rho_c
makes responders live longer.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr
from scipy.stats import binom, norm

from .bias import SQRT_PI, binomial_critical
from .lattice import rationalize_utilities
from .outcomes import UtilitySpec, joint_probs
from .sizing import DesignScenario

__all__ = [
    "TteSettings",
    "SimConfig",
    "PatientRecord",
    "SelectionResult",
    "TestDecisions",
    "BinaryResults",
    "TteResults",
    "ScenarioSummary",
    "gen_arm",
    "run_selection",
    "run_tests",
    "run_study",
    "empirical_pcs",
    "logrank_z",
    "cox_score_z",
]

DEFAULT_BATCH = 8192
PCS_BATCH = 65536


# ---------------------------------------------------------------------------
# configuration and result containers


@dataclass(frozen=True)
class TteSettings:
    """Survival block: hazard, copula strength, accrual and censoring times."""

    lambda0: float
    rho_c: float
    t_entry: float
    t_admin: float
    tau: float
    control_n: int | None = None
    alpha: float = 0.025

    def __post_init__(self):
        if self.lambda0 <= 0:
            raise ValueError("lambda0 must be positive")
        if not (-1 < self.rho_c < 1):
            raise ValueError(f"rho_c must lie in (-1, 1), got {self.rho_c}")
        if self.t_entry <= 0:
            raise ValueError("t_entry must be positive")
        if self.t_admin - self.t_entry < self.tau:
            raise ValueError(
                f"t_admin - t_entry = {self.t_admin - self.t_entry} must be >= tau = "
                f"{self.tau} so every patient has an evaluable landmark")


@dataclass(frozen=True)
class SimConfig:
    """Full specification of one simulated scenario."""

    p_l: float
    q_l: float
    p_h: float
    q_h: float
    phi: float
    utilities: UtilitySpec
    n1: int
    n2: int
    replications: int
    seed: int
    lambda_u: float = 0.0
    p0: float | None = None          # enables the binary confirmatory tests
    alpha: float = 0.025
    tte: TteSettings | None = None   # enables the survival confirmatory tests
    plugin_protocol: str = "selected"  # Stage-1 moments from 'selected' or 'pooled' arms
    scenario_id: str = ""
    batch_size: int = DEFAULT_BATCH

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.n1 < 1 or self.n2 < 0:
            raise ValueError(f"need n1 >= 1 and n2 >= 0, got n1={self.n1}, n2={self.n2}")
        if self.plugin_protocol not in ("selected", "pooled"):
            raise ValueError(f"plugin_protocol must be 'selected' or 'pooled', "
                             f"got {self.plugin_protocol!r}")
        if not self.scenario_id:
            object.__setattr__(self, "scenario_id", self._default_id())

    def _default_id(self) -> str:
        parts = (self.p_l, self.q_l, self.p_h, self.q_h, self.phi, self.lambda_u,
                 self.n1, self.n2, self.p0, self.utilities.scores)
        return "sc" + hashlib.sha256(repr(parts).encode()).hexdigest()[:12]


@dataclass(frozen=True)
class PatientRecord:
    x: int
    y: int
    u: float
    t: float | None = None
    enroll: float | None = None
    v: float | None = None
    event: int | None = None


@dataclass(frozen=True)
class SelectionResult:
    selected: str                 # 'L' or 'H'
    mean_u_l: float
    mean_u_h: float
    p_hat: float                  # selected-arm response rate
    sigma_u: float                # Stage-1 utility SD per the plugin protocol
    cov_xu: float
    cov_su: float | None = None   # Cov(1{T > tau}, U)
    cov_vu: float | None = None   # Cov(observed time, U), censoring naive
    d_events: int | None = None   # Stage-1 events among the protocol arms


@dataclass(frozen=True)
class TestDecisions:
    z_reject: bool | None = None
    binom_reject: bool | None = None
    landmark_reject: bool | None = None
    exp_reject: bool | None = None
    logrank_reject: bool | None = None
    cox_reject: bool | None = None
    exp_indeterminate: bool = False
    statistics: dict = field(default_factory=dict)


@dataclass(frozen=True)
class BinaryResults:
    observed_bias: float
    est_bias: float
    est_max_bias: float
    z_obs: float
    z_est: float
    z_est_max: float
    binom_obs: float
    binom_est: float
    binom_est_max: float
    binom_critical: int
    mc_se: dict


@dataclass(frozen=True)
class TteResults:
    landmark_obs: float
    landmark_est: float
    exp_obs: float
    exp_est: float
    logrank_obs: float
    cox_obs: float
    wald_est: float               # shared plugin for the log-rank and Cox score tests
    rho_tx: float
    exp_indeterminate: int
    mc_se: dict


@dataclass(frozen=True)
class ScenarioSummary:
    scenario_id: str
    replications: int
    select_h_rate: float
    phi_hat: float
    binary: BinaryResults | None = None
    tte: TteResults | None = None


# ---------------------------------------------------------------------------
# deterministic parallel batching


def _stream(seed: int, scenario_id: str, batch_index: int) -> np.random.Generator:
    digest = hashlib.sha256(f"{seed}|{scenario_id}|{batch_index}".encode()).digest()
    return np.random.Generator(np.random.Philox(key=int.from_bytes(digest[:16], "little")))


def _run_batches(replications: int, batch_size: int, workers: int, batch_fn):
    """Run batch_fn(batch_index, size) over all batches; sum results in index order."""
    sizes = []
    left = replications
    while left > 0:
        sizes.append(min(batch_size, left))
        left -= batch_size
    if workers <= 1:
        parts = [batch_fn(i, m) for i, m in enumerate(sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(batch_fn, range(len(sizes)), sizes))
    total: dict = {}
    for part in parts:
        for key, val in part.items():
            total[key] = total.get(key, 0.0) + val
    return total


def _proportion_se(p: float, n: float) -> float:
    return math.sqrt(max(p * (1 - p), 0.0) / n) if n > 0 else float("nan")


# ---------------------------------------------------------------------------
# vectorized generation helpers (arrays are (reps, patients))


def _lattice_scores(u: UtilitySpec) -> tuple[np.ndarray, int]:
    lat = rationalize_utilities(u)
    return np.array(lat.scores, dtype=np.int64), lat.scale


def _draw_joint_patients(rng, m: int, n: int, p: float, q: float, phi: float,
                         rho_c: float, lambda0: float):
    """Copula draw of (x, y, t) arrays for one arm."""
    model = joint_probs(p, q, phi)
    py1 = model.pi[0] / p
    py0 = model.pi[2] / (1 - p)
    z1 = rng.standard_normal((m, n))
    z2 = rho_c * z1 + math.sqrt(1.0 - rho_c ** 2) * rng.standard_normal((m, n))
    x = ndtr(z1) <= p
    t = -np.log(np.clip(ndtr(z2), 1e-300, 1.0)) / lambda0
    uy = rng.random((m, n))
    y = np.where(x, uy <= py1, uy <= py0)
    return x, y, t


def _censor(rng, m: int, n: int, t: np.ndarray, tte: TteSettings):
    enroll = rng.random((m, n)) * tte.t_entry
    horizon = tte.t_admin - enroll
    v = np.minimum(t, horizon)
    event = t <= horizon
    return enroll, v, event


def _score_matrix(x: np.ndarray, y: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Integer lattice utility per patient from the (x, y) outcome."""
    idx = np.where(x, np.where(y, 0, 1), np.where(y, 2, 3))
    return scores[idx]


# ---------------------------------------------------------------------------
# survival test statistics


def _two_sample_core(times: np.ndarray, events: np.ndarray, n_trt: int):
    """Sorted-risk-set score and information for tie-free (reps, N) data.

    score = sum over events of (group - at-risk treatment fraction); info =
    sum of f(1-f).  For continuous (tie-free) times the log-rank numerator
    and variance and the Cox partial score and Breslow information at
    beta = 0 all coincide with these quantities.
    """
    m, n_all = times.shape
    order = np.argsort(times, axis=1)
    e_s = np.take_along_axis(events, order, axis=1)
    grp = np.zeros(n_all)
    grp[:n_trt] = 1.0
    g_s = grp[order]
    at_risk = n_all - np.arange(n_all)
    trt_at_risk = n_trt - (np.cumsum(g_s, axis=1) - g_s)
    f = trt_at_risk / at_risk
    score = np.sum(e_s * (g_s - f), axis=1)
    info = np.sum(e_s * f * (1.0 - f), axis=1)
    return score, info


def _one_sided_z(score: np.ndarray, info: np.ndarray) -> np.ndarray:
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(info > 0, score / np.sqrt(np.where(info > 0, info, 1.0)), 0.0)


def logrank_z(times, events, group) -> float:
    """Two-sample log-rank Z (no continuity correction), upper tail favors group 1.

    Ties are handled with the hypergeometric variance factor (n-d)/(n-1);
    event times with a single subject at risk contribute nothing.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    group = np.asarray(group, dtype=int)
    score = 0.0
    var = 0.0
    for t in np.unique(times[events]):
        at = times >= t
        n_at = int(at.sum())
        if n_at < 2:
            continue
        n1 = int((at & (group == 1)).sum())
        here = events & (times == t)
        d = int(here.sum())
        d1 = int((here & (group == 1)).sum())
        f = n1 / n_at
        score += d1 - d * f
        var += d * f * (1 - f) * (n_at - d) / (n_at - 1)
    return score / math.sqrt(var) if var > 0 else 0.0


def cox_score_z(times, events, group) -> float:
    """Cox partial-likelihood score test at beta = 0 with Breslow tie handling."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=bool)
    group = np.asarray(group, dtype=int)
    score = 0.0
    info = 0.0
    for t in np.unique(times[events]):
        at = times >= t
        n_at = int(at.sum())
        n1 = int((at & (group == 1)).sum())
        here = events & (times == t)
        d = int(here.sum())
        d1 = int((here & (group == 1)).sum())
        f = n1 / n_at
        score += d1 - d * f
        info += d * f * (1 - f)
    return score / math.sqrt(info) if info > 0 else 0.0


# ---------------------------------------------------------------------------
# record-level operations


def gen_arm(n: int, p: float, q: float, phi: float, utilities: UtilitySpec,
            rng: np.random.Generator, rho_c: float = 0.0,
            lambda0: float | None = None, t_entry: float | None = None,
            t_admin: float | None = None) -> list[PatientRecord]:
    """Simulate one arm of n patients; survival fields appear when lambda0 is given."""
    if n < 1:
        raise ValueError("n must be >= 1")
    scores = utilities.scores
    if lambda0 is None:
        model = joint_probs(p, q, phi)
        z1 = rng.standard_normal(n)
        x = ndtr(z1) <= p
        uy = rng.random(n)
        y = np.where(x, uy <= model.pi[0] / p, uy <= model.pi[2] / (1 - p))
        return [PatientRecord(x=int(xi), y=int(yi), u=scores[_cat(xi, yi)])
                for xi, yi in zip(x, y)]
    if t_entry is None or t_admin is None:
        raise ValueError("t_entry and t_admin are required with lambda0")
    model = joint_probs(p, q, phi)
    py1 = model.pi[0] / p
    py0 = model.pi[2] / (1 - p)
    z1 = rng.standard_normal(n)
    z2 = rho_c * z1 + math.sqrt(1 - rho_c ** 2) * rng.standard_normal(n)
    x = ndtr(z1) <= p
    t = -np.log(np.clip(ndtr(z2), 1e-300, 1.0)) / lambda0
    uy = rng.random(n)
    y = np.where(x, uy <= py1, uy <= py0)
    enroll = rng.random(n) * t_entry
    horizon = t_admin - enroll
    v = np.minimum(t, horizon)
    event = t <= horizon
    return [PatientRecord(x=int(xi), y=int(yi), u=scores[_cat(xi, yi)],
                          t=float(ti), enroll=float(ei), v=float(vi), event=int(di))
            for xi, yi, ti, ei, vi, di in zip(x, y, t, enroll, v, event)]


def _cat(x, y) -> int:
    return 0 if (x and y) else 1 if x else 2 if y else 3


def run_selection(arm_l: list[PatientRecord], arm_h: list[PatientRecord],
                  lambda_u: float = 0.0, tau: float | None = None,
                  protocol: str = "selected") -> SelectionResult:
    """Apply the strict threshold rule and compute Stage-1 plugin inputs.

    Dose H is selected only when mean(U_H) - mean(U_L) strictly exceeds
    lambda_u; exact ties keep Dose L.  Moment estimates follow ``protocol``:
    the selected arm alone (default) or both arms pooled.
    """
    if len(arm_l) != len(arm_h) or not arm_l:
        raise ValueError("arms must be nonempty and of equal size")
    if protocol not in ("selected", "pooled"):
        raise ValueError(f"protocol must be 'selected' or 'pooled', got {protocol!r}")
    n = len(arm_l)
    sum_l = math.fsum(r.u for r in arm_l)
    sum_h = math.fsum(r.u for r in arm_h)
    select_h = (sum_h - sum_l) > n * lambda_u
    chosen = arm_h if select_h else arm_l
    pool = chosen if protocol == "selected" else arm_l + arm_h
    u_vals = np.array([r.u for r in pool])
    x_vals = np.array([r.x for r in pool], dtype=float)
    mu = u_vals.mean()
    sigma_u = float(u_vals.std())
    cov_xu = float((x_vals * u_vals).mean() - x_vals.mean() * mu)
    cov_su = cov_vu = None
    d_events = None
    if pool[0].t is not None:
        if tau is not None:
            s_ind = np.array([_landmark_indicator(r, tau) for r in pool], dtype=float)
            cov_su = float((s_ind * u_vals).mean() - s_ind.mean() * mu)
        v_vals = np.array([r.v for r in pool])
        cov_vu = float((v_vals * u_vals).mean() - v_vals.mean() * mu)
        d_events = int(sum(r.event for r in pool))
    p_hat = float(np.mean([r.x for r in chosen]))
    return SelectionResult(selected="H" if select_h else "L",
                           mean_u_l=sum_l / n, mean_u_h=sum_h / n,
                           p_hat=p_hat, sigma_u=sigma_u, cov_xu=cov_xu,
                           cov_su=cov_su, cov_vu=cov_vu, d_events=d_events)


def _landmark_indicator(r: PatientRecord, tau: float) -> int:
    if r.event:
        return int(r.v > tau)
    if r.v < tau:
        raise ValueError("censored before the landmark time; indicator undetermined")
    return 1


def run_tests(selected: list[PatientRecord], control: list[PatientRecord],
              config: SimConfig) -> TestDecisions:
    """Confirmatory test decisions on the pooled selected arm (+ control).

    Binary Z and exact binomial tests run when ``config.p0`` is set; the four
    survival tests run when ``config.tte`` is set and the records carry
    survival fields.  An exponential test with zero events is flagged
    indeterminate rather than decided.
    """
    stats: dict = {}
    z_rej = binom_rej = None
    lm_rej = exp_rej = lr_rej = cox_rej = None
    exp_ind = False
    n_tot = len(selected)
    if config.p0 is not None:
        z_crit = norm.ppf(1 - config.alpha)
        responders = sum(r.x for r in selected)
        p_hat = responders / n_tot
        se0 = math.sqrt(config.p0 * (1 - config.p0) / n_tot)
        stats["z"] = (p_hat - config.p0) / se0
        z_rej = stats["z"] > z_crit
        k_c = binomial_critical(n_tot, config.p0, config.alpha)
        stats["binom_critical"] = k_c
        binom_rej = responders > k_c
    if config.tte is not None:
        tte = config.tte
        z_crit = norm.ppf(1 - tte.alpha)
        s0 = math.exp(-tte.lambda0 * tte.tau)
        s_mean = np.mean([_landmark_indicator(r, tte.tau) for r in selected])
        stats["landmark_z"] = (s_mean - s0) / math.sqrt(s0 * (1 - s0) / n_tot)
        lm_rej = stats["landmark_z"] > z_crit
        d = sum(r.event for r in selected)
        if d == 0:
            exp_ind = True
        else:
            lam_hat = d / math.fsum(r.v for r in selected)
            stats["exp_z"] = (math.log(lam_hat) - math.log(tte.lambda0)) * math.sqrt(d)
            exp_rej = stats["exp_z"] <= -z_crit
        times = [r.v for r in selected] + [r.v for r in control]
        events = [r.event for r in selected] + [r.event for r in control]
        group = [1] * len(selected) + [0] * len(control)
        stats["logrank_z"] = logrank_z(times, events, group)
        lr_rej = stats["logrank_z"] <= -z_crit
        stats["cox_z"] = cox_score_z(times, events, group)
        cox_rej = stats["cox_z"] <= -z_crit
    return TestDecisions(z_reject=z_rej, binom_reject=binom_rej,
                         landmark_reject=lm_rej, exp_reject=exp_rej,
                         logrank_reject=lr_rej, cox_reject=cox_rej,
                         exp_indeterminate=exp_ind, statistics=stats)


# ---------------------------------------------------------------------------
# vectorized study engine


def _phi_hat_from_counts(c: np.ndarray) -> np.ndarray:
    """Per-replication Pearson correlation from (reps, 4) outcome counts."""
    n11, n10, n01, n00 = c[:, 0], c[:, 1], c[:, 2], c[:, 3]
    n = n11 + n10 + n01 + n00
    num = n * n11 - (n11 + n10) * (n11 + n01)
    den = ((n11 + n10) * (n11 + n01) * (n10 + n00) * (n01 + n00)).astype(float)
    return np.where(den > 0, num / np.sqrt(np.where(den > 0, den, 1.0)), 0.0)


def _plugin_from_counts(counts: np.ndarray, u: np.ndarray, n_pat: int):
    """(mu, sigma, cov_xu) per replication from outcome counts of n_pat patients."""
    rel = counts / n_pat
    mu = rel @ u
    sigma = np.sqrt(np.maximum(rel @ (u * u) - mu * mu, 0.0))
    p_hat = rel[:, 0] + rel[:, 1]
    cov = u[0] * rel[:, 0] + u[1] * rel[:, 1] - p_hat * mu
    return mu, sigma, cov


def _binary_batch(cfg: SimConfig, batch_index: int, m: int) -> dict:
    rng = _stream(cfg.seed, cfg.scenario_id, batch_index)
    u = np.array(cfg.utilities.scores)
    scores, scale = _lattice_scores(cfg.utilities)
    pi_l = joint_probs(cfg.p_l, cfg.q_l, cfg.phi).pi
    pi_h = joint_probs(cfg.p_h, cfg.q_h, cfg.phi).pi
    n1, n2 = cfg.n1, cfg.n2
    n_tot = n1 + n2
    w1 = n1 / n_tot
    c_l = rng.multinomial(n1, pi_l, size=m)
    c_h = rng.multinomial(n1, pi_h, size=m)
    sel = (c_h @ scores) - (c_l @ scores) > n1 * scale * cfg.lambda_u
    c_sel = np.where(sel[:, None], c_h, c_l)
    resp1 = c_sel[:, 0] + c_sel[:, 1]

    out: dict = {"n": float(m), "select_h": float(sel.sum())}
    plug_counts = c_sel if cfg.plugin_protocol == "selected" else c_l + c_h
    plug_n = n1 if cfg.plugin_protocol == "selected" else 2 * n1
    _, sigma, cov = _plugin_from_counts(plug_counts, u, plug_n)
    out["phi_hat"] = float(_phi_hat_from_counts(plug_counts).sum())
    sd_safe = np.where(sigma > 0, sigma, 1.0)
    k_exp = np.where(sigma > 0,
                     np.exp(-cfg.lambda_u ** 2 * n1 / (4 * sd_safe ** 2)), 0.0)
    bias1 = np.where(sigma > 0, cov / (sd_safe * math.sqrt(n1)) / SQRT_PI * k_exp, 0.0)
    p_hat1 = resp1 / n1
    bias1_max = np.sqrt(p_hat1 * (1 - p_hat1)) / math.sqrt(n1 * math.pi)
    if cfg.lambda_u > 0:
        bias1_max = bias1_max * k_exp

    if cfg.p0 is None:
        return out
    p0 = cfg.p0
    z_crit = norm.ppf(1 - cfg.alpha)
    se0 = math.sqrt(p0 * (1 - p0) / n_tot)
    k_c = binomial_critical(n_tot, p0, cfg.alpha)
    if n2 > 0:
        resp2 = rng.binomial(n2, np.where(sel, cfg.p_h, cfg.p_l))
    else:
        resp2 = np.zeros(m, dtype=np.int64)
    total = resp1 + resp2
    p_comb = total / n_tot
    dev = p_comb - np.where(sel, cfg.p_h, cfg.p_l)
    est = w1 * bias1
    est_max = w1 * bias1_max
    z_est = 1.0 - ndtr(z_crit - est / se0)
    z_est_max = 1.0 - ndtr(z_crit - est_max / se0)
    b_est = binom.sf(k_c, n_tot, np.clip(p0 + est, 1e-12, 1 - 1e-12))
    b_est_max = binom.sf(k_c, n_tot, np.clip(p0 + est_max, 1e-12, 1 - 1e-12))
    out.update({
        "bias_sum": float(dev.sum()), "bias_sq": float((dev ** 2).sum()),
        "est_sum": float(est.sum()), "est_sq": float((est ** 2).sum()),
        "estmax_sum": float(est_max.sum()), "estmax_sq": float((est_max ** 2).sum()),
        "z_rej": float(((p_comb - p0) / se0 > z_crit).sum()),
        "b_rej": float((total > k_c).sum()),
        "zest_sum": float(z_est.sum()),
        "zestmax_sum": float(z_est_max.sum()),
        "best_sum": float(b_est.sum()),
        "bestmax_sum": float(b_est_max.sum()),
    })
    return out


def _tte_batch(cfg: SimConfig, batch_index: int, m: int) -> dict:
    rng = _stream(cfg.seed, cfg.scenario_id, batch_index)
    tte = cfg.tte
    scores, scale = _lattice_scores(cfg.utilities)
    n1, n2 = cfg.n1, cfg.n2
    n_tot = n1 + n2
    n_ctrl = tte.control_n if tte.control_n is not None else n_tot
    w1 = n1 / n_tot
    z_crit = norm.ppf(1 - tte.alpha)
    s0 = math.exp(-tte.lambda0 * tte.tau)
    se0 = math.sqrt(s0 * (1 - s0) / n_tot)

    x_l, y_l, t_l = _draw_joint_patients(rng, m, n1, cfg.p_l, cfg.q_l, cfg.phi,
                                         tte.rho_c, tte.lambda0)
    x_h, y_h, t_h = _draw_joint_patients(rng, m, n1, cfg.p_h, cfg.q_h, cfg.phi,
                                         tte.rho_c, tte.lambda0)
    _, v_l, e_l = _censor(rng, m, n1, t_l, tte)
    _, v_h, e_h = _censor(rng, m, n1, t_h, tte)
    us_l = _score_matrix(x_l, y_l, scores)
    us_h = _score_matrix(x_h, y_h, scores)
    sel = us_h.sum(axis=1) - us_l.sum(axis=1) > n1 * scale * cfg.lambda_u
    seln = sel[:, None]
    t1 = np.where(seln, t_h, t_l)
    v1 = np.where(seln, v_h, v_l)
    e1 = np.where(seln, e_h, e_l)

    out: dict = {"n": float(m), "select_h": float(sel.sum())}
    # realized response-survival correlation, pooled over all Stage-1 patients
    out["rtx_t"] = float(t_l.sum() + t_h.sum())
    out["rtx_t2"] = float((t_l * t_l).sum() + (t_h * t_h).sum())
    out["rtx_tx"] = float((t_l * x_l).sum() + (t_h * x_h).sum())
    out["rtx_x"] = float(x_l.sum() + x_h.sum())
    out["rtx_n"] = float(x_l.size + x_h.size)

    t2 = rng.exponential(1.0 / tte.lambda0, (m, n2))
    _, v2, e2 = _censor(rng, m, n2, t2, tte)
    t_c = rng.exponential(1.0 / tte.lambda0, (m, n_ctrl))
    _, v_c, e_c = _censor(rng, m, n_ctrl, t_c, tte)

    # landmark Z on the pooled selected arm (the latent indicator equals the
    # censoring-safe observed one because follow-up is at least tau)
    s_pool = ((t1 > tte.tau).sum(axis=1) + (t2 > tte.tau).sum(axis=1)) / n_tot
    out["lm_rej"] = float(((s_pool - s0) / se0 > z_crit).sum())

    d_sel = e1.sum(axis=1) + e2.sum(axis=1)
    sum_v = v1.sum(axis=1) + v2.sum(axis=1)
    has_events = d_sel > 0
    lam_hat = np.where(has_events, d_sel / np.where(sum_v > 0, sum_v, 1.0), 1.0)
    z_exp = (np.log(lam_hat) - math.log(tte.lambda0)) * np.sqrt(d_sel)
    out["exp_rej"] = float((has_events & (z_exp <= -z_crit)).sum())
    out["exp_ind"] = float((~has_events).sum())

    times = np.concatenate([v1, v2, v_c], axis=1)
    events = np.concatenate([e1, e2, e_c], axis=1).astype(float)
    score, info = _two_sample_core(times, events, n_tot)
    z_two = _one_sided_z(score, info)
    # continuous times are tie-free, so the log-rank and Cox score statistics
    # coincide; both columns are reported from the shared statistic
    rej_two = float((z_two <= -z_crit).sum())
    out["lr_rej"] = rej_two
    out["cox_rej"] = rej_two
    d_total = d_sel + e_c.sum(axis=1)

    # Stage-1 plugin inputs per the protocol
    if cfg.plugin_protocol == "selected":
        u_p = np.where(seln, us_h, us_l) / scale
        t_p, v_p = t1, v1
        c_plug = _counts_from_xy(np.where(seln, x_h, x_l), np.where(seln, y_h, y_l))
    else:
        u_p = np.concatenate([us_l, us_h], axis=1) / scale
        t_p = np.concatenate([t_l, t_h], axis=1)
        v_p = np.concatenate([v_l, v_h], axis=1)
        c_plug = _counts_from_xy(x_l, y_l) + _counts_from_xy(x_h, y_h)
    mu_p = u_p.mean(axis=1)
    sd_p = u_p.std(axis=1)
    s_ind = (t_p > tte.tau).astype(float)
    cov_su = (s_ind * u_p).mean(axis=1) - s_ind.mean(axis=1) * mu_p
    cov_vu = (v_p * u_p).mean(axis=1) - v_p.mean(axis=1) * mu_p
    good = sd_p > 0
    sd_safe = np.where(good, sd_p, 1.0)
    k_exp = np.where(good, np.exp(-cfg.lambda_u ** 2 * n1 / (4 * sd_safe ** 2)), 0.0)
    lm_bias = np.where(good, cov_su / (sd_safe * math.sqrt(n1)) / SQRT_PI * k_exp, 0.0)
    b_time = np.where(good, cov_vu / (sd_safe * math.sqrt(n1)) / SQRT_PI * k_exp, 0.0)
    out["lm_est"] = float((1.0 - ndtr(z_crit - w1 * lm_bias / se0)).sum())
    out["exp_est"] = float(ndtr(-z_crit + tte.lambda0 * w1 * b_time * np.sqrt(d_sel)).sum())
    out["wald_est"] = float(ndtr(-z_crit + tte.lambda0 * w1 * b_time
                                 * np.sqrt(d_total / 4.0)).sum())
    out["phi_hat"] = float(_phi_hat_from_counts(c_plug).sum())
    return out


def _counts_from_xy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    c11 = (x & y).sum(axis=1)
    c10 = (x & ~y).sum(axis=1)
    c01 = (~x & y).sum(axis=1)
    c00 = (~x & ~y).sum(axis=1)
    return np.stack([c11, c10, c01, c00], axis=1)


def run_study(config: SimConfig, workers: int = 1) -> ScenarioSummary:
    """Aggregate all replications of one scenario into a ScenarioSummary.

    Deterministic for a given (config, seed) regardless of ``workers``.
    """
    if config.tte is not None:
        totals = _run_batches(config.replications, config.batch_size, workers,
                              lambda i, m: _tte_batch(config, i, m))
    else:
        totals = _run_batches(config.replications, config.batch_size, workers,
                              lambda i, m: _binary_batch(config, i, m))
    r = totals["n"]
    summary = dict(
        scenario_id=config.scenario_id,
        replications=int(r),
        select_h_rate=totals["select_h"] / r,
        phi_hat=totals.get("phi_hat", 0.0) / r,
    )
    if config.tte is not None:
        r_exp = max(r - totals["exp_ind"], 1.0)
        mc_se = {
            "landmark_obs": _proportion_se(totals["lm_rej"] / r, r),
            "exp_obs": _proportion_se(totals["exp_rej"] / r_exp, r_exp),
            "logrank_obs": _proportion_se(totals["lr_rej"] / r, r),
            "cox_obs": _proportion_se(totals["cox_rej"] / r, r),
        }
        n_pat = totals["rtx_n"]
        mean_t = totals["rtx_t"] / n_pat
        mean_x = totals["rtx_x"] / n_pat
        var_t = totals["rtx_t2"] / n_pat - mean_t ** 2
        cov_tx = totals["rtx_tx"] / n_pat - mean_t * mean_x
        rho_tx = cov_tx / math.sqrt(var_t * mean_x * (1 - mean_x))
        summary["tte"] = TteResults(
            landmark_obs=totals["lm_rej"] / r,
            landmark_est=totals["lm_est"] / r,
            exp_obs=totals["exp_rej"] / r_exp,
            exp_est=totals["exp_est"] / r,
            logrank_obs=totals["lr_rej"] / r,
            cox_obs=totals["cox_rej"] / r,
            wald_est=totals["wald_est"] / r,
            rho_tx=rho_tx,
            exp_indeterminate=int(totals["exp_ind"]),
            mc_se=mc_se,
        )
    elif config.p0 is not None:
        mean_bias = totals["bias_sum"] / r
        mc_se = {
            "observed_bias": math.sqrt(max(totals["bias_sq"] / r - mean_bias ** 2, 0.0) / r),
            "est_bias": math.sqrt(max(totals["est_sq"] / r
                                      - (totals["est_sum"] / r) ** 2, 0.0) / r),
            "est_max_bias": math.sqrt(max(totals["estmax_sq"] / r
                                          - (totals["estmax_sum"] / r) ** 2, 0.0) / r),
            "z_obs": _proportion_se(totals["z_rej"] / r, r),
            "binom_obs": _proportion_se(totals["b_rej"] / r, r),
        }
        summary["binary"] = BinaryResults(
            observed_bias=mean_bias,
            est_bias=totals["est_sum"] / r,
            est_max_bias=totals["estmax_sum"] / r,
            z_obs=totals["z_rej"] / r,
            z_est=totals["zest_sum"] / r,
            z_est_max=totals["zestmax_sum"] / r,
            binom_obs=totals["b_rej"] / r,
            binom_est=totals["best_sum"] / r,
            binom_est_max=totals["bestmax_sum"] / r,
            binom_critical=binomial_critical(config.n1 + config.n2, config.p0, config.alpha),
            mc_se=mc_se,
        )
    return ScenarioSummary(**summary)


def empirical_pcs(scenario: DesignScenario, n: int, lambda_u: float,
                  replications: int, seed: int, workers: int = 1,
                  batch_size: int = PCS_BATCH) -> tuple[float, float]:
    """Simulated probabilities of correct selection at a given design.

    Both sizing scenarios are simulated with the strict threshold rule;
    returns (PCS_L, PCS_H).
    """
    scores, scale = _lattice_scores(scenario.utilities)
    tau = n * scale * lambda_u

    def one(tag: str, pi_lo, pi_hi) -> float:
        sid = (f"pcs|{tag}|{n}|{lambda_u!r}|{scenario.p}|{scenario.q}|"
               f"{scenario.delta}|{scenario.d}|{scenario.phi}")

        def batch(i: int, m: int) -> dict:
            rng = _stream(seed, sid, i)
            s_lo = rng.multinomial(n, pi_lo, size=m) @ scores
            s_hi = rng.multinomial(n, pi_hi, size=m) @ scores
            return {"h": float((s_hi - s_lo > tau).sum()), "n": float(m)}

        tot = _run_batches(replications, batch_size, workers, batch)
        return tot["h"] / tot["n"]

    l_lo, l_hi = scenario.arm_models("S_L")
    h_lo, h_hi = scenario.arm_models("S_H")
    pcs_l = 1.0 - one("SL", l_lo.pi, l_hi.pi)
    pcs_h = one("SH", h_lo.pi, h_hi.pi)
    return pcs_l, pcs_h
