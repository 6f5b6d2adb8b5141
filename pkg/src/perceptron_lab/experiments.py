"""Desk-scale experiments: threshold scans, concentration, universality,
slow-decrease, and truncation-gap measurements.

A model here is a (DisorderSpec, Activation) pair; constraint counts are
derived as M = round(N alpha) with half-up rounding and recorded in every
report. All routines are deterministic given their SeededStream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .activation import Activation, decay_rate
from .disorder import DisorderSpec, format_disorder
from .errors import ConditioningEmptyError
from .formulas import truncated_log
from .partition import Instance, count_exact, exists_solution, make_instance, soft_log_partition, violation_profile
from .streams import SeededStream
from .verify import wilson_interval

__all__ = [
    "ThresholdCurve",
    "ConcentrationReport",
    "UniversalityReport",
    "ConditionalEstimate",
    "TempGapReport",
    "m_from_alpha",
    "first_moment_alpha",
    "threshold_scan",
    "concentration_scan",
    "universality_compare",
    "slow_decrease",
    "temp_truncation_gap",
]

_BOOTSTRAP_RESAMPLES = 200
_TOPUP_FACTOR = 20


def m_from_alpha(n: int, alpha: float) -> int:
    """M = round(N alpha), half-up."""
    if alpha < 0.0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    return int(math.floor(n * alpha + 0.5))


def first_moment_alpha(u: Activation) -> float:
    """Annealed threshold bound alpha_1 = log 2 / (-log E U(g))."""
    return math.log(2.0) / decay_rate(u)


@dataclass(frozen=True)
class ThresholdCurve:
    alpha_grid: tuple[float, ...]
    m_grid: tuple[int, ...]
    p_solvable: tuple[float, ...]
    intervals: tuple[tuple[float, float], ...]
    replicates: int
    n: int
    alpha_hat: float | None
    width_10_90: float | None
    alpha_hat_ci: tuple[float, float] | None
    width_ci: tuple[float, float] | None

    def __post_init__(self) -> None:
        for alpha, m, p in zip(self.alpha_grid, self.m_grid, self.p_solvable):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"p_solvable {p} outside [0,1]")
            if m == 0 and p != 1.0:
                raise ValueError(f"M=0 at alpha={alpha} must be certainly solvable, got {p}")
        if self.alpha_hat is not None:
            lo, hi = min(self.alpha_grid), max(self.alpha_grid)
            if not lo <= self.alpha_hat <= hi:
                raise ValueError(f"alpha_hat {self.alpha_hat} outside the grid [{lo}, {hi}]")


def _logistic_nll(params: np.ndarray, alphas: np.ndarray, k: np.ndarray, reps: int) -> float:
    a, log_b = params
    b = math.exp(min(log_b, 50.0))
    from scipy.special import expit

    p = np.clip(expit((a - alphas) / b), 1e-12, 1.0 - 1e-12)
    return float(-(k * np.log(p) + (reps - k) * np.log(1.0 - p)).sum())


def _fit_logistic(alphas: np.ndarray, k: np.ndarray, reps: int) -> tuple[float, float] | None:
    """(alpha_hat, width_10_90) by decreasing-logistic MLE, or None without a crossing."""
    p_hat = k / reps
    if p_hat.max() < 0.5 or p_hat.min() > 0.5:
        return None
    from scipy.optimize import minimize

    above = np.where(p_hat >= 0.5)[0]
    a0 = float(alphas[above[-1]]) if above.size else float(alphas[0])
    span = float(alphas.max() - alphas.min()) or 1.0
    best = None
    for b0 in (span / 8.0, span / 2.0):
        res = minimize(
            _logistic_nll,
            np.array([a0, math.log(b0)]),
            args=(alphas, k, reps),
            method="Nelder-Mead",
            options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 2000},
        )
        if best is None or res.fun < best.fun:
            best = res
    a, log_b = best.x
    width = 2.0 * math.exp(log_b) * math.log(9.0)
    if not alphas.min() <= a <= alphas.max():
        return None
    return float(a), float(width)


def threshold_scan(
    model: tuple[DisorderSpec, Activation],
    n: int,
    alpha_grid,
    replicates: int,
    stream: SeededStream,
) -> ThresholdCurve:
    """P(Z > 0) along an alpha grid, with a logistic-MLE threshold location.

    alpha_hat is the fitted 0.5-crossing and width_10_90 the alpha-width of the
    [0.1, 0.9] band; both carry percentile CIs from 200 parametric bootstrap
    refits and are None when the empirical curve never crosses 0.5.
    """
    spec, act = model
    alpha_grid = tuple(float(a) for a in alpha_grid)
    if replicates < 100:
        raise ValueError(f"threshold_scan needs replicates >= 100, got {replicates}")
    if not alpha_grid:
        raise ValueError("alpha_grid must be nonempty")
    m_grid = tuple(m_from_alpha(n, a) for a in alpha_grid)
    counts = []
    for i, m in enumerate(m_grid):
        hits = 0
        for r in range(replicates):
            inst = make_instance(spec, act, n, m, stream.child(i, r))
            hits += bool(exists_solution(inst))
        counts.append(hits)
    k = np.array(counts, dtype=np.float64)
    alphas = np.array(alpha_grid)
    p_solvable = tuple(c / replicates for c in counts)
    intervals = tuple(wilson_interval(c, replicates) for c in counts)

    fit = _fit_logistic(alphas, k, replicates)
    alpha_hat = width = alpha_ci = width_ci = None
    if fit is not None:
        alpha_hat, width = fit
        rng = stream.child(len(alpha_grid), 0).generator()
        boots_a, boots_w = [], []
        for _ in range(_BOOTSTRAP_RESAMPLES):
            k_star = rng.binomial(replicates, k / replicates).astype(np.float64)
            refit = _fit_logistic(alphas, k_star, replicates)
            if refit is not None:
                boots_a.append(refit[0])
                boots_w.append(refit[1])
        if len(boots_a) >= _BOOTSTRAP_RESAMPLES // 2:
            alpha_ci = tuple(float(q) for q in np.percentile(boots_a, [2.5, 97.5]))
            width_ci = tuple(float(q) for q in np.percentile(boots_w, [2.5, 97.5]))
    return ThresholdCurve(
        alpha_grid, m_grid, p_solvable, intervals, replicates, n, alpha_hat, width, alpha_ci, width_ci
    )


@dataclass(frozen=True)
class ConcentrationReport:
    n_list: tuple[int, ...]
    m_list: tuple[int, ...]
    means: tuple[float, ...]
    stds: tuple[float, ...]
    replicates: int
    alpha: float
    delta: float

    def __post_init__(self) -> None:
        if self.replicates < 50:
            raise ValueError(f"concentration reports need replicates >= 50, got {self.replicates}")
        if any(s < 0.0 for s in self.stds):
            raise ValueError(f"negative std in {self.stds}")


def concentration_scan(
    model: tuple[DisorderSpec, Activation],
    n_list,
    alpha: float,
    delta: float,
    replicates: int,
    stream: SeededStream,
) -> ConcentrationReport:
    """Mean and std of the truncated free energy density across dimensions."""
    spec, act = model
    n_list = tuple(int(n) for n in n_list)
    means, stds, m_list = [], [], []
    for n in n_list:
        m = m_from_alpha(n, alpha)
        m_list.append(m)
        vals = np.empty(replicates)
        for r in range(replicates):
            inst = make_instance(spec, act, n, m, stream.child(n, r))
            vals[r] = count_exact(inst, delta).log_trunc / n
        means.append(float(vals.mean()))
        stds.append(float(vals.std(ddof=1)) if replicates > 1 else 0.0)
    return ConcentrationReport(n_list, tuple(m_list), tuple(means), tuple(stds), replicates, alpha, delta)


@dataclass(frozen=True)
class UniversalityReport:
    spec_names: tuple[str, ...]
    means: tuple[float, ...]
    ses: tuple[float, ...]
    pairs: tuple[tuple[int, int, float, float], ...]  # (i, j, |diff|, margin)
    n: int
    m: int
    alpha: float
    delta: float
    replicates: int
    slack: float


def universality_compare(
    model: Activation,
    specs,
    n: int,
    alpha: float,
    delta: float,
    replicates: int,
    stream: SeededStream,
    slack: float = 0.5,
) -> UniversalityReport:
    """Mean truncated free energy density per disorder family, with pairwise
    |difference| against the margin 3*(combined SE) + slack/sqrt(n)."""
    specs = tuple(specs)
    if len(specs) < 2:
        raise ValueError(f"universality_compare needs >= 2 disorder specs, got {len(specs)}")
    m = m_from_alpha(n, alpha)
    means, ses = [], []
    for s_idx, spec in enumerate(specs):
        vals = np.empty(replicates)
        for r in range(replicates):
            inst = make_instance(spec, model, n, m, stream.child(s_idx, r))
            vals[r] = count_exact(inst, delta).log_trunc / n
        means.append(float(vals.mean()))
        ses.append(float(vals.std(ddof=1) / math.sqrt(replicates)) if replicates > 1 else 0.0)
    pairs = []
    for i in range(len(specs)):
        for j in range(i + 1, len(specs)):
            diff = abs(means[i] - means[j])
            margin = 3.0 * math.hypot(ses[i], ses[j]) + slack / math.sqrt(n)
            pairs.append((i, j, diff, margin))
    names = tuple(format_disorder(s) for s in specs)
    return UniversalityReport(
        names, tuple(means), tuple(ses), tuple(pairs), n, m, alpha, delta, replicates, slack
    )


@dataclass(frozen=True)
class ConditionalEstimate:
    p_hat: float
    interval: tuple[float, float]
    accepted: int
    attempts: int
    m: int
    m_extra: int


def slow_decrease(
    model: tuple[DisorderSpec, Activation],
    n: int,
    m: int,
    rho: float,
    delta: float,
    replicates: int,
    stream: SeededStream,
) -> ConditionalEstimate:
    """P(Z_{M + N rho} < e^{N delta} | Z_M >= e^{2 N delta}) by nested coupling.

    Each replicate draws M + round(N rho) disorder rows once; the conditioning
    and the event reuse the same first M rows, so monotonicity Z_{M+k} <= Z_M
    is exact per replicate. Replicates are topped up (bounded 20x) to keep the
    conditional sample at the requested size.
    """
    spec, act = model
    m_extra = m_from_alpha(n, rho)
    cond_level = math.exp(2.0 * n * delta)
    event_level = math.exp(n * delta)
    hits = 0
    accepted = 0
    attempts = 0
    max_attempts = _TOPUP_FACTOR * replicates
    while accepted < replicates and attempts < max_attempts:
        xi = make_instance(spec, act, n, m + m_extra, stream.child(attempts)).xi
        attempts += 1
        base = Instance(n, m, act, xi[:m], spec=spec)
        if count_exact(base, delta).z < cond_level:
            continue
        accepted += 1
        full = Instance(n, m + m_extra, act, xi, spec=spec)
        hits += count_exact(full, delta).z < event_level
    if accepted == 0:
        raise ConditioningEmptyError(
            f"conditioning event Z >= exp(2*{n}*{delta}) empty after {attempts} attempts"
        )
    p_hat = hits / accepted
    return ConditionalEstimate(p_hat, wilson_interval(hits, accepted), accepted, attempts, m, m_extra)


@dataclass(frozen=True, eq=False)
class TempGapReport:
    a_list: tuple[float, ...]
    mean_gaps: tuple[float, ...]
    gaps: np.ndarray  # replicates x len(a_list), for per-replicate shape checks
    n: int
    m: int
    alpha: float
    delta: float
    replicates: int


def temp_truncation_gap(
    model: tuple[DisorderSpec, Activation],
    n: int,
    alpha: float,
    a_list,
    delta: float,
    replicates: int,
    stream: SeededStream,
) -> TempGapReport:
    """Per-A mean of the truncated soft-vs-hard free energy gap.

    One violation histogram per replicate serves every A, so the per-replicate
    gap is exactly nonincreasing in A (the soft partition function decreases
    toward Z as A grows)."""
    spec, act = model
    a_list = tuple(float(a) for a in a_list)
    if any(a <= 0.0 for a in a_list):
        raise ValueError(f"truncation levels must be positive, got {a_list}")
    m = m_from_alpha(n, alpha)
    gaps = np.empty((replicates, len(a_list)))
    for r in range(replicates):
        inst = make_instance(spec, act, n, m, stream.child(r))
        hist = violation_profile(inst)
        z = int(hist[0])
        log_hard = truncated_log(math.log(z) if z > 0 else -math.inf, n, delta)
        for a_idx, a in enumerate(a_list):
            log_soft = truncated_log(soft_log_partition(hist, a), n, delta)
            gaps[r, a_idx] = abs(log_soft - log_hard) / n
    mean_gaps = tuple(float(g) for g in gaps.mean(axis=0))
    return TempGapReport(a_list, mean_gaps, gaps, n, m, alpha, delta, replicates)
