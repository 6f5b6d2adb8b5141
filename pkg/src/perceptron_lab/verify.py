"""Monte Carlo frequency checks for the probabilistic tail and gap claims.

Each routine estimates an event probability or an expectation gap with enough
instrumentation (Wilson intervals, standard errors, fitted decay constants)
for the caller to compare against the analytic bounds. Absolute constants in
the bounds are unknowable, so only shapes and inequalities-with-slack are ever
asserted downstream; this module just measures.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import partition
from .activation import Activation, evaluate_many
from .disorder import DisorderSpec, sample_matrix
from .errors import ConditioningEmptyError
from .formulas import all_fail_bound, sudakov_lower
from .separation import as_config_set
from .streams import SeededStream

__all__ = [
    "TailEstimate",
    "GapEstimate",
    "wilson_interval",
    "tail_addone",
    "bootstrap_slope_ci",
    "all_fail_frequency",
    "sup_concentration",
    "clt_gap",
]

_Z95 = 1.959963985
_CHUNK = 4096
_TOPUP_FACTOR = 20


def wilson_interval(successes: int, total: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson 95% score interval for a binomial proportion."""
    if total <= 0:
        raise ValueError(f"wilson_interval needs total >= 1, got {total}")
    if not 0 <= successes <= total:
        raise ValueError(f"successes {successes} outside [0, {total}]")
    p = successes / total
    denom = 1.0 + z * z / total
    center = (p + z * z / (2 * total)) / denom
    half = z * math.sqrt(p * (1.0 - p) / total + z * z / (4.0 * total * total)) / denom
    # Over the reals the score interval always contains p (center - half <=
    # p <= center + half); float rounding can lose that by one ulp at the
    # endpoints (e.g. upper bound 0.999... at p = 1), so clamp it back.
    return min(max(0.0, center - half), p), max(min(1.0, center + half), p)


@dataclass(frozen=True)
class TailEstimate:
    """Empirical tail of -log(Z_{M+1}/Z_M) on a w grid, with a fitted decay."""

    w_grid: tuple[float, ...]
    p_hat: tuple[float, ...]
    intervals: tuple[tuple[float, float], ...]
    replicates: int
    discards: int
    fitted_slope: float
    fitted_c_delta: float
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        grid = self.w_grid
        if any(b <= a for a, b in zip(grid, grid[1:])) or (grid and grid[0] < 0.0):
            raise ValueError(f"w_grid must be strictly increasing and nonnegative, got {grid}")
        for p, (lo, hi) in zip(self.p_hat, self.intervals):
            if not (0.0 <= lo <= p <= hi <= 1.0):
                raise ValueError(f"interval [{lo}, {hi}] does not bracket p_hat {p}")


@dataclass(frozen=True)
class GapEstimate:
    """|E F(sum xi / sqrt n) - E F(sum g / sqrt n)| with its standard error."""

    value: float
    se: float
    n: int
    p: int

    def __post_init__(self) -> None:
        if self.value < 0.0 or self.se < 0.0:
            raise ValueError(f"gap and SE must be nonnegative, got {self.value}, {self.se}")


def _fit_decay(w_grid, p_hat) -> tuple[float, float]:
    pts = [(w, math.log(p)) for w, p in zip(w_grid, p_hat) if p > 0.0]
    if len(pts) < 2:
        return math.nan, math.nan
    ws = np.array([w for w, _ in pts])
    ys = np.array([y for _, y in pts])
    slope = float(np.polyfit(ws, ys, 1)[0])
    c_delta = -1.0 / slope if slope != 0.0 else math.nan
    return slope, c_delta


def tail_addone(
    model: tuple[DisorderSpec, Activation, int, int, float],
    w_grid,
    replicates: int,
    stream: SeededStream,
) -> TailEstimate:
    """Tail of the add-one-constraint free energy drop, conditioned on Z_M >= exp(n delta).

    Each replicate draws a fresh instance, keeps it only when Z_M clears the
    conditioning level, appends one more disorder row and records
    w = -log(Z_{M+1}/Z_M), with Z_{M+1} = 0 mapped to w = +inf (it lands in
    every tail bucket). Replicates are topped up (bounded by a 20x attempt
    budget) so the conditional sample keeps the requested size; an acceptance
    rate below 1/2 warns.
    """
    spec, act, n, m, delta = model
    w_grid = tuple(float(w) for w in w_grid)
    if replicates < 100:
        raise ValueError(f"tail_addone needs replicates >= 100, got {replicates}")
    if m < 0:
        raise ValueError(f"m must be >= 0, got {m}")
    level = math.exp(n * delta)
    values: list[float] = []
    attempts = 0
    max_attempts = _TOPUP_FACTOR * replicates
    while len(values) < replicates and attempts < max_attempts:
        inst = partition.make_instance(spec, act, n, m, stream.child(attempts, 0))
        row = sample_matrix(spec, 1, n, stream.child(attempts, 1))[0]
        attempts += 1
        z_m, z_both = partition.add_one_counts(inst, row)
        if z_m < level:
            continue
        values.append(math.inf if z_both == 0 else -math.log(z_both / z_m))
    accepted = len(values)
    if accepted == 0:
        raise ConditioningEmptyError(
            f"conditioning event Z >= exp({n}*{delta}) empty after {attempts} attempts"
        )
    if accepted < attempts / 2:
        warnings.warn(
            f"conditioning acceptance rate {accepted / attempts:.3f} < 0.5 "
            f"({accepted}/{attempts} attempts)",
            stacklevel=2,
        )
    arr = np.array(values)
    p_hat = []
    intervals = []
    for w in w_grid:
        hits = int(np.count_nonzero(arr >= w))
        p_hat.append(hits / accepted)
        intervals.append(wilson_interval(hits, accepted))
    slope, c_delta = _fit_decay(w_grid, p_hat)
    return TailEstimate(
        w_grid, tuple(p_hat), tuple(intervals), accepted, attempts - accepted, slope, c_delta, tuple(values)
    )


def bootstrap_slope_ci(
    estimate: TailEstimate, stream: SeededStream, resamples: int = 200
) -> tuple[float, float]:
    """Percentile 95% CI for fitted_slope under resampling of the recorded values."""
    if not estimate.values:
        raise ValueError("estimate carries no recorded values to resample")
    vals = np.array(estimate.values)
    rng = stream.generator()
    slopes = []
    for _ in range(resamples):
        draw = vals[rng.integers(0, vals.size, size=vals.size)]
        p_hat = [float(np.count_nonzero(draw >= w)) / vals.size for w in estimate.w_grid]
        slope, _ = _fit_decay(estimate.w_grid, p_hat)
        if math.isfinite(slope):
            slopes.append(slope)
    if len(slopes) < resamples // 2:
        return math.nan, math.nan
    lo, hi = np.percentile(slopes, [2.5, 97.5])
    return float(lo), float(hi)


def all_fail_frequency(
    eps: float, n_process: int, replicates: int, stream: SeededStream
) -> tuple[float, float]:
    """P(max of n equicorrelated unit gaussians <= sqrt(eps log n)/2), with its bound.

    The witnesses are u_i = sqrt(1-eps) z + sqrt(eps) z_i over shared z;
    returns (p_hat, n^(-eps/50))."""
    if not 1 <= n_process <= 1 << 14:
        raise ValueError(f"n_process must lie in [1, 2^14], got {n_process}")
    if replicates < 1:
        raise ValueError(f"replicates must be >= 1, got {replicates}")
    threshold, bound = all_fail_bound(eps, n_process)
    shared = math.sqrt(1.0 - eps)
    indiv = math.sqrt(eps)
    chunk_rows = max(1, (1 << 22) // n_process)
    hits = 0
    done = 0
    chunk_idx = 0
    while done < replicates:
        rows = min(chunk_rows, replicates - done)
        rng = stream.child(chunk_idx).generator()
        z = rng.standard_normal(rows)
        zs = rng.standard_normal((rows, n_process))
        u_max = (shared * z[:, None] + indiv * zs).max(axis=1)
        hits += int(np.count_nonzero(u_max <= threshold))
        done += rows
        chunk_idx += 1
    return hits / replicates, bound


def sup_concentration(
    spec: DisorderSpec,
    s,
    replicates: int,
    stream: SeededStream,
    eps: float = 1.0,
    u_grid=(0.25, 0.5, 0.75, 1.0, 1.5, 2.0),
) -> tuple[float, tuple[tuple[float, float, float, float], ...], float]:
    """Concentration of f(xi) = max over sigma in S of (xi, sigma)/sqrt(n).

    Returns (mean_sup, table, sudakov_floor) where the table rows are
    (u, p_hat, ci_lo, ci_hi) for the two-sided deviation P(|f - mean| >= u)
    and the floor is sudakov_lower(eps, |S|) at the caller-certified pairwise
    separation level eps of S.
    """
    s = as_config_set(s)
    if s.size > 1 << 14:
        raise ValueError(f"sup_concentration is capped at |S| = 2^14, got {s.size}")
    if replicates < 2:
        raise ValueError(f"replicates must be >= 2, got {replicates}")
    n = s.dim
    s_mat = s.explicit().astype(np.float64).T  # n x |S|
    sqrt_n = math.sqrt(n)
    sups = np.empty(replicates)
    done = 0
    chunk_idx = 0
    chunk_rows = max(1, (1 << 22) // s.size)
    while done < replicates:
        rows = min(chunk_rows, replicates - done)
        xi = sample_matrix(spec, rows, n, stream.child(chunk_idx))
        sups[done : done + rows] = (xi @ s_mat).max(axis=1) / sqrt_n
        done += rows
        chunk_idx += 1
    mean_sup = float(sups.mean())
    dev = np.abs(sups - mean_sup)
    table = []
    for u in u_grid:
        hits = int(np.count_nonzero(dev >= u))
        lo, hi = wilson_interval(hits, replicates)
        table.append((float(u), hits / replicates, lo, hi))
    return mean_sup, tuple(table), sudakov_lower(eps, s.size)


def clt_gap(
    f: Activation,
    p: int,
    n: int,
    spec: DisorderSpec,
    replicates: int,
    stream: SeededStream,
) -> GapEstimate:
    """|E F - E F(gaussian)| for F(Sigma) = product of f over p constraint values.

    Paired design: each replicate shares one uniform sign matrix Sigma between
    the xi- and gaussian-disorder worlds, so the difference has variance far
    below either term alone.
    """
    if not 1 <= p <= 8:
        raise ValueError(f"p must lie in [1, 8], got {p}")
    if not 1 <= n <= 10_000:
        raise ValueError(f"n must lie in [1, 10^4], got {n}")
    if replicates < 2:
        raise ValueError(f"replicates must be >= 2, got {replicates}")
    sqrt_n = math.sqrt(n)
    diffs = np.empty(replicates)
    done = 0
    chunk_idx = 0
    chunk_rows = max(1, (1 << 21) // max(1, p * n))
    while done < replicates:
        rows = min(chunk_rows, replicates - done)
        rng = stream.child(chunk_idx).generator()
        sigma = rng.integers(0, 2, size=(rows, p, n)).astype(np.float64) * 2.0 - 1.0
        xi = sample_matrix(spec, rows * p, n, stream.child(chunk_idx, 1)).reshape(rows, p, n)
        g = rng.standard_normal((rows, p, n))
        x_xi = (sigma * xi).sum(axis=2) / sqrt_n
        x_g = (sigma * g).sum(axis=2) / sqrt_n
        f_xi = evaluate_many(f, x_xi).all(axis=1)
        f_g = evaluate_many(f, x_g).all(axis=1)
        diffs[done : done + rows] = f_xi.astype(np.float64) - f_g.astype(np.float64)
        done += rows
        chunk_idx += 1
    mean = float(diffs.mean())
    se = float(diffs.std(ddof=1) / math.sqrt(replicates))
    return GapEstimate(abs(mean), se, n, p)
