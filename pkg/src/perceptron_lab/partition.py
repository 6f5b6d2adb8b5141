"""Exact partition functions over the sign cube {-1,+1}^n.

Z = sum over sigma of 1{every constraint satisfied}, with constraint k reading
U((xi_k, sigma)/sqrt(n)). Counting walks the cube in Gray-code order (see
_kernels). Instances built from rademacher or integer-valued discrete disorder
run entirely in int64 arithmetic: boundary ties (e.g. kappa = 0 with an even
number of +-1 terms) are then decided exactly by the closed-interval
convention instead of float rounding.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .activation import Activation
from .disorder import DisorderSpec, sample_matrix
from .errors import FeasibilityError
from .formulas import truncated_log
from .streams import SeededStream

__all__ = [
    "Instance",
    "PartitionResult",
    "make_instance",
    "count_exact",
    "count_naive",
    "exists_solution",
    "free_energy_soft",
    "soft_log_partition",
    "add_one_counts",
    "add_one_ratio",
    "solution_set",
    "solution_sample",
    "violation_profile",
    "default_n_cap",
]

NAIVE_CAP = 16
_INT_SENTINEL = np.int64(1) << 62


def default_n_cap() -> int:
    raw = os.environ.get("PERCEPTRON_LAB_N_CAP", "")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            return 30
    return 30


@dataclass(frozen=True, eq=False)
class Instance:
    """One disorder realization: n, m, the shared activation, and xi in R^{m x n}."""

    n: int
    m: int
    activation: Activation
    xi: np.ndarray
    spec: DisorderSpec | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"instance needs n >= 1, got {self.n}")
        if self.m < 0:
            raise ValueError(f"instance needs m >= 0, got {self.m}")
        xi = np.asarray(self.xi, dtype=np.float64)
        if xi.shape != (self.m, self.n):
            raise ValueError(f"xi shape {xi.shape} != (m, n) = {(self.m, self.n)}")
        object.__setattr__(self, "xi", xi)

    @property
    def alpha(self) -> float:
        return self.m / self.n

    @property
    def integer_mode(self) -> bool:
        if self.spec is None or not self.spec.integer_valued:
            return False
        return bool(np.all(self.xi == np.round(self.xi)))


@dataclass(frozen=True)
class PartitionResult:
    z: int
    log_z: float
    log_trunc: float
    delta: float


def make_instance(
    spec: DisorderSpec, activation: Activation, n: int, m: int, stream: SeededStream
) -> Instance:
    return Instance(n, m, activation, sample_matrix(spec, m, n, stream), spec=spec)


def _check_cap(n: int, n_cap: int | None) -> None:
    cap = default_n_cap() if n_cap is None else n_cap
    if n > cap:
        raise FeasibilityError(f"n={n} exceeds the enumeration cap {cap}")


def _snap_int(x: float, side: int) -> np.int64:
    # closed boundaries: a scaled endpoint within 1e-9 of an integer is that integer
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return np.int64(r)
    return np.int64(math.ceil(x)) if side > 0 else np.int64(math.floor(x))


def dot_scale_bounds(activation: Activation, n: int, integer_mode: bool):
    """Activation boundaries moved to the unnormalized dot scale (times sqrt n)."""
    sqrt_n = math.sqrt(n)
    if integer_mode:
        lo = np.empty(len(activation.intervals), dtype=np.int64)
        hi = np.empty(len(activation.intervals), dtype=np.int64)
        for i, (a, b) in enumerate(activation.intervals):
            lo[i] = _snap_int(a * sqrt_n, +1)
            hi[i] = _INT_SENTINEL if math.isinf(b) else _snap_int(b * sqrt_n, -1)
        return lo, hi
    lo = np.array([a * sqrt_n for a, _ in activation.intervals], dtype=np.float64)
    hi = np.array([b * sqrt_n for _, b in activation.intervals], dtype=np.float64)
    return lo, hi


def _kernel_inputs(inst: Instance, extra_row: np.ndarray | None = None):
    xi = inst.xi if extra_row is None else np.vstack([inst.xi, extra_row[None, :]])
    integer = inst.integer_mode and (extra_row is None or bool(np.all(xi == np.round(xi))))
    lo, hi = dot_scale_bounds(inst.activation, inst.n, integer)
    if integer:
        xi = xi.astype(np.int64)
    return np.ascontiguousarray(xi), lo, hi


def _result(z: int, n: int, delta: float) -> PartitionResult:
    log_z = math.log(z) if z > 0 else -math.inf
    return PartitionResult(z, log_z, truncated_log(log_z, n, delta), delta)


def count_exact(inst: Instance, delta: float = 0.05, n_cap: int | None = None) -> PartitionResult:
    """Exact Z by Gray-code traversal with incremental dot products."""
    _check_cap(inst.n, n_cap)
    xi, lo, hi = _kernel_inputs(inst)
    return _result(_kernels.count_satisfying(xi, lo, hi), inst.n, delta)


def count_naive(inst: Instance, delta: float = 0.05) -> PartitionResult:
    """Independent oracle: every dot product recomputed directly; n <= 16 only."""
    if inst.n > NAIVE_CAP:
        raise FeasibilityError(f"count_naive is capped at n={NAIVE_CAP}, got n={inst.n}")
    xi, lo, hi = _kernel_inputs(inst)
    total = 1 << inst.n
    codes = np.arange(total, dtype=np.int64)
    signs = ((codes[:, None] >> np.arange(inst.n, dtype=np.int64)) & 1) * 2 - 1
    if inst.m == 0:
        return _result(total, inst.n, delta)
    dots = signs.astype(xi.dtype) @ xi.T
    sat = np.zeros(dots.shape, dtype=bool)
    for j in range(lo.shape[0]):
        sat |= (dots >= lo[j]) & (dots <= hi[j])
    return _result(int(np.count_nonzero(sat.all(axis=1))), inst.n, delta)


def exists_solution(inst: Instance, n_cap: int | None = None) -> bool:
    """True iff Z > 0; early exit on the first satisfying configuration."""
    _check_cap(inst.n, n_cap)
    if inst.m == 0:
        return True
    if not inst.activation.intervals:
        return False
    xi, lo, hi = _kernel_inputs(inst)
    return _kernels.exists_satisfying(xi, lo, hi)


def violation_profile(inst: Instance, n_cap: int | None = None) -> np.ndarray:
    """hist[v] = number of configurations violating exactly v constraints."""
    _check_cap(inst.n, n_cap)
    xi, lo, hi = _kernel_inputs(inst)
    return _kernels.violation_histogram(xi, lo, hi)


def soft_log_partition(hist: np.ndarray, a_trunc: float) -> float:
    """log sum_v hist[v] exp(-A v), stable via max shift; hist from violation_profile."""
    if not a_trunc > 0.0:
        raise ValueError(f"truncation level must be positive, got {a_trunc}")
    v = np.nonzero(hist)[0]
    terms = np.log(hist[v].astype(np.float64)) - a_trunc * v
    peak = float(terms.max())
    return peak + math.log(float(np.exp(terms - peak).sum()))


def free_energy_soft(inst: Instance, a_trunc: float, n_cap: int | None = None) -> float:
    """log Z(u_A) = log sum_sigma exp(-A * violations(sigma)); always >= log Z."""
    return soft_log_partition(violation_profile(inst, n_cap), a_trunc)


def add_one_counts(inst: Instance, new_row: np.ndarray, n_cap: int | None = None) -> tuple[int, int]:
    """(Z_M, Z_{M+1}) for one candidate constraint row, in a single traversal."""
    _check_cap(inst.n, n_cap)
    new_row = np.asarray(new_row, dtype=np.float64)
    if new_row.shape != (inst.n,):
        raise ValueError(f"new_row shape {new_row.shape} != ({inst.n},)")
    xi, lo, hi = _kernel_inputs(inst, extra_row=new_row)
    return _kernels.count_satisfying_pair(xi, lo, hi)


def add_one_ratio(inst: Instance, new_row: np.ndarray, n_cap: int | None = None) -> float:
    """Z_{M+1}/Z_M for one candidate constraint row; requires Z_M > 0."""
    z_m, z_both = add_one_counts(inst, new_row, n_cap)
    if z_m == 0:
        raise ValueError("add_one_ratio undefined: the instance has no solutions")
    return z_both / z_m


def solution_set(inst: Instance, n_cap: int | None = None, limit: int = 1 << 24) -> np.ndarray:
    """The full solution set as a (Z, n) sign matrix, in Gray-code order."""
    _check_cap(inst.n, n_cap)
    if inst.m == 0:
        codes = np.arange(1 << inst.n, dtype=np.int64)
        return _kernels.decode_codes(codes ^ (codes >> 1), inst.n)
    xi, lo, hi = _kernel_inputs(inst)
    codes = _kernels.collect_satisfying(xi, lo, hi, limit)
    if codes is None:
        raise FeasibilityError(f"solution set exceeds the collection limit {limit}")
    return _kernels.decode_codes(codes, inst.n)


def solution_sample(
    inst: Instance,
    count: int,
    stream: SeededStream,
    n_cap: int | None = None,
    limit: int = 1 << 24,
) -> np.ndarray:
    """`count` i.i.d. uniform draws from the solution set, as a (count, n) sign matrix."""
    _check_cap(inst.n, n_cap)
    if count < 0:
        raise ValueError(f"count must be >= 0, got {count}")
    rng = stream.generator()
    if inst.m == 0:
        codes = rng.integers(0, 1 << inst.n, size=count, dtype=np.int64)
        return _kernels.decode_codes(codes, inst.n)
    xi, lo, hi = _kernel_inputs(inst)
    codes = _kernels.collect_satisfying(xi, lo, hi, limit)
    if codes is None:
        raise FeasibilityError(f"solution set exceeds the sampling limit {limit}")
    if codes.shape[0] == 0:
        raise ValueError("solution_sample undefined: the instance has no solutions")
    idx = rng.integers(0, codes.shape[0], size=count)
    return _kernels.decode_codes(codes[idx], inst.n)
