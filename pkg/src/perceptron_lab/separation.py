"""Block-separation machinery over the sign cube.

Two configurations are eps-separated on a block I of size K when the absolute
block overlap |(sigma_I, tau_I)|/K is at most 1 - eps. This module provides
the overlap statistics, the pairwise-separated sampler, the greedy extraction
of a family separated on a common block set, and the block-process interval
chain. Every constructed family is certified: the defining inequality is
re-checked in integer arithmetic on construction and failures raise.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import CertificationError, SeparationFailure
from .formulas import psi2
from .streams import SeededStream

__all__ = [
    "BlockDecomposition",
    "ConfigSet",
    "SeparatedFamily",
    "OverlapTail",
    "as_config_set",
    "overlap",
    "block_overlap",
    "pair_overlap_tail",
    "sample_pairwise_separated",
    "greedy_extract",
    "extract_separated_family",
    "block_path",
    "interval_chain",
]

logger = logging.getLogger(__name__)

EXACT_PAIR_LIMIT = 4096
CUBE_EXPLICIT_LIMIT = 20


@dataclass(frozen=True)
class BlockDecomposition:
    """[n] split into l consecutive blocks of equal size k = n / l."""

    n: int
    l: int

    def __post_init__(self) -> None:
        if self.l < 1 or self.n < 1:
            raise ValueError(f"need n >= 1 and l >= 1, got n={self.n}, l={self.l}")
        if self.n % self.l != 0:
            raise ValueError(f"K*L=N required: {self.l} does not divide {self.n}")

    @property
    def k(self) -> int:
        return self.n // self.l

    @property
    def blocks(self) -> tuple[tuple[int, int], ...]:
        k = self.k
        return tuple((j * k, (j + 1) * k) for j in range(self.l))


@dataclass(frozen=True, eq=False)
class ConfigSet:
    """A subset of {-1,+1}^n: explicit rows, or the full cube held symbolically."""

    matrix: np.ndarray | None = None
    cube_n: int | None = None

    def __post_init__(self) -> None:
        if (self.matrix is None) == (self.cube_n is None):
            raise ValueError("exactly one of matrix / cube_n must be given")
        if self.matrix is not None:
            mat = np.asarray(self.matrix)
            if mat.ndim != 2 or mat.shape[0] < 1:
                raise ValueError(f"config matrix must be 2-d and nonempty, got shape {mat.shape}")
            if not np.all(np.abs(mat) == 1):
                raise ValueError("config matrix entries must be +-1")
            object.__setattr__(self, "matrix", np.ascontiguousarray(mat, dtype=np.int8))

    @staticmethod
    def from_matrix(matrix) -> "ConfigSet":
        return ConfigSet(matrix=np.asarray(matrix))

    @staticmethod
    def full_cube(n: int) -> "ConfigSet":
        if n < 1:
            raise ValueError(f"cube dimension must be >= 1, got {n}")
        return ConfigSet(cube_n=n)

    @property
    def dim(self) -> int:
        return self.cube_n if self.cube_n is not None else self.matrix.shape[1]

    @property
    def size(self) -> int:
        return (1 << self.cube_n) if self.cube_n is not None else self.matrix.shape[0]

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """count i.i.d. uniform rows."""
        if self.cube_n is not None:
            bits = rng.integers(0, 2, size=(count, self.cube_n))
            return (2 * bits - 1).astype(np.int8)
        idx = rng.integers(0, self.matrix.shape[0], size=count)
        return self.matrix[idx].copy()

    def explicit(self) -> np.ndarray:
        if self.matrix is not None:
            return self.matrix
        if self.cube_n > CUBE_EXPLICIT_LIMIT:
            raise ValueError(f"refusing to materialize a cube of dimension {self.cube_n}")
        codes = np.arange(1 << self.cube_n, dtype=np.int64)
        bits = (codes[:, None] >> np.arange(self.cube_n, dtype=np.int64)) & 1
        return (2 * bits - 1).astype(np.int8)


def as_config_set(s) -> ConfigSet:
    if isinstance(s, ConfigSet):
        return s
    return ConfigSet.from_matrix(np.asarray(s))


def _block_gram(rows: np.ndarray, lo: int, hi: int) -> np.ndarray:
    part = rows[:, lo:hi].astype(np.int32)
    return part @ part.T


@dataclass(frozen=True, eq=False)
class SeparatedFamily:
    """Configurations plus blocks j_star on which all distinct pairs are eps-separated.

    The defining inequality |(sigma_I, tau_I)| <= (1 - eps) K is re-verified in
    integer arithmetic on construction; any violation raises CertificationError.
    """

    omega: np.ndarray
    j_star: tuple[int, ...]
    eps: float
    gamma: float
    blocks: BlockDecomposition

    def __post_init__(self) -> None:
        omega = np.ascontiguousarray(np.asarray(self.omega), dtype=np.int8)
        object.__setattr__(self, "omega", omega)
        object.__setattr__(self, "j_star", tuple(int(j) for j in self.j_star))
        if omega.ndim != 2 or omega.shape[0] < 1:
            raise ValueError(f"omega must be a nonempty 2-d sign matrix, got shape {omega.shape}")
        if omega.shape[1] != self.blocks.n:
            raise ValueError(f"omega dimension {omega.shape[1]} != block decomposition n {self.blocks.n}")
        if not 0.0 < self.eps <= 2.0:
            raise ValueError(f"eps must lie in (0, 2], got {self.eps}")
        if any(j < 0 or j >= self.blocks.l for j in self.j_star):
            raise ValueError(f"j_star {self.j_star} outside [0, {self.blocks.l})")
        k = self.blocks.k
        threshold = (1.0 - self.eps) * k
        # the pair condition binds distinct configurations only: full overlap
        # exactly +N means the rows are the same sigma, exempt by definition
        full = _block_gram(omega, 0, self.blocks.n)
        same = full == self.blocks.n
        for j in self.j_star:
            lo, hi = self.blocks.blocks[j]
            g = _block_gram(omega, lo, hi)
            bad = (np.abs(g) > threshold + 1e-12) & ~same
            if bad.any():
                i0, i1 = map(int, np.argwhere(bad)[0])
                raise CertificationError(
                    f"family not {self.eps}-separated on block {j}: rows {i0},{i1} "
                    f"have |block overlap| {abs(int(g[i0, i1]))}/{k}"
                )


def overlap(sigma: np.ndarray, tau: np.ndarray) -> float:
    """(sigma, tau)/n."""
    sigma = np.asarray(sigma)
    tau = np.asarray(tau)
    if sigma.shape != tau.shape:
        raise ValueError(f"dimension mismatch: {sigma.shape} vs {tau.shape}")
    return float(np.dot(sigma.astype(np.int64), tau.astype(np.int64))) / sigma.shape[0]


def block_overlap(sigma: np.ndarray, tau: np.ndarray, blocks: BlockDecomposition, j: int) -> float:
    """(sigma_I, tau_I)/K on block j."""
    sigma = np.asarray(sigma)
    tau = np.asarray(tau)
    if sigma.shape != tau.shape or sigma.shape[0] != blocks.n:
        raise ValueError(f"dimension mismatch: {sigma.shape}, {tau.shape}, n={blocks.n}")
    lo, hi = blocks.blocks[j]
    return float(np.dot(sigma[lo:hi].astype(np.int64), tau[lo:hi].astype(np.int64))) / blocks.k


@dataclass(frozen=True)
class OverlapTail:
    value: float
    se: float | None
    exact: bool


def pair_overlap_tail(
    s, t: float, stream: SeededStream | None = None, mc_pairs: int = 200_000
) -> OverlapTail:
    """mu x mu probability that two i.i.d. draws from S have |overlap| >= t.

    Exact by pair enumeration for explicit sets of at most 4096 rows and for
    symbolic full cubes (binomial sum in integer arithmetic); otherwise Monte
    Carlo over sampled pairs with its standard error.
    """
    s = as_config_set(s)
    if s.size < 2:
        raise ValueError(f"pair_overlap_tail needs |S| >= 2, got {s.size}")
    n = s.dim
    if s.cube_n is not None:
        # overlap of two uniform cube points is (n - 2d)/n with d ~ Bin(n, 1/2)
        num = sum(comb(n, d) for d in range(n + 1) if abs(n - 2 * d) >= t * n)
        return OverlapTail(num / (1 << n), None, True)
    if s.size <= EXACT_PAIR_LIMIT:
        g = s.matrix.astype(np.int32) @ s.matrix.astype(np.int32).T
        count = int(np.count_nonzero(np.abs(g) >= t * n))
        return OverlapTail(count / (s.size * s.size), None, True)
    rng = (stream if stream is not None else SeededStream(0)).generator()
    hits = 0
    remaining = mc_pairs
    while remaining > 0:
        batch = min(remaining, 65536)
        a = s.sample(batch, rng).astype(np.int32)
        b = s.sample(batch, rng).astype(np.int32)
        dots = np.abs((a * b).sum(axis=1))
        hits += int(np.count_nonzero(dots >= t * n))
        remaining -= batch
    p = hits / mc_pairs
    return OverlapTail(p, math.sqrt(max(p * (1 - p), 1e-300) / mc_pairs), False)


def _pair_separation_counts(rows: np.ndarray, blocks: BlockDecomposition, eps: float) -> np.ndarray:
    """counts[i,j] = number of blocks on which rows i and j are eps-separated."""
    r = rows.shape[0]
    counts = np.zeros((r, r), dtype=np.int64)
    threshold = (1.0 - eps) * blocks.k
    for lo, hi in blocks.blocks:
        g = _block_gram(rows, lo, hi)
        counts += (np.abs(g) <= threshold).astype(np.int64)
    return counts


def sample_pairwise_separated(
    s,
    n_tuple: int,
    eps: float,
    blocks: BlockDecomposition,
    min_blocks: int,
    stream: SeededStream,
    max_retries: int = 100,
) -> np.ndarray:
    """i.i.d. tuples from uniform(S), retried until every pair is eps-separated
    on at least min_blocks blocks; the winning tuple is returned and re-asserted."""
    s = as_config_set(s)
    if n_tuple > s.size:
        raise ValueError(f"n_tuple={n_tuple} exceeds |S|={s.size}")
    if n_tuple < 0:
        raise ValueError(f"n_tuple must be >= 0, got {n_tuple}")
    rng = stream.generator()
    best = -1
    for attempt in range(max_retries):
        rows = s.sample(n_tuple, rng)
        if n_tuple <= 1:
            return rows
        counts = _pair_separation_counts(rows, blocks, eps)
        off_diag = counts[np.triu_indices(n_tuple, k=1)]
        worst = int(off_diag.min())
        best = max(best, worst)
        if worst >= min_blocks:
            return rows
    raise SeparationFailure(
        f"sample_pairwise_separated: no eps={eps} tuple with min_blocks={min_blocks} "
        f"in {max_retries} attempts (best min pair count seen: {best})"
    )


def greedy_extract(
    s_prime, blocks: BlockDecomposition, eps: float, eta: float
) -> tuple[np.ndarray, tuple[int, ...]]:
    """Greedy block-retiring loop.

    While some candidate sigma* in Omega or -Omega and unretired block j have
    more than an eta fraction of tau in Omega, tau != sigma* as a vector, with
    signed block overlap (sigma*_I, tau_I)/K strictly above 1 - eps: restrict
    Omega to {tau : signed block overlap > 1 - eps} and retire j. Candidates
    are scanned rows-first, +sigma before -sigma, blocks ascending; the first
    violator wins. Returns (T, J_circ) and hard-asserts that for every sigma
    in T and unretired j, the fraction of tau in T outside {sigma, -sigma}
    with |block overlap|/K > 1 - eps is at most 2*eta.
    """
    omega = as_config_set(s_prime).explicit().copy()
    if not 0.0 < eta <= 0.5:
        raise ValueError(f"eta must lie in (0, 1/2], got {eta}")
    level = (1.0 - eps) * blocks.k
    n = blocks.n
    remaining = list(range(blocks.l))

    def refresh(rows: np.ndarray):
        grams = {j: _block_gram(rows, *blocks.blocks[j]) for j in remaining}
        return grams, _block_gram(rows, 0, n)

    grams, full = refresh(omega)
    while remaining:
        found = None
        size = omega.shape[0]
        for idx in range(size):
            for sgn in (1, -1):
                # rows identical to the candidate vector are not violators
                n_self = int(np.count_nonzero(sgn * full[idx] == n))
                for j in remaining:
                    mask = sgn * grams[j][idx] > level
                    if int(mask.sum()) - n_self > eta * size:
                        found = (j, mask)
                        break
                if found:
                    break
            if found:
                break
        if found is None:
            break
        j, mask = found
        omega = omega[mask]
        remaining.remove(j)
        grams, full = refresh(omega)

    t_set = omega
    j_circ = tuple(remaining)
    # postcondition: absolute-overlap violators are rare under every survivor.
    # Rows equal to the survivor or its antipode are exempt: the loop counts
    # violators per sign with the candidate's own copies excluded, so the
    # 2*eta bound it guarantees covers exactly the pairs outside {+-sigma}
    # (an antipodal copy has |block overlap| = K and can never be thinned).
    size = t_set.shape[0]
    same = np.abs(full) == n
    for j in j_circ:
        g = _block_gram(t_set, *blocks.blocks[j])
        bad = (np.abs(g) > level) & ~same
        frac_bad = bad.sum(axis=1) / size
        if np.any(frac_bad > 2 * eta + 1e-12):
            raise CertificationError(
                f"greedy_extract postcondition failed on block {j}: "
                f"violator fraction {float(frac_bad.max())} > 2*eta = {2 * eta}"
            )
    return t_set, j_circ


def _dedupe_rows(rows: np.ndarray) -> np.ndarray:
    seen = set()
    keep = []
    for i in range(rows.shape[0]):
        key = rows[i].tobytes()
        if key not in seen:
            seen.add(key)
            keep.append(i)
    return rows[keep]


def extract_separated_family(
    s,
    delta: float,
    eps: float,
    gamma: float,
    l: int,
    stream: SeededStream,
    n_tuple: int | None = None,
    max_retries: int = 100,
    eta_min: float = 0.05,
) -> SeparatedFamily:
    """Full pipeline: pairwise-separated sample, greedy extraction with
    eta = exp(-9 n delta / (4 l)) clamped to [eta_min, 1/2], then block
    certification, keeping the ceil(l*gamma) certified blocks with the widest
    separation margin. Never returns an uncertified family."""
    s = as_config_set(s)
    n = s.dim
    blocks = BlockDecomposition(n, l)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"eps must lie in (0, 1), got {eps}")
    if not 0.0 < gamma <= 1.0:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    if s.size < math.exp(8 * n * delta):
        warnings.warn(
            f"|S|={s.size} is below the working-size convention exp(8 n delta)={math.exp(8 * n * delta):.3g}",
            stacklevel=2,
        )
    if psi2(min(8 * eps, 2.0)) > delta:
        warnings.warn(
            f"separation level eps={eps} is large for delta={delta} "
            f"(psi2(min(8 eps, 2)) = {psi2(min(8 * eps, 2.0)):.4f} > delta); desk-scale run",
            stacklevel=2,
        )
    if gamma > delta / (2 * math.log(2)):
        warnings.warn(
            f"block fraction gamma={gamma} exceeds delta/(2 log 2) = {delta / (2 * math.log(2)):.4f}; desk-scale run",
            stacklevel=2,
        )

    target = max(1, math.ceil(l * gamma))
    min_blocks = min(l, math.ceil(2 * l * gamma))
    if n_tuple is None:
        n_tuple = max(4, math.ceil(math.exp(n * delta / l)))
        n_tuple = min(n_tuple, 64, s.size)

    if s.size == 1:
        return SeparatedFamily(s.explicit(), tuple(range(target)), eps, gamma, blocks)

    eta = math.exp(-9 * n * delta / (4 * l))
    eta_clamped = min(max(eta, eta_min), 0.5)
    if eta_clamped != eta:
        logger.info("greedy threshold eta clamped from %.3g to %.3g", eta, eta_clamped)

    sample_failures = 0
    greedy_shortfalls = 0
    certify_shortfalls = 0
    for attempt in range(max_retries):
        try:
            s_prime = sample_pairwise_separated(
                s, n_tuple, eps, blocks, min_blocks, stream.child(attempt, 0), max_retries=50
            )
        except SeparationFailure:
            sample_failures += 1
            continue
        t_set, j_circ = greedy_extract(s_prime, blocks, eps, eta_clamped)
        if len(j_circ) < target:
            greedy_shortfalls += 1
            continue
        # resample within T; at desk scale |T| <= n_tuple, where this
        # degenerates to keeping T's distinct rows
        if t_set.shape[0] > n_tuple:
            rng = stream.child(attempt, 1).generator()
            idx = rng.integers(0, t_set.shape[0], size=n_tuple)
            omega = _dedupe_rows(t_set[idx])
        else:
            omega = _dedupe_rows(t_set)
        threshold = (1.0 - eps) * blocks.k
        certified = []
        for j in j_circ:
            g = _block_gram(omega, *blocks.blocks[j])
            np.fill_diagonal(g, 0)
            worst = int(np.abs(g).max()) if omega.shape[0] > 1 else 0
            if worst <= threshold:
                certified.append((-(threshold - worst), j))
        if len(certified) < target:
            certify_shortfalls += 1
            continue
        certified.sort()
        j_star = tuple(sorted(j for _, j in certified[:target]))
        return SeparatedFamily(omega, j_star, eps, gamma, blocks)

    raise SeparationFailure(
        f"extract_separated_family failed after {max_retries} attempts "
        f"(sample failures {sample_failures}, greedy shortfalls {greedy_shortfalls}, "
        f"certification shortfalls {certify_shortfalls}; n={n}, l={l}, eps={eps}, "
        f"gamma={gamma}, n_tuple={n_tuple}, eta={eta_clamped:.4g})"
    )


def block_path(sigma: np.ndarray, xi: np.ndarray, blocks: BlockDecomposition) -> np.ndarray:
    """Partial sums M_0..M_L with M_k = sum over the first k blocks of
    (xi_I, sigma_I), normalized by sqrt(n)."""
    sigma = np.asarray(sigma)
    xi = np.asarray(xi, dtype=np.float64)
    if sigma.shape != (blocks.n,) or xi.shape != (blocks.n,):
        raise ValueError(f"dimension mismatch: sigma {sigma.shape}, xi {xi.shape}, n={blocks.n}")
    prod = sigma.astype(np.float64) * xi
    block_sums = np.add.reduceat(prod, [lo for lo, _ in blocks.blocks])
    path = np.zeros(blocks.l + 1, dtype=np.float64)
    np.cumsum(block_sums / math.sqrt(blocks.n), out=path[1:])
    return path


def interval_chain(
    omega: SeparatedFamily,
    xi: np.ndarray,
    target: tuple[float, float],
    r_bar_param: float,
    nu: float = 1.0,
) -> tuple[np.ndarray, list[float]]:
    """Chain filtering of the block process toward a target window [a, b].

    At stage ell = L(1-gamma) keep configurations whose path value sits within
    L*gamma*budget of [a, b]; afterwards shrink the allowance by one budget per
    block, where budget = Rbar sqrt(eps nu / L) and Rbar^2 = rbar/gamma with
    rbar = max(|a|, |b|, r_bar_param). Survivors end inside [a, b] exactly.
    Returns (survivor rows, per-stage survival ratios).
    """
    blocks = omega.blocks
    a, b = float(target[0]), float(target[1])
    if not (math.isfinite(a) and math.isfinite(b) and a <= b):
        raise ValueError(f"target must be a finite interval, got [{a}, {b}]")
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (blocks.n,):
        raise ValueError(f"xi shape {xi.shape} != ({blocks.n},)")
    big_l = blocks.l
    gamma = omega.gamma
    ell_float = big_l * (1.0 - gamma)
    ell = round(ell_float)
    if abs(ell_float - ell) > 1e-9:
        raise ValueError(f"L(1-gamma) = {ell_float} must be an integer")

    r_bar = max(abs(a), abs(b), float(r_bar_param))
    budget = math.sqrt(r_bar / gamma) * math.sqrt(omega.eps) * math.sqrt(nu) / math.sqrt(big_l)

    prod = omega.omega.astype(np.float64) * xi[None, :]
    block_sums = np.add.reduceat(prod, [lo for lo, _ in blocks.blocks], axis=1)
    paths = np.cumsum(block_sums, axis=1) / math.sqrt(blocks.n)  # column k-1 is M_k

    def dist(values: np.ndarray) -> np.ndarray:
        return np.maximum(np.maximum(a - values, values - b), 0.0)

    alive = np.ones(omega.omega.shape[0], dtype=bool)
    ratios: list[float] = []

    def apply_stage(stage_k: int, allowance: float) -> None:
        nonlocal alive
        prev = int(alive.sum())
        if stage_k == 0:
            values = np.zeros(omega.omega.shape[0])
        else:
            values = paths[:, stage_k - 1]
        alive = alive & (dist(values) <= allowance)
        ratios.append(int(alive.sum()) / prev if prev else 1.0)

    apply_stage(ell, big_l * gamma * budget)
    for k in range(ell, big_l):
        apply_stage(k + 1, (big_l - k - 1) * budget)
    return omega.omega[alive], ratios
