"""Tests for block-separation machinery: overlap statistics, the pairwise
sampler, greedy extraction, certified families, block paths, and the interval
chain.

Oracles are independent in-test reimplementations: an explicit pair-count
for the cube overlap tail, a straight-line step simulator for the greedy
loop, and a direct replay filter for the interval chain.
"""

import math
import warnings
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from perceptron_lab.errors import CertificationError, SeparationFailure
from perceptron_lab.formulas import LOG2, psi2
from perceptron_lab.separation import (
    CUBE_EXPLICIT_LIMIT,
    EXACT_PAIR_LIMIT,
    BlockDecomposition,
    ConfigSet,
    OverlapTail,
    SeparatedFamily,
    as_config_set,
    block_overlap,
    block_path,
    extract_separated_family,
    greedy_extract,
    interval_chain,
    overlap,
    pair_overlap_tail,
    sample_pairwise_separated,
)
from perceptron_lab.streams import SeededStream


def _random_signs(rng, rows, n):
    return (2 * rng.integers(0, 2, size=(rows, n)) - 1).astype(np.int8)


def _hadamard_rows():
    # four rows of length 8, pairwise orthogonal on each length-4 block
    return np.array(
        [
            [1, 1, 1, 1, 1, 1, 1, 1],
            [1, 1, -1, -1, 1, 1, -1, -1],
            [1, -1, 1, -1, 1, -1, 1, -1],
            [1, -1, -1, 1, 1, -1, -1, 1],
        ],
        dtype=np.int8,
    )


def _cube_tail_fraction(n, t):
    """Exact cube pair tail as a Fraction, via two one-sided binomial tails."""
    low = sum(math.comb(n, d) for d in range(n + 1) if n - 2 * d >= t * n)
    high = sum(math.comb(n, d) for d in range(n + 1) if 2 * d - n >= t * n)
    both = sum(math.comb(n, d) for d in range(n + 1) if n - 2 * d >= t * n and 2 * d - n >= t * n)
    return Fraction(low + high - both, 1 << n)


def _pair_block_counts_reference(rows, blocks, eps):
    """For each pair, count blocks with |block overlap| <= 1 - eps, by loops."""
    r = rows.shape[0]
    counts = np.zeros((r, r), dtype=np.int64)
    for i in range(r):
        for j in range(r):
            for b in range(blocks.l):
                lo, hi = blocks.blocks[b]
                dot = int(np.dot(rows[i, lo:hi].astype(np.int64), rows[j, lo:hi].astype(np.int64)))
                if abs(dot) <= (1.0 - eps) * blocks.k:
                    counts[i, j] += 1
    return counts


def _greedy_reference(rows, blocks, eps, eta):
    """Independent step simulator for the greedy block-retiring loop.

    Scan order: rows ascending, +sigma before -sigma, blocks ascending; the
    first candidate whose strict-overlap cluster (minus rows equal to the
    candidate vector) exceeds an eta fraction wins, the set is restricted to
    the full cluster, and the block is retired.
    """
    omega = [np.array(row, dtype=np.int64) for row in rows]
    remaining = list(range(blocks.l))
    level = (1.0 - eps) * blocks.k
    while remaining:
        hit = None
        size = len(omega)
        for idx in range(size):
            for sgn in (1, -1):
                cand = sgn * omega[idx]
                for j in remaining:
                    lo, hi = blocks.blocks[j]
                    cluster = [
                        t
                        for t, tau in enumerate(omega)
                        if int(np.dot(cand[lo:hi], tau[lo:hi])) > level
                    ]
                    violators = sum(1 for t in cluster if not np.array_equal(omega[t], cand))
                    if violators > eta * size:
                        hit = (j, cluster)
                        break
                if hit:
                    break
            if hit:
                break
        if hit is None:
            break
        j, cluster = hit
        omega = [omega[t] for t in cluster]
        remaining.remove(j)
    t_set = np.array([row for row in omega], dtype=np.int8)
    return t_set, tuple(remaining)


def _chain_reference(rows, blocks, gamma, eps, nu, xi, a, b, r_bar_param):
    """Straight-line replay of the interval-chain filter."""
    big_l = blocks.l
    ell = round(big_l * (1.0 - gamma))
    r_bar = max(abs(a), abs(b), r_bar_param)
    budget = math.sqrt(r_bar / gamma) * math.sqrt(eps) * math.sqrt(nu) / math.sqrt(big_l)
    paths = [block_path(rows[i], xi, blocks) for i in range(rows.shape[0])]

    def dist(v):
        return max(a - v, v - b, 0.0)

    alive = list(range(rows.shape[0]))
    ratios = []
    stages = [(ell, big_l * gamma * budget)]
    stages += [(k + 1, (big_l - k - 1) * budget) for k in range(ell, big_l)]
    for stage_k, allowance in stages:
        prev = len(alive)
        alive = [i for i in alive if dist(paths[i][stage_k]) <= allowance]
        ratios.append(len(alive) / prev if prev else 1.0)
    return rows[alive], ratios


class TestBlockDecomposition:
    def test_k_and_blocks_partition(self):
        """Blocks are the consecutive equal ranges covering [n] in order."""
        d = BlockDecomposition(12, 3)
        assert d.k == 4
        assert d.blocks == ((0, 4), (4, 8), (8, 12))

    def test_single_block(self):
        """l=1 yields one block spanning everything."""
        d = BlockDecomposition(7, 1)
        assert d.k == 7
        assert d.blocks == ((0, 7),)

    def test_non_divisible_rejected(self):
        """n must split evenly into l blocks."""
        with pytest.raises(ValueError, match="does not divide"):
            BlockDecomposition(10, 3)

    def test_degenerate_sizes_rejected(self):
        """Nonpositive n or l is rejected."""
        with pytest.raises(ValueError):
            BlockDecomposition(0, 1)
        with pytest.raises(ValueError):
            BlockDecomposition(8, 0)


class TestConfigSet:
    def test_exactly_one_source(self):
        """Exactly one of matrix / cube_n must be given."""
        with pytest.raises(ValueError):
            ConfigSet()
        with pytest.raises(ValueError):
            ConfigSet(matrix=np.ones((2, 3)), cube_n=3)

    def test_entries_validated(self):
        """Explicit matrices must be sign matrices."""
        with pytest.raises(ValueError, match=r"\+-1"):
            ConfigSet(matrix=np.array([[1, 0, -1]]))

    def test_cube_size_and_dim(self):
        """A symbolic cube reports 2^n rows without materializing them."""
        s = ConfigSet.full_cube(30)
        assert s.size == 1 << 30
        assert s.dim == 30

    def test_explicit_cube_rows(self):
        """Materialized cubes contain every sign vector exactly once."""
        rows = ConfigSet.full_cube(3).explicit()
        assert rows.shape == (8, 3)
        assert len({tuple(r) for r in rows.tolist()}) == 8

    def test_explicit_refuses_large_cube(self):
        """Materialization is capped to keep memory bounded."""
        with pytest.raises(ValueError, match="refusing"):
            ConfigSet.full_cube(CUBE_EXPLICIT_LIMIT + 1).explicit()

    def test_sample_is_deterministic(self):
        """Sampling is reproducible from the generator state."""
        s = ConfigSet.full_cube(9)
        a = s.sample(20, SeededStream(3).generator())
        b = s.sample(20, SeededStream(3).generator())
        np.testing.assert_array_equal(a, b)
        assert np.all(np.abs(a) == 1)

    def test_sample_from_matrix_returns_members(self):
        """Samples from an explicit set are rows of that set."""
        mat = _random_signs(SeededStream(11).generator(), 6, 5)
        s = ConfigSet.from_matrix(mat)
        drawn = s.sample(40, SeededStream(4).generator())
        members = {tuple(r) for r in mat.tolist()}
        assert all(tuple(r) in members for r in drawn.tolist())

    def test_as_config_set(self):
        """as_config_set wraps arrays and passes ConfigSets through."""
        s = ConfigSet.full_cube(4)
        assert as_config_set(s) is s
        wrapped = as_config_set([[1, -1], [-1, 1]])
        assert wrapped.size == 2 and wrapped.dim == 2


class TestOverlap:
    def test_self_overlap_is_one(self):
        """overlap(sigma, sigma) = 1."""
        sigma = _random_signs(SeededStream(0).generator(), 1, 17)[0]
        assert overlap(sigma, sigma) == 1.0

    def test_antipode_overlap_is_minus_one(self):
        """overlap(sigma, -sigma) = -1."""
        sigma = _random_signs(SeededStream(1).generator(), 1, 17)[0]
        assert overlap(sigma, -sigma) == -1.0

    def test_half_agreement_is_zero(self):
        """Agreeing on exactly half the coordinates gives overlap 0."""
        assert overlap(np.array([1, 1, 1, 1]), np.array([1, 1, -1, -1])) == 0.0

    def test_dimension_mismatch(self):
        """Mismatched shapes are rejected."""
        with pytest.raises(ValueError, match="mismatch"):
            overlap(np.ones(3), np.ones(4))
        with pytest.raises(ValueError, match="mismatch"):
            block_overlap(np.ones(4), np.ones(4), BlockDecomposition(8, 2), 0)

    def test_block_overlap_hand_values(self):
        """Per-block overlaps on a small hand example."""
        blocks = BlockDecomposition(4, 2)
        sigma = np.array([1, 1, 1, 1])
        tau = np.array([1, -1, 1, 1])
        assert block_overlap(sigma, tau, blocks, 0) == 0.0
        assert block_overlap(sigma, tau, blocks, 1) == 1.0

    @given(seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_block_average_recovers_overlap(self, seed):
        """K times the block overlaps sums to n times the overlap, exactly."""
        rng = np.random.default_rng(seed)
        n, l = 24, 4
        blocks = BlockDecomposition(n, l)
        sigma, tau = _random_signs(rng, 2, n)
        total = sum(block_overlap(sigma, tau, blocks, j) for j in range(l)) * blocks.k
        assert abs(total - overlap(sigma, tau) * n) < 1e-12
        assert -1.0 <= overlap(sigma, tau) <= 1.0


class TestPairOverlapTail:
    def test_cube_example(self):
        """Cube n=10 at t=0.6: binomial tail 112/1024, exactly."""
        res = pair_overlap_tail(ConfigSet.full_cube(10), 0.6)
        assert res.value == 112 / 1024 == 0.109375
        assert res.exact and res.se is None

    def test_antipodal_pair(self):
        """{sigma, -sigma} has every pair overlap of modulus 1."""
        sigma = _random_signs(SeededStream(5).generator(), 1, 8)[0]
        res = pair_overlap_tail(np.stack([sigma, -sigma]), 0.5)
        assert res.value == 1.0 and res.exact

    def test_zero_level_is_one(self):
        """Every pair clears a zero threshold."""
        assert pair_overlap_tail(ConfigSet.full_cube(7), 0.0).value == 1.0

    @pytest.mark.parametrize("n", [2, 5, 8, 11, 12])
    def test_cube_matches_explicit_enumeration(self, n):
        """Symbolic-cube tails equal explicit all-pairs enumeration exactly."""
        explicit = ConfigSet.from_matrix(ConfigSet.full_cube(n).explicit())
        assert explicit.size <= EXACT_PAIR_LIMIT
        for t in (0.1, 0.25, 0.5, 0.75, 1.0):
            lhs = pair_overlap_tail(ConfigSet.full_cube(n), t)
            rhs = pair_overlap_tail(explicit, t)
            assert lhs.exact and rhs.exact
            assert lhs.value == rhs.value

    @pytest.mark.parametrize("n", list(range(2, 21)))
    def test_cube_matches_binomial_oracle(self, n):
        """Cube tails equal the closed-form binomial expression for n <= 20."""
        for t in (0.2, 0.5, 0.8, 1.0):
            got = pair_overlap_tail(ConfigSet.full_cube(n), t)
            assert got.value == float(_cube_tail_fraction(n, t))

    def test_concentration_inequality_on_cube(self):
        """For eps with psi2(eps) <= log2 / 2, the n=10 cube tail at 1 - eps
        is at most 2 exp(-n log2 / 2)."""
        n = 10
        bound = 2.0 * math.exp(-n * LOG2 / 2.0)
        tested = 0
        for eps in np.arange(0.05, 1.0, 0.05):
            if psi2(float(eps)) > LOG2 / 2.0:
                continue
            tested += 1
            tail = pair_overlap_tail(ConfigSet.full_cube(n), 1.0 - float(eps)).value
            assert tail <= bound
        assert tested >= 3

    def test_small_set_rejected(self):
        """The pair measure needs at least two configurations."""
        with pytest.raises(ValueError, match=">= 2"):
            pair_overlap_tail(np.ones((1, 6)), 0.5)

    def test_monte_carlo_path(self):
        """Beyond the enumeration cap the tail is estimated with an SE and
        lands near the exact subset value."""
        rng = SeededStream(21).generator()
        mat = _random_signs(rng, EXACT_PAIR_LIMIT + 104, 16)
        t = 0.5
        res = pair_overlap_tail(ConfigSet.from_matrix(mat), t, stream=SeededStream(77))
        assert not res.exact and res.se is not None and res.se > 0
        # exact subset tail via chunked pair counts
        hits = 0
        a32 = mat.astype(np.int32)
        for start in range(0, mat.shape[0], 512):
            g = a32[start : start + 512] @ a32.T
            hits += int(np.count_nonzero(np.abs(g) >= t * 16))
        exact = hits / (mat.shape[0] ** 2)
        assert abs(res.value - exact) <= 5 * res.se
        again = pair_overlap_tail(ConfigSet.from_matrix(mat), t, stream=SeededStream(77))
        assert again.value == res.value and again.se == res.se

    def test_overlap_tail_type(self):
        """Exact results carry no standard error."""
        res = pair_overlap_tail(ConfigSet.full_cube(6), 0.5)
        assert isinstance(res, OverlapTail)


class TestSamplePairwise:
    def test_single_tuple_immediate(self):
        """n_tuple <= 1 has no pairs and returns immediately."""
        blocks = BlockDecomposition(8, 2)
        rows = sample_pairwise_separated(
            ConfigSet.full_cube(8), 1, 0.25, blocks, blocks.l, SeededStream(1)
        )
        assert rows.shape == (1, 8)

    def test_tuple_larger_than_set(self):
        """Requesting more rows than the set holds is an error."""
        with pytest.raises(ValueError, match="exceeds"):
            sample_pairwise_separated(
                np.ones((1, 6), dtype=np.int8), 2, 0.25, BlockDecomposition(6, 2), 1, SeededStream(0)
            )

    def test_cube_example_postcondition(self):
        """Cube n=12, L=3, eps=0.25: four draws pairwise separated on at
        least two blocks, verified by an independent pair count."""
        blocks = BlockDecomposition(12, 3)
        rows = sample_pairwise_separated(
            ConfigSet.full_cube(12), 4, 0.25, blocks, 2, SeededStream(42)
        )
        assert rows.shape == (4, 12)
        counts = _pair_block_counts_reference(rows, blocks, 0.25)
        for i in range(4):
            for j in range(i + 1, 4):
                assert counts[i, j] >= 2

    def test_deterministic(self):
        """The same stream reproduces the same tuple."""
        blocks = BlockDecomposition(12, 3)
        a = sample_pairwise_separated(ConfigSet.full_cube(12), 4, 0.25, blocks, 2, SeededStream(9))
        b = sample_pairwise_separated(ConfigSet.full_cube(12), 4, 0.25, blocks, 2, SeededStream(9))
        np.testing.assert_array_equal(a, b)

    def test_impossible_demand_fails(self):
        """An antipodal pair is never separated, so retries exhaust."""
        sigma = np.ones(8, dtype=np.int8)
        s = np.stack([sigma, -sigma])
        with pytest.raises(SeparationFailure, match="best min pair count"):
            sample_pairwise_separated(
                s, 2, 0.25, BlockDecomposition(8, 2), 1, SeededStream(3), max_retries=5
            )


class TestGreedyExtract:
    def test_all_separated_is_a_fixed_point(self):
        """With every pair separated on every block, nothing is retired."""
        rows = _hadamard_rows()
        t_set, j_circ = greedy_extract(rows, BlockDecomposition(8, 2), 0.25, 0.1)
        np.testing.assert_array_equal(t_set, rows)
        assert j_circ == (0, 1)

    def test_singleton_is_a_fixed_point(self):
        """A single configuration has no pairs and survives unchanged."""
        rows = np.ones((1, 8), dtype=np.int8)
        t_set, j_circ = greedy_extract(rows, BlockDecomposition(8, 4), 0.5, 0.3)
        np.testing.assert_array_equal(t_set, rows)
        assert j_circ == (0, 1, 2, 3)

    def test_antipodal_pair_is_a_fixed_point(self):
        """{sigma, -sigma} has no per-sign violators (each candidate's only
        strict-overlap partner is its own copy), so nothing is retired; the
        antipodal pair is exempt from the 2*eta certificate and left for the
        downstream family check to reject."""
        sigma = np.ones(8, dtype=np.int8)
        rows = np.stack([sigma, -sigma])
        t_set, j_circ = greedy_extract(rows, BlockDecomposition(8, 2), 0.25, 0.1)
        np.testing.assert_array_equal(t_set, rows)
        assert j_circ == (0, 1)

    def test_eta_domain(self):
        """eta must lie in (0, 1/2]."""
        rows = _hadamard_rows()
        blocks = BlockDecomposition(8, 2)
        with pytest.raises(ValueError, match="eta"):
            greedy_extract(rows, blocks, 0.25, 0.0)
        with pytest.raises(ValueError, match="eta"):
            greedy_extract(rows, blocks, 0.25, 0.6)

    def test_shared_block_trace_no_violator(self):
        """Two rows agreeing on block 1 alone stay below an eta=0.4 fraction
        of four rows, so the loop never fires; the simulator agrees."""
        rows = np.array(
            [
                [1, 1, 1, 1, 1, 1, 1, 1],
                [1, 1, 1, 1, -1, -1, 1, 1],
                [1, -1, 1, -1, 1, -1, 1, -1],
                [1, -1, -1, 1, -1, 1, 1, -1],
            ],
            dtype=np.int8,
        )
        blocks = BlockDecomposition(8, 2)
        t_set, j_circ = greedy_extract(rows, blocks, 0.25, 0.4)
        ref_t, ref_j = _greedy_reference(rows, blocks, 0.25, 0.4)
        np.testing.assert_array_equal(t_set, ref_t)
        assert j_circ == ref_j == (0, 1)
        np.testing.assert_array_equal(t_set, rows)

    def test_shared_block_trace_with_retirement(self):
        """Three of four rows agreeing on block 0 force one retirement; the
        cluster is kept, the block retired, and the simulator agrees."""
        rows = np.array(
            [
                [1, 1, 1, 1, 1, 1, 1, 1],
                [1, 1, 1, 1, 1, -1, 1, -1],
                [1, 1, 1, 1, -1, 1, -1, 1],
                [-1, -1, 1, 1, -1, -1, -1, -1],
            ],
            dtype=np.int8,
        )
        blocks = BlockDecomposition(8, 2)
        t_set, j_circ = greedy_extract(rows, blocks, 0.25, 0.4)
        ref_t, ref_j = _greedy_reference(rows, blocks, 0.25, 0.4)
        np.testing.assert_array_equal(t_set, ref_t)
        assert j_circ == ref_j == (1,)
        np.testing.assert_array_equal(t_set, rows[:3])

    def test_matches_reference_on_random_instances(self):
        """Library output equals the independent simulator on random sets."""
        rng = np.random.default_rng(2026)
        for trial in range(60):
            l = int(rng.integers(1, 5))
            k = int(rng.integers(2, 5))
            n = l * k
            rows = _random_signs(rng, int(rng.integers(2, 11)), n)
            eps = float(rng.choice([0.25, 0.5, 0.75]))
            eta = float(rng.choice([0.2, 0.3, 0.4, 0.5]))
            blocks = BlockDecomposition(n, l)
            t_set, j_circ = greedy_extract(rows, blocks, eps, eta)
            ref_t, ref_j = _greedy_reference(rows, blocks, eps, eta)
            np.testing.assert_array_equal(t_set, ref_t)
            assert j_circ == ref_j

    def test_survivor_count_lower_bound(self):
        """Each retirement keeps more than an eta fraction, so the output
        holds at least eta^L of the input."""
        rng = np.random.default_rng(7)
        for trial in range(40):
            rows = _random_signs(rng, 12, 8)
            eta = float(rng.choice([0.25, 0.4, 0.5]))
            blocks = BlockDecomposition(8, 4)
            t_set, _ = greedy_extract(rows, blocks, 0.5, eta)
            assert t_set.shape[0] >= eta**blocks.l * rows.shape[0] - 1e-9

    def test_postcondition_checked_independently(self):
        """For every survivor and unretired block, the fraction of distinct
        near-copies stays at or below 2 eta."""
        rng = np.random.default_rng(15)
        for trial in range(20):
            rows = _random_signs(rng, 10, 12)
            blocks = BlockDecomposition(12, 3)
            eta = 0.3
            eps = 0.25
            t_set, j_circ = greedy_extract(rows, blocks, eps, eta)
            level = (1.0 - eps) * blocks.k
            for j in j_circ:
                lo, hi = blocks.blocks[j]
                for i in range(t_set.shape[0]):
                    bad = 0
                    for t in range(t_set.shape[0]):
                        if np.array_equal(t_set[i], t_set[t]):
                            continue
                        dot = int(
                            np.dot(t_set[i, lo:hi].astype(np.int64), t_set[t, lo:hi].astype(np.int64))
                        )
                        if abs(dot) > level:
                            bad += 1
                    assert bad / t_set.shape[0] <= 2 * eta + 1e-12


class TestSeparatedFamily:
    def test_certified_construction(self):
        """Orthogonal-per-block rows certify at eps=0.25 on both blocks."""
        fam = SeparatedFamily(_hadamard_rows(), (0, 1), 0.25, 0.5, BlockDecomposition(8, 2))
        assert fam.omega.shape == (4, 8)
        assert fam.j_star == (0, 1)

    def test_violation_raises(self):
        """A pair overlapping fully on a certified block is rejected."""
        rows = np.array([[1, 1, 1, 1, 1, 1, 1, 1], [1, 1, 1, 1, -1, -1, -1, -1]], dtype=np.int8)
        with pytest.raises(CertificationError, match="block 0"):
            SeparatedFamily(rows, (0,), 0.25, 0.5, BlockDecomposition(8, 2))

    def test_duplicate_rows_exempt(self):
        """Rows equal as vectors are not pairs; duplicates certify fine."""
        rows = _hadamard_rows()[[0, 1, 0]]
        fam = SeparatedFamily(rows, (0, 1), 0.25, 0.5, BlockDecomposition(8, 2))
        assert fam.omega.shape == (3, 8)

    def test_antipodal_rows_not_exempt(self):
        """sigma and -sigma are distinct and overlap fully in modulus."""
        sigma = np.ones(8, dtype=np.int8)
        with pytest.raises(CertificationError):
            SeparatedFamily(np.stack([sigma, -sigma]), (0,), 0.25, 0.5, BlockDecomposition(8, 2))

    def test_parameter_validation(self):
        """eps range, block indices, and dimensions are validated."""
        rows = _hadamard_rows()
        blocks = BlockDecomposition(8, 2)
        with pytest.raises(ValueError, match="eps"):
            SeparatedFamily(rows, (0,), 0.0, 0.5, blocks)
        with pytest.raises(ValueError, match="eps"):
            SeparatedFamily(rows, (0,), 2.5, 0.5, blocks)
        with pytest.raises(ValueError, match="j_star"):
            SeparatedFamily(rows, (2,), 0.25, 0.5, blocks)
        with pytest.raises(ValueError, match="dimension"):
            SeparatedFamily(rows[:, :6], (0,), 0.25, 0.5, blocks)

    def test_exception_hierarchy(self):
        """Certification failures are assertion errors; separation failures
        are certification failures."""
        assert issubclass(CertificationError, AssertionError)
        assert issubclass(SeparationFailure, CertificationError)


class TestExtractSeparatedFamily:
    def _extract_quiet(self, *args, **kwargs):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", UserWarning)
            return extract_separated_family(*args, **kwargs)

    def test_cube_fixture(self):
        """Cube n=12, L=3, gamma=1/3, eps=0.25: a certified family with at
        least four configurations and one returned block."""
        fam = self._extract_quiet(
            ConfigSet.full_cube(12), 0.05, 0.25, 1 / 3, 3, SeededStream(7)
        )
        assert fam.omega.shape[0] >= 4
        assert len(fam.j_star) == 1
        # independent integer recheck of the separation inequality
        k = fam.blocks.k
        for j in fam.j_star:
            lo, hi = fam.blocks.blocks[j]
            part = fam.omega[:, lo:hi].astype(np.int64)
            g = part @ part.T
            np.fill_diagonal(g, 0)
            assert np.abs(g).max() <= (1.0 - fam.eps) * k

    def test_deterministic(self):
        """The same stream reproduces the same family."""
        a = self._extract_quiet(ConfigSet.full_cube(12), 0.05, 0.25, 1 / 3, 3, SeededStream(7))
        b = self._extract_quiet(ConfigSet.full_cube(12), 0.05, 0.25, 1 / 3, 3, SeededStream(7))
        np.testing.assert_array_equal(a.omega, b.omega)
        assert a.j_star == b.j_star

    def test_gamma_warning(self):
        """Desk-scale gamma above delta/(2 log 2) warns instead of failing."""
        with pytest.warns(UserWarning, match="gamma"):
            extract_separated_family(
                ConfigSet.full_cube(12), 0.05, 0.25, 1 / 3, 3, SeededStream(7)
            )

    def test_small_set_warning(self):
        """A set below the working-size convention warns."""
        rng = SeededStream(1).generator()
        mat = _random_signs(rng, 8, 12)
        with pytest.warns(UserWarning, match="exp"):
            try:
                extract_separated_family(
                    ConfigSet.from_matrix(mat), 0.2, 0.25, 1 / 3, 3, SeededStream(2), max_retries=3
                )
            except SeparationFailure:
                pass

    def test_antipodal_set_fails_certified(self):
        """{sigma, -sigma} has modulus-one block overlaps everywhere, so the
        pipeline reports failure rather than an uncertified family."""
        sigma = np.ones(8, dtype=np.int8)
        with pytest.raises(SeparationFailure, match="failed after"):
            self._extract_quiet(
                np.stack([sigma, -sigma]), 0.05, 0.25, 0.5, 2, SeededStream(0), max_retries=5
            )

    def test_singleton_trivially_valid(self):
        """A one-element set is a valid family with no pair conditions."""
        fam = self._extract_quiet(
            np.ones((1, 8), dtype=np.int8), 0.05, 0.25, 0.5, 2, SeededStream(0)
        )
        assert fam.omega.shape == (1, 8)
        assert len(fam.j_star) == 1

    def test_eps_gamma_domains(self):
        """eps in (0,1) and gamma in (0,1] are enforced."""
        s = ConfigSet.full_cube(8)
        with pytest.raises(ValueError, match="eps"):
            self._extract_quiet(s, 0.05, 1.0, 0.5, 2, SeededStream(0))
        with pytest.raises(ValueError, match="gamma"):
            self._extract_quiet(s, 0.05, 0.25, 0.0, 2, SeededStream(0))

    def test_invariant_across_seeded_runs(self):
        """Every successful construction satisfies the separation inequality,
        rechecked here in integer arithmetic, across seeded runs."""
        for seed in range(10):
            fam = self._extract_quiet(
                ConfigSet.full_cube(12), 0.05, 0.25, 1 / 3, 3, SeededStream(seed)
            )
            threshold = (1.0 - fam.eps) * fam.blocks.k
            full = fam.omega.astype(np.int64) @ fam.omega.astype(np.int64).T
            for j in fam.j_star:
                lo, hi = fam.blocks.blocks[j]
                part = fam.omega[:, lo:hi].astype(np.int64)
                g = part @ part.T
                for i0 in range(fam.omega.shape[0]):
                    for i1 in range(fam.omega.shape[0]):
                        if full[i0, i1] == fam.blocks.n:
                            continue
                        assert abs(int(g[i0, i1])) <= threshold


class TestBlockPath:
    def test_single_block_path(self):
        """L=1 gives (0, (xi, sigma)/sqrt(n))."""
        rng = SeededStream(2).generator()
        sigma = _random_signs(rng, 1, 9)[0]
        xi = rng.standard_normal(9)
        path = block_path(sigma, xi, BlockDecomposition(9, 1))
        assert path[0] == 0.0
        np.testing.assert_allclose(path[1], float(sigma @ xi) / math.sqrt(9), rtol=0, atol=1e-12)

    def test_matched_disorder_is_linear(self):
        """xi = sigma makes the path climb by K/sqrt(n) per block."""
        sigma = _random_signs(SeededStream(3).generator(), 1, 12)[0]
        blocks = BlockDecomposition(12, 4)
        path = block_path(sigma, sigma.astype(np.float64), blocks)
        expected = np.arange(5) * blocks.k / math.sqrt(12)
        np.testing.assert_allclose(path, expected, rtol=0, atol=1e-12)

    def test_dimension_mismatch(self):
        """sigma and xi must match the decomposition's n."""
        with pytest.raises(ValueError, match="mismatch"):
            block_path(np.ones(8), np.ones(7), BlockDecomposition(8, 2))

    def test_telescoping_many_pairs(self):
        """The final value equals the direct normalized dot product within
        1e-12 across 10^4 random pairs."""
        rng = np.random.default_rng(99)
        n = 24
        for l in (2, 3, 4, 6):
            blocks = BlockDecomposition(n, l)
            for _ in range(2500):
                sigma = (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)
                xi = rng.standard_normal(n)
                path = block_path(sigma, xi, blocks)
                direct = float(sigma.astype(np.float64) @ xi) / math.sqrt(n)
                assert abs(path[-1] - direct) <= 1e-12
                assert path[0] == 0.0


class TestIntervalChain:
    def _family(self, rows, l, gamma, eps=0.25):
        n = rows.shape[1]
        return SeparatedFamily(rows, (), eps, gamma, BlockDecomposition(n, l))

    def test_huge_target_keeps_everyone(self):
        """A target far wider than any path value filters nothing."""
        rng = np.random.default_rng(1)
        rows = _random_signs(rng, 10, 8)
        fam = self._family(rows, 4, 0.5)
        xi = rng.standard_normal(8)
        survivors, ratios = interval_chain(fam, xi, (-1e6, 1e6), 1.0)
        np.testing.assert_array_equal(survivors, rows)
        assert ratios == [1.0, 1.0, 1.0]

    def test_matched_single_row_survives(self):
        """Omega = {sigma}, xi = sigma, target around sqrt(n): the one path
        ends at sqrt(n) and survives every stage."""
        sigma = _random_signs(SeededStream(6).generator(), 1, 8)
        fam = self._family(sigma, 4, 0.5)
        root = math.sqrt(8)
        survivors, ratios = interval_chain(
            fam, sigma[0].astype(np.float64), (root - 0.5, root + 0.5), 1.0
        )
        np.testing.assert_array_equal(survivors, sigma)
        assert ratios == [1.0, 1.0, 1.0]

    def test_unreachable_target_empties(self):
        """A far-off target is a valid outcome with an empty survivor set."""
        rng = np.random.default_rng(2)
        rows = _random_signs(rng, 6, 8)
        fam = self._family(rows, 4, 0.5)
        survivors, ratios = interval_chain(fam, rng.standard_normal(8), (100.0, 101.0), 1.0)
        assert survivors.shape == (0, 8)
        assert len(ratios) == 3

    def test_non_integral_stage_rejected(self):
        """L(1 - gamma) must be an integer."""
        rows = _random_signs(np.random.default_rng(3), 4, 8)
        fam = self._family(rows, 4, 0.3)
        with pytest.raises(ValueError, match="integer"):
            interval_chain(fam, np.ones(8), (0.0, 1.0), 1.0)

    def test_target_validation(self):
        """The target must be a finite ordered interval."""
        fam = self._family(_random_signs(np.random.default_rng(4), 4, 8), 4, 0.5)
        with pytest.raises(ValueError, match="finite"):
            interval_chain(fam, np.ones(8), (1.0, 0.0), 1.0)
        with pytest.raises(ValueError, match="finite"):
            interval_chain(fam, np.ones(8), (0.0, math.inf), 1.0)

    def test_survivors_end_inside_target(self):
        """The last allowance is zero, so survivors satisfy M_L in [a, b]:
        exactly for integer disorder, within 1e-9 for floats."""
        rng = np.random.default_rng(5)
        blocks_n, l = 8, 4
        for trial in range(20):
            rows = _random_signs(rng, 30, blocks_n)
            fam = self._family(rows, l, 0.5)
            a, b = sorted(rng.uniform(-2, 2, size=2).tolist())
            xi_float = rng.standard_normal(blocks_n)
            survivors, _ = interval_chain(fam, xi_float, (a, b), 2.0)
            for row in survivors:
                m_l = float(row.astype(np.float64) @ xi_float) / math.sqrt(blocks_n)
                assert a - 1e-9 <= m_l <= b + 1e-9
            xi_int = (2 * rng.integers(0, 2, size=blocks_n) - 1).astype(np.float64)
            survivors_int, _ = interval_chain(fam, xi_int, (a, b), 2.0)
            for row in survivors_int:
                m_l = float(row.astype(np.float64) @ xi_int) / math.sqrt(blocks_n)
                assert a <= m_l <= b

    def test_matches_reference_replay(self):
        """Survivors and stage ratios equal an independent replay of the
        filter across seeded instances."""
        rng = np.random.default_rng(2027)
        for trial in range(30):
            rows = _random_signs(rng, 20, 8)
            gamma = float(rng.choice([0.25, 0.5, 0.75]))
            nu = float(rng.choice([1.0, 1.3]))
            eps = float(rng.choice([0.25, 0.5]))
            fam = self._family(rows, 4, gamma, eps=eps)
            xi = rng.standard_normal(8)
            a, b = sorted(rng.uniform(-2, 2, size=2).tolist())
            r_bar = float(rng.uniform(0.5, 3.0))
            survivors, ratios = interval_chain(fam, xi, (a, b), r_bar, nu=nu)
            ref_rows, ref_ratios = _chain_reference(rows, fam.blocks, gamma, eps, nu, xi, a, b, r_bar)
            np.testing.assert_array_equal(survivors, ref_rows)
            np.testing.assert_allclose(ratios, ref_ratios, rtol=0, atol=1e-15)

    def test_wider_budget_keeps_more(self):
        """Raising the variance proxy only enlarges the survivor set."""
        rng = np.random.default_rng(6)
        rows = _random_signs(rng, 40, 8)
        fam = self._family(rows, 4, 0.5)
        xi = rng.standard_normal(8)
        small, _ = interval_chain(fam, xi, (-0.5, 0.5), 1.0, nu=1.0)
        large, _ = interval_chain(fam, xi, (-0.5, 0.5), 1.0, nu=4.0)
        small_keys = {row.tobytes() for row in small}
        large_keys = {row.tobytes() for row in large}
        assert small_keys <= large_keys
