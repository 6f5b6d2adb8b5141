"""Disorder sampler tests.

Covers exact standardization, the empirical and analytic MGF bounds behind the
variance proxy, determinism of seeded streams, and config serialization.
Analytic MGF oracles are computed in-test (closed forms where available,
adaptive quadrature for the exponential-power family).
"""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from perceptron_lab.disorder import (
    DisorderSpec,
    discrete,
    exponential_power,
    format_disorder,
    gaussian,
    parse_disorder,
    rademacher,
    sample_matrix,
    uniform,
    variance_proxy,
)
from perceptron_lab.streams import SeededStream

SUBGAUSSIAN_SPECS = [
    gaussian(),
    rademacher(),
    uniform(),
    exponential_power(2.0),
    exponential_power(3.0),
    discrete([(-1.0, 0.25), (0.0, 0.5), (3.0, 0.25)]),
]


def _analytic_mgf(spec: DisorderSpec, lam: float) -> float:
    """E exp(lam X) for the standardized family, computed independently."""
    if spec.family == "gaussian":
        return math.exp(lam * lam / 2.0)
    if spec.family == "rademacher":
        return math.cosh(lam)
    if spec.family == "uniform":
        t = math.sqrt(3.0) * lam
        return math.sinh(t) / t if t != 0.0 else 1.0
    if spec.family == "discrete":
        probs = np.array([p for _, p in spec.support])
        values = np.array([v for v, _ in spec.support])
        probs = probs / probs.sum()
        mean = float(values @ probs)
        sd = math.sqrt(float(((values - mean) ** 2) @ probs))
        std_values = (values - mean) / sd
        return float(probs @ np.exp(lam * std_values))
    import mpmath as mp

    alpha = mp.mpf(spec.alpha_ep)
    scale = mp.sqrt(mp.gamma(3.0 / alpha) / mp.gamma(1.0 / alpha))
    z_half = mp.gamma(1.0 + 1.0 / alpha)
    val = mp.quad(lambda x: mp.cosh(lam * x / scale) * mp.exp(-(x**alpha)), [0, 60])
    return float(val / z_half)


class TestDeterminism:
    """Bit-identical output for equal (seed, path); fresh output otherwise."""

    def test_identical_streams_identical_matrices(self):
        for spec in SUBGAUSSIAN_SPECS:
            a = sample_matrix(spec, 13, 7, SeededStream(42, (3, 1)))
            b = sample_matrix(spec, 13, 7, SeededStream(42, (3, 1)))
            assert np.array_equal(a, b)

    def test_child_paths_differ(self):
        root = SeededStream(42)
        a = sample_matrix(gaussian(), 8, 8, root.child(0))
        b = sample_matrix(gaussian(), 8, 8, root.child(1))
        assert not np.array_equal(a, b)

    def test_child_composes(self):
        root = SeededStream(7)
        assert root.child(2, 5) == root.child(2).child(5)

    def test_empty_matrix(self):
        out = sample_matrix(gaussian(), 0, 5, SeededStream(42))
        assert out.shape == (0, 5)

    def test_bad_shapes_rejected(self):
        with pytest.raises(ValueError):
            sample_matrix(gaussian(), -1, 5, SeededStream(42))
        with pytest.raises(ValueError):
            sample_matrix(gaussian(), 5, 0, SeededStream(42))


class TestStandardization:
    """Entries are mean 0 and variance 1 for every family."""

    @pytest.mark.parametrize("spec", SUBGAUSSIAN_SPECS, ids=format_disorder)
    def test_first_two_moments(self, spec):
        x = sample_matrix(spec, 1000, 1000, SeededStream(42, (11,))).ravel()
        assert abs(x.mean()) <= 4e-3
        assert 0.99 <= x.var() <= 1.01

    def test_rademacher_support(self):
        x = sample_matrix(rademacher(), 200, 50, SeededStream(42))
        assert set(np.unique(x)) == {-1.0, 1.0}

    def test_uniform_support(self):
        x = sample_matrix(uniform(), 200, 50, SeededStream(42))
        assert np.all(np.abs(x) <= math.sqrt(3.0))

    def test_discrete_standardizes_exactly(self):
        """Support {0, 2} with equal weights standardizes to exact +-1."""
        spec = discrete([(0.0, 0.5), (2.0, 0.5)])
        x = sample_matrix(spec, 100, 20, SeededStream(42))
        assert set(np.unique(x)) == {-1.0, 1.0}
        assert spec.integer_valued

    def test_exp_power_two_matches_gaussian_shape(self):
        """alpha = 2 is the gaussian law: fourth moment 3 to MC tolerance."""
        x = sample_matrix(exponential_power(2.0), 1000, 1000, SeededStream(42, (5,))).ravel()
        m4 = float((x**4).mean())
        se = float((x**8).mean() - m4 * m4) ** 0.5 / math.sqrt(x.size)
        assert abs(m4 - 3.0) <= 5.0 * se + 1e-3

    def test_integer_valued_flags(self):
        assert rademacher().integer_valued
        assert not gaussian().integer_valued
        assert not uniform().integer_valued
        assert not discrete([(-1.0, 0.25), (0.0, 0.5), (3.0, 0.25)]).integer_valued


class TestVarianceProxy:
    """nu >= 1, exact where known, certified numerically otherwise."""

    def test_exact_families(self):
        assert variance_proxy(gaussian()) == 1.0
        assert variance_proxy(rademacher()) == 1.0
        assert variance_proxy(uniform()) == 1.0
        assert variance_proxy(exponential_power(2.0)) == 1.0

    def test_certified_families_finite_and_at_least_one(self):
        for alpha in (2.1, 2.5, 3.0, 4.0):
            nu = variance_proxy(exponential_power(alpha))
            assert math.isfinite(nu)
            assert nu >= 1.0

    def test_discrete_hoeffding_bound(self):
        """Support {0, 2} standardizes to +-1, so the range bound gives 1."""
        assert variance_proxy(discrete([(0.0, 0.5), (2.0, 0.5)])) == 1.0

    def test_non_subgaussian_rejected(self):
        spec = exponential_power(1.5)
        assert not spec.subgaussian
        with pytest.raises(ValueError):
            variance_proxy(spec)

    @pytest.mark.parametrize("spec", SUBGAUSSIAN_SPECS, ids=format_disorder)
    def test_analytic_mgf_bound(self, spec):
        """E exp(lam X) <= exp(lam^2 nu / 2) on a lambda grid, by closed form
        or quadrature, independently of the sampler."""
        nu = variance_proxy(spec)
        grid = np.linspace(-10.0, 10.0, 21) if spec.family == "exponential_power" else np.linspace(-10.0, 10.0, 41)
        for lam in grid:
            lam = float(lam)
            if lam == 0.0:
                continue
            mgf = _analytic_mgf(spec, lam)
            assert mgf <= math.exp(lam * lam * nu / 2.0) * (1.0 + 1e-9)

    @pytest.mark.parametrize("spec", SUBGAUSSIAN_SPECS, ids=format_disorder)
    def test_empirical_mgf_bound(self, spec):
        """Sample mean of exp(lam X) over 10^6 draws stays within the proxy
        bound padded by five standard errors."""
        nu = variance_proxy(spec)
        x = sample_matrix(spec, 1000, 1000, SeededStream(42, (7,))).ravel()
        for lam in (0.5, 1.0, 2.0, 4.0, -0.5, -1.0, -2.0, -4.0):
            e = np.exp(lam * x)
            mean = float(e.mean())
            se = float(e.std(ddof=1)) / math.sqrt(e.size)
            assert mean <= math.exp(lam * lam * nu / 2.0) * (1.0 + 5.0 * se / mean)

    def test_exp_power_scale_matches_quadrature(self):
        """The lgamma closed form for the raw standard deviation agrees with
        direct quadrature of the density."""
        for alpha in (2.0, 2.5, 3.0):
            m2, _ = quad(lambda x: x * x * math.exp(-(x**alpha)), 0.0, 60.0)
            z, _ = quad(lambda x: math.exp(-(x**alpha)), 0.0, 60.0)
            closed = math.exp(0.5 * (math.lgamma(3.0 / alpha) - math.lgamma(1.0 / alpha)))
            np.testing.assert_allclose(math.sqrt(m2 / z), closed, rtol=1e-10)


class TestThirdMoment:
    """E |X|^3 is finite and stable across independent batches."""

    @pytest.mark.parametrize("spec", SUBGAUSSIAN_SPECS, ids=format_disorder)
    def test_batch_stability(self, spec):
        root = SeededStream(42, (13,))
        batch_means = []
        for b in range(10):
            x = sample_matrix(spec, 100, 1000, root.child(b)).ravel()
            batch_means.append(float((np.abs(x) ** 3).mean()))
        batch_means = np.array(batch_means)
        assert np.all(np.isfinite(batch_means))
        assert batch_means.max() - batch_means.min() < 0.5
        assert batch_means.max() < 10.0


class TestSerialization:
    """format_disorder and parse_disorder are inverse."""

    @pytest.mark.parametrize("spec", SUBGAUSSIAN_SPECS, ids=format_disorder)
    def test_round_trip(self, spec):
        assert parse_disorder(format_disorder(spec)) == spec

    def test_bare_and_call_forms(self):
        assert parse_disorder("gaussian") == gaussian()
        assert parse_disorder("gaussian()") == gaussian()
        assert parse_disorder(" rademacher ") == rademacher()

    def test_exponent_form(self):
        assert parse_disorder("exponential_power(2.5)") == exponential_power(2.5)

    def test_discrete_form(self):
        got = parse_disorder("discrete(-1.0:0.25,0.0:0.5,3.0:0.25)")
        assert got == discrete([(-1.0, 0.25), (0.0, 0.5), (3.0, 0.25)])

    def test_parse_errors(self):
        for text in ("gauss", "exponential_power(abc)", "discrete(1)", "discrete(1:0.5:2)", ""):
            with pytest.raises(ValueError):
                parse_disorder(text)

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError):
            exponential_power(0.5)
        with pytest.raises(ValueError):
            discrete([(1.0, 0.5), (2.0, 0.6)])
        with pytest.raises(ValueError):
            discrete([(1.0, 1.0)])
        with pytest.raises(ValueError):
            discrete([(1.0, 0.5), (2.0, -0.5)])
        with pytest.raises(ValueError):
            DisorderSpec("lognormal")
