"""Disorder families: samplers with mean 0, variance 1, and variance-proxy metadata.

Families: gaussian, rademacher, uniform, exponential_power(alpha_ep) with
density exp(-|x|^alpha)/z_alpha (subgaussian iff alpha_ep >= 2), and discrete
finite-support laws (standardized internally). The rademacher family emits
exact +-1 values so downstream dot products can run in integer arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .streams import SeededStream

__all__ = [
    "DisorderSpec",
    "gaussian",
    "rademacher",
    "uniform",
    "exponential_power",
    "discrete",
    "sample_matrix",
    "variance_proxy",
    "parse_disorder",
    "format_disorder",
]

_UNIFORM_HALF_WIDTH = math.sqrt(3.0)  # variance of uniform(-sqrt 3, sqrt 3) is 1


@dataclass(frozen=True)
class DisorderSpec:
    family: str
    alpha_ep: float | None = None
    support: tuple[tuple[float, float], ...] | None = None  # (value, probability) pairs

    def __post_init__(self) -> None:
        if self.family not in ("gaussian", "rademacher", "uniform", "exponential_power", "discrete"):
            raise ValueError(f"unknown disorder family {self.family!r}")
        if self.family == "exponential_power":
            if self.alpha_ep is None or not self.alpha_ep >= 1.0:
                raise ValueError(f"exponential_power needs exponent >= 1, got {self.alpha_ep}")
        if self.family == "discrete":
            _validate_support(self.support)

    @property
    def subgaussian(self) -> bool:
        if self.family == "exponential_power":
            return self.alpha_ep >= 2.0
        return True

    @property
    def integer_valued(self) -> bool:
        """True when standardized samples are exact integers (enables the integer dot-product path)."""
        if self.family == "rademacher":
            return True
        if self.family == "discrete":
            values = _standardized_support(self.support)[0]
            return bool(np.all(values == np.round(values)) and np.max(np.abs(values)) < 2**20)
        return False


def _validate_support(support) -> None:
    if not support:
        raise ValueError("discrete disorder needs a nonempty support")
    probs = np.array([p for _, p in support], dtype=np.float64)
    values = np.array([v for v, _ in support], dtype=np.float64)
    if np.any(probs <= 0.0):
        raise ValueError("discrete support probabilities must be positive")
    if abs(probs.sum() - 1.0) > 1e-9:
        raise ValueError(f"discrete support probabilities must sum to 1, got {probs.sum()}")
    mean = float(values @ probs / probs.sum())
    var = float(((values - mean) ** 2) @ probs / probs.sum())
    if var <= 0.0:
        raise ValueError("discrete support must have positive variance")


def _standardized_support(support) -> tuple[np.ndarray, np.ndarray]:
    probs = np.array([p for _, p in support], dtype=np.float64)
    probs = probs / probs.sum()
    values = np.array([v for v, _ in support], dtype=np.float64)
    mean = float(values @ probs)
    sd = math.sqrt(float(((values - mean) ** 2) @ probs))
    return (values - mean) / sd, probs


def gaussian() -> DisorderSpec:
    return DisorderSpec("gaussian")


def rademacher() -> DisorderSpec:
    return DisorderSpec("rademacher")


def uniform() -> DisorderSpec:
    return DisorderSpec("uniform")


def exponential_power(alpha_ep: float) -> DisorderSpec:
    return DisorderSpec("exponential_power", alpha_ep=float(alpha_ep))


def discrete(support) -> DisorderSpec:
    return DisorderSpec("discrete", support=tuple((float(v), float(p)) for v, p in support))


def _exp_power_scale(alpha: float) -> float:
    # raw variance of density exp(-|x|^alpha)/z is Gamma(3/a)/Gamma(1/a)
    return math.exp(0.5 * (math.lgamma(3.0 / alpha) - math.lgamma(1.0 / alpha)))


def sample_matrix(spec: DisorderSpec, m: int, n: int, stream: SeededStream) -> np.ndarray:
    """An m x n matrix of i.i.d. standardized entries, deterministic given the stream."""
    if m < 0 or n < 1:
        raise ValueError(f"sample_matrix needs m >= 0 and n >= 1, got m={m}, n={n}")
    rng = stream.generator()
    shape = (m, n)
    if spec.family == "gaussian":
        return rng.standard_normal(shape)
    if spec.family == "rademacher":
        return (rng.integers(0, 2, size=shape) * 2 - 1).astype(np.float64)
    if spec.family == "uniform":
        return rng.uniform(-_UNIFORM_HALF_WIDTH, _UNIFORM_HALF_WIDTH, size=shape)
    if spec.family == "exponential_power":
        # |X| = G^(1/alpha) with G ~ Gamma(1/alpha, 1) has density prop. to exp(-x^alpha) on x >= 0
        alpha = spec.alpha_ep
        magnitude = rng.gamma(1.0 / alpha, 1.0, size=shape) ** (1.0 / alpha)
        signs = rng.integers(0, 2, size=shape) * 2 - 1
        return signs * magnitude / _exp_power_scale(alpha)
    values, probs = _standardized_support(spec.support)
    idx = rng.choice(len(values), size=shape, p=probs)
    return values[idx]


@lru_cache(maxsize=32)
def _exp_power_proxy(alpha: float) -> float:
    """Numerically certified variance proxy for the standardized exponential-power law.

    sup over a wide lambda grid of 2*log E exp(lambda X)/lambda^2 with the MGF
    integrated by quadrature; padded 2% and floored at 1. Possibly non-tight.
    """
    from scipy.integrate import quad

    scale = _exp_power_scale(alpha)
    z_half = math.gamma(1.0 + 1.0 / alpha)  # integral of exp(-x^alpha) over x >= 0

    def log_mgf(lam: float) -> float:
        # integrate cosh(lam x / scale) exp(-x^alpha) in log space: the raw
        # integrand overflows for alpha near 2 at large lam
        def log_integrand(x: float) -> float:
            t = abs(lam * x / scale)
            log_cosh = t + math.log1p(math.exp(-2.0 * t)) - math.log(2.0)
            return log_cosh - x**alpha

        x_peak = (abs(lam) / (scale * alpha)) ** (1.0 / (alpha - 1.0))
        shift = max(log_integrand(min(x_peak, 60.0)), log_integrand(0.0))
        val, _ = quad(lambda x: math.exp(log_integrand(x) - shift), 0.0, 60.0, limit=200)
        return shift + math.log(val) - math.log(z_half)

    worst = 0.0
    for lam in np.linspace(0.05, 30.0, 600):
        worst = max(worst, 2.0 * log_mgf(float(lam)) / lam**2)
    return max(1.0, 1.02 * worst)


def variance_proxy(spec: DisorderSpec) -> float:
    """nu with E exp(lambda xi) <= exp(lambda^2 nu / 2) for all lambda.

    Exact for gaussian and rademacher (both 1); uniform is 1 by the series
    comparison 3^k 2^k k! <= (2k+1)!; discrete uses the Hoeffding bound on its
    standardized range; exponential_power(alpha >= 2) is certified numerically.
    """
    if not spec.subgaussian:
        raise ValueError(f"variance proxy undefined: {format_disorder(spec)} is not subgaussian")
    if spec.family in ("gaussian", "rademacher", "uniform"):
        return 1.0
    if spec.family == "exponential_power":
        if spec.alpha_ep == 2.0:
            return 1.0
        return _exp_power_proxy(float(spec.alpha_ep))
    values, _ = _standardized_support(spec.support)
    half_range = float(values.max() - values.min()) / 2.0
    return max(1.0, half_range**2)


def format_disorder(spec: DisorderSpec) -> str:
    """Config-file representation; parse_disorder inverts it."""
    if spec.family == "exponential_power":
        return f"exponential_power({spec.alpha_ep!r})"
    if spec.family == "discrete":
        body = ",".join(f"{v!r}:{p!r}" for v, p in spec.support)
        return f"discrete({body})"
    return spec.family


def parse_disorder(text: str) -> DisorderSpec:
    """Parse 'gaussian', 'rademacher', 'uniform', 'exponential_power(a)', or
    'discrete(v:p,v:p,...)'."""
    text = text.strip()
    if text.endswith("()"):
        text = text[:-2]
    if text in ("gaussian", "rademacher", "uniform"):
        return DisorderSpec(text)
    if text.startswith("exponential_power(") and text.endswith(")"):
        body = text[len("exponential_power(") : -1]
        try:
            return exponential_power(float(body))
        except ValueError as exc:
            raise ValueError(f"cannot parse disorder {text!r}: {exc}") from None
    if text.startswith("discrete(") and text.endswith(")"):
        body = text[len("discrete(") : -1]
        pairs = []
        for piece in body.split(","):
            parts = piece.split(":")
            if len(parts) != 2:
                raise ValueError(f"cannot parse discrete support entry {piece!r}")
            try:
                pairs.append((float(parts[0]), float(parts[1])))
            except ValueError:
                raise ValueError(f"bad number in discrete support entry {piece!r}") from None
        return discrete(pairs)
    raise ValueError(f"cannot parse disorder {text!r}")
