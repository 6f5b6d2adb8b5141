"""Closed-form quantities used throughout the experiments and as test oracles.

All functions are pure double-precision scalar evaluations with the endpoint
convention 0*log(0) = 0.
"""

from __future__ import annotations

import math

__all__ = [
    "k2",
    "psi2",
    "rel_entropy",
    "truncated_log",
    "sudakov_lower",
    "all_fail_bound",
    "log_delta_gap",
]

LOG2 = math.log(2.0)


def k2(t: float) -> float:
    """Binary relative entropy of the overlap level t in [-1, 1].

    k2(t) = ((1+t)/2) log(1+t) + ((1-t)/2) log(1-t). Symmetric in t <-> -t,
    with k2(0) = 0 and k2(+-1) = log 2.
    """
    t = float(t)
    if not -1.0 <= t <= 1.0:
        raise ValueError(f"k2: overlap level must lie in [-1, 1], got {t}")
    if t == 1.0 or t == -1.0:
        return LOG2
    if t == 0.0:
        return 0.0
    # log1p keeps the evaluation stable both near t = 0 and near |t| = 1.
    return 0.5 * (1.0 + t) * math.log1p(t) + 0.5 * (1.0 - t) * math.log1p(-t)


def psi2(eps: float) -> float:
    """log 2 - k2(1 - eps) for eps in [0, 2]; zero at eps = 0, strictly increasing on [0, 1]."""
    eps = float(eps)
    if not 0.0 <= eps <= 2.0:
        raise ValueError(f"psi2: separation level must lie in [0, 2], got {eps}")
    return LOG2 - k2(1.0 - eps)


def rel_entropy(a: float, p: float) -> float:
    """Relative entropy H(a|p) between Bernoulli(a) and Bernoulli(p).

    Nonnegative, zero iff a = p. Satisfies H(t*p|p) >= t*p*log(t/e) whenever
    0 <= t*p <= 1.
    """
    a = float(a)
    p = float(p)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"rel_entropy: a must lie in [0, 1], got {a}")
    if p <= 0.0 or p >= 1.0:
        if p in (0.0, 1.0) and a == p:
            return 0.0
        raise ValueError(f"rel_entropy: p must lie in (0, 1), got {p} (with a={a})")
    first = 0.0 if a == 0.0 else a * math.log(a / p)
    second = 0.0 if a == 1.0 else (1.0 - a) * math.log((1.0 - a) / (1.0 - p))
    return first + second


def truncated_log(log_z: float, n: int, delta: float) -> float:
    """max(log_z, n*delta); log_z may be -inf (the Z = 0 event)."""
    if n < 1:
        raise ValueError(f"truncated_log: n must be >= 1, got {n}")
    if not delta > 0.0:
        raise ValueError(f"truncated_log: delta must be positive, got {delta}")
    return max(float(log_z), n * float(delta))


def sudakov_lower(eps: float, n: int) -> float:
    """Minoration floor sqrt(eps * log(n) / 2) for the expected maximum of n
    standard gaussians at pairwise correlation <= 1 - eps."""
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"sudakov_lower: eps must lie in (0, 1], got {eps}")
    if n < 1:
        raise ValueError(f"sudakov_lower: n must be >= 1, got {n}")
    return math.sqrt(eps * math.log(n) / 2.0)


def all_fail_bound(eps: float, n: int) -> tuple[float, float]:
    """Threshold sqrt(eps * log n)/2 and bound n^(-eps/50) for the event that
    every one of n eps-correlated gaussians stays below the threshold."""
    eps = float(eps)
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"all_fail_bound: eps must lie in (0, 1], got {eps}")
    if n < 2:
        raise ValueError(f"all_fail_bound: n must be >= 2, got {n}")
    threshold = math.sqrt(eps * math.log(n)) / 2.0
    return threshold, n ** (-eps / 50.0)


def log_delta_gap(x: float, y: float, gamma: float) -> tuple[float, float]:
    """Truncated-log gap and its lower bound for 0 <= y <= x <= 1, gamma < 0.

    With log_G(z) = max(log z, gamma): returns
    (gap, lower) = (log_G(y) - log_G(x), log_G(y/x)), which satisfy
    0 >= gap >= lower.
    """
    x = float(x)
    y = float(y)
    gamma = float(gamma)
    if not (0.0 <= y <= x <= 1.0):
        raise ValueError(f"log_delta_gap: need 0 <= y <= x <= 1, got x={x}, y={y}")
    if not gamma < 0.0:
        raise ValueError(f"log_delta_gap: gamma must be negative, got {gamma}")

    def log_trunc(z: float) -> float:
        return max(math.log(z) if z > 0.0 else -math.inf, gamma)

    gap = log_trunc(y) - log_trunc(x)
    ratio = 1.0 if x == y else (y / x if x > 0.0 else 1.0)
    # The real-number inequality gap >= log_trunc(ratio) can lose to one ulp of
    # float rounding (log(y) - log(x) vs log(y/x) agree exactly over the reals
    # when nothing truncates); clamp the certificate back under the gap.
    return gap, min(log_trunc(ratio), gap)
