"""{0,1}-valued activation functions and their soft truncations.

Every activation is a finite union of closed intervals on the normalized
constraint value x = (xi, sigma)/sqrt(N). Boundaries are closed by convention:
with discrete disorder the boundary carries an atom, so the convention is
observable and must be fixed once, here.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Activation",
    "SoftActivation",
    "half_space",
    "interval",
    "symmetric_interval",
    "union_of_intervals",
    "never_satisfied",
    "evaluate",
    "evaluate_many",
    "soft_log",
    "contains_interval",
    "gaussian_mass",
    "decay_rate",
    "parse_activation",
    "format_activation",
]


@dataclass(frozen=True)
class Activation:
    """An indicator of a finite union of closed intervals.

    kind: one of half_space / interval / symmetric_interval / union_of_intervals.
    intervals: normalized closed intervals (lo, hi), sorted, pairwise disjoint;
        hi may be +inf for a half-space. An empty tuple is the constant-zero
        activation.
    """

    kind: str
    intervals: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        prev_hi = -math.inf
        for lo, hi in self.intervals:
            if math.isnan(lo) or math.isnan(hi):
                raise ValueError("activation interval endpoints must not be NaN")
            if not lo < hi:
                raise ValueError(f"activation interval needs lo < hi, got [{lo}, {hi}]")
            if lo <= prev_hi:
                raise ValueError("activation intervals must be sorted and pairwise disjoint")
            prev_hi = hi
        if self.intervals and math.isinf(self.intervals[0][0]) and self.intervals[0][0] < 0:
            raise ValueError("lower endpoints must be finite")


@dataclass(frozen=True)
class SoftActivation:
    """Soft truncation of an activation: log-scale value 0 where U=1 and -A where U=0."""

    base: Activation
    a_trunc: float

    def __post_init__(self) -> None:
        if not self.a_trunc > 0.0:
            raise ValueError(f"truncation level must be positive, got {self.a_trunc}")


def half_space(kappa: float) -> Activation:
    """U(x) = 1{x >= kappa} (closed)."""
    return Activation("half_space", ((float(kappa), math.inf),))


def interval(a: float, b: float) -> Activation:
    """U(x) = 1{a <= x <= b} with finite a < b."""
    a, b = float(a), float(b)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError(f"interval endpoints must be finite, got [{a}, {b}]")
    return Activation("interval", ((a, b),))


def symmetric_interval(kappa: float) -> Activation:
    """U(x) = 1{|x| <= kappa} with kappa > 0."""
    kappa = float(kappa)
    if not kappa > 0.0:
        raise ValueError(f"symmetric_interval needs kappa > 0, got {kappa}")
    return Activation("symmetric_interval", ((-kappa, kappa),))


def union_of_intervals(intervals) -> Activation:
    """U(x) = 1{x in any of the given closed intervals}; an empty union is U = 0."""
    ivs = tuple((float(a), float(b)) for a, b in intervals)
    for a, b in ivs:
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"union members must be finite intervals, got [{a}, {b}]")
    return Activation("union_of_intervals", ivs)


def never_satisfied() -> Activation:
    """The constant-zero activation (empty union)."""
    return Activation("union_of_intervals", ())


def evaluate(u: Activation, x: float) -> int:
    """Indicator of membership; intervals and half-spaces are closed."""
    for lo, hi in u.intervals:
        if lo <= x <= hi:
            return 1
    return 0


def evaluate_many(u: Activation, x: np.ndarray) -> np.ndarray:
    """Vectorized evaluate: boolean membership array with x's shape."""
    x = np.asarray(x, dtype=np.float64)
    sat = np.zeros(x.shape, dtype=bool)
    for lo, hi in u.intervals:
        sat |= (x >= lo) & (x <= hi)
    return sat


def soft_log(su: SoftActivation, x: float) -> float:
    """0 where the base activation holds, -A where it does not."""
    return 0.0 if evaluate(su.base, x) else -su.a_trunc


def contains_interval(u: Activation) -> tuple[float, float] | None:
    """A maximal finite closed interval on which U = 1, or None for U = 0.

    Half-spaces return (kappa, kappa + 1): any finite witness works. Among
    several finite intervals the widest wins (ties: the leftmost).
    """
    if not u.intervals:
        return None
    best = None
    best_width = -math.inf
    for lo, hi in u.intervals:
        if math.isinf(hi):
            cand = (lo, lo + 1.0)
            width = 1.0
        else:
            cand = (lo, hi)
            width = hi - lo
        if width > best_width:
            best, best_width = cand, width
    return best


def _phi(x: float) -> float:
    return 0.5 * math.erfc(-x / math.sqrt(2.0))


def gaussian_mass(u: Activation) -> float:
    """p = E U(g) for standard gaussian g, as an exact Phi-difference sum."""
    mass = 0.0
    for lo, hi in u.intervals:
        if math.isinf(hi):
            mass += 0.5 * math.erfc(lo / math.sqrt(2.0))
        else:
            mass += _phi(hi) - _phi(lo)
    return min(max(mass, 0.0), 1.0)


def decay_rate(u: Activation) -> float:
    """c = -log E U(g), the per-constraint annealed decay rate; needs 0 < p < 1."""
    p = gaussian_mass(u)
    if p <= 0.0 or p >= 1.0:
        raise ValueError(f"decay_rate undefined at gaussian mass {p}")
    return -math.log(p)


_CALL_RE = re.compile(r"^([a-z_]+)\((.*)\)$")


def format_activation(u: Activation) -> str:
    """Config-file representation; parse_activation inverts it."""
    if u.kind == "half_space":
        return f"half_space({u.intervals[0][0]!r})"
    if u.kind == "interval":
        lo, hi = u.intervals[0]
        return f"interval({lo!r},{hi!r})"
    if u.kind == "symmetric_interval":
        return f"symmetric_interval({u.intervals[0][1]!r})"
    body = ",".join(f"[{lo!r},{hi!r}]" for lo, hi in u.intervals)
    return f"union({body})"


def parse_activation(text: str) -> Activation:
    """Parse 'half_space(k)', 'interval(a,b)', 'symmetric_interval(k)', or
    'union([a,b],[c,d],...)' (empty union allowed: 'union()')."""
    text = text.strip()
    m = _CALL_RE.match(text)
    if m is None:
        raise ValueError(f"cannot parse activation {text!r}")
    name, body = m.group(1), m.group(2).strip()
    if name == "half_space":
        return half_space(_parse_float(body, text))
    if name == "symmetric_interval":
        return symmetric_interval(_parse_float(body, text))
    if name == "interval":
        parts = body.split(",")
        if len(parts) != 2:
            raise ValueError(f"interval needs two endpoints: {text!r}")
        return interval(_parse_float(parts[0], text), _parse_float(parts[1], text))
    if name == "union":
        if body == "":
            return never_satisfied()
        pairs = re.findall(r"\[([^\[\]]*)\]", body)
        leftover = re.sub(r"\[[^\[\]]*\]|,|\s", "", body)
        if not pairs or leftover:
            raise ValueError(f"cannot parse union body in {text!r}")
        ivs = []
        for pair in pairs:
            parts = pair.split(",")
            if len(parts) != 2:
                raise ValueError(f"union member needs two endpoints: {text!r}")
            ivs.append((_parse_float(parts[0], text), _parse_float(parts[1], text)))
        return union_of_intervals(ivs)
    raise ValueError(f"unknown activation kind {name!r}")


def _parse_float(piece: str, context: str) -> float:
    try:
        return float(piece.strip())
    except ValueError:
        raise ValueError(f"bad numeric literal {piece!r} in activation {context!r}") from None
