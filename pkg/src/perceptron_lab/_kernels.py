"""Gray-code enumeration kernels: numba-accelerated with a pure-numpy fallback.

The hot loop visits all 2^n sign configurations in Gray-code order and keeps
every constraint dot product current under single-spin flips (O(M) work per
config). The traversal is cut into fixed segments of 2^20 codes; each segment
re-derives its dot products from scratch, which both bounds float drift and
makes per-config arithmetic independent of how segments are scheduled, so
results are bit-identical for any thread count.

Dot products live on the unnormalized scale (xi, sigma); the caller pre-scales
activation boundaries by sqrt(n) (integer-snapped for integer disorder).
Constraint k is satisfied iff lo[i] <= d_k <= hi[i] for some interval i.

Backend selection: the numba path is the default whenever numba imports;
setting PERCEPTRON_LAB_NO_NUMBA=1 forces the numpy fallback, which evaluates
the same segments by chunked matrix products. PERCEPTRON_LAB_THREADS caps the
worker threads used to spread segments (default: cpu count).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

SEGMENT_BITS = 20
_CHUNK_BITS = 14  # numpy fallback: configs per matrix product

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        def wrap(fn):
            return fn

        if args and callable(args[0]):
            return args[0]
        return wrap


USE_NUMBA = HAS_NUMBA and os.environ.get("PERCEPTRON_LAB_NO_NUMBA", "") not in ("1", "true", "yes")


def thread_count() -> int:
    raw = os.environ.get("PERCEPTRON_LAB_THREADS", "")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            return 1
    return os.cpu_count() or 1


def _segments(n: int) -> list[tuple[int, int]]:
    total = 1 << n
    step = 1 << SEGMENT_BITS
    return [(c0, min(c0 + step, total)) for c0 in range(0, total, step)]


# ---------------------------------------------------------------------------
# numba segment kernels


@njit(cache=True, nogil=True, inline="always")
def _tz(t):
    b = 0
    while not (t >> b) & 1:
        b += 1
    return b


@njit(cache=True, nogil=True, inline="always")
def _init_state(xi_t, c0, sign, dots):
    n, m = xi_t.shape
    g0 = c0 ^ (c0 >> 1)
    for i in range(n):
        sign[i] = 1 if (g0 >> i) & 1 else -1
    for k in range(m):
        dots[k] = 0
    for i in range(n):
        if sign[i] > 0:
            for k in range(m):
                dots[k] += xi_t[i, k]
        else:
            for k in range(m):
                dots[k] -= xi_t[i, k]


@njit(cache=True, nogil=True, inline="always")
def _advance(xi_t, sign, dots, t):
    b = _tz(t)
    m = dots.shape[0]
    if sign[b] > 0:
        for k in range(m):
            dots[k] -= 2 * xi_t[b, k]
        sign[b] = -1
    else:
        for k in range(m):
            dots[k] += 2 * xi_t[b, k]
        sign[b] = 1


@njit(cache=True, nogil=True, inline="always")
def _all_satisfied(dots, lo, hi):
    m = dots.shape[0]
    n_iv = lo.shape[0]
    for k in range(m):
        sat = False
        for j in range(n_iv):
            if lo[j] <= dots[k] <= hi[j]:
                sat = True
                break
        if not sat:
            return False
    return True


@njit(cache=True, nogil=True, inline="always")
def _violations(dots, lo, hi):
    m = dots.shape[0]
    n_iv = lo.shape[0]
    v = 0
    for k in range(m):
        sat = False
        for j in range(n_iv):
            if lo[j] <= dots[k] <= hi[j]:
                sat = True
                break
        if not sat:
            v += 1
    return v


@njit(cache=True, nogil=True)
def _seg_count_nb(xi_t, lo, hi, c0, c1):
    n, m = xi_t.shape
    sign = np.empty(n, xi_t.dtype)
    dots = np.empty(m, xi_t.dtype)
    _init_state(xi_t, c0, sign, dots)
    count = 0
    if _all_satisfied(dots, lo, hi):
        count += 1
    for t in range(c0 + 1, c1):
        _advance(xi_t, sign, dots, t)
        if _all_satisfied(dots, lo, hi):
            count += 1
    return count


@njit(cache=True, nogil=True)
def _seg_hist_nb(xi_t, lo, hi, c0, c1, hist):
    n, m = xi_t.shape
    sign = np.empty(n, xi_t.dtype)
    dots = np.empty(m, xi_t.dtype)
    _init_state(xi_t, c0, sign, dots)
    hist[_violations(dots, lo, hi)] += 1
    for t in range(c0 + 1, c1):
        _advance(xi_t, sign, dots, t)
        hist[_violations(dots, lo, hi)] += 1


@njit(cache=True, nogil=True)
def _seg_pair_nb(xi_t, lo, hi, c0, c1):
    # xi_t carries m+1 columns; the last one is the candidate new constraint
    n, m1 = xi_t.shape
    m = m1 - 1
    sign = np.empty(n, xi_t.dtype)
    dots = np.empty(m1, xi_t.dtype)
    _init_state(xi_t, c0, sign, dots)
    z_m = 0
    z_both = 0
    n_iv = lo.shape[0]
    for t in range(c0, c1):
        if t > c0:
            _advance(xi_t, sign, dots, t)
        if _all_satisfied(dots[:m], lo, hi):
            z_m += 1
            for j in range(n_iv):
                if lo[j] <= dots[m] <= hi[j]:
                    z_both += 1
                    break
    return z_m, z_both


@njit(cache=True, nogil=True)
def _seg_exists_nb(xi_t, lo, hi, c0, c1):
    n, m = xi_t.shape
    sign = np.empty(n, xi_t.dtype)
    dots = np.empty(m, xi_t.dtype)
    _init_state(xi_t, c0, sign, dots)
    if _all_satisfied(dots, lo, hi):
        return True
    for t in range(c0 + 1, c1):
        _advance(xi_t, sign, dots, t)
        if _all_satisfied(dots, lo, hi):
            return True
    return False


@njit(cache=True, nogil=True)
def _seg_collect_nb(xi_t, lo, hi, c0, c1, out, pos):
    n, m = xi_t.shape
    sign = np.empty(n, xi_t.dtype)
    dots = np.empty(m, xi_t.dtype)
    _init_state(xi_t, c0, sign, dots)
    cap = out.shape[0]
    for t in range(c0, c1):
        if t > c0:
            _advance(xi_t, sign, dots, t)
        if _all_satisfied(dots, lo, hi):
            if pos >= cap:
                return -1
            out[pos] = t ^ (t >> 1)
            pos += 1
    return pos


@njit(cache=True, nogil=True)
def _final_dots_nb(xi_t, c0, c1):
    n, m = xi_t.shape
    sign = np.empty(n, xi_t.dtype)
    dots = np.empty(m, xi_t.dtype)
    _init_state(xi_t, c0, sign, dots)
    for t in range(c0 + 1, c1):
        _advance(xi_t, sign, dots, t)
    return dots


# ---------------------------------------------------------------------------
# numpy fallback: same segment contracts via chunked matrix products


def _chunk_signs(c0: int, c1: int, n: int, dtype) -> np.ndarray:
    codes = np.arange(c0, c1, dtype=np.int64)
    gray = codes ^ (codes >> 1)
    bits = (gray[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(dtype)


def _chunk_ranges(c0: int, c1: int):
    step = 1 << _CHUNK_BITS
    for start in range(c0, c1, step):
        yield start, min(start + step, c1)


def _sat_matrix(dots: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    sat = np.zeros(dots.shape, dtype=bool)
    for j in range(lo.shape[0]):
        sat |= (dots >= lo[j]) & (dots <= hi[j])
    return sat


def _seg_count_np(xi_t, lo, hi, c0, c1):
    xi = xi_t.T
    count = 0
    for a, b in _chunk_ranges(c0, c1):
        signs = _chunk_signs(a, b, xi.shape[1], xi.dtype)
        if xi.shape[0] == 0:
            count += b - a
            continue
        sat = _sat_matrix(signs @ xi.T, lo, hi)
        count += int(np.count_nonzero(sat.all(axis=1)))
    return count


def _seg_hist_np(xi_t, lo, hi, c0, c1, hist):
    xi = xi_t.T
    m = xi.shape[0]
    for a, b in _chunk_ranges(c0, c1):
        signs = _chunk_signs(a, b, xi.shape[1], xi.dtype)
        if m == 0:
            hist[0] += b - a
            continue
        sat = _sat_matrix(signs @ xi.T, lo, hi)
        v = m - sat.sum(axis=1)
        hist += np.bincount(v, minlength=m + 1).astype(np.int64)


def _seg_pair_np(xi_t, lo, hi, c0, c1):
    xi = xi_t.T
    m = xi.shape[0] - 1
    z_m = 0
    z_both = 0
    for a, b in _chunk_ranges(c0, c1):
        signs = _chunk_signs(a, b, xi.shape[1], xi.dtype)
        sat = _sat_matrix(signs @ xi.T, lo, hi)
        first = sat[:, :m].all(axis=1)
        z_m += int(np.count_nonzero(first))
        z_both += int(np.count_nonzero(first & sat[:, m]))
    return z_m, z_both


def _seg_exists_np(xi_t, lo, hi, c0, c1):
    xi = xi_t.T
    for a, b in _chunk_ranges(c0, c1):
        signs = _chunk_signs(a, b, xi.shape[1], xi.dtype)
        if xi.shape[0] == 0:
            return True
        sat = _sat_matrix(signs @ xi.T, lo, hi)
        if bool(sat.all(axis=1).any()):
            return True
    return False


def _seg_collect_np(xi_t, lo, hi, c0, c1, out, pos):
    xi = xi_t.T
    cap = out.shape[0]
    for a, b in _chunk_ranges(c0, c1):
        signs = _chunk_signs(a, b, xi.shape[1], xi.dtype)
        if xi.shape[0] == 0:
            good = np.arange(a, b, dtype=np.int64)
        else:
            sat = _sat_matrix(signs @ xi.T, lo, hi)
            good = np.arange(a, b, dtype=np.int64)[sat.all(axis=1)]
        if pos + good.shape[0] > cap:
            return -1
        out[pos : pos + good.shape[0]] = good ^ (good >> 1)
        pos += good.shape[0]
    return pos


def _final_dots_np(xi_t, c0, c1):
    # direct evaluation at the last code: the fallback has no incremental state
    xi = xi_t.T
    g = (c1 - 1) ^ ((c1 - 1) >> 1)
    bits = (g >> np.arange(xi.shape[1], dtype=np.int64)) & 1
    signs = (2 * bits - 1).astype(xi.dtype)
    return xi @ signs


# ---------------------------------------------------------------------------
# drivers


def _backend(name: str):
    table = {
        "count": (_seg_count_nb, _seg_count_np),
        "hist": (_seg_hist_nb, _seg_hist_np),
        "pair": (_seg_pair_nb, _seg_pair_np),
        "exists": (_seg_exists_nb, _seg_exists_np),
        "collect": (_seg_collect_nb, _seg_collect_np),
        "final_dots": (_final_dots_nb, _final_dots_np),
    }
    nb, fallback = table[name]
    return nb if USE_NUMBA else fallback


def _prepare(xi: np.ndarray, lo: np.ndarray, hi: np.ndarray):
    xi_t = np.ascontiguousarray(xi.T)
    lo = np.ascontiguousarray(lo, dtype=xi.dtype)
    hi = np.ascontiguousarray(hi, dtype=xi.dtype)
    return xi_t, lo, hi


def count_satisfying(xi: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> int:
    """Number of sign configurations satisfying every constraint."""
    xi_t, lo, hi = _prepare(xi, lo, hi)
    n = xi_t.shape[0]
    segs = _segments(n)
    fn = _backend("count")
    workers = min(thread_count(), len(segs))
    if workers > 1 and USE_NUMBA:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda seg: fn(xi_t, lo, hi, seg[0], seg[1]), segs))
    else:
        parts = [fn(xi_t, lo, hi, c0, c1) for c0, c1 in segs]
    return int(sum(parts))


def violation_histogram(xi: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """hist[v] = number of configurations violating exactly v constraints."""
    xi_t, lo, hi = _prepare(xi, lo, hi)
    n, m = xi_t.shape
    segs = _segments(n)
    fn = _backend("hist")
    workers = min(thread_count(), len(segs))

    def run(seg):
        part = np.zeros(m + 1, dtype=np.int64)
        fn(xi_t, lo, hi, seg[0], seg[1], part)
        return part

    if workers > 1 and USE_NUMBA:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, segs))
    else:
        parts = [run(seg) for seg in segs]
    total = np.zeros(m + 1, dtype=np.int64)
    for part in parts:
        total += part
    return total


def count_satisfying_pair(xi_plus: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> tuple[int, int]:
    """(count satisfying the first m rows, count also satisfying the last row)."""
    xi_t, lo, hi = _prepare(xi_plus, lo, hi)
    n = xi_t.shape[0]
    segs = _segments(n)
    fn = _backend("pair")
    workers = min(thread_count(), len(segs))
    if workers > 1 and USE_NUMBA:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda seg: fn(xi_t, lo, hi, seg[0], seg[1]), segs))
    else:
        parts = [fn(xi_t, lo, hi, c0, c1) for c0, c1 in segs]
    z_m = int(sum(p[0] for p in parts))
    z_both = int(sum(p[1] for p in parts))
    return z_m, z_both


def exists_satisfying(xi: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> bool:
    """Early-exit satisfiability scan in segment order."""
    xi_t, lo, hi = _prepare(xi, lo, hi)
    fn = _backend("exists")
    for c0, c1 in _segments(xi_t.shape[0]):
        if fn(xi_t, lo, hi, c0, c1):
            return True
    return False


def collect_satisfying(xi: np.ndarray, lo: np.ndarray, hi: np.ndarray, limit: int) -> np.ndarray | None:
    """Gray codes of all satisfying configurations in traversal order, or None
    if more than `limit` exist."""
    xi_t, lo, hi = _prepare(xi, lo, hi)
    out = np.empty(limit, dtype=np.int64)
    fn = _backend("collect")
    pos = 0
    for c0, c1 in _segments(xi_t.shape[0]):
        pos = fn(xi_t, lo, hi, c0, c1, out, pos)
        if pos < 0:
            return None
    return out[:pos].copy()


def final_dots(xi: np.ndarray) -> np.ndarray:
    """Dot products at the last Gray code after a full single-segment walk
    (numba path) or by direct evaluation (numpy path); drift diagnostic."""
    xi_t = np.ascontiguousarray(xi.T)
    total = 1 << xi_t.shape[0]
    return np.asarray(_backend("final_dots")(xi_t, 0, total))


def decode_codes(codes: np.ndarray, n: int) -> np.ndarray:
    """Sign matrix for config codes: sigma_i = +1 iff bit i is set."""
    bits = (codes[:, None] >> np.arange(n, dtype=np.int64)) & 1
    return (2 * bits - 1).astype(np.int8)
