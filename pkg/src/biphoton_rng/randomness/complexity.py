"""Lempel-Ziv 1976 phrase counting and its normalized complexity.

The parsing is the exhaustive history: each phrase is the shortest prefix of
the remaining input that cannot be copied from an earlier starting position
(sources may overlap into the phrase itself), and a final incomplete phrase
still counts. Normalization follows Kaspar and Schuster,
K = c(n) log2(n) / n, with no finite-size correction and no clamping, so
K > 1 occurs for short, strongly fluctuating series.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DataError, UsageError

#: below this length K fluctuates too much to be meaningful
RELIABLE_LENGTH = 64


def _as_bytes(bits) -> bytes:
    arr = np.ascontiguousarray(bits, dtype=np.uint8)
    if arr.ndim != 1:
        raise UsageError("bit input must be one-dimensional")
    if arr.size == 0:
        raise DataError("empty bit sequence")
    if arr.max() > 1:
        raise DataError("bits must be 0 or 1")
    return arr.tobytes()


#: above this length the suffix-array path wins over substring searches
_SA_CUTOFF = 4096


def lz76_phrase_count(bits) -> int:
    """Number of phrases c(n) in the LZ76 exhaustive-history parsing.

    Each phrase is one character longer than the longest prefix of the rest
    of the input that can be copied from an earlier starting position. Short
    inputs use C-speed substring searches; long ones compute the
    longest-previous-factor array from a suffix array, which is exact and
    O(n log n).
    """
    arr = np.ascontiguousarray(bits, dtype=np.uint8)
    if arr.size >= _SA_CUTOFF:
        return _phrase_count_from_lpf(_longest_previous_factor(arr))
    return _phrase_count_find(_as_bytes(arr))


def _phrase_count_find(s: bytes) -> int:
    """Substring-search parsing: a prefix of length k starting at l is
    copyable iff it occurs in s[0 : l + k - 1] (source start <= l - 1, overlap
    into the phrase allowed); the predicate is monotone in k, so grow
    exponentially then bisect."""
    n = len(s)
    c = 0
    l = 0
    while l < n:
        limit = n - l
        lo = 0  # longest copyable prefix found so far
        k = 1
        while k <= limit and s.find(s[l:l + k], 0, l + k - 1) != -1:
            lo = k
            k *= 2
        hi = min(k, limit + 1)  # shortest known-uncopyable length (or limit+1)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if s.find(s[l:l + mid], 0, l + mid - 1) != -1:
                lo = mid
            else:
                hi = mid
        l += min(lo + 1, limit)
        c += 1
    return c


def _phrase_count_from_lpf(lpf: np.ndarray) -> int:
    n = lpf.size
    c = 0
    l = 0
    while l < n:
        l += min(int(lpf[l]) + 1, n - l)
        c += 1
    return c


def _suffix_array(codes: np.ndarray) -> np.ndarray:
    """Suffix array by prefix doubling (numpy lexsorts)."""
    n = codes.size
    rank = codes.astype(np.int64)
    k = 1
    idx = np.arange(n)
    order = np.lexsort((np.zeros(n, dtype=np.int64), rank))
    while True:
        second = np.full(n, -1, dtype=np.int64)
        second[: n - k] = rank[k:]
        order = np.lexsort((second, rank))
        r1 = rank[order]
        r2 = second[order]
        changed = np.ones(n, dtype=bool)
        changed[1:] = (r1[1:] != r1[:-1]) | (r2[1:] != r2[:-1])
        new_rank = np.empty(n, dtype=np.int64)
        new_rank[order] = np.cumsum(changed) - 1
        rank = new_rank
        if rank[order[-1]] == n - 1:
            return order
        k *= 2


def _lcp_kasai(codes: np.ndarray, sa: np.ndarray) -> np.ndarray:
    """LCP[r] = longest common prefix of suffixes sa[r-1] and sa[r]."""
    n = codes.size
    rank = np.empty(n, dtype=np.int64)
    rank[sa] = np.arange(n)
    lcp = np.zeros(n, dtype=np.int64)
    s = codes.tolist()
    sa_l = sa.tolist()
    rank_l = rank.tolist()
    h = 0
    for i in range(n):
        r = rank_l[i]
        if r > 0:
            j = sa_l[r - 1]
            while i + h < n and j + h < n and s[i + h] == s[j + h]:
                h += 1
            lcp[r] = h
            if h:
                h -= 1
        else:
            h = 0
    return lcp


def _longest_previous_factor(codes: np.ndarray) -> np.ndarray:
    """LPF[i] = length of the longest prefix of s[i:] that also occurs at
    some position j < i (the copy may overlap position i)."""
    n = codes.size
    sa = _suffix_array(codes)
    lcp = _lcp_kasai(codes, sa)
    lpf = np.zeros(n, dtype=np.int64)
    # stack sweep over the suffix array with a -1 sentinel (Crochemore-Ilie)
    sa_l = sa.tolist() + [-1]
    lcp_l = lcp.tolist() + [0]
    stack: list[list[int]] = []  # entries [position, lcp-to-previous-on-stack]
    for r in range(n + 1):
        pos = sa_l[r]
        cur = lcp_l[r]
        while stack and (pos < stack[-1][0] or (pos > stack[-1][0] and cur <= stack[-1][1])):
            top_pos, top_lcp = stack.pop()
            if pos < top_pos:
                lpf[top_pos] = max(top_lcp, cur)
                cur = min(top_lcp, cur)
            else:
                lpf[top_pos] = top_lcp
        if r < n:
            stack.append([pos, cur])
    return lpf


def _lz76_phrase_count_reference(bits) -> int:
    """Direct character-by-character parsing; oracle for the fast version."""
    s = _as_bytes(bits)
    n = len(s)
    c = 0
    l = 0
    while l < n:
        k_best = 0
        for i in range(l):
            # the source at i may run past l (self-referential copies allowed)
            k = 0
            while l + k < n and s[i + k] == s[l + k]:
                k += 1
                if k > k_best:
                    k_best = k
        l += min(k_best + 1, n - l)
        c += 1
    return c


def normalized_complexity(bits) -> float:
    """Kaspar-Schuster normalized complexity K = c(n) log2(n) / n."""
    arr = np.ascontiguousarray(bits, dtype=np.uint8)
    n = int(arr.size)
    if n < 2:
        raise DataError("need at least 2 bits for a complexity estimate")
    if n < RELIABLE_LENGTH:
        warnings.warn(f"complexity of a {n}-bit series is unreliable (n < {RELIABLE_LENGTH})",
                      stacklevel=2)
    return lz76_phrase_count(arr) * np.log2(n) / n


@dataclass(frozen=True)
class ComplexityResult:
    phrase_count: int
    normalized: float
    threshold_kind: str  # "mean" labels Kc, "median" labels Km, "none" raw bits


def complexity_of(binary_series) -> ComplexityResult:
    """Complexity of a BinarySeries, labeled by its threshold kind."""
    k = normalized_complexity(binary_series.bits)
    return ComplexityResult(lz76_phrase_count(binary_series.bits), k,
                            binary_series.threshold_kind)
