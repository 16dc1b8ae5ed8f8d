"""Brute-force reference implementations used to check the fast paths."""
from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .errors import EmptyInputError

MAX_BRUTE_DTW_LENGTH = 8


def _dist(p, q):
    dr = float(p[0] - q[0])
    dc = float(p[1] - q[1])
    return math.sqrt(dr * dr + dc * dc)


def brute_force_dtw(a, b) -> float:
    """Minimum of (path cost / path length) over all alignment paths.

    Enumerates every monotone path by depth-first search; the running cost is
    accumulated in path order.
    """
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    n, m = len(a), len(b)
    if n == 0 or m == 0:
        raise EmptyInputError("DTW needs non-empty sequences")
    if n > MAX_BRUTE_DTW_LENGTH or m > MAX_BRUTE_DTW_LENGTH:
        raise ValueError(f"brute force is capped at length {MAX_BRUTE_DTW_LENGTH}")
    cost = [[_dist(a[i], b[j]) for j in range(m)] for i in range(n)]
    best = math.inf
    stack = [(0, 0, cost[0][0], 1)]
    while stack:
        i, j, total, length = stack.pop()
        if i == n - 1 and j == m - 1:
            best = min(best, total / length)
            continue
        for di, dj in ((1, 0), (0, 1), (1, 1)):
            if i + di < n and j + dj < m:
                stack.append((i + di, j + dj, total + cost[i + di][j + dj], length + 1))
    return best


# LOWER[k, i] = 1 for i <= k: row k selects class 0 of threshold k
_LOWER = np.tril(np.ones((256, 256), dtype=np.int64))


def brute_force_otsu(histogram) -> int:
    """Exhaustive scan of k = 0..255 maximising w0*w1*(mu0 - mu1)^2 in exact arithmetic.

    Class counts and intensity sums are taken directly per threshold (masked
    sums, no running totals); the variance of each k is one exact Fraction.
    """
    h = np.asarray(histogram).astype(np.int64).ravel()
    if h.shape != (256,):
        raise ValueError("histogram must have 256 bins")
    total = int(h.sum())
    if total <= 0:
        raise EmptyInputError("empty histogram")
    occupied = np.flatnonzero(h)
    if len(occupied) == 1:
        return int(occupied[0])
    levels = np.arange(256, dtype=np.int64)
    n0s = (_LOWER @ h).tolist()
    n1s = ((1 - _LOWER) @ h).tolist()
    s0s = (_LOWER @ (levels * h)).tolist()
    s1s = ((1 - _LOWER) @ (levels * h)).tolist()
    best_k, best_var = None, Fraction(-1)
    for k in range(256):
        n0, n1, s0, s1 = n0s[k], n1s[k], s0s[k], s1s[k]
        if n0 == 0 or n1 == 0:
            continue
        # w0 w1 (mu0 - mu1)^2 with w = n / N and mu = s / n
        var = Fraction(n0 * n1 * (s0 * n1 - s1 * n0) ** 2, total * total * n0 * n0 * n1 * n1)
        if var > best_var:
            best_k, best_var = k, var
    return best_k
