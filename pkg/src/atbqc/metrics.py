"""Contour distances: global DTW plus the velum- and tongue-base-region metrics.

DTW here is the minimum over monotone, boundary-anchored alignment paths
(steps (1,0), (0,1), (1,1)) of total Euclidean cost divided by the number of
matched pairs. Minimising the ratio needs the path length in the DP state, so
the table carries one cost per (cell, length).
"""
from __future__ import annotations

import math

import numba
import numpy as np

from .contour import Contour, ContourKind, LandmarkSet
from .errors import EmptyInputError, RegionUndefinedError
from .landmarks import LandmarkConfig, c2_landmarks, tail_window


@numba.njit(cache=True)
def _dtw_ratio(a, b):
    n, m = a.shape[0], b.shape[0]
    L = n + m  # lengths 1 .. n+m-1, slot 0 unused
    inf = np.inf
    prev = np.full((m, L), inf)
    cur = np.full((m, L), inf)
    for i in range(n):
        for j in range(m):
            for k in range(L):
                cur[j, k] = inf
            dr = a[i, 0] - b[j, 0]
            dc = a[i, 1] - b[j, 1]
            c = math.sqrt(dr * dr + dc * dc)
            if i == 0 and j == 0:
                cur[0, 1] = c
                continue
            lo = max(i, j) + 1
            hi = i + j + 1
            for k in range(lo, hi + 1):
                best = inf
                if i > 0 and prev[j, k - 1] < best:
                    best = prev[j, k - 1]
                if j > 0 and cur[j - 1, k - 1] < best:
                    best = cur[j - 1, k - 1]
                if i > 0 and j > 0 and prev[j - 1, k - 1] < best:
                    best = prev[j - 1, k - 1]
                if best < inf:
                    cur[j, k] = best + c
        prev, cur = cur, prev
    out = inf
    for k in range(max(n, m), n + m):
        v = prev[m - 1, k] / k
        if v < out:
            out = v
    return out


def _as_sequence(x) -> np.ndarray:
    if isinstance(x, Contour):
        x = x.points
    arr = np.ascontiguousarray(np.asarray(x, dtype=float).reshape(-1, 2))
    if len(arr) == 0:
        raise EmptyInputError("DTW needs non-empty sequences")
    return arr


def dtw_distance(a, b) -> float:
    """Path-length normalised DTW between two point sequences, in pixels."""
    a = _as_sequence(a)
    b = _as_sequence(b)
    if a.shape == b.shape and np.array_equal(a, b):
        return 0.0
    return float(_dtw_ratio(a, b))


def landmark_euclidean(pred, gt) -> float:
    pred = np.asarray(pred, dtype=float)
    gt = np.asarray(gt, dtype=float)
    return float(math.hypot(pred[0] - gt[0], pred[1] - gt[1]))


def velum_slice(c1: Contour, fraction: float = 0.30) -> np.ndarray:
    n = len(c1)
    return c1.points[n - tail_window(n, fraction):]


def vel_rdtw(pred_c1: Contour, gt_c1: Contour, fraction: float = 0.30) -> float:
    """DTW over the last ``fraction`` of each C1, taken from its own pharyngeal-wall end."""
    for c in (pred_c1, gt_c1):
        if c.kind != ContourKind.C1:
            raise ValueError("vel_rdtw needs C1 contours")
    return dtw_distance(velum_slice(pred_c1, fraction), velum_slice(gt_c1, fraction))


def tongue_slice(c2: Contour, landmarks: LandmarkSet | None = None, cfg: LandmarkConfig = LandmarkConfig()) -> np.ndarray:
    """Points from LL through the uppermost tongue point, inclusive."""
    lm = c2_landmarks(c2, landmarks, cfg)
    if lm.top_index is None or lm.top_index <= lm.ll_index:
        raise RegionUndefinedError("LL-to-tongue-top region is empty")
    return c2.points[lm.ll_index:lm.top_index + 1]


def tb_rdtw(pred_c2: Contour, gt_c2: Contour, gt_landmarks: LandmarkSet | None = None,
            pred_landmarks: LandmarkSet | None = None, cfg: LandmarkConfig = LandmarkConfig()) -> float:
    """DTW between the LL-to-uppermost-tongue regions of predicted and annotated C2.

    ``gt_landmarks`` (annotated) also supply the LL for the predicted contour
    unless ``pred_landmarks`` is given.
    """
    for c in (pred_c2, gt_c2):
        if c.kind != ContourKind.C2:
            raise ValueError("tb_rdtw needs C2 contours")
    pred_lm = pred_landmarks if pred_landmarks is not None else gt_landmarks
    return dtw_distance(tongue_slice(pred_c2, pred_lm, cfg), tongue_slice(gt_c2, gt_landmarks, cfg))
