"""Landmark estimation on predicted contours.

A "dip" is the spatially lowest point of a range, i.e. the maximal row.
C1 is ordered from the upper lip to the pharyngeal-wall end, C2 from the
jawline end, so VEL is searched at the tail of C1 and LL at the head of C2.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contour import Contour, ContourKind, LandmarkSet, nearest_point_index
from .errors import DegenerateContourError, RangeError

MIN_POINTS = 4


@dataclass(frozen=True)
class LandmarkConfig:
    velum_region_fraction: float = 0.30
    ll_search_fraction: float = 0.25

    def __post_init__(self):
        for name in ("velum_region_fraction", "ll_search_fraction"):
            v = getattr(self, name)
            if not 0.0 < v < 1.0:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")


def _check_kind(c: Contour, kind: ContourKind):
    if c.kind != kind:
        raise ValueError(f"expected a {kind.value} contour, got {c.kind.value}")
    if len(c) < MIN_POINTS:
        raise DegenerateContourError(f"{kind.value} has {len(c)} points, need at least {MIN_POINTS}")


def find_dip(c: Contour, start: int, end: int):
    """Index in [start, end) with the largest row, first one on ties."""
    if not (0 <= start < end <= len(c)):
        raise RangeError(f"empty or invalid range [{start}, {end}) on {len(c)} points")
    i = start + int(np.argmax(c.rows[start:end]))
    return i, c.points[i]


def tail_window(n: int, fraction: float) -> int:
    """Number of points in a fractional window, rounded up."""
    return min(n, math.ceil(fraction * n))


def extract_vel(c1: Contour, cfg: LandmarkConfig = LandmarkConfig()):
    _check_kind(c1, ContourKind.C1)
    n = len(c1)
    return find_dip(c1, n - tail_window(n, cfg.velum_region_fraction), n)


def extract_ll(c2: Contour, cfg: LandmarkConfig = LandmarkConfig()):
    _check_kind(c2, ContourKind.C2)
    k = tail_window(len(c2), cfg.ll_search_fraction)
    i = int(np.argmin(c2.rows[:k]))
    return i, c2.points[i]


def uppermost_tongue_index(c2: Contour, ll_index: int):
    """Minimal-row index strictly after LL, or None if LL is the last point."""
    if not 0 <= ll_index < len(c2):
        raise RangeError(f"LL index {ll_index} outside contour of {len(c2)} points")
    if ll_index == len(c2) - 1:
        return None
    return ll_index + 1 + int(np.argmin(c2.rows[ll_index + 1:]))


def extract_tb(c2: Contour, ll_index: int, cfg: LandmarkConfig = LandmarkConfig()):
    """TB as the dip strictly between LL and the uppermost tongue point.

    Returns None ("no-dip") when that open range is empty.
    """
    _check_kind(c2, ContourKind.C2)
    top = uppermost_tongue_index(c2, ll_index)
    if top is None or top - ll_index < 2:
        return None
    return find_dip(c2, ll_index + 1, top)


def resolve_ll(c2: Contour, annotated: LandmarkSet | None = None, cfg: LandmarkConfig = LandmarkConfig()) -> int:
    """LL index on ``c2``: the annotated LL mapped onto the contour if present, else estimated."""
    if annotated is not None and "LL" in annotated:
        return nearest_point_index(c2, annotated["LL"].point)
    return extract_ll(c2, cfg)[0]


@dataclass(frozen=True)
class C2Landmarks:
    ll_index: int
    tb_index: int | None
    top_index: int | None

    @property
    def resolved(self) -> bool:
        return self.tb_index is not None


def c2_landmarks(c2: Contour, annotated: LandmarkSet | None = None, cfg: LandmarkConfig = LandmarkConfig()) -> C2Landmarks:
    """LL, TB and uppermost-tongue indices in one pass; TB is None when unresolvable."""
    if len(c2) < MIN_POINTS:
        return C2Landmarks(0, None, None)
    ll = resolve_ll(c2, annotated, cfg)
    top = uppermost_tongue_index(c2, ll)
    tb = extract_tb(c2, ll, cfg)
    return C2Landmarks(ll, None if tb is None else tb[0], top)
