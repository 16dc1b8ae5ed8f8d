import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atbqc.contour import Contour, ContourKind, LandmarkSet, Provenance
from atbqc.errors import DegenerateContourError, RangeError
from atbqc.landmarks import (LandmarkConfig, c2_landmarks, extract_ll, extract_tb, extract_vel, find_dip,
                             uppermost_tongue_index)
from atbqc.synth import SubjectTemplate, clean_frame


def rows_contour(rows, kind=ContourKind.C1):
    return Contour(np.column_stack([rows, np.arange(len(rows))]).astype(float), kind)


def test_find_dip_examples():
    assert find_dip(rows_contour([3, 5, 9, 5]), 0, 4)[0] == 2
    assert find_dip(rows_contour([4, 4]), 0, 2)[0] == 0
    assert find_dip(rows_contour([1, 9, 2]), 0, 2)[0] == 1
    with pytest.raises(RangeError):
        find_dip(rows_contour([1, 2, 3]), 2, 2)


def test_extract_vel_window():
    # 14 points -> window is the last ceil(0.3 * 14) = 5; rows 10,12,15,11 sit inside it
    rows = [30, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 12, 15, 11]
    i, p = extract_vel(rows_contour(rows))
    assert i == 12 and p[0] == 15
    with pytest.raises(ValueError):
        LandmarkConfig(velum_region_fraction=1.0)
    with pytest.raises(DegenerateContourError):
        extract_vel(rows_contour([1, 2, 3]))


def test_extract_ll_and_tb():
    rows = [20, 18, 17, 19, 22, 25, 28, 24, 5, 9, 12, 15, 30, 31, 32, 33]
    c2 = rows_contour(rows, ContourKind.C2)
    # ceil(0.25 * 16) = 4 anterior points: rows 20,18,17,19
    ll, _ = extract_ll(c2)
    assert ll == 2
    assert uppermost_tongue_index(c2, ll) == 8
    tb, p = extract_tb(c2, ll)
    assert tb == 6 and p[0] == 28
    assert extract_tb(rows_contour([10, 5, 9, 2, 8], ContourKind.C2), 0) is not None
    # uppermost tongue point right after LL -> no dip
    assert extract_tb(rows_contour([10, 9, 2, 8, 30], ContourKind.C2), 1) is None
    with pytest.raises(RangeError):
        extract_tb(c2, 40)


def test_annotated_ll_precedence():
    rows = [20, 18, 17, 19, 22, 25, 28, 24, 5, 9, 12, 15, 30, 31, 32, 33]
    c2 = rows_contour(rows, ContourKind.C2)
    lms = LandmarkSet()
    lms.set("LL", (18.0, 1.0), 1, Provenance.ANNOTATED)
    assert c2_landmarks(c2, lms).ll_index == 1
    assert c2_landmarks(c2).ll_index == 2


@pytest.mark.parametrize("offset", [(0.0, 0.0), (1.7, -1.3), (-2.0, 2.0)])
@pytest.mark.parametrize("phase", [(0.0, 0.0, 0.0), (1.0, -1.0, 1.0), (-1.0, 1.0, -0.5)])
def test_synthetic_landmarks_recovered(offset, phase):
    cf = clean_frame(SubjectTemplate("s", offset), np.array(phase), 1.0)
    c1, c2 = cf.contours[ContourKind.C1], cf.contours[ContourKind.C2]
    assert extract_vel(c1)[0] == cf.vel_index
    assert extract_ll(c2)[0] == cf.ll_index
    assert uppermost_tongue_index(c2, cf.ll_index) == cf.top_index
    assert extract_tb(c2, cf.ll_index)[0] == cf.tb_index


def test_groove_depth_any_positive():
    cf = clean_frame(SubjectTemplate("s"), np.zeros(3), 1.0)
    c2 = cf.contours[ContourKind.C2]
    for d in (0.01, 0.5, 3.0):
        pts = c2.points.copy()
        pts[cf.tb_index, 0] += d
        c = c2.with_points(pts)
        assert extract_tb(c, cf.ll_index)[0] == cf.tb_index


profiles = st.lists(st.integers(0, 60), min_size=4, max_size=40)


@settings(max_examples=200, deadline=None)
@given(profiles, st.floats(0.05, 0.95))
def test_vel_index_in_window(rows, frac):
    c = rows_contour(rows)
    i, _ = extract_vel(c, LandmarkConfig(velum_region_fraction=frac))
    assert i >= math.floor((1 - frac) * len(rows))


@settings(max_examples=200, deadline=None)
@given(profiles, st.floats(-20, 20), st.floats(-20, 20))
def test_translation_equivariance(rows, dr, dc):
    c1 = rows_contour(rows)
    c2 = rows_contour(rows, ContourKind.C2)
    i, p = extract_vel(c1)
    j, q = extract_vel(c1.translated(dr, dc))
    assert i == j and np.allclose(q, p + [dr, dc])
    a = c2_landmarks(c2)
    b = c2_landmarks(c2.translated(dr, dc))
    assert a == b
    if a.resolved:
        assert a.ll_index < a.tb_index < a.top_index
