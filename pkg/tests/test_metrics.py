import time

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atbqc.contour import Contour, ContourKind, LandmarkSet, Provenance
from atbqc.errors import EmptyInputError, RegionUndefinedError
from atbqc.metrics import dtw_distance, landmark_euclidean, tb_rdtw, tongue_slice, vel_rdtw
from atbqc.oracle import brute_force_dtw
from atbqc.synth import SubjectTemplate, clean_frame, flatten_groove


def test_dtw_examples():
    a = np.array([(1, 2), (3, 4), (7, 1)], float)
    assert dtw_distance(a, a) == 0.0
    assert dtw_distance([(0, 0)], [(3, 4)]) == 5.0
    with pytest.raises(EmptyInputError):
        dtw_distance(np.zeros((0, 2)), a)


def test_dtw_matches_oracle_small(rng):
    for _ in range(100):
        a = rng.integers(0, 10, size=(rng.integers(1, 8), 2))
        b = rng.integers(0, 10, size=(rng.integers(1, 8), 2))
        assert dtw_distance(a, b) == brute_force_dtw(a, b)


def test_oracle_cap():
    with pytest.raises(ValueError):
        brute_force_dtw(np.zeros((9, 2)), np.zeros((2, 2)))
    assert brute_force_dtw([(0, 0)], [(3, 4)]) == 5.0
    assert brute_force_dtw([(0, 0), (1, 1)], [(0, 0), (1, 1)]) == 0.0


seqs = st.lists(st.tuples(st.integers(0, 20), st.integers(0, 20)), min_size=1, max_size=12)


@settings(max_examples=200, deadline=None)
@given(seqs, seqs, st.integers(-30, 30), st.integers(-30, 30))
def test_dtw_properties(a, b, dr, dc):
    a = np.array(a, float)
    b = np.array(b, float)
    d = dtw_distance(a, b)
    assert d >= 0
    assert d == pytest.approx(dtw_distance(b, a), abs=1e-9)
    assert d == pytest.approx(dtw_distance(b[::-1], a[::-1]), abs=1e-9)
    assert d == pytest.approx(dtw_distance(a + [dr, dc], b + [dr, dc]), abs=1e-9)
    assert dtw_distance(a, a) == 0.0


def test_landmark_euclidean():
    assert landmark_euclidean((2, 2), (2, 2)) == 0.0
    assert landmark_euclidean((0, 0), (3, 4)) == 5.0
    assert landmark_euclidean((1, 1), (4, 5)) == 5.0


def _c1(n=20, shift=(0.0, 0.0)):
    t = np.arange(n, dtype=float)
    return Contour(np.column_stack([10 + np.sin(t / 3), t]) + shift, ContourKind.C1)


def test_vel_rdtw_examples(rng):
    gt = _c1()
    assert vel_rdtw(gt, gt) == 0.0
    # slicing oracle
    for _ in range(20):
        a = _c1(int(rng.integers(6, 30)), tuple(rng.normal(size=2)))
        b = _c1(int(rng.integers(6, 30)))
        want = dtw_distance(a.points[len(a) - int(np.ceil(0.3 * len(a))):],
                            b.points[len(b) - int(np.ceil(0.3 * len(b))):])
        assert vel_rdtw(a, b) == want
    assert vel_rdtw(a, b, fraction=1.0) == dtw_distance(a, b)


def test_vel_rdtw_uniform_tail_shift():
    gt = Contour(np.column_stack([np.zeros(10), np.arange(10) * 10.0]), ContourKind.C1)
    pts = gt.points.copy()
    pts[-3:, 0] += 3.0
    # vertical shift of 3 on points 10 px apart: any warp costs more than the diagonal
    assert vel_rdtw(Contour(pts, ContourKind.C1), gt) == 3.0


def _frame():
    return clean_frame(SubjectTemplate("s"), np.zeros(3), 1.0)


def test_tb_rdtw_examples():
    cf = _frame()
    c2 = cf.contours[ContourKind.C2]
    assert tb_rdtw(c2, c2, cf.landmarks) == 0.0
    flat = flatten_groove(c2, cf.ll_index, cf.tb_index, cf.top_index, 6.0)
    assert tb_rdtw(flat, c2, cf.landmarks) > 0.0


def test_tb_rdtw_translation():
    # points 10 px apart so no warp beats the diagonal for a 4 px shift
    rows = [50, 55, 40, 45, 20, 30, 40, 50]
    gt = Contour(np.column_stack([rows, np.arange(8) * 10.0]), ContourKind.C2)
    lms = LandmarkSet()
    lms.set("LL", gt.points[1], 1, Provenance.ANNOTATED)
    moved = gt.translated(4, 0)
    plms = LandmarkSet()
    plms.set("LL", moved.points[1], 1, Provenance.ANNOTATED)
    assert tb_rdtw(moved, gt, lms, plms) == 4.0


def test_tb_rdtw_region_undefined():
    c2 = Contour(np.array([(5, 0), (6, 1), (7, 2), (8, 3), (9, 4)], float), ContourKind.C2)
    lms = LandmarkSet()
    lms.set("LL", (9, 4), 4, Provenance.ANNOTATED)
    with pytest.raises(RegionUndefinedError):
        tongue_slice(c2, lms)


def test_dtw_runtime_full_contours():
    cf = _frame()
    c2 = cf.contours[ContourKind.C2]
    dtw_distance(c2, c2.translated(1, 0))
    t = time.perf_counter()
    for _ in range(20):
        dtw_distance(c2, c2.translated(1, 1))
    assert time.perf_counter() - t < 2.0
