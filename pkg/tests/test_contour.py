import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from atbqc.contour import (Contour, ContourKind, LandmarkSet, Provenance, nearest_point_index,
                           point_in_closed_contour, points_in_closed_contour, resample_contour)
from atbqc.errors import ContractViolation, InvalidContourError

from builders import winding_number


def C(pts, kind=ContourKind.C3):
    return Contour(np.array(pts, dtype=float), kind)


def test_contour_validation():
    with pytest.raises(InvalidContourError):
        C([(0, 0)])
    with pytest.raises(InvalidContourError):
        C([(0, 0), (0, 0), (1, 1)])
    with pytest.raises(InvalidContourError):
        C([(0, 0), (np.nan, 1)])
    c = C([(0, 0), (1, 1)])
    with pytest.raises(ValueError):
        c.points[0, 0] = 5.0
    assert C([(0, 0), (1, 1)], ContourKind.C1).closed
    assert not c.closed


def test_resample_examples():
    r = resample_contour(C([(0, 0), (0, 10)]), 3)
    assert np.allclose(r.points, [(0, 0), (0, 5), (0, 10)])
    r = resample_contour(C([(0, 0), (0, 4), (3, 4)]), 2)
    assert np.array_equal(r.points, [(0, 0), (3, 4)])
    uniform = C([(0, 0), (0, 1), (0, 2), (0, 3)])
    assert np.allclose(resample_contour(uniform, 4).points, uniform.points, atol=1e-9)
    closed = Contour(np.array([(0, 0), (0, 2), (2, 2)], float), ContourKind.C2)
    assert resample_contour(closed, 5).closed and resample_contour(closed, 5).kind == ContourKind.C2
    with pytest.raises(InvalidContourError):
        resample_contour(uniform, 1)


polylines = st.lists(st.tuples(st.integers(0, 60), st.integers(0, 60)), min_size=2, max_size=25).filter(
    lambda p: all(a != b for a, b in zip(p, p[1:])) and p[0] != p[-1])


@settings(max_examples=200, deadline=None)
@given(polylines, st.integers(2, 80))
def test_resample_general(pts, n):
    # chords never exceed the arcs they cut
    c = C(pts)
    r = resample_contour(c, n)
    assert len(r) == n
    assert np.array_equal(r.points[0], c.points[0]) and np.array_equal(r.points[-1], c.points[-1])
    assert r.arc_length() <= c.arc_length() * (1 + 1e-12)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.1, 10), min_size=1, max_size=15), st.floats(0, 2 * np.pi), st.integers(2, 60))
def test_resample_straight_line(steps, theta, n):
    t = np.concatenate([[0.0], np.cumsum(steps)])
    c = C(np.column_stack([5 + t * np.sin(theta), 5 + t * np.cos(theta)]))
    r = resample_contour(c, n)
    assert abs(r.arc_length() - c.arc_length()) <= 1e-6 * c.arc_length()
    assert np.allclose(resample_contour(r, n).points, r.points, atol=1e-6)


unit_walks = st.lists(st.sampled_from([(0, 1), (1, 0), (0, -1), (-1, 0)]), min_size=1, max_size=20).filter(
    lambda s: all(a[0] != -b[0] or a[1] != -b[1] for a, b in zip(s, s[1:])))


@settings(max_examples=200, deadline=None)
@given(unit_walks, st.integers(1, 4))
def test_resample_vertex_aligned(steps, per_segment):
    # equal segments and n - 1 a multiple of the segment count: every vertex is a sample
    c = C(np.cumsum([(30, 30)] + steps, axis=0))
    n = per_segment * len(steps) + 1
    r = resample_contour(c, n)
    assert abs(r.arc_length() - c.arc_length()) <= 1e-6 * c.arc_length()
    assert np.allclose(resample_contour(r, n).points, r.points, atol=1e-6)


def test_nearest_point_index_examples():
    c = C([(0, 0), (0, 5), (0, 10)])
    assert nearest_point_index(c, (1, 4)) == 1
    assert nearest_point_index(c, (0, 10)) == 2
    assert nearest_point_index(c, (0, 5)) == 1
    assert nearest_point_index(C([(0, 0), (5, 5), (0, 10)]), (0, 5)) == 0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)), min_size=2, max_size=20).filter(
    lambda p: all(a != b for a, b in zip(p, p[1:]))), st.data())
def test_nearest_point_first_match(pts, data):
    c = C(pts)
    i = data.draw(st.integers(0, len(pts) - 1))
    first = next(k for k, p in enumerate(pts) if p == pts[i])
    assert nearest_point_index(c, c.points[i]) == first


SQUARE = Contour(np.array([(0, 0), (0, 2), (2, 2), (2, 0)], float), ContourKind.C2)


def test_point_in_square():
    assert point_in_closed_contour(SQUARE, (1, 1))
    assert not point_in_closed_contour(SQUARE, (3, 3))
    assert point_in_closed_contour(SQUARE, (0, 1))
    assert point_in_closed_contour(SQUARE, (2, 2))
    assert point_in_closed_contour(SQUARE, (1, 0))  # on the implied closing edge
    with pytest.raises(ContractViolation):
        point_in_closed_contour(C([(0, 0), (0, 2), (2, 2)]), (1, 1))


def test_point_in_polygon_matches_winding_number(rng):
    checked = 0
    for _ in range(1000):
        k = rng.integers(3, 12)
        angles = np.sort(rng.uniform(0, 2 * np.pi, k))
        radius = rng.uniform(2, 20)
        center = rng.uniform(20, 40, 2)
        poly = center + radius * np.column_stack([np.sin(angles), np.cos(angles)])
        if np.any(np.all(np.diff(poly, axis=0) == 0, axis=1)):
            continue
        c = Contour(poly, ContourKind.C2)
        q = rng.uniform(center - 1.2 * radius, center + 1.2 * radius, size=(20, 2))
        got = points_in_closed_contour(c, q)
        want = [winding_number(poly, p) for p in q]
        assert list(got) == want
        checked += 1
    assert checked > 990


def test_landmark_set_validate():
    c1 = C([(0, 0), (1, 1), (2, 0)], ContourKind.C1)
    lms = LandmarkSet()
    lms.set("VEL", (1, 1), 1, Provenance.ANNOTATED)
    lms.validate({ContourKind.C1: c1})
    lms.set("UL", (1, 1), 0, Provenance.ANNOTATED)
    with pytest.raises(InvalidContourError):
        lms.validate({ContourKind.C1: c1})
    with pytest.raises(ValueError):
        lms.set("NOSE", (0, 0), 0, Provenance.ANNOTATED)
