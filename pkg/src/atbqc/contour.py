"""Point and polyline primitives in (row, col) pixel coordinates.

Rows increase downward and columns rightward, origin at the top-left pixel
centre. A closed contour does not repeat its first point at the end; closure
is carried by the ``closed`` flag.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numba
import numpy as np

from .errors import ContractViolation, InvalidContourError


class ContourKind(str, enum.Enum):
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"


# C1 and C2 are closed, C3 (pharyngeal wall) is open.
DEFAULT_CLOSED = {ContourKind.C1: True, ContourKind.C2: True, ContourKind.C3: False}


def as_point(p) -> np.ndarray:
    arr = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(arr)):
        raise InvalidContourError(f"non-finite point {p!r}")
    return arr


@dataclass(frozen=True, eq=False)
class Contour:
    """Ordered polyline; ``points`` is an (N, 2) float array of (row, col)."""

    points: np.ndarray
    kind: ContourKind
    closed: bool | None = None

    def __post_init__(self):
        pts = np.array(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise InvalidContourError(f"points must have shape (N, 2), got {pts.shape}")
        if len(pts) < 2:
            raise InvalidContourError("a contour needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            raise InvalidContourError("contour contains non-finite coordinates")
        if np.any(np.all(pts[1:] == pts[:-1], axis=1)):
            raise InvalidContourError("contour has consecutive identical points")
        pts.setflags(write=False)
        kind = ContourKind(self.kind)
        closed = DEFAULT_CLOSED[kind] if self.closed is None else bool(self.closed)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "closed", closed)

    def __len__(self):
        return len(self.points)

    @property
    def rows(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def cols(self) -> np.ndarray:
        return self.points[:, 1]

    def with_points(self, points) -> "Contour":
        return Contour(points, self.kind, self.closed)

    def translated(self, drow: float, dcol: float) -> "Contour":
        return self.with_points(self.points + np.array([drow, dcol]))

    def arc_length(self) -> float:
        """Length of the stored polyline (the implied closing edge is not counted)."""
        return float(np.sum(segment_lengths(self.points)))

    def equals(self, other: "Contour", atol: float = 0.0) -> bool:
        if self.kind != other.kind or self.closed != other.closed:
            return False
        if self.points.shape != other.points.shape:
            return False
        if atol == 0.0:
            return bool(np.array_equal(self.points, other.points))
        return bool(np.allclose(self.points, other.points, rtol=0.0, atol=atol))


def segment_lengths(points: np.ndarray) -> np.ndarray:
    return np.hypot(*np.diff(points, axis=0).T)


def resample_contour(c: Contour, n: int) -> Contour:
    """Resample to ``n`` points spaced uniformly by arc length (piecewise linear).

    Both endpoints are kept exactly; the closing edge of a closed contour is
    not part of the parameterisation.
    """
    if n < 2:
        raise InvalidContourError(f"cannot resample to {n} points")
    pts = c.points
    seg = segment_lengths(pts)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = cum[-1]
    targets = np.linspace(0.0, total, n)
    # last segment start strictly below each target
    idx = np.clip(np.searchsorted(cum, targets, side="right") - 1, 0, len(seg) - 1)
    t = (targets - cum[idx]) / seg[idx]
    out = pts[idx] + t[:, None] * (pts[idx + 1] - pts[idx])
    out[0] = pts[0]
    out[-1] = pts[-1]
    return c.with_points(out)


def nearest_point_index(c: Contour, p) -> int:
    """Index of the contour point closest to ``p``; ties go to the smallest index."""
    p = as_point(p)
    d = np.hypot(c.rows - p[0], c.cols - p[1])
    return int(np.argmin(d))  # argmin returns the first minimum


def points_in_closed_contour(c: Contour, pts) -> np.ndarray:
    """Even-odd ray casting for many query points; points on an edge are inside.

    The polygon is assumed simple. Rays run towards +col.
    """
    if not c.closed:
        raise ContractViolation(f"{c.kind.value} is open; point-in-contour needs a closed contour")
    q = np.ascontiguousarray(np.asarray(pts, dtype=float).reshape(-1, 2))
    return _ray_cast(np.ascontiguousarray(c.points), q)


@numba.njit(cache=True)
def _ray_cast(a, q):
    n = a.shape[0]
    out = np.zeros(q.shape[0], dtype=np.bool_)
    for k in range(q.shape[0]):
        qr, qc = q[k, 0], q[k, 1]
        inside = False
        for i in range(n):
            ar, ac = a[i, 0], a[i, 1]
            br, bc = a[(i + 1) % n, 0], a[(i + 1) % n, 1]
            cross = (br - ar) * (qc - ac) - (bc - ac) * (qr - ar)
            if (cross == 0 and min(ar, br) <= qr <= max(ar, br)
                    and min(ac, bc) <= qc <= max(ac, bc)):
                inside = True
                break
            if (ar > qr) != (br > qr):
                if ac + (qr - ar) * (bc - ac) / (br - ar) > qc:
                    inside = not inside
        out[k] = inside
    return out


def point_in_closed_contour(c: Contour, p) -> bool:
    return bool(points_in_closed_contour(c, as_point(p))[0])


LANDMARK_NAMES = ("UL", "LL", "TB", "VEL", "GLTB")

# contour each landmark lives on
LANDMARK_CONTOUR = {
    "UL": ContourKind.C1,
    "VEL": ContourKind.C1,
    "LL": ContourKind.C2,
    "TB": ContourKind.C2,
    "GLTB": ContourKind.C2,
}


class Provenance(str, enum.Enum):
    ANNOTATED = "annotated"
    ESTIMATED = "estimated"


@dataclass(frozen=True)
class Landmark:
    point: tuple[float, float]
    index: int
    provenance: Provenance


@dataclass
class LandmarkSet:
    """Named anatomical points, each tied to an index on its contour."""

    entries: dict[str, Landmark] = field(default_factory=dict)

    def __contains__(self, name):
        return name in self.entries

    def __getitem__(self, name) -> Landmark:
        return self.entries[name]

    def get(self, name):
        return self.entries.get(name)

    def names(self):
        return [n for n in LANDMARK_NAMES if n in self.entries]

    def set(self, name, point, index, provenance):
        if name not in LANDMARK_CONTOUR:
            raise ValueError(f"unknown landmark {name!r}")
        p = as_point(point)
        self.entries[name] = Landmark((float(p[0]), float(p[1])), int(index), Provenance(provenance))

    def validate(self, contours: dict, tol: float = 1e-9):
        """Check every landmark's index hits its stored point on the owning contour."""
        for name, lm in self.entries.items():
            c = contours.get(LANDMARK_CONTOUR[name])
            if c is None:
                raise InvalidContourError(f"landmark {name} has no {LANDMARK_CONTOUR[name].value} contour")
            if not 0 <= lm.index < len(c):
                raise InvalidContourError(f"landmark {name} index {lm.index} outside contour of {len(c)} points")
            if np.max(np.abs(c.points[lm.index] - np.array(lm.point))) > tol:
                raise InvalidContourError(f"landmark {name} does not match contour point {lm.index}")
