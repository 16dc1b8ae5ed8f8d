"""Schematic mid-sagittal contour sequences with injected, labelled errors.

The anatomy is deliberately crude: piecewise-linear C1 (lip, palate, velum
dip), C2 (jaw, lower lip, groove, tongue, epiglottis) and a straight C3. What
matters is that every landmark is a polyline vertex, so its index and position
are known exactly, and that the raster has dark air exactly where the
annotated contours say.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import Contour, ContourKind, LandmarkSet, Provenance, points_in_closed_contour
from .detection import compute_subject_reference
from .records import Dataset, ErrorFlags, FrameRecord, SubjectReference, VideoSequence

SUBJECT_IDS = ("F1", "F2", "F3", "F4", "F5", "M1", "M2", "M3", "M4", "M5")

# (row, col) vertices; named entries are landmarks
C1_VERTICES = [(34, 5), (28, 8), (22, 14), (19, 24), (19, 36), (21, 43), (33, 51), (24, 55), (18, 56)]
C1_UL, C1_VEL = 0, 6
C2_VERTICES = [(62, 12), (52, 6), (38, 7), (49, 12), (30, 30), (34, 40), (46, 48), (56, 50), (63, 50)]
C2_LL, C2_TB, C2_TOP, C2_GLTB = 2, 3, 4, 8
C3_ENDS = [(16, 57), (64, 57)]

POINT_SPACING = 1.0


@dataclass(frozen=True)
class SynthParams:
    frame_height: int = 68
    frame_width: int = 68
    subjects: tuple = SUBJECT_IDS
    videos_per_subject: int = 1
    frames_per_video: int = 60
    fps: float = 23.18
    # px; VEL moves 0.3x, TB 0.5x and the tongue top 1x this amplitude
    articulation_amplitude: float = 1.0
    articulation_period: float = 24.0
    subject_jitter: float = 2.0
    # C1 error split evenly between the two kinds: 3.07 % of frames overall
    c1_incomplete_rate: float = 0.0307 / 2
    c1_frame_rate: float = 0.0307 / 2
    c2_tb_rate: float = 0.6573
    c2_frame_rate: float = 0.0482
    c1_offset_magnitude: float = 21.0
    # keep fraction of an incomplete C1: ends on the palate, estimated VEL 18-19 px
    # from the true one and > 21 px from the C3 reference. With one incomplete and
    # one frame error per 60 frames the clean mean-velum deviation stays below
    # 0.3 + (19.2 + 21) / 60 < 1 px, the smallest grid threshold.
    c1_cut_range: tuple = (0.52, 0.54)
    c2_tb_magnitude: float = 6.0
    c2_frame_keep_fraction: float = 0.40
    tissue_level: int = 190
    air_level: int = 20
    raster_noise: int = 10
    paint_rasters: bool = True
    seed: int = 0

    def __post_init__(self):
        rates = (self.c1_incomplete_rate, self.c1_frame_rate, self.c2_tb_rate, self.c2_frame_rate)
        if any(not 0.0 <= r <= 1.0 for r in rates):
            raise ValueError("injection rates must lie in [0, 1]")
        if self.c1_incomplete_rate + self.c1_frame_rate > 1.0:
            raise ValueError("C1 injection rates sum above 1")
        if self.c2_tb_rate + self.c2_frame_rate > 1.0:
            raise ValueError("C2 injection rates sum above 1")
        if not 0 <= self.raster_noise <= 20:
            raise ValueError("raster_noise must lie in [0, 20]")
        if self.tissue_level < 150 or self.air_level > 50:
            raise ValueError("tissue must be >= 150 and air <= 50")
        if not 0.0 < self.c2_frame_keep_fraction < 1.0:
            raise ValueError("c2_frame_keep_fraction must lie in (0, 1)")
        lo, hi = self.c1_cut_range
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError("c1_cut_range must be an increasing pair in (0, 1)")


def benchmark_params(seed: int = 0, **overrides) -> SynthParams:
    """Acceptance benchmark: 10 videos x 60 frames, TB errors raised to 30 %."""
    kw = dict(c2_tb_rate=0.3, seed=seed)
    kw.update(overrides)
    return SynthParams(**kw)


@dataclass(frozen=True)
class SubjectTemplate:
    subject_id: str
    offset: tuple[float, float] = (0.0, 0.0)


@dataclass
class GeneratedVideo:
    video: VideoSequence
    labels: list[ErrorFlags]
    # per frame, what was injected and how (for tests and reports)
    injections: dict[int, dict] = field(default_factory=dict)


# ---------------------------------------------------------------- geometry

def _segment_counts(vertices) -> list[int]:
    v = np.asarray(vertices, dtype=float)
    lengths = np.hypot(*np.diff(v, axis=0).T)
    return [max(1, math.ceil(length / POINT_SPACING)) for length in lengths]


def polyline(vertices, counts):
    """Dense polyline through ``vertices``; returns points and the index of every vertex."""
    v = np.asarray(vertices, dtype=float)
    parts, vertex_index, total = [], [], 0
    for k, n in enumerate(counts):
        t = np.arange(n)[:, None] / n
        parts.append(v[k] + t * (v[k + 1] - v[k]))
        vertex_index.append(total)
        total += n
    parts.append(v[-1:])
    vertex_index.append(total)
    return np.vstack(parts), vertex_index


C1_COUNTS = _segment_counts(C1_VERTICES)
C2_COUNTS = _segment_counts(C2_VERTICES)
C3_COUNT = int(round(abs(C3_ENDS[1][0] - C3_ENDS[0][0]) / POINT_SPACING))


@dataclass
class CleanFrame:
    contours: dict[ContourKind, Contour]
    landmarks: LandmarkSet
    vel_index: int
    ll_index: int
    tb_index: int
    top_index: int


def clean_frame(template: SubjectTemplate, phase: np.ndarray, amplitude: float) -> CleanFrame:
    """Annotated contours of one frame; ``phase`` holds sin() terms for VEL, TB and tongue top."""
    off = np.asarray(template.offset, dtype=float)
    c1v = np.asarray(C1_VERTICES, dtype=float)
    c1v[C1_VEL, 0] += 0.3 * amplitude * phase[0]
    c2v = np.asarray(C2_VERTICES, dtype=float)
    c2v[C2_TB, 0] += 0.5 * amplitude * phase[1]
    c2v[C2_TOP, 0] += amplitude * phase[2]
    c2v[C2_TOP + 1, 0] += 0.5 * amplitude * phase[2]

    p1, i1 = polyline(c1v + off, C1_COUNTS)
    p2, i2 = polyline(c2v + off, C2_COUNTS)
    p3, _ = polyline(np.asarray(C3_ENDS, dtype=float) + off, [C3_COUNT])
    contours = {
        ContourKind.C1: Contour(p1, ContourKind.C1),
        ContourKind.C2: Contour(p2, ContourKind.C2),
        ContourKind.C3: Contour(p3, ContourKind.C3),
    }
    lms = LandmarkSet()
    for name, kind, idx in (("UL", ContourKind.C1, i1[C1_UL]), ("VEL", ContourKind.C1, i1[C1_VEL]),
                            ("LL", ContourKind.C2, i2[C2_LL]), ("TB", ContourKind.C2, i2[C2_TB]),
                            ("GLTB", ContourKind.C2, i2[C2_GLTB])):
        lms.set(name, contours[kind].points[idx], idx, Provenance.ANNOTATED)
    return CleanFrame(contours, lms, i1[C1_VEL], i2[C2_LL], i2[C2_TB], i2[C2_TOP])


# ---------------------------------------------------------------- injections

def truncate(c: Contour, keep_fraction: float) -> Contour:
    keep = max(2, int(round(keep_fraction * len(c))))
    return c.with_points(c.points[:keep])


def flatten_groove(c2: Contour, ll_index: int, tb_index: int, top_index: int, magnitude: float) -> Contour:
    """Raise the groove between LL and the tongue top towards the LL row.

    Rows below the LL row are compressed towards it so that TB rises by
    exactly ``magnitude`` while keeping its index and column.
    """
    pts = c2.points.copy()
    ll_row = pts[ll_index, 0]
    depth = pts[tb_index, 0] - ll_row
    if not 0 < magnitude < depth:
        raise ValueError(f"groove raise {magnitude} must lie in (0, {depth:.3f})")
    scale = 1.0 - magnitude / depth
    region = np.arange(ll_index + 1, top_index)
    below = region[pts[region, 0] > ll_row]
    pts[below, 0] = ll_row + scale * (pts[below, 0] - ll_row)
    return c2.with_points(pts)


def _offset_in_bounds(c: Contour, magnitude: float, rng, height: int, width: int):
    lo = c.points.min(axis=0)
    hi = c.points.max(axis=0)
    for _ in range(10_000):
        theta = rng.uniform(0.0, 2.0 * np.pi)
        d = magnitude * np.array([np.cos(theta), np.sin(theta)])
        if np.all(lo + d >= 0.5) and hi[0] + d[0] <= height - 1.5 and hi[1] + d[1] <= width - 1.5:
            return d
    raise ValueError(f"no in-bounds offset of magnitude {magnitude}")


# ---------------------------------------------------------------- rasters

def paint_raster(contours: dict[ContourKind, Contour], params: SynthParams, rng) -> np.ndarray:
    """Bright tissue, dark air. Air is the vocal-tract cavity: below C1, outside
    C2, in front of C3 and behind the lips."""
    h, w = params.frame_height, params.frame_width
    rr, cc = np.mgrid[0:h, 0:w]
    centers = np.column_stack([rr.ravel(), cc.ravel()]).astype(float)
    inside_c2 = points_in_closed_contour(contours[ContourKind.C2], centers).reshape(h, w)
    c1 = contours[ContourKind.C1]
    order = np.argsort(c1.cols, kind="stable")
    c1_row = np.interp(np.arange(w), c1.cols[order], c1.rows[order])
    above_c1 = rr <= c1_row[None, :]
    c3_col = contours[ContourKind.C3].cols.min()
    front = c1.cols.min()
    tissue = inside_c2 | above_c1 | (cc >= c3_col) | (cc < front)
    img = np.where(tissue, params.tissue_level, params.air_level).astype(int)
    if params.raster_noise:
        img = img + rng.integers(-params.raster_noise, params.raster_noise + 1, size=img.shape)
    return np.clip(img, 0, 255).astype(np.uint8)


# ---------------------------------------------------------------- videos

def _pick(rng, pool, k):
    k = min(k, len(pool))
    chosen = rng.choice(np.asarray(sorted(pool)), size=k, replace=False) if k else []
    return sorted(int(x) for x in chosen)


def _phases(rng, n_frames, period):
    f = np.arange(n_frames)[:, None]
    phi = rng.uniform(0.0, 2.0 * np.pi, size=3)[None, :]
    return np.sin(2.0 * np.pi * f / period + phi)


def generate_video(params: SynthParams, template: SubjectTemplate, video_id: str, rng) -> GeneratedVideo:
    """One labelled video: clean annotations, predictions with injected errors, rasters."""
    n = params.frames_per_video
    phases = _phases(rng, n, params.articulation_period)
    all_frames = set(range(n))
    n_inc = int(round(params.c1_incomplete_rate * n))
    n_c1f = int(round(params.c1_frame_rate * n))
    n_tb = int(round(params.c2_tb_rate * n))
    n_c2f = int(round(params.c2_frame_rate * n))
    inc = _pick(rng, all_frames, n_inc)
    c1f = _pick(rng, all_frames - set(inc), n_c1f)
    c2f = _pick(rng, all_frames, n_c2f)
    tb = _pick(rng, all_frames - set(c2f), n_tb)

    frames, labels, injections = [], [], {}
    for i in range(n):
        clean = clean_frame(template, phases[i], params.articulation_amplitude)
        pred = dict(clean.contours)
        info = {}
        c1_kind = c2_kind = None
        if i in inc:
            cut = rng.uniform(*params.c1_cut_range)
            pred[ContourKind.C1] = truncate(pred[ContourKind.C1], cut)
            c1_kind = "incomplete"
            info["c1"] = ("incomplete", cut)
        elif i in c1f:
            d = _offset_in_bounds(pred[ContourKind.C1], params.c1_offset_magnitude, rng,
                                  params.frame_height, params.frame_width)
            pred[ContourKind.C1] = pred[ContourKind.C1].translated(*d)
            c1_kind = "frame"
            info["c1"] = ("frame", tuple(d))
        if i in c2f:
            pred[ContourKind.C2] = truncate(pred[ContourKind.C2], params.c2_frame_keep_fraction)
            c2_kind = "frame"
            info["c2"] = ("frame", params.c2_frame_keep_fraction)
        elif i in tb:
            pred[ContourKind.C2] = flatten_groove(pred[ContourKind.C2], clean.ll_index, clean.tb_index,
                                                  clean.top_index, params.c2_tb_magnitude)
            c2_kind = "tb"
            info["c2"] = ("tb", params.c2_tb_magnitude)
        raster = paint_raster(clean.contours, params, rng) if params.paint_rasters else None
        frames.append(FrameRecord(
            video_id=video_id,
            frame_index=i,
            predicted={k: pred[k] for k in ContourKind},
            raster=raster,
            annotated=clean.contours,
            annotated_landmarks=clean.landmarks,
        ))
        labels.append(ErrorFlags(c1_kind is not None, c1_kind, c2_kind is not None, c2_kind,
                                 frozenset({"injected"}) if info else frozenset()))
        if info:
            injections[i] = info
    video = VideoSequence(template.subject_id, video_id, tuple(frames), params.fps)
    return GeneratedVideo(video, labels, injections)


def subject_templates(params: SynthParams, rng) -> list[SubjectTemplate]:
    out = []
    for sid in params.subjects:
        off = rng.uniform(-params.subject_jitter, params.subject_jitter, size=2)
        out.append(SubjectTemplate(sid, (float(off[0]), float(off[1]))))
    return out


def training_reference(params: SynthParams, template: SubjectTemplate, rng) -> SubjectReference:
    """C3 reference from a separate clean 'training' video of the same subject."""
    phases = _phases(rng, params.frames_per_video, params.articulation_period)
    frames = []
    for i in range(params.frames_per_video):
        clean = clean_frame(template, phases[i], params.articulation_amplitude)
        frames.append(FrameRecord("train", i, clean.contours, annotated=clean.contours,
                                  annotated_landmarks=clean.landmarks))
    return compute_subject_reference(template.subject_id, frames)


def generate_dataset(params: SynthParams = SynthParams()):
    """Full labelled dataset; returns (Dataset, {video_id: GeneratedVideo})."""
    rng = np.random.default_rng(params.seed)
    templates = subject_templates(params, rng)
    videos, labels, generated, refs = [], {}, {}, {}
    for t in templates:
        refs[t.subject_id] = training_reference(params, t, rng)
        for v in range(params.videos_per_subject):
            vid = f"{t.subject_id}_v{v + 1:02d}"
            g = generate_video(params, t, vid, rng)
            videos.append(g.video)
            labels[vid] = g.labels
            generated[vid] = g
    ds = Dataset(tuple(videos), params.frame_height, params.frame_width, params.fps, refs, labels)
    return ds, generated
