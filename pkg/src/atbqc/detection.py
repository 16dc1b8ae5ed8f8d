"""Threshold rules that flag erroneous C1/C2 predictions frame by frame.

C1 rules look at the estimated VEL: its distance from the video's mean VEL
and from a fixed per-subject point on the pharyngeal wall (C3). C2 rules look
at the predicted point count and at the LL-TB segment (slope and length).
A contour is flagged when any enabled rule fires.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .contour import ContourKind, nearest_point_index
from .correction import CorrectionConfig, classify_c1_error, interpolate_contour
from .errors import DegenerateContourError, MissingReferenceError, UncorrectableVideoError
from .landmarks import LandmarkConfig, c2_landmarks, extract_vel
from .records import ErrorFlags, FrameRecord, SubjectReference, VideoSequence

log = logging.getLogger(__name__)

C1_RULES = ("mean_velum", "vel_to_c3")
C2_RULES = ("point_count", "slope", "distance")
ALL_RULES = C1_RULES + C2_RULES
# rules that flag when the statistic exceeds the threshold; the rest flag below it
GREATER_RULES = frozenset({"mean_velum", "vel_to_c3"})
SLOPE_EPS = 1e-9


@dataclass(frozen=True)
class DetectorThresholds:
    mean_vel_dist: float = 3.5
    vel_to_c3_dist: float = 8.0
    point_count_fraction: float = 0.65
    ll_tb_slope: float = 0.7
    ll_tb_dist: float = 8.0

    def __post_init__(self):
        for name in ("mean_vel_dist", "vel_to_c3_dist", "ll_tb_slope", "ll_tb_dist", "point_count_fraction"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not self.point_count_fraction < 1:
            raise ValueError("point_count_fraction must lie in (0, 1)")

    def for_rule(self, rule: str) -> float:
        return {
            "mean_velum": self.mean_vel_dist,
            "vel_to_c3": self.vel_to_c3_dist,
            "point_count": self.point_count_fraction,
            "slope": self.ll_tb_slope,
            "distance": self.ll_tb_dist,
        }[rule]


RULE_FIELD = {
    "mean_velum": "mean_vel_dist",
    "vel_to_c3": "vel_to_c3_dist",
    "point_count": "point_count_fraction",
    "slope": "ll_tb_slope",
    "distance": "ll_tb_dist",
}


# ---------------------------------------------------------------- landmarks per frame

def frame_vel(frame: FrameRecord, cfg: LandmarkConfig = LandmarkConfig()):
    """Estimated VEL on the predicted C1, or None for a degenerate contour."""
    try:
        return extract_vel(frame.predicted[ContourKind.C1], cfg)[1]
    except DegenerateContourError:
        return None


def frame_ll_tb(frame: FrameRecord, cfg: LandmarkConfig = LandmarkConfig()):
    """(LL point, TB point) on the predicted C2, or None when TB cannot be resolved."""
    c2 = frame.predicted[ContourKind.C2]
    lm = c2_landmarks(c2, frame.annotated_landmarks, cfg)
    if not lm.resolved:
        return None
    return c2.points[lm.ll_index], c2.points[lm.tb_index]


def ll_tb_slope(ll, tb) -> float:
    return abs(tb[0] - ll[0]) / max(abs(tb[1] - ll[1]), SLOPE_EPS)


def ll_tb_distance(ll, tb) -> float:
    return float(np.hypot(tb[0] - ll[0], tb[1] - ll[1]))


# ---------------------------------------------------------------- per-rule statistics

@dataclass(frozen=True)
class VideoStatistics:
    """Per-frame detector statistics; NaN marks an unresolvable landmark."""

    video_id: str
    mean_velum: np.ndarray
    vel_to_c3: np.ndarray
    point_count: np.ndarray
    slope: np.ndarray
    distance: np.ndarray

    def __len__(self):
        return len(self.point_count)


def vel_points(video: VideoSequence, cfg: LandmarkConfig = LandmarkConfig()) -> np.ndarray:
    out = np.full((len(video), 2), np.nan)
    for i, frame in enumerate(video):
        v = frame_vel(frame, cfg)
        if v is not None:
            out[i] = v
    return out


def mean_velum_deviation(vels: np.ndarray) -> np.ndarray:
    ok = ~np.isnan(vels[:, 0])
    if not ok.any():
        return np.full(len(vels), np.nan)
    mean = vels[ok].mean(axis=0)
    return np.hypot(vels[:, 0] - mean[0], vels[:, 1] - mean[1])


def video_statistics(video: VideoSequence, ref: SubjectReference | None = None,
                     cfg: LandmarkConfig = LandmarkConfig()) -> VideoStatistics:
    vels = vel_points(video, cfg)
    if ref is not None:
        rp = np.asarray(ref.c3_ref_point, dtype=float)
        to_c3 = np.hypot(vels[:, 0] - rp[0], vels[:, 1] - rp[1])
    else:
        to_c3 = np.full(len(video), np.nan)
    counts = np.array([len(f.predicted[ContourKind.C2]) for f in video], dtype=float)
    slope = np.full(len(video), np.nan)
    dist = np.full(len(video), np.nan)
    for i, frame in enumerate(video):
        pair = frame_ll_tb(frame, cfg)
        if pair is not None:
            slope[i] = ll_tb_slope(*pair)
            dist[i] = ll_tb_distance(*pair)
    return VideoStatistics(video.video_id, mean_velum_deviation(vels), to_c3, counts, slope, dist)


def rule_flags(stats: VideoStatistics, rule: str, threshold: float, reference_count: float | None = None) -> np.ndarray:
    """Boolean flags of one rule; NaN statistics (unresolvable landmarks) always flag."""
    if rule == "point_count":
        if reference_count is None or reference_count <= 0:
            raise ValueError("point-count rule needs a positive reference mean count")
        return stats.point_count < threshold * reference_count
    values = getattr(stats, rule)
    nan = np.isnan(values)
    with np.errstate(invalid="ignore"):
        fired = values > threshold if rule in GREATER_RULES else values < threshold
    return fired | nan


# ---------------------------------------------------------------- public rule API

def detect_c1_mean_velum(video: VideoSequence, t: float, cfg: LandmarkConfig = LandmarkConfig()) -> np.ndarray:
    if len(video) == 1:
        log.warning("%s: single-frame video, mean-velum rule cannot fire", video.video_id)
    return rule_flags(video_statistics(video, None, cfg), "mean_velum", t)


def detect_c1_vel_to_c3(video: VideoSequence, ref: SubjectReference | None, t: float,
                        cfg: LandmarkConfig = LandmarkConfig()) -> np.ndarray:
    if ref is None:
        raise MissingReferenceError(f"no C3 reference for subject {video.subject_id}")
    return rule_flags(video_statistics(video, ref, cfg), "vel_to_c3", t)


def compute_subject_reference(subject_id: str, frames, cfg: LandmarkConfig = LandmarkConfig()) -> SubjectReference:
    """Mean over annotated frames of the C3 point nearest to the annotated VEL."""
    nearest = []
    for frame in frames:
        if frame.annotated is None or ContourKind.C3 not in frame.annotated:
            continue
        lms = frame.annotated_landmarks
        if lms is not None and "VEL" in lms:
            vel = lms["VEL"].point
        elif ContourKind.C1 in frame.annotated:
            vel = extract_vel(frame.annotated[ContourKind.C1], cfg)[1]
        else:
            continue
        c3 = frame.annotated[ContourKind.C3]
        nearest.append(c3.points[nearest_point_index(c3, vel)])
    if not nearest:
        raise MissingReferenceError(f"subject {subject_id}: no annotated frames with C3 and VEL")
    m = np.mean(nearest, axis=0)
    return SubjectReference(subject_id, (float(m[0]), float(m[1])))


def detect_c2_point_count(video: VideoSequence, reference_mean_count: float, fraction: float = 0.65) -> np.ndarray:
    stats = video_statistics(video)
    return rule_flags(stats, "point_count", fraction, reference_mean_count)


def detect_c2_slope(frame: FrameRecord, t: float, cfg: LandmarkConfig = LandmarkConfig()) -> bool:
    pair = frame_ll_tb(frame, cfg)
    return True if pair is None else bool(ll_tb_slope(*pair) < t)


def detect_c2_distance(frame: FrameRecord, t: float, cfg: LandmarkConfig = LandmarkConfig()) -> bool:
    pair = frame_ll_tb(frame, cfg)
    return True if pair is None else bool(ll_tb_distance(*pair) < t)


def detect_combined(rule_flags_: dict[str, bool], rules=ALL_RULES, c1_kind: str = "frame",
                    unresolved: frozenset = frozenset()) -> ErrorFlags:
    """OR the enabled rules. A point-count hit makes the C2 error a frame error.

    ``unresolved`` names landmarks ("vel", "tb") that could not be extracted;
    they are recorded as their own triggering rule.
    """
    fired = {r for r in rules if rule_flags_.get(r, False)}
    c1_rules = fired & set(C1_RULES)
    c2_rules = fired & set(C2_RULES)
    if "vel" in unresolved and set(rules) & set(C1_RULES):
        c1_rules.add("vel_unresolvable")
    if "tb" in unresolved and set(rules) & {"slope", "distance"}:
        c2_rules.add("tb_unresolvable")
    c1 = bool(c1_rules)
    c2 = bool(c2_rules)
    c2_kind = None
    if c2:
        c2_kind = "frame" if "point_count" in c2_rules else "tb"
    return ErrorFlags(c1, c1_kind if c1 else None, c2, c2_kind, frozenset(c1_rules | c2_rules))


def c1_error_kinds(video: VideoSequence, c1_flags, cfg: CorrectionConfig = CorrectionConfig()) -> list[str | None]:
    """Incomplete-vs-frame label of every flagged C1, using the interpolated contour."""
    out = []
    for i, flagged in enumerate(c1_flags):
        if not flagged:
            out.append(None)
            continue
        try:
            interp = interpolate_contour(video, i, ContourKind.C1, c1_flags)
        except UncorrectableVideoError:
            out.append("frame")
            continue
        out.append(classify_c1_error(video[i].predicted[ContourKind.C1], interp, cfg))
    return out


def detect_video(video: VideoSequence, thresholds: DetectorThresholds, ref: SubjectReference | None = None,
                 reference_count: float | None = None, rules=ALL_RULES,
                 landmark_cfg: LandmarkConfig = LandmarkConfig(),
                 correction_cfg: CorrectionConfig = CorrectionConfig(),
                 stats: VideoStatistics | None = None) -> list[ErrorFlags]:
    """Combined per-frame flags for one video."""
    rules = tuple(rules)
    if "vel_to_c3" in rules and ref is None:
        raise MissingReferenceError(f"no C3 reference for subject {video.subject_id}")
    if stats is None:
        stats = video_statistics(video, ref, landmark_cfg)
    if "mean_velum" in rules and len(video) == 1:
        log.warning("%s: single-frame video, mean-velum rule cannot fire", video.video_id)
    per_rule = {}
    for r in rules:
        per_rule[r] = rule_flags(stats, r, thresholds.for_rule(r), reference_count)
    vel_nan = np.isnan(stats.mean_velum)
    tb_nan = np.isnan(stats.slope)
    c1_any = np.zeros(len(video), dtype=bool)
    for r in set(rules) & set(C1_RULES):
        c1_any |= per_rule[r]
    if set(rules) & set(C1_RULES):
        c1_any |= vel_nan
    kinds = c1_error_kinds(video, c1_any, correction_cfg)
    out = []
    for i in range(len(video)):
        unresolved = frozenset(n for n, miss in (("vel", vel_nan[i]), ("tb", tb_nan[i])) if miss)
        flags_i = {}
        for r in rules:
            missing = vel_nan[i] if r in C1_RULES else (tb_nan[i] and r != "point_count")
            flags_i[r] = bool(per_rule[r][i]) and not missing
        out.append(detect_combined(flags_i, rules, kinds[i] or "frame", unresolved))
    return out
