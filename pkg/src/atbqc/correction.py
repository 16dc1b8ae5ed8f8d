"""Correction of flagged frames.

C1: temporal interpolation between the nearest unflagged frames, with
incomplete contours completed by appending the interpolated tail.
C2: frame errors are interpolated wholesale; then every flagged C2 gets its TB
relocated to the lowest dark (Otsu class-0) pixel inside C2 near the
predicted TB, and the contour is warped towards it with linear decay.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .contour import Contour, ContourKind, nearest_point_index, points_in_closed_contour, resample_contour
from .errors import EmptyInputError, RasterRequiredError, UncorrectableVideoError
from .landmarks import LandmarkConfig, c2_landmarks
from .records import ErrorFlags, FrameRecord, VideoSequence

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrectionConfig:
    tb_patch_rows: int = 15
    tb_patch_cols: int = 20
    warp_window: int = 10
    incomplete_length_fraction: float = 0.8
    prefix_agreement_px: float = 2.0

    def __post_init__(self):
        if self.tb_patch_rows < 2 or self.tb_patch_cols < 2:
            raise ValueError("TB patch must be at least 2 x 2")
        if self.warp_window < 1:
            raise ValueError("warp_window must be >= 1")
        if not 0.0 < self.incomplete_length_fraction < 1.0:
            raise ValueError("incomplete_length_fraction must lie in (0, 1)")


class LogEntry(NamedTuple):
    video_id: str
    frame_index: int
    contour: str
    action: str
    detail: str


# ---------------------------------------------------------------- interpolation

def interpolation_anchors(flags, f: int):
    """Nearest unflagged frame before and after ``f`` (None where absent)."""
    flags = list(flags)
    p = next((i for i in range(f - 1, -1, -1) if not flags[i]), None)
    q = next((i for i in range(f + 1, len(flags)) if not flags[i]), None)
    return p, q


def interpolate_contour(video: VideoSequence, f: int, kind: ContourKind, flags) -> Contour:
    """Linear interpolation of the contour at frame ``f`` from its unflagged neighbours."""
    p, q = interpolation_anchors(flags, f)
    if p is None and q is None:
        raise UncorrectableVideoError(f"{video.video_id}: no unflagged {kind.value} frame to interpolate from")
    if p is None or q is None:
        side = video[p if q is None else q].predicted[kind]
        return side.with_points(side.points.copy())
    prev = video[p].predicted[kind]
    nxt = video[q].predicted[kind]
    n = max(len(prev), len(nxt))
    # only the shorter anchor is resampled, so equal-length anchors keep their correspondence
    a = _at_count(prev, n)
    b = _at_count(nxt, n)
    pts = ((q - f) * a + (f - p) * b) / (q - p)
    return Contour(pts, kind, prev.closed)


def _at_count(c: Contour, n: int) -> np.ndarray:
    return c.points if len(c) == n else resample_contour(c, n).points


def _nearest_distances(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    d = np.hypot(src[:, None, 0] - dst[None, :, 0], src[:, None, 1] - dst[None, :, 1])
    return d.min(axis=1)


def classify_c1_error(pred_c1: Contour, interpolated: Contour, cfg: CorrectionConfig = CorrectionConfig()) -> str:
    """'incomplete' when the prediction is a short, agreeing prefix; otherwise 'frame'."""
    short = pred_c1.arc_length() < cfg.incomplete_length_fraction * interpolated.arc_length()
    if not short:
        return "frame"
    agree = _nearest_distances(pred_c1.points, interpolated.points).mean() < cfg.prefix_agreement_px
    return "incomplete" if agree else "frame"


def complete_c1(pred_c1: Contour, interpolated: Contour) -> Contour:
    """Append the interpolated tail beyond the prediction's end point; the prefix is kept as is."""
    j = nearest_point_index(interpolated, pred_c1.points[-1])
    tail = interpolated.points[j + 1:]
    if len(tail) == 0:
        log.warning("end point maps to the last interpolated point; nothing to append")
        return pred_c1
    if np.array_equal(tail[0], pred_c1.points[-1]):
        tail = tail[1:]
    return pred_c1.with_points(np.vstack([pred_c1.points, tail]))


# ---------------------------------------------------------------- Otsu + TB

class OtsuResult(NamedTuple):
    level: int
    degenerate: bool


def otsu_threshold(histogram) -> OtsuResult:
    """Otsu level over 256 bins; pixels <= level are class 0.

    Between-class variance is w0*w1*(mu0-mu1)^2 = (N*S0 - n0*S)^2 / (N^2 n0 n1),
    compared exactly with integer cross-multiplication; ties go to the
    smallest level.
    """
    h = np.asarray(histogram).astype(np.int64).ravel()
    if h.shape != (256,):
        raise ValueError("histogram must have 256 bins")
    if np.any(h < 0):
        raise ValueError("negative bin count")
    total = int(h.sum())
    if total == 0:
        raise EmptyInputError("empty histogram")
    occupied = np.flatnonzero(h)
    if len(occupied) == 1:
        return OtsuResult(int(occupied[0]), True)

    n0 = np.cumsum(h).tolist()
    s0 = np.cumsum(h * np.arange(256)).tolist()
    s_total = s0[-1]
    best_k, best_num, best_den = -1, 0, 1
    for k in range(256):
        n1 = total - n0[k]
        if n0[k] == 0 or n1 == 0:
            continue
        num = (total * s0[k] - n0[k] * s_total) ** 2
        den = n0[k] * n1
        if best_k < 0 or num * best_den > best_num * den:
            best_k, best_num, best_den = k, num, den
    return OtsuResult(best_k, False)


def image_histogram(pixels) -> np.ndarray:
    return np.bincount(np.asarray(pixels, dtype=np.uint8).ravel(), minlength=256)


class TBCorrection(NamedTuple):
    point: tuple[float, float]
    status: str  # "corrected" | "uncorrected"


def patch_bounds(center, shape, rows: int, cols: int):
    """Row/col slices of a rows x cols patch centred on ``center``, clipped to the frame."""
    r0 = int(np.floor(center[0] + 0.5)) - rows // 2
    c0 = int(np.floor(center[1] + 0.5)) - cols // 2
    r_lo, r_hi = max(r0, 0), min(r0 + rows, shape[0])
    c_lo, c_hi = max(c0, 0), min(c0 + cols, shape[1])
    return slice(r_lo, r_hi), slice(c_lo, c_hi)


def correct_tb(frame: FrameRecord, pred_tb, c2: Contour, cfg: CorrectionConfig = CorrectionConfig()) -> TBCorrection:
    """Lowest Otsu class-0 pixel inside C2 within the patch around the predicted TB."""
    if frame.raster is None:
        raise RasterRequiredError(f"{frame.video_id}:{frame.frame_index}: TB correction needs a raster")
    pred_tb = (float(pred_tb[0]), float(pred_tb[1]))
    rs, cs = patch_bounds(pred_tb, frame.raster.shape, cfg.tb_patch_rows, cfg.tb_patch_cols)
    patch = frame.raster[rs, cs]
    if patch.size == 0:
        return TBCorrection(pred_tb, "uncorrected")
    otsu = otsu_threshold(image_histogram(patch))
    if otsu.degenerate:
        return TBCorrection(pred_tb, "uncorrected")
    rr, cc = np.nonzero(patch <= otsu.level)
    if len(rr) == 0:
        return TBCorrection(pred_tb, "uncorrected")
    centers = np.column_stack([rr + rs.start, cc + cs.start]).astype(float)
    inside = points_in_closed_contour(c2, centers)
    centers = centers[inside]
    if len(centers) == 0:
        return TBCorrection(pred_tb, "uncorrected")
    # maximal row, then smallest col
    best = centers[np.lexsort((centers[:, 1], -centers[:, 0]))[0]]
    return TBCorrection((float(best[0]), float(best[1])), "corrected")


def warp_contour(c2: Contour, tb_index: int, new_tb, window: int) -> Contour:
    """Move the TB point onto ``new_tb``; neighbours k steps away move by d*(1 - k/(window+1))."""
    if not 0 <= tb_index < len(c2):
        raise IndexError(f"tb_index {tb_index} outside contour of {len(c2)} points")
    if window < 1:
        raise ValueError("window must be >= 1")
    d = np.asarray(new_tb, dtype=float) - c2.points[tb_index]
    k = np.abs(np.arange(len(c2)) - tb_index)
    weight = np.clip(1.0 - k / (window + 1), 0.0, None)
    pts = c2.points + weight[:, None] * d[None, :]
    pts[tb_index] = np.asarray(new_tb, dtype=float)
    return c2.with_points(pts)


# ---------------------------------------------------------------- pipeline

def correct_video(video: VideoSequence, flags: list[ErrorFlags], cfg: CorrectionConfig = CorrectionConfig(),
                  landmark_cfg: LandmarkConfig = LandmarkConfig()):
    """Apply C1 then C2 corrections to the flagged frames of one video.

    Returns the corrected video and the list of log entries. Unflagged frames
    are passed through untouched.
    """
    if len(flags) != len(video):
        raise ValueError(f"{video.video_id}: {len(flags)} flags for {len(video)} frames")
    vid = video.video_id
    entries: list[LogEntry] = []
    frames = list(video.frames)
    c1_flags = [f.c1_error for f in flags]
    c2_flags = [f.c2_error for f in flags]

    for i, fl in enumerate(flags):
        if not fl.c1_error:
            continue
        try:
            interp = interpolate_contour(video, i, ContourKind.C1, c1_flags)
        except UncorrectableVideoError as exc:
            log.warning("%s", exc)
            entries.append(LogEntry(vid, i, "C1", "uncorrectable", "no unflagged anchor frame"))
            continue
        pred = video[i].predicted[ContourKind.C1]
        kind = classify_c1_error(pred, interp, cfg)
        if kind == "incomplete":
            new = complete_c1(pred, interp)
            entries.append(LogEntry(vid, i, "C1", "complete", f"appended {len(new) - len(pred)} points"))
        else:
            new = interp
            entries.append(LogEntry(vid, i, "C1", "interpolate", f"{len(new)} points"))
        frames[i] = frames[i].with_predicted(ContourKind.C1, new)

    for i, fl in enumerate(flags):
        if fl.c2_error and fl.c2_kind == "frame":
            try:
                interp = interpolate_contour(video, i, ContourKind.C2, c2_flags)
            except UncorrectableVideoError as exc:
                log.warning("%s", exc)
                entries.append(LogEntry(vid, i, "C2", "uncorrectable", "no unflagged anchor frame"))
                continue
            frames[i] = frames[i].with_predicted(ContourKind.C2, interp)
            entries.append(LogEntry(vid, i, "C2", "interpolate", f"{len(interp)} points"))

    for i, fl in enumerate(flags):
        if not fl.c2_error:
            continue
        frame = frames[i]
        c2 = frame.predicted[ContourKind.C2]
        lm = c2_landmarks(c2, frame.annotated_landmarks, landmark_cfg)
        if not lm.resolved:
            entries.append(LogEntry(vid, i, "C2", "skip-tb", "tb-unresolvable"))
            continue
        old_tb = c2.points[lm.tb_index]
        try:
            fix = correct_tb(frame, old_tb, c2, cfg)
        except RasterRequiredError as exc:
            log.warning("%s", exc)
            entries.append(LogEntry(vid, i, "C2", "skip-tb", "raster-required"))
            continue
        if fix.status != "corrected":
            entries.append(LogEntry(vid, i, "C2", "tb-uncorrected", f"tb=({old_tb[0]:.3f},{old_tb[1]:.3f})"))
            continue
        warped = warp_contour(c2, lm.tb_index, fix.point, cfg.warp_window)
        frames[i] = frame.with_predicted(ContourKind.C2, warped)
        entries.append(LogEntry(
            vid, i, "C2", "tb-warp",
            f"tb=({old_tb[0]:.3f},{old_tb[1]:.3f})->({fix.point[0]:.3f},{fix.point[1]:.3f})",
        ))

    return video.with_frames(frames), entries
