"""On-disk dataset layout (version ``atbqc-v1``).

A dataset is a directory holding ``manifest.json`` plus per-video files, all
paths relative to the manifest:

    {
      "version": "atbqc-v1",
      "frame_height": 68, "frame_width": 68, "fps": 23.18,
      "labels": "labels.csv",                      # optional ground truth
      "subjects": [
        {"id": "F1", "c3_reference": [33.0, 57.0],  # optional
         "videos": [
           {"id": "F1_v01",
            "predicted": {"C1": "...csv", "C2": "...csv", "C3": "...csv"},
            "annotated": {...},                    # optional, same shape
            "landmarks": "F1_v01/landmarks.csv",   # optional, annotated
            "estimated_landmarks": "...csv",       # optional
            "rasters": "F1_v01/frames"}]}]         # optional, frame_%05d.pgm
    }

Contour CSV: ``frame_index,point_index,row,col``. Landmark CSV:
``frame_index,name,row,col,contour_index``. Flag CSV (labels, detector
output): ``video_id,frame_index,c1_error,c1_kind,c2_error,c2_kind,triggering_rule``
listing only frames with an error; unlisted frames are clean.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from pathlib import Path

import numpy as np
from PIL import Image

from .contour import Contour, ContourKind, LandmarkSet, LANDMARK_CONTOUR, Provenance
from .errors import (DatasetError, InvalidContourError, MalformedRowError, MissingFileError,
                     NonContiguousFramesError, OutOfBoundsError, UnsupportedVersionError)
from .records import DEFAULT_FPS, Dataset, ErrorFlags, FrameRecord, SubjectReference, VideoSequence

VERSION = "atbqc-v1"
MANIFEST = "manifest.json"
CONTOUR_HEADER = ["frame_index", "point_index", "row", "col"]
LANDMARK_HEADER = ["frame_index", "name", "row", "col", "contour_index"]
FLAG_HEADER = ["video_id", "frame_index", "c1_error", "c1_kind", "c2_error", "c2_kind", "triggering_rule"]
LOG_HEADER = ["video_id", "frame_index", "contour", "action", "detail"]


def fmt(x: float) -> str:
    """Shortest round-tripping decimal form of a float."""
    return repr(float(x))


# ---------------------------------------------------------------- low-level readers

def _open_csv(path: Path, header: list[str]):
    if not path.is_file():
        raise MissingFileError("file not found", path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0] != header:
        raise MalformedRowError(f"expected header {','.join(header)}", path, 1)
    # (line number, fields); line 1 is the header
    return [(n, r) for n, r in enumerate(rows[1:], start=2) if r]


def _int(v, path, line, what):
    try:
        return int(v)
    except ValueError:
        raise MalformedRowError(f"{what} {v!r} is not an integer", path, line) from None


def _float(v, path, line, what):
    try:
        x = float(v)
    except ValueError:
        raise MalformedRowError(f"{what} {v!r} is not a number", path, line) from None
    if not np.isfinite(x):
        raise MalformedRowError(f"{what} {v!r} is not finite", path, line)
    return x


def _check_bounds(row, col, shape, path, line):
    h, w = shape
    if not (0 <= row < h and 0 <= col < w):
        raise OutOfBoundsError(f"point ({row}, {col}) outside {h}x{w} frame", path, line)


def _check_contiguous(indices, path, line, what="frame indices"):
    if list(indices) != list(range(len(indices))):
        expected = next(i for i, v in enumerate(indices) if v != i)
        raise NonContiguousFramesError(
            f"{what} not contiguous from 0: expected {expected}, found {indices[expected]}", path, line)


def read_contour_csv(path: Path, kind: ContourKind, shape) -> list[Contour]:
    """One contour per frame, in frame order."""
    path = Path(path)
    frames: dict[int, list] = {}
    first_line: dict[int, int] = {}
    order: list[int] = []
    for line, r in _open_csv(path, CONTOUR_HEADER):
        if len(r) != 4:
            raise MalformedRowError(f"expected 4 fields, got {len(r)}", path, line)
        f = _int(r[0], path, line, "frame_index")
        k = _int(r[1], path, line, "point_index")
        row = _float(r[2], path, line, "row")
        col = _float(r[3], path, line, "col")
        _check_bounds(row, col, shape, path, line)
        if f not in frames:
            if f in order:
                raise MalformedRowError(f"frame {f} rows are not consecutive", path, line)
            frames[f] = []
            first_line[f] = line
            order.append(f)
        elif order[-1] != f:
            raise MalformedRowError(f"frame {f} rows are not consecutive", path, line)
        if k != len(frames[f]):
            raise MalformedRowError(f"point_index {k}, expected {len(frames[f])}", path, line)
        frames[f].append((row, col))
    _check_contiguous(order, path, first_line[order[-1]] if order else 1)
    out = []
    for f in order:
        try:
            out.append(Contour(np.array(frames[f]), kind))
        except InvalidContourError as exc:
            raise MalformedRowError(str(exc), path, first_line[f]) from None
    return out


def read_landmark_csv(path: Path, n_frames: int, contours: list[dict], provenance: Provenance, shape):
    path = Path(path)
    sets = [LandmarkSet() for _ in range(n_frames)]
    for line, r in _open_csv(path, LANDMARK_HEADER):
        if len(r) != 5:
            raise MalformedRowError(f"expected 5 fields, got {len(r)}", path, line)
        f = _int(r[0], path, line, "frame_index")
        name = r[1]
        if name not in LANDMARK_CONTOUR:
            raise MalformedRowError(f"unknown landmark {name!r}", path, line)
        row = _float(r[2], path, line, "row")
        col = _float(r[3], path, line, "col")
        idx = _int(r[4], path, line, "contour_index")
        _check_bounds(row, col, shape, path, line)
        if not 0 <= f < n_frames:
            raise OutOfBoundsError(f"frame_index {f} outside 0..{n_frames - 1}", path, line)
        sets[f].set(name, (row, col), idx, provenance)
        try:
            LandmarkSet({name: sets[f][name]}).validate(contours[f])
        except InvalidContourError as exc:
            raise MalformedRowError(str(exc), path, line) from None
    return sets


def read_pgm(path: Path) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise MissingFileError("raster not found", path)
    try:
        with Image.open(path) as im:
            if im.format != "PPM" or im.mode != "L":
                raise MalformedRowError(f"expected 8-bit P5 PGM, got {im.format} {im.mode}", path)
            return np.array(im, dtype=np.uint8)
    except (OSError, SyntaxError) as exc:
        raise MalformedRowError(f"unreadable PGM: {exc}", path) from None


def write_pgm(path: Path, raster: np.ndarray):
    Image.fromarray(np.ascontiguousarray(raster, dtype=np.uint8)).save(path, format="PPM")


def _parse_bool(v, path, line, what):
    if v not in ("0", "1"):
        raise MalformedRowError(f"{what} must be 0 or 1, got {v!r}", path, line)
    return v == "1"


def read_flags_csv(path: Path, frame_counts: dict[str, int] | None = None) -> dict[str, dict[int, ErrorFlags]]:
    """Sparse flag table -> {video_id: {frame_index: ErrorFlags}}."""
    path = Path(path)
    out: dict[str, dict[int, ErrorFlags]] = {}
    for line, r in _open_csv(path, FLAG_HEADER):
        if len(r) != 7:
            raise MalformedRowError(f"expected 7 fields, got {len(r)}", path, line)
        vid = r[0]
        f = _int(r[1], path, line, "frame_index")
        if frame_counts is not None:
            if vid not in frame_counts:
                raise MalformedRowError(f"unknown video {vid!r}", path, line)
            if not 0 <= f < frame_counts[vid]:
                raise OutOfBoundsError(f"frame_index {f} outside 0..{frame_counts[vid] - 1}", path, line)
        rules = frozenset(x for x in r[6].split(";") if x)
        try:
            fl = ErrorFlags(_parse_bool(r[2], path, line, "c1_error"), r[3] or None,
                            _parse_bool(r[4], path, line, "c2_error"), r[5] or None, rules)
        except ValueError as exc:
            raise MalformedRowError(str(exc), path, line) from None
        if f in out.setdefault(vid, {}):
            raise MalformedRowError(f"duplicate row for {vid} frame {f}", path, line)
        out[vid][f] = fl
    return out


def dense_flags(sparse: dict[int, ErrorFlags], n_frames: int) -> list[ErrorFlags]:
    return [sparse.get(i, ErrorFlags()) for i in range(n_frames)]


# ---------------------------------------------------------------- manifest

def _require(d: dict, key: str, path: Path, what: str):
    if key not in d:
        raise MalformedRowError(f"{what} is missing key {key!r}", path)
    return d[key]


def load_manifest(manifest_path) -> dict:
    path = Path(manifest_path)
    if not path.is_file():
        raise MissingFileError("manifest not found", path)
    try:
        with open(path, encoding="utf-8") as fh:
            m = json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedRowError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if not isinstance(m, dict):
        raise MalformedRowError("manifest must be a JSON object", path, 1)
    version = m.get("version")
    if version != VERSION:
        raise UnsupportedVersionError(f"unsupported version {version!r} (expected {VERSION})", path)
    return m


def _load_video(root: Path, vspec: dict, subject_id: str, shape, fps: float, mpath: Path) -> VideoSequence:
    vid = _require(vspec, "id", mpath, "video")
    pred_spec = _require(vspec, "predicted", mpath, f"video {vid}")
    predicted = {}
    for kind in ContourKind:
        rel = _require(pred_spec, kind.value, mpath, f"video {vid} predicted")
        predicted[kind] = read_contour_csv(root / rel, kind, shape)
    n = len(predicted[ContourKind.C1])
    for kind, cs in predicted.items():
        if len(cs) != n:
            raise NonContiguousFramesError(
                f"{kind.value} has {len(cs)} frames, C1 has {n}", root / pred_spec[kind.value])

    annotated = None
    if vspec.get("annotated"):
        annotated = {}
        for kind in ContourKind:
            rel = _require(vspec["annotated"], kind.value, mpath, f"video {vid} annotated")
            annotated[kind] = read_contour_csv(root / rel, kind, shape)
            if len(annotated[kind]) != n:
                raise NonContiguousFramesError(f"annotated {kind.value} has {len(annotated[kind])} frames, expected {n}",
                                               root / rel)
    per_frame_ann = [{k: annotated[k][i] for k in ContourKind} for i in range(n)] if annotated else None
    per_frame_pred = [{k: predicted[k][i] for k in ContourKind} for i in range(n)]

    ann_lms = est_lms = None
    if vspec.get("landmarks"):
        if per_frame_ann is None:
            raise MalformedRowError(f"video {vid}: annotated landmarks need annotated contours", mpath)
        ann_lms = read_landmark_csv(root / vspec["landmarks"], n, per_frame_ann, Provenance.ANNOTATED, shape)
    if vspec.get("estimated_landmarks"):
        est_lms = read_landmark_csv(root / vspec["estimated_landmarks"], n, per_frame_pred,
                                    Provenance.ESTIMATED, shape)

    rasters = None
    if vspec.get("rasters"):
        rdir = root / vspec["rasters"]
        rasters = []
        for i in range(n):
            img = read_pgm(rdir / f"frame_{i:05d}.pgm")
            if img.shape != tuple(shape):
                raise OutOfBoundsError(f"raster is {img.shape[0]}x{img.shape[1]}, manifest says {shape[0]}x{shape[1]}",
                                       rdir / f"frame_{i:05d}.pgm")
            rasters.append(img)

    frames = []
    for i in range(n):
        frames.append(FrameRecord(
            video_id=vid,
            frame_index=i,
            predicted=per_frame_pred[i],
            raster=None if rasters is None else rasters[i],
            annotated=None if per_frame_ann is None else per_frame_ann[i],
            annotated_landmarks=None if ann_lms is None else ann_lms[i],
            estimated_landmarks=None if est_lms is None else est_lms[i],
        ))
    return VideoSequence(subject_id, vid, tuple(frames), fps)


def load_dataset(manifest_path) -> Dataset:
    """Read and validate a dataset; every failure names the offending file (and line)."""
    mpath = Path(manifest_path)
    m = load_manifest(mpath)
    root = mpath.parent
    h = _require(m, "frame_height", mpath, "manifest")
    w = _require(m, "frame_width", mpath, "manifest")
    if not (isinstance(h, int) and isinstance(w, int) and h > 0 and w > 0):
        raise MalformedRowError("frame size must be positive integers", mpath)
    fps = float(m.get("fps", DEFAULT_FPS))
    videos, refs = [], {}
    for s in _require(m, "subjects", mpath, "manifest"):
        sid = _require(s, "id", mpath, "subject")
        ref = s.get("c3_reference")
        if ref is not None:
            if len(ref) != 2 or not (0 <= ref[0] < h and 0 <= ref[1] < w):
                raise OutOfBoundsError(f"subject {sid} c3_reference {ref} outside frame", mpath)
            refs[sid] = SubjectReference(sid, (float(ref[0]), float(ref[1])))
        for v in _require(s, "videos", mpath, f"subject {sid}"):
            videos.append(_load_video(root, v, sid, (h, w), fps, mpath))
    ids = [v.video_id for v in videos]
    if len(set(ids)) != len(ids):
        raise MalformedRowError("duplicate video ids", mpath)
    labels = None
    if m.get("labels"):
        counts = {v.video_id: len(v) for v in videos}
        sparse = read_flags_csv(root / m["labels"], counts)
        labels = {v.video_id: dense_flags(sparse.get(v.video_id, {}), len(v)) for v in videos}
    return Dataset(tuple(videos), h, w, fps, refs, labels)


# ---------------------------------------------------------------- writers

def _write_csv(path: Path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(header)
    wr.writerows(rows)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(buf.getvalue())
    except OSError as exc:
        raise DatasetError(f"write failed: {exc.strerror}", path) from None


def contour_rows(contours):
    for f, c in enumerate(contours):
        for k, (r, col) in enumerate(c.points):
            yield [f, k, fmt(r), fmt(col)]


def landmark_rows(sets):
    for f, lms in enumerate(sets):
        if lms is None:
            continue
        for name in lms.names():
            lm = lms[name]
            yield [f, name, fmt(lm.point[0]), fmt(lm.point[1]), lm.index]


def flag_rows(flags_by_video: dict[str, list[ErrorFlags]]):
    for vid, flags in flags_by_video.items():
        for i, fl in enumerate(flags):
            if fl.any:
                yield [vid, i, int(fl.c1_error), fl.c1_kind or "", int(fl.c2_error), fl.c2_kind or "",
                       ";".join(sorted(fl.triggering_rule))]


def write_flags_csv(path, flags_by_video):
    _write_csv(path, FLAG_HEADER, flag_rows(flags_by_video))


def write_log_csv(path, entries):
    _write_csv(path, LOG_HEADER, ([e.video_id, e.frame_index, e.contour, e.action, e.detail] for e in entries))


def write_dataset(ds: Dataset, root, rasters: bool = True) -> Path:
    """Write ``ds`` under ``root``; returns the manifest path."""
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    subjects = []
    for sid in ds.subjects:
        ref = ds.references.get(sid)
        entry = {"id": sid, "c3_reference": None if ref is None else [ref.c3_ref_point[0], ref.c3_ref_point[1]],
                 "videos": []}
        for v in ds.videos_of([sid]):
            vdir = root / v.video_id
            vspec = {"id": v.video_id, "predicted": {}}
            for kind in ContourKind:
                rel = f"{v.video_id}/predicted_{kind.value}.csv"
                _write_csv(root / rel, CONTOUR_HEADER, contour_rows(f.predicted[kind] for f in v))
                vspec["predicted"][kind.value] = rel
            if v.has_annotations:
                vspec["annotated"] = {}
                for kind in ContourKind:
                    rel = f"{v.video_id}/annotated_{kind.value}.csv"
                    _write_csv(root / rel, CONTOUR_HEADER, contour_rows(f.annotated[kind] for f in v))
                    vspec["annotated"][kind.value] = rel
                if any(f.annotated_landmarks is not None for f in v):
                    rel = f"{v.video_id}/landmarks.csv"
                    _write_csv(root / rel, LANDMARK_HEADER, landmark_rows(f.annotated_landmarks for f in v))
                    vspec["landmarks"] = rel
            if any(f.estimated_landmarks is not None for f in v):
                rel = f"{v.video_id}/estimated_landmarks.csv"
                _write_csv(root / rel, LANDMARK_HEADER, landmark_rows(f.estimated_landmarks for f in v))
                vspec["estimated_landmarks"] = rel
            if rasters and all(f.raster is not None for f in v):
                rdir = vdir / "frames"
                rdir.mkdir(parents=True, exist_ok=True)
                for f in v:
                    write_pgm(rdir / f"frame_{f.frame_index:05d}.pgm", f.raster)
                vspec["rasters"] = f"{v.video_id}/frames"
            entry["videos"].append(vspec)
        subjects.append(entry)
    manifest = {
        "version": VERSION,
        "frame_height": ds.frame_height,
        "frame_width": ds.frame_width,
        "fps": ds.fps,
        "subjects": subjects,
    }
    if ds.labels is not None:
        write_flags_csv(root / "labels.csv", ds.labels)
        manifest["labels"] = "labels.csv"
    mpath = root / MANIFEST
    with open(mpath, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=False)
        fh.write("\n")
    return mpath


def store_results(report, corrected: Dataset | None, out_dir) -> list[Path]:
    """Write report tables (``report.tables()``: name -> (header, rows)) and the corrected dataset.

    Output is a pure function of the inputs: no timestamps, fixed row order.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DatasetError(f"cannot create output directory: {exc.strerror}", out) from None
    written = []
    if report is not None:
        for name, (header, rows) in report.tables().items():
            p = out / f"{name}.csv"
            _write_csv(p, header, rows)
            written.append(p)
    if corrected is not None:
        written.append(write_dataset(corrected, out / "corrected"))
    return written


def tree_digest(root) -> dict[str, str]:
    """sha256 of every file under ``root`` keyed by relative path (for determinism checks)."""
    root = Path(root)
    out = {}
    for dirpath, _, files in os.walk(root):
        for name in sorted(files):
            p = Path(dirpath) / name
            out[str(p.relative_to(root))] = hashlib.sha256(p.read_bytes()).hexdigest()
    return dict(sorted(out.items()))
