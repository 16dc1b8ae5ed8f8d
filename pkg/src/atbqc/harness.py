"""Subject-wise cross-validation: threshold selection on validation subjects,
detection and correction on test subjects, pre/post metric tables."""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .contour import ContourKind
from .correction import CorrectionConfig, LogEntry, correct_video
from .detection import (ALL_RULES, C1_RULES, GREATER_RULES, RULE_FIELD, DetectorThresholds,
                        VideoStatistics, compute_subject_reference, detect_video, rule_flags, video_statistics)
from .errors import (ConfigurationError, EvaluationImpossibleError, MissingReferenceError, RegionUndefinedError,
                     ThresholdUndefinedError)
from .landmarks import LandmarkConfig, c2_landmarks, extract_vel
from .metrics import dtw_distance, landmark_euclidean, tb_rdtw, vel_rdtw
from .records import Dataset, ErrorFlags, SubjectReference, VideoSequence

log = logging.getLogger(__name__)


def _grid(start, stop, step):
    n = int(round((stop - start) / step))
    return tuple(float(round(start + k * step, 10)) for k in range(n + 1))


DEFAULT_GRIDS = {
    "mean_velum": _grid(1.0, 10.0, 0.5),
    "vel_to_c3": _grid(4.0, 14.0, 0.5),
    "point_count": (0.65,),
    "slope": _grid(0.1, 2.0, 0.1),
    "distance": _grid(4.0, 14.0, 0.5),
}

# thresholds reported for the four folds of the original study; used when selection is off
DEFAULT_FOLD_THRESHOLDS = (
    DetectorThresholds(3.5, 8.0, 0.65, 0.7, 8.0),
    DetectorThresholds(4.0, 8.0, 0.65, 0.7, 7.0),
    DetectorThresholds(4.0, 8.0, 0.65, 0.8, 10.0),
    DetectorThresholds(4.0, 7.5, 0.65, 1.0, 10.0),
)

C1_METRICS = ("EVEL", "VELrDTW", "DTW_C1")
C2_METRICS = ("ETB", "TBrDTW", "DTW_C2")
METRIC_COLUMNS = ["metric", "pre_mean", "pre_std", "post_mean", "post_std", "improvement_pct"]


# ---------------------------------------------------------------- config

@dataclass(frozen=True)
class HarnessConfig:
    seed: int = 0
    n_folds: int = 4
    n_subjects: int = 10
    n_validation: int = 3
    select_thresholds: bool = True
    rules: tuple = ALL_RULES
    grids: dict = field(default_factory=lambda: dict(DEFAULT_GRIDS))
    default_thresholds: tuple = DEFAULT_FOLD_THRESHOLDS
    # reference mean C2 point count for plain detection runs; None -> dataset mean
    reference_count: float | None = None
    landmarks: LandmarkConfig = LandmarkConfig()
    correction: CorrectionConfig = CorrectionConfig()
    velum_fraction: float = 0.30

    def __post_init__(self):
        unknown = set(self.rules) - set(ALL_RULES)
        if unknown:
            raise ConfigurationError(f"unknown rules {sorted(unknown)}")
        for r in self.rules:
            if not self.grids.get(r):
                raise ConfigurationError(f"empty grid for rule {r}")
        if not 0 < self.n_validation < self.n_subjects:
            raise ConfigurationError("n_validation must lie in (0, n_subjects)")
        if self.n_folds < 1 or not self.default_thresholds:
            raise ConfigurationError("need at least one fold and one default threshold set")

    def fold_defaults(self, fold_id: int) -> DetectorThresholds:
        return self.default_thresholds[(fold_id - 1) % len(self.default_thresholds)]

    @classmethod
    def from_dict(cls, d: dict) -> "HarnessConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys {sorted(unknown)}")
        try:
            if "rules" in d:
                d["rules"] = tuple(d["rules"])
            if "grids" in d:
                grids = dict(DEFAULT_GRIDS)
                for rule, g in d["grids"].items():
                    grids[rule] = _grid(g["start"], g["stop"], g["step"]) if isinstance(g, dict) else tuple(map(float, g))
                d["grids"] = grids
            if "default_thresholds" in d:
                d["default_thresholds"] = tuple(DetectorThresholds(**t) for t in d["default_thresholds"])
            if "landmarks" in d:
                d["landmarks"] = LandmarkConfig(**d["landmarks"])
            if "correction" in d:
                d["correction"] = CorrectionConfig(**d["correction"])
            return cls(**d)
        except (TypeError, ValueError, KeyError) as exc:
            raise ConfigurationError(f"invalid config: {exc}") from None

    @classmethod
    def load(cls, path) -> "HarnessConfig":
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config not found: {path}")
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "n_folds": self.n_folds,
            "n_subjects": self.n_subjects,
            "n_validation": self.n_validation,
            "select_thresholds": self.select_thresholds,
            "rules": list(self.rules),
            "grids": {r: list(g) for r, g in self.grids.items()},
            "default_thresholds": [dataclasses.asdict(t) for t in self.default_thresholds],
            "reference_count": self.reference_count,
            "landmarks": dataclasses.asdict(self.landmarks),
            "correction": dataclasses.asdict(self.correction),
            "velum_fraction": self.velum_fraction,
        }


# ---------------------------------------------------------------- F-score and folds

class FScore(NamedTuple):
    value: float
    degenerate: bool
    tp: int
    fp: int
    fn: int


def f_score(flags_pred, flags_true) -> FScore:
    """F1 on the positive (erroneous) class; 0 with ``degenerate`` set when P + R = 0."""
    p = np.asarray(flags_pred, dtype=bool)
    t = np.asarray(flags_true, dtype=bool)
    if p.shape != t.shape:
        raise ValueError(f"length mismatch: {p.shape} vs {t.shape}")
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    if tp == 0:
        return FScore(0.0, True, tp, fp, fn)
    return FScore(2 * tp / (2 * tp + fp + fn), False, tp, fp, fn)


@dataclass(frozen=True)
class FoldSpec:
    fold_id: int
    validation_subjects: tuple
    test_subjects: tuple
    seed: int


def make_folds(subjects, seed: int, n_folds: int = 4, n_validation: int = 3, n_subjects: int = 10) -> list[FoldSpec]:
    """Independent seeded draws of ``n_validation`` validation subjects per fold."""
    subjects = list(subjects)
    if len(subjects) != n_subjects or len(set(subjects)) != len(subjects):
        raise ConfigurationError(f"need exactly {n_subjects} distinct subjects, got {len(subjects)}")
    rng = np.random.default_rng(seed)
    folds = []
    for k in range(n_folds):
        pick = set(rng.choice(len(subjects), size=n_validation, replace=False).tolist())
        val = tuple(s for i, s in enumerate(subjects) if i in pick)
        test = tuple(s for i, s in enumerate(subjects) if i not in pick)
        folds.append(FoldSpec(k + 1, val, test, seed))
    return folds


# ---------------------------------------------------------------- selection

@dataclass(frozen=True)
class RuleData:
    """Detector statistics of one video with its ground-truth labels."""

    stats: VideoStatistics
    labels: tuple

    def truth(self, rule: str) -> np.ndarray:
        if rule in C1_RULES:
            return np.array([fl.c1_error for fl in self.labels], dtype=bool)
        return np.array([fl.c2_error for fl in self.labels], dtype=bool)


def select_threshold(rule: str, validation: list[RuleData], grid, reference_count: float | None = None) -> float:
    """Grid value with the best validation F-score; ties go to the most sensitive value."""
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    truth = np.concatenate([v.truth(rule) for v in validation]) if validation else np.zeros(0, bool)
    if not truth.any():
        raise ThresholdUndefinedError(f"rule {rule}: no positive frames in validation data")
    greater = rule in GREATER_RULES
    # most sensitive first: smallest t for '>' rules, largest for '<' rules
    order = sorted(grid) if greater else sorted(grid, reverse=True)
    best_t, best_f = None, -1.0
    for t in order:
        pred = np.concatenate([rule_flags(v.stats, rule, t, reference_count) for v in validation])
        f = f_score(pred, truth).value
        if f > best_f:
            best_t, best_f = t, f
    return best_t


class FoldSelection(NamedTuple):
    thresholds: DetectorThresholds
    selected: dict  # rule -> value, or None when undefined
    skipped: dict  # rule -> reason
    reference_count: float
    used_videos: frozenset


def select_fold_thresholds(validation_videos: list[VideoSequence], labels: dict, stats: dict,
                           cfg: HarnessConfig, fold_id: int) -> FoldSelection:
    """Thresholds and reference point count from validation videos only."""
    used = frozenset(v.video_id for v in validation_videos)
    counts = [len(f.predicted[ContourKind.C2]) for v in validation_videos for f in v]
    if not counts:
        raise ConfigurationError(f"fold {fold_id}: no validation frames")
    ref_count = float(np.mean(counts))
    defaults = cfg.fold_defaults(fold_id)
    values = {RULE_FIELD[r]: defaults.for_rule(r) for r in ALL_RULES}
    selected, skipped = {}, {}
    data = [RuleData(stats[v.video_id], tuple(labels[v.video_id])) for v in validation_videos]
    for rule in cfg.rules:
        if not cfg.select_thresholds:
            selected[rule] = defaults.for_rule(rule)
            continue
        try:
            t = select_threshold(rule, data, cfg.grids[rule], ref_count)
        except ThresholdUndefinedError as exc:
            log.warning("fold %d: %s; rule skipped", fold_id, exc)
            selected[rule] = None
            skipped[rule] = str(exc)
            continue
        selected[rule] = t
        values[RULE_FIELD[rule]] = t
    return FoldSelection(DetectorThresholds(**values), selected, skipped, ref_count, used)


# ---------------------------------------------------------------- metrics per frame

def _safe(fn):
    try:
        return fn()
    except RegionUndefinedError:
        return math.nan


def frame_metrics(pred, gt, gt_lms, cfg: HarnessConfig) -> dict[str, float]:
    """All region and global metrics of one frame; NaN where a region is undefined."""
    lc = cfg.landmarks
    out = {}
    c1, g1 = pred[ContourKind.C1], gt[ContourKind.C1]
    gt_vel = gt_lms["VEL"].point if gt_lms is not None and "VEL" in gt_lms else extract_vel(g1, lc)[1]
    out["EVEL"] = landmark_euclidean(extract_vel(c1, lc)[1], gt_vel)
    out["VELrDTW"] = vel_rdtw(c1, g1, cfg.velum_fraction)
    out["DTW_C1"] = dtw_distance(c1, g1)

    c2, g2 = pred[ContourKind.C2], gt[ContourKind.C2]
    plm = c2_landmarks(c2, gt_lms, lc)
    if gt_lms is not None and "TB" in gt_lms:
        gt_tb = gt_lms["TB"].point
    else:
        glm = c2_landmarks(g2, gt_lms, lc)
        gt_tb = None if glm.tb_index is None else g2.points[glm.tb_index]
    out["ETB"] = math.nan if plm.tb_index is None or gt_tb is None else landmark_euclidean(c2.points[plm.tb_index], gt_tb)
    out["TBrDTW"] = _safe(lambda: tb_rdtw(c2, g2, gt_lms, cfg=lc))
    out["DTW_C2"] = dtw_distance(c2, g2)
    return out


# ---------------------------------------------------------------- evaluation

@dataclass
class FoldResult:
    fold: FoldSpec
    selection: FoldSelection
    fscores: dict  # detector -> FScore
    flags: dict  # video_id -> list[ErrorFlags]
    log: list
    # per test frame: (video_id, frame_index, c1_label, c2_label, pre metrics, post metrics)
    frames: list


@dataclass
class EvaluationReport:
    folds: list = field(default_factory=list)
    error_positions: dict = field(default_factory=dict)  # video_id -> list[ErrorFlags]

    # ---- aggregates

    def metric_values(self, metric: str, scope: str = "errors"):
        """Paired (pre, post) arrays over frames in scope; frames undefined on either side are dropped."""
        pre, post, excluded = [], [], 0
        c1 = metric in C1_METRICS
        for fr in self.folds:
            for vid, i, l1, l2, m0, m1 in fr.frames:
                if scope == "errors" and not (l1 if c1 else l2):
                    continue
                a, b = m0[metric], m1[metric]
                if math.isnan(a) or math.isnan(b):
                    excluded += 1
                    continue
                pre.append(a)
                post.append(b)
        return np.array(pre), np.array(post), excluded

    def metric_rows(self):
        rows = []
        for scope, suffix in (("errors", ""), ("all", "_all")):
            for m in C1_METRICS + C2_METRICS:
                pre, post, _ = self.metric_values(m, scope)
                stats = [_mean(pre), _std(pre), _mean(post), _std(post)]
                rows.append([m + suffix] + stats + [improvement_pct(stats[0], stats[2])])
        return rows

    def fscore_summary(self):
        out = {}
        for name in ("c1_combined", "c2_combined") + ALL_RULES:
            vals = [fr.fscores[name].value for fr in self.folds if name in fr.fscores]
            out[name] = (_mean(np.array(vals)), _std(np.array(vals)), len(vals))
        return out

    def combined_fscores(self):
        """Pooled F-score over all folds' test frames per combined detector."""
        out = {}
        for name in ("c1_combined", "c2_combined"):
            tp = sum(fr.fscores[name].tp for fr in self.folds)
            fp = sum(fr.fscores[name].fp for fr in self.folds)
            fn = sum(fr.fscores[name].fn for fr in self.folds)
            out[name] = FScore(0.0, True, tp, fp, fn) if tp == 0 else FScore(2 * tp / (2 * tp + fp + fn), False, tp, fp, fn)
        return out

    # ---- tables for store_results

    def tables(self) -> dict:
        fmt = _cell
        metrics = [[r[0]] + [fmt(x) for x in r[1:]] for r in self.metric_rows()]
        counts = []
        for scope, suffix in (("errors", ""), ("all", "_all")):
            for m in C1_METRICS + C2_METRICS:
                pre, _, excluded = self.metric_values(m, scope)
                counts.append([m + suffix, len(pre), excluded])
        folds = []
        for fr in self.folds:
            row = [fr.fold.fold_id, ";".join(fr.fold.validation_subjects), ";".join(fr.fold.test_subjects)]
            row += [fmt(fr.selection.selected[r]) if fr.selection.selected.get(r) is not None else ""
                    for r in ALL_RULES]
            row += [fmt(fr.selection.reference_count)]
            for name in ("c1_combined", "c2_combined"):
                s = fr.fscores[name]
                row += [fmt(s.value), int(s.degenerate)]
            folds.append(row)
        summary = [[name, fmt(m), fmt(s), n] for name, (m, s, n) in self.fscore_summary().items()]
        skipped = [[fr.fold.fold_id, rule, reason] for fr in self.folds for rule, reason in fr.selection.skipped.items()]
        positions = [[vid, i, int(fl.c1_error), int(fl.c2_error)]
                     for vid, flags in self.error_positions.items() for i, fl in enumerate(flags)]
        return {
            "metrics": (METRIC_COLUMNS, metrics),
            "metric_counts": (["metric", "n_frames", "n_excluded"], counts),
            "folds": (["fold_id", "validation_subjects", "test_subjects"] + [f"t_{r}" for r in ALL_RULES]
                      + ["reference_count", "f1_c1", "degenerate_c1", "f1_c2", "degenerate_c2"], folds),
            "detection": (["detector", "f_mean", "f_std", "n_folds"], summary),
            "skipped_rules": (["fold_id", "rule", "reason"], skipped),
            "error_positions": (["video_id", "frame_index", "c1_flag", "c2_flag"], positions),
        }


def _mean(x):
    return float(np.mean(x)) if len(x) else math.nan


def _std(x):
    return float(np.std(x)) if len(x) else math.nan


def _cell(x):
    return repr(float(x))


def improvement_pct(pre: float, post: float) -> float:
    """100 * (pre - post) / pre; NaN when pre is 0 or undefined."""
    if not math.isfinite(pre) or pre == 0:
        return math.nan
    return 100.0 * (pre - post) / pre


def subject_references(ds: Dataset, cfg: HarnessConfig) -> dict[str, SubjectReference]:
    """Manifest references, falling back to the subject's annotated frames."""
    refs = dict(ds.references)
    for sid in ds.subjects:
        if sid in refs:
            continue
        frames = [f for v in ds.videos_of([sid]) for f in v]
        try:
            refs[sid] = compute_subject_reference(sid, frames, cfg.landmarks)
            log.warning("subject %s: no stored C3 reference, computed from its annotated frames", sid)
        except MissingReferenceError:
            pass
    return refs


def active_rules(cfg: HarnessConfig, selection: FoldSelection, refs, subject_id) -> tuple:
    rules = [r for r in cfg.rules if selection.selected.get(r) is not None]
    if "vel_to_c3" in rules and subject_id not in refs:
        raise MissingReferenceError(f"no C3 reference for subject {subject_id}")
    return tuple(rules)


def run_detection(video: VideoSequence, thresholds, ref, reference_count, rules, cfg: HarnessConfig, stats=None):
    return detect_video(video, thresholds, ref, reference_count, rules, cfg.landmarks, cfg.correction, stats)


def _evaluate_fold(ds: Dataset, fold: FoldSpec, cfg: HarnessConfig, refs, stats) -> FoldResult:
    val_videos = ds.videos_of(fold.validation_subjects)
    selection = select_fold_thresholds(val_videos, ds.labels, {v.video_id: stats[v.video_id] for v in val_videos},
                                       cfg, fold.fold_id)
    # instrumentation: selection may only have touched validation videos
    assert selection.used_videos <= {v.video_id for v in val_videos}, "test data leaked into selection"

    flags, entries, frames = {}, [], []
    pred_all = {n: [] for n in ("c1_combined", "c2_combined") + ALL_RULES}
    true_c1, true_c2 = [], []
    for v in ds.videos_of(fold.test_subjects):
        ref = refs.get(v.subject_id)
        rules = active_rules(cfg, selection, refs, v.subject_id)
        st = stats[v.video_id]
        fl = run_detection(v, selection.thresholds, ref, selection.reference_count, rules, cfg, st)
        flags[v.video_id] = fl
        labels = ds.labels[v.video_id]
        true_c1 += [x.c1_error for x in labels]
        true_c2 += [x.c2_error for x in labels]
        pred_all["c1_combined"] += [x.c1_error for x in fl]
        pred_all["c2_combined"] += [x.c2_error for x in fl]
        for r in ALL_RULES:
            if r in rules:
                pred_all[r] += list(rule_flags(st, r, selection.thresholds.for_rule(r), selection.reference_count))
        corrected, log_entries = correct_video(v, fl, cfg.correction, cfg.landmarks)
        entries += log_entries
        for i, (f0, f1) in enumerate(zip(v, corrected)):
            m0 = frame_metrics(f0.predicted, f0.annotated, f0.annotated_landmarks, cfg)
            m1 = m0 if f1 is f0 else frame_metrics(f1.predicted, f1.annotated, f1.annotated_landmarks, cfg)
            frames.append((v.video_id, i, labels[i].c1_error, labels[i].c2_error, m0, m1))
    fscores = {
        "c1_combined": f_score(pred_all["c1_combined"], true_c1),
        "c2_combined": f_score(pred_all["c2_combined"], true_c2),
    }
    for r in ALL_RULES:
        if selection.selected.get(r) is not None:
            fscores[r] = f_score(pred_all[r], true_c1 if r in C1_RULES else true_c2)
    return FoldResult(fold, selection, fscores, flags, entries, frames)


def _fold_worker(args):
    return _evaluate_fold(*args)


def check_evaluable(ds: Dataset):
    if ds.labels is None:
        raise EvaluationImpossibleError("dataset has no error labels")
    missing = [v.video_id for v in ds.videos if not v.has_annotations]
    if missing:
        raise EvaluationImpossibleError(f"videos without annotations: {', '.join(missing[:5])}")


def evaluate(ds: Dataset, folds: list[FoldSpec] | None = None, cfg: HarnessConfig = HarnessConfig(),
             jobs: int = 1) -> EvaluationReport:
    """Cross-validated detection + correction with pre/post metrics."""
    check_evaluable(ds)
    if folds is None:
        folds = make_folds(ds.subjects, cfg.seed, cfg.n_folds, cfg.n_validation, cfg.n_subjects)
    refs = subject_references(ds, cfg)
    stats = {v.video_id: video_statistics(v, refs.get(v.subject_id), cfg.landmarks) for v in ds.videos}
    args = [(ds, f, cfg, refs, stats) for f in folds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fold_worker, args))
    else:
        results = [_fold_worker(a) for a in args]

    report = EvaluationReport(folds=results)
    # error positions: each video's flags from the first fold that tested it
    for v in ds.videos:
        for fr in results:
            if v.video_id in fr.flags:
                report.error_positions[v.video_id] = fr.flags[v.video_id]
                break
        else:
            fr = results[0]
            rules = active_rules(cfg, fr.selection, refs, v.subject_id)
            report.error_positions[v.video_id] = run_detection(
                v, fr.selection.thresholds, refs.get(v.subject_id), fr.selection.reference_count, rules, cfg,
                stats[v.video_id])
    return report


# ---------------------------------------------------------------- plain detect / correct

def detect_dataset(ds: Dataset, cfg: HarnessConfig = HarnessConfig(), thresholds: DetectorThresholds | None = None,
                   jobs: int = 1) -> dict[str, list[ErrorFlags]]:
    """Flag every video with fixed thresholds (fold-1 defaults unless given)."""
    thresholds = thresholds or cfg.fold_defaults(1)
    refs = subject_references(ds, cfg)
    ref_count = cfg.reference_count
    if ref_count is None:
        counts = [len(f.predicted[ContourKind.C2]) for v in ds.videos for f in v]
        ref_count = float(np.mean(counts)) if counts else None
    rules = tuple(cfg.rules)
    work = []
    for v in ds.videos:
        if "vel_to_c3" in rules and v.subject_id not in refs:
            raise MissingReferenceError(f"no C3 reference for subject {v.subject_id}")
        work.append((v, thresholds, refs.get(v.subject_id), ref_count, rules, cfg))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_detect_worker, work))
    else:
        out = [_detect_worker(w) for w in work]
    return {v.video_id: fl for v, fl in zip(ds.videos, out)}


def _detect_worker(args):
    return run_detection(*args)


def _correct_worker(args):
    return correct_video(*args)


def correct_dataset(ds: Dataset, flags: dict[str, list[ErrorFlags]], cfg: HarnessConfig = HarnessConfig(),
                    jobs: int = 1):
    """Correct every video; returns (corrected dataset, log entries in video order)."""
    work = []
    for v in ds.videos:
        fl = flags.get(v.video_id) or [ErrorFlags()] * len(v)
        work.append((v, fl, cfg.correction, cfg.landmarks))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            out = list(pool.map(_correct_worker, work))
    else:
        out = [_correct_worker(w) for w in work]
    entries: list[LogEntry] = [e for _, es in out for e in es]
    return ds.replace(videos=tuple(v for v, _ in out)), entries
