"""In-memory dataset records shared by every pipeline stage."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .contour import Contour, ContourKind, LandmarkSet

DEFAULT_FRAME_SIZE = (68, 68)
DEFAULT_FPS = 23.18


@dataclass(frozen=True, eq=False)
class FrameRecord:
    video_id: str
    frame_index: int
    predicted: dict[ContourKind, Contour]
    raster: np.ndarray | None = None
    annotated: dict[ContourKind, Contour] | None = None
    annotated_landmarks: LandmarkSet | None = None
    estimated_landmarks: LandmarkSet | None = None

    def replace(self, **changes) -> "FrameRecord":
        return dataclasses.replace(self, **changes)

    def with_predicted(self, kind: ContourKind, contour: Contour) -> "FrameRecord":
        predicted = dict(self.predicted)
        predicted[kind] = contour
        return self.replace(predicted=predicted)


@dataclass(frozen=True, eq=False)
class VideoSequence:
    subject_id: str
    video_id: str
    frames: tuple[FrameRecord, ...]
    fps: float = DEFAULT_FPS

    def __len__(self):
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    def __getitem__(self, i) -> FrameRecord:
        return self.frames[i]

    def with_frames(self, frames) -> "VideoSequence":
        return dataclasses.replace(self, frames=tuple(frames))

    @property
    def has_annotations(self) -> bool:
        return all(f.annotated is not None for f in self.frames)


@dataclass(frozen=True)
class SubjectReference:
    subject_id: str
    c3_ref_point: tuple[float, float]


@dataclass(frozen=True)
class ErrorFlags:
    c1_error: bool = False
    c1_kind: str | None = None  # "incomplete" | "frame"
    c2_error: bool = False
    c2_kind: str | None = None  # "tb" | "frame"
    triggering_rule: frozenset = frozenset()

    def __post_init__(self):
        if self.c1_error != (self.c1_kind is not None):
            raise ValueError("c1_kind must be set exactly when c1_error is true")
        if self.c2_error != (self.c2_kind is not None):
            raise ValueError("c2_kind must be set exactly when c2_error is true")
        if self.c1_kind not in (None, "incomplete", "frame"):
            raise ValueError(f"bad c1_kind {self.c1_kind!r}")
        if self.c2_kind not in (None, "tb", "frame"):
            raise ValueError(f"bad c2_kind {self.c2_kind!r}")
        object.__setattr__(self, "triggering_rule", frozenset(self.triggering_rule))

    @property
    def any(self) -> bool:
        return self.c1_error or self.c2_error


@dataclass(frozen=True, eq=False)
class Dataset:
    videos: tuple[VideoSequence, ...]
    frame_height: int = DEFAULT_FRAME_SIZE[0]
    frame_width: int = DEFAULT_FRAME_SIZE[1]
    fps: float = DEFAULT_FPS
    references: dict[str, SubjectReference] = field(default_factory=dict)
    # ground-truth error labels, video_id -> per-frame flags
    labels: dict[str, list[ErrorFlags]] | None = None

    @property
    def subjects(self) -> list[str]:
        seen = []
        for v in self.videos:
            if v.subject_id not in seen:
                seen.append(v.subject_id)
        return seen

    def videos_of(self, subjects) -> list[VideoSequence]:
        subjects = set(subjects)
        return [v for v in self.videos if v.subject_id in subjects]

    def video(self, video_id: str) -> VideoSequence:
        for v in self.videos:
            if v.video_id == video_id:
                return v
        raise KeyError(video_id)

    def replace(self, **changes) -> "Dataset":
        return dataclasses.replace(self, **changes)
