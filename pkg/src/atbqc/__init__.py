"""Region-specific quality control for air-tissue-boundary contours."""
from .contour import Contour, ContourKind, LandmarkSet, nearest_point_index, point_in_closed_contour, resample_contour
from .correction import CorrectionConfig, correct_tb, correct_video, interpolate_contour, otsu_threshold, warp_contour
from .detection import DetectorThresholds, detect_combined, detect_video
from .harness import HarnessConfig, evaluate, f_score, make_folds, select_threshold
from .metrics import dtw_distance, landmark_euclidean, tb_rdtw, vel_rdtw
from .records import Dataset, ErrorFlags, FrameRecord, VideoSequence

__all__ = [
    "Contour", "ContourKind", "LandmarkSet", "nearest_point_index", "point_in_closed_contour", "resample_contour",
    "CorrectionConfig", "correct_tb", "correct_video", "interpolate_contour", "otsu_threshold", "warp_contour",
    "DetectorThresholds", "detect_combined", "detect_video",
    "HarnessConfig", "evaluate", "f_score", "make_folds", "select_threshold",
    "dtw_distance", "landmark_euclidean", "tb_rdtw", "vel_rdtw",
    "Dataset", "ErrorFlags", "FrameRecord", "VideoSequence",
]
__version__ = "0.1.0"
