"""Boundary-confidence ingestion: sliding-window assembly and peak picking.

Frame indices are 1-based and inclusive throughout. Retained ranges are
half-open ``[start, stop)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import CoverageViolation, InvalidInput


@dataclass(frozen=True)
class LocalWindow:
    start_frame: int
    scores: Tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "scores", tuple(float(s) for s in self.scores))
        if self.start_frame < 1:
            raise InvalidInput(f"window start_frame must be >= 1, got {self.start_frame}")
        _check_unit_interval(self.scores, f"window@{self.start_frame}")

    @property
    def end_frame(self) -> int:
        return self.start_frame + len(self.scores) - 1


@dataclass(frozen=True)
class ConfidenceSequence:
    video_id: str
    num_frames: int
    points: Tuple[Tuple[int, float], ...]
    fps: Optional[float] = None

    @property
    def frames(self) -> np.ndarray:
        return np.array([t for t, _ in self.points], dtype=np.int64)

    @property
    def values(self) -> np.ndarray:
        return np.array([c for _, c in self.points], dtype=np.float64)

    @classmethod
    def from_scores(cls, video_id, scores, fps=None):
        scores = [float(s) for s in scores]
        if not scores:
            raise InvalidInput(f"{video_id}: empty confidence sequence")
        _check_unit_interval(scores, video_id)
        return cls(video_id, len(scores), tuple(zip(range(1, len(scores) + 1), scores)), fps)


@dataclass(frozen=True)
class PeakSet:
    video_id: str
    num_frames: int
    peaks: Tuple[Tuple[int, float], ...] = field(default_factory=tuple)

    @property
    def confidences(self) -> List[float]:
        return [c for _, c in self.peaks]

    def __len__(self):
        return len(self.peaks)


@dataclass(frozen=True)
class WindowPlan:
    start_frame: int
    length: int
    retain: Tuple[int, int]  # half-open [a, b)


def _check_unit_interval(values: Sequence[float], where: str):
    for i, v in enumerate(values):
        if not (0.0 <= v <= 1.0) or math.isnan(v):
            raise InvalidInput(f"{where}: confidence {v!r} at offset {i} outside [0, 1]")


def _quarters(l_raw: int) -> Tuple[int, int]:
    # floor(l/4) .. floor(3l/4) always spans exactly l/2 frames for even l
    return l_raw // 4, (3 * l_raw) // 4


def plan_windows(num_frames: int, l_raw: int) -> List[WindowPlan]:
    """Lay out overlapping GEBD windows with stride ``l_raw / 2``.

    Each window keeps its central half; the first window also keeps its
    leading quarter and the last keeps everything through ``num_frames``.
    A video no longer than one window gets a single window.
    """
    if num_frames < 1:
        raise InvalidInput(f"num_frames must be >= 1, got {num_frames}")
    if l_raw < 2 or l_raw % 2:
        raise InvalidInput(f"l_raw must be an even integer >= 2, got {l_raw}")

    if num_frames <= l_raw:
        return [WindowPlan(1, num_frames, (1, num_frames + 1))]

    stride = l_raw // 2
    lo, hi = _quarters(l_raw)
    plans = []
    start = 1
    while True:
        length = min(l_raw, num_frames - start + 1)
        a = 1 if start == 1 else start + lo
        b = start + hi
        if b >= num_frames + 1:
            plans.append(WindowPlan(start, length, (a, num_frames + 1)))
            return plans
        plans.append(WindowPlan(start, length, (a, b)))
        start += stride


def retained_ranges(windows: Sequence[LocalWindow], num_frames: int,
                    l_raw: Optional[int] = None) -> List[Tuple[int, int]]:
    """Half-open retained range of every window, in input order."""
    if len(windows) == 1:
        return [(windows[0].start_frame, num_frames + 1)]
    if l_raw is None:
        l_raw = max(len(w.scores) for w in windows)
    if l_raw < 2 or l_raw % 2:
        raise InvalidInput(f"window length l_raw must be even and >= 2, got {l_raw}")
    lo, hi = _quarters(l_raw)
    ranges = []
    last = len(windows) - 1
    for i, w in enumerate(windows):
        a = w.start_frame if i == 0 else w.start_frame + lo
        b = num_frames + 1 if i == last else w.start_frame + hi
        ranges.append((a, b))
    return ranges


def assemble_global_sequence(windows: Sequence[LocalWindow], num_frames: int,
                             video_id: str = "", l_raw: Optional[int] = None,
                             fps: Optional[float] = None) -> ConfidenceSequence:
    """Concatenate the retained part of every window into one sequence.

    Raises CoverageViolation naming the first frame that is missing or
    claimed twice.
    """
    if num_frames < 1:
        raise InvalidInput(f"{video_id}: num_frames must be >= 1")
    if not windows:
        raise CoverageViolation(f"{video_id}: no windows; frame 1 uncovered", frame=1)
    starts = [w.start_frame for w in windows]
    if starts != sorted(starts):
        raise InvalidInput(f"{video_id}: windows must be sorted by start_frame")

    points = []
    expected = 1
    for w, (a, b) in zip(windows, retained_ranges(windows, num_frames, l_raw)):
        if a > expected:
            raise CoverageViolation(f"{video_id}: frame {expected} not covered by any window",
                                    frame=expected)
        if a < expected:
            raise CoverageViolation(f"{video_id}: frame {a} retained by more than one window",
                                    frame=a)
        b = min(b, num_frames + 1)
        if b - 1 > w.end_frame:
            raise CoverageViolation(
                f"{video_id}: window@{w.start_frame} has no score for frame {w.end_frame + 1}",
                frame=w.end_frame + 1)
        for t in range(a, b):
            points.append((t, w.scores[t - w.start_frame]))
        expected = max(expected, b)
    if expected != num_frames + 1:
        raise CoverageViolation(f"{video_id}: frame {expected} not covered by any window",
                                frame=expected)
    return ConfidenceSequence(video_id, num_frames, tuple(points), fps)


def extract_peaks(seq: ConfidenceSequence) -> PeakSet:
    """Interior local maxima ``C(t) >= C(t-1) and C(t) >= C(t+1)``.

    Consecutive qualifying frames of equal confidence are reported once, at
    the leftmost frame. Endpoints are never peaks.
    """
    c = seq.values
    if c.size < 3:
        return PeakSet(seq.video_id, seq.num_frames, ())
    mid = c[1:-1]
    ok = (mid >= c[:-2]) & (mid >= c[2:])
    # a qualifying frame whose left neighbour qualifies with the same value is a plateau tail
    tail = np.zeros_like(ok)
    tail[1:] = ok[1:] & ok[:-1] & (mid[1:] == mid[:-1])
    idx = np.flatnonzero(ok & ~tail) + 1
    frames = seq.frames
    peaks = tuple((int(frames[i]), float(c[i])) for i in idx)
    return PeakSet(seq.video_id, seq.num_frames, peaks)


def load_confidence_file(path) -> ConfidenceSequence:
    """Read a per-video confidence file (windowed or precomputed global)."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"{path}: cannot read confidence file ({exc})") from exc
    return confidence_from_dict(data, where=str(path))


def confidence_from_dict(data: dict, where: str = "<input>",
                         l_raw: Optional[int] = None) -> ConfidenceSequence:
    for key in ("video_id", "num_frames"):
        if key not in data:
            raise InvalidInput(f"{where}: missing field '{key}'")
    video_id = str(data["video_id"])
    num_frames = data["num_frames"]
    if not isinstance(num_frames, int) or num_frames < 1:
        raise InvalidInput(f"{where}: field 'num_frames' must be a positive integer")
    fps = data.get("fps")
    has_w, has_g = "windows" in data, "global_scores" in data
    if has_w == has_g:
        raise InvalidInput(f"{where}: exactly one of 'windows' / 'global_scores' is required")
    if has_g:
        scores = data["global_scores"]
        if len(scores) != num_frames:
            raise InvalidInput(f"{where}: field 'global_scores' has {len(scores)} values, "
                               f"expected num_frames={num_frames}")
        seq = ConfidenceSequence.from_scores(video_id, scores, fps)
        return seq
    try:
        windows = [LocalWindow(int(w["start_frame"]), w["scores"]) for w in data["windows"]]
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"{where}: malformed entry in field 'windows' ({exc})") from exc
    return assemble_global_sequence(windows, num_frames, video_id, l_raw, fps)
