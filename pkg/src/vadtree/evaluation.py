"""Frame-level detection metrics and segment-sampling quality metrics.

Intervals here are half-open ``[start, end)`` over 1-based frames.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import InvalidInput, UndefinedMetric
from .fusion import FrameScoreSeries
from .tree import EventNode

Interval = Tuple[int, int]


@dataclass(frozen=True)
class GroundTruth:
    video_id: str
    num_frames: int
    anomalies: Tuple[Interval, ...] = ()

    def __post_init__(self):
        ivs = tuple((int(s), int(e)) for s, e in self.anomalies)
        object.__setattr__(self, "anomalies", ivs)
        prev_end = 1
        for s, e in ivs:
            if not (1 <= s < e <= self.num_frames + 1):
                raise InvalidInput(f"{self.video_id}: anomaly [{s}, {e}) outside "
                                   f"[1, {self.num_frames + 1})")
            if s < prev_end:
                raise InvalidInput(f"{self.video_id}: anomalies overlap or are unsorted at {s}")
            prev_end = e

    def labels(self) -> np.ndarray:
        y = np.zeros(self.num_frames, dtype=np.int8)
        for s, e in self.anomalies:
            y[s - 1:e - 1] = 1
        return y

    @classmethod
    def from_dict(cls, d: dict, where: str = "<input>") -> "GroundTruth":
        try:
            return cls(str(d["video_id"]), int(d["num_frames"]),
                       tuple(tuple(a) for a in d.get("anomalies", [])))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InvalidInput):
                raise
            raise InvalidInput(f"{where}: malformed ground truth ({exc})") from exc


def load_ground_truth(path) -> GroundTruth:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"{path}: cannot read ground truth ({exc})") from exc
    return GroundTruth.from_dict(data, str(path))


def _check_binary(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if s.shape != y.shape:
        raise InvalidInput(f"{s.size} scores vs {y.size} labels")
    if np.any((y != 0) & (y != 1)):
        raise InvalidInput("labels must be 0 or 1")
    return s, y


def roc_auc(scores, labels) -> float:
    """Area under the ROC curve via average ranks (tied pairs count one half)."""
    s, y = _check_binary(scores, labels)
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetric("ROC AUC needs both positive and negative frames")
    _, inv, counts = np.unique(s, return_inverse=True, return_counts=True)
    first = np.cumsum(counts) - counts  # 0-based rank where each tie group starts
    avg_rank = first + (counts + 1) / 2.0
    rank_sum = float(avg_rank[inv][y == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_precision(scores, labels) -> float:
    """Step-interpolated AP over every prefix of the descending-score order.

    Equal scores keep their original order.
    """
    s, y = _check_binary(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetric("average precision needs at least one positive frame")
    order = np.argsort(-s, kind="stable")
    hits = y[order]
    tp = np.cumsum(hits)
    precision = tp / np.arange(1, hits.size + 1)
    return float(precision[hits == 1].sum() / n_pos)


def sample_tw(num_frames: int, window_frames: int, stride_frames: int) -> List[Interval]:
    """Fixed sliding temporal windows, the last one clipped to the video."""
    if window_frames < 1 or stride_frames < 1:
        raise InvalidInput("window and stride must be >= 1 frame")
    out = []
    start = 1
    while start <= num_frames:
        out.append((start, min(start + window_frames, num_frames + 1)))
        start += stride_frames
    return out


def node_segments(nodes: Sequence[EventNode], num_frames: int) -> List[Interval]:
    """Half-open frame ranges owned by tree nodes (shared frames go right)."""
    return [(n.l, n.r if n.r < num_frames else num_frames + 1) for n in nodes]


def interval_iou(a: Interval, b: Interval) -> float:
    inter = max(0, min(a[1], b[1]) - max(a[0], b[0]))
    union = (a[1] - a[0]) + (b[1] - b[0]) - inter
    return inter / union if union else 0.0


def interval_overlap(a: Interval, b: Interval) -> int:
    return max(0, min(a[1], b[1]) - max(a[0], b[0]))


def sampling_metrics(segments: Mapping[str, Sequence[Interval]],
                     ground_truth: Sequence[GroundTruth]) -> Tuple[int, Optional[float], Optional[float]]:
    """``(NoS, mIoU, mIF)``; mIoU and mIF are None when the corpus has no events."""
    nos = sum(len(v) for v in segments.values())
    ious, ifs = [], []
    for gt in ground_truth:
        if not gt.anomalies:
            continue
        segs = segments.get(gt.video_id)
        if not segs:
            raise InvalidInput(f"{gt.video_id}: no sampled segments for a video with anomalies")
        for ev in gt.anomalies:
            ious.append(max(interval_iou(seg, ev) for seg in segs))
            ifs.append(max(interval_overlap(seg, ev) for seg in segs))
    if not ious:
        return nos, None, None
    return nos, float(np.mean(ious)), float(np.mean(ifs))


@dataclass
class EvalReport:
    auc_roc: float
    ap: float
    num_videos: int
    num_frames: int
    nos: Optional[int] = None
    miou: Optional[float] = None
    mif: Optional[float] = None
    per_video: Dict[str, dict] = field(default_factory=dict)
    baseline_tw: Optional[dict] = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["baseline_tw"] is None:
            del d["baseline_tw"]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def evaluate(series: Sequence[FrameScoreSeries], ground_truth: Sequence[GroundTruth],
             segments: Optional[Mapping[str, Sequence[Interval]]] = None) -> EvalReport:
    """Corpus-level AUC/AP over all frames concatenated in video-id order."""
    gts = {g.video_id: g for g in ground_truth}
    scores, labels, per_video = [], [], {}
    for s in sorted(series, key=lambda x: x.video_id):
        gt = gts.get(s.video_id)
        if gt is None:
            raise InvalidInput(f"{s.video_id}: no ground truth")
        if gt.num_frames != s.num_frames:
            raise InvalidInput(f"{s.video_id}: num_frames mismatch "
                               f"(scores {s.num_frames}, ground truth {gt.num_frames})")
        y = gt.labels()
        scores.append(np.asarray(s.scores, dtype=np.float64))
        labels.append(y)
        info = {"num_frames": s.num_frames, "anomalous_frames": int(y.sum()), "auc_roc": None}
        if 0 < y.sum() < y.size:
            info["auc_roc"] = roc_auc(s.scores, y)
        per_video[s.video_id] = info
    if not scores:
        raise InvalidInput("no scored videos to evaluate")
    all_s, all_y = np.concatenate(scores), np.concatenate(labels)
    report = EvalReport(roc_auc(all_s, all_y), average_precision(all_s, all_y),
                        len(per_video), int(all_s.size), per_video=per_video)
    if segments is not None:
        used = [gts[v] for v in per_video]
        report.nos, report.miou, report.mif = sampling_metrics(
            {v: segments[v] for v in per_video if v in segments}, used)
    return report
