"""Cohesion-weighted fusion of coarse (parent) and fine (child) scores."""
from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Sequence

from .errors import CoverageViolation, InvalidInput
from .scoring import NodeScoreRecord
from .tree import EventNode, HGTree, verify_coverage

DEFAULT_BETA = 0.4


@dataclass(frozen=True)
class FrameScoreSeries:
    video_id: str
    num_frames: int
    scores: tuple

    def __post_init__(self):
        if len(self.scores) != self.num_frames:
            raise InvalidInput(f"{self.video_id}: {len(self.scores)} frame scores for "
                               f"{self.num_frames} frames")
        if any(not 0.0 <= s <= 1.0 for s in self.scores):
            raise InvalidInput(f"{self.video_id}: frame score outside [0, 1]")


def cohesion(child_scores: Sequence[float]) -> float:
    """Population variance of the children's refined scores."""
    m = len(child_scores)
    if m == 0:
        raise InvalidInput("cohesion of an empty child list")
    mu = sum(child_scores) / m
    return sum((a - mu) ** 2 for a in child_scores) / m


def normalize_cohesion(ws: Sequence[float]) -> List[float]:
    """Min-max scale to [0, 1]; an all-equal list maps to zeros."""
    if not ws:
        raise InvalidInput("nothing to normalize")
    lo, hi = min(ws), max(ws)
    if hi == lo:
        return [0.0] * len(ws)
    return [(w - lo) / (hi - lo) for w in ws]


def fuse(parent: float, child: float, w_hat: float, beta: float = DEFAULT_BETA) -> float:
    if abs(beta) > 1:
        raise InvalidInput(f"beta must lie in [-1, 1], got {beta}")
    g = beta * w_hat
    v = 0.5 * (1 - g) * parent + 0.5 * (1 + g) * child
    # convex in exact arithmetic; keep rounding from stepping outside
    return min(max(v, min(parent, child)), max(parent, child))


def _score_of(r: NodeScoreRecord) -> float:
    return r.raw_score if r.refined_score is None else r.refined_score


def fuse_tree(hgtree: HGTree, records: Sequence[NodeScoreRecord],
              beta: float = DEFAULT_BETA) -> List[NodeScoreRecord]:
    """Fused score for every fine node, using its containing coarse node as parent.

    Returns all input records in order; fine records gain ``fused_score``.
    """
    coarse = {r.node_id: r for r in records if r.cluster == "coarse"}
    fine = {r.node_id: r for r in records if r.cluster == "fine"}
    parents = [c.node_id for c in hgtree.coarse]
    for nid in parents:
        if nid not in coarse:
            raise InvalidInput(f"no score record for coarse node {nid}")
    for n in hgtree.fine:
        if n.node_id not in fine:
            raise InvalidInput(f"no score record for fine node {n.node_id}")

    ws = []
    for pid in parents:
        kids = hgtree.parent_map.get(pid, [])
        ws.append(cohesion([_score_of(fine[k]) for k in kids]) if kids else 0.0)
    w_hat = dict(zip(parents, normalize_cohesion(ws)))

    fused: Dict[str, float] = {}
    for pid in parents:
        a_parent = _score_of(coarse[pid])
        for kid in hgtree.parent_map.get(pid, []):
            fused[kid] = fuse(a_parent, _score_of(fine[kid]), w_hat[pid], beta)
    return [replace(r, fused_score=fused[r.node_id]) if r.cluster == "fine" else r
            for r in records]


def frames_from_nodes(nodes: Sequence[EventNode], scores: Dict[str, float],
                      num_frames: int, video_id: str = "") -> FrameScoreSeries:
    """Spread node scores over frames: frame f belongs to the node with
    ``l <= f < r``; the node ending at ``num_frames`` also owns that frame."""
    if not verify_coverage(nodes, num_frames):
        raise CoverageViolation(f"{video_id}: nodes do not tile [1, {num_frames}]")
    out = [0.0] * num_frames
    for n in nodes:
        stop = n.r if n.r < num_frames else num_frames + 1
        out[n.l - 1:stop - 1] = [scores[n.node_id]] * (stop - n.l)
    return FrameScoreSeries(video_id, num_frames, tuple(out))


def fused_frame_series(hgtree: HGTree, records: Sequence[NodeScoreRecord]) -> FrameScoreSeries:
    fused = {r.node_id: r.fused_score for r in records if r.cluster == "fine"}
    return frames_from_nodes(hgtree.fine, fused, hgtree.num_frames, hgtree.video_id)


def output_dict(hgtree: HGTree, series: FrameScoreSeries,
                records: Sequence[NodeScoreRecord]) -> dict:
    return {
        "video_id": series.video_id,
        "num_frames": series.num_frames,
        "frame_scores": list(series.scores),
        "nodes": [r.to_dict() for r in records],
    }


def load_frame_scores(path) -> FrameScoreSeries:
    try:
        data = json.loads(Path(path).read_text())
        return FrameScoreSeries(str(data["video_id"]), int(data["num_frames"]),
                                tuple(float(x) for x in data["frame_scores"]))
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise InvalidInput(f"{path}: cannot read frame-score file ({exc})") from exc
