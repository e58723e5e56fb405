"""Staged, resumable pipeline: tree -> scores -> refined -> fused -> report.

Every stage reads the previous stage's files from ``output_dir`` so any
stage can be rerun on its own. Backend replies go through the score cache,
so reruns never repeat a finished call.
"""
from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, List, Optional

from .backends import Backend, EndpointConfig, make_backend
from .boundary import confidence_from_dict, extract_peaks
from .errors import InvalidInput
from .evaluation import (EvalReport, evaluate, load_ground_truth, node_segments, sample_tw,
                         sampling_metrics)
from .fusion import fuse_tree, fused_frame_series, load_frame_scores, output_dict
from .prompts import get_prior_profile
from .refine import load_embeddings, refine_records
from .scoring import NodeScoreRecord, ScoreCache, ScoringOptions, score_nodes
from .tree import CLUSTER_METHODS, HGTree, build_hgtree

log = logging.getLogger(__name__)

GEBD_WINDOW_SECONDS = 10.0


@dataclass
class PipelineConfig:
    gamma_min: float = 0.4
    cluster_method: str = "kmeans"
    refine_k: int = 10
    refine_tau: float = 0.1
    beta: float = 0.4
    l_raw: Optional[int] = None
    default_fps: float = 30.0
    backend: str = "mock"
    fixture: Optional[str] = None
    priors: str = "none"
    confidences: Optional[str] = None
    embeddings: Optional[str] = None
    ground_truth: Optional[str] = None
    frames_dir: Optional[str] = None
    cache: Optional[str] = None
    output: str = "out"
    max_workers: int = 4
    video_workers: int = 1
    parse_retries: int = 2
    think_end: Optional[str] = "</think>"
    baseline_tw: bool = False
    tw_window_seconds: float = 10.0
    tw_strides: List[str] = field(default_factory=lambda: ["10s", "16f"])
    api_base: Optional[str] = None
    caption_model: Optional[str] = None
    score_model: Optional[str] = None
    timeout: float = 120.0

    PATH_FIELDS = ("fixture", "confidences", "embeddings", "ground_truth", "frames_dir",
                   "cache", "output")

    def validate(self) -> "PipelineConfig":
        if not 0.0 <= self.gamma_min <= 1.0:
            raise InvalidInput(f"gamma_min must lie in [0, 1], got {self.gamma_min}")
        if abs(self.beta) > 1:
            raise InvalidInput(f"beta must lie in [-1, 1], got {self.beta}")
        if not self.refine_tau > 0:
            raise InvalidInput(f"refine_tau must be > 0, got {self.refine_tau}")
        if self.refine_k < 0:
            raise InvalidInput(f"refine_k must be >= 0, got {self.refine_k}")
        if self.cluster_method not in CLUSTER_METHODS:
            raise InvalidInput(f"cluster_method must be one of {CLUSTER_METHODS}")
        if self.backend not in ("http", "mock", "fixture"):
            raise InvalidInput(f"backend must be http, mock or fixture, got {self.backend!r}")
        if self.l_raw is not None and (self.l_raw < 2 or self.l_raw % 2):
            raise InvalidInput(f"l_raw must be an even integer >= 2, got {self.l_raw}")
        return self

    @classmethod
    def from_file(cls, path, **overrides) -> "PipelineConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"{path}: cannot read config ({exc})") from exc
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise InvalidInput(f"{path}: unknown config keys {sorted(unknown)}")
        for key in cls.PATH_FIELDS:
            if data.get(key) is not None and not Path(data[key]).is_absolute():
                data[key] = str((path.parent / data[key]).resolve())
        data.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**data).validate()

    def to_dict(self) -> dict:
        return asdict(self)

    # ------------------------------------------------------------------ paths
    def stage_dir(self, stage: str) -> Path:
        return Path(self.output) / stage

    @property
    def report_path(self) -> Path:
        return Path(self.output) / "report.json"

    @property
    def cache_path(self) -> Path:
        return Path(self.cache) if self.cache else Path(self.output) / "cache.jsonl"


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(obj, indent=2) + "\n"
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _read_json(path: Path):
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"{path}: cannot read ({exc})") from exc


def _inputs(directory, what: str) -> List[Path]:
    if not directory:
        raise InvalidInput(f"no {what} directory configured")
    d = Path(directory)
    if not d.is_dir():
        raise InvalidInput(f"{what} directory {d} does not exist")
    files = sorted(p for p in d.glob("*.json"))
    if not files:
        raise InvalidInput(f"no input: {what} directory {d} has no .json files")
    return files


def _fan_out(cfg: PipelineConfig, fn: Callable, items: list) -> list:
    if cfg.video_workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=cfg.video_workers) as pool:
        return list(pool.map(fn, items))


def default_l_raw(fps: Optional[float]) -> Optional[int]:
    if not fps:
        return None
    n = int(round(GEBD_WINDOW_SECONDS * fps))
    return max(2, n + (n % 2))


# ---------------------------------------------------------------- stages

def cmd_build_tree(cfg: PipelineConfig) -> List[Path]:
    files = _inputs(cfg.confidences, "confidences")

    def one(path: Path) -> Path:
        data = _read_json(path)
        if not isinstance(data, dict):
            raise InvalidInput(f"{path}: top level must be an object")
        l_raw = cfg.l_raw or default_l_raw(data.get("fps"))
        seq = confidence_from_dict(data, where=str(path), l_raw=l_raw)
        if seq.num_frames < 2:
            raise InvalidInput(f"{path}: field 'num_frames' must be >= 2 to build a tree")
        hg = build_hgtree(extract_peaks(seq), cfg.gamma_min, cfg.cluster_method)
        out = cfg.stage_dir("trees") / f"{hg.video_id}.json"
        _write_json(out, hg.to_dict())
        _write_json(cfg.stage_dir("segments") / f"{hg.video_id}.json", {
            "video_id": hg.video_id,
            "segments": [list(s) for s in node_segments(hg.unique_nodes(), hg.num_frames)],
        })
        log.info("%s: %d coarse / %d fine nodes", hg.video_id, len(hg.coarse), len(hg.fine))
        return out

    return _fan_out(cfg, one, files)


def load_tree(path) -> HGTree:
    return HGTree.from_dict(_read_json(path))


def _records_file(records: List[NodeScoreRecord], video_id: str) -> dict:
    return {"video_id": video_id, "records": [r.to_dict() for r in records]}


def _load_records(path: Path) -> List[NodeScoreRecord]:
    data = _read_json(path)
    return [NodeScoreRecord.from_dict(d) for d in data.get("records", [])]


def make_pipeline_backend(cfg: PipelineConfig) -> Backend:
    endpoint = None
    if cfg.backend == "http":
        endpoint = EndpointConfig.from_env(base_url=cfg.api_base or None,
                                           caption_model=cfg.caption_model,
                                           score_model=cfg.score_model, timeout=cfg.timeout,
                                           max_concurrency=cfg.max_workers)
    return make_backend(cfg.backend, cfg.fixture, endpoint)


def cmd_score(cfg: PipelineConfig, backend: Optional[Backend] = None) -> List[Path]:
    trees = _inputs(cfg.stage_dir("trees"), "trees")
    backend = backend or make_pipeline_backend(cfg)
    cache = ScoreCache(cfg.cache_path)
    priors = get_prior_profile(cfg.priors)
    opts = ScoringOptions(max_workers=cfg.max_workers, parse_retries=cfg.parse_retries,
                          think_end=cfg.think_end, frames_dir=cfg.frames_dir)

    def one(path: Path) -> Path:
        hg = load_tree(path)
        records = score_nodes(hg, backend, priors, cache, opts)
        out = cfg.stage_dir("scores") / f"{hg.video_id}.json"
        _write_json(out, _records_file(records, hg.video_id))
        return out

    return _fan_out(cfg, one, trees)


def cmd_refine(cfg: PipelineConfig) -> List[Path]:
    files = _inputs(cfg.stage_dir("scores"), "scores")

    def one(path: Path) -> Path:
        vid = _read_json(path)["video_id"]
        records = _load_records(path)
        emb = {}
        if cfg.refine_k > 0:
            if not cfg.embeddings:
                raise InvalidInput(f"{vid}: refine_k={cfg.refine_k} needs an embeddings directory")
            epath = Path(cfg.embeddings) / f"{vid}.json"
            if not epath.is_file():
                raise InvalidInput(f"{vid}: missing embeddings file {epath}")
            emb = load_embeddings(epath)
        refined = refine_records(records, emb, cfg.refine_k, cfg.refine_tau)
        out = cfg.stage_dir("refined") / f"{vid}.json"
        _write_json(out, _records_file(refined, vid))
        return out

    return _fan_out(cfg, one, files)


def cmd_fuse(cfg: PipelineConfig) -> List[Path]:
    files = _inputs(cfg.stage_dir("refined"), "refined")

    def one(path: Path) -> Path:
        vid = _read_json(path)["video_id"]
        tree_path = cfg.stage_dir("trees") / f"{vid}.json"
        if not tree_path.is_file():
            raise InvalidInput(f"{vid}: missing tree file {tree_path}")
        hg = load_tree(tree_path)
        records = fuse_tree(hg, _load_records(path), cfg.beta)
        series = fused_frame_series(hg, records)
        out = cfg.stage_dir("fused") / f"{vid}.json"
        _write_json(out, output_dict(hg, series, records))
        return out

    return _fan_out(cfg, one, files)


def _video_fps(cfg: PipelineConfig, video_id: str) -> float:
    if cfg.confidences:
        p = Path(cfg.confidences) / f"{video_id}.json"
        if p.is_file():
            fps = _read_json(p).get("fps")
            if fps:
                return float(fps)
    return cfg.default_fps


def _stride_frames(text: str, fps: float) -> int:
    text = text.strip().lower()
    if text.endswith("f"):
        return int(text[:-1])
    if text.endswith("s"):
        return max(1, int(round(float(text[:-1]) * fps)))
    return int(text)


def tw_baseline_block(cfg: PipelineConfig, gts, hg_segments) -> dict:
    block = {}
    hg_nos, hg_miou, hg_mif = sampling_metrics(hg_segments, gts)
    block["hgtree"] = {"nos": hg_nos, "miou": hg_miou, "mif": hg_mif}
    for stride in cfg.tw_strides:
        segs = {}
        for gt in gts:
            fps = _video_fps(cfg, gt.video_id)
            window = max(1, int(round(cfg.tw_window_seconds * fps)))
            segs[gt.video_id] = sample_tw(gt.num_frames, window, _stride_frames(stride, fps))
        nos, miou, mif = sampling_metrics(segs, gts)
        key = f"tw_{cfg.tw_window_seconds:g}s_stride_{stride}"
        block[key] = {"nos": nos, "miou": miou, "mif": mif}
    return block


def cmd_eval(cfg: PipelineConfig) -> EvalReport:
    fused = _inputs(cfg.stage_dir("fused"), "fused")
    if not cfg.ground_truth:
        raise InvalidInput("no ground_truth directory configured")
    series, gts = [], []
    for path in fused:
        s = load_frame_scores(path)
        gpath = Path(cfg.ground_truth) / f"{s.video_id}.json"
        if not gpath.is_file():
            raise InvalidInput(f"{s.video_id}: missing ground truth file {gpath}")
        gt = load_ground_truth(gpath)
        if gt.num_frames != s.num_frames:
            raise InvalidInput(f"{s.video_id}: num_frames mismatch (scores {s.num_frames}, "
                               f"ground truth {gt.num_frames} in {gpath})")
        series.append(s)
        gts.append(gt)

    segments = {}
    for s in series:
        mpath = cfg.stage_dir("segments") / f"{s.video_id}.json"
        if mpath.is_file():
            segments[s.video_id] = [tuple(x) for x in _read_json(mpath)["segments"]]
    report = evaluate(series, gts, segments if len(segments) == len(series) else None)
    if cfg.baseline_tw:
        report.baseline_tw = tw_baseline_block(cfg, gts, segments)
    _write_json(cfg.report_path, report.to_dict())
    return report


def cmd_run(cfg: PipelineConfig, backend: Optional[Backend] = None) -> EvalReport:
    cmd_build_tree(cfg)
    cmd_score(cfg, backend)
    cmd_refine(cfg)
    cmd_fuse(cfg)
    return cmd_eval(cfg)
