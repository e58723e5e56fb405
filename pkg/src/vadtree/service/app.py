"""HTTP API over the core package.

Backend selection comes from the environment: ``VADTREE_BACKEND`` (mock,
fixture or http), ``VADTREE_FIXTURE`` for fixture replay, ``VADTREE_CACHE``
for a persistent score cache, plus the usual ``VADTREE_API_*`` settings.
"""
from __future__ import annotations

import os
import threading
from typing import List

from fastapi import Depends, FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..backends import Backend, make_backend
from ..boundary import confidence_from_dict, extract_peaks
from ..errors import BackendError, InternalConsistencyError, VadTreeError
from ..evaluation import GroundTruth, evaluate, sample_tw
from ..fusion import FrameScoreSeries, fuse_tree, fused_frame_series, output_dict
from ..prompts import (get_prior_profile, render_caption_prompt, render_prior_prompt,
                       render_score_prompt)
from ..refine import refine_records, synthetic_embedding
from ..scoring import NodeScoreRecord, ScoreCache, parse_discrete_score, score_nodes
from ..tree import HGTree, build_hgtree, verify_coverage
from . import schemas as s

app = FastAPI(title="vadtree", version=__version__)

_lock = threading.Lock()
_state: dict = {}


def get_backend() -> Backend:
    with _lock:
        if "backend" not in _state:
            _state["backend"] = make_backend(os.environ.get("VADTREE_BACKEND", "mock"),
                                             os.environ.get("VADTREE_FIXTURE"))
        return _state["backend"]


def get_cache() -> ScoreCache:
    with _lock:
        if "cache" not in _state:
            _state["cache"] = ScoreCache(os.environ.get("VADTREE_CACHE"))
        return _state["cache"]


def reset_state():
    with _lock:
        _state.clear()


@app.exception_handler(VadTreeError)
async def _vadtree_error(request: Request, exc: VadTreeError):
    if isinstance(exc, BackendError):
        status = 502
    elif isinstance(exc, InternalConsistencyError):
        status = 500
    else:
        status = 422
    return JSONResponse(status_code=status,
                        content={"error": type(exc).__name__, "detail": str(exc)})


def _hgtree(req: s.TreeRequest) -> HGTree:
    seq = confidence_from_dict(req.model_dump(exclude_none=True), where=req.video_id,
                               l_raw=req.l_raw)
    return build_hgtree(extract_peaks(seq), req.gamma_min, req.cluster_method)


def _records(items: List[s.ScoreRecord]) -> List[NodeScoreRecord]:
    return [NodeScoreRecord.from_dict(r.model_dump()) for r in items]


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/v1/peaks", response_model=s.PeaksOut)
def peaks(req: s.ConfidenceIn):
    seq = confidence_from_dict(req.model_dump(exclude_none=True), where=req.video_id)
    ps = extract_peaks(seq)
    return {"video_id": ps.video_id, "num_frames": ps.num_frames,
            "peaks": [{"t": t, "c": c} for t, c in ps.peaks]}


@app.post("/v1/tree", response_model=s.TreeOut)
def tree(req: s.TreeRequest):
    return _hgtree(req).to_dict()


@app.post("/v1/verify-coverage", response_model=s.CoverageOut)
def coverage(req: s.TreeOut):
    hg = HGTree.from_dict(req.model_dump())
    return {"coarse": verify_coverage(hg.coarse, hg.num_frames),
            "fine": verify_coverage(hg.fine, hg.num_frames)}


@app.post("/v1/score", response_model=s.RecordsOut)
def score(req: s.ScoreRequest, backend: Backend = Depends(get_backend),
          cache: ScoreCache = Depends(get_cache)):
    hg = HGTree.from_dict(req.tree.model_dump())
    records = score_nodes(hg, backend, get_prior_profile(req.priors), cache)
    return {"video_id": hg.video_id, "records": [r.to_dict() for r in records]}


@app.post("/v1/refine", response_model=s.RecordsOut)
def refine(req: s.RefineRequest):
    records = refine_records(_records(req.records), req.embeddings, req.k, req.tau)
    return {"video_id": req.video_id, "records": [r.to_dict() for r in records]}


@app.post("/v1/fuse", response_model=s.FusedOut)
def fuse(req: s.FuseRequest):
    hg = HGTree.from_dict(req.tree.model_dump())
    records = fuse_tree(hg, _records(req.records), req.beta)
    return output_dict(hg, fused_frame_series(hg, records), records)


@app.post("/v1/evaluate", response_model=s.EvalOut)
def evaluate_(req: s.EvaluateRequest):
    series = [FrameScoreSeries(v.video_id, v.num_frames, tuple(v.frame_scores))
              for v in req.videos]
    gts = [GroundTruth(g.video_id, g.num_frames, tuple(g.anomalies)) for g in req.ground_truth]
    segments = None
    if req.segments is not None:
        segments = {m.video_id: [tuple(x) for x in m.segments] for m in req.segments}
    return evaluate(series, gts, segments).to_dict()


@app.post("/v1/sample-tw")
def sample_tw_(req: s.SampleTWRequest):
    return {"segments": [list(x) for x in
                         sample_tw(req.num_frames, req.window_frames, req.stride_frames)]}


@app.post("/v1/prompts/prior", response_model=s.PromptOut)
def prior_prompt(req: s.PriorPromptRequest):
    return {"prompt": render_prior_prompt(req.events or req.dataset or "ucf-crime")}


@app.post("/v1/prompts/caption", response_model=s.PromptOut)
def caption_prompt(req: s.CaptionPromptRequest):
    return {"prompt": render_caption_prompt(get_prior_profile(req.priors))}


@app.post("/v1/prompts/score", response_model=s.PromptOut)
def score_prompt(req: s.ScorePromptRequest):
    return {"prompt": render_score_prompt(req.caption)}


@app.post("/v1/parse-score", response_model=s.ParseScoreOut)
def parse_score(req: s.ParseScoreRequest):
    return {"score": parse_discrete_score(req.reply)}


@app.post("/v1/pipeline", response_model=s.FusedOut)
def run_pipeline(req: s.PipelineRequest, backend: Backend = Depends(get_backend),
                 cache: ScoreCache = Depends(get_cache)):
    """Tree, scoring, refinement and fusion for one video in a single call."""
    tree_req = s.TreeRequest(**req.confidences.model_dump(), **req.params.model_dump())
    hg = _hgtree(tree_req)
    records = score_nodes(hg, backend, get_prior_profile(req.priors), cache)
    emb = dict(req.embeddings or {})
    if req.synthetic_embeddings:
        for n in hg.unique_nodes():
            emb.setdefault(n.node_id, synthetic_embedding(hg.video_id, n.node_id))
    records = refine_records(records, emb, req.refine_k, req.refine_tau)
    records = fuse_tree(hg, records, req.beta)
    return output_dict(hg, fused_frame_series(hg, records), records)
