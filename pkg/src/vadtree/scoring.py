"""Node-wise captioning and discrete anomaly scoring."""
from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, replace
from decimal import ROUND_HALF_UP, Decimal, InvalidOperation
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from .backends import Backend, BackendRequest
from .errors import BackendError, InvalidInput, ParseFailure, PartialResults
from .prompts import (EMPTY_PRIORS, OUTPUT_FORMAT, SCORING_CRITERIA, PriorProfile,
                      render_caption_prompt, render_score_prompt)
from .tree import EventNode, HGTree

log = logging.getLogger(__name__)

ADMISSIBLE_SCORES = tuple(i / 10 for i in range(11))
THINK_END = "</think>"
MAX_FRAMES = 64


@dataclass(frozen=True)
class NodeScoreRecord:
    node_id: str
    cluster: str
    caption: str
    raw_score: float
    refined_score: Optional[float] = None
    fused_score: Optional[float] = None
    error: Optional[str] = None

    def __post_init__(self):
        if self.cluster not in ("coarse", "fine"):
            raise InvalidInput(f"{self.node_id}: cluster must be coarse or fine")
        if self.raw_score not in ADMISSIBLE_SCORES:
            raise InvalidInput(f"{self.node_id}: raw score {self.raw_score} is not admissible")
        for name in ("refined_score", "fused_score"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise InvalidInput(f"{self.node_id}: {name} {v} outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NodeScoreRecord":
        try:
            return cls(**{k: d.get(k) for k in
                          ("node_id", "cluster", "caption", "raw_score", "refined_score",
                           "fused_score", "error")})
        except TypeError as exc:
            raise InvalidInput(f"malformed score record: {exc}") from exc


_BRACKET_RE = re.compile(r"\[\s*([+-]?(?:\d+(?:\.\d*)?|\.\d+))\s*\]")
_NUMBER_RE = re.compile(r"(?<![\w.])([+-]?(?:\d+(?:\.\d*)?|\.\d+))")


def snap_score(value) -> float:
    """Nearest admissible score, halves rounding up; values outside [0, 1] clip."""
    try:
        d = Decimal(str(value))
    except InvalidOperation as exc:
        raise ParseFailure(f"not a number: {value!r}") from exc
    d = min(max(d, Decimal(0)), Decimal(1))
    return float(d.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def strip_thinking(reply: str, marker: Optional[str] = THINK_END) -> str:
    if marker and marker in reply:
        return reply.rsplit(marker, 1)[1]
    return reply


def parse_discrete_score(reply: str, think_end: Optional[str] = THINK_END) -> float:
    """Extract a score from an LLM reply.

    The first ``[x]`` wins; otherwise the first bare number inside [0, 1].
    Raises ParseFailure when neither exists.
    """
    text = strip_thinking(reply or "", think_end)
    m = _BRACKET_RE.search(text)
    if m:
        return snap_score(m.group(1))
    for tok in _NUMBER_RE.findall(text):
        if 0.0 <= float(tok) <= 1.0:
            return snap_score(tok)
    raise ParseFailure(f"no score found in reply {text[:80]!r}")


def sample_frame_indices(l: int, r: int, max_frames: int = MAX_FRAMES) -> Tuple[int, ...]:
    """Up to ``max_frames`` evenly spaced frames of ``[l, r]``, endpoints included."""
    n = min(max_frames, r - l + 1)
    if n <= 1:
        return (l,)
    span, den = r - l, n - 1
    return tuple(l + (2 * i * span + den) // (2 * den) for i in range(n))


def frame_refs_for(node: EventNode, video_id: str, frames_dir=None, max_frames=MAX_FRAMES):
    idx = sample_frame_indices(node.l, node.r, max_frames)
    if frames_dir:
        paths = [Path(frames_dir) / video_id / f"{i:06d}.jpg" for i in idx]
        if all(p.is_file() for p in paths):
            return [str(p) for p in paths]
    return (video_id, idx)


class ScoreCache:
    """Append-only JSON-lines cache keyed by ``(video_id, node_id, prompt_hash)``."""

    def __init__(self, path=None):
        self.path = Path(path) if path else None
        self._lock = threading.Lock()
        self._entries: Dict[Tuple[str, str, str], dict] = {}
        if self.path and self.path.exists():
            for lineno, line in enumerate(self.path.read_text().splitlines(), 1):
                if not line.strip():
                    continue
                try:
                    e = json.loads(line)
                    self._entries[(e["video_id"], e["node_id"], e["prompt_hash"])] = e
                except (json.JSONDecodeError, KeyError):
                    log.warning("%s:%d: skipping corrupt cache line", self.path, lineno)

    def get(self, video_id, node_id, prompt_hash) -> Optional[dict]:
        with self._lock:
            return self._entries.get((video_id, node_id, prompt_hash))

    def put(self, entry: dict):
        key = (entry["video_id"], entry["node_id"], entry["prompt_hash"])
        with self._lock:
            self._entries[key] = entry
            if self.path:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with self.path.open("a") as fh:
                    fh.write(json.dumps(entry, sort_keys=True) + "\n")

    def __len__(self):
        return len(self._entries)


def prompt_hash(backend_identity: str, caption_prompt: str, frame_refs) -> str:
    h = hashlib.sha256()
    for part in (backend_identity, caption_prompt, json.dumps(frame_refs),
                 SCORING_CRITERIA, OUTPUT_FORMAT):
        h.update(part.encode("utf-8"))
        h.update(b"\0")
    return h.hexdigest()[:16]


@dataclass
class ScoringOptions:
    max_workers: int = 4
    parse_retries: int = 2
    think_end: Optional[str] = THINK_END
    frames_dir: Optional[str] = None
    max_frames: int = MAX_FRAMES
    max_failure_ratio: float = 0.5


def _score_one(node: EventNode, video_id: str, backend: Backend, caption_prompt: str,
               cache: ScoreCache, opts: ScoringOptions) -> dict:
    refs = frame_refs_for(node, video_id, opts.frames_dir, opts.max_frames)
    key = prompt_hash(backend.identity(), caption_prompt, refs)
    hit = cache.get(video_id, node.node_id, key)
    if hit is not None:
        return hit

    cap = backend.complete(BackendRequest("caption", caption_prompt, refs,
                                          video_id=video_id, node_id=node.node_id))
    caption = cap.text.strip() or "(empty caption)"
    score_prompt = render_score_prompt(caption)
    score = None
    for attempt in range(opts.parse_retries + 1):
        reply = backend.complete(BackendRequest("score", score_prompt,
                                                video_id=video_id, node_id=node.node_id))
        try:
            score = parse_discrete_score(reply.text, opts.think_end)
            break
        except ParseFailure as exc:
            log.debug("%s: unparseable score reply (attempt %d): %s",
                      node.node_id, attempt + 1, exc)
    note = None
    if score is None:
        log.warning("%s: no parseable score after %d attempts; using 0.0",
                    node.node_id, opts.parse_retries + 1)
        score, note = 0.0, "parse-failure-default"
    entry = {"video_id": video_id, "node_id": node.node_id, "prompt_hash": key,
             "caption": caption, "raw_score": score, "note": note}
    cache.put(entry)
    return entry


def score_nodes(hgtree: HGTree, backend: Backend, priors: PriorProfile = EMPTY_PRIORS,
                cache: Optional[ScoreCache] = None,
                options: Optional[ScoringOptions] = None) -> List[NodeScoreRecord]:
    """Caption and score every coarse and fine node once.

    Returns one record per cluster membership, coarse first; a node present
    in both clusters shares its caption and raw score.
    """
    opts = options or ScoringOptions()
    cache = cache if cache is not None else ScoreCache()
    caption_prompt = render_caption_prompt(priors)
    nodes = hgtree.unique_nodes()
    vid = hgtree.video_id

    def work(node):
        try:
            return node.node_id, _score_one(node, vid, backend, caption_prompt, cache, opts), None
        except BackendError as exc:
            log.error("%s: backend failure: %s", node.node_id, exc)
            return node.node_id, None, f"{type(exc).__name__}: {exc}"

    with ThreadPoolExecutor(max_workers=max(1, opts.max_workers)) as pool:
        results = {nid: (entry, err) for nid, entry, err in pool.map(work, nodes)}

    failed = [nid for nid, (_, err) in results.items() if err]
    if nodes and len(failed) / len(nodes) > opts.max_failure_ratio:
        raise PartialResults(f"{vid}: {len(failed)} of {len(nodes)} nodes failed to score",
                             failed)

    out = []
    for cluster, members in (("coarse", hgtree.coarse), ("fine", hgtree.fine)):
        for n in members:
            entry, err = results[n.node_id]
            if entry is None:
                out.append(NodeScoreRecord(n.node_id, cluster, "", 0.0, error=err))
            else:
                out.append(NodeScoreRecord(n.node_id, cluster, entry["caption"],
                                           float(entry["raw_score"]), error=entry.get("note")))
    return out


def with_scores(record: NodeScoreRecord, **changes) -> NodeScoreRecord:
    return replace(record, **changes)
