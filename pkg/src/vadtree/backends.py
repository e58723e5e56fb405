"""Caption/score backends sharing one request/response contract.

``HttpBackend`` speaks the OpenAI-compatible chat-completions wire format,
``MockBackend`` is a deterministic stand-in and ``FixtureBackend`` replays
stored replies keyed by ``(video_id, node_id, kind)``.
"""
from __future__ import annotations

import base64
import hashlib
import json
import logging
import mimetypes
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import httpx

from .errors import BackendUnavailable, FixtureMiss, InvalidInput, RequestRejected

log = logging.getLogger(__name__)

KINDS = ("caption", "score", "prior_gen")
SYSTEM_PROMPT = "You are a helpful assistant."

FrameRefs = Union[List[str], Tuple[str, Tuple[int, ...]]]


@dataclass(frozen=True)
class BackendRequest:
    kind: str
    prompt: str
    frame_refs: Optional[FrameRefs] = None
    model: str = ""
    temperature: float = 0.0
    video_id: str = ""
    node_id: str = ""

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown request kind {self.kind!r}")
        if not self.prompt:
            raise InvalidInput("backend request prompt is empty")
        if self.kind == "score" and self.frame_refs:
            raise InvalidInput("score requests carry no frame references")


@dataclass(frozen=True)
class BackendResponse:
    text: str
    latency_ms: float = 0.0
    backend_name: str = ""
    token_usage: Optional[dict] = None


def stable_hash64(text: str) -> int:
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "big")


class Backend:
    name = "base"

    def complete(self, req: BackendRequest) -> BackendResponse:
        raise NotImplementedError

    def identity(self) -> str:
        """String that changes whenever replies for the same prompt could change."""
        return self.name


class MockBackend(Backend):
    name = "mock"

    def complete(self, req: BackendRequest) -> BackendResponse:
        if req.kind == "caption":
            l, r = _segment_of(req)
            text = f"segment {l}-{r} synthetic caption"
        elif req.kind == "score":
            text = f"[{(stable_hash64(req.prompt) % 11) / 10:.1f}]"
        else:
            text = "synthetic prior knowledge"
        return BackendResponse(text, 0.0, self.name)


_SPAN_RE = re.compile(r":(\d+)-(\d+)$")


def _segment_of(req: BackendRequest) -> Tuple[int, int]:
    m = _SPAN_RE.search(req.node_id or "")
    if m:
        return int(m.group(1)), int(m.group(2))
    refs = req.frame_refs
    if refs and isinstance(refs, tuple) and refs[1]:
        return refs[1][0], refs[1][-1]
    return 0, 0


class FixtureBackend(Backend):
    """Replays ``{video_id: {node_id: {kind: reply}}}``."""

    name = "fixture"

    def __init__(self, replies: Dict[str, Dict[str, Dict[str, str]]], source: str = ""):
        self.replies = replies
        self.source = source

    @classmethod
    def from_file(cls, path) -> "FixtureBackend":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidInput(f"{path}: cannot read fixture ({exc})") from exc
        return cls(data.get("replies", data), str(path))

    def complete(self, req: BackendRequest) -> BackendResponse:
        try:
            text = self.replies[req.video_id][req.node_id][req.kind]
        except KeyError:
            raise FixtureMiss(f"no fixture reply for ({req.video_id}, {req.node_id}, {req.kind})")
        return BackendResponse(text, 0.0, self.name)

    def identity(self) -> str:
        blob = json.dumps(self.replies, sort_keys=True)
        return f"fixture:{hashlib.sha256(blob.encode()).hexdigest()[:16]}"


@dataclass
class EndpointConfig:
    base_url: str = ""
    api_key: str = ""
    caption_model: str = ""
    score_model: str = ""
    timeout: float = 120.0
    max_concurrency: int = 4
    backoff: Tuple[float, ...] = (1.0, 4.0, 16.0)

    @classmethod
    def from_env(cls, env=None, **overrides) -> "EndpointConfig":
        env = os.environ if env is None else env
        cfg = cls(
            base_url=env.get("VADTREE_API_BASE", ""),
            api_key=env.get("VADTREE_API_KEY", ""),
            caption_model=env.get("VADTREE_MODEL_CAPTION", ""),
            score_model=env.get("VADTREE_MODEL_SCORE", ""),
        )
        for k, v in overrides.items():
            if v is not None:
                setattr(cfg, k, v)
        return cfg


RETRY_STATUS = {429, 500, 502, 503, 504}


class HttpBackend(Backend):
    name = "http"

    def __init__(self, config: EndpointConfig, client: Optional[httpx.Client] = None,
                 sleep: Callable[[float], None] = time.sleep):
        if not config.base_url:
            raise InvalidInput("HTTP backend needs a base URL (VADTREE_API_BASE)")
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout)
        self._sleep = sleep
        self._slots = threading.BoundedSemaphore(max(1, config.max_concurrency))

    def identity(self) -> str:
        c = self.config
        return f"http:{c.base_url}|{c.caption_model}|{c.score_model}"

    def close(self):
        self._client.close()

    def _model_for(self, req: BackendRequest) -> str:
        if req.model:
            return req.model
        return self.config.caption_model if req.kind == "caption" else self.config.score_model

    def build_payload(self, req: BackendRequest) -> dict:
        content: Union[str, list] = req.prompt
        images = _image_parts(req.frame_refs)
        if images:
            content = [{"type": "text", "text": req.prompt}] + images
        return {
            "model": self._model_for(req),
            "temperature": req.temperature,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": content},
            ],
        }

    def complete(self, req: BackendRequest) -> BackendResponse:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        headers = {"Content-Type": "application/json"}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        payload = self.build_payload(req)
        delays = list(self.config.backoff)
        attempt = 0
        with self._slots:
            while True:
                t0 = time.perf_counter()
                try:
                    resp = self._client.post(url, json=payload, headers=headers)
                except httpx.TransportError as exc:
                    reason = f"transport error: {exc}"
                else:
                    if resp.status_code < 300:
                        return self._parse(resp, (time.perf_counter() - t0) * 1000)
                    if resp.status_code not in RETRY_STATUS:
                        raise RequestRejected(
                            f"{url} rejected request with HTTP {resp.status_code}: "
                            f"{resp.text[:200]}", resp.status_code)
                    reason = f"HTTP {resp.status_code}"
                if attempt >= len(delays):
                    raise BackendUnavailable(f"{url}: giving up after {attempt + 1} attempts "
                                             f"({reason})")
                log.warning("%s: %s, retrying in %.0fs", url, reason, delays[attempt])
                self._sleep(delays[attempt])
                attempt += 1

    def _parse(self, resp: httpx.Response, latency_ms: float) -> BackendResponse:
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendUnavailable(f"malformed chat-completions body: {exc}") from exc
        return BackendResponse(text or "", latency_ms, self.name, body.get("usage"))


def _image_parts(frame_refs) -> list:
    if not frame_refs or isinstance(frame_refs, tuple):
        return []
    parts = []
    for p in frame_refs:
        path = Path(p)
        if not path.is_file():
            continue
        mime = mimetypes.guess_type(path.name)[0] or "image/jpeg"
        data = base64.b64encode(path.read_bytes()).decode("ascii")
        parts.append({"type": "image_url", "image_url": {"url": f"data:{mime};base64,{data}"}})
    return parts


def make_backend(kind: str, fixture_path=None, endpoint: Optional[EndpointConfig] = None) -> Backend:
    if kind == "mock":
        return MockBackend()
    if kind == "fixture":
        if not fixture_path:
            raise InvalidInput("fixture backend needs a fixture file")
        return FixtureBackend.from_file(fixture_path)
    if kind == "http":
        return HttpBackend(endpoint or EndpointConfig.from_env())
    raise InvalidInput(f"unknown backend {kind!r}; expected http, mock or fixture")
