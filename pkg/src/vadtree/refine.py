"""Intra-cluster refinement: softmax-weighted ensemble over the top-K most
similar nodes of the same cluster."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Mapping, Sequence

import numpy as np

from .errors import InvalidInput
from .scoring import NodeScoreRecord

DEFAULT_K = 10
DEFAULT_TAU = 0.1


def cosine_similarity(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidInput(f"dimension mismatch: {a.shape} vs {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise InvalidInput("cosine similarity of a zero vector is undefined")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


def refine_cluster(records: Sequence[NodeScoreRecord], embeddings: Mapping[str, Sequence[float]],
                   k: int = DEFAULT_K, tau: float = DEFAULT_TAU) -> List[NodeScoreRecord]:
    """Replace each node's score by a softmax(sim / tau) average over its K nearest.

    The node itself always occupies the first neighbour slot (sim = 1); the
    rest are ordered by descending similarity, ties by node_id. ``k = 0``
    or a singleton cluster passes raw scores through.
    """
    if k < 0:
        raise InvalidInput(f"K must be >= 0, got {k}")
    if not tau > 0:
        raise InvalidInput(f"tau must be > 0, got {tau}")
    records = list(records)
    if not records:
        return []
    if k == 0 or len(records) == 1:
        return [replace(r, refined_score=r.raw_score) for r in records]

    ids = [r.node_id for r in records]
    missing = [i for i in ids if i not in embeddings]
    if missing:
        raise InvalidInput(f"no embedding for node {missing[0]}")
    if len({len(embeddings[i]) for i in ids}) != 1:
        raise InvalidInput("embeddings in one cluster must share a dimension")
    X = np.array([embeddings[i] for i in ids], dtype=np.float64)
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0):
        raise InvalidInput(f"zero-norm embedding for node {ids[int(np.argmin(norms))]}")
    X = X / norms[:, None]
    sims = np.clip(X @ X.T, -1.0, 1.0)
    np.fill_diagonal(sims, 1.0)
    raw = np.array([r.raw_score for r in records])
    kk = min(k, len(records))

    out = []
    for u, rec in enumerate(records):
        others = [j for j in range(len(records)) if j != u]
        others.sort(key=lambda j: (-sims[u, j], ids[j]))
        nbrs = [u] + others[:kk - 1]
        z = sims[u, nbrs] / tau
        w = np.exp(z - z.max())
        w /= w.sum()
        val = float(np.clip(w @ raw[nbrs], 0.0, 1.0))
        out.append(replace(rec, refined_score=val))
    return out


def refine_records(records: Sequence[NodeScoreRecord], embeddings, k=DEFAULT_K,
                   tau=DEFAULT_TAU) -> List[NodeScoreRecord]:
    """Refine coarse and fine clusters independently; preserves input order."""
    refined: Dict[tuple, NodeScoreRecord] = {}
    for cluster in ("coarse", "fine"):
        members = [r for r in records if r.cluster == cluster]
        for r in refine_cluster(members, embeddings, k, tau):
            refined[(r.cluster, r.node_id)] = r
    return [refined[(r.cluster, r.node_id)] for r in records]


def synthetic_embedding(video_id: str, node_id: str, dim: int = 16) -> List[float]:
    """Deterministic unit vector seeded from the node identity."""
    seed = int.from_bytes(hashlib.sha256(f"{video_id}|{node_id}".encode()).digest()[:8], "big")
    v = np.random.default_rng(seed).standard_normal(dim)
    v /= np.linalg.norm(v)
    return [round(float(x), 12) for x in v]


def load_embeddings(path) -> Dict[str, List[float]]:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"{path}: cannot read embedding file ({exc})") from exc
    return embeddings_from_dict(data, str(path))


def embeddings_from_dict(data: dict, where: str = "<input>") -> Dict[str, List[float]]:
    emb = data.get("embeddings")
    if not isinstance(emb, dict):
        raise InvalidInput(f"{where}: missing field 'embeddings'")
    dim = data.get("dim")
    out = {}
    for node_id, vec in emb.items():
        vec = [float(x) for x in vec]
        if dim is not None and len(vec) != dim:
            raise InvalidInput(f"{where}: embedding for {node_id} has {len(vec)} dims, "
                               f"expected {dim}")
        if math.fsum(x * x for x in vec) == 0:
            raise InvalidInput(f"{where}: zero-norm embedding for {node_id}")
        out[node_id] = vec
    return out
