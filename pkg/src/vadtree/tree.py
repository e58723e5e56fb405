"""Granularity-aware binary event tree and its coarse/fine stratification."""
from __future__ import annotations

import json
from bisect import bisect_left, bisect_right
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .boundary import PeakSet
from .errors import InternalConsistencyError, InvalidInput

CLUSTER_METHODS = ("kmeans", "kmedoids")


@dataclass(frozen=True)
class EventNode:
    node_id: str
    l: int
    r: int
    conf_l: float
    conf_r: float
    depth: int = 0

    @property
    def min_conf(self) -> float:
        return min(self.conf_l, self.conf_r)

    @property
    def span(self) -> Tuple[int, int]:
        return (self.l, self.r)

    def contains(self, other: "EventNode") -> bool:
        return self.l <= other.l and other.r <= self.r


def make_node_id(video_id: str, l: int, r: int) -> str:
    return f"{video_id}:{l}-{r}"


def _sort_key(n: EventNode):
    # ancestors share l with their left-most descendants; put them first
    return (n.l, -n.r)


@dataclass
class GranularityTree:
    video_id: str
    num_frames: int
    nodes: List[EventNode]
    parent: Dict[str, Optional[str]] = field(default_factory=dict)
    children: Dict[str, Tuple[str, str]] = field(default_factory=dict)

    def __post_init__(self):
        self._by_id = {n.node_id: n for n in self.nodes}

    def node(self, node_id: str) -> EventNode:
        return self._by_id[node_id]

    @property
    def root(self) -> EventNode:
        return self.nodes[0]

    def leaves(self) -> List[EventNode]:
        return [n for n in self.nodes if n.node_id not in self.children]

    def ancestors(self, node_id: str) -> List[str]:
        out = []
        p = self.parent.get(node_id)
        while p is not None:
            out.append(p)
            p = self.parent.get(p)
        return out

    def is_ancestor(self, a: str, b: str) -> bool:
        """True if ``a`` is a proper ancestor of ``b``."""
        return a in self.ancestors(b)


@dataclass
class HGTree:
    tree: GranularityTree
    coarse: List[EventNode]
    fine: List[EventNode]
    parent_map: Dict[str, List[str]]

    @property
    def video_id(self) -> str:
        return self.tree.video_id

    @property
    def num_frames(self) -> int:
        return self.tree.num_frames

    def unique_nodes(self) -> List[EventNode]:
        seen = {}
        for n in self.coarse + self.fine:
            seen.setdefault(n.node_id, n)
        return sorted(seen.values(), key=_sort_key)

    def to_dict(self) -> dict:
        return {
            "video_id": self.video_id,
            "num_frames": self.num_frames,
            "nodes": [asdict(n) for n in self.tree.nodes],
            "coarse": [n.node_id for n in self.coarse],
            "fine": [n.node_id for n in self.fine],
            "parent_map": {k: list(v) for k, v in self.parent_map.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> "HGTree":
        try:
            nodes = [EventNode(**n) for n in data["nodes"]]
            tree = _rebuild_links(data["video_id"], data["num_frames"], nodes)
            by_id = {n.node_id: n for n in nodes}
            coarse = [by_id[i] for i in data["coarse"]]
            fine = [by_id[i] for i in data["fine"]]
            parent_map = {k: list(v) for k, v in data["parent_map"].items()}
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed tree data: {exc}") from exc
        return cls(tree, coarse, fine, parent_map)


def _rebuild_links(video_id, num_frames, nodes: List[EventNode]) -> GranularityTree:
    nodes = sorted(nodes, key=_sort_key)
    by_span = {(n.l, n.r): n for n in nodes}
    ends_by_l: Dict[int, List[int]] = {}
    for n in nodes:
        ends_by_l.setdefault(n.l, []).append(n.r)
    parent = {n.node_id: None for n in nodes}
    children = {}
    for n in nodes:
        # a split node has exactly two children sharing one interior frame
        for mid in ends_by_l[n.l]:
            if mid < n.r and (mid, n.r) in by_span:
                left, right = by_span[(n.l, mid)], by_span[(mid, n.r)]
                children[n.node_id] = (left.node_id, right.node_id)
                parent[left.node_id] = n.node_id
                parent[right.node_id] = n.node_id
                break
    return GranularityTree(video_id, num_frames, nodes, parent, children)


def tree_init(num_frames: int, peaks: PeakSet, gamma_min: float,
              video_id: Optional[str] = None) -> GranularityTree:
    """Depth-first binary splitting at the most confident remaining peak.

    An interval ``[l, r]`` splits at the unconsumed peak of highest
    confidence strictly inside it (ties: smaller frame) when that confidence
    is at least ``gamma_min``. Video ends carry confidence 1.
    """
    T = int(num_frames)
    if T < 2:
        raise InvalidInput(f"tree_init needs num_frames >= 2, got {T}")
    if not 0.0 <= gamma_min <= 1.0:
        raise InvalidInput(f"gamma_min must lie in [0, 1], got {gamma_min}")
    vid = peaks.video_id if video_id is None else video_id

    conf = {}
    for t, c in peaks.peaks:
        if not 1 < t < T:
            raise InvalidInput(f"peak at frame {t} is not strictly inside (1, {T})")
        conf[int(t)] = float(c)
    # A peak strictly inside (l, r) is never one of the split points already
    # consumed above it, so the search is a plain range-argmax over frames.
    # Both argmax paths return the first maximum, i.e. the smaller frame on ties.
    frames = sorted(conf)
    values = [conf[t] for t in frames]
    arr = np.array(values)

    nodes, parent, children = [], {}, {}
    stack = [(1, T, 0, None)]
    while stack:
        l, r, depth, par = stack.pop()
        cl = 1.0 if l == 1 else conf[l]
        cr = 1.0 if r == T else conf[r]
        node = EventNode(make_node_id(vid, l, r), l, r, cl, cr, depth)
        nodes.append(node)
        parent[node.node_id] = par
        i, j = bisect_right(frames, l), bisect_left(frames, r)
        if i < j:
            if j - i > 64:
                k = i + int(np.argmax(arr[i:j]))
            else:
                k = max(range(i, j), key=values.__getitem__)
            if values[k] >= gamma_min:
                split = frames[k]
                children[node.node_id] = (make_node_id(vid, l, split),
                                          make_node_id(vid, split, r))
                stack.append((split, r, depth + 1, node.node_id))
                stack.append((l, split, depth + 1, node.node_id))
    nodes.sort(key=_sort_key)
    return GranularityTree(vid, T, nodes, parent, children)


def cluster_confidences(values: Sequence[float], method: str = "kmeans",
                        max_iter: int = 100) -> Tuple[List[float], List[float]]:
    """Two-way 1-D clustering; returns ``(coarse_values, fine_values)``.

    Centers start at min and max. Points equidistant from both centers go
    to the lower (fine) cluster. Output lists keep input order.
    """
    if method not in CLUSTER_METHODS:
        raise InvalidInput(f"unknown cluster method {method!r}; expected one of {CLUSTER_METHODS}")
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise InvalidInput("cluster_confidences needs at least one value")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return [float(v) for v in x], []

    centers = np.array([lo, hi])
    assign = None
    for _ in range(max_iter):
        new = (np.abs(x - centers[1]) < np.abs(x - centers[0])).astype(int)
        if assign is not None and np.array_equal(new, assign):
            break
        assign = new
        for k in (0, 1):
            members = x[assign == k]
            if method == "kmeans":
                centers[k] = members.mean()
            else:
                centers[k] = _medoid(members)
    coarse = [float(v) for v, a in zip(x, assign) if a == 1]
    fine = [float(v) for v, a in zip(x, assign) if a == 0]
    return coarse, fine


def _medoid(members: np.ndarray) -> float:
    cost = np.abs(members[:, None] - members[None, :]).sum(axis=1)
    best = cost.min()
    return float(members[cost == best].min())


def remove_dup(node_set: Sequence[EventNode], tree: GranularityTree) -> List[EventNode]:
    """Drop every node that has a descendant inside ``node_set``."""
    members = {n.node_id for n in node_set}
    shadowed = set()
    # children before parents, so flags propagate all the way up in one pass
    for n in sorted(tree.nodes, key=lambda x: -x.depth):
        if n.node_id in members or n.node_id in shadowed:
            p = tree.parent.get(n.node_id)
            if p is not None:
                shadowed.add(p)
    keep = {n.node_id: n for n in node_set if n.node_id not in shadowed}
    return sorted(keep.values(), key=_sort_key)


def complete(fine_set: Sequence[EventNode], coarse_set: Sequence[EventNode],
             num_frames: int) -> List[EventNode]:
    """Fill every coverage gap of ``fine_set`` with the coarse nodes spanning it."""
    fine = sorted(fine_set, key=_sort_key)
    coarse = sorted(coarse_set, key=_sort_key)
    starts = [c.l for c in coarse]
    out: List[EventNode] = []
    cursor = 1
    for n in fine:
        if n.l < cursor:
            raise InternalConsistencyError(f"fine nodes overlap at frame {n.l}")
        if n.l > cursor:
            out.extend(_bridge(cursor, n.l, coarse, starts))
        out.append(n)
        cursor = n.r
    if cursor < num_frames or not out:
        out.extend(_bridge(cursor, num_frames, coarse, starts))
    return out


def _bridge(a: int, b: int, coarse: Sequence[EventNode], starts: List[int]) -> List[EventNode]:
    i = bisect_left(starts, a)
    run, pos = [], a
    while pos < b and i < len(coarse) and coarse[i].l == pos and coarse[i].r <= b:
        run.append(coarse[i])
        pos = coarse[i].r
        i += 1
    if not run or pos != b:
        raise InternalConsistencyError(f"gap [{a}, {b}] is not a union of coarse nodes")
    return run


def verify_coverage(cluster: Sequence[EventNode], num_frames: int) -> bool:
    """True iff the nodes chain exactly from frame 1 to ``num_frames``."""
    nodes = sorted(cluster, key=_sort_key)
    if not nodes or nodes[0].l != 1 or nodes[-1].r != num_frames:
        return False
    for a, b in zip(nodes, nodes[1:]):
        if a.r != b.l:
            return False
    return all(n.l < n.r for n in nodes)


def stratify(tree: GranularityTree, peaks: PeakSet, method: str = "kmeans") -> HGTree:
    confs = peaks.confidences
    if confs:
        coarse_vals, fine_vals = cluster_confidences(confs, method)
        coarse_thr = min(coarse_vals)
    else:
        coarse_vals, fine_vals, coarse_thr = [], [], 1.0

    s_coarse = [n for n in tree.nodes if n.min_conf >= coarse_thr]
    if fine_vals:
        fine_thr = max(fine_vals)
        s_fine = [n for n in tree.nodes if n.min_conf <= fine_thr]
    else:
        s_fine = []

    coarse = remove_dup(s_coarse, tree)
    fine = complete(remove_dup(s_fine, tree), coarse, tree.num_frames)
    T = tree.num_frames
    if not verify_coverage(coarse, T):
        raise InternalConsistencyError(f"{tree.video_id}: coarse cluster does not tile [1, {T}]")
    if not verify_coverage(fine, T):
        raise InternalConsistencyError(f"{tree.video_id}: fine cluster does not tile [1, {T}]")
    return HGTree(tree, coarse, fine, build_parent_map(coarse, fine))


def build_parent_map(coarse: Sequence[EventNode], fine: Sequence[EventNode]) -> Dict[str, List[str]]:
    """Assign each fine node to the coarse node containing it; coarse must tile."""
    coarse = sorted(coarse, key=_sort_key)
    starts = [c.l for c in coarse]
    parent_map: Dict[str, List[str]] = {c.node_id: [] for c in coarse}
    for f in fine:
        i = bisect_right(starts, f.l) - 1
        owners = [c for c in coarse[max(0, i - 1):i + 2] if c.contains(f)]
        if len(owners) != 1:
            raise InternalConsistencyError(
                f"fine node {f.node_id} lies in {len(owners)} coarse nodes, expected 1")
        parent_map[owners[0].node_id].append(f.node_id)
    return parent_map


def build_hgtree(peaks: PeakSet, gamma_min: float = 0.4, method: str = "kmeans") -> HGTree:
    tree = tree_init(peaks.num_frames, peaks, gamma_min)
    return stratify(tree, peaks, method)
