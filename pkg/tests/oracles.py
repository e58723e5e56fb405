"""Brute-force reference implementations used as test oracles.

Written independently of the package: plain loops, recursion and math,
no numpy vectorisation and no shared helpers.
"""
import math


def peaks_bruteforce(c):
    """Interior frames (1-based) with C(t) >= both neighbours, plateau runs kept leftmost."""
    out = []
    for i in range(1, len(c) - 1):
        if c[i] >= c[i - 1] and c[i] >= c[i + 1]:
            if out and out[-1][0] == i and c[i - 1] == c[i]:
                # previous frame qualified with the same value: plateau tail
                out.append((i + 1, c[i], "tail"))
            else:
                out.append((i + 1, c[i], "head"))
    return [(t, v) for t, v, kind in out if kind == "head"]


def tree_recursive(T, peaks, gamma):
    """Recursive TreeInit reference: list of (l, r, conf_l, conf_r, depth) sorted by (l, -r)."""
    conf = dict(peaks)
    nodes = []

    def visit(l, r, depth):
        cl = 1.0 if l == 1 else conf[l]
        cr = 1.0 if r == T else conf[r]
        nodes.append((l, r, cl, cr, depth))
        best = None
        for t in range(l + 1, r):
            if t in conf and (best is None or conf[t] > conf[best]):
                best = t
        if best is not None and conf[best] >= gamma:
            visit(l, best, depth + 1)
            visit(best, r, depth + 1)

    visit(1, T, 0)
    return sorted(nodes, key=lambda n: (n[0], -n[1]))


def two_means_exhaustive(values):
    """Best split of sorted values into (fine, coarse) minimising within-cluster SSE."""
    xs = sorted(values)

    def sse(part):
        m = sum(part) / len(part)
        return sum((x - m) ** 2 for x in part)

    best = None
    for k in range(1, len(xs)):
        cost = sse(xs[:k]) + sse(xs[k:])
        if best is None or cost < best[0] - 1e-15:
            best = (cost, xs[k:], xs[:k])
    return best[1], best[2]


def auc_pairwise(scores, labels):
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    total = 0.0
    for p in pos:
        for n in neg:
            total += 1.0 if p > n else 0.5 if p == n else 0.0
    return total / (len(pos) * len(neg))


def ap_prefix(scores, labels):
    """Mean of precision@k over the ranks k holding a positive (stable descending sort)."""
    order = sorted(range(len(scores)), key=lambda i: -scores[i])
    n_pos = sum(labels)
    acc = 0.0
    for k in range(1, len(order) + 1):
        if labels[order[k - 1]] == 1:
            prefix = [labels[order[j]] for j in range(k)]
            acc += sum(prefix) / k
    return acc / n_pos


def cosine(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(y * y for y in b))
    return dot / (na * nb)


def refine_bruteforce(ids, raw, emb, k, tau):
    """Softmax-weighted mean over the node itself plus its K-1 most similar peers."""
    out = []
    for u in ids:
        sims = {v: cosine(emb[u], emb[v]) for v in ids}
        peers = sorted((v for v in ids if v != u), key=lambda v: (-sims[v], v))
        nbrs = [u] + peers[:max(0, min(k, len(ids)) - 1)]
        weights = [math.exp(sims[v] / tau) for v in nbrs]
        z = sum(weights)
        out.append(sum(w * raw[v] for w, v in zip(weights, nbrs)) / z)
    return out


def iou_intervals(a, b):
    """IoU of half-open integer intervals by explicit frame sets."""
    fa, fb = set(range(*a)), set(range(*b))
    union = fa | fb
    return len(fa & fb) / len(union) if union else 0.0
