import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vadtree.errors import InvalidInput
from vadtree.refine import (cosine_similarity, embeddings_from_dict, refine_cluster,
                            refine_records, synthetic_embedding)
from vadtree.scoring import ADMISSIBLE_SCORES, NodeScoreRecord

from oracles import refine_bruteforce


def cluster(n, dim, seed, cluster_name="fine"):
    rng = np.random.default_rng(seed)
    ids = [f"v:{i}-{i + 1}" for i in range(1, n + 1)]
    raw = {i: float(rng.choice(ADMISSIBLE_SCORES)) for i in ids}
    emb = {i: list(rng.standard_normal(dim)) for i in ids}
    recs = [NodeScoreRecord(i, cluster_name, "c", raw[i]) for i in ids]
    return ids, raw, emb, recs


class TestRefineCluster:
    @given(st.integers(1, 30), st.integers(1, 16), st.integers(0, 12),
           st.floats(0.02, 5.0), st.integers(0, 10**6))
    @settings(max_examples=200, deadline=None)
    def test_matches_bruteforce(self, n, dim, k, tau, seed):
        ids, raw, emb, recs = cluster(n, dim, seed)
        got = [r.refined_score for r in refine_cluster(recs, emb, k, tau)]
        if k == 0 or n == 1:
            assert got == [raw[i] for i in ids]
        else:
            assert np.allclose(got, refine_bruteforce(ids, raw, emb, k, tau), atol=1e-9, rtol=0)

    def test_k1_is_identity(self):
        ids, raw, emb, recs = cluster(12, 8, 0)
        assert [r.refined_score for r in refine_cluster(recs, emb, 1, 0.1)] == \
            [raw[i] for i in ids]

    def test_huge_tau_is_uniform_mean(self):
        ids, raw, emb, recs = cluster(12, 8, 1)
        got = refine_cluster(recs, emb, 12, 1e6)
        mean = sum(raw.values()) / len(raw)
        assert all(abs(r.refined_score - mean) < 1e-6 for r in got)

    def test_neighbour_ties_broken_by_node_id(self):
        emb = {"a": [1, 0], "b": [0, 1], "c": [0, 1]}
        recs = [NodeScoreRecord(i, "fine", "", s) for i, s in (("a", 1.0), ("b", 0.0), ("c", 0.5))]
        # a is equally (un)like b and c; with K=2 it must pick b
        out = refine_cluster(recs, emb, 2, 1.0)
        w_self, w_b = np.exp(1.0), np.exp(0.0)
        assert out[0].refined_score == pytest.approx(w_self / (w_self + w_b))

    def test_errors(self):
        ids, raw, emb, recs = cluster(3, 4, 2)
        with pytest.raises(InvalidInput):
            refine_cluster(recs, emb, -1, 0.1)
        with pytest.raises(InvalidInput):
            refine_cluster(recs, emb, 2, 0.0)
        with pytest.raises(InvalidInput, match="no embedding"):
            refine_cluster(recs, {}, 2, 0.1)
        emb[ids[0]] = [1.0, 2.0]
        with pytest.raises(InvalidInput, match="dimension"):
            refine_cluster(recs, emb, 2, 0.1)


class TestRefineRecords:
    def test_clusters_refined_separately(self):
        _, _, emb_c, coarse = cluster(4, 6, 3, "coarse")
        _, _, emb_f, fine = cluster(4, 6, 4, "fine")
        # same node ids in both clusters but different embeddings per cluster would clash,
        # so give fine nodes their own ids
        fine = [NodeScoreRecord(r.node_id + "f", "fine", "", r.raw_score) for r in fine]
        emb = {**emb_c, **{k + "f": v for k, v in emb_f.items()}}
        out = refine_records(coarse + fine, emb, 10, 0.1)
        alone = refine_cluster(coarse, emb, 10, 0.1)
        assert out[:4] == alone
        assert [r.cluster for r in out] == ["coarse"] * 4 + ["fine"] * 4


def test_cosine_and_synthetic_embedding():
    assert cosine_similarity([1, 0], [0, 2]) == 0.0
    v = synthetic_embedding("v", "v:1-5")
    assert v == synthetic_embedding("v", "v:1-5") and len(v) == 16
    assert abs(sum(x * x for x in v) - 1) < 1e-9


def test_embedding_file_validation():
    with pytest.raises(InvalidInput):
        embeddings_from_dict({"embeddings": {"a": [0, 0]}})
    with pytest.raises(InvalidInput):
        embeddings_from_dict({"dim": 3, "embeddings": {"a": [1, 0]}})
    assert embeddings_from_dict({"embeddings": {"a": [1, 0]}}) == {"a": [1.0, 0.0]}
