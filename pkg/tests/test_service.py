import json

import pytest
from fastapi.testclient import TestClient

from vadtree.service import app as service

from conftest import DEMO, GOLDEN

CONF = {"video_id": "v", "num_frames": 10,
        "global_scores": [0.1, 0.2, 0.9, 0.1, 0.1, 0.5, 0.2, 0.1, 0.3, 0.1]}


@pytest.fixture
def client(monkeypatch, tmp_path):
    monkeypatch.setenv("VADTREE_BACKEND", "mock")
    monkeypatch.setenv("VADTREE_CACHE", str(tmp_path / "cache.jsonl"))
    service.reset_state()
    yield TestClient(service.app)
    service.reset_state()


def test_health(client):
    assert client.get("/health").json()["status"] == "ok"


def test_peaks_and_tree(client):
    peaks = client.post("/v1/peaks", json=CONF).json()["peaks"]
    assert peaks == [{"t": 3, "c": 0.9}, {"t": 6, "c": 0.5}, {"t": 9, "c": 0.3}]
    tree = client.post("/v1/tree", json={**CONF, "gamma_min": 0.4}).json()
    assert tree["coarse"] == ["v:1-3", "v:3-10"]
    assert tree["fine"] == ["v:1-3", "v:3-6", "v:6-10"]
    cov = client.post("/v1/verify-coverage", json=tree).json()
    assert cov == {"coarse": True, "fine": True}


def test_stagewise_equals_pipeline(client):
    tree = client.post("/v1/tree", json=CONF).json()
    scored = client.post("/v1/score", json={"tree": tree}).json()
    emb = {r["node_id"]: [1.0, i + 1.0] for i, r in enumerate(scored["records"])}
    refined = client.post("/v1/refine", json={"records": scored["records"],
                                              "embeddings": emb}).json()
    fused = client.post("/v1/fuse", json={"tree": tree, "records": refined["records"]}).json()
    whole = client.post("/v1/pipeline", json={"confidences": CONF, "embeddings": emb}).json()
    assert whole == fused
    assert len(fused["frame_scores"]) == 10


def test_demo_video_matches_golden(client, monkeypatch):
    monkeypatch.setenv("VADTREE_BACKEND", "fixture")
    monkeypatch.setenv("VADTREE_FIXTURE", str(DEMO / "fixture.json"))
    service.reset_state()
    conf = json.loads((DEMO / "confidences" / "demo_fight.json").read_text())
    emb = json.loads((DEMO / "embeddings" / "demo_fight.json").read_text())["embeddings"]
    body = {"confidences": conf, "params": {"l_raw": 300}, "priors": "ucf-crime",
            "embeddings": emb}
    got = client.post("/v1/pipeline", json=body).json()
    assert got == json.loads((GOLDEN / "fused" / "demo_fight.json").read_text())


def test_evaluate_and_sampling(client):
    body = {"videos": [{"video_id": "a", "num_frames": 4, "frame_scores": [0.1, 0.9, 0.8, 0.2]}],
            "ground_truth": [{"video_id": "a", "num_frames": 4, "anomalies": [[2, 4]]}],
            "segments": [{"video_id": "a", "segments": [[1, 2], [2, 5]]}]}
    rep = client.post("/v1/evaluate", json=body).json()
    assert rep["auc_roc"] == 1.0 and rep["nos"] == 2
    segs = client.post("/v1/sample-tw", json={"num_frames": 25, "window_frames": 10,
                                              "stride_frames": 10}).json()
    assert segs["segments"] == [[1, 11], [11, 21], [21, 26]]


def test_prompts(client):
    p = client.post("/v1/prompts/prior", json={"dataset": "xd-violence"}).json()["prompt"]
    assert "6 types of events" in p
    cap = client.post("/v1/prompts/caption", json={"priors": "none"}).json()["prompt"]
    assert cap == "Please describe the content in the video in detail."
    sc = client.post("/v1/prompts/score", json={"caption": "x"}).json()["prompt"]
    assert sc.startswith("x\n\nHow would you rate")
    assert client.post("/v1/parse-score", json={"reply": "[0.65]"}).json() == {"score": 0.7}


def test_error_mapping(client, monkeypatch):
    r = client.post("/v1/peaks", json={**CONF, "global_scores": [0.1] * 3})
    assert r.status_code == 422 and r.json()["error"] == "InvalidInput"
    r = client.post("/v1/parse-score", json={"reply": "no number"})
    assert r.status_code == 422 and r.json()["error"] == "ParseFailure"
    r = client.post("/v1/peaks", json={"video_id": "v", "num_frames": 3})
    assert r.status_code == 422
    monkeypatch.setenv("VADTREE_BACKEND", "fixture")
    monkeypatch.setenv("VADTREE_FIXTURE", str(DEMO / "fixture.json"))
    service.reset_state()
    tree = client.post("/v1/tree", json=CONF).json()
    r = client.post("/v1/score", json={"tree": tree})
    assert r.status_code == 502 and r.json()["error"] == "PartialResults"
