"""Regenerate the bundled demo corpus and, optionally, the golden test files.

    python scripts/make_demo.py            # corpus only
    python scripts/make_demo.py --golden   # corpus + tests/golden/

The corpus is three synthetic 30 fps videos with hand-placed event
boundaries and anomalies. Fixture replies and embeddings are derived from
the trees built with the default configuration, so rerun this script after
changing tree construction.
"""
import argparse
import json
import shutil
import tempfile
from pathlib import Path

import numpy as np

from vadtree.boundary import confidence_from_dict, extract_peaks, plan_windows
from vadtree.pipeline import PipelineConfig, cmd_run
from vadtree.refine import synthetic_embedding
from vadtree.tree import build_hgtree

ROOT = Path(__file__).resolve().parents[1]
DEMO = ROOT / "src" / "vadtree" / "data" / "demo"
GOLDEN = ROOT / "tests" / "golden"
FPS = 30.0
L_RAW = 300

VIDEOS = [
    # video_id, frames, boundaries {frame: height}, anomalies [start, end), layout
    ("demo_fight", 900, {150: 0.62, 300: 0.93, 420: 0.48, 540: 0.9, 720: 0.55},
     [(301, 541)], "global"),
    ("demo_road", 1500, {200: 0.44, 450: 0.88, 610: 0.57, 700: 0.95, 900: 0.52,
                         1100: 0.91, 1320: 0.46}, [(701, 1101)], "windows"),
    ("demo_street", 600, {120: 0.5, 260: 0.86, 400: 0.6, 480: 0.42}, [], "global"),
]

CAPTIONS = {
    True: "Two people shove each other and one falls to the ground while others run away.",
    False: "People walk calmly along the street and cars pass at normal speed.",
}


def confidences(num_frames, bumps):
    # Smooth sum of Gaussians: local maxima are exactly the placed boundaries,
    # so the two-cluster split separates sharp cuts from soft ones.
    t = np.arange(1, num_frames + 1)
    c = np.full(num_frames, 0.05)
    for f, h in bumps.items():
        c += (h - 0.05) * np.exp(-0.5 * ((t - f) / 30.0) ** 2)
    return np.clip(c, 0, 1)


def as_windows(c, rng):
    out = []
    for plan in plan_windows(len(c), L_RAW):
        s = plan.start_frame
        w = c[s - 1:s - 1 + plan.length].copy()
        # edge frames of each window are noisier than the retained centre
        jitter = np.round(0.03 * rng.random(w.size), 4)
        a, b = plan.retain[0] - s, plan.retain[1] - s
        jitter[a:b] = 0.0
        out.append({"start_frame": s, "scores": [float(x) for x in np.clip(w + jitter, 0, 1)]})
    return out


def overlap_fraction(l, r, anomalies):
    n = r - l + 1
    hit = sum(max(0, min(r + 1, e) - max(l, s)) for s, e in anomalies)
    return hit / n


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--golden", action="store_true")
    args = ap.parse_args()
    rng = np.random.default_rng(20251016)

    for sub in ("confidences", "embeddings", "ground_truth"):
        shutil.rmtree(DEMO / sub, ignore_errors=True)
        (DEMO / sub).mkdir(parents=True)

    fixture = {}
    for vid, T, bumps, anomalies, layout in VIDEOS:
        c = confidences(T, bumps)
        doc = {"video_id": vid, "num_frames": T, "fps": FPS}
        if layout == "windows":
            doc["windows"] = as_windows(c, rng)
        else:
            doc["global_scores"] = [float(x) for x in c]
        (DEMO / "confidences" / f"{vid}.json").write_text(json.dumps(doc) + "\n")
        (DEMO / "ground_truth" / f"{vid}.json").write_text(json.dumps(
            {"video_id": vid, "num_frames": T, "anomalies": [list(a) for a in anomalies]},
            indent=2) + "\n")

        seq = confidence_from_dict(doc, l_raw=L_RAW)
        hg = build_hgtree(extract_peaks(seq), 0.4, "kmeans")
        replies, emb = {}, {}
        for i, n in enumerate(hg.unique_nodes()):
            frac = overlap_fraction(n.l, n.r, anomalies)
            score = min(1.0, round(0.1 + 0.8 * frac + 0.1 * (i % 2), 1))
            if i % 3 == 0:
                reply = f"<think>The description mentions {'violence' if frac > .5 else 'nothing unusual'}.</think>[{score}]"
            elif i % 3 == 1:
                reply = f"[{score}]"
            else:
                reply = f"The score is [{score:.2f}]"
            replies[n.node_id] = {
                "caption": f"segment {n.l}-{n.r}: {CAPTIONS[frac > 0.5]}",
                "score": reply,
            }
            base = np.array(synthetic_embedding(vid, n.node_id, 16))
            v = 0.4 * base
            v[0] += frac
            v[1] += 1.0 - frac
            emb[n.node_id] = [round(float(x), 8) for x in v / np.linalg.norm(v)]
        fixture[vid] = replies
        (DEMO / "embeddings" / f"{vid}.json").write_text(json.dumps(
            {"video_id": vid, "dim": 16, "embeddings": emb}) + "\n")

    (DEMO / "fixture.json").write_text(json.dumps({"replies": fixture}, indent=2) + "\n")
    (DEMO / "config.json").write_text(json.dumps({
        "confidences": "confidences",
        "embeddings": "embeddings",
        "ground_truth": "ground_truth",
        "fixture": "fixture.json",
        "backend": "fixture",
        "priors": "ucf-crime",
        "baseline_tw": True,
    }, indent=2) + "\n")

    if args.golden:
        with tempfile.TemporaryDirectory() as tmp:
            cfg = PipelineConfig.from_file(DEMO / "config.json", output=tmp)
            cmd_run(cfg)
            shutil.rmtree(GOLDEN, ignore_errors=True)
            for stage in ("trees", "scores", "fused"):
                shutil.copytree(Path(tmp) / stage, GOLDEN / stage)
            shutil.copy(Path(tmp) / "report.json", GOLDEN / "report.json")
        print(f"golden files written to {GOLDEN}")


if __name__ == "__main__":
    main()
