"""Command-line entry point.

Exit codes: 0 success, 1 input error, 2 backend failure, 3 internal consistency.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import pipeline
from .backends import BackendRequest
from .errors import VadTreeError
from .pipeline import PipelineConfig
from .prompts import render_prior_prompt
from .tree import verify_coverage

log = logging.getLogger("vadtree")

# flag name -> (config field, type)
_CONFIG_FLAGS = {
    "--gamma-min": ("gamma_min", float),
    "--cluster-method": ("cluster_method", str),
    "--refine-k": ("refine_k", int),
    "--refine-tau": ("refine_tau", float),
    "--beta": ("beta", float),
    "--l-raw": ("l_raw", int),
    "--backend": ("backend", str),
    "--fixture": ("fixture", str),
    "--priors": ("priors", str),
    "--confidences": ("confidences", str),
    "--embeddings": ("embeddings", str),
    "--ground-truth": ("ground_truth", str),
    "--frames-dir": ("frames_dir", str),
    "--cache": ("cache", str),
    "--output": ("output", str),
    "--max-workers": ("max_workers", int),
    "--video-workers": ("video_workers", int),
    "--api-base": ("api_base", str),
    "--caption-model": ("caption_model", str),
    "--score-model": ("score_model", str),
}


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="JSON config file; flags override its values")
    for flag, (dest, typ) in _CONFIG_FLAGS.items():
        p.add_argument(flag, dest=dest, type=typ, default=None)
    p.add_argument("--baseline-tw", dest="baseline_tw", action="store_true", default=None,
                   help="add fixed sliding-window sampling metrics to the report")


def _config_from_args(args) -> PipelineConfig:
    overrides = {dest: getattr(args, dest) for dest, _ in _CONFIG_FLAGS.values()}
    overrides["baseline_tw"] = args.baseline_tw
    if args.config:
        return PipelineConfig.from_file(args.config, **overrides)
    return PipelineConfig(**{k: v for k, v in overrides.items() if v is not None}).validate()


def _print_json(obj):
    print(json.dumps(obj, indent=2))


def _cmd_stage(fn):
    def run(args):
        cfg = _config_from_args(args)
        result = fn(cfg)
        if hasattr(result, "to_dict"):
            _print_json(result.to_dict())
        else:
            for p in result:
                print(p)
        return 0
    return run


def _cmd_render_prior(args):
    request = args.events if args.events else args.dataset
    prompt = render_prior_prompt(request)
    if not args.generate:
        print(prompt)
        return 0
    cfg = _config_from_args(args)
    backend = pipeline.make_pipeline_backend(cfg)
    print(backend.complete(BackendRequest("prior_gen", prompt)).text)
    return 0


def _cmd_verify(args):
    ok_all = True
    for path in args.trees:
        hg = pipeline.load_tree(path)
        ok_c = verify_coverage(hg.coarse, hg.num_frames)
        ok_f = verify_coverage(hg.fine, hg.num_frames)
        ok_all &= ok_c and ok_f
        print(f"{path}: coarse={'ok' if ok_c else 'FAIL'} fine={'ok' if ok_f else 'FAIL'}")
    return 0 if ok_all else 3


def _cmd_serve(args):
    import uvicorn
    uvicorn.run("vadtree.service.app:app", host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vadtree", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    stages = {
        "build-tree": pipeline.cmd_build_tree,
        "score": pipeline.cmd_score,
        "refine": pipeline.cmd_refine,
        "fuse": pipeline.cmd_fuse,
        "eval": pipeline.cmd_eval,
        "run": pipeline.cmd_run,
    }
    for name, fn in stages.items():
        p = sub.add_parser(name)
        _add_config_args(p)
        p.set_defaults(func=_cmd_stage(fn))

    p = sub.add_parser("render-prior-prompt", help="print the prior-generation prompt")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--dataset", default="ucf-crime", help="ucf-crime or xd-violence")
    g.add_argument("--events", nargs="+", help="custom event types")
    p.add_argument("--generate", action="store_true",
                   help="send the prompt to the configured backend and print the reply")
    _add_config_args(p)
    p.set_defaults(func=_cmd_render_prior)

    p = sub.add_parser("verify-coverage", help="check that both clusters tile the video")
    p.add_argument("trees", nargs="+", type=Path)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("serve", help="start the HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except VadTreeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
