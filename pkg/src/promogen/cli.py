"""Console entry point.

One JSON config document drives every subcommand; each command reads its
own top-level key ("synthetic", "train", "sample", "eval", "fm",
"schedule") so a single file can describe a whole experiment.  --seed
overrides the seed inside the config, --out names the output file or
directory.
"""

from __future__ import annotations

import argparse
import glob
import json
import os
import sys

import numpy as np

from .anchor_filter import FilterParams, count_valid, sample_anchors
from .curriculum import k_min_for_stage
from .denoiser import NetworkConfig
from .diffusion import build_schedule
from .errors import PromoGenError
from .motion import AnchorSet, load_pmg, load_trajectory_csv, save_pmg
from .objectives import LossWeights, PhysicalParams
from .pipeline import TrainConfig, evaluate, sample_motion, train
from .synthetic import SyntheticSpec, generate_synthetic

DEFAULT_PROTOCOL = (1, 3, 5, 7, 9)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    if not isinstance(doc, dict):
        raise ValueError("config must be a JSON object")
    return doc


def _train_config(d: dict) -> TrainConfig:
    d = dict(d)
    net = d.pop("network", {})
    weights = d.pop("weights", {})
    phys = d.pop("phys", {})
    return TrainConfig(network=NetworkConfig(**net),
                       weights=LossWeights(**weights),
                       phys=PhysicalParams(**phys), **d)


def _load_dataset(data_dir: str) -> list:
    paths = sorted(glob.glob(os.path.join(data_dir, "*.pmg")))
    if not paths:
        raise ValueError(f"no .pmg files under {data_dir!r}")
    return [load_pmg(p) for p in paths]


def _dataset_from_config(cfg: dict, seed: int | None) -> list:
    data_dir = cfg.get("data_dir")
    if data_dir:
        return _load_dataset(data_dir)
    syn = dict(cfg.get("synthetic", {}))
    if seed is not None:
        syn["seed"] = seed
    return generate_synthetic(SyntheticSpec(**syn))


def _emit(doc: dict, out: str | None):
    text = json.dumps(doc, indent=2)
    if out:
        with open(out, "w", encoding="utf-8") as f:
            f.write(text + "\n")
    print(text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_gen_data(cfg: dict, seed: int | None, out: str | None) -> int:
    if not out:
        raise ValueError("gen-data needs --out DIR")
    syn = dict(cfg.get("synthetic", {}))
    if seed is not None:
        syn["seed"] = seed
    data = generate_synthetic(SyntheticSpec(**syn))
    os.makedirs(out, exist_ok=True)
    for i, m in enumerate(data):
        save_pmg(m, os.path.join(out, f"motion_{i:05d}.pmg"))
    _emit({"count": len(data), "dir": out}, None)
    return 0


def _cmd_train(cfg: dict, seed: int | None, out: str | None) -> int:
    if not out:
        raise ValueError("train needs --out CHECKPOINT")
    tc = dict(cfg.get("train", {}))
    tc.pop("data_dir", None)
    if seed is not None:
        tc["seed"] = seed
    config = _train_config(tc)
    dataset = _dataset_from_config(
        {**cfg, "data_dir": cfg.get("train", {}).get("data_dir")},
        seed,
    )
    result = train(dataset, config)
    result.save(out)
    for entry in result.log:
        print(json.dumps(entry))
    _emit({
        "checkpoint": out,
        "iterations": len(result.loss_history),
        "initial_loss": result.initial_loss,
        "final_loss": result.final_loss,
    }, None)
    return 0


def _load_anchors(path: str, n_frames: int | None) -> AnchorSet:
    with open(path, "r", encoding="utf-8") as f:
        doc = json.load(f)
    n = doc.get("n_frames", n_frames)
    if n is None:
        raise ValueError(
            "anchor file gives no n_frames and none is known from context"
        )
    return AnchorSet(positions=np.asarray(doc["positions"], dtype=np.int64),
                     poses=np.asarray(doc["poses"], dtype=np.float64),
                     n_frames=int(n))


def _cmd_sample(cfg: dict, seed: int | None, out: str | None) -> int:
    sc = dict(cfg.get("sample", {}))
    checkpoint = sc.get("checkpoint")
    if not checkpoint:
        raise ValueError('sample needs config key sample.checkpoint')
    from .pipeline import load_checkpoint

    bundle = load_checkpoint(checkpoint)
    trajectory = None
    if sc.get("trajectory"):
        trajectory = load_trajectory_csv(sc["trajectory"],
                                         fps=bundle.norm.fps)
    n_frames = sc.get("n_frames")
    anchors = None
    if sc.get("anchors"):
        known = trajectory.n_frames if trajectory is not None else n_frames
        anchors = _load_anchors(sc["anchors"], known)
    svg = sc.get("svg")
    if svg is True and out:
        svg = os.path.splitext(out)[0] + ".svg"
    motion = sample_motion(
        bundle, trajectory=trajectory, anchors=anchors,
        steps=int(sc.get("steps", 25)),
        seed=seed if seed is not None else int(sc.get("seed", 0)),
        n_frames=n_frames, out=out, svg=svg or None,
    )
    _emit({
        "frames": motion.n_frames,
        "feature_dim": motion.feature_dim,
        "out": out,
        "svg": svg or None,
    }, None)
    return 0


def _cmd_eval(cfg: dict, seed: int | None, out: str | None) -> int:
    ec = dict(cfg.get("eval", {}))
    checkpoint = ec.get("checkpoint")
    if not checkpoint:
        raise ValueError('eval needs config key eval.checkpoint')
    dataset = _dataset_from_config(
        {**cfg, "data_dir": ec.get("data_dir")}, seed)
    items = ec.get("items")
    if items:
        dataset = dataset[:int(items)]
    report = evaluate(
        checkpoint, dataset,
        protocol=tuple(ec.get("protocol", DEFAULT_PROTOCOL)),
        steps=int(ec.get("steps", 25)),
        seed=seed if seed is not None else int(ec.get("seed", 0)),
    )
    _emit(report.as_dict(), out)
    return 0


def _cmd_fm_sample(cfg: dict, seed: int | None, out: str | None) -> int:
    fc = dict(cfg.get("fm", {}))
    params = FilterParams(n_frames=int(fc.get("n_frames", 64)),
                          count=int(fc.get("count", 3)),
                          gap=int(fc.get("gap", 2)))
    rng = np.random.default_rng(seed if seed is not None
                                else int(fc.get("seed", 0)))
    draws = int(fc.get("draws", 1))
    positions = [sample_anchors(params, rng).tolist() for _ in range(draws)]
    _emit({
        "n_frames": params.n_frames,
        "count": params.count,
        "gap": params.gap,
        "count_valid": count_valid(params),
        "positions": positions,
    }, out)
    return 0


def _cmd_schedule_dump(cfg: dict, seed: int | None, out: str | None) -> int:
    sc = dict(cfg.get("schedule", {}))
    t_steps = int(sc.get("t_steps", 1000))
    kind = sc.get("kind", "cosine")
    schedule = build_schedule(t_steps, kind)
    doc = {
        "t_steps": t_steps,
        "kind": kind,
        "alpha_bar": schedule.alpha_bar.tolist(),
        "a": schedule.a.tolist(),
        "sigma": schedule.sigma.tolist(),
        "lambda": schedule.lam.tolist(),
    }
    if "e_stage" in sc:
        e_stage = int(sc["e_stage"])
        doc["k_min"] = [k_min_for_stage(s, e_stage)
                        for s in range(1, e_stage + 1)]
    _emit(doc, out)
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "train": _cmd_train,
    "sample": _cmd_sample,
    "eval": _cmd_eval,
    "fm-sample": _cmd_fm_sample,
    "schedule-dump": _cmd_schedule_dump,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="promogen",
        description="Motion generation from trajectories and sparse anchors.",
    )
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("-c", "--config", help="JSON config document")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--out", help="output file or directory")
    args = parser.parse_args(argv)
    try:
        cfg = _load_config(args.config)
        return _COMMANDS[args.command](cfg, args.seed, args.out)
    except (PromoGenError, ValueError, TypeError, OSError,
            json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
