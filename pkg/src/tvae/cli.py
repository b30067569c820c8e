"""Command-line interface.

Subcommands cover the full workflow: synthesize a benchmark dataset,
import PGM frames, train a model, reconstruct and generate clips, score
clips for anomalies with MAP restoration, render heatmaps, and evaluate
detection quality.  Exit codes: 0 success, 2 configuration error, 3 data
error, 4 numerical failure during optimization.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .anomaly import (
    load_perturbation,
    map_restore_batch,
    perturbation_heatmap,
    render_heatmap,
    save_result,
    score_reconstruction,
)
from .checkpoint import load_checkpoint
from .config import PRESETS, VARIANTS, MapConfig, ModelConfig, PreprocessParams
from .data.manifest import load_dataset
from .data.preprocess import extract_clip, preprocess
from .data.synthetic import build_dataset, sections_from_dict
from .data.video import RawVideo, import_pgm_dir, write_video
from .errors import ConfigError, DataError, NumericError
from .metrics import detection_metrics, reconstruction_metrics
from .model import generate, reconstruct, train


def _write_run_meta(out_dir: Path, command: str, args: argparse.Namespace, started: float, extra=None) -> None:
    meta = {
        "command": command,
        "package_version": __version__,
        "argv": {k: v for k, v in vars(args).items() if k != "func"},
        "started_utc": datetime.fromtimestamp(started, tz=timezone.utc).isoformat(),
        "finished_utc": datetime.now(tz=timezone.utc).isoformat(),
        "duration_s": round(time.time() - started, 3),
    }
    if extra:
        meta.update(extra)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True, default=str) + "\n")


def _config_digest(config: ModelConfig) -> str:
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _parse_widths(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(","))
    except ValueError:
        raise ConfigError(f"bad widths {text!r}; expected comma-separated ints") from None


def _build_model_config(args: argparse.Namespace) -> ModelConfig:
    if args.config:
        raw = json.loads(Path(args.config).read_text())
        config = ModelConfig.from_dict(raw)
        if args.variant:
            config.variant = args.variant
    else:
        preset = PRESETS[args.preset]
        config = preset(args.variant or "tvae-s")
    overrides = {
        "steps": args.steps,
        "batch_size": args.batch_size,
        "learning_rate": args.learning_rate,
        "latent_dim": args.latent_dim,
        "frames": args.frames,
        "beta": args.beta,
        "seed": args.seed,
        "warm_start": args.warm_start,
        "snapshot_every": args.snapshot_every,
        "temporal_warmup": args.temporal_warmup,
    }
    for key, value in overrides.items():
        if value is not None:
            setattr(config, key, value)
    if args.image_size is not None:
        config.height = config.width = args.image_size
    if args.widths is not None:
        config.enc_widths = _parse_widths(args.widths)
    if args.no_augment:
        config.augment.enabled = False
    return config.validate()


def _preprocessed_split(data_dir, split: str, target_size: int, equalize: bool) -> list[RawVideo]:
    params = PreprocessParams(target_size=target_size, equalize=equalize)
    return [preprocess(v, params) for v in load_dataset(data_dir, split)]


def _split_clips(videos: list[RawVideo], config: ModelConfig, start: int) -> list:
    params = PreprocessParams(
        target_size=config.height, target_fps=config.fps, clip_frames=config.frames
    )
    return [extract_clip(v, start, params) for v in videos]


# --- commands -----------------------------------------------------------------


def cmd_synth(args) -> int:
    started = time.time()
    raw = json.loads(Path(args.spec).read_text())
    sections, spec_seed = sections_from_dict(raw)
    seed = args.seed if args.seed is not None else spec_seed
    if seed is None:
        raise ConfigError("a seed is required (either in the spec file or via --seed)")
    out_dir = Path(args.out)
    manifest = build_dataset(sections, out_dir, seed=int(seed))
    counts = {}
    for entry in manifest.entries:
        counts[(entry.split, entry.label)] = counts.get((entry.split, entry.label), 0) + 1
    for (split, label), n in sorted(counts.items()):
        print(f"{split:>12s}  {label:>14s}  {n:4d}")
    _write_run_meta(out_dir, "synth", args, started, extra={"seed": int(seed)})
    return 0


def cmd_import_pgm(args) -> int:
    video = import_pgm_dir(args.frames_dir, fps=args.fps, identifier=args.identifier, label=args.label)
    write_video(args.out, video)
    print(f"wrote {video.n_frames} frames ({video.height}x{video.width} @ {video.fps:g} fps) to {args.out}")
    return 0


def cmd_train(args) -> int:
    started = time.time()
    config = _build_model_config(args)
    if config.seed is None:
        raise ConfigError("training requires --seed")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    videos = _preprocessed_split(args.data, args.split, config.height, not args.no_equalize)
    model, info = train(videos, config, out_dir=out_dir, log=print)
    (out_dir / "train_info.json").write_text(json.dumps(info.to_dict(), indent=2, sort_keys=True) + "\n")
    _write_run_meta(out_dir, "train", args, started, extra={"config_sha256": _config_digest(config)})
    print(f"trained {config.variant} for {config.steps} steps in {info.duration_s:.1f}s -> {out_dir / 'model.ckpt'}")
    return 0


def cmd_reconstruct(args) -> int:
    started = time.time()
    loaded = load_checkpoint(args.checkpoint)
    config = loaded.config
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    videos = _preprocessed_split(args.data, args.split, config.height, not args.no_equalize)
    per_clip = []
    for clip in _split_clips(videos, config, args.start):
        recon = reconstruct(clip, loaded.model, sample=args.sample, seed=args.seed or 0)
        m = reconstruction_metrics(clip.frames, recon.frames)
        per_clip.append({"identifier": clip.identifier, "label": clip.label, **m.to_dict()})
        frames_u8 = np.clip(np.rint(recon.frames * 255.0), 0, 255).astype(np.uint8)
        write_video(
            out_dir / f"{clip.identifier}.recon.tvv",
            RawVideo(frames=frames_u8, fps=clip.fps, identifier=clip.identifier, label=clip.label),
        )
    aggregate = {
        key: {
            "mean": float(np.mean([c[key] for c in per_clip])),
            "std": float(np.std([c[key] for c in per_clip])),
        }
        for key in ("mse", "psnr", "ssim")
    }
    report = {"clips": per_clip, "aggregate": aggregate}
    (out_dir / "metrics.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    _write_run_meta(out_dir, "reconstruct", args, started)
    print(json.dumps(aggregate, indent=2, sort_keys=True))
    return 0


def cmd_generate(args) -> int:
    started = time.time()
    loaded = load_checkpoint(args.checkpoint)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    clips = generate(loaded.model, args.count, seed=args.seed)
    for clip in clips:
        frames_u8 = np.clip(np.rint(clip.frames * 255.0), 0, 255).astype(np.uint8)
        write_video(
            out_dir / f"{clip.identifier}.tvv",
            RawVideo(frames=frames_u8, fps=clip.fps, identifier=clip.identifier),
        )
    _write_run_meta(out_dir, "generate", args, started)
    print(f"wrote {len(clips)} generated clips to {out_dir}")
    return 0


def cmd_score(args) -> int:
    started = time.time()
    loaded = load_checkpoint(args.checkpoint)
    config = loaded.config
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    videos = _preprocessed_split(args.data, args.split, config.height, not args.no_equalize)
    clips = _split_clips(videos, config, args.start)
    records = []
    if args.method == "map":
        map_cfg = MapConfig(
            variant={"fast": "fast_kl", "full": "full_elbo"}[args.map],
            steps=args.steps,
            step_size=args.step_size,
            tv_weight=args.tv_weight,
            threshold=args.threshold,
        ).validate()
        results = map_restore_batch(clips, loaded.model, map_cfg)
        results_dir = out_dir / "results"
        for result in results:
            if not args.no_payloads:
                save_result(result, results_dir)
            records.append(
                {
                    "identifier": result.identifier,
                    "label": result.label,
                    "split": args.split,
                    "score": result.score,
                    "decision": result.decision,
                }
            )
    else:
        for clip in clips:
            score = score_reconstruction(clip, loaded.model)
            decision = None if args.threshold is None else score > args.threshold
            records.append(
                {
                    "identifier": clip.identifier,
                    "label": clip.label,
                    "split": args.split,
                    "score": score,
                    "decision": decision,
                }
            )
    (out_dir / "scores.json").write_text(json.dumps(records, indent=2, sort_keys=True) + "\n")
    _write_run_meta(out_dir, "score", args, started)
    print(f"scored {len(records)} clips -> {out_dir / 'scores.json'}")
    return 0


def cmd_heatmap(args) -> int:
    results_dir = Path(args.results)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.identifier:
        identifiers = [args.identifier]
    else:
        identifiers = sorted(p.name[: -len(".perturbation.tvf")] for p in results_dir.glob("*.perturbation.tvf"))
    if not identifiers:
        raise DataError(f"no perturbation payloads found in {results_dir}")
    for identifier in identifiers:
        heatmap = perturbation_heatmap(load_perturbation(results_dir, identifier))
        render_heatmap(heatmap, out_dir / f"{identifier}.heatmap.png")
    print(f"rendered {len(identifiers)} heatmaps to {out_dir}")
    return 0


def cmd_eval(args) -> int:
    try:
        records = json.loads(Path(args.scores).read_text())
        scores = np.array([r["score"] for r in records], dtype=np.float64)
        labels = np.array([r["label"] for r in records])
    except (KeyError, TypeError, json.JSONDecodeError) as exc:
        raise DataError(f"malformed scores file {args.scores}: {exc}") from exc
    if args.positive == "healthy":
        # Flip the orientation by negating scores; AUROC is symmetric under
        # this flip, average precision is not.
        scores = -scores
        binary = np.where(labels == "normal", "positive", "negative")
    else:
        binary = np.where(labels != "normal", "positive", "negative")
    report = {
        "positive": args.positive,
        "n_clips": len(records),
        "pooled": detection_metrics(scores, binary, "positive").to_dict(),
        "per_class": {},
    }
    classes = sorted(set(labels) - {"normal"})
    for cls in classes:
        keep = (labels == cls) | (labels == "normal")
        report["per_class"][cls] = detection_metrics(scores[keep], binary[keep], "positive").to_dict()
    Path(args.out).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["group", "auroc", "ap", "ap_flipped", "n_positive", "n_negative"])
            writer.writerow(["pooled"] + [report["pooled"][k] for k in ("auroc", "ap", "ap_flipped", "n_positive", "n_negative")])
            for cls in classes:
                row = report["per_class"][cls]
                writer.writerow([cls] + [row[k] for k in ("auroc", "ap", "ap_flipped", "n_positive", "n_negative")])
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


# --- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tvae", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic benchmark dataset")
    p.add_argument("--spec", required=True, help="JSON dataset description (sections + seed)")
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--seed", type=int, help="override the seed in the spec file")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("import-pgm", help="assemble a video container from PGM frames")
    p.add_argument("--frames-dir", required=True)
    p.add_argument("--fps", type=float, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--identifier", default=None)
    p.add_argument("--label", default="normal")
    p.set_defaults(func=cmd_import_pgm)

    p = sub.add_parser("train", help="train a model on the train split")
    p.add_argument("--data", required=True, help="dataset directory with manifest.json")
    p.add_argument("--out", required=True)
    p.add_argument("--variant", choices=VARIANTS)
    p.add_argument("--preset", choices=sorted(PRESETS), default="desk")
    p.add_argument("--config", help="JSON model config (overrides the preset)")
    p.add_argument("--split", default="train")
    p.add_argument("--seed", type=int)
    p.add_argument("--steps", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--latent-dim", type=int)
    p.add_argument("--image-size", type=int)
    p.add_argument("--frames", type=int)
    p.add_argument("--beta", type=float)
    p.add_argument("--widths", help="comma-separated encoder widths, e.g. 16,32,64")
    p.add_argument("--snapshot-every", type=int)
    p.add_argument("--temporal-warmup", type=int, help="steps to hold the frequency/phase head at its init")
    p.add_argument("--warm-start", help="checkpoint to initialize weights from")
    p.add_argument("--no-augment", action="store_true")
    p.add_argument("--no-equalize", action="store_true")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("reconstruct", help="reconstruct clips and report quality metrics")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--start", type=int, default=0, help="first source frame of the clip window")
    p.add_argument("--sample", action="store_true", help="sample the code instead of using the mean")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-equalize", action="store_true")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("generate", help="sample clips from a trained model's prior")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("score", help="score clips for anomalies")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="test")
    p.add_argument("--start", type=int, default=0)
    p.add_argument("--method", choices=("map", "recon"), default="map")
    p.add_argument("--map", choices=("fast", "full"), default="full", help="MAP objective variant")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--step-size", type=float, default=0.01)
    p.add_argument("--tv-weight", type=float, default=0.001)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--no-payloads", action="store_true", help="skip per-clip result files")
    p.add_argument("--no-equalize", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("heatmap", help="render heatmap PNGs from saved perturbations")
    p.add_argument("--results", required=True, help="directory with *.perturbation.tvf payloads")
    p.add_argument("--out", required=True)
    p.add_argument("--identifier", default=None)
    p.set_defaults(func=cmd_heatmap)

    p = sub.add_parser("eval", help="detection metrics from a scores file")
    p.add_argument("--scores", required=True, help="scores.json written by the score command")
    p.add_argument("--out", required=True, help="output report JSON path")
    p.add_argument("--positive", choices=("anomalous", "healthy"), default="anomalous")
    p.add_argument("--csv", default=None, help="also write a CSV summary")
    p.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        if exc.trace:
            print(f"objective trace (tail): {exc.trace}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
