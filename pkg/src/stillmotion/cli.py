"""Command-line entry point.

Subcommands: generate, verify, preview, serve, bench.  Configuration
precedence, lowest to highest: built-in defaults, --config file, the
STILLMOTION_SEED / STILLMOTION_WORKERS environment variables, explicit
flags.  All reports are JSON on stdout; failures print a JSON error
object to stderr and exit nonzero (2 for configuration errors, 3 for a
verification below threshold, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from .config import GenConfig, apply_overrides, parse_range, read_config_file
from .dataset_io import LoadedSample, load_frames, read_manifest, render_preview
from .errors import ConfigError, StillMotionError
from .oracle import verify_dataset
from .pipeline import generate_dataset, run_benchmark
from .server import StreamServer, make_producer

ENV_SEED = "STILLMOTION_SEED"
ENV_WORKERS = "STILLMOTION_WORKERS"


def _add_gen_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="FILE", help="key = value config file")
    p.add_argument("--frames", type=int, metavar="N", help="frames per clip")
    p.add_argument("--crop", type=int, metavar="L", help="crop side length")
    p.add_argument("--source-size", type=int, metavar="LS", help="prepared source side length")
    p.add_argument("--speeds", type=int, metavar="C", help="speeds per axis (odd, >= 3)")
    p.add_argument("--axis", choices=("both", "x", "y"), help="axis restriction")
    p.add_argument("--mask-ratio", metavar="LO:HI", help="unmasked window side ratio range")
    p.add_argument("--no-mask", action="store_true", help="disable static masks")
    p.add_argument("--no-jitter", action="store_true", help="disable color jitter")
    p.add_argument("--epoch", type=int, metavar="E", help="epoch index (seeds frame choice)")
    p.add_argument("--seed", type=int, metavar="S", help="global seed")
    p.add_argument("--format", choices=("png", "raw"), help="frame storage format")
    p.add_argument("--input-mode", choices=("images", "frame-dirs"), help="source layout")


def build_config(args: argparse.Namespace) -> GenConfig:
    cfg = GenConfig()
    if getattr(args, "config", None):
        cfg = apply_overrides(cfg, read_config_file(args.config))
    if ENV_SEED in os.environ:
        try:
            cfg = apply_overrides(cfg, {"seed": int(os.environ[ENV_SEED])})
        except ValueError:
            raise ConfigError(f"{ENV_SEED} must be an integer, got {os.environ[ENV_SEED]!r}")
    flags: dict = {}
    for key, attr in (
        ("frames", "frames"),
        ("crop", "crop"),
        ("source_size", "source_size"),
        ("speeds", "speeds"),
        ("axis", "axis"),
        ("epoch", "epoch"),
        ("seed", "seed"),
        ("output_format", "format"),
        ("input_mode", "input_mode"),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            flags[key] = value
    if getattr(args, "mask_ratio", None):
        flags["mask_ratio"] = parse_range(args.mask_ratio, "--mask-ratio")
    if getattr(args, "no_mask", False):
        flags["mask_enabled"] = False
    if getattr(args, "no_jitter", False):
        flags["jitter_enabled"] = False
    return apply_overrides(cfg, flags).validate()


def _workers(args: argparse.Namespace) -> int:
    if getattr(args, "workers", None) is not None:
        return max(1, args.workers)
    if ENV_WORKERS in os.environ:
        try:
            return max(1, int(os.environ[ENV_WORKERS]))
        except ValueError:
            raise ConfigError(f"{ENV_WORKERS} must be an integer, got {os.environ[ENV_WORKERS]!r}")
    return 1


def _emit(obj: dict) -> None:
    json.dump(obj, sys.stdout, indent=2)
    sys.stdout.write("\n")


def cmd_generate(args: argparse.Namespace) -> int:
    config = build_config(args)
    started = time.perf_counter()
    manifest = generate_dataset(config, args.in_dir, args.out_dir, workers=_workers(args))
    records = read_manifest(manifest)
    _emit(
        {
            "manifest": str(manifest),
            "samples": len(records),
            "sources": len({r["source_index"] for r in records}),
            "elapsed_s": round(time.perf_counter() - started, 3),
            "config": config.to_dict(),
        }
    )
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    report = verify_dataset(args.manifest, mode=args.mode, workers=args.workers)
    payload = report.to_dict()
    payload["min_agreement"] = args.min_agreement
    passed = report.empty or report.label_agreement >= args.min_agreement
    payload["passed"] = passed
    text = json.dumps(payload, indent=2) + "\n"
    if args.report:
        Path(args.report).write_text(text)
    else:
        sys.stdout.write(text)
    return 0 if passed else 3


def cmd_preview(args: argparse.Namespace) -> int:
    manifest = Path(args.manifest)
    records = {r["sample_id"]: r for r in read_manifest(manifest)}
    if args.sample not in records:
        raise StillMotionError(f"sample id {args.sample!r} not found in {manifest}")
    rec = records[args.sample]
    loaded = LoadedSample(record=rec, frames=load_frames(rec, manifest.parent))
    out = render_preview(loaded, args.out, style=args.style, fps=args.fps)
    _emit({"preview": str(out), "style": args.style, "sample": args.sample})
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    host, _, port = args.bind.rpartition(":")
    if not host:
        raise ConfigError(f"--bind expects HOST:PORT, got {args.bind!r}")
    if args.replay:
        producer = make_producer(replay_manifest=args.replay)
    else:
        if not args.in_dir:
            raise ConfigError("live mode requires --in DIR")
        producer = make_producer(config=build_config(args), input_dir=args.in_dir)
    server = StreamServer(producer, host=host, port=int(port), concurrency=args.concurrency)
    actual = server.address
    print(json.dumps({"serving": f"{actual[0]}:{actual[1]}", "mode": "replay" if args.replay else "live"}))
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    config = build_config(args)
    _emit(run_benchmark(config, args.in_dir, duration=args.duration))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stillmotion",
        description="Generate, verify, preview and stream pseudo-motion clip datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a labeled dataset from a source directory")
    p.add_argument("--in", dest="in_dir", required=True, metavar="DIR")
    p.add_argument("--out", dest="out_dir", required=True, metavar="DIR")
    _add_gen_options(p)
    p.add_argument("--workers", type=int, metavar="W", help="parallel source workers")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("verify", help="check stored labels against the block-matching oracle")
    p.add_argument("--manifest", required=True, metavar="PATH")
    p.add_argument("--mode", choices=("white", "black"), default="white")
    p.add_argument("--min-agreement", type=float, default=0.99, metavar="F")
    p.add_argument("--report", metavar="PATH", help="write the JSON report here instead of stdout")
    p.add_argument("--workers", type=int, default=None, metavar="W")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("preview", help="render a contact sheet or GIF for one sample")
    p.add_argument("--manifest", required=True, metavar="PATH")
    p.add_argument("--sample", required=True, metavar="ID")
    p.add_argument("--style", choices=("sheet", "anim"), default="sheet")
    p.add_argument("--out", required=True, metavar="PATH")
    p.add_argument("--fps", type=int, default=8)
    p.set_defaults(func=cmd_preview)

    p = sub.add_parser("serve", help="stream same-batch groups over TCP")
    p.add_argument("--bind", default="127.0.0.1:7447", metavar="ADDR")
    p.add_argument("--replay", metavar="MANIFEST", help="replay a stored dataset")
    p.add_argument("--live", action="store_true", help="generate on the fly from --in DIR")
    p.add_argument("--in", dest="in_dir", metavar="DIR")
    p.add_argument("--concurrency", type=int, default=8, metavar="N")
    _add_gen_options(p)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench", help="measure in-memory generation throughput")
    p.add_argument("--in", dest="in_dir", required=True, metavar="DIR")
    p.add_argument("--duration", type=float, default=10.0, metavar="SECS")
    _add_gen_options(p)
    p.set_defaults(func=cmd_bench)

    return parser


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 2
    except StillMotionError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)}, sys.stderr)
        sys.stderr.write("\n")
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
