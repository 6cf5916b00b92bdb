"""Command-line interface.

Commands: ``fuse``, ``synth-gt``, ``eval``, ``validate-dataset``.
Exit codes: 0 success, 1 unreadable input or empty dataset, 2 estimation
failure (registration/alignment). ``AIFPIPE_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import PipelineConfig
from .dataset import discover_scenes, load_scene, validate_dataset
from .errors import EstimationFailedError, InvalidArgumentError
from .image import read_png, write_png
from .metrics import evaluate_dataset
from .pipeline import fuse_pair, synth_gt_pair
from .registration import dump_correspondences_csv

log = logging.getLogger("aifpipe")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_ESTIMATION = 2


def _setup_logging() -> None:
    level = os.environ.get("AIFPIPE_LOG", "WARNING").upper()
    logging.basicConfig(format="[aifpipe] %(levelname)s %(message)s")
    log.setLevel(getattr(logging, level, logging.WARNING))


def _load_config(path: str | None, seed: int | None) -> PipelineConfig:
    cfg = PipelineConfig.from_file(path)
    if seed is not None:
        cfg.seed = seed
        cfg.validate()
    return cfg


def _print_timings(timings: dict[str, float]) -> None:
    for stage in ("registration", "flow", "color", "fusion", "total"):
        if stage in timings:
            print(f"[aifpipe] runtime {stage}: {timings[stage]:.3f} s")


def cmd_fuse(args) -> int:
    try:
        cfg = _load_config(args.config, args.seed)
    except (InvalidArgumentError, OSError) as e:
        print(f"[aifpipe] error: {e}", file=sys.stderr)
        return EXIT_INPUT
    try:
        main = read_png(args.main)
        wide = read_png(args.wide)
    except InvalidArgumentError as e:
        print(f"[aifpipe] error: {e}", file=sys.stderr)
        return EXIT_INPUT
    try:
        result = fuse_pair(main, wide, cfg)
    except EstimationFailedError as e:
        print(f"[aifpipe] registration failed: {e}", file=sys.stderr)
        return EXIT_ESTIMATION

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_png(out_dir / "aif.png", result.aif)
    if args.save_intermediates:
        for name, img in result.intermediates.items():
            write_png(out_dir / f"{name}.png", img)
        if result.correspondences is not None:
            dump_correspondences_csv(
                out_dir / "correspondences.csv",
                result.correspondences, result.inlier_mask,
            )
    _print_timings(result.timings)
    print(f"[aifpipe] wrote {out_dir / 'aif.png'}")
    return EXIT_OK


def _synth_one(scene_dir: Path, out_dir: Path, cfg: PipelineConfig) -> int:
    try:
        rec = load_scene(scene_dir)
        fg = read_png(rec.main_fg)
        bg = read_png(rec.main_bg)
    except InvalidArgumentError as e:
        print(f"[aifpipe] error: {e}", file=sys.stderr)
        return EXIT_INPUT
    try:
        gt, m_fuse, timings = synth_gt_pair(fg, bg, cfg)
    except (EstimationFailedError, InvalidArgumentError) as e:
        print(f"[aifpipe] alignment failed for {rec.scene_id}: {e}", file=sys.stderr)
        return EXIT_ESTIMATION
    out_dir.mkdir(parents=True, exist_ok=True)
    write_png(out_dir / "gt.png", gt)
    write_png(out_dir / "m_fuse.png", m_fuse)
    _print_timings(timings)
    print(f"[aifpipe] wrote {out_dir / 'gt.png'}")
    return EXIT_OK


def cmd_synth_gt(args) -> int:
    try:
        cfg = _load_config(args.config, args.seed)
    except (InvalidArgumentError, OSError) as e:
        print(f"[aifpipe] error: {e}", file=sys.stderr)
        return EXIT_INPUT
    target = Path(args.scene)
    if (target / "scenes").is_dir():
        # batch mode over a dataset root; outputs land inside each scene
        scene_dirs = discover_scenes(target)
        if not scene_dirs:
            print("[aifpipe] error: empty dataset", file=sys.stderr)
            return EXIT_INPUT
        out_root = Path(args.out) if args.out else None

        def run(sd: Path) -> int:
            dest = (out_root / sd.name) if out_root else sd
            return _synth_one(sd, dest, cfg)

        if args.jobs > 1:
            with ThreadPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(run, scene_dirs))
        else:
            codes = [run(sd) for sd in scene_dirs]
        return max(codes)
    out_dir = Path(args.out) if args.out else target
    return _synth_one(target, out_dir, cfg)


def cmd_eval(args) -> int:
    try:
        report = evaluate_dataset(args.root, args.pred, out_csv=args.out,
                                  jobs=args.jobs)
    except InvalidArgumentError as e:
        print(f"[aifpipe] error: {e}", file=sys.stderr)
        return EXIT_INPUT
    if not report.rows:
        print("[aifpipe] error: no scenes evaluated", file=sys.stderr)
        return EXIT_INPUT
    summary = report.summary()
    for split in ("foreground", "background", "total"):
        s = summary[split]
        if math.isnan(s["psnr"]):
            continue
        print(
            f"[aifpipe] {split}: psnr={s['psnr']:.4f} dB "
            f"ssim_rgb={s['ssim_rgb']:.4f} ssim_luma={s['ssim_luma']:.4f}"
        )
    if report.errors:
        print(f"[aifpipe] errors: {report.errors} scene(s) skipped")
    return EXIT_OK


def cmd_validate_dataset(args) -> int:
    try:
        report = validate_dataset(args.root)
    except InvalidArgumentError as e:
        print(f"[aifpipe] error: {e}", file=sys.stderr)
        return EXIT_INPUT
    print(f"[aifpipe] scenes: {report['scenes']}")
    for msg in report["warnings"]:
        print(f"[aifpipe] warning: {msg}")
    for msg in report["problems"]:
        print(f"[aifpipe] problem: {msg}", file=sys.stderr)
    if report["scenes"] == 0 or report["problems"]:
        return EXIT_INPUT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="aifpipe",
        description="All-in-focus synthesis from a main/ultra-wide image pair",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fuse", help="fuse one main/ultra-wide pair")
    p.add_argument("main", help="main-camera PNG")
    p.add_argument("wide", help="ultra-wide-camera PNG")
    p.add_argument("--config", default=None, help="key=value config file")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--save-intermediates", action="store_true")
    p.add_argument("--seed", type=int, default=None, help="override RANSAC seed")
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("synth-gt", help="synthesize fusion ground truth")
    p.add_argument("scene", help="scene directory, or dataset root for batch mode")
    p.add_argument("--config", default=None)
    p.add_argument("--out", default=None, help="output directory (default: in place)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_synth_gt)

    p = sub.add_parser("eval", help="evaluate predictions against ground truth")
    p.add_argument("root", help="dataset root")
    p.add_argument("pred", help="directory of <scene>_fg.png / <scene>_bg.png")
    p.add_argument("--out", default="report.csv", help="output CSV path")
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validate-dataset", help="check dataset layout")
    p.add_argument("root")
    p.set_defaults(func=cmd_validate_dataset)
    return parser


def main(argv: list[str] | None = None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
