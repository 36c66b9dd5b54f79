"""``mfc`` command line: run, fraction, eval, train-textures."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

import numpy as np

from .config import build_config, emit_defaults, load_config, parse_pairs
from .errors import ConfigError, InputError
from .pipeline import EvalReport, RunConfig, cloud_fraction, evaluate, run_mfc
from .raster import load_scene, read_mask, write_mask
from .texture import save_templates, to_gray8, train_templates

EXIT_OK, EXIT_INPUT, EXIT_CONFIG = 0, 2, 3
MASK_SUFFIXES = {".raw", ".bin", ".mask", ".png", ".tif", ".tiff"}
PATCH_SUFFIXES = {".npy", ".png", ".tif", ".tiff", ".hdr"}

log = logging.getLogger("mfc")


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument(
        "--set", action="append", default=[], metavar="KEY=VALUE",
        help="override one configuration key (repeatable), e.g. --set t1=0.15",
    )
    p.add_argument("--subsample", type=int, help="override the mode's subsampling ratio")
    p.add_argument("--workers", type=int, help="worker threads for per-object stages")
    p.add_argument("--templates", help="texture template file (default: bundled set)")
    p.add_argument("--gain", type=float, nargs=4, metavar="G", help="per-band DN gain")
    p.add_argument("--offset", type=float, nargs=4, metavar="O", help="per-band DN offset")


def _config_from_args(args, mode: str, explicit: bool) -> RunConfig:
    cfg = RunConfig(mode=mode)
    if args.config:
        cfg = load_config(args.config, cfg)
    pairs = parse_pairs(args.set, "--set")
    if args.subsample is not None:
        pairs["subsample"] = str(args.subsample)
    if args.workers is not None:
        pairs["workers"] = str(args.workers)
    if args.templates:
        pairs["template_path"] = args.templates
    if explicit:
        pairs["mode"] = mode
    return build_config(pairs, cfg)


def _load(args):
    calibration = None
    if args.gain is not None or args.offset is not None:
        gains = args.gain or [1.0] * 4
        offsets = args.offset or [0.0] * 4
        calibration = list(zip(gains, offsets))
    return load_scene(args.scene, calibration)


def cmd_run(args) -> int:
    cfg = _config_from_args(args, args.mode or "precise", args.mode is not None)
    if args.debug_stages:
        cfg = dataclasses.replace(cfg, debug_dir=args.debug_stages)
    scene = _load(args)
    mask = run_mfc(scene, cfg)
    out = Path(args.out) if args.out else Path(args.scene).with_name(Path(args.scene).stem + "_mask.raw")
    write_mask(mask, out)
    print(f"{out}\tcloud_fraction\t{cloud_fraction(mask):.6f}" if scene.valid.any() else f"{out}")
    return EXIT_OK


def cmd_fraction(args) -> int:
    cfg = _config_from_args(args, "fraction-only", True)
    scene = _load(args)
    print(f"{cloud_fraction(run_mfc(scene, cfg)):.6f}")
    return EXIT_OK


def _mask_files(directory: Path) -> dict[str, Path]:
    if not directory.is_dir():
        raise InputError(f"not a directory: {directory}")
    return {p.stem: p for p in sorted(directory.iterdir()) if p.suffix.lower() in MASK_SUFFIXES}


def cmd_eval(args) -> int:
    preds = _mask_files(Path(args.pred_dir))
    refs = _mask_files(Path(args.ref_dir))
    common = sorted(preds.keys() & refs.keys())
    for key in sorted(preds.keys() ^ refs.keys()):
        log.warning("unpaired mask %s", key)
    if not common:
        raise InputError("no prediction/reference pairs with matching names")
    report = EvalReport()
    for key in common:
        report.add(evaluate(read_mask(preds[key]), read_mask(refs[key]), key))
    text = report.to_tsv()
    if args.report:
        Path(args.report).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


def _read_patch(path: Path) -> np.ndarray:
    suffix = path.suffix.lower()
    if suffix == ".hdr":
        s = load_scene(path)
        return to_gray8((s.b1 + s.b2 + s.b3) / 3.0, s.valid)
    if suffix == ".npy":
        arr = np.load(path)
        if arr.ndim == 3 and arr.shape[0] >= 3:
            arr = arr[:3].mean(axis=0)
    else:
        from PIL import Image

        with Image.open(path) as im:
            arr = np.asarray(im.convert("L"))
    if arr.ndim != 2:
        raise InputError(f"{path}: expected a single-channel patch, got shape {arr.shape}")
    return arr if arr.dtype == np.uint8 else to_gray8(arr)


def _class_label(dirname: str) -> str:
    for kind in ("noncloud", "cloud"):
        for sep in (":", "_", "-"):
            if dirname.startswith(kind + sep) and len(dirname) > len(kind) + 1:
                return f"{kind}:{dirname[len(kind) + 1:]}"
    raise InputError(f"patch directory {dirname!r} must be named cloud_<name> or noncloud_<name>")


def cmd_train(args) -> int:
    root = Path(args.patch_dir)
    if not root.is_dir():
        raise InputError(f"not a directory: {root}")
    patches = []
    for sub in sorted(p for p in root.iterdir() if p.is_dir()):
        label = _class_label(sub.name)
        for f in sorted(sub.iterdir()):
            if f.suffix.lower() in PATCH_SUFFIXES:
                patches.append((_read_patch(f), label))
    templates = train_templates(patches)
    save_templates(templates, args.out)
    print(f"{args.out}\t{len(patches)} patches")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mfc", description="Cloud and cloud-shadow masking for 4-band imagery")
    parser.add_argument("--emit-defaults", action="store_true", help="print the default configuration and exit")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("run", help="produce a cloud/shadow mask")
    p.add_argument("scene", help="scene header (.hdr) or data file")
    p.add_argument("--mode", choices=("precise", "fast"))
    p.add_argument("--out", help="output mask (.raw with sidecar header, or .png/.tif)")
    p.add_argument("--debug-stages", metavar="DIR", help="write every intermediate stage mask to DIR")
    _add_config_args(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("fraction", help="estimate the cloud fraction (fast, no shadows)")
    p.add_argument("scene")
    _add_config_args(p)
    p.set_defaults(func=cmd_fraction)

    p = sub.add_parser("eval", help="compare predicted masks against reference masks")
    p.add_argument("pred_dir")
    p.add_argument("ref_dir")
    p.add_argument("--report", help="tab-separated report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("train-textures", help="train LBP texture templates from labelled patches")
    p.add_argument("patch_dir", help="directory with cloud_<name>/ and noncloud_<name>/ subdirectories")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    if args.emit_defaults:
        sys.stdout.write(emit_defaults())
        return EXIT_OK
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"mfc: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, OSError) as exc:
        print(f"mfc: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
