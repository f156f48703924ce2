"""Command-line entry point.

Subcommands mirror the pipeline stages: label, fog-sweep, eval, encode,
export. Exit codes: 0 success, 1 configuration error, 2 partial frame
failures (details in the manifest).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .config import ConfigError, load_config
from .encode import RaedTensor, normalize_rae, raed_from_channels, raed_to_rae
from .geometry import CalibrationError
from .pipeline import manifest_exit_code, run_eval, run_fog_sweep, run_label
from .plyio import export_ply, read_labeled_ply
from .tensorio import MalformedTensorError, read_tensor, write_tensor


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, required=True, help="pipeline config file")
    parser.add_argument("--scene", action="append", dest="scenes", metavar="NAME",
                        help="scene id (repeatable; overrides config)")
    parser.add_argument("--frames", metavar="A..B", help="inclusive frame id range")
    parser.add_argument("--out", type=Path, dest="output_dir", help="output directory")
    parser.add_argument("--workers", type=int, help="parallel frame workers")


def _overrides(args: argparse.Namespace) -> dict:
    out = {}
    for key in ("scenes", "output_dir", "workers", "seg_source", "gamma"):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    if getattr(args, "frames", None):
        a, _, b = args.frames.partition("..")
        out["frames"] = (int(a), int(b))
    if getattr(args, "betas", None):
        out["betas"] = tuple(float(b) for b in args.betas.split(","))
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="radarlabel",
        description="Camera-guided semantic labeling of 4D radar point clouds")
    parser.add_argument("-v", "--verbose", action="store_true", help="per-frame logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("label", help="project, sample, and refine labels per frame")
    _add_common(p)
    p.add_argument("--seg-source", dest="seg_source",
                   choices=("camera", "radar", "fused"), help="segmentation source")

    p = sub.add_parser("fog-sweep", help="render fogged images per attenuation level")
    _add_common(p)
    p.add_argument("--betas", metavar="B1,B2,...", help="comma-separated attenuation levels")
    p.add_argument("--gamma", type=float, help="apply fog in gamma-decoded space")

    p = sub.add_parser("eval", help="score predicted clouds against ground truth")
    _add_common(p)
    p.add_argument("--pred", type=Path, required=True, help="directory of predicted clouds")
    p.add_argument("--truth", type=Path, required=True, help="directory of truth clouds")

    p = sub.add_parser("encode", help="fold a Doppler radar cube into a range-azimuth-elevation volume")
    p.add_argument("--raed", type=Path, help="channel-pair tensor file (2, D, A, R)")
    p.add_argument("--power", type=Path, help="power tensor file (D, A, R)")
    p.add_argument("--elev", type=Path, help="elevation index tensor file (D, A, R)")
    p.add_argument("--out", type=Path, required=True, help="output tensor file")
    p.add_argument("--normalize", action="store_true", help="log-compress and standardize")
    p.add_argument("--epsilon", type=float, default=1e-6, help="standardization guard")

    p = sub.add_parser("export", help="re-encode a labeled cloud (e.g. binary to ascii)")
    p.add_argument("--in", dest="src", type=Path, required=True, help="input PLY")
    p.add_argument("--out", type=Path, required=True, help="output PLY")
    p.add_argument("--ascii", action="store_true", help="write ASCII instead of binary")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "label":
            cfg = load_config(args.config, _overrides(args))
            return manifest_exit_code(run_label(cfg))
        if args.command == "fog-sweep":
            cfg = load_config(args.config, _overrides(args))
            return manifest_exit_code(run_fog_sweep(cfg))
        if args.command == "eval":
            cfg = load_config(args.config, _overrides(args))
            _, _, skipped = run_eval(cfg, args.pred, args.truth)
            print((cfg.output_dir / "report.txt").read_text(), end="")
            return 2 if skipped else 0
        if args.command == "encode":
            if args.raed is not None:
                raed = raed_from_channels(read_tensor(args.raed))
            elif args.power is not None and args.elev is not None:
                raed = RaedTensor(power=read_tensor(args.power),
                                  elev_index=read_tensor(args.elev))
            else:
                print("error: provide --raed or both --power and --elev", file=sys.stderr)
                return 1
            rae = raed_to_rae(raed)
            if args.normalize:
                rae = normalize_rae(rae, epsilon=args.epsilon)
            write_tensor(rae.power, args.out)
            return 0
        if args.command == "export":
            export_ply(read_labeled_ply(args.src), args.out, binary=not args.ascii)
            return 0
    except (ConfigError, CalibrationError, MalformedTensorError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
