"""Command-line entry point: convert one upstream scene directory."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .convert import convert_scene


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="radarconvert",
        description="Convert an upstream dataset scene into canonical toolkit files")
    parser.add_argument("convert", choices=["convert"], nargs="?", default="convert",
                        help=argparse.SUPPRESS)
    parser.add_argument("--scene", type=Path, required=True, help="upstream scene directory")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    args = parser.parse_args(argv)
    try:
        manifest = convert_scene(args.scene, args.out)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    flagged = [f.frame_id for f in manifest.frames if f.status != "ok"]
    print(f"converted {len(manifest.frames)} frames"
          + (f", flagged: {flagged}" if flagged else ""))
    return 2 if flagged else 0


if __name__ == "__main__":
    sys.exit(main())
