"""Command-line front end for map extraction and overlay rendering.

    corrmap extract --image frame.png --text "is the dog erect-eared" --out frame.corr
    corrmap extract --image a.png b.png --text "red car" --patch 32 --out maps/
    corrmap overlay --map frame.corr --image frame.png --out heat.png

Exit codes: 0 on success, 2 on bad inputs or an unavailable model.
"""
from __future__ import annotations

import argparse
import sys

from .encoders import ModelError
from .extract import ExtractionError, ExtractionJob, run_job
from .mapio import MapIOError
from .overlay import OverlayError, write_overlay


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrmap",
        description="Per-patch text-image correlation maps and overlays")
    sub = parser.add_subparsers(dest="command", required=True)

    ext_p = sub.add_parser("extract",
                           help="write a correlation map per input image")
    ext_p.add_argument("--image", nargs="+", required=True, metavar="PATH",
                       help="input frame(s); several imply --out is a directory")
    ext_p.add_argument("--text", required=True,
                       help="the words to correlate the frame against")
    ext_p.add_argument("--patch", type=int, default=64, metavar="N",
                       help="patch edge length in pixels (default 64)")
    ext_p.add_argument("--model", default="palette",
                       help="embedding backend id (default: builtin palette)")
    ext_p.add_argument("--out", required=True,
                       help="map file, or directory for several images")

    ovl_p = sub.add_parser("overlay",
                           help="render a map as a heat layer over its frame")
    ovl_p.add_argument("--map", required=True, help="correlation map file")
    ovl_p.add_argument("--image", required=True, help="the matching frame")
    ovl_p.add_argument("--out", required=True, help="PNG to write")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "extract":
            job = ExtractionJob(images=list(args.image), text=args.text,
                                patch_size=args.patch, model=args.model,
                                out=args.out)
            for path in run_job(job):
                print(path)
        else:
            write_overlay(args.map, args.image, args.out)
            print(args.out)
    except (ExtractionError, ModelError, MapIOError, OverlayError) as exc:
        print(f"corrmap: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
