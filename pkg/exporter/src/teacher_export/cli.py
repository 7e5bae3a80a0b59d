"""Command-line entry point for the teacher exporter.

Exit codes match the training engine's contract: 0 success,
1 usage/config error, 3 I/O or decode error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .backends import DEFAULT_TEACHERS
from .errors import DecodeError, ModelLoadError, UsageError
from .export import ExportManifest, export_teachers

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="teacher-export",
        description="Export frozen teacher embeddings as binary embedding files")
    parser.add_argument("--captions", help="UTF-8 text file, one caption per line")
    parser.add_argument("--images", help="directory of PPM/PGM images")
    parser.add_argument("--teachers", default=",".join(DEFAULT_TEACHERS),
                        help="comma-separated teacher ids")
    parser.add_argument("--backend", default="hashed",
                        choices=("hashed", "transformers"))
    parser.add_argument("--no-normalize", action="store_true",
                        help="keep native (unnormalized) embeddings")
    parser.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = ExportManifest(
            out_dir=Path(args.out),
            captions_path=Path(args.captions) if args.captions else None,
            image_dir=Path(args.images) if args.images else None,
            teachers=tuple(t.strip() for t in args.teachers.split(",") if t.strip()),
            normalize=not args.no_normalize,
            backend=args.backend)
        written = export_teachers(manifest)
    except (UsageError, ModelLoadError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DecodeError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    for teacher, path in written.items():
        print(f"wrote {teacher} -> {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
