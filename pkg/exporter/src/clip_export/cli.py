"""Command-line entry point for the embedding exporter.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from typing import List, Optional

from .errors import ExportError
from .exporter import DEFAULT_TEMPLATES, ExportJob, export_embeddings


class _UsageError(ExportError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _read_lines(path) -> List[str]:
    with open(path) as fh:
        return [line.strip() for line in fh if line.strip()]


def build_parser() -> _Parser:
    parser = _Parser(prog="clip-export",
                     description="export frame and prompt embeddings to "
                                 "EMB1/TXB1 files")
    parser.add_argument("--frames", required=True,
                        help="directory of per-video frame-image folders")
    parser.add_argument("--classes", required=True,
                        help="comma-separated class names, or @file with one "
                             "name per line")
    parser.add_argument("-o", "--out", required=True)
    parser.add_argument("--encoder", default="hash-512",
                        help="hash-<dim> (offline) or clip-<model id>")
    parser.add_argument("--templates-file", default=None,
                        help="one [CLS] template per line; default: the "
                             f"built-in {len(DEFAULT_TEMPLATES)} templates")
    parser.add_argument("--tag", default="embeddings",
                        help="manifest key and output file stem")
    parser.add_argument("--k-max", type=int, default=16,
                        help="max frames sampled uniformly per video")
    parser.add_argument("--labels-from-prefix", action="store_true",
                        help="derive labels from 'classname__' folder prefixes")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        if args.classes.startswith("@"):
            class_names = _read_lines(args.classes[1:])
        else:
            class_names = [c.strip() for c in args.classes.split(",") if c.strip()]
        templates = (_read_lines(args.templates_file)
                     if args.templates_file else list(DEFAULT_TEMPLATES))
        job = ExportJob(
            frames_dir=args.frames,
            class_names=class_names,
            out_dir=args.out,
            encoder=args.encoder,
            templates=templates,
            tag=args.tag,
            k_max=args.k_max,
            label_from_prefix=args.labels_from_prefix,
        )
        files = export_embeddings(job)
        print(f"exported {', '.join(sorted(files.values()))} to {args.out}")
        return 0
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
