"""Command-line front end: export and verify."""

from __future__ import annotations

import argparse
import sys

from .exporter import ExportError, export, verify_problems


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="polar-export",
        description="Convert a masked-LM checkpoint into a scoring model_dir.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("export", help="write model_dir files from a checkpoint")
    p.add_argument("--checkpoint", required=True, help="checkpoint directory")
    p.add_argument("--out", required=True, help="target model_dir")
    p.add_argument("--usr-prefix", default="usr", help="user token prefix (default usr)")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("verify", help="audit an exported model_dir")
    p.add_argument("--model-dir", required=True)
    p.set_defaults(func=cmd_verify)
    return parser


def cmd_export(args) -> int:
    manifest = export(args.checkpoint, args.out, usr_prefix=args.usr_prefix)
    print(
        f"exported {manifest.vocab_size} tokens x {manifest.dim} dims "
        f"({manifest.user_token_count} user tokens) -> {args.out}"
    )
    for w in manifest.warnings:
        print(f"warning: {w}", file=sys.stderr)
    return 0


def cmd_verify(args) -> int:
    problems = verify_problems(args.model_dir)
    if not problems:
        print("ok")
        return 0
    for p in problems:
        print(f"problem: {p}", file=sys.stderr)
    return 1


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
