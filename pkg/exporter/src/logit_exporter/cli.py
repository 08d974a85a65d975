"""Command line wrapper: checkpoint + manifest in, logit .jsonl out."""

from __future__ import annotations

import argparse
import json
import sys

from .export import ExportJob, export_logits


def build_parser():
    parser = argparse.ArgumentParser(
        prog="logit-export",
        description="run an audio-frame-classification checkpoint over manifest "
                    "words and write raw 20 ms frame logits as .jsonl")
    parser.add_argument("--checkpoint", required=True,
                        help="local checkpoint directory or hub id")
    parser.add_argument("--manifest", required=True, help="word manifest .jsonl")
    parser.add_argument("--out", required=True, help="output logit .jsonl")
    parser.add_argument("--device", default="cpu",
                        help="device hint: cpu, cuda, cuda:N, mps")
    parser.add_argument("--batch-size", type=int, default=8)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    job = ExportJob(args.checkpoint, args.manifest, args.out, args.device)
    try:
        n = export_logits(job, batch_size=args.batch_size)
    except Exception as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}),
              file=sys.stderr)
        return 1
    print(f"{n} logit rows -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
