"""Command line: reic-export --corpus FILE --encoder ID --out FILE [--batch N]."""
from __future__ import annotations

import argparse
import logging
import sys

from .encoders import EncoderUnavailableError
from .export import DataError, ExportJob, export


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reic-export",
        description="Encode [target sentence, sentence] pairs of a raw-text "
                    "corpus with a frozen encoder and write a REICEMB1 "
                    "embedding store.")
    parser.add_argument("--corpus", required=True, help="corpus JSON with sentence text")
    parser.add_argument("--encoder", required=True,
                        help="'hash[:variant]' or a local transformers model path/id")
    parser.add_argument("--out", required=True, help="output store file")
    parser.add_argument("--batch", type=int, default=32, metavar="N")
    parser.add_argument("--max-tokens", type=int, default=512, metavar="N")
    parser.add_argument("--device", default="cpu")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    job = ExportJob(corpus=args.corpus, encoder_id=args.encoder, out=args.out,
                    device=args.device, max_tokens=args.max_tokens,
                    batch_size=args.batch)
    try:
        out = export(job)
    except (DataError, EncoderUnavailableError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
