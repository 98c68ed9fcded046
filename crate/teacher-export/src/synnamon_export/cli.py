from __future__ import annotations

import argparse
import logging
import os
import sys

from .encoders import EmptyTokenization, HFEncoder, ModelLoadError
from .export import export_corpus
from .trees import TreeError


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="synnamon-export", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    e = sub.add_parser("export", help="encode a treebank with a transformer teacher")
    e.add_argument("--model", required=True, help="Hugging Face model id or local path")
    e.add_argument("--pooling", choices=["cls", "native"], default="cls")
    e.add_argument("--bert-word-source", choices=["input-table", "encoded"], default="input-table")
    e.add_argument("--trees", required=True)
    e.add_argument("--out", required=True)
    e.add_argument("--raw", action="store_true", help="keep function tags and empty elements")
    e.add_argument("--device", default="cpu")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=os.environ.get("SYNNAMON_LOG", "warning").upper())
    try:
        enc = HFEncoder(args.model, args.pooling, args.bert_word_source, args.device)
        n = export_corpus(enc, args.trees, args.out, normalize=not args.raw)
    except (TreeError, ValueError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (ModelLoadError, EmptyTokenization) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {n} records to {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
