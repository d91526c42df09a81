"""Command-line entry points: export-logits and finetune.

Exit codes follow the consumer's convention: 0 success, 1 usage or
configuration problems, 2 malformed data.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from protoner_adapter.adapter import (
    FineTuneConfig,
    export_logits,
    finetune,
    load_checkpoint,
    save_checkpoint,
)
from protoner_adapter.conll import parse_conll
from protoner_adapter.errors import AdapterDataError, AdapterError
from protoner_adapter.wordpiece import load_vocab


class _UsageExit(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 on usage; we reserve 2 for data
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise _UsageExit()


def _read(path: str) -> str:
    with open(path, encoding="utf-8") as f:
        return f.read()


def _cmd_export(args) -> int:
    vocab = load_vocab(args.vocab, "uncased" if args.uncased else "cased")
    checkpoint = load_checkpoint(args.checkpoint, vocab)
    documents = parse_conll(_read(args.input))
    config = FineTuneConfig(max_length=args.budget, batch_size=args.batch_size)
    with open(args.out, "w", encoding="utf-8") as sink:
        export_logits(documents, vocab, checkpoint, config, sink)
    return 0


def _cmd_finetune(args) -> int:
    vocab = load_vocab(args.vocab, "uncased" if args.uncased else "cased")
    checkpoint = load_checkpoint(args.checkpoint, vocab)
    train = parse_conll(_read(args.train))
    valid = parse_conll(_read(args.valid)) if args.valid else None
    config = FineTuneConfig(
        model_size=args.model_size,
        max_length=args.budget,
        epochs=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        patience=args.patience,
        seed=args.seed,
    )
    checkpoint, _ = finetune(train, valid, vocab, checkpoint, config)
    save_checkpoint(checkpoint, vocab, args.out_dir)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="protoner-adapter", description="Encoder bridge exporter")
    parser.add_argument("--verbose", action="store_true", help="info-level logs to stderr")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = commands.add_parser("export-logits", help="write per-piece scores as a bridge file")
    p.add_argument("--input", required=True, help="CoNLL corpus to score")
    p.add_argument("--vocab", required=True, help="vocabulary file, one piece per line")
    p.add_argument("--uncased", action="store_true")
    p.add_argument("--checkpoint", required=True, help="saved checkpoint directory")
    p.add_argument("--out", required=True, help="bridge file output path")
    p.add_argument("--budget", type=int, default=512)
    p.add_argument("--batch-size", type=int, default=16)
    p.set_defaults(run=_cmd_export)

    p = commands.add_parser("finetune", help="fine-tune on a tagged corpus")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", help="validation corpus for early stopping")
    p.add_argument("--vocab", required=True)
    p.add_argument("--uncased", action="store_true")
    p.add_argument("--checkpoint", required=True, help="starting checkpoint directory")
    p.add_argument("--out-dir", required=True, help="where the tuned checkpoint lands")
    p.add_argument("--model-size", choices=["base", "large"], default="base")
    p.add_argument("--budget", type=int, default=512)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int, default=16)
    p.add_argument("--learning-rate", type=float, default=1e-5)
    p.add_argument("--patience", type=int, default=2)
    p.add_argument("--seed", type=int, default=13)
    p.set_defaults(run=_cmd_finetune)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageExit:
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.run(args)
    except AdapterDataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2
    except (AdapterError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
