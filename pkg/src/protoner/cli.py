"""Command-line entry point.

One subcommand per pipeline stage. Exit codes: 0 success, 1 usage
error (unknown flags, missing arguments), 2 data error (unreadable or
malformed inputs). Logs go to stderr; data goes to stdout or --out.
"""
from __future__ import annotations

import argparse
import io
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

from protoner import bridge as bridge_mod
from protoner import evaluation
from protoner.corpus import (
    Corpus,
    bio_decode,
    parse_brat,
    parse_conll,
    split_dataset,
    write_conll,
)
from protoner.corpus.types import LabelSet
from protoner.crf import features as crf_features
from protoner.crf import model as crf_model
# the package re-exports train() as a function, shadowing the submodule
from protoner.crf.train import TrainConfig, tag as tag_corpus, train as train_model
from protoner.errors import DataError
from protoner.subword import (
    chunk_sentence,
    fragmentation_report,
    load_vocab,
    tokenize_sentence,
)

log = logging.getLogger("protoner")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse maps usage failures to exit 2; this toolkit reserves 2
    for data errors, so usage problems raise instead and main exits 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _ratios(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"ratios must be comma-separated floats: {text!r}")
    if not values or any(r <= 0 for r in values):
        raise argparse.ArgumentTypeError("ratios must be positive")
    if abs(sum(values) - 1.0) > 1e-9:
        raise argparse.ArgumentTypeError(f"ratios must sum to 1, got {sum(values)}")
    return values


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from None


def _write_text(path: Optional[str], content: str) -> None:
    if path is None:
        sys.stdout.write(content)
        return
    try:
        Path(path).write_text(content, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from None


def _load_corpus(path: str) -> Corpus:
    return parse_conll(_read_text(path))


def _load_vocab_args(args):
    case_mode = "uncased" if args.uncased else "cased"
    return load_vocab(_read_text(args.vocab), case_mode=case_mode)


def _load_gazetteers(args) -> list:
    gazetteers = []
    for spec in args.gazetteer or []:
        name, sep, path = spec.partition("=")
        if not sep or not name or not path:
            raise UsageError(f"--gazetteer wants name=path, got {spec!r}")
        gazetteers.append(crf_features.load_gazetteer(name, _read_text(path)))
    if args.gazetteer_dir:
        directory = Path(args.gazetteer_dir)
        if not directory.is_dir():
            raise DataError(f"--gazetteer-dir {args.gazetteer_dir} is not a directory")
        for path in sorted(directory.glob("*.txt")):
            gazetteers.append(crf_features.load_gazetteer(path.stem, _read_text(str(path))))
    return gazetteers


def _cmd_convert(args) -> int:
    if args.direction == "brat-to-conll":
        documents = []
        if args.input_dir:
            directory = Path(args.input_dir)
            if not directory.is_dir():
                raise DataError(f"{args.input_dir} is not a directory")
            pairs = sorted(directory.glob("*.txt"))
            if not pairs:
                raise DataError(f"no .txt files under {args.input_dir}")
            for text_path in pairs:
                ann_path = text_path.with_suffix(".ann")
                if not ann_path.exists():
                    raise DataError(f"missing annotation file {ann_path}")
                warnings: list[str] = []
                documents.append(
                    parse_brat(
                        _read_text(str(text_path)),
                        _read_text(str(ann_path)),
                        doc_id=text_path.stem,
                        warnings_out=warnings,
                    )
                )
                for message in warnings:
                    log.warning("%s: %s", text_path.stem, message)
        else:
            if not args.text or not args.ann:
                raise UsageError("brat-to-conll wants --input-dir or both --text and --ann")
            warnings = []
            documents.append(
                parse_brat(
                    _read_text(args.text),
                    _read_text(args.ann),
                    doc_id=args.doc_id or Path(args.text).stem,
                    warnings_out=warnings,
                )
            )
            for message in warnings:
                log.warning("%s", message)
        corpus = Corpus.from_documents(tuple(documents))
        _write_text(args.out, write_conll(corpus))
        return 0

    # conll-to-brat: text reconstructed by space-joining tokens per sentence
    if not args.input:
        raise UsageError("conll-to-brat wants --input")
    if not args.out_dir:
        raise UsageError("conll-to-brat wants --out-dir")
    corpus = _load_corpus(args.input)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for doc in corpus.documents:
        lines = []
        ann_lines = []
        t_index = 0
        offset = 0
        for sentence in doc.sentences:
            words = list(sentence.words)
            starts = []
            cursor = offset
            for word in words:
                starts.append(cursor)
                cursor += len(word) + 1
            lines.append(" ".join(words))
            if sentence.tags is not None:
                for span in bio_decode(sentence.tags):
                    t_index += 1
                    begin = starts[span.start]
                    finish = starts[span.end] + len(words[span.end])
                    surface = " ".join(words[span.start: span.end + 1])
                    ann_lines.append(
                        f"T{t_index}\t{span.entity_type} {begin} {finish}\t{surface}"
                    )
            offset = cursor
        text = "\n".join(lines) + "\n"
        (out_dir / f"{doc.id}.txt").write_text(text, encoding="utf-8")
        (out_dir / f"{doc.id}.ann").write_text(
            "".join(line + "\n" for line in ann_lines), encoding="utf-8"
        )
    return 0


def _cmd_split(args) -> int:
    corpus = _load_corpus(args.input)
    out_paths = args.out.split(",")
    if len(out_paths) != len(args.ratios):
        raise UsageError(
            f"{len(args.ratios)} ratios but {len(out_paths)} output paths"
        )
    try:
        parts = split_dataset(corpus, args.ratios, args.seed)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    for part, path in zip(parts, out_paths):
        _write_text(path, write_conll(part))
        log.info("%s: %d documents", path, len(part.documents))
    return 0


def _cmd_tokenize(args) -> int:
    corpus = _load_corpus(args.input)
    vocab = _load_vocab_args(args)
    lines = ["doc\tsentence\tpiece\tsurface\tword_index\tchunk"]
    for doc in corpus.documents:
        for s, sentence in enumerate(doc.sentences):
            aligned = tokenize_sentence(sentence, vocab)
            plan = chunk_sentence(aligned, args.budget)
            chunk_of_word = {}
            for c, (lo, hi) in enumerate(plan.chunks):
                for w in range(lo, hi):
                    chunk_of_word[w] = c
            for p, (piece, w) in enumerate(zip(aligned.pieces, aligned.word_index)):
                lines.append(f"{doc.id}\t{s}\t{p}\t{piece}\t{w}\t{chunk_of_word[w]}")
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _cmd_build_gazetteers(args) -> int:
    corpus = _load_corpus(args.input)
    if not corpus.is_tagged:
        raise DataError("build-gazetteers wants a fully tagged corpus")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    gazetteers = crf_features.harvest_gazetteers(corpus)
    if not gazetteers:
        raise DataError("corpus contains no entity spans to harvest")
    for gazetteer in gazetteers:
        path = out_dir / f"{gazetteer.name}.txt"
        path.write_text(
            "".join(entry + "\n" for entry in sorted(gazetteer.entries)),
            encoding="utf-8",
        )
        log.info("%s: %d entries", path, len(gazetteer.entries))
    return 0


def _parse_run_file(path: str, args) -> tuple[dict, list, list]:
    """Declarative train-crf run file: 'key value' lines, plus
    'template <kind@offset>' and 'gazetteer <name> <path>' lines.
    Command-line flags override run-file values."""
    hyper = {}
    templates = []
    gazetteers = []
    for lineno, raw in enumerate(_read_text(path).splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key = parts[0]
        if key == "template":
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: template wants one value")
            templates.append(crf_features.FeatureTemplate.parse(parts[1]))
        elif key == "gazetteer":
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: gazetteer wants name and path")
            gazetteers.append(crf_features.load_gazetteer(parts[1], _read_text(parts[2])))
        elif key in ("optimizer", "learning_rate", "epochs", "batch_size",
                     "l2_strength", "patience", "seed"):
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: {key} wants one value")
            hyper[key] = parts[1]
        else:
            raise DataError(f"{path}:{lineno}: unknown run-file key {key!r}")
    return hyper, templates, gazetteers


def _cmd_train_crf(args) -> int:
    corpus = _load_corpus(args.train)
    dev = _load_corpus(args.dev) if args.dev else None

    hyper: dict = {}
    templates = None
    gazetteers = _load_gazetteers(args)
    if args.run_file:
        hyper, run_templates, run_gazetteers = _parse_run_file(args.run_file, args)
        if run_templates:
            templates = tuple(run_templates)
        gazetteers.extend(run_gazetteers)
    if args.templates:
        templates = crf_features.parse_template_config(_read_text(args.templates))

    def pick(flag_value, key, cast):
        if flag_value is not None:
            return flag_value
        if key in hyper:
            try:
                return cast(hyper[key])
            except ValueError:
                raise DataError(f"run file: bad value for {key}: {hyper[key]!r}") from None
        return None

    config_kwargs = {}
    for flag, key, cast in (
        (args.optimizer, "optimizer", str),
        (args.learning_rate, "learning_rate", float),
        (args.epochs, "epochs", int),
        (args.batch_size, "batch_size", int),
        (args.l2, "l2_strength", float),
        (args.patience, "patience", int),
        (args.seed, "seed", int),
    ):
        value = pick(flag, key, cast)
        if value is not None:
            config_kwargs[key] = value
    try:
        config = TrainConfig(**config_kwargs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None

    model = train_model(corpus, dev, templates, gazetteers, config)
    crf_model.save_model(model, args.out)
    log.info("model written to %s", args.out)
    return 0


def _cmd_tag(args) -> int:
    model = crf_model.load_model(args.model)
    corpus = _load_corpus(args.input)
    constrained = args.decode == "constrained"
    tagged = tag_corpus(model, corpus, constrained=constrained)
    _write_text(args.out, write_conll(tagged))
    return 0


def _cmd_predict(args) -> int:
    corpus = _load_corpus(args.input)
    vocab = _load_vocab_args(args)
    label_set = None
    if args.labels:
        types = [line.strip() for line in _read_text(args.labels).splitlines() if line.strip()]
        label_set = LabelSet(tuple(types))
    tagged = bridge_mod.predict_corpus(
        _read_text(args.bridge), corpus, vocab, mode=args.mode, label_set=label_set
    )
    _write_text(args.out, write_conll(tagged))
    return 0


def _cmd_eval(args) -> int:
    gold = _load_corpus(args.gold)
    pred = _load_corpus(args.pred)
    modes = {
        "exact": [evaluation.MatchMode.EXACT],
        "partial": [evaluation.MatchMode.PARTIAL],
        "both": [evaluation.MatchMode.EXACT, evaluation.MatchMode.PARTIAL],
    }[args.mode]
    reports = [evaluation.evaluate(gold, pred, mode) for mode in modes]
    if args.format == "table":
        output = evaluation.format_reports_table(reports)
    else:
        output = evaluation.format_reports_kv(reports) + "\n"
    if args.error_report:
        records = evaluation.error_report(gold, pred)
        lines = ["", "error report:"]
        for record in records:
            gold_text = ", ".join(
                f"({s.start},{s.end},{s.entity_type})" for s in record.gold_spans
            )
            pred_text = ", ".join(
                f"({s.start},{s.end},{s.entity_type})" for s in record.pred_spans
            )
            suffix = f" [{record.detail}]" if record.detail else ""
            lines.append(
                f"{record.category}\t{record.doc_id}[{record.sentence_index}]\t"
                f"gold: {gold_text or '-'}\tpred: {pred_text or '-'}{suffix}"
            )
        output += "\n".join(lines) + "\n"
    _write_text(args.out, output)
    return 0


def _cmd_kappa(args) -> int:
    a = _load_corpus(args.a)
    b = _load_corpus(args.b)
    report = evaluation.cohen_kappa(a, b)
    _write_text(
        args.out,
        (
            f"kappa\t{report.kappa:.6f}\n"
            f"observed\t{report.observed:.6f}\n"
            f"expected\t{report.expected:.6f}\n"
            f"units\t{report.unit_count}\n"
        ),
    )
    return 0


def _cmd_frag_report(args) -> int:
    corpus = _load_corpus(args.input)
    vocab = _load_vocab_args(args)
    report = fragmentation_report(corpus, vocab)
    buffer = io.StringIO()
    report.to_tsv(buffer, top_k=args.top)
    _write_text(args.out, buffer.getvalue())
    return 0


def _add_vocab_flags(parser) -> None:
    parser.add_argument("--vocab", required=True, help="vocabulary file, one piece per line")
    parser.add_argument("--uncased", action="store_true", help="lowercase and strip accents")


def build_parser() -> _Parser:
    parser = _Parser(prog="protoner", description="Protocol NER toolkit")
    parser.add_argument("--verbose", action="store_true", help="info-level logs to stderr")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = commands.add_parser("convert", help="convert between BRAT standoff and CoNLL")
    p.add_argument("--direction", required=True, choices=["brat-to-conll", "conll-to-brat"])
    p.add_argument("--input-dir", help="directory of .txt/.ann pairs (brat-to-conll)")
    p.add_argument("--text", help="single BRAT text file")
    p.add_argument("--ann", help="single BRAT annotation file")
    p.add_argument("--doc-id", help="document id for single-file conversion")
    p.add_argument("--input", help="CoNLL input (conll-to-brat)")
    p.add_argument("--out", help="CoNLL output path (default stdout)")
    p.add_argument("--out-dir", help="directory for .txt/.ann outputs (conll-to-brat)")
    p.set_defaults(run=_cmd_convert)

    p = commands.add_parser("split", help="deterministic document-level split")
    p.add_argument("--input", required=True)
    p.add_argument("--ratios", required=True, type=_ratios, help="e.g. 0.6,0.2,0.2")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", required=True, help="comma-separated output paths, one per ratio")
    p.set_defaults(run=_cmd_split)

    p = commands.add_parser("tokenize", help="emit aligned subword pieces")
    p.add_argument("--input", required=True)
    _add_vocab_flags(p)
    p.add_argument("--budget", type=int, default=512)
    p.add_argument("--out")
    p.set_defaults(run=_cmd_tokenize)

    p = commands.add_parser("build-gazetteers", help="harvest per-type lexicons from tagged data")
    p.add_argument("--input", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(run=_cmd_build_gazetteers)

    p = commands.add_parser("train-crf", help="train the CRF baseline")
    p.add_argument("--train", required=True)
    p.add_argument("--dev")
    p.add_argument("--out", required=True, help="model output path")
    p.add_argument("--templates", help="template config file")
    p.add_argument("--gazetteer", action="append", help="name=path; repeatable")
    p.add_argument("--gazetteer-dir", help="directory of <name>.txt gazetteer files")
    p.add_argument("--run-file", help="declarative run file (overridden by flags)")
    p.add_argument("--optimizer", choices=["lbfgs", "sgd"])
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch-size", type=int)
    p.add_argument("--l2", type=float)
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.set_defaults(run=_cmd_train_crf)

    p = commands.add_parser("tag", help="tag a corpus with a trained CRF model")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--decode", choices=["constrained", "unconstrained"], default="constrained")
    p.add_argument("--out")
    p.set_defaults(run=_cmd_tag)

    p = commands.add_parser("predict", help="decode an external encoder's bridge file")
    p.add_argument("--bridge", required=True)
    p.add_argument("--input", required=True)
    _add_vocab_flags(p)
    p.add_argument("--mode", choices=["argmax", "constrained"], default="constrained")
    p.add_argument("--labels", help="expected entity types, one per line")
    p.add_argument("--out")
    p.set_defaults(run=_cmd_predict)

    p = commands.add_parser("eval", help="span-level scoring in both match regimes")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--mode", choices=["exact", "partial", "both"], default="both")
    p.add_argument("--format", choices=["table", "kv"], default="table")
    p.add_argument("--error-report", action="store_true")
    p.add_argument("--out")
    p.set_defaults(run=_cmd_eval)

    p = commands.add_parser("kappa", help="span-level inter-annotator agreement")
    p.add_argument("--a", required=True, help="first annotator's CoNLL file")
    p.add_argument("--b", required=True, help="second annotator's CoNLL file")
    p.add_argument("--out")
    p.set_defaults(run=_cmd_kappa)

    p = commands.add_parser("frag-report", help="subword fragmentation diagnostics")
    p.add_argument("--input", required=True)
    _add_vocab_flags(p)
    p.add_argument("--top", type=int, help="only the top-k most fragmented word types")
    p.add_argument("--out")
    p.set_defaults(run=_cmd_frag_report)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(message)s",
    )
    try:
        return args.run(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
