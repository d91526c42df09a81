"""Transformer encoder adapter.

Runs a token-classification encoder over CoNLL input and exports
per-piece scores as bridge files; fine-tunes the encoder + head on
tagged corpora. The adapter never decodes tags: every label decision
happens in the consumer toolkit, which also supplies validation F1
during training through its command-line interface.
"""
from __future__ import annotations

import logging
import os
import random
import subprocess
import tempfile
from dataclasses import dataclass
from typing import Optional, Sequence, TextIO

import torch
from transformers import BertConfig, BertForTokenClassification

from protoner_adapter.bridge_io import write_header, write_record
from protoner_adapter.conll import Document, write_conll
from protoner_adapter.errors import AdapterDataError, AdapterError
from protoner_adapter.wordpiece import Alignment, Vocab, align, chunk_word_ranges

log = logging.getLogger("protoner_adapter")

IGNORE_INDEX = -100  # the loss mask value for continuations and delimiters
CONSUMER_CLI = ("protoner",)


def alphabet_of(entity_types: Sequence[str]) -> tuple[str, ...]:
    """O first, then the B-/I- pair of each type in declaration order."""
    tags = ["O"]
    for t in entity_types:
        tags += [f"B-{t}", f"I-{t}"]
    return tuple(tags)


@dataclass(frozen=True)
class FineTuneConfig:
    """Optimization recipe; the size maps to an epoch cap (base 8,
    large 4) and early stopping on the validation set may end sooner."""

    model_size: str = "base"
    max_length: int = 512
    epochs: Optional[int] = None  # explicit override of the size cap
    batch_size: int = 16
    dropout: float = 0.1
    learning_rate: float = 1e-5
    patience: int = 2
    seed: int = 13

    def __post_init__(self):
        if self.model_size not in ("base", "large"):
            raise ValueError(f"model_size must be base or large, got {self.model_size!r}")
        if self.max_length < 3:
            raise ValueError("max_length must fit two delimiters and a piece")
        if self.epochs is not None and self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.batch_size < 1 or self.patience < 0:
            raise ValueError("batch_size/patience out of range")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @property
    def epoch_cap(self) -> int:
        if self.epochs is not None:
            return self.epochs
        return 4 if self.model_size == "large" else 8


@dataclass
class Checkpoint:
    """An encoder + head bound to one vocabulary and tag alphabet."""

    model: BertForTokenClassification
    vocab_id: str

    @property
    def alphabet(self) -> tuple[str, ...]:
        labels = self.model.config.id2label
        return tuple(
            labels[i] if i in labels else labels[str(i)]
            for i in range(self.model.config.num_labels)
        )

    @property
    def entity_types(self) -> tuple[str, ...]:
        return tuple(t[2:] for t in self.alphabet if t.startswith("B-"))


def fresh_checkpoint(
    entity_types: Sequence[str],
    vocab: Vocab,
    hidden_size: int = 768,
    num_layers: int = 12,
    num_heads: int = 12,
    intermediate_size: int = 3072,
    max_positions: int = 512,
    dropout: float = 0.1,
    seed: int = 0,
) -> Checkpoint:
    """A randomly initialized encoder bound to the vocabulary; the
    defaults mirror a base-size encoder, tests shrink them."""
    alphabet = alphabet_of(entity_types)
    torch.manual_seed(seed)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden_size,
        num_hidden_layers=num_layers,
        num_attention_heads=num_heads,
        intermediate_size=intermediate_size,
        max_position_embeddings=max_positions,
        hidden_dropout_prob=dropout,
        attention_probs_dropout_prob=dropout,
        num_labels=len(alphabet),
        id2label=dict(enumerate(alphabet)),
        label2id={t: i for i, t in enumerate(alphabet)},
    )
    return Checkpoint(BertForTokenClassification(config), vocab.identifier)


def load_checkpoint(path: str, vocab: Vocab) -> Checkpoint:
    """Load a saved checkpoint and bind it to the declared vocabulary.

    A vocab.txt shipped next to the weights must hash to the declared
    identifier; the embedding table must match the vocabulary size."""
    model = BertForTokenClassification.from_pretrained(path)
    if os.path.isdir(path):
        vocab_file = os.path.join(path, "vocab.txt")
        if os.path.exists(vocab_file):
            from protoner_adapter.wordpiece import load_vocab

            shipped = load_vocab(vocab_file, case_mode=vocab.case_mode)
            if shipped.identifier != vocab.identifier:
                raise AdapterError(
                    f"vocabulary mismatch: declared {vocab.identifier}, "
                    f"checkpoint ships {shipped.identifier}"
                )
    rows = model.get_input_embeddings().num_embeddings
    if rows != len(vocab):
        raise AdapterError(
            f"vocabulary mismatch: checkpoint embeds {rows} pieces, "
            f"vocabulary has {len(vocab)}"
        )
    checkpoint = Checkpoint(model, vocab.identifier)
    if not checkpoint.alphabet or checkpoint.alphabet[0] != "O":
        raise AdapterError(
            f"checkpoint label alphabet {checkpoint.alphabet!r} is not a BIO alphabet"
        )
    return checkpoint


def save_checkpoint(checkpoint: Checkpoint, vocab: Vocab, out_dir: str) -> None:
    checkpoint.model.save_pretrained(out_dir)
    with open(os.path.join(out_dir, "vocab.txt"), "w", encoding="utf-8") as f:
        f.write("\n".join(vocab.pieces) + "\n")


def _piece_counts(alignment: Alignment, n_words: int) -> list[int]:
    first = list(alignment.first_piece_index) + [len(alignment.pieces)]
    return [first[w + 1] - first[w] for w in range(n_words)]


@dataclass(frozen=True)
class _Chunk:
    doc_id: str
    sentence_index: int
    pieces: tuple[str, ...]
    word_index: tuple[int, ...]  # per piece: source word, sentence-wide
    ids: tuple[int, ...]  # with delimiters
    labels: tuple[int, ...]  # with delimiters; IGNORE_INDEX where masked


def _chunks_of(
    documents: Sequence[Document],
    vocab: Vocab,
    budget: int,
    label_ids: Optional[dict] = None,
) -> list[_Chunk]:
    """Wire-ordered encoder inputs, one per chunk. With label_ids given
    each first piece carries its word tag's id and everything else is
    masked out of the loss."""
    cls_id, sep_id = vocab.delimiter_ids()
    chunks: list[_Chunk] = []
    for doc in documents:
        for s, sentence in enumerate(doc.sentences):
            alignment = align(sentence.words, vocab)
            counts = _piece_counts(alignment, len(sentence.words))
            for lo, hi in chunk_word_ranges(counts, budget):
                plo = alignment.first_piece_index[lo]
                phi = (
                    alignment.first_piece_index[hi]
                    if hi < len(sentence.words)
                    else len(alignment.pieces)
                )
                pieces = alignment.pieces[plo:phi]
                words = alignment.word_index[plo:phi]
                labels = [IGNORE_INDEX] * (len(pieces) + 2)
                if label_ids is not None:
                    for i, (p, w) in enumerate(zip(range(plo, phi), words)):
                        if alignment.first_piece_index[w] == p:
                            tag = sentence.tags[w]
                            if tag not in label_ids:
                                raise AdapterDataError(
                                    f"document {doc.doc_id!r}: tag {tag!r} is not in "
                                    f"the checkpoint alphabet"
                                )
                            labels[i + 1] = label_ids[tag]
                chunks.append(
                    _Chunk(
                        doc.doc_id,
                        s,
                        pieces,
                        words,
                        (cls_id, *vocab.ids_of(pieces), sep_id),
                        tuple(labels),
                    )
                )
    return chunks


def _padded_batch(chunks: Sequence[_Chunk], device) -> tuple[torch.Tensor, ...]:
    width = max(len(c.ids) for c in chunks)
    ids = torch.zeros((len(chunks), width), dtype=torch.long)
    mask = torch.zeros((len(chunks), width), dtype=torch.long)
    labels = torch.full((len(chunks), width), IGNORE_INDEX, dtype=torch.long)
    for i, c in enumerate(chunks):
        ids[i, : len(c.ids)] = torch.tensor(c.ids, dtype=torch.long)
        mask[i, : len(c.ids)] = 1
        labels[i, : len(c.labels)] = torch.tensor(c.labels, dtype=torch.long)
    return ids.to(device), mask.to(device), labels.to(device)


def _device() -> torch.device:
    if torch.cuda.is_available():
        return torch.device("cuda")
    log.info("no GPU detected; running on CPU (fine at sample scale)")
    return torch.device("cpu")


def export_logits(
    documents: Sequence[Document],
    vocab: Vocab,
    checkpoint: Checkpoint,
    config: FineTuneConfig,
    sink: TextIO,
) -> None:
    """Write one score record per subword piece, in wire order.

    Deterministic for a frozen checkpoint: the encoder runs in eval
    mode and records are emitted in corpus order with per-sentence
    piece indices continuing across chunk boundaries."""
    if vocab.identifier != checkpoint.vocab_id:
        raise AdapterError(
            f"vocabulary mismatch: declared {vocab.identifier}, "
            f"checkpoint expects {checkpoint.vocab_id}"
        )
    model = checkpoint.model
    if config.max_length > model.config.max_position_embeddings:
        raise AdapterError(
            f"max_length {config.max_length} exceeds the encoder's positional "
            f"capacity {model.config.max_position_embeddings}"
        )
    device = _device()
    model.to(device)
    model.eval()

    write_header(sink, checkpoint.alphabet, vocab.identifier, config.max_length)
    chunks = _chunks_of(documents, vocab, config.max_length)
    next_piece: dict[tuple[str, int], int] = {}
    for start in range(0, len(chunks), config.batch_size):
        batch = chunks[start : start + config.batch_size]
        ids, mask, _ = _padded_batch(batch, device)
        with torch.no_grad():
            logits = model(input_ids=ids, attention_mask=mask).logits
        for row, chunk in enumerate(batch):
            key = (chunk.doc_id, chunk.sentence_index)
            piece_index = next_piece.get(key, 0)
            for offset, (surface, word) in enumerate(zip(chunk.pieces, chunk.word_index)):
                scores = logits[row, 1 + offset].tolist()
                write_record(
                    sink, chunk.doc_id, chunk.sentence_index,
                    piece_index, surface, word, scores,
                )
                piece_index += 1
            next_piece[key] = piece_index


@dataclass(frozen=True)
class EpochLog:
    """Epoch 0 is the untrained baseline (no optimizer steps)."""

    epoch: int
    batch_loss: Optional[float]  # mean over optimizer steps; None at baseline
    train_loss: float  # full-pass eval-mode loss after the epoch
    validation_f1: Optional[float]


def _dataset_loss(model, chunks: Sequence[_Chunk], batch_size: int, device) -> float:
    """Exact mean loss over all labeled pieces (eval mode, no dropout)."""
    model.eval()
    total, count = 0.0, 0
    for start in range(0, len(chunks), batch_size):
        batch = chunks[start : start + batch_size]
        ids, mask, labels = _padded_batch(batch, device)
        n = int((labels != IGNORE_INDEX).sum())
        with torch.no_grad():
            loss = model(input_ids=ids, attention_mask=mask, labels=labels).loss
        total += float(loss) * n
        count += n
    if count == 0:
        raise AdapterDataError("no labeled pieces; corpus is empty")
    return total / count


def _validation_f1(
    valid: Sequence[Document],
    vocab: Vocab,
    checkpoint: Checkpoint,
    config: FineTuneConfig,
    consumer_cli: Sequence[str],
) -> float:
    """Exact-match micro F1 according to the consumer toolkit.

    The adapter exports a bridge file and shells out to the consumer
    for decoding and scoring, so validation numbers come from the same
    code path as final evaluation."""
    with tempfile.TemporaryDirectory(prefix="adapter-eval-") as tmp:
        gold_path = os.path.join(tmp, "valid.conll")
        vocab_path = os.path.join(tmp, "vocab.txt")
        bridge_path = os.path.join(tmp, "valid.bridge")
        pred_path = os.path.join(tmp, "pred.conll")
        with open(gold_path, "w", encoding="utf-8") as f:
            f.write(write_conll(valid))
        with open(vocab_path, "w", encoding="utf-8") as f:
            f.write("\n".join(vocab.pieces) + "\n")
        with open(bridge_path, "w", encoding="utf-8") as f:
            export_logits(valid, vocab, checkpoint, config, f)

        case = ["--uncased"] if vocab.case_mode == "uncased" else []
        predict = subprocess.run(
            [*consumer_cli, "predict", "--bridge", bridge_path, "--input", gold_path,
             "--vocab", vocab_path, *case, "--out", pred_path],
            capture_output=True, text=True,
        )
        if predict.returncode != 0:
            raise AdapterError(f"consumer predict failed: {predict.stderr.strip()}")
        scored = subprocess.run(
            [*consumer_cli, "eval", "--gold", gold_path, "--pred", pred_path,
             "--mode", "exact", "--format", "kv"],
            capture_output=True, text=True,
        )
        if scored.returncode != 0:
            raise AdapterError(f"consumer eval failed: {scored.stderr.strip()}")
        values = dict(
            line.split("\t") for line in scored.stdout.strip().splitlines()
        )
        return float(values["exact.micro.f1"])


def finetune(
    train: Sequence[Document],
    valid: Optional[Sequence[Document]],
    vocab: Vocab,
    checkpoint: Checkpoint,
    config: FineTuneConfig,
    consumer_cli: Sequence[str] = CONSUMER_CLI,
) -> tuple[Checkpoint, list[EpochLog]]:
    """Adam over the full model, loss masked to first pieces; early
    stopping on consumer-scored validation F1 when a validation corpus
    is given, size-derived epoch cap otherwise."""
    if vocab.identifier != checkpoint.vocab_id:
        raise AdapterError(
            f"vocabulary mismatch: declared {vocab.identifier}, "
            f"checkpoint expects {checkpoint.vocab_id}"
        )
    model = checkpoint.model
    for module in model.modules():  # honor the recipe on any checkpoint
        if isinstance(module, torch.nn.Dropout):
            module.p = config.dropout

    label_ids = {t: i for i, t in enumerate(checkpoint.alphabet)}
    chunks = _chunks_of(train, vocab, config.max_length, label_ids)
    device = _device()
    model.to(device)
    optimizer = torch.optim.Adam(model.parameters(), lr=config.learning_rate)

    baseline = _dataset_loss(model, chunks, config.batch_size, device)
    log.info("initial train loss %.6f", baseline)
    logs = [EpochLog(0, None, baseline, None)]
    best_f1: Optional[float] = None
    best_state = None
    stale = 0
    for epoch in range(1, config.epoch_cap + 1):
        order = list(range(len(chunks)))
        random.Random(config.seed + epoch).shuffle(order)
        model.train()
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [chunks[i] for i in order[start : start + config.batch_size]]
            ids, mask, labels = _padded_batch(batch, device)
            loss = model(input_ids=ids, attention_mask=mask, labels=labels).loss
            optimizer.zero_grad()
            loss.backward()
            optimizer.step()
            losses.append(float(loss.detach()))

        train_loss = _dataset_loss(model, chunks, config.batch_size, device)
        log.info("epoch %d: train loss %.6f", epoch, train_loss)
        val_f1 = None
        if valid is not None:
            val_f1 = _validation_f1(valid, vocab, checkpoint, config, consumer_cli)
            log.info("epoch %d: validation f1 %.6f (consumer eval)", epoch, val_f1)
        logs.append(EpochLog(epoch, sum(losses) / len(losses), train_loss, val_f1))

        if val_f1 is not None:
            if best_f1 is None or val_f1 > best_f1:
                best_f1 = val_f1
                best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    log.info("early stop after epoch %d (best f1 %.6f)", epoch, best_f1)
                    break
    if best_state is not None:
        model.load_state_dict(best_state)
    return checkpoint, logs
