"""Encoder adapter for the protoner toolkit: bridge export + fine-tuning."""
from protoner_adapter.adapter import (
    Checkpoint,
    EpochLog,
    FineTuneConfig,
    alphabet_of,
    export_logits,
    finetune,
    fresh_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from protoner_adapter.conll import Document, Sentence, entity_types, parse_conll, write_conll
from protoner_adapter.errors import AdapterDataError, AdapterError
from protoner_adapter.wordpiece import Vocab, align, chunk_word_ranges, load_vocab

__all__ = [
    "AdapterDataError",
    "AdapterError",
    "Checkpoint",
    "Document",
    "EpochLog",
    "FineTuneConfig",
    "Sentence",
    "Vocab",
    "align",
    "alphabet_of",
    "chunk_word_ranges",
    "entity_types",
    "export_logits",
    "finetune",
    "fresh_checkpoint",
    "load_checkpoint",
    "load_vocab",
    "parse_conll",
    "save_checkpoint",
    "write_conll",
]
