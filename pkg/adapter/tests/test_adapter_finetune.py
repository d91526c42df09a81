"""Fine-tuning: head shape, loss masking, loss decrease, and
consumer-scored validation with early stopping."""
import logging

import pytest

from protoner_adapter import FineTuneConfig, finetune, fresh_checkpoint
from protoner_adapter.adapter import IGNORE_INDEX, _chunks_of
from protoner_adapter.conll import Document, Sentence
from protoner_adapter.errors import AdapterDataError


class TestConfig:
    def test_size_derived_epoch_cap(self):
        assert FineTuneConfig(model_size="base").epoch_cap == 8
        assert FineTuneConfig(model_size="large").epoch_cap == 4
        assert FineTuneConfig(model_size="large", epochs=2).epoch_cap == 2

    def test_recipe_defaults(self):
        config = FineTuneConfig()
        assert config.max_length == 512
        assert config.batch_size == 16
        assert config.dropout == 0.1
        assert config.learning_rate == 1e-5

    def test_validation(self):
        with pytest.raises(ValueError):
            FineTuneConfig(model_size="huge")
        with pytest.raises(ValueError):
            FineTuneConfig(epochs=0)
        with pytest.raises(ValueError):
            FineTuneConfig(dropout=1.0)


class TestExamples:
    def test_head_sized_to_alphabet(self, tiny_checkpoint):
        assert tiny_checkpoint.model.classifier.out_features == 2 * 2 + 1
        assert tiny_checkpoint.alphabet == (
            "O", "B-Reagent", "I-Reagent", "B-Device", "I-Device",
        )

    def test_loss_masked_to_first_pieces(self, vocab, tiny_checkpoint):
        documents = [Document("d", (
            Sentence(("unaffable", "aa"), ("O", "B-Reagent")),
        ))]
        label_ids = {t: i for i, t in enumerate(tiny_checkpoint.alphabet)}
        (chunk,) = _chunks_of(documents, vocab, 16, label_ids)
        # [CLS] un ##aff ##able aa [SEP]
        assert list(chunk.labels) == [
            IGNORE_INDEX, 0, IGNORE_INDEX, IGNORE_INDEX, 1, IGNORE_INDEX,
        ]

    def test_unknown_tag_rejected(self, vocab, tiny_checkpoint):
        documents = [Document("d", (Sentence(("aa",), ("B-Unknown",)),))]
        config = FineTuneConfig(max_length=16, epochs=1)
        with pytest.raises(AdapterDataError, match="B-Unknown"):
            finetune(documents, None, vocab, tiny_checkpoint, config)


class TestFinetune:
    def test_one_epoch_decreases_training_loss(self, sample50, vocab, tiny_checkpoint, caplog):
        config = FineTuneConfig(
            max_length=16, epochs=1, batch_size=8, learning_rate=1e-3,
        )
        with caplog.at_level(logging.INFO, logger="protoner_adapter"):
            _, logs = finetune(sample50, None, vocab, tiny_checkpoint, config)
        assert [entry.epoch for entry in logs] == [0, 1]
        assert logs[0].batch_loss is None
        assert logs[1].train_loss < logs[0].train_loss
        assert any("no GPU" in r.message for r in caplog.records)  # CPU sandbox

    def test_validation_scored_by_consumer(self, sample50, vocab, tiny_checkpoint, caplog):
        train, valid = sample50[:40], sample50[40:]
        config = FineTuneConfig(
            max_length=16, epochs=1, batch_size=8, learning_rate=1e-3,
        )
        with caplog.at_level(logging.INFO, logger="protoner_adapter"):
            _, logs = finetune(train, valid, vocab, tiny_checkpoint, config)
        assert logs[1].validation_f1 is not None
        assert 0.0 <= logs[1].validation_f1 <= 1.0
        assert any("validation f1" in r.message for r in caplog.records)

    def test_early_stop_on_flat_validation(self, sample50, vocab, tiny_checkpoint):
        # an all-O validation set pins exact F1 at 0.0, so the second
        # epoch is already stale under patience=1
        train = sample50[:30]
        valid = [Document("flat", (Sentence(("cc", "dd"), ("O", "O")),))]
        config = FineTuneConfig(
            max_length=16, epochs=5, batch_size=8, learning_rate=1e-3, patience=1,
        )
        _, logs = finetune(train, valid, vocab, tiny_checkpoint, config)
        assert [entry.epoch for entry in logs] == [0, 1, 2]
