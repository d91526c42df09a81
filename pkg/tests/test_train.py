"""Training loop: optimizers, early stopping, tagging."""
import logging
import re

import numpy as np
import pytest

from protoner.corpus.types import Corpus, Document, sentence_from_words
from protoner.crf.model import marginals, pack_weights
from protoner.crf.train import (
    TrainConfig,
    build_feature_dictionary,
    featurize_sentence,
    tag,
    train,
)
from protoner.crf.features import FeatureTemplate, default_templates
from protoner.errors import DataError
from protoner.evaluation import MatchMode, evaluate

from tests.helpers import corpus_of, separable_corpus


def small_corpus():
    return corpus_of(
        [
            (["add", "sds", "now"], ["O", "B-Reagent", "O"]),
            (["use", "pipette"], ["O", "B-Device"]),
            (["sds", "and", "tris"], ["B-Reagent", "O", "B-Reagent"]),
        ],
        ["Reagent", "Device"],
    )


class TestTrainConfig:
    def test_defaults(self):
        config = TrainConfig()
        assert config.optimizer == "lbfgs"
        assert config.epochs == 100

    def test_validation(self):
        with pytest.raises(ValueError):
            TrainConfig(optimizer="adam")
        with pytest.raises(ValueError):
            TrainConfig(learning_rate=0.0)
        with pytest.raises(ValueError):
            TrainConfig(epochs=-1)
        with pytest.raises(ValueError):
            TrainConfig(batch_size=0)
        with pytest.raises(ValueError):
            TrainConfig(l2_strength=-0.1)
        TrainConfig(epochs=0)  # allowed: yields the initial model


class TestFeaturization:
    def test_dictionary_first_seen_order(self):
        corpus = small_corpus()
        templates = (FeatureTemplate("word-lower"),)
        names = build_feature_dictionary(corpus, templates, ())
        assert names == (
            "word-lower@+0=add", "word-lower@+0=sds", "word-lower@+0=now",
            "word-lower@+0=use", "word-lower@+0=pipette",
            "word-lower@+0=and", "word-lower@+0=tris",
        )

    def test_featurize_drops_unseen(self):
        templates = (FeatureTemplate("word-lower"),)
        feature_dict = {"word-lower@+0=sds": 0}
        vectors = featurize_sentence(
            sentence_from_words(["sds", "xyz"]), templates, (), feature_dict
        )
        assert vectors == [{0: 1.0}, {}]


class TestTrainValidation:
    def test_empty_corpus_rejected(self):
        empty = Corpus.from_documents((Document("d", ()),))
        with pytest.raises(DataError, match="empty"):
            train(empty)

    def test_untagged_corpus_rejected(self):
        corpus = Corpus.from_documents(
            (Document("d", (sentence_from_words(["mix"]),)),)
        )
        with pytest.raises(DataError, match="untagged"):
            train(corpus)

    def test_dev_unseen_type_warned(self, caplog):
        dev = corpus_of(
            [(["spin", "tube"], ["O", "B-Container"])], ["Container"]
        )
        with caplog.at_level(logging.WARNING, logger="protoner.crf.train"):
            train(small_corpus(), dev=dev, config=TrainConfig(epochs=1))
        assert any("Container" in r.message for r in caplog.records)


class TestEpochsZero:
    def test_returns_initial_model(self):
        corpus = small_corpus()
        model = train(corpus, config=TrainConfig(epochs=0))
        assert not pack_weights(model).any()
        features = featurize_sentence(
            corpus.documents[0].sentences[0],
            model.templates, model.gazetteers, model.feature_dict,
        )
        node, _ = marginals(model, features)
        m = len(model.labels)
        np.testing.assert_allclose(node, np.full((3, m), 1 / m), atol=1e-12)


class TestLbfgs:
    def test_separable_corpus_fits_exactly(self):
        corpus = separable_corpus(seed=5, n_sentences=60)
        model = train(corpus, config=TrainConfig(l2_strength=0.001))
        report = evaluate(corpus, tag(model, corpus), MatchMode.EXACT)
        assert report.micro.f1 == 1.0

    def test_logged_nll_decreases(self, caplog):
        corpus = separable_corpus(seed=6, n_sentences=30)
        with caplog.at_level(logging.INFO, logger="protoner.crf.train"):
            train(corpus, config=TrainConfig(epochs=25))
        values = [
            float(re.search(r"train nll (\S+)", r.message).group(1))
            for r in caplog.records
            if "train nll" in r.message
        ]
        assert len(values) >= 5
        assert all(np.isfinite(values))
        assert values[-1] < values[0]

    def test_dev_f1_logged_when_dev_given(self, caplog):
        corpus = separable_corpus(seed=7, n_sentences=20)
        dev = separable_corpus(seed=8, n_sentences=5)
        with caplog.at_level(logging.INFO, logger="protoner.crf.train"):
            train(corpus, dev=dev, config=TrainConfig(epochs=5, patience=5))
        assert any("dev exact F1" in r.message for r in caplog.records)


class TestSgd:
    def test_seeded_runs_are_identical(self):
        corpus = separable_corpus(seed=9, n_sentences=20)
        config = TrainConfig(
            optimizer="sgd", epochs=3, learning_rate=0.05, batch_size=4,
            patience=0, seed=21,
        )
        a = train(corpus, config=config)
        b = train(corpus, config=config)
        np.testing.assert_array_equal(pack_weights(a), pack_weights(b))

    def test_seed_changes_trajectory(self):
        corpus = separable_corpus(seed=9, n_sentences=20)
        base = dict(
            optimizer="sgd", epochs=2, learning_rate=0.05, batch_size=4, patience=0
        )
        a = train(corpus, config=TrainConfig(**base, seed=1))
        b = train(corpus, config=TrainConfig(**base, seed=2))
        assert not np.array_equal(pack_weights(a), pack_weights(b))

    def test_nll_improves_over_epochs(self, caplog):
        corpus = separable_corpus(seed=10, n_sentences=20)
        config = TrainConfig(
            optimizer="sgd", epochs=4, learning_rate=0.05, batch_size=4, patience=0
        )
        with caplog.at_level(logging.INFO, logger="protoner.crf.train"):
            train(corpus, config=config)
        values = [
            float(re.search(r"train nll (\S+)", r.message).group(1))
            for r in caplog.records
            if "train nll" in r.message
        ]
        assert len(values) == 4
        assert values[-1] < values[0]

    def test_early_stopping_on_flat_dev(self, caplog):
        corpus = separable_corpus(seed=11, n_sentences=20)
        # dev gold has no entities, so dev F1 is pinned at 0.0
        dev = corpus_of(
            [(["mix", "the", "tube"], ["O", "O", "O"])], ["Reagent", "Device"]
        )
        config = TrainConfig(
            optimizer="sgd", epochs=50, learning_rate=0.05, batch_size=4, patience=2
        )
        with caplog.at_level(logging.INFO, logger="protoner.crf.train"):
            train(corpus, dev=dev, config=config)
        epochs_run = [r for r in caplog.records if r.message.startswith("epoch")]
        assert len(epochs_run) == 3  # best at 1, stale at 2 and 3, stop


class TestTag:
    def test_constrained_output_is_valid_bio(self):
        corpus = separable_corpus(seed=12, n_sentences=10)
        model = train(corpus, config=TrainConfig(epochs=2))
        tagged = tag(model, corpus, constrained=True)
        for sentence in tagged.sentences:
            assert sentence.tags is not None
            assert not sentence.unvalidated

    def test_unconstrained_output_flagged(self):
        corpus = separable_corpus(seed=12, n_sentences=10)
        model = train(corpus, config=TrainConfig(epochs=1))
        tagged = tag(model, corpus, constrained=False)
        assert all(s.unvalidated for s in tagged.sentences)

    def test_structure_preserved(self):
        corpus = separable_corpus(seed=13, n_sentences=8)
        model = train(corpus, config=TrainConfig(epochs=1))
        tagged = tag(model, corpus)
        assert [d.id for d in tagged.documents] == [d.id for d in corpus.documents]
        for before, after in zip(corpus.sentences, tagged.sentences):
            assert [t.text for t in before.tokens] == [t.text for t in after.tokens]
            assert len(after.tags) == len(after.tokens)

    def test_label_set_from_model(self):
        corpus = separable_corpus(seed=13, n_sentences=8)
        model = train(corpus, config=TrainConfig(epochs=1))
        tagged = tag(model, corpus)
        assert set(tagged.label_set.types) == {"Reagent", "Device"}
