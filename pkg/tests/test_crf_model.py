"""Featurized CRF scoring, gradients, decoding, persistence."""
import io
import json
import math
import random

import numpy as np
import pytest

from protoner.crf.features import FeatureTemplate, Gazetteer
from protoner.crf.model import (
    CrfModel,
    bio_constraint_masks,
    load_model,
    log_partition,
    marginals,
    nll_and_gradient,
    pack_weights,
    save_model,
    score_sequence,
    viterbi,
    with_weights,
    zero_model,
)
from protoner.errors import ModelIOError, TagSchemaError

from tests import oracles

LABELS = ("O", "B-Reagent", "I-Reagent")


def random_model(rng, n_features=4, labels=LABELS, l2_strength=0.0):
    f, m = n_features, len(labels)
    return CrfModel(
        labels,
        tuple(f"f{i}" for i in range(f)),
        np.array([[rng.uniform(-1, 1) for _ in range(m)] for _ in range(f)]),
        np.array([[rng.uniform(-1, 1) for _ in range(m)] for _ in range(m)]),
        np.array([rng.uniform(-1, 1) for _ in range(m)]),
        np.array([rng.uniform(-1, 1) for _ in range(m)]),
        l2_strength=l2_strength,
    )


def random_features(rng, n_positions, n_features):
    sentence = []
    for _ in range(n_positions):
        fired = rng.sample(range(n_features), rng.randint(0, n_features))
        sentence.append({i: 1.0 for i in fired})
    return sentence


class TestScoring:
    def test_score_sequence_explicit_sum(self):
        model = zero_model(("O", "B-X"), ("a", "b"))
        model = with_weights(model, np.arange(model.n_parameters, dtype=float))
        # layout: emission (2x2) 0..3, transition (2x2) 4..7, begin 8..9, end 10..11
        features = [{0: 1.0}, {0: 1.0, 1: 2.0}]
        tags = ["B-X", "O"]
        want = (
            9 + 1   # begin[B-X] + emission a->B-X
            + 6     # transition B-X -> O
            + (1 * 0 + 2 * 2)  # emissions at position 1 toward O
            + 10    # end[O]
        )
        assert score_sequence(model, features, tags) == pytest.approx(want)

    def test_unary_scores_weight_feature_values(self):
        model = zero_model(("O",), ("a",))
        model = with_weights(model, np.array([3.0, 0.0, 0.0, 0.0]))
        unary = model.unary_scores([{0: 0.5}])
        assert unary[0, 0] == pytest.approx(1.5)

    def test_log_partition_zero_model(self):
        model = zero_model(LABELS, ("a",))
        features = [{0: 1.0}, {}, {0: 1.0}]
        assert log_partition(model, features) == pytest.approx(3 * math.log(3))

    def test_marginals_zero_model_uniform(self):
        model = zero_model(LABELS, ("a",))
        node, edge = marginals(model, [{0: 1.0}, {}])
        np.testing.assert_allclose(node, np.full((2, 3), 1 / 3), atol=1e-12)
        np.testing.assert_allclose(edge, np.full((1, 3, 3), 1 / 9), atol=1e-12)

    def test_unknown_tag_rejected(self):
        model = zero_model(LABELS, ("a",))
        with pytest.raises(ValueError, match="B-Device"):
            score_sequence(model, [{}], ["B-Device"])

    def test_length_mismatch_rejected(self):
        model = zero_model(LABELS, ("a",))
        with pytest.raises(ValueError):
            score_sequence(model, [{}, {}], ["O"])


class TestWeightPacking:
    def test_round_trip(self):
        rng = random.Random(3)
        model = random_model(rng)
        flat = pack_weights(model)
        again = with_weights(model, flat)
        np.testing.assert_array_equal(pack_weights(again), flat)
        np.testing.assert_array_equal(again.emission, model.emission)
        np.testing.assert_array_equal(again.transition, model.transition)

    def test_wrong_length_rejected(self):
        model = zero_model(LABELS, ("a",))
        with pytest.raises(ValueError):
            with_weights(model, np.zeros(model.n_parameters + 1))

    def test_parameter_count(self):
        model = zero_model(LABELS, ("a", "b"))
        assert model.n_parameters == 2 * 3 + 3 * 3 + 3 + 3


class TestNllAndGradient:
    def test_zero_model_nll_counts_sequences(self):
        model = zero_model(LABELS, ("a",))
        batch = [([{0: 1.0}, {}], ["O", "O"])]
        nll, grad = nll_and_gradient(model, batch)
        assert nll == pytest.approx(2 * math.log(3))

    def test_empty_batch_isolates_l2(self):
        rng = random.Random(5)
        model = random_model(rng, l2_strength=0.25)
        weights = pack_weights(model)
        nll, grad = nll_and_gradient(model, [])
        assert nll == pytest.approx(0.125 * float(weights @ weights))
        np.testing.assert_allclose(grad, 0.25 * weights, atol=1e-12)

    def test_l2_override_argument(self):
        rng = random.Random(7)
        model = random_model(rng, l2_strength=0.25)
        nll, grad = nll_and_gradient(model, [], l2_strength=0.0)
        assert nll == 0.0
        np.testing.assert_array_equal(grad, np.zeros(model.n_parameters))

    def test_gradient_matches_central_differences(self):
        rng = random.Random(11)
        model = random_model(rng, n_features=3, l2_strength=0.1)
        batch = [
            (random_features(rng, 3, 3), ["O", "B-Reagent", "I-Reagent"]),
            (random_features(rng, 2, 3), ["B-Reagent", "O"]),
        ]

        def objective(flat):
            value, _ = nll_and_gradient(with_weights(model, np.asarray(flat)), batch)
            return value

        x0 = pack_weights(model)
        _, grad = nll_and_gradient(model, batch)
        coords = rng.sample(range(model.n_parameters), 12)
        for coord in coords:
            fd = oracles.central_difference(objective, x0, coord)
            denom = max(abs(fd), abs(grad[coord]), 1e-8)
            assert abs(grad[coord] - fd) / denom < 1e-5

    def test_gradient_zero_at_empirical_fit(self):
        # single-label alphabet: expected == empirical counts regardless of weights
        model = zero_model(("O",), ("a",))
        _, grad = nll_and_gradient(model, [([{0: 1.0}], ["O"])])
        np.testing.assert_allclose(grad, np.zeros(model.n_parameters), atol=1e-12)


class TestBioConstraintMasks:
    def test_masks_shape_and_content(self):
        labels = ("O", "B-A", "I-A", "B-B", "I-B")
        trans, begin = bio_constraint_masks(labels)
        assert begin.tolist() == [0, 0, -np.inf, 0, -np.inf]
        idx = {l: i for i, l in enumerate(labels)}
        assert trans[idx["B-A"], idx["I-A"]] == 0
        assert trans[idx["I-A"], idx["I-A"]] == 0
        assert trans[idx["O"], idx["I-A"]] == -np.inf
        assert trans[idx["B-B"], idx["I-A"]] == -np.inf
        assert trans[idx["I-B"], idx["I-A"]] == -np.inf
        # columns for O and B-* are unconstrained
        assert np.isfinite(trans[:, idx["O"]]).all()
        assert np.isfinite(trans[:, idx["B-B"]]).all()

    def test_unparseable_label_rejected(self):
        with pytest.raises(TagSchemaError):
            bio_constraint_masks(("O", "X-Reagent"))


class TestViterbi:
    def test_unconstrained_can_emit_invalid_bio(self):
        model = zero_model(LABELS, ("a",))
        emission = np.zeros((1, 3))
        emission[0, 2] = 5.0  # strongly prefer I-Reagent everywhere
        model = CrfModel(
            model.labels, model.feature_names, emission,
            model.transition.copy(), model.begin.copy(), model.end.copy(),
        )
        features = [{0: 1.0}, {0: 1.0}]
        tags, _ = viterbi(model, features, constrained=False)
        assert tags == ["I-Reagent", "I-Reagent"]

    def test_constrained_repairs_to_best_valid(self):
        model = zero_model(LABELS, ("a",))
        emission = np.zeros((1, 3))
        emission[0, 2] = 5.0
        model = CrfModel(
            model.labels, model.feature_names, emission,
            model.transition.copy(), model.begin.copy(), model.end.copy(),
        )
        features = [{0: 1.0}, {0: 1.0}]
        tags, score = viterbi(model, features, constrained=True)
        assert tags == ["B-Reagent", "I-Reagent"]
        # the admissible sequence keeps its unmasked score
        assert score == pytest.approx(score_sequence(model, features, tags))

    def test_emission_shift_leaves_argmax_alone(self):
        rng = random.Random(13)
        model = random_model(rng, n_features=1)
        features = [{0: 1.0}, {0: 1.0}, {0: 1.0}]
        base_tags, base_score = viterbi(model, features)
        shifted = CrfModel(
            model.labels, model.feature_names, model.emission + 7.5,
            model.transition.copy(), model.begin.copy(), model.end.copy(),
        )
        tags, score = viterbi(shifted, features)
        assert tags == base_tags
        assert score == pytest.approx(base_score + 3 * 7.5)

    def test_zero_model_prefers_first_label(self):
        model = zero_model(LABELS, ("a",))
        tags, score = viterbi(model, [{}, {}, {}])
        assert tags == ["O", "O", "O"]
        assert score == 0.0


class TestPersistence:
    def build(self):
        rng = random.Random(17)
        return CrfModel(
            LABELS,
            ("word-lower@+0=sds", "is-digit@+0"),
            np.array([[rng.uniform(-1, 1) for _ in range(3)] for _ in range(2)]),
            np.array([[rng.uniform(-1, 1) for _ in range(3)] for _ in range(3)]),
            np.array([rng.uniform(-1, 1) for _ in range(3)]),
            np.array([rng.uniform(-1, 1) for _ in range(3)]),
            (FeatureTemplate("word-lower"), FeatureTemplate("is-digit")),
            (Gazetteer("reagent", frozenset({"sds"})),),
            l2_strength=0.01,
        )

    def assert_same(self, a, b):
        assert a.labels == b.labels
        assert a.feature_names == b.feature_names
        np.testing.assert_array_equal(a.emission, b.emission)
        np.testing.assert_array_equal(a.transition, b.transition)
        np.testing.assert_array_equal(a.begin, b.begin)
        np.testing.assert_array_equal(a.end, b.end)
        assert a.templates == b.templates
        assert a.gazetteers == b.gazetteers
        assert a.l2_strength == b.l2_strength

    def test_stream_round_trip_is_bit_exact(self):
        model = self.build()
        sink = io.BytesIO()
        save_model(model, sink)
        sink.seek(0)
        self.assert_same(model, load_model(sink))

    def test_path_round_trip_without_extension(self, tmp_path):
        model = self.build()
        path = str(tmp_path / "model.crf")  # no .npz suffix on purpose
        save_model(model, path)
        assert (tmp_path / "model.crf").exists()
        self.assert_same(model, load_model(path))

    def test_loaded_model_decodes_identically(self):
        model = self.build()
        sink = io.BytesIO()
        save_model(model, sink)
        sink.seek(0)
        loaded = load_model(sink)
        rng = random.Random(19)
        for _ in range(10):
            features = random_features(rng, rng.randint(1, 5), 2)
            assert viterbi(model, features, True) == viterbi(loaded, features, True)

    def test_truncated_file_rejected(self):
        model = self.build()
        sink = io.BytesIO()
        save_model(model, sink)
        data = sink.getvalue()[: len(sink.getvalue()) // 2]
        with pytest.raises(ModelIOError, match="cannot read"):
            load_model(io.BytesIO(data))

    def test_not_a_model_rejected(self):
        with pytest.raises(ModelIOError):
            load_model(io.BytesIO(b"not an archive"))

    def test_unsupported_version_rejected(self):
        sink = io.BytesIO()
        meta = {
            "format_version": 2, "labels": ["O"], "feature_names": [],
            "templates": [], "gazetteers": [], "l2_strength": 0.0,
        }
        np.savez(
            sink,
            meta=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
            emission=np.zeros((0, 1)),
            transition=np.zeros((1, 1)),
            begin=np.zeros(1),
            end=np.zeros(1),
        )
        sink.seek(0)
        with pytest.raises(ModelIOError, match="version 2"):
            load_model(sink)

    def test_missing_entry_rejected(self):
        sink = io.BytesIO()
        np.savez(sink, emission=np.zeros((1, 1)))
        sink.seek(0)
        with pytest.raises(ModelIOError, match="missing"):
            load_model(sink)
