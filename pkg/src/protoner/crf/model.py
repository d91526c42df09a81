"""Linear-chain CRF model: parameters, inference entry points, persistence.

The label alphabet at this layer is an ordered tuple of strings;
callers working with BIO corpora bind LabelSet.tag_strings to it.
Weights live in dense float64 arrays:

    emission   (F, m)  feature id x label
    transition (m, m)  previous label x next label
    begin, end (m,)    boundary scores

A flat parameter vector (for optimizers and finite differencing)
concatenates them in that order, C-contiguous.
"""
from __future__ import annotations

import json
import zipfile
from dataclasses import dataclass, field, replace
from typing import BinaryIO, Mapping, Optional, Sequence, Union

import numpy as np

from protoner.corpus.types import BioTag
from protoner.crf import chain
from protoner.crf.features import FeatureTemplate, Gazetteer
from protoner.errors import ModelIOError

MODEL_FORMAT_VERSION = 1

# One position's fired features: id -> value.
FeatureVector = dict

# A sentence's features: one FeatureVector per position.
SentenceFeatures = Sequence


@dataclass(frozen=True)
class CrfModel:
    labels: tuple[str, ...]
    feature_names: tuple[str, ...]
    emission: np.ndarray
    transition: np.ndarray
    begin: np.ndarray
    end: np.ndarray
    templates: tuple[FeatureTemplate, ...] = ()
    gazetteers: tuple[Gazetteer, ...] = ()
    l2_strength: float = 0.0
    feature_dict: Mapping[str, int] = field(init=False, repr=False, compare=False)
    label_index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        m, f = len(self.labels), len(self.feature_names)
        if len(set(self.labels)) != m or m == 0:
            raise ValueError("labels must be non-empty and unique")
        if self.emission.shape != (f, m):
            raise ValueError(f"emission shape {self.emission.shape} != ({f}, {m})")
        if self.transition.shape != (m, m):
            raise ValueError(f"transition shape {self.transition.shape} != ({m}, {m})")
        if self.begin.shape != (m,) or self.end.shape != (m,):
            raise ValueError("begin/end must be length-m vectors")
        if self.l2_strength < 0:
            raise ValueError("l2_strength must be non-negative")
        object.__setattr__(self, "feature_dict", {n: i for i, n in enumerate(self.feature_names)})
        object.__setattr__(self, "label_index", {l: i for i, l in enumerate(self.labels)})

    @property
    def n_labels(self) -> int:
        return len(self.labels)

    @property
    def n_parameters(self) -> int:
        m = self.n_labels
        return self.emission.size + m * m + 2 * m

    def unary_scores(self, features: SentenceFeatures) -> np.ndarray:
        """Per-position label scores: sum of active emission rows."""
        n, m = len(features), self.n_labels
        unary = np.zeros((n, m))
        for t, vector in enumerate(features):
            for idx, value in vector.items():
                unary[t] += value * self.emission[idx]
        return unary

    def tag_indices(self, tags: Sequence[str]) -> np.ndarray:
        try:
            return np.array([self.label_index[t] for t in tags], dtype=np.int64)
        except KeyError as exc:
            raise ValueError(f"tag {exc.args[0]!r} not in the model's label alphabet") from None


def zero_model(
    labels: Sequence[str],
    feature_names: Sequence[str],
    templates: Sequence[FeatureTemplate] = (),
    gazetteers: Sequence[Gazetteer] = (),
    l2_strength: float = 0.0,
) -> CrfModel:
    m, f = len(labels), len(feature_names)
    return CrfModel(
        tuple(labels),
        tuple(feature_names),
        np.zeros((f, m)),
        np.zeros((m, m)),
        np.zeros(m),
        np.zeros(m),
        tuple(templates),
        tuple(gazetteers),
        l2_strength,
    )


def pack_weights(model: CrfModel) -> np.ndarray:
    return np.concatenate(
        [model.emission.ravel(), model.transition.ravel(), model.begin, model.end]
    )


def with_weights(model: CrfModel, flat: np.ndarray) -> CrfModel:
    if flat.shape != (model.n_parameters,):
        raise ValueError(f"expected {model.n_parameters} parameters, got {flat.shape}")
    f, m = model.emission.shape
    emission, rest = flat[: f * m].reshape(f, m), flat[f * m:]
    transition, rest = rest[: m * m].reshape(m, m), rest[m * m:]
    return replace(
        model,
        emission=emission.copy(),
        transition=transition.copy(),
        begin=rest[:m].copy(),
        end=rest[m:].copy(),
    )


def score_sequence(model: CrfModel, features: SentenceFeatures, tags: Sequence[str]) -> float:
    """Unnormalized log-score of one tag sequence."""
    if len(tags) != len(features):
        raise ValueError(f"{len(tags)} tags for {len(features)} positions")
    return chain.sequence_score(
        model.unary_scores(features),
        model.transition,
        model.begin,
        model.end,
        model.tag_indices(tags),
    )


def log_partition(model: CrfModel, features: SentenceFeatures) -> float:
    return chain.log_partition(
        model.unary_scores(features), model.transition, model.begin, model.end
    )


def marginals(model: CrfModel, features: SentenceFeatures) -> tuple[np.ndarray, np.ndarray]:
    """(node, edge) posterior distributions; see chain.forward_backward."""
    _, node, edge = chain.forward_backward(
        model.unary_scores(features), model.transition, model.begin, model.end
    )
    return node, edge


def bio_constraint_masks(labels: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
    """(transition mask, begin mask) with -inf on schema-invalid moves.

    I-X may only follow B-X or I-X of the same type, and may not start
    a sequence. Labels must parse as BIO tags.
    """
    tags = [BioTag.parse(label) for label in labels]
    m = len(tags)
    trans_mask = np.zeros((m, m))
    begin_mask = np.zeros(m)
    for j, tag_j in enumerate(tags):
        if tag_j.scheme != "I":
            continue
        begin_mask[j] = -np.inf
        for i, tag_i in enumerate(tags):
            if not (tag_i.is_entity and tag_i.entity_type == tag_j.entity_type):
                trans_mask[i, j] = -np.inf
    return trans_mask, begin_mask


def viterbi(
    model: CrfModel, features: SentenceFeatures, constrained: bool = False
) -> tuple[list[str], float]:
    """Best tag sequence and its score; lowest-index tie-break.

    Constrained mode adds -inf masks so the output always satisfies
    the BIO schema; admissible sequences keep their unmasked scores.
    """
    transition, begin = model.transition, model.begin
    if constrained:
        trans_mask, begin_mask = bio_constraint_masks(model.labels)
        transition = transition + trans_mask
        begin = begin + begin_mask
    indices, score = chain.viterbi(
        model.unary_scores(features), transition, begin, model.end
    )
    return [model.labels[i] for i in indices], score


def nll_and_gradient(
    model: CrfModel,
    batch: Sequence,
    l2_strength: Optional[float] = None,
) -> tuple[float, np.ndarray]:
    """Regularized negative log-likelihood of a batch and its gradient.

    batch items are (features, tags) pairs. NLL sums log_partition minus
    gold score over the batch (no averaging) plus (l2/2) * ||w||^2 over
    every weight block; the gradient is expected minus empirical feature
    counts plus l2 * w, flattened in pack_weights order.
    """
    if l2_strength is None:
        l2_strength = model.l2_strength
    f, m = model.emission.shape
    grad_emission = np.zeros((f, m))
    grad_transition = np.zeros((m, m))
    grad_begin = np.zeros(m)
    grad_end = np.zeros(m)
    nll = 0.0

    for features, tags in batch:
        if len(tags) != len(features):
            raise ValueError(f"{len(tags)} tags for {len(features)} positions")
        gold = model.tag_indices(tags)
        unary = model.unary_scores(features)
        log_z, node, edge = chain.forward_backward(
            unary, model.transition, model.begin, model.end
        )
        nll += log_z - chain.sequence_score(
            unary, model.transition, model.begin, model.end, gold
        )

        for t, vector in enumerate(features):
            for idx, value in vector.items():
                grad_emission[idx] += value * node[t]
                grad_emission[idx, gold[t]] -= value
        grad_transition += edge.sum(axis=0)
        np.subtract.at(grad_transition, (gold[:-1], gold[1:]), 1.0)
        grad_begin += node[0]
        grad_begin[gold[0]] -= 1.0
        grad_end += node[-1]
        grad_end[gold[-1]] -= 1.0

    flat_grad = np.concatenate(
        [grad_emission.ravel(), grad_transition.ravel(), grad_begin, grad_end]
    )
    weights = pack_weights(model)
    nll += 0.5 * l2_strength * float(weights @ weights)
    flat_grad += l2_strength * weights
    return float(nll), flat_grad


def save_model(model: CrfModel, sink: Union[str, BinaryIO]) -> None:
    """Versioned portable format: npz with a JSON metadata entry.

    float64 weights serialize bit-exactly; the feature dictionary is
    the ordered name list (id = list position).
    """
    meta = {
        "format_version": MODEL_FORMAT_VERSION,
        "labels": list(model.labels),
        "feature_names": list(model.feature_names),
        "templates": [str(t) for t in model.templates],
        "gazetteers": [
            {"name": g.name, "entries": sorted(g.entries)} for g in model.gazetteers
        ],
        "l2_strength": model.l2_strength,
    }
    entries = dict(
        meta=np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8),
        emission=model.emission,
        transition=model.transition,
        begin=model.begin,
        end=model.end,
    )
    if isinstance(sink, str):
        # open ourselves: np.savez appends ".npz" to bare string paths
        with open(sink, "wb") as handle:
            np.savez(handle, **entries)
    else:
        np.savez(sink, **entries)


def load_model(source: Union[str, BinaryIO]) -> CrfModel:
    try:
        with np.load(source, allow_pickle=False) as payload:
            arrays = {key: payload[key] for key in payload.files}
    except (OSError, ValueError, zipfile.BadZipFile, KeyError) as exc:
        raise ModelIOError(f"cannot read model file: {exc}") from None

    required = {"meta", "emission", "transition", "begin", "end"}
    missing = required - arrays.keys()
    if missing:
        raise ModelIOError(f"model file is missing entries: {sorted(missing)}")
    try:
        meta = json.loads(arrays["meta"].tobytes().decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelIOError(f"corrupt model metadata: {exc}") from None

    version = meta.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelIOError(
            f"model format version {version!r} unsupported (this build reads {MODEL_FORMAT_VERSION})"
        )
    try:
        return CrfModel(
            tuple(meta["labels"]),
            tuple(meta["feature_names"]),
            arrays["emission"],
            arrays["transition"],
            arrays["begin"],
            arrays["end"],
            tuple(FeatureTemplate.parse(t) for t in meta["templates"]),
            tuple(
                Gazetteer(g["name"], frozenset(g["entries"])) for g in meta["gazetteers"]
            ),
            float(meta["l2_strength"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelIOError(f"corrupt model payload: {exc}") from None
