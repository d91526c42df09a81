"""Maximum-likelihood CRF training and corpus tagging.

L-BFGS is the default: the objective is convex, so the deterministic
quasi-Newton path makes runs reproducible. A seeded mini-batch SGD
path exists for comparison. Early stopping watches dev exact-match F1
and restores the best-scoring weights.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import minimize

from protoner.corpus.split import SplitRng
from protoner.corpus.types import BioTag, Corpus, Document, LabelSet, Sentence
from protoner.crf.features import (
    FeatureTemplate,
    Gazetteer,
    default_templates,
    extract_features,
    feature_strings,
)
from protoner.crf.model import (
    CrfModel,
    nll_and_gradient,
    pack_weights,
    viterbi,
    with_weights,
    zero_model,
)
from protoner.errors import DataError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Optimization knobs; epochs doubles as the L-BFGS iteration cap."""

    optimizer: str = "lbfgs"
    learning_rate: float = 0.1
    epochs: int = 100
    batch_size: int = 8
    l2_strength: float = 0.01
    patience: int = 5
    seed: int = 13

    def __post_init__(self):
        if self.optimizer not in ("lbfgs", "sgd"):
            raise ValueError(f"optimizer must be lbfgs or sgd, got {self.optimizer!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 0 or self.batch_size < 1 or self.patience < 0:
            raise ValueError("epochs/batch_size/patience out of range")
        if self.l2_strength < 0:
            raise ValueError("l2_strength must be non-negative")


def featurize_sentence(
    sentence: Sentence,
    templates: Sequence[FeatureTemplate],
    gazetteers: Sequence[Gazetteer],
    feature_dict,
) -> list[dict]:
    return [
        extract_features(sentence, t, templates, gazetteers, feature_dict)
        for t in range(len(sentence))
    ]


def build_feature_dictionary(
    corpus: Corpus,
    templates: Sequence[FeatureTemplate],
    gazetteers: Sequence[Gazetteer],
) -> tuple[str, ...]:
    """Feature name inventory in first-seen order, training data only."""
    names: dict[str, None] = {}
    for sentence in corpus.sentences:
        for t in range(len(sentence)):
            for name in feature_strings(sentence, t, templates, gazetteers):
                names[name] = None
    return tuple(names)


def _instances(corpus: Corpus, model: CrfModel) -> list[tuple[list[dict], list[str]]]:
    batch = []
    for sentence in corpus.sentences:
        features = featurize_sentence(
            sentence, model.templates, model.gazetteers, model.feature_dict
        )
        batch.append((features, [str(tag) for tag in sentence.tags]))
    return batch


def _dev_f1(model: CrfModel, dev: Corpus) -> float:
    from protoner.evaluation import MatchMode, evaluate

    return evaluate(dev, tag(model, dev), MatchMode.EXACT).micro.f1


class _EarlyStop:
    """Tracks the best dev F1 and the weights that achieved it."""

    def __init__(self, model: CrfModel, dev: Optional[Corpus], patience: int):
        self.model = model
        self.dev = dev if dev is not None and any(True for _ in dev.sentences) else None
        self.patience = patience
        self.best_f1 = -1.0
        self.best_weights: Optional[np.ndarray] = None
        self.stale = 0

    @property
    def active(self) -> bool:
        return self.dev is not None and self.patience > 0

    def observe(self, weights: np.ndarray) -> tuple[Optional[float], bool]:
        """Returns (dev F1 or None, should_stop)."""
        if not self.active:
            return None, False
        f1 = _dev_f1(with_weights(self.model, weights), self.dev)
        if f1 > self.best_f1:
            self.best_f1 = f1
            self.best_weights = weights.copy()
            self.stale = 0
        else:
            self.stale += 1
        return f1, self.stale >= self.patience


def train(
    corpus: Corpus,
    dev: Optional[Corpus] = None,
    templates: Optional[Sequence[FeatureTemplate]] = None,
    gazetteers: Sequence[Gazetteer] = (),
    config: TrainConfig = TrainConfig(),
) -> CrfModel:
    """Fit emission/transition/boundary weights by regularized NLL.

    The feature dictionary is built on the training corpus only; dev
    guides early stopping and is never featurized into the dictionary.
    """
    sentences = list(corpus.sentences)
    if not sentences:
        raise DataError("cannot train on an empty corpus")
    if not corpus.is_tagged:
        raise DataError("training corpus has untagged sentences")
    if templates is None:
        templates = default_templates([g.name for g in gazetteers])

    if dev is not None:
        unseen = set(dev.label_set.types) - set(corpus.label_set.types)
        if unseen:
            log.warning(
                "dev entity types unseen in training (never predicted): %s",
                ", ".join(sorted(unseen)),
            )

    feature_names = build_feature_dictionary(corpus, templates, gazetteers)
    base = zero_model(
        corpus.label_set.tag_strings,
        feature_names,
        templates,
        gazetteers,
        config.l2_strength,
    )
    batch = _instances(corpus, base)
    if config.epochs == 0:
        return base

    stopper = _EarlyStop(base, dev, config.patience)
    if config.optimizer == "lbfgs":
        weights = _run_lbfgs(base, batch, config, stopper)
    else:
        weights = _run_sgd(base, batch, config, stopper)
    if stopper.best_weights is not None:
        weights = stopper.best_weights
    return with_weights(base, weights)


def _run_lbfgs(
    base: CrfModel,
    batch: Sequence,
    config: TrainConfig,
    stopper: _EarlyStop,
) -> np.ndarray:
    last_nll = {"value": float("nan")}
    iteration = {"count": 0}

    def objective(flat: np.ndarray) -> tuple[float, np.ndarray]:
        nll, grad = nll_and_gradient(with_weights(base, flat), batch)
        last_nll["value"] = nll
        return nll, grad

    def callback(flat: np.ndarray) -> None:
        iteration["count"] += 1
        f1, stop = stopper.observe(flat)
        log.info(
            "iteration %d: train nll %.6f%s",
            iteration["count"],
            last_nll["value"],
            "" if f1 is None else f", dev exact F1 {f1:.4f}",
        )
        if stop:
            raise StopIteration

    result = minimize(
        objective,
        pack_weights(base),
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={"maxiter": config.epochs},
    )
    return result.x


def _run_sgd(
    base: CrfModel,
    batch: Sequence,
    config: TrainConfig,
    stopper: _EarlyStop,
) -> np.ndarray:
    weights = pack_weights(base)
    rng = SplitRng(config.seed)
    n = len(batch)
    for epoch in range(1, config.epochs + 1):
        order = list(range(n))
        rng.shuffle(order)
        for lo in range(0, n, config.batch_size):
            indices = order[lo: lo + config.batch_size]
            mini = [batch[i] for i in indices]
            # scale l2 so the per-epoch total matches the full objective
            scaled_l2 = config.l2_strength * len(mini) / n
            _, grad = nll_and_gradient(with_weights(base, weights), mini, scaled_l2)
            weights = weights - config.learning_rate * grad

        epoch_nll, _ = nll_and_gradient(with_weights(base, weights), batch)
        f1, stop = stopper.observe(weights)
        log.info(
            "epoch %d: train nll %.6f%s",
            epoch,
            epoch_nll,
            "" if f1 is None else f", dev exact F1 {f1:.4f}",
        )
        if stop:
            break
    return weights


def _label_set_of(labels: Sequence[str]) -> LabelSet:
    types: dict[str, None] = {}
    for label in labels:
        tag = BioTag.parse(label)
        if tag.is_entity:
            types[tag.entity_type] = None
    return LabelSet(tuple(types))


def tag(model: CrfModel, corpus: Corpus, constrained: bool = True) -> Corpus:
    """Viterbi-tag every sentence; constrained mode guarantees valid BIO."""
    documents = []
    for doc in corpus.documents:
        tagged = []
        for sentence in doc.sentences:
            features = featurize_sentence(
                sentence, model.templates, model.gazetteers, model.feature_dict
            )
            labels, _ = viterbi(model, features, constrained=constrained)
            tags = tuple(BioTag.parse(label) for label in labels)
            tagged.append(sentence.with_tags(tags, unvalidated=not constrained))
        documents.append(Document(doc.id, tuple(tagged), doc.source_text))
    return Corpus(tuple(documents), _label_set_of(model.labels))
