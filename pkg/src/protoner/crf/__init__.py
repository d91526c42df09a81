"""Trainable linear-chain CRF baseline over word-level BIO tags."""
from protoner.crf.features import (
    FeatureTemplate,
    Gazetteer,
    default_templates,
    extract_features,
    feature_strings,
    harvest_gazetteers,
    load_gazetteer,
    parse_template_config,
    word_shape,
)
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
from protoner.crf.train import (
    TrainConfig,
    build_feature_dictionary,
    featurize_sentence,
    tag,
    train,
)

__all__ = [
    "CrfModel",
    "FeatureTemplate",
    "Gazetteer",
    "TrainConfig",
    "bio_constraint_masks",
    "build_feature_dictionary",
    "default_templates",
    "extract_features",
    "feature_strings",
    "featurize_sentence",
    "harvest_gazetteers",
    "load_gazetteer",
    "load_model",
    "log_partition",
    "marginals",
    "nll_and_gradient",
    "pack_weights",
    "parse_template_config",
    "save_model",
    "score_sequence",
    "tag",
    "train",
    "viterbi",
    "with_weights",
    "word_shape",
    "zero_model",
]
