"""Sequence-labeling toolkit for laboratory-protocol entity recognition.

Subpackages: corpus (data model, formats, BIO codec, splitting), crf
(trainable linear-chain baseline), subword (WordPiece alignment and
chunking), evaluation (span scorers, error taxonomy, kappa), bridge
(external-encoder logits ingestion), cli (command-line front end).
"""

__version__ = "0.1.0"
