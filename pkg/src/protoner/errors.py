"""Exception hierarchy for data and format errors.

Everything raised here maps to exit code 2 in the CLI; genuine usage
errors (bad flags) exit 1.
"""


class DataError(Exception):
    """Base class for malformed input data or inconsistent artifacts."""


class ConllError(DataError):
    """Malformed CoNLL content (bad column count, bad tag string)."""


class BratError(DataError):
    """Malformed BRAT standoff content or out-of-range annotation."""


class TagSchemaError(DataError):
    """A BIO tag sequence violates the tagging scheme."""


class SpanError(DataError):
    """Invalid entity spans (overlap, out of range)."""


class AlignmentError(DataError):
    """Two corpora that must be token-aligned diverge."""


class VocabError(DataError):
    """Invalid subword vocabulary file."""


class ChunkError(DataError):
    """A sentence cannot be chunked under the piece budget."""


class BridgeError(DataError):
    """Malformed or inconsistent bridge (logits) file."""


class ModelIOError(DataError):
    """Unreadable, corrupted, or version-incompatible model file."""
