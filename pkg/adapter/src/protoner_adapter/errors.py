class AdapterError(Exception):
    """Configuration or interop failure (vocabulary drift, bad checkpoint)."""


class AdapterDataError(AdapterError):
    """Malformed input data; messages name the file position."""
