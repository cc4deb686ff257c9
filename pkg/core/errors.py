class DataError(ValueError):
    """Raised when a corpus, embedding, or checkpoint file has invalid content."""


class ModelError(ValueError):
    """Raised when a model is in the wrong state for the requested operation."""
