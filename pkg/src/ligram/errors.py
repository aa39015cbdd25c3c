"""Exception hierarchy shared across the package."""


class LigramError(Exception):
    """Base class for all errors raised by this package."""


class CorpusError(LigramError):
    """Corpus file or document invariant violation."""


class EmbeddingError(LigramError):
    """Embedding table file or content problem."""


class GraphError(LigramError):
    """Graph construction failure."""


class NumericsError(LigramError):
    """Shape mismatch or non-finite value inside the numeric kernel."""


class TrainingError(LigramError):
    """Training loop failure (bad splits, aborted run)."""


class ConfigError(LigramError):
    """Invalid run configuration."""
