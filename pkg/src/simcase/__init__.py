"""Similar case retrieval and binding-precedent time-series analytics."""

__version__ = "0.1.0"
