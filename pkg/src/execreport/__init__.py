"""Software model checker for MiniC that reports partial verification results."""

__version__ = "0.1.0"
