"""Rate-distortion-cache tradeoffs for multi-source libraries."""

__version__ = "0.1.0"
