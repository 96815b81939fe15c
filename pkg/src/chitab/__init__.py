"""Complex-header table benchmark builder and answer-file evaluator."""

__version__ = "0.1.0"
