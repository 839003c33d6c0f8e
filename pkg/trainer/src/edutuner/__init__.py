"""Adapter fine-tuning and generation over exported tutoring datasets."""

__version__ = "0.1.0"
