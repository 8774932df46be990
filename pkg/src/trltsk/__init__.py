"""Fuzzy-rule feature transfer for unsupervised domain adaptation."""

__version__ = "0.1.0"
