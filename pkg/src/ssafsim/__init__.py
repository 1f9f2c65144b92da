"""Coded transmission over non-orthogonal amplify-and-forward relay channels."""

__version__ = "0.1.0"
