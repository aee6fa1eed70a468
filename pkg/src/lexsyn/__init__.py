"""Code-switching augmentation and dependency-syntax attention bias for cross-lingual encoders."""

__version__ = "0.1.0"
