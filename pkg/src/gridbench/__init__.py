"""Power-grid sequential control benchmark."""

__version__ = "0.1.0"
