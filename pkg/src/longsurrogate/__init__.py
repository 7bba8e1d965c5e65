"""Long-term treatment effects from short-term experiment panels."""

__version__ = "0.1.0"
