"""scaresnet - size-unifying SPPR backbone with criss-cross attention, on numpy."""

__version__ = "0.1.0"

__all__ = ["__version__"]
