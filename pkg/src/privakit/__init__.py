"""privakit: in-place image pseudonymization pipeline and evaluation toolkit."""

__version__ = "0.1.0"
