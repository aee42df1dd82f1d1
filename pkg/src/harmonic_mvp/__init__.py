"""Mean value harmonic functions on metric measure spaces."""

__version__ = "0.1.0"
