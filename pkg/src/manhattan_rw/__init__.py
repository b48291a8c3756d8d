"""Random walks on randomly oriented lattices."""

__version__ = "0.1.0"
