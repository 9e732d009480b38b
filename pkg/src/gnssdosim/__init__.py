"""Multi-node simulator of GNSS-disciplined oscillators on moving vehicles."""

__version__ = "0.1.0"
