"""Two-party split face recognition over block-DCT frequency channels."""

__version__ = "0.1.0"
