"""Boundary-trained holomorphic networks for 2D elliptic problems."""

from . import bench, cdiff, checkpoint, cli, errors, geometry, laurent, nets
from . import representations, train

__all__ = [
    "bench", "cdiff", "checkpoint", "cli", "errors", "geometry", "laurent",
    "nets", "representations", "train",
]
__version__ = "0.1.0"
