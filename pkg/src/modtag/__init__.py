"""modtag: learnable temporal-modulation audio front ends for tagging tasks."""

__version__ = "0.1.0"

from .tensor import Graph, Tensor  # noqa: F401
