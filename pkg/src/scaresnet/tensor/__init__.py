"""Minimal dense-tensor engine with reverse-mode differentiation."""

from scaresnet.tensor.tensor import DType, Tensor, resolve_dtype
from scaresnet.tensor.graph import Graph, Node, active_graph, backward
from scaresnet.tensor.ops import OP_KINDS, OP_TABLE, forward, output_extent
from scaresnet.tensor.gradcheck import (
    finite_diff_grad,
    max_relative_error,
    sample_indices,
)
from scaresnet.tensor.serialization import (
    load_checkpoint,
    load_tensor,
    read_meta,
    save_checkpoint,
    save_tensor,
)

__all__ = [
    "DType",
    "Tensor",
    "resolve_dtype",
    "Graph",
    "Node",
    "active_graph",
    "backward",
    "OP_KINDS",
    "OP_TABLE",
    "forward",
    "output_extent",
    "finite_diff_grad",
    "max_relative_error",
    "sample_indices",
    "load_checkpoint",
    "load_tensor",
    "read_meta",
    "save_checkpoint",
    "save_tensor",
]
