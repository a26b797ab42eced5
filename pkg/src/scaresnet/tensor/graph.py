"""Operation graph and reverse-mode differentiation."""

import logging
from contextvars import ContextVar, Token
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from scaresnet.errors import ShapeError, ValidationError
from scaresnet.tensor.tensor import DType, Tensor

logger = logging.getLogger(__name__)

LEAF = "leaf"

_ACTIVE_GRAPH: ContextVar[Optional["Graph"]] = ContextVar(
    "scaresnet_active_graph", default=None
)

# kind -> backward(grad_out, inputs, output, saved, attrs) -> grads per input
BackwardFn = Callable[
    [np.ndarray, List[np.ndarray], np.ndarray, Dict[str, Any], Dict[str, Any]],
    Sequence[Optional[np.ndarray]],
]
_BACKWARD: Dict[str, BackwardFn] = {}


def register_backward(kind: str, fn: BackwardFn) -> None:
    _BACKWARD[kind] = fn


@dataclass
class Node:
    """One recorded operation (or a leaf)."""

    kind: str
    attrs: Dict[str, Any]
    parents: Tuple[int, ...]
    saved: Dict[str, Any]
    tensor: Tensor


@dataclass
class Graph:
    """Append-only record of operations.

    A graph has a single writer. Use it as a context manager to make it the
    active graph for the current thread (or task); independent samples can
    be processed on independent graphs concurrently.
    """

    nodes: List[Node] = field(default_factory=list)
    dtype: Optional[DType] = None
    _leaf_ids: Dict[int, int] = field(default_factory=dict, repr=False)
    _token: Optional[Token] = field(default=None, repr=False)

    def __enter__(self) -> "Graph":
        self._token = _ACTIVE_GRAPH.set(self)
        return self

    def __exit__(self, *exc) -> None:
        if self._token is not None:
            _ACTIVE_GRAPH.reset(self._token)
            self._token = None

    def __len__(self) -> int:
        return len(self.nodes)

    def owns(self, tensor: Tensor) -> bool:
        """True when ``tensor`` was produced by an op recorded here."""
        idx = tensor.node
        return idx is not None and idx < len(self.nodes) and self.nodes[idx].tensor is tensor

    def index_of(self, tensor: Tensor) -> int:
        """Return the node index of ``tensor``, registering it as a leaf."""
        if self.owns(tensor):
            return tensor.node
        key = id(tensor)
        idx = self._leaf_ids.get(key)
        if idx is not None and self.nodes[idx].tensor is tensor:
            return idx
        self._check_dtype(tensor)
        idx = len(self.nodes)
        self.nodes.append(Node(LEAF, {}, (), {}, tensor))
        self._leaf_ids[key] = idx
        return idx

    def record(
        self,
        kind: str,
        attrs: Dict[str, Any],
        inputs: Sequence[Tensor],
        saved: Dict[str, Any],
        output: Tensor,
    ) -> int:
        parents = tuple(self.index_of(t) for t in inputs)
        self._check_dtype(output)
        idx = len(self.nodes)
        self.nodes.append(Node(kind, attrs, parents, saved, output))
        output.node = idx
        return idx

    def _check_dtype(self, tensor: Tensor) -> None:
        if self.dtype is None:
            self.dtype = tensor.dtype
        elif tensor.dtype != self.dtype:
            raise ValidationError(
                f"graph holds {self.dtype.value} tensors, got {tensor.dtype.value}"
            )

    def backward(self, root: Tensor) -> None:
        backward(self, root)


def active_graph() -> Optional[Graph]:
    """Return the graph installed for the current context, if any."""
    return _ACTIVE_GRAPH.get()


def backward(graph: Graph, root: Tensor) -> None:
    """Populate ``grad`` with d(root)/d(tensor) for every tensor reachable from root.

    Tensors on the graph that root does not depend on end up with
    ``grad = None``. Calling this again overwrites gradients rather than
    adding to them.
    """
    if not root.is_scalar():
        raise ShapeError(f"backward needs a scalar-shaped root, got {root.shape}")
    if not graph.owns(root) and id(root) not in graph._leaf_ids:
        raise ValidationError("backward root is not part of the graph")

    root_idx = graph.index_of(root)
    for node in graph.nodes:
        node.tensor.grad = None

    grads: Dict[int, np.ndarray] = {root_idx: np.ones_like(root.data)}
    for idx in range(root_idx, -1, -1):
        g = grads.get(idx)
        if g is None:
            continue
        node = graph.nodes[idx]
        if node.kind == LEAF:
            continue
        fn = _BACKWARD[node.kind]
        inputs = [graph.nodes[p].tensor.data for p in node.parents]
        parent_grads = fn(g, inputs, node.tensor.data, node.saved, node.attrs)
        for parent, pg in zip(node.parents, parent_grads):
            if pg is None:
                continue
            if parent in grads:
                grads[parent] = grads[parent] + pg
            else:
                grads[parent] = pg

    dtype = graph.dtype.numpy if graph.dtype is not None else root.data.dtype
    for idx, g in grads.items():
        tensor = graph.nodes[idx].tensor
        tensor.grad = np.ascontiguousarray(g, dtype=dtype).reshape(tensor.shape)

    logger.debug(f"backward: {len(grads)} of {len(graph.nodes)} nodes reached")
