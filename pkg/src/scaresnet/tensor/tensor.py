"""Dense tensor container."""

from enum import Enum
from typing import Any, Iterable, Optional, Tuple, Union

import numpy as np

from scaresnet.errors import ShapeError, ValidationError


class DType(str, Enum):
    """Supported element types."""

    FLOAT32 = "float32"
    FLOAT64 = "float64"

    @property
    def numpy(self) -> np.dtype:
        return np.dtype(self.value)


DTypeLike = Union[DType, str]


def resolve_dtype(dtype: DTypeLike) -> DType:
    """Normalize a dtype tag, rejecting anything but float32/float64."""
    try:
        return DType(np.dtype(dtype).name if not isinstance(dtype, DType) else dtype)
    except (TypeError, ValueError):
        raise ValidationError(
            f"unsupported dtype {dtype!r}: expected float32 or float64"
        ) from None


class Tensor:
    """A row-major buffer with an optional gradient.

    Feature maps are laid out channels x height x width. ``node`` is set
    when the tensor was produced by an operation recorded on a graph;
    leaves (inputs, weights) keep ``node`` unset and may be shared between
    graphs.
    """

    __slots__ = ("data", "grad", "node", "name")

    def __init__(
        self,
        data: Any,
        dtype: Optional[DTypeLike] = None,
        name: str = "",
    ):
        array = np.asarray(data)
        if dtype is not None:
            array = array.astype(resolve_dtype(dtype).numpy, copy=False)
        elif array.dtype not in (np.float32, np.float64):
            array = array.astype(np.float32)
        if array.ndim == 0:
            array = array.reshape(1)
        for axis, extent in enumerate(array.shape):
            if extent <= 0:
                raise ShapeError(
                    f"tensor axis {axis} has non-positive extent {extent}", axis=axis
                )
        self.data: np.ndarray = np.ascontiguousarray(array)
        self.grad: Optional[np.ndarray] = None
        self.node: Optional[int] = None
        self.name = name

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.data.shape)

    @property
    def dtype(self) -> DType:
        return DType(self.data.dtype.name)

    @property
    def size(self) -> int:
        return int(self.data.size)

    def is_scalar(self) -> bool:
        return all(extent == 1 for extent in self.shape)

    def item(self) -> float:
        if not self.is_scalar():
            raise ShapeError(f"item() needs a scalar-shaped tensor, got {self.shape}")
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        """Return a copy of the underlying buffer."""
        return self.data.copy()

    def detach(self) -> "Tensor":
        """Return a gradient-free copy usable as a fresh leaf."""
        return Tensor(self.data.copy(), name=self.name)

    def astype(self, dtype: DTypeLike) -> "Tensor":
        return Tensor(self.data, dtype=dtype, name=self.name)

    @classmethod
    def zeros(cls, shape: Iterable[int], dtype: DTypeLike = DType.FLOAT32) -> "Tensor":
        return cls(np.zeros(tuple(shape), dtype=resolve_dtype(dtype).numpy))

    @classmethod
    def ones(cls, shape: Iterable[int], dtype: DTypeLike = DType.FLOAT32) -> "Tensor":
        return cls(np.ones(tuple(shape), dtype=resolve_dtype(dtype).numpy))

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        grad = " grad" if self.grad is not None else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype.value}{label}{grad})"
