"""Parameter containers and seeded initialization."""

import math
from dataclasses import fields
from typing import Any, Dict, Iterable, List, Mapping

import numpy as np

from scaresnet.errors import ShapeError, ValidationError
from scaresnet.tensor import DType, Tensor, resolve_dtype


class ParameterGroup:
    """Mixin for dataclasses whose fields hold tensors or nested groups.

    Fields may be a ``Tensor``, another ``ParameterGroup``, a list/tuple or
    dict of those, or ``None``; anything else (ints, flags) is ignored.
    """

    def named_parameters(self, prefix: str = "") -> Dict[str, Tensor]:
        found: Dict[str, Tensor] = {}
        for f in fields(self):
            _collect(getattr(self, f.name), f"{prefix}{f.name}", found)
        return found

    def parameters(self) -> List[Tensor]:
        return list(self.named_parameters().values())

    def num_parameters(self) -> int:
        return sum(t.size for t in self.parameters())

    def load_state(self, state: Mapping[str, Tensor]) -> None:
        """Copy tensors from ``state`` into the matching named parameters."""
        own = self.named_parameters()
        missing = sorted(set(own) - set(state))
        unexpected = sorted(set(state) - set(own))
        if missing or unexpected:
            raise ValidationError(
                f"checkpoint mismatch: missing={missing[:5]} unexpected={unexpected[:5]}"
            )
        for name, target in own.items():
            source = state[name]
            if source.shape != target.shape:
                raise ShapeError(
                    f"{name}: checkpoint shape {source.shape} != parameter shape {target.shape}"
                )
            target.data = source.data.astype(target.data.dtype).copy()


def _collect(value: Any, name: str, found: Dict[str, Tensor]) -> None:
    if value is None:
        return
    if isinstance(value, Tensor):
        value.name = value.name or name
        found[name] = value
    elif isinstance(value, ParameterGroup):
        found.update(value.named_parameters(f"{name}."))
    elif isinstance(value, (list, tuple)):
        for i, item in enumerate(value):
            _collect(item, f"{name}.{i}", found)
    elif isinstance(value, dict):
        for key, item in value.items():
            _collect(item, f"{name}.{key}", found)


class Initializer:
    """Deterministic parameter factory.

    ``uniform`` draws from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), ``kaiming``
    from the He range; biases and shifts start at zero. Parameters must be
    requested in a fixed order for a seed to reproduce the same weights.
    """

    def __init__(self, seed: int, dtype: DType = DType.FLOAT32):
        self.seed = seed
        self.dtype = resolve_dtype(dtype)
        self.rng = np.random.default_rng(seed)

    def uniform(self, shape: Iterable[int], fan_in: int) -> Tensor:
        shape = tuple(shape)
        bound = 1.0 / math.sqrt(max(1, fan_in))
        return Tensor(self.rng.uniform(-bound, bound, size=shape), dtype=self.dtype)

    def kaiming(self, shape: Iterable[int], fan_in: int) -> Tensor:
        """U(-sqrt(6/fan_in), sqrt(6/fan_in)): keeps activation scale through
        layers that have no normalization after them."""
        shape = tuple(shape)
        bound = math.sqrt(6.0 / max(1, fan_in))
        return Tensor(self.rng.uniform(-bound, bound, size=shape), dtype=self.dtype)

    def zeros(self, shape: Iterable[int]) -> Tensor:
        return Tensor.zeros(tuple(shape), dtype=self.dtype)

    def ones(self, shape: Iterable[int]) -> Tensor:
        return Tensor.ones(tuple(shape), dtype=self.dtype)

    def full(self, shape: Iterable[int], value: float) -> Tensor:
        return Tensor(np.full(tuple(shape), value), dtype=self.dtype)


def decays(tensor: Tensor) -> bool:
    """Weight decay applies to matrices and kernels, not to biases or scales."""
    return tensor.data.ndim >= 2
