"""Thin named wrappers over ``forward`` used by the network modules."""

from typing import Optional, Sequence, Tuple, Union

from scaresnet.tensor.ops import forward
from scaresnet.tensor.tensor import Tensor

IntPair = Union[int, Tuple[int, int]]


def add(a: Tensor, b: Tensor) -> Tensor:
    return forward("add", [a, b])


def mul(a: Tensor, b: Tensor) -> Tensor:
    return forward("mul", [a, b])


def scale(x: Tensor, factor: float) -> Tensor:
    return forward("scale", [x], {"factor": factor})


def matmul(a: Tensor, b: Tensor) -> Tensor:
    return forward("matmul", [a, b])


def relu(x: Tensor) -> Tensor:
    return forward("relu", [x])


def sigmoid(x: Tensor) -> Tensor:
    return forward("sigmoid", [x])


def softmax(x: Tensor) -> Tensor:
    return forward("softmax-last-axis", [x])


def _with_bias(x: Tensor, w: Tensor, b: Optional[Tensor]) -> list:
    return [x, w] if b is None else [x, w, b]


def conv2d(
    x: Tensor,
    w: Tensor,
    b: Optional[Tensor] = None,
    stride: IntPair = 1,
    padding: IntPair = 0,
) -> Tensor:
    return forward("conv2d", _with_bias(x, w, b), {"stride": stride, "padding": padding})


def depthwise_conv2d(
    x: Tensor,
    w: Tensor,
    b: Optional[Tensor] = None,
    stride: IntPair = 1,
    padding: IntPair = 0,
) -> Tensor:
    return forward(
        "depthwise-conv2d", _with_bias(x, w, b), {"stride": stride, "padding": padding}
    )


def pointwise_conv2d(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    return forward("pointwise-conv2d", _with_bias(x, w, b))


def maxpool2d(
    x: Tensor, kernel: IntPair, stride: IntPair, padding: IntPair = 0
) -> Tensor:
    return forward(
        "maxpool2d", [x], {"kernel": kernel, "stride": stride, "padding": padding}
    )


def global_avg_pool(x: Tensor) -> Tensor:
    return forward("global-avg-pool", [x])


def linear(x: Tensor, w: Tensor, b: Optional[Tensor] = None) -> Tensor:
    return forward("linear", _with_bias(x, w, b))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if axis == 0:
        return forward("concat-channels", list(tensors))
    return forward("concat", list(tensors), {"axis": axis})


def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    return forward("reshape", [x], {"shape": tuple(shape)})


def transpose(x: Tensor, axes: Sequence[int]) -> Tensor:
    return forward("transpose", [x], {"axes": tuple(axes)})


def slice_axis(x: Tensor, axis: int, start: int, stop: int) -> Tensor:
    return forward("slice", [x], {"axis": axis, "start": start, "stop": stop})


def group_norm(x: Tensor, gamma: Tensor, beta: Tensor, groups: int = 8) -> Tensor:
    return forward("group-norm", [x, gamma, beta], {"groups": groups})


def sum_all(x: Tensor) -> Tensor:
    return forward("sum", [x])


def mean_all(x: Tensor) -> Tensor:
    return forward("mean", [x])


def bce_with_logits(logit: Tensor, target: float) -> Tensor:
    return forward("bce-with-logits", [logit], {"target": float(target)})
