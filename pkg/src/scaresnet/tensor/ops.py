"""Fixed operation table: forward kernels, shape rules and backward kernels.

Every kernel works on numpy arrays; ``forward`` wraps the result in a
``Tensor`` and records it on the active graph.
"""

import logging
from dataclasses import dataclass
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from scaresnet.errors import ShapeError, ValidationError
from scaresnet.tensor.graph import BackwardFn, active_graph, register_backward
from scaresnet.tensor.tensor import Tensor

logger = logging.getLogger(__name__)

Arrays = List[np.ndarray]
Attrs = Dict[str, Any]
ForwardFn = Callable[[Arrays, Attrs], Tuple[np.ndarray, Dict[str, Any]]]

GROUP_NORM_EPS = 1e-5


@dataclass(frozen=True)
class OpSpec:
    """Forward/backward pair for one op kind."""

    kind: str
    min_inputs: int
    max_inputs: Optional[int]
    forward: ForwardFn
    backward: BackwardFn


# --- shape helpers ---


def pair(value: Any) -> Tuple[int, int]:
    """Expand an int or a 2-sequence into a (height, width) pair."""
    if isinstance(value, (tuple, list)):
        if len(value) != 2:
            raise ValidationError(f"expected a per-axis pair, got {value!r}")
        return int(value[0]), int(value[1])
    return int(value), int(value)


def output_extent(extent: int, kernel: int, stride: int, padding: int, axis: int) -> int:
    """Standard window rule floor((n + 2p - k) / s) + 1, rejecting empty outputs."""
    if kernel < 1 or stride < 1 or padding < 0:
        raise ShapeError(
            f"axis {axis}: invalid window kernel={kernel} stride={stride} padding={padding}",
            axis=axis,
        )
    span = extent + 2 * padding - kernel
    if span < 0:
        raise ShapeError(
            f"axis {axis}: kernel {kernel} exceeds padded extent {extent + 2 * padding}",
            axis=axis,
        )
    return span // stride + 1


def _window_attrs(attrs: Attrs) -> Tuple[Tuple[int, int], Tuple[int, int], Tuple[int, int]]:
    kernel = pair(attrs.get("kernel", 1))
    stride = pair(attrs.get("stride", 1))
    padding = pair(attrs.get("padding", 0))
    return kernel, stride, padding


def _require_ndim(kind: str, array: np.ndarray, ndim: int, label: str) -> None:
    if array.ndim != ndim:
        raise ShapeError(f"{kind}: {label} must have {ndim} axes, got shape {array.shape}")


def _require_extent(kind: str, label: str, axis: int, got: int, expected: int) -> None:
    if got != expected:
        raise ShapeError(
            f"{kind}: {label} axis {axis} has extent {got}, expected {expected}",
            axis=axis,
        )


def _broadcast_shape(kind: str, a: Tuple[int, ...], b: Tuple[int, ...]) -> None:
    for offset in range(1, min(len(a), len(b)) + 1):
        x, y = a[-offset], b[-offset]
        if x != y and x != 1 and y != 1:
            axis = max(len(a), len(b)) - offset
            raise ShapeError(
                f"{kind}: axis {axis} mismatch {x} vs {y} (shapes {a} and {b})",
                axis=axis,
            )


def unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    """Sum ``grad`` over the axes that broadcasting expanded from ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _windows(padded: np.ndarray, kernel, stride, out_h: int, out_w: int) -> np.ndarray:
    """(C, out_h, out_w, kh, kw) view of the sliding windows of a padded map."""
    view = sliding_window_view(padded, kernel, axis=(1, 2))
    return view[:, :: stride[0], :: stride[1]][:, :out_h, :out_w]


def _scatter_windows(
    grad_windows: Callable[[int, int], np.ndarray],
    padded_shape: Tuple[int, ...],
    kernel,
    stride,
    out_h: int,
    out_w: int,
    dtype,
) -> np.ndarray:
    """Accumulate per-kernel-offset gradients back onto the padded input."""
    gxp = np.zeros(padded_shape, dtype=dtype)
    for i in range(kernel[0]):
        rows = slice(i, i + stride[0] * (out_h - 1) + 1, stride[0])
        for j in range(kernel[1]):
            cols = slice(j, j + stride[1] * (out_w - 1) + 1, stride[1])
            gxp[:, rows, cols] += grad_windows(i, j)
    return gxp


def _crop(gxp: np.ndarray, padding, height: int, width: int) -> np.ndarray:
    return gxp[:, padding[0] : padding[0] + height, padding[1] : padding[1] + width]


# --- elementwise ---


def _add_fwd(xs: Arrays, attrs: Attrs):
    _broadcast_shape("add", xs[0].shape, xs[1].shape)
    return xs[0] + xs[1], {}


def _add_bwd(g, xs, out, saved, attrs):
    return unbroadcast(g, xs[0].shape), unbroadcast(g, xs[1].shape)


def _mul_fwd(xs: Arrays, attrs: Attrs):
    _broadcast_shape("mul", xs[0].shape, xs[1].shape)
    return xs[0] * xs[1], {}


def _mul_bwd(g, xs, out, saved, attrs):
    return unbroadcast(g * xs[1], xs[0].shape), unbroadcast(g * xs[0], xs[1].shape)


def _scale_fwd(xs: Arrays, attrs: Attrs):
    return xs[0] * float(attrs["factor"]), {}


def _scale_bwd(g, xs, out, saved, attrs):
    return (g * float(attrs["factor"]),)


def _relu_fwd(xs: Arrays, attrs: Attrs):
    return np.maximum(xs[0], 0), {}


def _relu_bwd(g, xs, out, saved, attrs):
    return (g * (xs[0] > 0),)


def _sigmoid_fwd(xs: Arrays, attrs: Attrs):
    # tanh form: exact 0.5 at zero and saturates to exactly 1.0 without overflow
    return 0.5 * (1.0 + np.tanh(0.5 * xs[0])), {}


def _sigmoid_bwd(g, xs, out, saved, attrs):
    return (g * out * (1.0 - out),)


def _softmax_fwd(xs: Arrays, attrs: Attrs):
    x = xs[0]
    shifted = x - np.max(x, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True), {}


def _softmax_bwd(g, xs, out, saved, attrs):
    return (out * (g - (g * out).sum(axis=-1, keepdims=True)),)


# --- linear algebra ---


def _matmul_fwd(xs: Arrays, attrs: Attrs):
    a, b = xs
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul: operands need at least 2 axes, got {a.shape} and {b.shape}")
    _require_extent("matmul", "right operand", b.ndim - 2, b.shape[-2], a.shape[-1])
    _broadcast_shape("matmul", a.shape[:-2], b.shape[:-2])
    return np.matmul(a, b), {}


def _matmul_bwd(g, xs, out, saved, attrs):
    a, b = xs
    ga = np.matmul(g, np.swapaxes(b, -1, -2))
    gb = np.matmul(np.swapaxes(a, -1, -2), g)
    return unbroadcast(ga, a.shape), unbroadcast(gb, b.shape)


def _linear_fwd(xs: Arrays, attrs: Attrs):
    x, w = xs[0], xs[1]
    _require_ndim("linear", w, 2, "weight")
    if x.ndim not in (1, 2):
        raise ShapeError(f"linear: input must be a vector or a matrix, got {x.shape}")
    _require_extent("linear", "input", x.ndim - 1, x.shape[-1], w.shape[1])
    out = x @ w.T
    if len(xs) == 3:
        _require_extent("linear", "bias", 0, xs[2].shape[0], w.shape[0])
        out = out + xs[2]
    return out, {}


def _linear_bwd(g, xs, out, saved, attrs):
    x, w = xs[0], xs[1]
    gx = g @ w
    gw = np.outer(g, x) if x.ndim == 1 else g.T @ x
    grads = [gx, gw]
    if len(xs) == 3:
        grads.append(g if g.ndim == 1 else g.sum(axis=0))
    return grads


# --- convolution ---


def _conv2d_fwd(xs: Arrays, attrs: Attrs):
    x, w = xs[0], xs[1]
    _require_ndim("conv2d", x, 3, "input")
    _require_ndim("conv2d", w, 4, "weight")
    _require_extent("conv2d", "weight", 1, w.shape[1], x.shape[0])
    kernel = (w.shape[2], w.shape[3])
    _, stride, padding = _window_attrs(attrs)
    out_h = output_extent(x.shape[1], kernel[0], stride[0], padding[0], axis=1)
    out_w = output_extent(x.shape[2], kernel[1], stride[1], padding[1], axis=2)
    xp = np.pad(x, ((0, 0), (padding[0], padding[0]), (padding[1], padding[1])))
    win = _windows(xp, kernel, stride, out_h, out_w)
    out = np.einsum("chwij,ocij->ohw", win, w, optimize=True)
    if len(xs) == 3:
        _require_extent("conv2d", "bias", 0, xs[2].shape[0], w.shape[0])
        out = out + xs[2][:, None, None]
    return out, {"padded_shape": xp.shape, "out_hw": (out_h, out_w)}


def _conv2d_bwd(g, xs, out, saved, attrs):
    x, w = xs[0], xs[1]
    kernel = (w.shape[2], w.shape[3])
    _, stride, padding = _window_attrs(attrs)
    out_h, out_w = saved["out_hw"]
    xp = np.pad(x, ((0, 0), (padding[0], padding[0]), (padding[1], padding[1])))
    win = _windows(xp, kernel, stride, out_h, out_w)
    gw = np.einsum("ohw,chwij->ocij", g, win, optimize=True)
    gxp = _scatter_windows(
        lambda i, j: np.einsum("ohw,oc->chw", g, w[:, :, i, j], optimize=True),
        saved["padded_shape"],
        kernel,
        stride,
        out_h,
        out_w,
        x.dtype,
    )
    grads = [_crop(gxp, padding, x.shape[1], x.shape[2]), gw]
    if len(xs) == 3:
        grads.append(g.sum(axis=(1, 2)))
    return grads


def _depthwise_fwd(xs: Arrays, attrs: Attrs):
    x, w = xs[0], xs[1]
    _require_ndim("depthwise-conv2d", x, 3, "input")
    _require_ndim("depthwise-conv2d", w, 4, "weight")
    _require_extent("depthwise-conv2d", "weight", 0, w.shape[0], x.shape[0])
    _require_extent("depthwise-conv2d", "weight", 1, w.shape[1], 1)
    kernel = (w.shape[2], w.shape[3])
    _, stride, padding = _window_attrs(attrs)
    out_h = output_extent(x.shape[1], kernel[0], stride[0], padding[0], axis=1)
    out_w = output_extent(x.shape[2], kernel[1], stride[1], padding[1], axis=2)
    xp = np.pad(x, ((0, 0), (padding[0], padding[0]), (padding[1], padding[1])))
    win = _windows(xp, kernel, stride, out_h, out_w)
    out = np.einsum("chwij,cij->chw", win, w[:, 0], optimize=True)
    if len(xs) == 3:
        _require_extent("depthwise-conv2d", "bias", 0, xs[2].shape[0], w.shape[0])
        out = out + xs[2][:, None, None]
    return out, {"padded_shape": xp.shape, "out_hw": (out_h, out_w)}


def _depthwise_bwd(g, xs, out, saved, attrs):
    x, w = xs[0], xs[1]
    kernel = (w.shape[2], w.shape[3])
    _, stride, padding = _window_attrs(attrs)
    out_h, out_w = saved["out_hw"]
    xp = np.pad(x, ((0, 0), (padding[0], padding[0]), (padding[1], padding[1])))
    win = _windows(xp, kernel, stride, out_h, out_w)
    gw = np.einsum("chw,chwij->cij", g, win, optimize=True)[:, None]
    gxp = _scatter_windows(
        lambda i, j: g * w[:, 0, i, j][:, None, None],
        saved["padded_shape"],
        kernel,
        stride,
        out_h,
        out_w,
        x.dtype,
    )
    grads = [_crop(gxp, padding, x.shape[1], x.shape[2]), gw]
    if len(xs) == 3:
        grads.append(g.sum(axis=(1, 2)))
    return grads


def _pointwise_fwd(xs: Arrays, attrs: Attrs):
    x, w = xs[0], xs[1]
    _require_ndim("pointwise-conv2d", x, 3, "input")
    _require_ndim("pointwise-conv2d", w, 2, "weight")
    _require_extent("pointwise-conv2d", "weight", 1, w.shape[1], x.shape[0])
    out = np.einsum("oc,chw->ohw", w, x, optimize=True)
    if len(xs) == 3:
        _require_extent("pointwise-conv2d", "bias", 0, xs[2].shape[0], w.shape[0])
        out = out + xs[2][:, None, None]
    return out, {}


def _pointwise_bwd(g, xs, out, saved, attrs):
    x, w = xs[0], xs[1]
    grads = [
        np.einsum("oc,ohw->chw", w, g, optimize=True),
        np.einsum("ohw,chw->oc", g, x, optimize=True),
    ]
    if len(xs) == 3:
        grads.append(g.sum(axis=(1, 2)))
    return grads


# --- pooling ---


def _maxpool_fwd(xs: Arrays, attrs: Attrs):
    x = xs[0]
    _require_ndim("maxpool2d", x, 3, "input")
    kernel, stride, padding = _window_attrs(attrs)
    for axis, (k, p) in enumerate(zip(kernel, padding), start=1):
        if 2 * p > k:
            raise ShapeError(
                f"maxpool2d: axis {axis} padding {p} exceeds half the kernel {k}",
                axis=axis,
            )
    out_h = output_extent(x.shape[1], kernel[0], stride[0], padding[0], axis=1)
    out_w = output_extent(x.shape[2], kernel[1], stride[1], padding[1], axis=2)
    xp = np.pad(
        x,
        ((0, 0), (padding[0], padding[0]), (padding[1], padding[1])),
        constant_values=-np.inf,
    )
    win = _windows(xp, kernel, stride, out_h, out_w)
    flat = win.reshape(x.shape[0], out_h, out_w, kernel[0] * kernel[1])
    arg = np.argmax(flat, axis=-1)
    out = np.take_along_axis(flat, arg[..., None], axis=-1)[..., 0]
    return out, {"argmax": arg, "padded_shape": xp.shape}


def _maxpool_bwd(g, xs, out, saved, attrs):
    x = xs[0]
    kernel, stride, padding = _window_attrs(attrs)
    arg = saved["argmax"]
    c_idx, oh, ow = np.indices(arg.shape)
    rows = oh * stride[0] + arg // kernel[1]
    cols = ow * stride[1] + arg % kernel[1]
    gxp = np.zeros(saved["padded_shape"], dtype=x.dtype)
    np.add.at(gxp, (c_idx, rows, cols), g)
    return (_crop(gxp, padding, x.shape[1], x.shape[2]),)


def _gap_fwd(xs: Arrays, attrs: Attrs):
    x = xs[0]
    _require_ndim("global-avg-pool", x, 3, "input")
    return x.mean(axis=(1, 2)), {}


def _gap_bwd(g, xs, out, saved, attrs):
    x = xs[0]
    scale = 1.0 / (x.shape[1] * x.shape[2])
    return (np.broadcast_to(g[:, None, None] * scale, x.shape).copy(),)


# --- structural ---


def _concat_fwd(xs: Arrays, attrs: Attrs):
    axis = int(attrs.get("axis", 0))
    first = xs[0]
    for other in xs[1:]:
        if other.ndim != first.ndim:
            raise ShapeError(f"concat: rank mismatch {first.shape} vs {other.shape}")
        for ax in range(first.ndim):
            if ax != axis:
                _require_extent("concat", "input", ax, other.shape[ax], first.shape[ax])
    return np.concatenate(xs, axis=axis), {}


def _concat_bwd(g, xs, out, saved, attrs):
    axis = int(attrs.get("axis", 0))
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]
    return np.split(g, bounds, axis=axis)


def _concat_channels_fwd(xs: Arrays, attrs: Attrs):
    return _concat_fwd(xs, {"axis": 0})


def _concat_channels_bwd(g, xs, out, saved, attrs):
    return _concat_bwd(g, xs, out, saved, {"axis": 0})


def _reshape_fwd(xs: Arrays, attrs: Attrs):
    x = xs[0]
    shape = tuple(int(n) for n in attrs["shape"])
    if int(np.prod(shape)) != x.size:
        raise ShapeError(f"reshape: cannot view {x.shape} as {shape}")
    return x.reshape(shape), {}


def _reshape_bwd(g, xs, out, saved, attrs):
    return (g.reshape(xs[0].shape),)


def _transpose_fwd(xs: Arrays, attrs: Attrs):
    axes = tuple(int(a) for a in attrs["axes"])
    if sorted(axes) != list(range(xs[0].ndim)):
        raise ShapeError(f"transpose: {axes} is not a permutation of {xs[0].ndim} axes")
    return np.ascontiguousarray(np.transpose(xs[0], axes)), {}


def _transpose_bwd(g, xs, out, saved, attrs):
    axes = tuple(int(a) for a in attrs["axes"])
    return (np.transpose(g, np.argsort(axes)),)


def _slice_fwd(xs: Arrays, attrs: Attrs):
    x = xs[0]
    axis, start, stop = int(attrs["axis"]), int(attrs["start"]), int(attrs["stop"])
    if not 0 <= start < stop <= x.shape[axis]:
        raise ShapeError(
            f"slice: [{start}, {stop}) out of range for axis {axis} of extent {x.shape[axis]}",
            axis=axis,
        )
    index = [slice(None)] * x.ndim
    index[axis] = slice(start, stop)
    return x[tuple(index)], {}


def _slice_bwd(g, xs, out, saved, attrs):
    x = xs[0]
    gx = np.zeros_like(x)
    index = [slice(None)] * x.ndim
    index[int(attrs["axis"])] = slice(int(attrs["start"]), int(attrs["stop"]))
    gx[tuple(index)] = g
    return (gx,)


# --- reductions and losses ---


def _sum_fwd(xs: Arrays, attrs: Attrs):
    return np.array([xs[0].sum()], dtype=xs[0].dtype), {}


def _sum_bwd(g, xs, out, saved, attrs):
    return (np.full_like(xs[0], g.reshape(-1)[0]),)


def _mean_fwd(xs: Arrays, attrs: Attrs):
    return np.array([xs[0].mean()], dtype=xs[0].dtype), {}


def _mean_bwd(g, xs, out, saved, attrs):
    return (np.full_like(xs[0], g.reshape(-1)[0] / xs[0].size),)


def _bce_fwd(xs: Arrays, attrs: Attrs):
    z = xs[0]
    if z.size != 1:
        raise ShapeError(f"bce-with-logits: expects a single logit, got {z.shape}")
    y = float(attrs["target"])
    loss = np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))
    return loss.reshape(1), {}


def _bce_bwd(g, xs, out, saved, attrs):
    z = xs[0]
    prob = 0.5 * (1.0 + np.tanh(0.5 * z))
    return ((prob - float(attrs["target"])) * g.reshape(-1)[0],)


# --- normalization ---


def _group_norm_fwd(xs: Arrays, attrs: Attrs):
    x, gamma, beta = xs
    _require_ndim("group-norm", x, 3, "input")
    channels = x.shape[0]
    groups = int(attrs.get("groups", 8))
    if groups < 1 or channels % groups:
        raise ShapeError(f"group-norm: {groups} groups do not divide {channels} channels", axis=0)
    _require_extent("group-norm", "gamma", 0, gamma.shape[0], channels)
    _require_extent("group-norm", "beta", 0, beta.shape[0], channels)
    eps = float(attrs.get("eps", GROUP_NORM_EPS))
    xg = x.reshape(groups, -1)
    mean = xg.mean(axis=1, keepdims=True)
    var = xg.var(axis=1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = ((xg - mean) * inv_std).reshape(x.shape)
    out = xhat * gamma[:, None, None] + beta[:, None, None]
    return out, {"xhat": xhat, "inv_std": inv_std}


def _group_norm_bwd(g, xs, out, saved, attrs):
    x, gamma, _ = xs
    groups = int(attrs.get("groups", 8))
    xhat, inv_std = saved["xhat"], saved["inv_std"]
    g_gamma = (g * xhat).sum(axis=(1, 2))
    g_beta = g.sum(axis=(1, 2))
    gxhat = (g * gamma[:, None, None]).reshape(groups, -1)
    xhat_g = xhat.reshape(groups, -1)
    m = xhat_g.shape[1]
    gx = (inv_std / m) * (
        m * gxhat
        - gxhat.sum(axis=1, keepdims=True)
        - xhat_g * (gxhat * xhat_g).sum(axis=1, keepdims=True)
    )
    return gx.reshape(x.shape), g_gamma, g_beta


OP_TABLE: Dict[str, OpSpec] = {
    spec.kind: spec
    for spec in (
        OpSpec("add", 2, 2, _add_fwd, _add_bwd),
        OpSpec("mul", 2, 2, _mul_fwd, _mul_bwd),
        OpSpec("scale", 1, 1, _scale_fwd, _scale_bwd),
        OpSpec("matmul", 2, 2, _matmul_fwd, _matmul_bwd),
        OpSpec("conv2d", 2, 3, _conv2d_fwd, _conv2d_bwd),
        OpSpec("depthwise-conv2d", 2, 3, _depthwise_fwd, _depthwise_bwd),
        OpSpec("pointwise-conv2d", 2, 3, _pointwise_fwd, _pointwise_bwd),
        OpSpec("maxpool2d", 1, 1, _maxpool_fwd, _maxpool_bwd),
        OpSpec("global-avg-pool", 1, 1, _gap_fwd, _gap_bwd),
        OpSpec("relu", 1, 1, _relu_fwd, _relu_bwd),
        OpSpec("sigmoid", 1, 1, _sigmoid_fwd, _sigmoid_bwd),
        OpSpec("softmax-last-axis", 1, 1, _softmax_fwd, _softmax_bwd),
        OpSpec("linear", 2, 3, _linear_fwd, _linear_bwd),
        OpSpec("concat-channels", 1, None, _concat_channels_fwd, _concat_channels_bwd),
        OpSpec("concat", 1, None, _concat_fwd, _concat_bwd),
        OpSpec("reshape", 1, 1, _reshape_fwd, _reshape_bwd),
        OpSpec("transpose", 1, 1, _transpose_fwd, _transpose_bwd),
        OpSpec("slice", 1, 1, _slice_fwd, _slice_bwd),
        OpSpec("group-norm", 3, 3, _group_norm_fwd, _group_norm_bwd),
        OpSpec("sum", 1, 1, _sum_fwd, _sum_bwd),
        OpSpec("mean", 1, 1, _mean_fwd, _mean_bwd),
        OpSpec("bce-with-logits", 1, 1, _bce_fwd, _bce_bwd),
    )
}

for _spec in OP_TABLE.values():
    register_backward(_spec.kind, _spec.backward)

OP_KINDS = tuple(OP_TABLE)


def forward(kind: str, inputs: Sequence[Tensor], attrs: Optional[Attrs] = None) -> Tensor:
    """Run one op and record it on the active graph (if any).

    Args:
        kind: One of ``OP_KINDS``.
        inputs: Input tensors; all must share a dtype.
        attrs: Op attributes (kernel/stride/padding, axis, shape, ...).

    Returns:
        A new tensor whose buffer is read-only.
    """
    spec = OP_TABLE.get(kind)
    if spec is None:
        raise ValidationError(f"unknown op kind {kind!r}")
    attrs = dict(attrs or {})
    count = len(inputs)
    if count < spec.min_inputs or (spec.max_inputs is not None and count > spec.max_inputs):
        raise ValidationError(f"{kind}: got {count} inputs")
    dtype = inputs[0].data.dtype
    for t in inputs[1:]:
        if t.data.dtype != dtype:
            raise ValidationError(
                f"{kind}: mixed dtypes {dtype.name} and {t.data.dtype.name}"
            )

    out, saved = spec.forward([t.data for t in inputs], attrs)
    result = Tensor(np.asarray(out, dtype=dtype))
    result.data.flags.writeable = False

    graph = active_graph()
    if graph is not None:
        graph.record(kind, attrs, inputs, saved, result)
    return result
