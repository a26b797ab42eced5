"""Positional-encoding multi-head criss-cross attention.

Each position attends to the H + W - 1 positions sharing its row or its
column. Channels are split into heads with their own 1x1 query/key/value
projections; head outputs are concatenated, projected and added back to
the input scaled by a learnable gamma. Two recurrent passes with shared
weights connect every pair of positions.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from scaresnet.errors import ShapeError, ValidationError
from scaresnet.nn.params import Initializer, ParameterGroup
from scaresnet.tensor import Tensor
from scaresnet.tensor import functional as F

logger = logging.getLogger(__name__)

QK_REDUCTION = 8


@dataclass(frozen=True)
class MHCCAConfig:
    """Hyperparameters of one attention module."""

    channels: int
    heads: int = 4
    qk_channels_per_head: Optional[int] = None
    recurrence: int = 2
    pe_base: float = 10000.0
    residual_scale_init: float = 0.0
    positional_encoding: bool = True

    def __post_init__(self):
        if self.heads < 1 or self.channels < 1 or self.channels % self.heads:
            raise ValidationError(
                f"attention: {self.heads} heads do not divide {self.channels} channels"
            )
        if self.qk_channels_per_head is None:
            object.__setattr__(
                self,
                "qk_channels_per_head",
                max(1, self.channels // (QK_REDUCTION * self.heads)),
            )
        if self.qk_channels_per_head < 1:
            raise ValidationError("attention: qk_channels_per_head must be >= 1")
        if self.recurrence < 1:
            raise ValidationError("attention: recurrence must be >= 1")
        if self.pe_base <= 0:
            raise ValidationError("attention: pe_base must be positive")
        if not np.isfinite(self.residual_scale_init):
            raise ValidationError("attention: residual_scale_init must be finite")
        if self.positional_encoding and self.channels % 4:
            raise ValidationError(
                f"attention: positional encoding needs channels divisible by 4, got {self.channels}"
            )

    @property
    def head_channels(self) -> int:
        return self.channels // self.heads


@dataclass
class HeadWeights(ParameterGroup):
    query_weight: Tensor
    query_bias: Tensor
    key_weight: Tensor
    key_bias: Tensor
    value_weight: Tensor
    value_bias: Tensor


@dataclass
class MHCCAWeights(ParameterGroup):
    heads: List[HeadWeights]
    proj_weight: Tensor
    proj_bias: Tensor
    gamma: Tensor

    @classmethod
    def init(cls, config: MHCCAConfig, init: Initializer) -> "MHCCAWeights":
        c, d = config.head_channels, config.qk_channels_per_head
        heads = [
            HeadWeights(
                query_weight=init.uniform((d, c), fan_in=c),
                query_bias=init.zeros((d,)),
                key_weight=init.uniform((d, c), fan_in=c),
                key_bias=init.zeros((d,)),
                value_weight=init.uniform((c, c), fan_in=c),
                value_bias=init.zeros((c,)),
            )
            for _ in range(config.heads)
        ]
        return cls(
            heads=heads,
            proj_weight=init.uniform((config.channels, config.channels), fan_in=config.channels),
            proj_bias=init.zeros((config.channels,)),
            gamma=init.full((1,), config.residual_scale_init),
        )

    def check(self, config: MHCCAConfig) -> None:
        c, d = config.head_channels, config.qk_channels_per_head
        if len(self.heads) != config.heads:
            raise ShapeError(f"attention: {len(self.heads)} head weight sets for {config.heads} heads")
        expected = {
            "query_weight": (d, c),
            "query_bias": (d,),
            "key_weight": (d, c),
            "key_bias": (d,),
            "value_weight": (c, c),
            "value_bias": (c,),
        }
        for i, head in enumerate(self.heads):
            for name, shape in expected.items():
                got = getattr(head, name).shape
                if got != shape:
                    raise ShapeError(f"attention head {i} {name}: shape {got}, expected {shape}")
        if self.proj_weight.shape != (config.channels, config.channels):
            raise ShapeError(
                f"attention proj_weight: shape {self.proj_weight.shape}, "
                f"expected {(config.channels, config.channels)}"
            )
        if self.gamma.shape != (1,) or not np.all(np.isfinite(self.gamma.data)):
            raise ShapeError("attention gamma must be a finite scalar")


def sinusoidal_pe(
    channels: int,
    height: int,
    width: int,
    pe_base: float = 10000.0,
    dtype="float32",
) -> Tensor:
    """Sine/cosine encoding of row (first half) and column (second half) indices."""
    if channels % 4:
        raise ValidationError(f"positional encoding needs channels divisible by 4, got {channels}")
    half = channels // 2
    exponents = np.arange(0, half, 2, dtype=np.float64) / half
    inv_freq = 1.0 / (pe_base**exponents)
    rows = np.arange(height, dtype=np.float64)[:, None] * inv_freq
    cols = np.arange(width, dtype=np.float64)[:, None] * inv_freq

    pe = np.zeros((channels, height, width), dtype=np.float64)
    pe[0:half:2] = np.sin(rows).T[:, :, None]
    pe[1:half:2] = np.cos(rows).T[:, :, None]
    pe[half::2] = np.sin(cols).T[:, None, :]
    pe[half + 1 :: 2] = np.cos(cols).T[:, None, :]
    return Tensor(pe, dtype=dtype)


def _self_mask(height: int, dtype) -> Tensor:
    """-inf on the diagonal so a position's own entry is counted once (in its row)."""
    mask = np.zeros((height, height))
    np.fill_diagonal(mask, -np.inf)
    return Tensor(mask, dtype=dtype)


def _head_attention(z: Tensor, head: HeadWeights, mask: Tensor):
    """Return (head output c x H x W, attention weights H x W x (H + W))."""
    height = z.shape[1]
    width = z.shape[2]
    q = F.pointwise_conv2d(z, head.query_weight, head.query_bias)
    k = F.pointwise_conv2d(z, head.key_weight, head.key_bias)
    v = F.pointwise_conv2d(z, head.value_weight, head.value_bias)

    # column neighbours: [w, i, i'] -> [i, w, i']
    e_col = F.matmul(F.transpose(q, (2, 1, 0)), F.transpose(k, (2, 0, 1)))
    e_col = F.transpose(F.add(e_col, mask), (1, 0, 2))
    # row neighbours: [i, w, w']
    e_row = F.matmul(F.transpose(q, (1, 2, 0)), F.transpose(k, (1, 0, 2)))

    attn = F.softmax(F.concat([e_col, e_row], axis=2))

    a_col = F.transpose(F.slice_axis(attn, 2, 0, height), (1, 0, 2))
    out_col = F.matmul(a_col, F.transpose(v, (2, 1, 0)))
    out_col = F.transpose(out_col, (2, 1, 0))

    a_row = F.slice_axis(attn, 2, height, height + width)
    out_row = F.matmul(a_row, F.transpose(v, (1, 2, 0)))
    out_row = F.transpose(out_row, (2, 0, 1))

    return F.add(out_col, out_row), attn


def _check_input(x: Tensor, weights: MHCCAWeights, config: MHCCAConfig) -> None:
    if len(x.shape) != 3:
        raise ShapeError(f"attention expects a C x H x W map, got {x.shape}")
    if x.shape[0] != config.channels:
        raise ShapeError(
            f"attention axis 0: {x.shape[0]} channels, config expects {config.channels}",
            axis=0,
        )
    weights.check(config)


def criss_cross_step(
    x: Tensor,
    weights: MHCCAWeights,
    config: MHCCAConfig,
    encoding: Optional[Tensor] = None,
) -> Tensor:
    """One criss-cross pass: x + gamma * proj(concat_heads(attention)).

    ``encoding`` is added to the attention input only; the residual
    carries ``x`` unchanged.
    """
    _check_input(x, weights, config)
    z = x if encoding is None else F.add(x, encoding)
    mask = _self_mask(x.shape[1], x.dtype)
    c = config.head_channels
    outputs = []
    for h, head in enumerate(weights.heads):
        z_head = F.slice_axis(z, 0, h * c, (h + 1) * c)
        out, _ = _head_attention(z_head, head, mask)
        outputs.append(out)
    merged = F.concat(outputs, axis=0) if len(outputs) > 1 else outputs[0]
    projected = F.pointwise_conv2d(merged, weights.proj_weight, weights.proj_bias)
    return F.add(x, F.mul(projected, weights.gamma))


def criss_cross_attention_maps(
    x: Tensor,
    weights: MHCCAWeights,
    config: MHCCAConfig,
    encoding: Optional[Tensor] = None,
) -> np.ndarray:
    """Per-head attention weights over the de-duplicated criss-cross set.

    Returns an array N x H x W x (H + W - 1): for position (i, j) the
    first H - 1 entries are the other rows of column j, the last W entries
    are the columns of row i.
    """
    _check_input(x, weights, config)
    height, width = x.shape[1], x.shape[2]
    z = x if encoding is None else F.add(x, encoding)
    mask = _self_mask(height, x.dtype)
    keep = np.ones((height, width, height + width), dtype=bool)
    keep[np.arange(height), :, np.arange(height)] = False
    c = config.head_channels
    maps = []
    for h, head in enumerate(weights.heads):
        z_head = F.slice_axis(z, 0, h * c, (h + 1) * c)
        _, attn = _head_attention(z_head, head, mask)
        maps.append(attn.data[keep].reshape(height, width, height + width - 1))
    return np.stack(maps)


def mhcca_forward(
    x: Tensor,
    weights: MHCCAWeights,
    config: MHCCAConfig,
    encoding: Optional[Tensor] = None,
) -> Tensor:
    """Positional encoding, then ``config.recurrence`` criss-cross passes with shared weights.

    The encoding enters the first pass only. When ``encoding`` is None and
    ``config.positional_encoding`` is set, the sinusoidal encoding is used.
    """
    if encoding is None and config.positional_encoding:
        encoding = sinusoidal_pe(
            config.channels, x.shape[1], x.shape[2], config.pe_base, dtype=x.dtype
        )
    y = x
    for step in range(config.recurrence):
        y = criss_cross_step(y, weights, config, encoding if step == 0 else None)
    return y
