"""SPPR reshape layer and the SPPRCSP block around it.

SPPR max-pools a map to each level x, y, z (largest first), flattens each
pooled map per channel, concatenates and reshapes the x^2 + y^2 + z^2
values into a w x w map, so the output size no longer depends on the
input size.
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from scaresnet.errors import InputSizeError, ShapeError, ValidationError
from scaresnet.nn.params import Initializer, ParameterGroup
from scaresnet.sppr import (
    DEFAULT_LEVELS,
    Interpretation,
    LevelQuadruple,
    pooling_plan,
    resolve_interpretation,
)
from scaresnet.tensor import Tensor
from scaresnet.tensor import functional as F

logger = logging.getLogger(__name__)

# sigmoid(1e3) is exactly 1.0 in float32 and float64
IDENTITY_GATE_LOGIT = 1e3


@dataclass(frozen=True)
class SPPRConfig:
    levels: LevelQuadruple = DEFAULT_LEVELS
    interpretation: Interpretation = Interpretation.LITERAL

    def __post_init__(self):
        object.__setattr__(self, "interpretation", resolve_interpretation(self.interpretation))

    @property
    def min_extent(self) -> int:
        return self.levels.max_level


@dataclass(frozen=True)
class SPPRCSPConfig:
    """SPPRCSP hyperparameters. ``in_channels`` is filled in by the backbone."""

    c_out: int
    levels: LevelQuadruple = DEFAULT_LEVELS
    interpretation: Interpretation = Interpretation.LITERAL
    se_ratio: int = 16
    dse_kernel: int = 3
    dse_before: bool = True
    dse_after: bool = True
    in_channels: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "interpretation", resolve_interpretation(self.interpretation))
        if self.c_out < 1:
            raise ValidationError(f"spprcsp: c_out must be >= 1, got {self.c_out}")
        if self.se_ratio < 1:
            raise ValidationError(f"spprcsp: se_ratio must be >= 1, got {self.se_ratio}")
        if self.dse_kernel < 1 or self.dse_kernel % 2 == 0:
            raise ValidationError(
                f"spprcsp: dse_kernel must be odd and positive, got {self.dse_kernel}"
            )
        if self.in_channels is not None and (self.in_channels < 2 or self.in_channels % 2):
            raise ValidationError(
                f"spprcsp: in_channels must be even (split into two branches), got {self.in_channels}"
            )

    @property
    def sppr(self) -> SPPRConfig:
        return SPPRConfig(self.levels, self.interpretation)


# --- squeeze and excitation ---


@dataclass
class SEWeights(ParameterGroup):
    fc1_weight: Tensor
    fc1_bias: Tensor
    fc2_weight: Tensor
    fc2_bias: Tensor

    @classmethod
    def init(cls, channels: int, ratio: int, init: Initializer) -> "SEWeights":
        hidden = se_hidden(channels, ratio)
        return cls(
            fc1_weight=init.uniform((hidden, channels), fan_in=channels),
            fc1_bias=init.zeros((hidden,)),
            fc2_weight=init.uniform((channels, hidden), fan_in=hidden),
            fc2_bias=init.zeros((channels,)),
        )

    def force_identity(self) -> "SEWeights":
        """Zero the bottleneck and saturate the gate logits so every gate is exactly 1."""
        for tensor in (self.fc1_weight, self.fc1_bias, self.fc2_weight):
            tensor.data = np.zeros_like(tensor.data)
        self.fc2_bias.data = np.full_like(self.fc2_bias.data, IDENTITY_GATE_LOGIT)
        return self


def se_hidden(channels: int, ratio: int) -> int:
    return max(1, channels // ratio)


def se_forward(x: Tensor, weights: SEWeights) -> Tensor:
    """Scale each channel by a gate in (0, 1) computed from its spatial mean."""
    if len(x.shape) != 3:
        raise ShapeError(f"se expects a C x H x W map, got {x.shape}")
    channels = x.shape[0]
    if weights.fc1_weight.shape[1] != channels or weights.fc2_weight.shape[0] != channels:
        raise ShapeError(
            f"se axis 0: {channels} channels, weights expect "
            f"{weights.fc1_weight.shape[1]} -> {weights.fc2_weight.shape[0]}",
            axis=0,
        )
    squeezed = F.global_avg_pool(x)
    hidden = F.relu(F.linear(squeezed, weights.fc1_weight, weights.fc1_bias))
    gates = F.sigmoid(F.linear(hidden, weights.fc2_weight, weights.fc2_bias))
    return F.mul(x, F.reshape(gates, (channels, 1, 1)))


# --- depthwise-separable convolution with SE ---


@dataclass
class DSEConvWeights(ParameterGroup):
    depthwise: Tensor
    pointwise: Tensor
    pointwise_bias: Tensor
    se: SEWeights

    @classmethod
    def init(
        cls, c_in: int, c_out: int, kernel: int, se_ratio: int, init: Initializer
    ) -> "DSEConvWeights":
        return cls(
            depthwise=init.kaiming((c_in, 1, kernel, kernel), fan_in=kernel * kernel),
            pointwise=init.kaiming((c_out, c_in), fan_in=c_in),
            pointwise_bias=init.zeros((c_out,)),
            se=SEWeights.init(c_out, se_ratio, init),
        )

    @property
    def kernel(self) -> int:
        return self.depthwise.shape[2]


def dseconv_forward(
    x: Tensor,
    weights: DSEConvWeights,
    stride: int = 1,
    padding: Optional[int] = None,
) -> Tensor:
    """Depthwise k x k, pointwise 1 x 1, then squeeze-and-excitation.

    ``padding`` defaults to k // 2 (shape preserving at stride 1).
    """
    if padding is None:
        padding = weights.kernel // 2
    y = F.depthwise_conv2d(x, weights.depthwise, stride=stride, padding=padding)
    y = F.pointwise_conv2d(y, weights.pointwise, weights.pointwise_bias)
    return se_forward(y, weights.se)


# --- SPPR ---


def _check_sppr_input(shape, config: SPPRConfig) -> None:
    if len(shape) != 3:
        raise ShapeError(f"sppr expects a C x H x W map, got {shape}")
    for axis in (1, 2):
        if shape[axis] < config.min_extent:
            raise InputSizeError(
                f"sppr axis {axis}: extent {shape[axis]} is below the largest level "
                f"{config.min_extent}",
                minimum=config.min_extent,
            )


def sppr_forward(x: Tensor, config: SPPRConfig = SPPRConfig()) -> Tensor:
    """Pool to every level, flatten, concatenate (largest level first), reshape to w x w."""
    _check_sppr_input(x.shape, config)
    channels, height, width = x.shape
    pieces = []
    for level, ph, pw in pooling_plan(height, width, config.levels.levels, config.interpretation):
        pooled = F.maxpool2d(
            x,
            kernel=(ph.kernel, pw.kernel),
            stride=(ph.stride, pw.stride),
            padding=(ph.padding, pw.padding),
        )
        pieces.append(F.reshape(pooled, (channels, level * level)))
    flat = F.concat(pieces, axis=1)
    w = config.levels.w
    return F.reshape(flat, (channels, w, w))


def sppr_oracle(
    x: np.ndarray,
    levels: LevelQuadruple = DEFAULT_LEVELS,
    interpretation: Interpretation = Interpretation.LITERAL,
) -> np.ndarray:
    """Explicit-loop SPPR used as a reference for ``sppr_forward``."""
    config = SPPRConfig(levels, interpretation)
    _check_sppr_input(x.shape, config)
    channels, height, width = x.shape
    flat = []
    for c in range(channels):
        values = []
        for level, ph, pw in pooling_plan(height, width, config.levels.levels, config.interpretation):
            for oi in range(level):
                r0 = oi * ph.stride - ph.padding
                rows = range(max(r0, 0), min(r0 + ph.kernel, height))
                for oj in range(level):
                    c0 = oj * pw.stride - pw.padding
                    cols = range(max(c0, 0), min(c0 + pw.kernel, width))
                    best = -np.inf
                    for r in rows:
                        for col in cols:
                            if x[c, r, col] > best:
                                best = x[c, r, col]
                    values.append(best)
        flat.append(values)
    w = config.levels.w
    return np.asarray(flat, dtype=x.dtype).reshape(channels, w, w)


# --- SPPRCSP ---


@dataclass
class SPPRCSPWeights(ParameterGroup):
    compress_main: Tensor
    compress_main_bias: Tensor
    compress_skip: Tensor
    compress_skip_bias: Tensor
    fuse: Tensor
    fuse_bias: Tensor
    dse_before: Optional[DSEConvWeights] = None
    dse_after: Optional[DSEConvWeights] = None

    @classmethod
    def init(
        cls, in_channels: int, config: SPPRCSPConfig, init: Initializer
    ) -> "SPPRCSPWeights":
        if in_channels < 2 or in_channels % 2:
            raise ValidationError(f"spprcsp: in_channels must be even, got {in_channels}")
        half = in_channels // 2
        compress_main = init.kaiming((half, in_channels), fan_in=in_channels)
        compress_main_bias = init.zeros((half,))
        compress_skip = init.kaiming((half, in_channels), fan_in=in_channels)
        compress_skip_bias = init.zeros((half,))
        dse_before = (
            DSEConvWeights.init(half, half, config.dse_kernel, config.se_ratio, init)
            if config.dse_before
            else None
        )
        dse_after = (
            DSEConvWeights.init(half, half, config.dse_kernel, config.se_ratio, init)
            if config.dse_after
            else None
        )
        return cls(
            compress_main=compress_main,
            compress_main_bias=compress_main_bias,
            compress_skip=compress_skip,
            compress_skip_bias=compress_skip_bias,
            fuse=init.kaiming((config.c_out, in_channels), fan_in=in_channels),
            fuse_bias=init.zeros((config.c_out,)),
            dse_before=dse_before,
            dse_after=dse_after,
        )

    @property
    def in_channels(self) -> int:
        return self.compress_main.shape[1]

    def force_identity_se(self) -> "SPPRCSPWeights":
        """Fix the SE gate of every DSEConv at 1."""
        for dse in (self.dse_before, self.dse_after):
            if dse is not None:
                dse.se.force_identity()
        return self


def spprcsp_forward(x: Tensor, weights: SPPRCSPWeights, config: SPPRCSPConfig) -> Tensor:
    """Main branch (compress, DSEConv, SPPR, DSEConv) and skip branch (compress, SPPR), fused."""
    if len(x.shape) != 3 or x.shape[0] != weights.in_channels:
        raise ShapeError(
            f"spprcsp axis 0: input {x.shape}, weights expect {weights.in_channels} channels",
            axis=0,
        )
    sppr = config.sppr
    _check_sppr_input(x.shape, sppr)

    main = F.pointwise_conv2d(x, weights.compress_main, weights.compress_main_bias)
    if weights.dse_before is not None:
        main = dseconv_forward(main, weights.dse_before)
    main = sppr_forward(main, sppr)
    if weights.dse_after is not None:
        main = dseconv_forward(main, weights.dse_after)

    skip = F.pointwise_conv2d(x, weights.compress_skip, weights.compress_skip_bias)
    skip = sppr_forward(skip, sppr)

    merged = F.concat([main, skip], axis=0)
    return F.pointwise_conv2d(merged, weights.fuse, weights.fuse_bias)
