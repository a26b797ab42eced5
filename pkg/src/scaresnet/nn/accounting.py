"""Closed-form parameter and multiply-add counts, plus the report types.

One multiply-add (MAC) is one multiplication accumulated into an output.
Normalization, pooling, activations and elementwise gating are counted as
zero MACs.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from scaresnet.nn.attention import MHCCAConfig

Shape = Tuple[int, ...]

PRE_SPPR = "pre_sppr"
POST_SPPR = "post_sppr"


def conv_params(c_in: int, c_out: int, kernel: int, bias: bool = False) -> int:
    return c_out * c_in * kernel * kernel + (c_out if bias else 0)


def conv_mult_adds(c_in: int, c_out: int, kernel: int, out_h: int, out_w: int) -> int:
    return c_out * c_in * kernel * kernel * out_h * out_w


def depthwise_params(channels: int, kernel: int) -> int:
    return channels * kernel * kernel


def depthwise_mult_adds(channels: int, kernel: int, out_h: int, out_w: int) -> int:
    return channels * kernel * kernel * out_h * out_w


def pointwise_params(c_in: int, c_out: int, bias: bool = True) -> int:
    return c_in * c_out + (c_out if bias else 0)


def pointwise_mult_adds(c_in: int, c_out: int, height: int, width: int) -> int:
    return c_in * c_out * height * width


def linear_params(n_in: int, n_out: int, bias: bool = True) -> int:
    return n_in * n_out + (n_out if bias else 0)


def linear_mult_adds(n_in: int, n_out: int) -> int:
    return n_in * n_out


def norm_params(channels: int) -> int:
    return 2 * channels


def dseconv_param_count(c_in: int, c_out: int, kernel: int) -> int:
    """Depthwise plus pointwise weights of a DSEConv (no biases, no SE)."""
    return depthwise_params(c_in, kernel) + c_in * c_out


def plain_conv_param_count(c_in: int, c_out: int, kernel: int) -> int:
    """Weights of the k x k convolution a DSEConv replaces."""
    return conv_params(c_in, c_out, kernel)


def attention_params(config: MHCCAConfig) -> int:
    c, d = config.head_channels, config.qk_channels_per_head
    per_head = 2 * (d * c + d) + c * c + c
    return config.heads * per_head + config.channels * config.channels + config.channels + 1


def attention_mult_adds(config: MHCCAConfig, height: int, width: int) -> int:
    """Projections, row/column energies and aggregation, repeated per recurrent step."""
    c, d = config.head_channels, config.qk_channels_per_head
    positions = height * width
    cross = height + width
    per_head = (2 * d * c + c * c) * positions + positions * cross * (d + c)
    per_step = config.heads * per_head + config.channels * config.channels * positions
    return config.recurrence * per_step


@dataclass(frozen=True)
class LayerCount:
    """Counts for one weight-carrying (or pooling) layer."""

    name: str
    kind: str
    phase: str
    params: int
    mult_adds: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "kind": self.kind,
            "phase": self.phase,
            "params": self.params,
            "mult_adds": self.mult_adds,
        }


@dataclass(frozen=True)
class TraceRow:
    layer: str
    input_shape: Shape
    output_shape: Shape
    params: int
    mult_adds: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "layer": self.layer,
            "input_shape": list(self.input_shape),
            "output_shape": list(self.output_shape),
            "params": self.params,
            "mult_adds": self.mult_adds,
        }


@dataclass
class ShapeTrace:
    """Per-block shapes and counts; ``rows`` chain input to output."""

    rows: List[TraceRow] = field(default_factory=list)

    @property
    def total_params(self) -> int:
        return sum(r.params for r in self.rows)

    @property
    def total_mult_adds(self) -> int:
        return sum(r.mult_adds for r in self.rows)

    def total_row(self) -> TraceRow:
        return TraceRow(
            layer="total",
            input_shape=self.rows[0].input_shape,
            output_shape=self.rows[-1].output_shape,
            params=self.total_params,
            mult_adds=self.total_mult_adds,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"rows": [r.to_dict() for r in self.rows] + [self.total_row().to_dict()]}


@dataclass
class PlainComparison:
    """DSEConv layers against plain k x k convolutions of the same channels."""

    dse_params: int
    plain_params: int
    dse_mult_adds: int
    plain_mult_adds: int
    network_params: int
    network_mult_adds: int

    @property
    def ratio(self) -> float:
        return self.dse_params / self.plain_params if self.plain_params else 1.0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "dse_params": self.dse_params,
            "plain_params": self.plain_params,
            "ratio": self.ratio,
            "dse_mult_adds": self.dse_mult_adds,
            "plain_mult_adds": self.plain_mult_adds,
            "plain_network_params": self.network_params,
            "plain_network_mult_adds": self.network_mult_adds,
        }


@dataclass
class ParamCountReport:
    preset: str
    input_shape: Shape
    layers: List[LayerCount]
    plain: Optional[PlainComparison] = None

    @property
    def total_params(self) -> int:
        return sum(layer.params for layer in self.layers)

    @property
    def total_mult_adds(self) -> int:
        return sum(layer.mult_adds for layer in self.layers)

    def phase_mult_adds(self, phase: str, kinds: Tuple[str, ...] = ()) -> int:
        return sum(
            layer.mult_adds
            for layer in self.layers
            if layer.phase == phase and (not kinds or layer.kind in kinds)
        )

    def to_dict(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "preset": self.preset,
            "input_shape": list(self.input_shape),
            "total_params": self.total_params,
            "total_mult_adds": self.total_mult_adds,
            "layers": [layer.to_dict() for layer in self.layers],
        }
        if self.plain is not None:
            doc["compare_plain"] = self.plain.to_dict()
        return doc
