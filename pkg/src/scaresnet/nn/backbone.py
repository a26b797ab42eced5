"""ResNet-style backbone with criss-cross attention and a terminal SPPRCSP.

Inputs of any size at or above the preset minimum are processed one sample
at a time without resizing; the SPPRCSP block at the end always emits a
C_out x w x w map.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Tuple, Union

from scaresnet.errors import InputSizeError, ShapeError, ValidationError
from scaresnet.nn.accounting import (
    POST_SPPR,
    PRE_SPPR,
    LayerCount,
    ParamCountReport,
    PlainComparison,
    ShapeTrace,
    TraceRow,
    attention_mult_adds,
    attention_params,
    conv_mult_adds,
    conv_params,
    depthwise_mult_adds,
    depthwise_params,
    dseconv_param_count,
    linear_mult_adds,
    linear_params,
    norm_params,
    plain_conv_param_count,
    pointwise_mult_adds,
    pointwise_params,
)
from scaresnet.nn.attention import MHCCAConfig, MHCCAWeights, mhcca_forward
from scaresnet.nn.params import Initializer, ParameterGroup
from scaresnet.nn.spprcsp import (
    SPPRCSPConfig,
    SPPRCSPWeights,
    se_hidden,
    spprcsp_forward,
)
from scaresnet.sppr import DEFAULT_LEVELS, level_quadruple
from scaresnet.tensor import DType, Tensor, output_extent
from scaresnet.tensor import functional as F

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]

PRESETS = ("mini", "scaresnet-50")


class BlockType(str, Enum):
    BASIC = "basic"
    BOTTLENECK = "bottleneck"


@dataclass(frozen=True)
class StemSpec:
    kernel: int = 3
    stride: int = 2
    out_channels: int = 16
    pool: bool = False


@dataclass(frozen=True)
class StageSpec:
    blocks: int
    block_type: BlockType
    out_channels: int
    stride: int

    def __post_init__(self):
        object.__setattr__(self, "block_type", BlockType(self.block_type))


@dataclass(frozen=True)
class AttentionSettings:
    """Attention hyperparameters shared by every insertion point."""

    heads: int = 4
    qk_channels_per_head: Optional[int] = None
    recurrence: int = 2
    pe_base: float = 10000.0
    positional_encoding: bool = True
    residual_scale_init: float = 0.0

    def for_channels(self, channels: int) -> MHCCAConfig:
        return MHCCAConfig(
            channels=channels,
            heads=self.heads,
            qk_channels_per_head=self.qk_channels_per_head,
            recurrence=self.recurrence,
            pe_base=self.pe_base,
            residual_scale_init=self.residual_scale_init,
            positional_encoding=self.positional_encoding,
        )


class ConvSpec(NamedTuple):
    c_in: int
    c_out: int
    kernel: int
    stride: int
    padding: int


@dataclass(frozen=True)
class BackboneConfig:
    stem: StemSpec
    stages: Tuple[StageSpec, ...]
    spprcsp: SPPRCSPConfig
    cca_insert_after: Tuple[int, ...] = ()
    cca: AttentionSettings = AttentionSettings()
    preset: str = "mini"
    group_norm_groups: int = 8
    in_channels: int = 3
    use_spprcsp: bool = True

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        insert = self.cca_insert_after
        if isinstance(insert, int):
            insert = (insert,)
        object.__setattr__(self, "cca_insert_after", tuple(sorted(set(insert))))
        self._validate()
        if self.spprcsp.in_channels is None:
            try:
                wired = replace(self.spprcsp, in_channels=self.stages[-1].out_channels)
            except ValidationError as e:
                raise ValidationError(f"spprcsp after stage{len(self.stages) - 1}: {e}") from e
            object.__setattr__(self, "spprcsp", wired)
        elif self.spprcsp.in_channels != self.stages[-1].out_channels:
            raise ValidationError(
                f"spprcsp: in_channels {self.spprcsp.in_channels} does not match "
                f"stage{len(self.stages) - 1} output channels {self.stages[-1].out_channels}"
            )

    def _validate(self) -> None:
        if self.preset not in PRESETS:
            raise ValidationError(f"unknown preset {self.preset!r}; choose from {PRESETS}")
        if self.in_channels < 1:
            raise ValidationError(f"input: in_channels must be >= 1, got {self.in_channels}")
        if self.group_norm_groups < 1:
            raise ValidationError("group_norm_groups must be >= 1")
        stem = self.stem
        if stem.kernel < 1 or stem.stride < 1 or stem.out_channels < 1:
            raise ValidationError(f"stem: kernel, stride and out_channels must be >= 1: {stem}")
        if not self.stages:
            raise ValidationError("backbone needs at least one stage")
        for i, stage in enumerate(self.stages):
            if stage.blocks < 1:
                raise ValidationError(f"stage{i}: block count must be >= 1, got {stage.blocks}")
            if stage.stride < 1 or stage.out_channels < 1:
                raise ValidationError(f"stage{i}: stride and out_channels must be >= 1")
            if stage.block_type is BlockType.BOTTLENECK and stage.out_channels % 4:
                raise ValidationError(
                    f"stage{i}: bottleneck out_channels {stage.out_channels} is not divisible by 4"
                )
        for index in self.cca_insert_after:
            if not 0 <= index < len(self.stages):
                raise ValidationError(
                    f"cca@stage{index}: insertion point outside stages 0..{len(self.stages) - 1}"
                )
            try:
                self.cca.for_channels(self.stages[index].out_channels)
            except ValidationError as e:
                raise ValidationError(f"cca@stage{index}: {e}") from e

    @property
    def cumulative_stride(self) -> int:
        stride = self.stem.stride * (2 if self.stem.pool else 1)
        for stage in self.stages:
            stride *= stage.stride
        return stride

    @property
    def out_channels(self) -> int:
        return self.spprcsp.c_out if self.use_spprcsp else self.stages[-1].out_channels

    @property
    def output_extent(self) -> Optional[int]:
        """Side of the unified output map; None when the SPPRCSP block is left out."""
        return self.spprcsp.levels.w if self.use_spprcsp else None

    def attention_config(self, stage_index: int) -> MHCCAConfig:
        return self.cca.for_channels(self.stages[stage_index].out_channels)

    def to_dict(self) -> Dict[str, Any]:
        levels = self.spprcsp.levels
        return {
            "preset": self.preset,
            "in_channels": self.in_channels,
            "stem": {
                "kernel": self.stem.kernel,
                "stride": self.stem.stride,
                "out_channels": self.stem.out_channels,
                "pool": self.stem.pool,
            },
            "stages": [
                {
                    "blocks": s.blocks,
                    "block_type": s.block_type.value,
                    "out_channels": s.out_channels,
                    "stride": s.stride,
                }
                for s in self.stages
            ],
            "cca_insert_after": list(self.cca_insert_after),
            "heads": self.cca.heads,
            "qk_channels_per_head": self.cca.qk_channels_per_head,
            "recurrence": self.cca.recurrence,
            "pe_base": self.cca.pe_base,
            "positional_encoding": self.cca.positional_encoding,
            "residual_scale_init": self.cca.residual_scale_init,
            "levels": [levels.x, levels.y, levels.z, levels.w],
            "interpretation": self.spprcsp.interpretation.value,
            "se_ratio": self.spprcsp.se_ratio,
            "dse_kernel": self.spprcsp.dse_kernel,
            "c_out": self.spprcsp.c_out,
            "dse_before": self.spprcsp.dse_before,
            "dse_after": self.spprcsp.dse_after,
            "use_spprcsp": self.use_spprcsp,
            "group_norm_groups": self.group_norm_groups,
        }

    @classmethod
    def from_dict(
        cls, doc: Mapping[str, Any], base: Optional["BackboneConfig"] = None
    ) -> "BackboneConfig":
        """Build a config from a JSON document.

        Keys missing from ``doc`` come from ``base`` or, failing that, from
        the preset named in ``doc`` (``mini`` when absent).
        """
        unknown = sorted(set(doc) - CONFIG_KEYS)
        if unknown:
            raise ValidationError(f"unknown config keys: {unknown}")
        if base is None or ("preset" in doc and doc["preset"] != base.preset):
            base = preset_config(doc.get("preset", base.preset if base else "mini"))
        full = base.to_dict()
        full.update(doc)
        try:
            return cls._from_full(full)
        except (KeyError, TypeError) as e:
            raise ValidationError(f"malformed config document: {e}") from e

    @classmethod
    def _from_full(cls, doc: Mapping[str, Any]) -> "BackboneConfig":
        levels = doc["levels"]
        if len(levels) != 4:
            raise ValidationError(f"levels must be [x, y, z, w], got {levels}")
        try:
            stages = tuple(StageSpec(**s) for s in doc["stages"])
        except ValueError as e:
            raise ValidationError(f"stages: {e}") from e
        return cls(
            stem=StemSpec(**doc["stem"]),
            stages=stages,
            spprcsp=SPPRCSPConfig(
                c_out=int(doc["c_out"]),
                levels=level_quadruple(*(int(v) for v in levels)),
                interpretation=doc["interpretation"],
                se_ratio=int(doc["se_ratio"]),
                dse_kernel=int(doc["dse_kernel"]),
                dse_before=bool(doc["dse_before"]),
                dse_after=bool(doc["dse_after"]),
            ),
            cca_insert_after=doc["cca_insert_after"],
            cca=AttentionSettings(
                heads=int(doc["heads"]),
                qk_channels_per_head=doc["qk_channels_per_head"],
                recurrence=int(doc["recurrence"]),
                pe_base=float(doc["pe_base"]),
                positional_encoding=bool(doc["positional_encoding"]),
                residual_scale_init=float(doc["residual_scale_init"]),
            ),
            preset=doc["preset"],
            group_norm_groups=int(doc["group_norm_groups"]),
            in_channels=int(doc["in_channels"]),
            use_spprcsp=bool(doc["use_spprcsp"]),
        )


CONFIG_KEYS = frozenset(
    {
        "preset",
        "in_channels",
        "stem",
        "stages",
        "cca_insert_after",
        "heads",
        "qk_channels_per_head",
        "recurrence",
        "pe_base",
        "positional_encoding",
        "residual_scale_init",
        "levels",
        "interpretation",
        "se_ratio",
        "dse_kernel",
        "c_out",
        "dse_before",
        "dse_after",
        "use_spprcsp",
        "group_norm_groups",
    }
)


def preset_config(name: str) -> BackboneConfig:
    """``mini``: two basic stages, total stride 8. ``scaresnet-50``: bottleneck (3, 4, 6, 3)."""
    if name == "mini":
        return BackboneConfig(
            stem=StemSpec(kernel=3, stride=2, out_channels=16),
            stages=(
                StageSpec(1, BlockType.BASIC, 32, 2),
                StageSpec(1, BlockType.BASIC, 64, 2),
            ),
            spprcsp=SPPRCSPConfig(c_out=64, levels=DEFAULT_LEVELS),
            cca_insert_after=(0,),
            preset="mini",
        )
    if name == "scaresnet-50":
        return BackboneConfig(
            stem=StemSpec(kernel=7, stride=2, out_channels=64, pool=True),
            stages=(
                StageSpec(3, BlockType.BOTTLENECK, 256, 1),
                StageSpec(4, BlockType.BOTTLENECK, 512, 2),
                StageSpec(6, BlockType.BOTTLENECK, 1024, 2),
                StageSpec(3, BlockType.BOTTLENECK, 2048, 2),
            ),
            spprcsp=SPPRCSPConfig(c_out=2048, levels=DEFAULT_LEVELS),
            cca_insert_after=(2,),
            preset="scaresnet-50",
        )
    raise ValidationError(f"unknown preset {name!r}; choose from {PRESETS}")


# --- layer layout ---


STEM_POOL = ConvSpec(0, 0, 3, 2, 1)


def norm_groups(groups: int, channels: int) -> int:
    return math.gcd(groups, channels)


def stem_spec(config: BackboneConfig) -> ConvSpec:
    s = config.stem
    return ConvSpec(config.in_channels, s.out_channels, s.kernel, s.stride, s.kernel // 2)


def block_specs(
    block_type: BlockType, c_in: int, c_out: int, stride: int
) -> Tuple[List[ConvSpec], Optional[ConvSpec]]:
    """Main-path convolutions and the projection shortcut (None for identity)."""
    if block_type is BlockType.BASIC:
        main = [ConvSpec(c_in, c_out, 3, stride, 1), ConvSpec(c_out, c_out, 3, 1, 1)]
    else:
        width = c_out // 4
        main = [
            ConvSpec(c_in, width, 1, 1, 0),
            ConvSpec(width, width, 3, stride, 1),
            ConvSpec(width, c_out, 1, 1, 0),
        ]
    shortcut = ConvSpec(c_in, c_out, 1, stride, 0) if stride != 1 or c_in != c_out else None
    return main, shortcut


def iter_blocks(config: BackboneConfig):
    """Yield (stage index, block index, name, main specs, shortcut spec)."""
    c_in = config.stem.out_channels
    for i, stage in enumerate(config.stages):
        for j in range(stage.blocks):
            stride = stage.stride if j == 0 else 1
            main, shortcut = block_specs(stage.block_type, c_in, stage.out_channels, stride)
            yield i, j, f"stage{i}.block{j}", main, shortcut
            c_in = stage.out_channels


def _conv_extent(extent: Tuple[int, int], spec: ConvSpec) -> Tuple[int, int]:
    return (
        output_extent(extent[0], spec.kernel, spec.stride, spec.padding, axis=1),
        output_extent(extent[1], spec.kernel, spec.stride, spec.padding, axis=2),
    )


def _pre_sppr_extent(config: BackboneConfig, height: int, width: int) -> Tuple[int, int]:
    extent = _conv_extent((height, width), stem_spec(config))
    if config.stem.pool:
        extent = _conv_extent(extent, STEM_POOL)
    for _, _, _, main, _ in iter_blocks(config):
        for spec in main:
            extent = _conv_extent(extent, spec)
    return extent


def minimum_input_size(config: BackboneConfig) -> int:
    """Smallest multiple of the cumulative stride whose pre-SPPR extent reaches the largest level.

    Without the SPPRCSP block any input the convolutions accept will do.
    """
    stride = config.cumulative_stride
    target = config.spprcsp.levels.max_level if config.use_spprcsp else 1
    for k in range(1, 4 * target + 2):
        size = k * stride
        try:
            extent = _pre_sppr_extent(config, size, size)[0]
        except ShapeError:
            continue
        if extent >= target:
            return size
    raise ValidationError(f"no input size up to {size} reaches level {target}")


def check_input_size(config: BackboneConfig, height: int, width: int) -> None:
    minimum = minimum_input_size(config)
    if height < minimum or width < minimum:
        raise InputSizeError(
            f"input {height}x{width} is below the minimum {minimum}x{minimum} "
            f"for preset {config.preset}",
            minimum=minimum,
        )


# --- weights ---


@dataclass
class ConvNorm(ParameterGroup):
    weight: Tensor
    gamma: Tensor
    beta: Tensor

    @classmethod
    def init(cls, spec: ConvSpec, init: Initializer) -> "ConvNorm":
        return cls(
            weight=init.uniform(
                (spec.c_out, spec.c_in, spec.kernel, spec.kernel),
                fan_in=spec.c_in * spec.kernel * spec.kernel,
            ),
            gamma=init.ones((spec.c_out,)),
            beta=init.zeros((spec.c_out,)),
        )


@dataclass
class BlockWeights(ParameterGroup):
    convs: List[ConvNorm]
    shortcut: Optional[ConvNorm] = None


@dataclass
class BackboneWeights(ParameterGroup):
    stem: ConvNorm
    stages: List[List[BlockWeights]]
    spprcsp: Optional[SPPRCSPWeights]
    cca: Dict[str, MHCCAWeights] = field(default_factory=dict)

    def force_identity_se(self) -> "BackboneWeights":
        if self.spprcsp is not None:
            self.spprcsp.force_identity_se()
        return self


def build_scaresnet(
    config: BackboneConfig, seed: int = 0, dtype: Union[DType, str] = DType.FLOAT32
) -> BackboneWeights:
    """Seeded weights in forward order: stem, blocks (with attention after its stage), SPPRCSP."""
    init = Initializer(seed, dtype)
    stem = ConvNorm.init(stem_spec(config), init)
    stages: List[List[BlockWeights]] = [[] for _ in config.stages]
    cca: Dict[str, MHCCAWeights] = {}
    for i, j, _, main, shortcut in iter_blocks(config):
        stages[i].append(
            BlockWeights(
                convs=[ConvNorm.init(spec, init) for spec in main],
                shortcut=ConvNorm.init(shortcut, init) if shortcut is not None else None,
            )
        )
        if j == config.stages[i].blocks - 1 and i in config.cca_insert_after:
            cca[f"stage{i}"] = MHCCAWeights.init(config.attention_config(i), init)
    spprcsp = (
        SPPRCSPWeights.init(config.stages[-1].out_channels, config.spprcsp, init)
        if config.use_spprcsp
        else None
    )
    weights = BackboneWeights(stem=stem, stages=stages, spprcsp=spprcsp, cca=cca)
    logger.debug(
        f"built {config.preset} backbone: seed={seed}, {weights.num_parameters()} parameters"
    )
    return weights


# --- forward ---


def _conv_norm(x: Tensor, weights: ConvNorm, spec: ConvSpec, groups: int, relu: bool) -> Tensor:
    y = F.conv2d(x, weights.weight, stride=spec.stride, padding=spec.padding)
    y = F.group_norm(y, weights.gamma, weights.beta, groups=norm_groups(groups, spec.c_out))
    return F.relu(y) if relu else y


def _block_forward(
    x: Tensor,
    weights: BlockWeights,
    main: List[ConvSpec],
    shortcut: Optional[ConvSpec],
    groups: int,
) -> Tensor:
    y = x
    for k, (spec, cn) in enumerate(zip(main, weights.convs)):
        y = _conv_norm(y, cn, spec, groups, relu=k < len(main) - 1)
    if shortcut is None:
        skip = x
    else:
        if weights.shortcut is None:
            raise ShapeError(f"block expects a projection shortcut {shortcut}")
        skip = _conv_norm(x, weights.shortcut, shortcut, groups, relu=False)
    return F.relu(F.add(y, skip))


def backbone_forward(
    x: Tensor,
    weights: BackboneWeights,
    config: BackboneConfig,
    trace: bool = False,
):
    """Run one C x H x W sample through the backbone.

    Returns the C_out x w x w feature map (the last stage map when
    ``use_spprcsp`` is off), or ``(map, observed)`` when
    ``trace`` is set, where ``observed`` lists ``(layer, input shape,
    output shape)`` in the same block granularity as ``shape_trace``.
    """
    if len(x.shape) != 3 or x.shape[0] != config.in_channels:
        raise ShapeError(
            f"backbone axis 0: expected {config.in_channels} x H x W input, got {x.shape}",
            axis=0,
        )
    check_input_size(config, x.shape[1], x.shape[2])
    groups = config.group_norm_groups
    observed: List[Tuple[str, Shape, Shape]] = []

    def record(name: str, before: Tensor, after: Tensor) -> None:
        if trace:
            observed.append((name, before.shape, after.shape))

    y = _conv_norm(x, weights.stem, stem_spec(config), groups, relu=True)
    if config.stem.pool:
        y = F.maxpool2d(y, STEM_POOL.kernel, STEM_POOL.stride, STEM_POOL.padding)
    record("stem", x, y)

    for i, j, name, main, shortcut in iter_blocks(config):
        before = y
        y = _block_forward(y, weights.stages[i][j], main, shortcut, groups)
        record(name, before, y)
        if j == config.stages[i].blocks - 1 and i in config.cca_insert_after:
            key = f"stage{i}"
            if key not in weights.cca:
                raise ShapeError(f"cca@{key}: no attention weights for this insertion point")
            before = y
            y = mhcca_forward(y, weights.cca[key], config.attention_config(i))
            record(f"cca@{key}", before, y)

    if config.use_spprcsp:
        if weights.spprcsp is None:
            raise ShapeError("spprcsp: no weights for the SPPRCSP block")
        before = y
        y = spprcsp_forward(y, weights.spprcsp, config.spprcsp)
        record("spprcsp", before, y)
    return (y, observed) if trace else y


# --- accounting ---


@dataclass
class _PlannedBlock:
    name: str
    input_shape: Shape
    output_shape: Shape
    layers: List[LayerCount]


class _DSEUse(NamedTuple):
    c_in: int
    c_out: int
    kernel: int
    height: int
    width: int


def _conv_layers(
    prefix: str, spec: ConvSpec, extent: Tuple[int, int], norm: str
) -> Tuple[List[LayerCount], Tuple[int, int]]:
    out = _conv_extent(extent, spec)
    layers = [
        LayerCount(
            prefix,
            "conv",
            PRE_SPPR,
            conv_params(spec.c_in, spec.c_out, spec.kernel),
            conv_mult_adds(spec.c_in, spec.c_out, spec.kernel, *out),
        ),
        LayerCount(norm, "norm", PRE_SPPR, norm_params(spec.c_out), 0),
    ]
    return layers, out


def _se_layers(prefix: str, channels: int, ratio: int, phase: str) -> List[LayerCount]:
    hidden = se_hidden(channels, ratio)
    return [
        LayerCount(
            f"{prefix}.se.fc1", "linear", phase,
            linear_params(channels, hidden), linear_mult_adds(channels, hidden),
        ),
        LayerCount(
            f"{prefix}.se.fc2", "linear", phase,
            linear_params(hidden, channels), linear_mult_adds(hidden, channels),
        ),
    ]


def _dse_layers(
    prefix: str, channels: int, config: SPPRCSPConfig, extent: Tuple[int, int], phase: str
) -> List[LayerCount]:
    k = config.dse_kernel
    return [
        LayerCount(
            f"{prefix}.depthwise", "depthwise", phase,
            depthwise_params(channels, k), depthwise_mult_adds(channels, k, *extent),
        ),
        LayerCount(
            f"{prefix}.pointwise", "pointwise", phase,
            pointwise_params(channels, channels), pointwise_mult_adds(channels, channels, *extent),
        ),
    ] + _se_layers(prefix, channels, config.se_ratio, phase)


def _spprcsp_layers(
    config: SPPRCSPConfig, channels: int, extent: Tuple[int, int]
) -> Tuple[List[LayerCount], List[_DSEUse]]:
    half = channels // 2
    w = config.levels.w
    layers = [
        LayerCount(
            "spprcsp.compress_main", "pointwise", PRE_SPPR,
            pointwise_params(channels, half), pointwise_mult_adds(channels, half, *extent),
        )
    ]
    uses: List[_DSEUse] = []
    if config.dse_before:
        layers += _dse_layers("spprcsp.dse_before", half, config, extent, PRE_SPPR)
        uses.append(_DSEUse(half, half, config.dse_kernel, *extent))
    layers.append(LayerCount("spprcsp.sppr_main", "pool", PRE_SPPR, 0, 0))
    if config.dse_after:
        layers += _dse_layers("spprcsp.dse_after", half, config, (w, w), POST_SPPR)
        uses.append(_DSEUse(half, half, config.dse_kernel, w, w))
    layers += [
        LayerCount(
            "spprcsp.compress_skip", "pointwise", PRE_SPPR,
            pointwise_params(channels, half), pointwise_mult_adds(channels, half, *extent),
        ),
        LayerCount("spprcsp.sppr_skip", "pool", PRE_SPPR, 0, 0),
        LayerCount(
            "spprcsp.fuse", "pointwise", POST_SPPR,
            pointwise_params(channels, config.c_out),
            pointwise_mult_adds(channels, config.c_out, w, w),
        ),
    ]
    return layers, uses


def plan_layers(
    config: BackboneConfig, height: int, width: int
) -> Tuple[List[_PlannedBlock], List[_DSEUse]]:
    """Shapes and per-layer counts of every block, without touching weights."""
    check_input_size(config, height, width)
    blocks: List[_PlannedBlock] = []
    channels = config.in_channels
    extent = (height, width)

    spec = stem_spec(config)
    layers, out = _conv_layers("stem.conv", spec, extent, "stem.norm")
    if config.stem.pool:
        out = _conv_extent(out, STEM_POOL)
        layers.append(LayerCount("stem.pool", "pool", PRE_SPPR, 0, 0))
    blocks.append(_PlannedBlock("stem", (channels, *extent), (spec.c_out, *out), layers))
    channels, extent = spec.c_out, out

    for i, j, name, main, shortcut in iter_blocks(config):
        layers = []
        out = extent
        for k, conv in enumerate(main):
            conv_layers, out = _conv_layers(f"{name}.conv{k}", conv, out, f"{name}.norm{k}")
            layers += conv_layers
        if shortcut is not None:
            layers += _conv_layers(f"{name}.shortcut", shortcut, extent, f"{name}.shortcut_norm")[0]
        c_out = main[-1].c_out
        blocks.append(_PlannedBlock(name, (channels, *extent), (c_out, *out), layers))
        channels, extent = c_out, out
        if j == config.stages[i].blocks - 1 and i in config.cca_insert_after:
            attention = config.attention_config(i)
            layer = LayerCount(
                f"cca@stage{i}", "attention", PRE_SPPR,
                attention_params(attention), attention_mult_adds(attention, *extent),
            )
            shape = (channels, *extent)
            blocks.append(_PlannedBlock(layer.name, shape, shape, [layer]))

    if not config.use_spprcsp:
        return blocks, []
    layers, uses = _spprcsp_layers(config.spprcsp, channels, extent)
    w = config.output_extent
    blocks.append(
        _PlannedBlock("spprcsp", (channels, *extent), (config.out_channels, w, w), layers)
    )
    return blocks, uses


def shape_trace(config: BackboneConfig, height: int, width: int) -> ShapeTrace:
    blocks, _ = plan_layers(config, height, width)
    return ShapeTrace(
        rows=[
            TraceRow(
                layer=b.name,
                input_shape=b.input_shape,
                output_shape=b.output_shape,
                params=sum(layer.params for layer in b.layers),
                mult_adds=sum(layer.mult_adds for layer in b.layers),
            )
            for b in blocks
        ]
    )


def count_params_flops(
    config: BackboneConfig, height: int, width: int, compare_plain: bool = False
) -> ParamCountReport:
    """Per-layer counts; with ``compare_plain`` also the plain-convolution variant."""
    blocks, uses = plan_layers(config, height, width)
    report = ParamCountReport(
        preset=config.preset,
        input_shape=(config.in_channels, height, width),
        layers=[layer for b in blocks for layer in b.layers],
    )
    if compare_plain:
        dse_params = sum(dseconv_param_count(u.c_in, u.c_out, u.kernel) for u in uses)
        plain_params = sum(plain_conv_param_count(u.c_in, u.c_out, u.kernel) for u in uses)
        dse_macs = sum(
            depthwise_mult_adds(u.c_in, u.kernel, u.height, u.width)
            + pointwise_mult_adds(u.c_in, u.c_out, u.height, u.width)
            for u in uses
        )
        plain_macs = sum(
            conv_mult_adds(u.c_in, u.c_out, u.kernel, u.height, u.width) for u in uses
        )
        report.plain = PlainComparison(
            dse_params=dse_params,
            plain_params=plain_params,
            dse_mult_adds=dse_macs,
            plain_mult_adds=plain_macs,
            network_params=report.total_params - dse_params + plain_params,
            network_mult_adds=report.total_mult_adds - dse_macs + plain_macs,
        )
    return report
