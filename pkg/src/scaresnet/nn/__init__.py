"""Network modules: attention, SPPRCSP, backbone and their accounting."""

from scaresnet.nn.params import Initializer, ParameterGroup, decays
from scaresnet.nn.attention import (
    MHCCAConfig,
    MHCCAWeights,
    criss_cross_attention_maps,
    criss_cross_step,
    mhcca_forward,
    sinusoidal_pe,
)
from scaresnet.nn.spprcsp import (
    DSEConvWeights,
    SEWeights,
    SPPRConfig,
    SPPRCSPConfig,
    SPPRCSPWeights,
    dseconv_forward,
    se_forward,
    sppr_forward,
    sppr_oracle,
    spprcsp_forward,
)
from scaresnet.nn.accounting import (
    LayerCount,
    ParamCountReport,
    ShapeTrace,
    TraceRow,
    dseconv_param_count,
    plain_conv_param_count,
)
from scaresnet.nn.backbone import (
    PRESETS,
    AttentionSettings,
    BackboneConfig,
    BackboneWeights,
    BlockType,
    StageSpec,
    StemSpec,
    backbone_forward,
    build_scaresnet,
    check_input_size,
    count_params_flops,
    minimum_input_size,
    preset_config,
    shape_trace,
)

__all__ = [
    "Initializer",
    "ParameterGroup",
    "decays",
    "MHCCAConfig",
    "MHCCAWeights",
    "criss_cross_attention_maps",
    "criss_cross_step",
    "mhcca_forward",
    "sinusoidal_pe",
    "DSEConvWeights",
    "SEWeights",
    "SPPRConfig",
    "SPPRCSPConfig",
    "SPPRCSPWeights",
    "dseconv_forward",
    "se_forward",
    "sppr_forward",
    "sppr_oracle",
    "spprcsp_forward",
    "LayerCount",
    "ParamCountReport",
    "ShapeTrace",
    "TraceRow",
    "dseconv_param_count",
    "plain_conv_param_count",
    "PRESETS",
    "AttentionSettings",
    "BackboneConfig",
    "BackboneWeights",
    "BlockType",
    "StageSpec",
    "StemSpec",
    "backbone_forward",
    "build_scaresnet",
    "check_input_size",
    "count_params_flops",
    "minimum_input_size",
    "preset_config",
    "shape_trace",
]
