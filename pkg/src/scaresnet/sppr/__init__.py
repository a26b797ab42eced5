"""Integer arithmetic for SPPR levels and pooling parameters."""

from scaresnet.sppr.levels import (
    DEFAULT_LEVELS,
    LevelQuadruple,
    brute_force_level_triples,
    enumerate_level_solutions,
    is_sppr_reachable,
    level_quadruple,
)
from scaresnet.sppr.pooling import (
    AxisPoolingParams,
    Branch,
    Interpretation,
    judgment_value,
    pooled_output_size,
    pooling_params,
    pooling_plan,
    resolve_interpretation,
    validate_sweep,
)

__all__ = [
    "DEFAULT_LEVELS",
    "LevelQuadruple",
    "brute_force_level_triples",
    "enumerate_level_solutions",
    "is_sppr_reachable",
    "level_quadruple",
    "AxisPoolingParams",
    "Branch",
    "Interpretation",
    "judgment_value",
    "pooled_output_size",
    "pooling_params",
    "pooling_plan",
    "resolve_interpretation",
    "validate_sweep",
]
