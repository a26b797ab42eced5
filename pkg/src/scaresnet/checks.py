"""Finite-difference gradient checks for each network module.

Every check builds a small float64 instance, reduces the module output to
a scalar with a fixed random projection and compares the recorded
gradients against central differences on a seeded subset of coordinates.
"""

import logging
from dataclasses import dataclass, replace
from typing import Callable, Dict, List, Tuple

import numpy as np

from scaresnet.errors import ValidationError
from scaresnet.nn import (
    DSEConvWeights,
    Initializer,
    MHCCAConfig,
    MHCCAWeights,
    SEWeights,
    SPPRConfig,
    SPPRCSPConfig,
    SPPRCSPWeights,
    backbone_forward,
    build_scaresnet,
    dseconv_forward,
    mhcca_forward,
    preset_config,
    se_forward,
    sppr_forward,
    spprcsp_forward,
)
from scaresnet.nn.backbone import AttentionSettings
from scaresnet.tensor import (
    DType,
    Graph,
    Tensor,
    finite_diff_grad,
    max_relative_error,
    sample_indices,
)
from scaresnet.tensor import functional as F

logger = logging.getLogger(__name__)

MODULE_TAGS = ("cca", "sppr", "se", "dseconv", "spprcsp", "backbone-mini")

Forward = Callable[[Tensor], Tensor]


@dataclass
class GradCheckCase:
    """A forward function of the input plus the parameters it closes over."""

    forward: Forward
    x: Tensor
    params: Dict[str, Tensor]


def _normal(rng: np.random.Generator, shape: Tuple[int, ...]) -> Tensor:
    return Tensor(rng.standard_normal(shape), dtype=DType.FLOAT64)


def _cca_case(rng: np.random.Generator, seed: int) -> GradCheckCase:
    config = MHCCAConfig(channels=8, heads=2, recurrence=2, residual_scale_init=0.5)
    weights = MHCCAWeights.init(config, Initializer(seed, DType.FLOAT64))
    return GradCheckCase(
        forward=lambda x: mhcca_forward(x, weights, config),
        x=_normal(rng, (8, 5, 6)),
        params=weights.named_parameters(),
    )


def _sppr_case(rng: np.random.Generator, seed: int) -> GradCheckCase:
    config = SPPRConfig()
    return GradCheckCase(
        forward=lambda x: sppr_forward(x, config),
        x=_normal(rng, (3, 16, 18)),
        params={},
    )


def _se_case(rng: np.random.Generator, seed: int) -> GradCheckCase:
    weights = SEWeights.init(3, 1, Initializer(seed, DType.FLOAT64))
    return GradCheckCase(
        forward=lambda x: se_forward(x, weights),
        x=_normal(rng, (3, 4, 4)),
        params=weights.named_parameters(),
    )


def _dseconv_case(rng: np.random.Generator, seed: int) -> GradCheckCase:
    weights = DSEConvWeights.init(3, 4, 3, 2, Initializer(seed, DType.FLOAT64))
    return GradCheckCase(
        forward=lambda x: dseconv_forward(x, weights),
        x=_normal(rng, (3, 5, 5)),
        params=weights.named_parameters(),
    )


def _spprcsp_case(rng: np.random.Generator, seed: int) -> GradCheckCase:
    config = SPPRCSPConfig(c_out=8, se_ratio=4, in_channels=8)
    weights = SPPRCSPWeights.init(8, config, Initializer(seed, DType.FLOAT64))
    return GradCheckCase(
        forward=lambda x: spprcsp_forward(x, weights, config),
        x=_normal(rng, (8, 16, 18)),
        params=weights.named_parameters(),
    )


def _backbone_case(rng: np.random.Generator, seed: int) -> GradCheckCase:
    mini = preset_config("mini")
    # nonzero gamma so the attention weights receive gradient
    config = replace(mini, cca=AttentionSettings(residual_scale_init=0.5))
    weights = build_scaresnet(config, seed=seed, dtype=DType.FLOAT64)
    return GradCheckCase(
        forward=lambda x: backbone_forward(x, weights, config),
        x=_normal(rng, (3, 72, 80)),
        params=weights.named_parameters(),
    )


CASES: Dict[str, Callable[[np.random.Generator, int], GradCheckCase]] = {
    "cca": _cca_case,
    "sppr": _sppr_case,
    "se": _se_case,
    "dseconv": _dseconv_case,
    "spprcsp": _spprcsp_case,
    "backbone-mini": _backbone_case,
}


def grad_check(
    module: str,
    seed: int = 0,
    eps: float = 1e-5,
    threshold: float = 1e-4,
    backbone_threshold: float = 1e-3,
    floor: float = 1e-3,
    samples: int = 12,
) -> Dict[str, object]:
    """Check one module tag and return its JSON-ready result."""
    if module not in CASES:
        raise ValidationError(f"unknown module {module!r}; choose from {MODULE_TAGS}")
    rng = np.random.default_rng(seed)
    case = CASES[module](rng, seed)
    limit = backbone_threshold if module == "backbone-mini" else threshold
    if module == "backbone-mini":
        samples = max(2, samples // 3)

    out = case.forward(case.x)
    projection = _normal(rng, out.shape)

    def loss(x: Tensor) -> Tensor:
        return F.sum_all(F.mul(case.forward(x), projection))

    with Graph() as graph:
        root = loss(case.x)
    graph.backward(root)

    targets: List[Tuple[str, Tensor]] = [("input", case.x)] + list(case.params.items())
    worst = 0.0
    checked = 0
    for name, tensor in targets:
        analytic = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        indices = sample_indices(tensor.size, samples, rng)
        if tensor is case.x:
            numeric = finite_diff_grad(loss, case.x, eps=eps, indices=indices)
        else:
            numeric = _param_finite_diff(loss, case.x, tensor, eps, indices)
        err = max_relative_error(analytic, numeric.data, indices=indices, floor=floor)
        logger.debug(f"grad-check {module}: {name} max_rel_err={err:.3e} over {len(indices)}")
        worst = max(worst, err)
        checked += len(indices)

    result = {
        "module": module,
        "max_rel_err": worst,
        "checked": checked,
        "threshold": limit,
        "passed": bool(worst <= limit),
    }
    logger.info(f"grad-check {module}: {result}")
    return result


def _param_finite_diff(
    loss: Callable[[Tensor], Tensor],
    x: Tensor,
    param: Tensor,
    eps: float,
    indices: np.ndarray,
) -> Tensor:
    original = param.data

    def perturbed(value: Tensor) -> Tensor:
        param.data = value.data
        return loss(x)

    try:
        return finite_diff_grad(perturbed, param, eps=eps, indices=indices)
    finally:
        param.data = original


def grad_check_all(seed: int = 0, **kwargs) -> List[Dict[str, object]]:
    return [grad_check(tag, seed=seed, **kwargs) for tag in MODULE_TAGS]
