"""Pooling parameters that take an extent h to an exact level l.

For each axis a judgment value t picks one of two rules:

    t = floor(l / h) + (h mod l) + 1          (literal reading)
    t = floor(h / l) + (h mod l) + 1          (swapped reading)

    ceil rule  when t > l, or t == l and h / (l - 1) is an even integer:
        stride = kernel = ceil(h / l), padding = ceil((l * kernel - h) / 2)
    floor rule otherwise:
        stride = floor(h / l), kernel = h - (l - 1) * stride, padding = 0
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from scaresnet.errors import ValidationError

logger = logging.getLogger(__name__)


class Interpretation(str, Enum):
    LITERAL = "literal"
    SWAPPED = "swapped"


class Branch(str, Enum):
    CEIL = "eq4"
    FLOOR = "eq5"


InterpretationLike = Union[Interpretation, str]


def resolve_interpretation(value: InterpretationLike) -> Interpretation:
    try:
        return Interpretation(value)
    except ValueError:
        raise ValidationError(
            f"unknown interpretation {value!r}: expected 'literal' or 'swapped'"
        ) from None


@dataclass(frozen=True)
class AxisPoolingParams:
    """Kernel, stride and padding for one axis, with the branch that produced them."""

    kernel: int
    stride: int
    padding: int
    branch: Branch
    judgment: int

    def to_dict(self) -> Dict[str, Union[int, str]]:
        return {
            "kernel": self.kernel,
            "stride": self.stride,
            "padding": self.padding,
            "branch": self.branch.value,
            "t": self.judgment,
        }


def _check_domain(h: int, l: int) -> None:
    if l < 2:
        raise ValidationError(f"level must be >= 2, got l={l}")
    if h < l:
        raise ValidationError(
            f"input extent h={h} is below the pooled level l={l} (minimum feature-map size)"
        )


def pooled_output_size(h: int, kernel: int, stride: int, padding: int) -> int:
    """floor((h + 2 * padding - kernel) / stride) + 1."""
    if kernel < 1 or stride < 1 or padding < 0:
        raise ValidationError(
            f"invalid pooling window kernel={kernel} stride={stride} padding={padding}"
        )
    if h + 2 * padding < kernel:
        raise ValidationError(
            f"kernel {kernel} exceeds padded extent {h + 2 * padding}"
        )
    return (h + 2 * padding - kernel) // stride + 1


def judgment_value(
    h: int, l: int, interpretation: InterpretationLike = Interpretation.LITERAL
) -> int:
    """Integer that selects the ceil or floor rule."""
    _check_domain(h, l)
    interpretation = resolve_interpretation(interpretation)
    quotient = l // h if interpretation is Interpretation.LITERAL else h // l
    return quotient + h % l + 1


def _takes_ceil_rule(h: int, l: int, t: int) -> bool:
    if t > l:
        return True
    return t == l and h % (l - 1) == 0 and (h // (l - 1)) % 2 == 0


def pooling_params(
    h: int, l: int, interpretation: InterpretationLike = Interpretation.LITERAL
) -> AxisPoolingParams:
    """Kernel/stride/padding pooling an extent h to exactly l cells.

    The result is checked against ``pooled_output_size`` and the
    padding <= kernel / 2 rule before it is returned; a failure raises
    instead of returning bad parameters.
    """
    t = judgment_value(h, l, interpretation)
    if _takes_ceil_rule(h, l, t):
        kernel = stride = -(-h // l)
        padding = -(-(l * kernel - h) // 2)
        branch = Branch.CEIL
    else:
        stride = h // l
        kernel = h - (l - 1) * stride
        padding = 0
        branch = Branch.FLOOR

    params = AxisPoolingParams(kernel, stride, padding, branch, t)
    report = (
        f"h={h}, l={l}, branch={branch.value}, "
        f"kernel={kernel}, stride={stride}, padding={padding}"
    )
    if 2 * padding > kernel:
        raise ValidationError(f"padding exceeds half the kernel: {report}")
    try:
        produced = pooled_output_size(h, kernel, stride, padding)
    except ValidationError as e:
        raise ValidationError(f"{e}: {report}") from e
    if produced != l:
        raise ValidationError(f"pooled extent {produced} != level: {report}")
    return params


def pooling_plan(
    height: int,
    width: int,
    levels: Sequence[int],
    interpretation: InterpretationLike = Interpretation.LITERAL,
) -> List[Tuple[int, AxisPoolingParams, AxisPoolingParams]]:
    """(level, height params, width params) for every level, largest level first."""
    return [
        (
            l,
            pooling_params(height, l, interpretation),
            pooling_params(width, l, interpretation),
        )
        for l in sorted(levels, reverse=True)
    ]


def validate_sweep(
    l_values: Iterable[int],
    h_max: int,
    interpretation: InterpretationLike = Interpretation.LITERAL,
) -> Tuple[int, List[Dict[str, Union[int, str]]]]:
    """Run pooling_params for every h in [l, h_max] and collect failures.

    Returns the number of (h, l) pairs checked and one record per
    counter-example.
    """
    interpretation = resolve_interpretation(interpretation)
    checked = 0
    failures: List[Dict[str, Union[int, str]]] = []
    for l in l_values:
        for h in range(l, h_max + 1):
            checked += 1
            try:
                pooling_params(h, l, interpretation)
            except ValidationError as e:
                failures.append(
                    {"h": h, "l": l, "interpretation": interpretation.value, "error": str(e)}
                )
    if failures:
        logger.warning(
            f"pooling sweep ({interpretation.value}): {len(failures)} of {checked} failed"
        )
    return checked, failures
