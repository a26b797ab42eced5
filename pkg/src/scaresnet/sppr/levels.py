"""Level constraint for the SPPR reshape.

Three pooled maps of levels x, y, z can be flattened, concatenated and
reshaped into a w x w map only if x^2 + y^2 + z^2 = w^2. Valid level sets
are generated from positive integers (a, b, c, d) with

    a^2 + b^2 = d * (2c + d - 1),  {x, y, z} = {2a, 2b, 2c - 1},  w = 2c + 2d - 1
"""

import logging
from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from scaresnet.errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LevelQuadruple:
    """Pooled levels (x, y, z), reshaped level w and the witness (a, b, c, d)."""

    x: int
    y: int
    z: int
    w: int
    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        values = (self.x, self.y, self.z, self.w, self.a, self.b, self.c, self.d)
        if any(v < 1 for v in values):
            raise ValidationError(f"levels and witnesses must be positive: {values}")
        if self.x**2 + self.y**2 + self.z**2 != self.w**2:
            raise ValidationError(
                f"{self.x}^2 + {self.y}^2 + {self.z}^2 != {self.w}^2"
            )
        expected = Counter((2 * self.a, 2 * self.b, 2 * self.c - 1))
        if Counter((self.x, self.y, self.z)) != expected or self.w != 2 * self.c + 2 * self.d - 1:
            raise ValidationError(
                f"levels {self.levels}, w={self.w} do not match witness "
                f"(a, b, c, d) = ({self.a}, {self.b}, {self.c}, {self.d})"
            )
        if self.a**2 + self.b**2 != self.d * (2 * self.c + self.d - 1):
            raise ValidationError(
                f"witness fails a^2 + b^2 = d(2c + d - 1): "
                f"({self.a}, {self.b}, {self.c}, {self.d})"
            )

    @property
    def levels(self) -> Tuple[int, int, int]:
        return (self.x, self.y, self.z)

    def descending(self) -> Tuple[int, int, int]:
        """Pooled levels largest first (the concatenation order)."""
        return tuple(sorted(self.levels, reverse=True))

    @property
    def max_level(self) -> int:
        return max(self.levels)

    def normalized(self) -> "LevelQuadruple":
        """Same quadruple with x >= y >= z."""
        x, y, z = self.descending()
        return LevelQuadruple(x, y, z, self.w, self.a, self.b, self.c, self.d)

    def to_dict(self) -> Dict[str, int]:
        return {
            "x": self.x,
            "y": self.y,
            "z": self.z,
            "w": self.w,
            "a": self.a,
            "b": self.b,
            "c": self.c,
            "d": self.d,
        }


def _witness_for(x: int, y: int, z: int, w: int) -> Optional[Tuple[int, int, int, int]]:
    """Recover (a, b, c, d) for levels (x, y, z, w), or None if there is none."""
    odd = [v for v in (x, y, z) if v % 2 == 1]
    even = [v for v in (x, y, z) if v % 2 == 0]
    if len(odd) != 1 or w % 2 == 0:
        return None
    c = (odd[0] + 1) // 2
    d2 = w + 1 - 2 * c
    if d2 < 2 or d2 % 2:
        return None
    a, b = even[0] // 2, even[1] // 2
    d = d2 // 2
    if a * a + b * b != d * (2 * c + d - 1):
        return None
    return a, b, c, d


def level_quadruple(x: int, y: int, z: int, w: int) -> LevelQuadruple:
    """Build a LevelQuadruple from levels alone, recovering its witness."""
    witness = _witness_for(x, y, z, w)
    if witness is None:
        raise ValidationError(
            f"levels ({x}, {y}, {z}) -> {w} have no witness "
            "a^2 + b^2 = d(2c + d - 1)"
        )
    return LevelQuadruple(x, y, z, w, *witness)


def is_sppr_reachable(x: int, y: int, z: int, w: int) -> bool:
    """True if the level set can be produced by the witness construction."""
    return _witness_for(x, y, z, w) is not None


DEFAULT_LEVELS = LevelQuadruple(x=9, y=6, z=2, w=11, a=3, b=1, c=5, d=1)


def enumerate_level_solutions(max_abcd: int) -> List[LevelQuadruple]:
    """Every witness with components in [1, max_abcd], mapped to its levels.

    Returned quadruples keep the element-wise assignment
    (x, y, z) = (2a, 2b, 2c - 1) and are sorted by w, then x.
    """
    if max_abcd < 1:
        raise ValidationError(f"max_abcd must be >= 1, got {max_abcd}")
    span = range(1, max_abcd + 1)
    squares = {v: v * v for v in span}
    solutions = []
    for c in span:
        for d in span:
            target = d * (2 * c + d - 1)
            for a in span:
                rest = target - squares[a]
                if rest < 1:
                    break
                for b in span:
                    if squares[b] == rest:
                        solutions.append(
                            LevelQuadruple(
                                x=2 * a, y=2 * b, z=2 * c - 1, w=2 * c + 2 * d - 1,
                                a=a, b=b, c=c, d=d,
                            )
                        )
                    elif squares[b] > rest:
                        break
    solutions.sort(key=lambda q: (q.w, q.x, q.y, q.z, q.a, q.b, q.c, q.d))
    logger.debug(f"enumerate_level_solutions({max_abcd}): {len(solutions)} solutions")
    return solutions


def brute_force_level_triples(max_level: int) -> List[Tuple[int, int, int, int]]:
    """All (x, y, z, w) with x >= y >= z >= 1, x <= max_level and x^2 + y^2 + z^2 = w^2.

    Independent of the witness construction; used to cross-check it.
    """
    found = []
    for x in range(1, max_level + 1):
        for y in range(1, x + 1):
            for z in range(1, y + 1):
                total = x * x + y * y + z * z
                w = int(round(total**0.5))
                while w * w > total:
                    w -= 1
                while (w + 1) * (w + 1) <= total:
                    w += 1
                if w * w == total:
                    found.append((x, y, z, w))
    return found
