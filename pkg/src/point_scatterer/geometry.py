"""Upper half-plane geometry and the modular group acting on it."""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "Point",
    "GroupElement",
    "IDENTITY",
    "S_MATRIX",
    "T_MATRIX",
    "canonicalize",
    "mobius_apply",
    "hyp_distance",
    "displacement",
    "reduce_fund_domain",
]


@dataclass(frozen=True)
class Point:
    """Point x + iy of the upper half-plane."""

    x: float
    y: float

    def __post_init__(self):
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError("Point components must be finite")
        if not self.y > 0:
            raise ValueError("Point requires y > 0")

    @classmethod
    def from_complex(cls, z: complex) -> "Point":
        return cls(float(z.real), float(z.imag))

    @property
    def z(self) -> complex:
        return complex(self.x, self.y)


@dataclass(frozen=True, order=True)
class GroupElement:
    """Canonical representative (c > 0, or c = 0 and a > 0) of a PSL(2,Z) class."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if self.a * self.d - self.b * self.c != 1:
            raise ValueError("determinant must be 1")
        if not (self.c > 0 or (self.c == 0 and self.a > 0)):
            raise ValueError("not in canonical sign form; use canonicalize()")

    def __matmul__(self, other: "GroupElement") -> "GroupElement":
        return canonicalize(
            (
                self.a * other.a + self.b * other.c,
                self.a * other.b + self.b * other.d,
                self.c * other.a + self.d * other.c,
                self.c * other.b + self.d * other.d,
            )
        )

    def inverse(self) -> "GroupElement":
        return canonicalize((self.d, -self.b, -self.c, self.a))

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.a, self.b, self.c, self.d)


def canonicalize(g) -> GroupElement:
    """Sign-normalize an integer quadruple (a, b, c, d) with ad - bc = 1."""
    a, b, c, d = (int(v) for v in g)
    if a * d - b * c != 1:
        raise ValueError(f"determinant of {(a, b, c, d)} is {a * d - b * c}, not 1")
    if c < 0 or (c == 0 and a < 0):
        a, b, c, d = -a, -b, -c, -d
    return GroupElement(a, b, c, d)


IDENTITY = GroupElement(1, 0, 0, 1)
S_MATRIX = GroupElement(0, -1, 1, 0)
T_MATRIX = GroupElement(1, 1, 0, 1)


def mobius_apply(g: GroupElement, z: Point) -> Point:
    """(az + b)/(cz + d); the height is y/|cz + d|^2 computed directly."""
    w = z.z
    den = g.c * w + g.d
    num = g.a * w + g.b
    img = num / den
    return Point(img.real, z.y / abs(den) ** 2)


def hyp_distance(z: Point, w: Point) -> float:
    """Hyperbolic distance, via sinh(d/2) = |z - w| / (2 sqrt(y_z y_w))."""
    return 2.0 * math.asinh(abs(z.z - w.z) / (2.0 * math.sqrt(z.y * w.y)))


def displacement(g: GroupElement, z: Point) -> float:
    """d(z, g z) from the polynomial b + (a - d) z - c z^2, avoiding g z itself."""
    w = z.z
    return 2.0 * math.asinh(abs(g.b + (g.a - g.d) * w - g.c * w * w) / (2.0 * z.y))


def reduce_fund_domain(z: Point, max_steps: int = 10_000) -> tuple[Point, GroupElement]:
    """Return (z*, g) with g z = z*, |Re z*| <= 1/2 and |z*| >= 1.

    Boundary ties are resolved toward Re z* <= 0: Re z* = 1/2 is moved to
    -1/2, and points on the unit circle with Re z* > 0 are inverted.
    """
    g = IDENTITY
    w = z.z
    for _ in range(max_steps):
        # the small slack sends Re = +1/2 (and rounding noise around -1/2) to -1/2
        shift = -math.floor(w.real + 0.5 + 1e-12)
        if shift:
            g = canonicalize((1, shift, 0, 1)) @ g
            w = w + shift
        r2 = w.real * w.real + w.imag * w.imag
        if r2 < 1.0 - 1e-12:
            g = S_MATRIX @ g
            w = -1.0 / w
            continue
        if abs(r2 - 1.0) <= 1e-12 and w.real > 1e-12:
            g = S_MATRIX @ g
            w = -1.0 / w
        break
    else:  # pragma: no cover - reduction always terminates for y > 0
        raise RuntimeError("fundamental-domain reduction did not terminate")
    # recompute from the integer element to avoid drift
    return mobius_apply(g, z), g
