"""Exact arithmetic on finite-dimensional tori.

Points carry Fraction coordinates reduced into [0, 1).  The distance of a
coordinate c to the nearest integer is min(c, 1 - c), and the norm of a
point is the max of those coordinate distances.  The basic neighborhoods
here allow a bounded number of coordinates to stray: a point x is
(k, eps)-close to a center y when at most k coordinates of y - x sit at
distance >= eps from zero.  Such a neighborhood is a finite union of
axis-aligned boxes ("cylinders") that pin all but k coordinates.

Boundary conventions are fixed once and used everywhere: a coordinate
counts as deviating when its distance is >= eps, and cylinder membership
is strict (< eta).  With eta = eps the union-of-cylinders identity is then
exact, with no boundary mismatch.

All measures are exact rationals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Iterable, Sequence, Union

RationalLike = Union[Fraction, int, str]


def as_fraction(value: RationalLike) -> Fraction:
    """Coerce ints, Fractions, and 'p/q' strings to Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("bool is not a rational value")
    if isinstance(value, (int, str)):
        return Fraction(value)
    raise TypeError(f"cannot interpret {value!r} as a rational")


def wrap_unit(value: Fraction) -> Fraction:
    """Reduce a rational into [0, 1)."""
    return value - (value.numerator // value.denominator)


def coordinate_norm(value: Fraction) -> Fraction:
    """Distance of a rational to the nearest integer."""
    c = wrap_unit(value)
    return min(c, 1 - c)


def fraction_str(value: Fraction) -> str:
    return f"{value.numerator}/{value.denominator}"


@dataclass(frozen=True)
class TorusPoint:
    """A point of T^r with exact rational coordinates in [0, 1)."""

    coords: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        if len(self.coords) == 0:
            raise ValueError("torus points need dimension >= 1")
        object.__setattr__(
            self, "coords", tuple(wrap_unit(as_fraction(c)) for c in self.coords)
        )

    @classmethod
    def of(cls, values: Iterable[RationalLike]) -> "TorusPoint":
        return cls(tuple(as_fraction(v) for v in values))

    @classmethod
    def zero(cls, dim: int) -> "TorusPoint":
        return cls(tuple(Fraction(0) for _ in range(dim)))

    @property
    def dim(self) -> int:
        return len(self.coords)

    def __add__(self, other: "TorusPoint") -> "TorusPoint":
        self._check_dim(other)
        return TorusPoint(tuple(a + b for a, b in zip(self.coords, other.coords)))

    def __sub__(self, other: "TorusPoint") -> "TorusPoint":
        self._check_dim(other)
        return TorusPoint(tuple(a - b for a, b in zip(self.coords, other.coords)))

    def __neg__(self) -> "TorusPoint":
        return TorusPoint(tuple(-a for a in self.coords))

    def scale(self, n: int) -> "TorusPoint":
        return TorusPoint(tuple(n * a for a in self.coords))

    def _check_dim(self, other: "TorusPoint") -> None:
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")

    def norm(self) -> Fraction:
        """Max over coordinates of the distance to the nearest integer."""
        return max(coordinate_norm(c) for c in self.coords)

    def deviation_count(self, eps: RationalLike) -> int:
        """Number of coordinates at distance >= eps from zero."""
        e = as_fraction(eps)
        return sum(1 for c in self.coords if coordinate_norm(c) >= e)

    def to_json(self) -> list[str]:
        return [fraction_str(c) for c in self.coords]

    @classmethod
    def from_json(cls, data: Sequence[str]) -> "TorusPoint":
        return cls.of(data)

    def __repr__(self) -> str:
        return "TorusPoint(" + ", ".join(fraction_str(c) for c in self.coords) + ")"


def _check_radius(eps: Fraction, name: str) -> None:
    # Radii beyond 1/2 wrap around the torus; refuse instead of clamping silently.
    if not (0 < eps <= Fraction(1, 2)):
        raise ValueError(f"{name} must lie in (0, 1/2], got {eps}")


@dataclass(frozen=True)
class Cylinder:
    """Box pinning the coordinates in index_set to within eta of the center.

    index_set holds 1-based coordinate indices.  Membership is strict:
    every pinned coordinate must satisfy dist(x_i, y_i) < eta.
    """

    dim: int
    index_set: tuple[int, ...]
    center: TorusPoint
    eta: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "eta", as_fraction(self.eta))
        object.__setattr__(self, "index_set", tuple(sorted(set(self.index_set))))
        _check_radius(self.eta, "eta")
        if self.center.dim != self.dim:
            raise ValueError("center dimension does not match cylinder dimension")
        for i in self.index_set:
            if not 1 <= i <= self.dim:
                raise ValueError(f"index {i} outside 1..{self.dim}")

    def contains(self, x: TorusPoint) -> bool:
        if x.dim != self.dim:
            raise ValueError("dimension mismatch")
        for i in self.index_set:
            if coordinate_norm(x.coords[i - 1] - self.center.coords[i - 1]) >= self.eta:
                return False
        return True

    def measure(self) -> Fraction:
        return (2 * self.eta) ** len(self.index_set)

    def normalized_value(self, x: TorusPoint) -> Fraction:
        """Value of the density (1/measure) * indicator at x."""
        if self.contains(x):
            return 1 / self.measure()
        return Fraction(0)

    def to_json(self) -> dict:
        return {
            "r": self.dim,
            "I": list(self.index_set),
            "y": self.center.to_json(),
            "eta": fraction_str(self.eta),
        }

    @classmethod
    def from_json(cls, data: dict) -> "Cylinder":
        return cls(
            dim=data["r"],
            index_set=tuple(data["I"]),
            center=TorusPoint.from_json(data["y"]),
            eta=as_fraction(data["eta"]),
        )


@dataclass(frozen=True)
class ApproxHammingBall:
    """Points x with at most k coordinates of center - x at distance >= eps.

    Needs 0 <= k < dim and eps in (0, 1/2].  Haar measure is the exact
    binomial tail sum_{j<=k} C(r,j) (1-2 eps)^j (2 eps)^(r-j).
    """

    center: TorusPoint
    k: int
    eps: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "eps", as_fraction(self.eps))
        _check_radius(self.eps, "eps")
        if not 0 <= self.k < self.center.dim:
            raise ValueError(f"need 0 <= k < r, got k={self.k}, r={self.center.dim}")

    @property
    def dim(self) -> int:
        return self.center.dim

    def contains(self, x: TorusPoint) -> bool:
        if x.dim != self.dim:
            raise ValueError("dimension mismatch")
        return (self.center - x).deviation_count(self.eps) <= self.k

    def measure(self) -> Fraction:
        r, e = self.dim, self.eps
        p_dev = 1 - 2 * e
        return sum(
            comb(r, j) * p_dev**j * (2 * e) ** (r - j) for j in range(self.k + 1)
        )

    def cylinders(self, eta: RationalLike | None = None) -> list[Cylinder]:
        """All cylinders on r - k coordinates, centered like the ball.

        With eta = eps (the default) the union of these boxes is exactly
        the ball.  Enumeration order is lexicographic in the index sets.
        """
        width = self.eps if eta is None else as_fraction(eta)
        r = self.dim
        out = []
        for idx in combinations(range(1, r + 1), r - self.k):
            out.append(Cylinder(dim=r, index_set=idx, center=self.center, eta=width))
        return out

    def to_json(self) -> dict:
        return {
            "r": self.dim,
            "y": self.center.to_json(),
            "k": self.k,
            "eps": fraction_str(self.eps),
        }

    @classmethod
    def from_json(cls, data: dict) -> "ApproxHammingBall":
        return cls(
            center=TorusPoint.from_json(data["y"]),
            k=data["k"],
            eps=as_fraction(data["eps"]),
        )


def ball_to_json_str(ball: ApproxHammingBall) -> str:
    return json.dumps(ball.to_json())


def ball_from_json_str(payload: str) -> ApproxHammingBall:
    return ApproxHammingBall.from_json(json.loads(payload))
