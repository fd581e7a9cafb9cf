"""Exact affine geometry of simplices with rational vertices."""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import chain, combinations
from math import factorial
from typing import Iterable, Optional, Sequence, Tuple

from fesc.exceptions import DegenerateSimplex
from fesc.linalg import RatMatrix, determinant, inverse, nullspace, rank, solve, ZERO, ONE

Point = Tuple[Fraction, ...]


def as_point(coordinates: Iterable[object]) -> Point:
    return tuple(Fraction(c) for c in coordinates)  # type: ignore


def sub(a: Sequence[Fraction], b: Sequence[Fraction]) -> Point:
    return tuple(x - y for x, y in zip(a, b))


def add(a: Sequence[Fraction], b: Sequence[Fraction]) -> Point:
    return tuple(x + y for x, y in zip(a, b))


def scale(factor: Fraction, a: Sequence[Fraction]) -> Point:
    return tuple(factor * x for x in a)


def dot(a: Sequence[Fraction], b: Sequence[Fraction]) -> Fraction:
    return sum((x * y for x, y in zip(a, b)), ZERO)


def isobarycenter(points: Sequence[Point]) -> Point:
    count = len(points)
    return tuple(sum(coordinates, ZERO) / count for coordinates in zip(*points))


def format_point(point: Sequence[Fraction]) -> str:
    return "(" + ", ".join(str(c) for c in point) + ")"


def vector_rank(vectors: Sequence[Sequence[Fraction]], ambient: int) -> int:
    if not vectors:
        return 0
    return rank(RatMatrix.from_columns(vectors, ambient))


@dataclass(frozen=True)
class Simplex:
    """A (possibly lower-dimensional) simplex of ℝⁿ given by its ordered vertices."""

    points: Tuple[Point, ...]

    @classmethod
    def of(cls, points: Iterable[Iterable[object]]) -> "Simplex":
        return cls(tuple(as_point(p) for p in points))

    @property
    def dim(self) -> int:
        return len(self.points) - 1

    @property
    def ambient(self) -> int:
        return len(self.points[0])

    @cached_property
    def edges(self) -> RatMatrix:
        """n × k matrix of edge vectors from the first vertex."""
        origin = self.points[0]
        return RatMatrix.from_columns([sub(p, origin) for p in self.points[1:]], self.ambient)

    @cached_property
    def _pseudo_inverse(self) -> RatMatrix:
        """(EᵀE)⁻¹Eᵀ; raises on degenerate simplices."""
        gram = self.edges.T @ self.edges
        gram_inverse = inverse(gram)
        if gram_inverse is None:
            raise DegenerateSimplex(f"Degenerate simplex {self}.")
        return gram_inverse @ self.edges.T

    @property
    def is_degenerate(self) -> bool:
        if not self.dim:
            return False
        return inverse(self.edges.T @ self.edges) is None

    @cached_property
    def gradients(self) -> Tuple[Point, ...]:
        """Tangential gradients of the barycentric coordinates, as ambient vectors."""
        if not self.dim:
            return ((ZERO,) * self.ambient,)
        rows = self._pseudo_inverse.entries
        first = tuple(-sum(column, ZERO) for column in zip(*rows))
        return (first,) + tuple(rows)

    @cached_property
    def tangent_projector(self) -> RatMatrix:
        """Orthogonal projector onto the direction space of the simplex."""
        if not self.dim:
            return RatMatrix.zeros(self.ambient, self.ambient)
        return self.edges @ self._pseudo_inverse

    def barycentric(self, point: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        """
        Barycentric coordinates of the orthogonal projection of `point` on the affine hull.
        Points outside the simplex get negative coordinates.
        """
        if not self.dim:
            return (ONE,)
        local = self._pseudo_inverse.apply(sub(point, self.points[0]))
        return (ONE - sum(local, ZERO),) + local

    def in_affine_hull(self, point: Sequence[Fraction]) -> bool:
        return tuple(self.from_barycentric(self.barycentric(point))) == tuple(point)

    def from_barycentric(self, weights: Sequence[Fraction]) -> Point:
        return tuple(
            sum((w * p[j] for w, p in zip(weights, self.points)), ZERO)
            for j in range(self.ambient)
        )

    def contains(self, point: Sequence[Fraction]) -> bool:
        return self.in_affine_hull(point) and all(c >= 0 for c in self.barycentric(point))

    def contains_strictly(self, point: Sequence[Fraction]) -> bool:
        """Open (relative) interior test; a vertex is its own interior."""
        return self.in_affine_hull(point) and all(c > 0 for c in self.barycentric(point))

    def contains_simplex(self, other: "Simplex") -> bool:
        return all(self.contains(p) for p in other.points)

    @cached_property
    def isobarycenter(self) -> Point:
        return isobarycenter(self.points)

    @cached_property
    def circumcenter(self) -> Point:
        """The point of the affine hull equidistant from all vertices."""
        if not self.dim:
            return self.points[0]
        gram = self.edges.T @ self.edges
        rhs = RatMatrix.from_columns(
            [[gram.entries[i][i] / 2 for i in range(self.dim)]], self.dim
        )
        weights = solve(gram, rhs)
        if weights is None:
            raise DegenerateSimplex(f"Degenerate simplex {self}.")
        return add(self.points[0], self.edges.apply(weights.column(0)))

    @cached_property
    def signed_volume(self) -> Fraction:
        """Signed volume; only defined for full-dimensional simplices."""
        if self.dim != self.ambient:
            raise ValueError(f"Signed volume of a {self.dim}-simplex in R^{self.ambient}.")
        return determinant(self.edges) / factorial(self.dim)

    def facets(self) -> Tuple["Simplex", ...]:
        return tuple(
            Simplex(tuple(p for j, p in enumerate(self.points) if j != i))
            for i in range(len(self.points))
        )

    def faces(self, k: int) -> Tuple["Simplex", ...]:
        return tuple(Simplex(c) for c in combinations(self.points, k + 1))

    def lattice(self, degree: int) -> Tuple[Point, ...]:
        """Points with barycentric coordinates in (1/degree)ℕ; the vertices for degree 0."""
        if degree == 0:
            return (self.isobarycenter,)
        return tuple(
            self.from_barycentric([Fraction(a, degree) for a in alpha])
            for alpha in compositions(degree, len(self.points))
        )

    def sorted(self) -> "Simplex":
        return Simplex(tuple(sorted(self.points)))

    def __str__(self) -> str:
        return "[" + ", ".join(format_point(p) for p in self.points) + "]"


def compositions(total: int, parts: int) -> Tuple[Tuple[int, ...], ...]:
    """All multi-indices of length `parts` summing to `total`, in descending lexicographic order."""
    if parts == 1:
        return ((total,),)
    result = []
    for first in range(total, -1, -1):
        for rest in compositions(total - first, parts - 1):
            result.append((first,) + rest)
    return tuple(result)


def relative_volume(reference: Simplex, other: Simplex) -> Fraction:
    """
    Signed volume of `other` (same dimension, in the affine hull of `reference`) in units of the
    volume of `reference`.
    """
    if reference.dim != other.dim:
        raise ValueError("Volume comparison needs simplices of equal dimension.")
    if not reference.dim:
        return ONE
    pseudo_inverse = reference._pseudo_inverse
    local = RatMatrix.from_columns(
        [pseudo_inverse.apply(sub(p, other.points[0])) for p in other.points[1:]], reference.dim
    )
    return determinant(local)


def orientation_sign(reference: Simplex, other: Simplex) -> int:
    """
    +1 or -1 depending on whether `other` (same dimension, lying in the affine hull of `reference`)
    is oriented like `reference`; 0 if degenerate.
    """
    det = relative_volume(reference, other)
    return (det > 0) - (det < 0)


def locate(pieces: Sequence[Simplex], point: Sequence[Fraction]) -> Optional[int]:
    for index, piece in enumerate(pieces):
        if piece.contains(point):
            return index
    return None


def _separates(plane: Sequence[Point], first: Simplex, second: Simplex) -> bool:
    """Whether the hyperplane through `plane` leaves the simplices on opposite closed sides."""
    origin = plane[0]
    normals = nullspace(
        RatMatrix.from_rows([sub(p, origin) for p in plane[1:]], len(origin))
    ).columns()
    if len(normals) != 1:
        return False
    (normal,) = normals
    below = [dot(normal, sub(p, origin)) for p in first.points]
    above = [dot(normal, sub(p, origin)) for p in second.points]
    return (max(below) <= 0 <= min(above)) or (min(below) >= 0 >= max(above))


def interiors_meet(first: Simplex, second: Simplex) -> bool:
    """
    Exact overlap test for two full-dimensional simplices. Their interiors are disjoint iff some
    hyperplane through n of their vertices separates them; facet hyperplanes are tried first.
    """
    for axis in range(first.ambient):
        low = [p[axis] for p in first.points]
        high = [p[axis] for p in second.points]
        if max(low) <= min(high) or max(high) <= min(low):
            return False
    n = first.ambient
    vertices = tuple(dict.fromkeys(first.points + second.points))
    candidates = chain(
        combinations(first.points, n), combinations(second.points, n), combinations(vertices, n)
    )
    return not any(_separates(plane, first, second) for plane in candidates)
