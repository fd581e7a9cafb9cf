"""
Simplicial complexes with exact rational vertices, their subcell lattice, orientations, and the
cellular cochain complex.

Cells are sorted tuples of vertex ids. A cell is oriented by its ascending vertex order; the face
obtained by omitting the vertex at position i carries the sign (-1)^i.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations
import logging
from typing import Dict, FrozenSet, Iterable, List, Set, Tuple

from fesc.exceptions import DegenerateSimplex, GeometryError
from fesc.geometry import Point, Simplex, as_point, interiors_meet, sub
from fesc.linalg import RatMatrix, determinant, rank

log = logging.getLogger(__name__)

Cell = Tuple[int, ...]


def subcells(cell: Cell, k: int) -> List[Cell]:
    """All k-dimensional faces of `cell`, sorted."""
    if k < 0 or k > len(cell) - 1:
        return []
    return sorted(combinations(cell, k + 1))


def all_subcells(cell: Cell) -> List[Cell]:
    """Every face of `cell` including itself, by dimension then vertex order."""
    return [face for k in range(len(cell)) for face in subcells(cell, k)]


def relative_orientation(cell: Cell, face: Cell) -> int:
    if len(face) != len(cell) - 1 or not set(face) <= set(cell):
        return 0
    (omitted,) = [i for i, v in enumerate(cell) if v not in face]
    return -1 if omitted % 2 else 1


def is_face(face: Cell, cell: Cell) -> bool:
    return set(face) <= set(cell)


@dataclass(frozen=True)
class SimplicialComplex:
    """
    A simplicial complex embedded in ℝⁿ. Build it with `from_tops`: every face of the given
    simplices is generated, and the top simplices are checked for local validity (no degenerate
    full-dimensional simplex; every facet shared by at most two of them, lying on opposite sides).
    """

    points: Tuple[Point, ...]
    cells_by_dim: Tuple[Tuple[Cell, ...], ...]
    ambient: int

    @classmethod
    def from_tops(
        cls,
        points: Iterable[Iterable[object]],
        tops: Iterable[Iterable[int]],
        *,
        check: bool = True,
    ) -> "SimplicialComplex":
        points = tuple(as_point(p) for p in points)
        ambient = len(points[0]) if points else 0
        generated: Dict[int, Set[Cell]] = {}
        for top in tops:
            cell = tuple(sorted(top))
            if len(set(cell)) != len(cell):
                raise GeometryError(f"Simplex {cell} repeats a vertex.")
            if any(v < 0 or v >= len(points) for v in cell):
                raise GeometryError(f"Simplex {cell} references an unknown vertex.")
            for face in all_subcells(cell):
                generated.setdefault(len(face) - 1, set()).add(face)
        dim = max(generated) if generated else -1
        complex_ = cls(
            points,
            tuple(tuple(sorted(generated.get(k, ()))) for k in range(dim + 1)),
            ambient,
        )
        if check:
            complex_.validate()
        return complex_

    @property
    def dim(self) -> int:
        return len(self.cells_by_dim) - 1

    def cells(self, k: int) -> Tuple[Cell, ...]:
        if k < 0 or k > self.dim:
            return ()
        return self.cells_by_dim[k]

    @cached_property
    def all_cells(self) -> Tuple[Cell, ...]:
        return tuple(cell for cells in self.cells_by_dim for cell in cells)

    @cached_property
    def _index(self) -> Dict[Cell, int]:
        return {cell: i for cells in self.cells_by_dim for i, cell in enumerate(cells)}

    def index(self, cell: Cell) -> int:
        return self._index[cell]

    def __contains__(self, cell: object) -> bool:
        return cell in self._index

    @cached_property
    def used_vertices(self) -> Tuple[int, ...]:
        return tuple(v for (v,) in self.cells(0))

    @cached_property
    def tops(self) -> Tuple[Cell, ...]:
        """Maximal cells."""
        return tuple(cell for cell in self.all_cells if not self.cofaces(cell))

    @cached_property
    def _cofaces(self) -> Dict[Cell, Tuple[Cell, ...]]:
        cofaces: Dict[Cell, List[Cell]] = {cell: [] for cell in self.all_cells}
        for k in range(1, self.dim + 1):
            for cell in self.cells(k):
                for face in subcells(cell, k - 1):
                    cofaces[face].append(cell)
        return {cell: tuple(sorted(found)) for cell, found in cofaces.items()}

    def cofaces(self, cell: Cell) -> Tuple[Cell, ...]:
        """Cells of dimension one higher having `cell` as a facet."""
        return self._cofaces[cell]

    def star_tops(self, cell: Cell) -> Tuple[Cell, ...]:
        """Top cells containing `cell`."""
        return tuple(top for top in self.tops if is_face(cell, top))

    def simplex(self, cell: Cell) -> Simplex:
        return Simplex(tuple(self.points[v] for v in cell))

    def faces_of(self, cell: Cell) -> List[Cell]:
        return all_subcells(cell)

    @cached_property
    def boundary_cells(self) -> FrozenSet[Cell]:
        """Cells of the boundary: facets of a single top-dimensional cell, and all their faces."""
        boundary: Set[Cell] = set()
        for facet in self.cells(self.dim - 1):
            if len(self.cofaces(facet)) == 1:
                boundary.update(all_subcells(facet))
        return frozenset(boundary)

    def is_boundary(self, cell: Cell) -> bool:
        return cell in self.boundary_cells

    def validate(self) -> None:
        self.check_local()
        self.check_overlaps()

    def check_local(self) -> None:
        """No degenerate top; each facet shared by at most two tops, on opposite sides."""
        for top in self.tops:
            if self.simplex(top).is_degenerate:
                raise DegenerateSimplex(
                    f"Simplex {top} {self.simplex(top)} is degenerate."
                )
        if self.dim != self.ambient:
            return
        for facet in self.cells(self.dim - 1):
            cofaces = self.cofaces(facet)
            if len(cofaces) > 2:
                raise GeometryError(f"Facet {facet} is shared by {len(cofaces)} simplices.")
            if len(cofaces) == 2:
                signs = []
                for coface in cofaces:
                    (apex,) = set(coface) - set(facet)
                    signs.append(
                        determinant(
                            RatMatrix.from_columns(
                                [sub(self.points[v], self.points[apex]) for v in facet],
                                self.ambient,
                            )
                        )
                    )
                if signs[0] * signs[1] >= 0:
                    raise GeometryError(
                        f"Simplices {cofaces} overlap: they lie on the same side of facet {facet}."
                    )

    def check_overlaps(self) -> None:
        """No two full-dimensional cells share interior points."""
        if self.dim != self.ambient:
            return
        for first, second in combinations(self.cells(self.dim), 2):
            if len(set(first) & set(second)) == self.dim:
                continue
            if interiors_meet(self.simplex(first), self.simplex(second)):
                raise GeometryError(f"Simplices {first} and {second} overlap.")

    def subcomplex(self, cells: Iterable[Cell]) -> "SimplicialComplex":
        """The closure of `cells`, sharing this complex's vertex numbering."""
        return SimplicialComplex.from_tops(self.points, cells, check=False)

    def boundary(self, cell: Cell) -> "SimplicialComplex":
        """∂T as a complex; empty for a vertex."""
        return self.subcomplex(subcells(cell, len(cell) - 2))

    def closure(self, cells: Iterable[Cell]) -> FrozenSet[Cell]:
        return frozenset(face for cell in cells for face in all_subcells(cell))


def coboundary_matrix(complex_: SimplicialComplex, k: int) -> RatMatrix:
    """Matrix of δ: 𝒞^k → 𝒞^{k+1} in the canonical cell bases."""
    rows = complex_.cells(k + 1)
    cols = complex_.cells(k)
    column_index = {cell: j for j, cell in enumerate(cols)}
    entries = [[Fraction(0)] * len(cols) for _ in rows]
    for i, cell in enumerate(rows):
        for face in subcells(cell, k):
            entries[i][column_index[face]] = Fraction(relative_orientation(cell, face))
    return RatMatrix.from_rows(entries, len(cols))


def cellular_cohomology(complex_: SimplicialComplex) -> Tuple[int, ...]:
    """Betti numbers nullity(δ^k) - rank(δ^{k-1}), for k = 0..dim."""
    ranks = [rank(coboundary_matrix(complex_, k)) for k in range(complex_.dim + 1)]
    return tuple(
        len(complex_.cells(k)) - ranks[k] - (ranks[k - 1] if k else 0)
        for k in range(complex_.dim + 1)
    )


@dataclass(frozen=True)
class Cochain:
    degree: int
    values: Tuple[Fraction, ...]

    def coboundary(self, complex_: SimplicialComplex) -> "Cochain":
        if len(self.values) != len(complex_.cells(self.degree)):
            raise ValueError(
                f"Cochain of length {len(self.values)} does not match the {self.degree}-cells."
            )
        return Cochain(
            self.degree + 1, coboundary_matrix(complex_, self.degree).apply(self.values)
        )
