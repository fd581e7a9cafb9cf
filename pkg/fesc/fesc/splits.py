"""
m-refinements R_m of simplicial meshes.

Every cell of dimension greater than m gets an inpoint. The top pieces of R_m(T) are the simplices
spanned by an m-face T' of T together with the inpoints of a maximal chain T' ⊂ T_0 ⊂ ... ⊂ T_k = T.
On a triangle, R_1 is Clough-Tocher and R_0 the barycentric (Powell-Sabin) split; on a
tetrahedron R_2 is Alfeld, R_1 Worsey-Farin and R_0 Worsey-Piper.

Refined vertex ids: the base vertices keep their ids, then come the inpoints ordered by
(dimension, cell).
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
import logging
from typing import Dict, Iterable, List, Mapping, Optional, Tuple, Union

from fesc.exceptions import InpointError, SplitError
from fesc.geometry import Point, Simplex, format_point, sub, vector_rank
from fesc.linalg import RatMatrix, determinant
from fesc.meshes import Parents
from fesc.simplicial import Cell, SimplicialComplex, is_face, subcells

log = logging.getLogger(__name__)

STRATEGIES = ("isobarycenter", "circumcenter", "worsey-farin", "worsey-piper")


@dataclass(frozen=True)
class InpointAssignment:
    points: Mapping[Cell, Point]
    strategy: str = "explicit"

    def __getitem__(self, cell: Cell) -> Point:
        if len(cell) == 1:
            raise KeyError(f"Vertex {cell} has no inpoint; it is its own.")
        return self.points[cell]

    def __contains__(self, cell: object) -> bool:
        return cell in self.points


def isobarycenter_inpoints(mesh: SimplicialComplex) -> InpointAssignment:
    return InpointAssignment(
        {cell: mesh.simplex(cell).isobarycenter for cell in mesh.all_cells if len(cell) > 1},
        "isobarycenter",
    )


def circumcenter_inpoints(mesh: SimplicialComplex) -> InpointAssignment:
    return InpointAssignment(
        {cell: mesh.simplex(cell).circumcenter for cell in mesh.all_cells if len(cell) > 1},
        "circumcenter",
    )


def _hyperplane_height(facet: Simplex, point: Point) -> Fraction:
    """Signed height of `point` above the hyperplane of a codimension-1 simplex (up to a factor)."""
    columns = [sub(p, facet.points[0]) for p in facet.points[1:]] + [sub(point, facet.points[0])]
    return determinant(RatMatrix.from_columns(columns, facet.ambient))


def worsey_farin_inpoints(
    mesh: SimplicialComplex, cell_inpoints: Optional[Mapping[Cell, Point]] = None
) -> InpointAssignment:
    """
    Facet inpoints on the segments joining the inpoints of the two adjacent top cells; boundary
    facets and lower faces get isobarycenters. In 3D this is the Worsey-Farin split and in 2D the
    Powell-Sabin edge placement.
    """
    n = mesh.ambient
    if mesh.dim != n:
        raise SplitError("Worsey-Farin inpoints need a full-dimensional mesh.")
    points: Dict[Cell, Point] = dict(isobarycenter_inpoints(mesh).points)
    points.update(cell_inpoints or {})
    for facet in mesh.cells(n - 1):
        cofaces = mesh.cofaces(facet)
        if len(cofaces) != 2:
            continue
        simplex = mesh.simplex(facet)
        first, second = (points[c] for c in cofaces)
        h_first, h_second = _hyperplane_height(simplex, first), _hyperplane_height(simplex, second)
        if h_first * h_second >= 0:
            raise SplitError(
                f"The inpoints of {cofaces[0]} and {cofaces[1]} are not on both sides of {facet}."
            )
        t = h_first / (h_first - h_second)
        crossing = tuple(a + t * (b - a) for a, b in zip(first, second))
        if not simplex.contains_strictly(crossing):
            raise SplitError(
                f"The segment joining the inpoints of {cofaces[0]} and {cofaces[1]} crosses the "
                f"hyperplane of {facet} at {format_point(crossing)}, outside the open facet."
            )
        points[facet] = crossing
    return InpointAssignment(points, "worsey-farin")


def worsey_piper_inpoints(mesh: SimplicialComplex) -> InpointAssignment:
    """Circumcenters everywhere, on a mesh whose simplices of dimension ≥ 2 are strictly acute."""
    for cell in mesh.all_cells:
        if len(cell) < 3:
            continue
        simplex = mesh.simplex(cell)
        if not simplex.contains_strictly(simplex.circumcenter):
            raise SplitError(f"Simplex {cell} {simplex} is not strictly acute.")
    assignment = InpointAssignment(circumcenter_inpoints(mesh).points, "worsey-piper")
    check_alignment(mesh, assignment)
    return assignment


def inpoint_of(mesh: SimplicialComplex, inpoints: InpointAssignment, cell: Cell) -> Point:
    return mesh.points[cell[0]] if len(cell) == 1 else inpoints[cell]


def check_alignment(mesh: SimplicialComplex, inpoints: InpointAssignment) -> None:
    """
    For every cell U of dimension d, the inpoints of the cells containing U span an affine space
    of dimension at most n - d together with W_U. In 3D: face inpoints on the segment between the
    adjacent tetrahedra inpoints, edge inpoints coplanar with the inpoints around them.
    """
    n = mesh.ambient
    for cell in mesh.all_cells:
        if len(cell) == 1:
            continue
        center = inpoint_of(mesh, inpoints, cell)
        around = [
            sub(inpoint_of(mesh, inpoints, other), center)
            for other in mesh.all_cells
            if len(other) > len(cell) and is_face(cell, other)
        ]
        allowed = n - (len(cell) - 1)
        if vector_rank(around, n) > allowed:
            raise SplitError(
                f"The inpoints around {cell} span more than {allowed} dimensions."
            )


def inpoints_for(mesh: SimplicialComplex, strategy: str) -> InpointAssignment:
    if strategy == "isobarycenter":
        return isobarycenter_inpoints(mesh)
    if strategy == "circumcenter":
        return circumcenter_inpoints(mesh)
    if strategy == "worsey-farin":
        return worsey_farin_inpoints(mesh)
    if strategy == "worsey-piper":
        return worsey_piper_inpoints(mesh)
    raise ValueError(f"Unknown inpoint strategy {strategy!r}; expected one of {STRATEGIES}.")


@dataclass(frozen=True)
class RefinedComplex:
    base: SimplicialComplex
    m: int
    refined: SimplicialComplex
    origins: Tuple[Cell, ...]
    inpoints: InpointAssignment = field(compare=False)

    @cached_property
    def parent(self) -> Dict[Cell, Cell]:
        """Smallest base cell containing each refined cell."""
        return {
            cell: tuple(sorted({v for r in cell for v in self.origins[r]}))
            for cell in self.refined.all_cells
        }

    @cached_property
    def _children(self) -> Dict[Cell, Tuple[Cell, ...]]:
        children: Dict[Cell, List[Cell]] = {}
        for cell in self.refined.all_cells:
            children.setdefault(self.parent[cell], []).append(cell)
        return {parent: tuple(cells) for parent, cells in children.items()}

    def children(self, base_cell: Cell) -> Tuple[Cell, ...]:
        return self._children.get(base_cell, ())

    def pieces(self, base_cell: Cell) -> Tuple[Cell, ...]:
        """Refined cells of the same dimension as `base_cell`, tiling it."""
        return tuple(cell for cell in self.children(base_cell) if len(cell) == len(base_cell))

    def piece_simplices(self, base_cell: Cell) -> Tuple[Simplex, ...]:
        return tuple(self.refined.simplex(cell) for cell in self.pieces(base_cell))

    def parent_block(self) -> Parents:
        base_ids = {cell: i for i, cell in enumerate(self.base.all_cells)}
        return {i: base_ids[self.parent[top]] for i, top in enumerate(self.refined.tops)}


def _chains(face: Cell, top: Cell) -> List[List[Cell]]:
    """Maximal chains face ⊂ T_0 ⊂ ... ⊂ top, excluding `face` itself."""
    if len(face) == len(top):
        return [[]]
    chains = []
    for vertex in top:
        if vertex in face:
            continue
        bigger = tuple(sorted(face + (vertex,)))
        chains.extend([bigger] + rest for rest in _chains(bigger, top))
    return chains


def refine(
    mesh: SimplicialComplex,
    m: int,
    inpoints: Union[None, str, InpointAssignment] = None,
) -> RefinedComplex:
    if m < 0:
        raise ValueError(f"Refinement index must be non-negative, got {m}.")
    if inpoints is None:
        inpoints = isobarycenter_inpoints(mesh)
    elif isinstance(inpoints, str):
        inpoints = inpoints_for(mesh, inpoints)

    coned = sorted((c for c in mesh.all_cells if len(c) - 1 > m), key=lambda c: (len(c), c))
    for cell in coned:
        if cell not in inpoints:
            raise InpointError(f"Simplex {cell} has no inpoint.")
        if not mesh.simplex(cell).contains_strictly(inpoints[cell]):
            raise InpointError(
                f"Inpoint {format_point(inpoints[cell])} is not interior to simplex {cell}."
            )
    points: List[Point] = list(mesh.points)
    origins: List[Cell] = [(v,) for v in range(len(mesh.points))]
    inpoint_id: Dict[Cell, int] = {}
    for cell in coned:
        inpoint_id[cell] = len(points)
        points.append(inpoints[cell])
        origins.append(cell)

    tops: List[Cell] = []
    for top in mesh.tops:
        if len(top) - 1 <= m:
            tops.append(top)
            continue
        for face in subcells(top, m):
            for chain in _chains(face, top):
                tops.append(face + tuple(inpoint_id[c] for c in chain))
    # coned from interior inpoints, the pieces tile each cell
    refined = SimplicialComplex.from_tops(points, tops, check=False)
    refined.check_local()
    log.debug(
        "Refined %s top cells into %s pieces (m=%s, %s inpoints)",
        len(mesh.tops),
        len(refined.tops),
        m,
        inpoints.strategy,
    )
    return RefinedComplex(mesh, m, refined, tuple(origins), inpoints)


def alfeld(
    mesh: SimplicialComplex, inpoints: Union[None, str, InpointAssignment] = None
) -> RefinedComplex:
    return refine(mesh, mesh.dim - 1, inpoints)


@dataclass
class SplitReport:
    checks: Dict[str, bool] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def record(self, name: str, failures: Iterable[str]) -> None:
        failures = list(failures)
        self.checks[name] = not failures
        self.failures.extend(f"{name}: {failure}" for failure in failures)


def _skeleton_failures(rc: RefinedComplex) -> Iterable[str]:
    for k in range(min(rc.m, rc.base.dim) + 1):
        for cell in rc.base.cells(k):
            if cell not in rc.refined or rc.pieces(cell) != (cell,):
                yield f"base cell {cell} is not a cell of the refinement"
        for cell in rc.refined.cells(k):
            if len(rc.parent[cell]) - 1 <= rc.m and rc.parent[cell] != cell:
                yield f"refined cell {cell} subdivides the {rc.m}-skeleton"


def _volume_failures(rc: RefinedComplex) -> Iterable[str]:
    n = rc.base.ambient
    children: Dict[Cell, List[Cell]] = {}
    for top in rc.refined.tops:
        children.setdefault(rc.parent[top], []).append(top)
    for top in rc.base.tops:
        if len(top) - 1 != n:
            continue
        volumes = [rc.refined.simplex(child).signed_volume for child in children.get(top, [])]
        if any(not v for v in volumes):
            yield f"a piece of {top} is degenerate"
        total = sum((abs(v) for v in volumes), Fraction(0))
        expected = abs(rc.base.simplex(top).signed_volume)
        if total != expected:
            yield f"pieces of {top} have total volume {total}, expected {expected}"


def _parent_failures(rc: RefinedComplex) -> Iterable[str]:
    for cell in rc.refined.all_cells:
        parent = rc.parent[cell]
        if parent not in rc.base:
            yield f"refined cell {cell} has no parent cell"
            continue
        container = rc.base.simplex(parent)
        simplex = rc.refined.simplex(cell)
        if not container.contains_simplex(simplex):
            yield f"refined cell {cell} is not inside its parent {parent}"
        elif not container.contains_strictly(simplex.isobarycenter):
            yield f"{parent} is not the smallest cell containing {cell}"


def validate_split(rc: RefinedComplex) -> SplitReport:
    report = SplitReport()
    report.record("skeleton", _skeleton_failures(rc))
    report.record("volume", _volume_failures(rc))
    report.record("parent", _parent_failures(rc))
    for failure in report.failures:
        log.warning("Split check failed: %s", failure)
    return report
