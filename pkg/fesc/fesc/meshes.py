"""
Mesh fixtures and the mesh text format.

    # comments are ignored
    dim 2
    v 0 0
    v 1 0
    v 0 1/2
    s 0 1 2
    p 3 5        # optional: refined simplex index -> base simplex id

Coordinates are integers or `p/q` rationals, indices are 0-based. Only top simplices are listed;
lower faces are generated.
"""

from fractions import Fraction
from itertools import permutations
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from fesc.exceptions import MeshFormatError
from fesc.geometry import isobarycenter
from fesc.simplicial import Cell, SimplicialComplex

log = logging.getLogger(__name__)

Parents = Dict[int, int]


def read_mesh(text: str) -> Tuple[SimplicialComplex, Parents]:
    """Parses the mesh text format; returns the complex and the (possibly empty) parent block."""
    dim: Optional[int] = None
    points: List[Tuple[Fraction, ...]] = []
    tops: List[Tuple[int, ...]] = []
    parents: Parents = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].split()
        if not line:
            continue
        keyword, values = line[0], line[1:]
        try:
            if keyword == "dim":
                if dim is not None or len(values) != 1:
                    raise MeshFormatError(f"line {number}: expected a single `dim n` header.")
                dim = int(values[0])
            elif dim is None:
                raise MeshFormatError(f"line {number}: the `dim n` header must come first.")
            elif keyword == "v":
                if len(values) != dim:
                    raise MeshFormatError(f"line {number}: expected {dim} coordinates.")
                points.append(tuple(Fraction(value) for value in values))
            elif keyword == "s":
                if len(values) < 1 or len(values) > dim + 1:
                    raise MeshFormatError(f"line {number}: a simplex has 1 to {dim + 1} vertices.")
                tops.append(tuple(int(value) for value in values))
            elif keyword == "p":
                if len(values) != 2:
                    raise MeshFormatError(f"line {number}: expected `p <child> <base-id>`.")
                parents[int(values[0])] = int(values[1])
            else:
                raise MeshFormatError(f"line {number}: unknown keyword {keyword!r}.")
        except (ValueError, ZeroDivisionError) as exception:
            raise MeshFormatError(f"line {number}: {exception}") from exception
    if dim is None:
        raise MeshFormatError("Missing `dim n` header.")
    if any(v >= len(points) or v < 0 for top in tops for v in top):
        raise MeshFormatError("A simplex references an unknown vertex.")
    return SimplicialComplex.from_tops(points, tops), parents


def load_mesh(path: Union[str, Path]) -> SimplicialComplex:
    return read_mesh(Path(path).read_text(encoding="utf-8"))[0]


def write_mesh(complex_: SimplicialComplex, parents: Optional[Parents] = None) -> str:
    lines = [f"dim {complex_.ambient}"]
    lines.extend("v " + " ".join(str(c) for c in point) for point in complex_.points)
    lines.extend("s " + " ".join(str(v) for v in top) for top in complex_.tops)
    for child, base in sorted((parents or {}).items()):
        lines.append(f"p {child} {base}")
    return "\n".join(lines) + "\n"


def single_simplex(n: int) -> SimplicialComplex:
    """The reference n-simplex: origin plus the unit vectors."""
    points = [[0] * n] + [[1 if j == i else 0 for j in range(n)] for i in range(n)]
    return SimplicialComplex.from_tops(points, [range(n + 1)])


def square_mesh(n: int = 1, pattern: str = "diagonal") -> SimplicialComplex:
    """
    The unit square cut in n × n squares, each split along its (0,0)-(1,1) diagonal, or in four
    triangles around its center for the `crisscross` pattern.
    """
    if pattern not in ("diagonal", "crisscross"):
        raise ValueError(f"Unknown pattern {pattern!r}.")
    points: List[Tuple[Fraction, ...]] = []
    grid: Dict[Tuple[int, int], int] = {}
    for j in range(n + 1):
        for i in range(n + 1):
            grid[i, j] = len(points)
            points.append((Fraction(i, n), Fraction(j, n)))
    tops = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = grid[i, j], grid[i + 1, j], grid[i + 1, j + 1], grid[i, j + 1]
            if pattern == "diagonal":
                tops.extend([(a, b, c), (a, c, d)])
            else:
                center = len(points)
                points.append((Fraction(2 * i + 1, 2 * n), Fraction(2 * j + 1, 2 * n)))
                tops.extend([(a, b, center), (b, c, center), (c, d, center), (d, a, center)])
    return SimplicialComplex.from_tops(points, tops)


def annulus_mesh() -> SimplicialComplex:
    """A square ring: [0,3]² minus (1,2)², in 8 triangles."""
    outer = [(0, 0), (3, 0), (3, 3), (0, 3)]
    inner = [(1, 1), (2, 1), (2, 2), (1, 2)]
    tops = []
    for j in range(4):
        o0, o1, i0, i1 = j, (j + 1) % 4, 4 + j, 4 + (j + 1) % 4
        tops.extend([(o0, o1, i1), (o0, i1, i0)])
    return SimplicialComplex.from_tops(outer + inner, tops)


def cube_mesh() -> SimplicialComplex:
    """The unit cube in six tetrahedra along the main diagonal."""
    points = [((v >> 0) & 1, (v >> 1) & 1, (v >> 2) & 1) for v in range(8)]
    tops = []
    for order in permutations(range(3)):
        path, vertex = [0], 0
        for axis in order:
            vertex |= 1 << axis
            path.append(vertex)
        tops.append(tuple(path))
    return SimplicialComplex.from_tops(points, tops)


def tet_pair_mesh() -> SimplicialComplex:
    """Two regular tetrahedra glued along a face; every simplex is strictly acute."""
    points = [
        (1, 1, 1),
        (1, -1, -1),
        (-1, 1, -1),
        (-1, -1, 1),
        (Fraction(5, 3), Fraction(5, 3), Fraction(-5, 3)),
    ]
    return SimplicialComplex.from_tops(points, [(0, 1, 2, 3), (0, 1, 2, 4)])


def uniform_refine(complex_: SimplicialComplex) -> SimplicialComplex:
    """Red refinement of a triangle mesh: every triangle into four through its edge midpoints."""
    if complex_.dim != 2 or complex_.ambient != 2:
        raise ValueError("Uniform refinement is implemented for planar triangle meshes only.")
    points = list(complex_.points)
    midpoint: Dict[Cell, int] = {}
    for edge in complex_.cells(1):
        midpoint[edge] = len(points)
        points.append(isobarycenter([complex_.points[v] for v in edge]))
    tops = []
    for a, b, c in complex_.tops:
        ab, bc, ac = midpoint[a, b], midpoint[b, c], midpoint[a, c]
        tops.extend([(a, ab, ac), (ab, b, bc), (ac, bc, c), (ab, bc, ac)])
    return SimplicialComplex.from_tops(points, tops)


def refine_levels(complex_: SimplicialComplex, levels: int) -> List[SimplicialComplex]:
    """`levels` meshes, the first being `complex_`, each a uniform refinement of the previous."""
    meshes = [complex_]
    for _ in range(levels - 1):
        meshes.append(uniform_refine(meshes[-1]))
    return meshes


FIXTURES = {
    "triangle": lambda: single_simplex(2),
    "tetrahedron": lambda: single_simplex(3),
    "square": lambda: square_mesh(1),
    "annulus": annulus_mesh,
    "cube": cube_mesh,
    "tet-pair": tet_pair_mesh,
}


def fixture(name: str) -> SimplicialComplex:
    return FIXTURES[name]()


def mesh_summary(complex_: SimplicialComplex) -> Sequence[int]:
    return tuple(len(complex_.cells(k)) for k in range(complex_.dim + 1))
