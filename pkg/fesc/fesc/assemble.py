"""
Global spaces over a mesh: families of cell elements that agree on shared faces, the global
complex they form, and its comparison with the cellular cohomology of the mesh.
"""

from dataclasses import dataclass
from fractions import Fraction
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple

from fesc.elements.catalog import ElementSpec, build
from fesc.exceptions import FESystemError
from fesc.fes import (
    FamilySpace,
    FESystem,
    check_commuting,
    harmonic_dofs,
    inverse_limit_space,
    source_jets,
    zero_boundary_coordinates,
)
from fesc.linalg import RatMatrix, rank, solve, vstack
from fesc.polyform import Carrier, PolyForm
from fesc.simplicial import Cell, SimplicialComplex, cellular_cohomology
from fesc.spaces import Jet

log = logging.getLogger(__name__)


@dataclass
class GlobalSpace:
    """
    A^k(𝒯): one column of `family.basis` per global element, in the coordinates of every cell
    space. `blocks` numbers the global degrees of freedom, one block of dim A^k_0(T) per cell.
    """

    spec: Optional[ElementSpec]
    mesh: SimplicialComplex
    system: FESystem
    k: int
    family: FamilySpace
    blocks: Dict[Cell, Tuple[int, int]]

    @property
    def dim(self) -> int:
        return self.family.dim

    @property
    def dof_count(self) -> int:
        return max((end for _, end in self.blocks.values()), default=0)

    def local(self, vector: Sequence[Fraction], cell: Cell) -> Tuple[Fraction, ...]:
        """Coordinates in A^k(cell) of the global element with coordinates `vector`."""
        return self.local_matrix(cell).apply(vector)

    def local_matrix(self, cell: Cell) -> RatMatrix:
        """The map from global coordinates to coordinates in A^k(cell)."""
        i = self.family.cells.index(cell)
        rows = range(self.family.offsets[i], self.family.offsets[i + 1])
        return self.family.basis.select_rows(rows)

    def jet(self, vector: Sequence[Fraction], cell: Cell) -> Jet:
        assert self.system.realization is not None
        return self.system.realization.spaces[cell, self.k].combine(self.local(vector, cell))

    def spot_check(self) -> bool:
        """The restrictions of every top cell element match the shared face blocks exactly."""
        probe = tuple(Fraction(j + 1, j + 2) for j in range(self.dim))
        for cell in self.system.top_cells:
            coordinates = self.local(probe, cell)
            for face in self.system.faces(cell):
                restricted = self.system.restriction(face, cell, self.k).apply(coordinates)
                if tuple(restricted) != self.local(probe, face):
                    return False
        return True


def _resolve(
    mesh: SimplicialComplex, spec: Optional[ElementSpec], system: Optional[FESystem]
) -> FESystem:
    if system is not None:
        return system
    if spec is None:
        raise ValueError("Either an element spec or a built system is required.")
    return build(spec, mesh)


def global_space(
    mesh: SimplicialComplex,
    spec: Optional[ElementSpec],
    k: int,
    system: Optional[FESystem] = None,
) -> GlobalSpace:
    system = _resolve(mesh, spec, system)
    family = inverse_limit_space(system, k)
    blocks: Dict[Cell, Tuple[int, int]] = {}
    offset = 0
    for cell in family.cells:
        size = zero_boundary_coordinates(system, cell, k).cols
        blocks[cell] = (offset, offset + size)
        offset += size
    if offset != family.dim:
        raise FESystemError(
            f"{system.name}: {family.dim} global elements of degree {k} for {offset} degrees of "
            "freedom; the cell spaces do not extend."
        )
    log.debug("%s: global A^%s of dim %s", system.name, k, family.dim)
    return GlobalSpace(spec, mesh, system, k, family, blocks)


def global_differential(source: GlobalSpace, target: GlobalSpace) -> RatMatrix:
    """d: A^k(𝒯) -> A^{k+1}(𝒯) in global coordinates."""
    system = source.system
    blocks = [
        system.differential(cell, source.k) @ source.local_matrix(cell)
        for cell in source.family.cells
    ]
    image = vstack(*blocks) if blocks else RatMatrix.zeros(0, source.dim)
    coordinates = solve(target.family.basis, image)
    if coordinates is None:
        raise FESystemError(f"{system.name}: d does not map global elements to global elements.")
    return coordinates


@dataclass
class DeRhamReport:
    element: str
    dims: Tuple[int, ...]
    ranks: Tuple[int, ...]
    cohomology: Tuple[int, ...]
    expected: Tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.cohomology == self.expected

    def to_json(self) -> Dict[str, Any]:
        return {
            "element": self.element,
            "dims": list(self.dims),
            "ranks": list(self.ranks),
            "cohomology": list(self.cohomology),
            "cellular": list(self.expected),
            "ok": self.ok,
        }


def de_rham_check(
    mesh: SimplicialComplex, spec: Optional[ElementSpec], system: Optional[FESystem] = None
) -> DeRhamReport:
    """Cohomology of A^•(𝒯) against the cellular cohomology of the mesh."""
    system = _resolve(mesh, spec, system)
    spaces = [global_space(mesh, spec, k, system) for k in range(system.degree + 1)]
    ranks = tuple(
        rank(global_differential(spaces[k], spaces[k + 1])) for k in range(system.degree)
    )
    dims = tuple(space.dim for space in spaces)
    cohomology = tuple(
        dims[k] - (ranks[k] if k < len(ranks) else 0) - (ranks[k - 1] if k else 0)
        for k in range(len(dims))
    )
    report = DeRhamReport(system.name, dims, ranks, cohomology, cellular_cohomology(mesh))
    log.info("%s: cohomology %s, cellular %s", system.name, cohomology, report.expected)
    return report


def divergence_inclusion_check(
    spec: Optional[ElementSpec], mesh: SimplicialComplex, system: Optional[FESystem] = None
) -> bool:
    """d of the global (n-1)-forms lands in the global n-forms, by an exact solve."""
    system = _resolve(mesh, spec, system)
    n = system.degree
    velocity = global_space(mesh, spec, n - 1, system)
    pressure = global_space(mesh, spec, n, system)
    try:
        image = global_differential(velocity, pressure)
    except FESystemError:
        log.warning("%s: div V_h is not contained in Q_h", system.name)
        return False
    log.debug("%s: rank div = %s, dim Q_h = %s", system.name, rank(image), pressure.dim)
    return True


def smooth_form(carrier: Carrier, k: int) -> PolyForm:
    """A fixed cubic k-form: (x³ - 2y³ + xy + x z) dx_0 ∧ ... ∧ dx_{k-1}."""
    x = [PolyForm.coordinate(carrier, axis) for axis in range(carrier.ambient)]
    u = x[0].wedge(x[0]).wedge(x[0]) - x[1].wedge(x[1]).wedge(x[1]) * 2 + x[0].wedge(x[1])
    if carrier.ambient > 2:
        u = u + x[0].wedge(x[2])
    if not k:
        return u
    return u.wedge(PolyForm.constant(carrier, {tuple(range(k)): 1}))


def commuting_check(system: FESystem) -> List[bool]:
    """I(du) = d(I u) with the harmonic interpolator, for a smooth cubic form of every degree."""
    dofs = harmonic_dofs(system)
    results = []
    for k in range(system.degree):
        jets = source_jets(system, k, lambda carrier, k=k: smooth_form(carrier, k))
        results.append(check_commuting(dofs, k, jets))
    log.info("%s: commuting interpolation %s", system.name, results)
    return results
