"""Shared builders for the element families."""

import logging
from typing import Callable, Dict, Sequence, Tuple

from fesc.fes import (
    FESystem,
    Realization,
    RestrictionKind,
    build_system,
    jet_layouts,
    restrict_jet,
)
from fesc.geometry import Point, Simplex, sub
from fesc.polyform import Carrier, PolyForm, affine_defect
from fesc.simplicial import Cell, SimplicialComplex, subcells
from fesc.spaces import ConstraintSystem, FormSpace, Jet
from fesc.splits import RefinedComplex
from fesc.threads import parallel_map

log = logging.getLogger(__name__)

SpaceBuilder = Callable[[Cell, int], FormSpace]


def cell_carriers(mesh: SimplicialComplex, rc: RefinedComplex) -> Dict[Cell, Carrier]:
    return {cell: Carrier.of(rc, cell) for cell in mesh.all_cells}


def whole_space(
    carrier: Carrier, kind: RestrictionKind, k: int, p: int = 0, name: str = ""
) -> FormSpace:
    return FormSpace.whole(jet_layouts(carrier, kind, k, p), name)


def zero_space(
    carrier: Carrier, kind: RestrictionKind, k: int, p: int = 0, name: str = ""
) -> FormSpace:
    return FormSpace.zero(jet_layouts(carrier, kind, k, p), name)


def edge_normal(edge: Simplex) -> Point:
    """A normal of a planar edge: the tangent turned by a quarter."""
    tangent = sub(edge.points[1], edge.points[0])
    return (-tangent[1], tangent[0])


def normal_trace(form: PolyForm, edge: Simplex) -> PolyForm:
    """(form ⌞ ν) restricted to `edge`, which must be a boundary facet of the form's carrier."""
    return form.contract(edge_normal(edge)).trace(Carrier.single(edge), check=False)


def require_affine_normal(
    system: ConstraintSystem, component: int, edges: Sequence[Simplex]
) -> None:
    """The normal component of one jet component is affine along each of `edges`."""
    for edge in edges:
        system.require_zero(
            lambda jet, edge=edge: affine_defect(normal_trace(jet[component], edge), edge)
        )


def admissibility_defect(jet: Jet) -> PolyForm:
    return jet[0].project().d().project() - jet[1].project()


def common_vertex(carrier: Carrier) -> Point:
    """The point shared by every piece of a coned carrier."""
    shared = set(carrier.pieces[0].points)
    for piece in carrier.pieces[1:]:
        shared &= set(piece.points)
    if len(shared) != 1:
        raise ValueError(f"The pieces share {len(shared)} points, expected a single cone vertex.")
    return next(iter(shared))


def narrow_to_faces(
    mesh: SimplicialComplex,
    kinds: Tuple[RestrictionKind, ...],
    carriers: Dict[Cell, Carrier],
    spaces: Dict[Tuple[Cell, int], FormSpace],
) -> Dict[Tuple[Cell, int], FormSpace]:
    """Keeps the elements whose facet restrictions land, by increasing cell dimension."""
    narrowed = dict(spaces)

    def narrow(key: Tuple[Cell, int]) -> FormSpace:
        cell, k = key
        space = narrowed[key]
        for face in subcells(cell, len(cell) - 2):
            space = space.preimage(
                lambda jet, face=face: restrict_jet(jet, kinds[k], carriers[face]),
                narrowed[face, k],
            )
        if space.dim < spaces[key].dim:
            log.info(
                "%s: %s elements do not restrict into the facet spaces",
                space.name,
                spaces[key].dim - space.dim,
            )
        return space

    for d in range(1, mesh.dim + 1):
        keys = [(cell, k) for cell in mesh.cells(d) for k in range(len(kinds))]
        narrowed.update(zip(keys, parallel_map(narrow, keys)))
    return narrowed


def realize(
    name: str,
    mesh: SimplicialComplex,
    kinds: Tuple[RestrictionKind, ...],
    carriers: Dict[Cell, Carrier],
    builder: SpaceBuilder,
    *,
    validate: bool = True,
    narrow: bool = False,
) -> FESystem:
    """
    Builds every cell space with `builder`, then the system over the whole mesh. With `narrow`,
    the cell spaces are first cut down to the elements whose restrictions land in the facet
    spaces.
    """
    keys = [(cell, k) for cell in mesh.all_cells for k in range(len(kinds))]
    spaces = dict(zip(keys, parallel_map(lambda key: builder(*key), keys)))
    if narrow:
        spaces = narrow_to_faces(mesh, kinds, carriers, spaces)
    log.info("%s: %s cell spaces built over %s cells", name, len(spaces), len(mesh.all_cells))
    return build_system(name, Realization(mesh, kinds, carriers, spaces), validate=validate)
