"""
The Clough-Tocher family on the split R_1 of a triangulation, every triangle coned at its inpoint.

All families use double traces (u, du) at degree 0. The full and high order complexes keep double
traces throughout; the DG variants switch to traces at degree 1 and pullbacks at degree 2.

    ct-full        C1 P3 -> C0d P2 Λ1 -> C0 P1 Λ2           (12, 15, 4)
    ct-minimal     ct-full with affine normal data on the outer edges   (9, 12, 4)
    ct-dg          ct-full A^0 -> C0 P2 Λ1 -> P1 Λ2          (12, 20, 9)
    ct-dg-minimal  ct-minimal A^0 -> d A^0 + p_W dx∧dy -> P0 Λ2   (9, 9, 1)
    ct-highorder   ct-full at polynomial degree p ≥ 3
"""

import logging
from typing import Dict, Tuple, Union

from fesc.elements.common import (
    admissibility_defect,
    cell_carriers,
    common_vertex,
    realize,
    require_affine_normal,
    whole_space,
    zero_space,
)
from fesc.exceptions import SplitError
from fesc.fes import DOUBLE_TRACE, PULLBACK, TRACE, FESystem, RestrictionKind, jet_layouts
from fesc.polyform import Carrier, PolyForm
from fesc.simplicial import Cell, SimplicialComplex
from fesc.spaces import ConstraintSystem, Continuity, FormLayout, FormSpace, constrained_space
from fesc.splits import InpointAssignment, refine

log = logging.getLogger(__name__)

TOP_CONTINUITY = (Continuity.C1, Continuity.C0D, Continuity.C0)
Inpoints = Union[None, str, InpointAssignment]


def _check_planar(mesh: SimplicialComplex) -> None:
    if mesh.ambient != 2 or mesh.dim != 2:
        raise SplitError(
            f"Clough-Tocher elements live on planar triangulations, got a {mesh.dim}-complex "
            f"in R^{mesh.ambient}."
        )


def _top_system(carrier: Carrier, k: int, p: int, name: str) -> ConstraintSystem:
    system = ConstraintSystem(jet_layouts(carrier, DOUBLE_TRACE, k, p - k), name)
    system.require_continuity(0, TOP_CONTINUITY[k])
    system.require_zero(lambda jet: jet[1] - jet[0].d())
    return system


def top_space(carrier: Carrier, k: int, p: int = 3) -> FormSpace:
    return _top_system(carrier, k, p, f"CT{p}^{k}").solve()


def minimal_top_space(carrier: Carrier, k: int) -> FormSpace:
    system = _top_system(carrier, k, 3, f"CTmin^{k}")
    if k < 2:
        require_affine_normal(system, 1 - k, carrier.boundary_facets)
    return system.solve()


def _edge_system(carrier: Carrier, k: int, p: int, name: str) -> ConstraintSystem:
    system = ConstraintSystem(jet_layouts(carrier, DOUBLE_TRACE, k, p - k), name)
    system.require_zero(admissibility_defect)
    return system


def edge_space(carrier: Carrier, k: int, p: int = 3) -> FormSpace:
    """Admissible pairs on an edge: dims 2p + 1, 3p - 1, p - 1."""
    return _edge_system(carrier, k, p, f"CT{p}^{k}(E)").solve()


def minimal_edge_space(carrier: Carrier, k: int) -> FormSpace:
    system = _edge_system(carrier, k, 3, f"CTmin^{k}(E)")
    if k < 2:
        require_affine_normal(system, 1 - k, carrier.pieces)
    return system.solve()


def vertex_space(carrier: Carrier, k: int) -> FormSpace:
    return whole_space(carrier, DOUBLE_TRACE, k, 0, f"jet^{k}(V)")


def _carriers(mesh: SimplicialComplex, inpoints: Inpoints) -> Dict[Cell, Carrier]:
    _check_planar(mesh)
    return cell_carriers(mesh, refine(mesh, 1, inpoints))


def clough_tocher(
    mesh: SimplicialComplex, p: int = 3, inpoints: Inpoints = None, *, validate: bool = True
) -> FESystem:
    """ct-full for p = 3, ct-highorder above."""
    carriers = _carriers(mesh, inpoints)

    def builder(cell: Cell, k: int) -> FormSpace:
        carrier = carriers[cell]
        if len(cell) == 1:
            return vertex_space(carrier, k)
        if len(cell) == 2:
            return edge_space(carrier, k, p)
        return top_space(carrier, k, p)

    name = "ct-full" if p == 3 else f"ct-highorder-{p}"
    return realize(name, mesh, (DOUBLE_TRACE,) * 3, carriers, builder, validate=validate)


def clough_tocher_minimal(
    mesh: SimplicialComplex, inpoints: Inpoints = None, *, validate: bool = True
) -> FESystem:
    carriers = _carriers(mesh, inpoints)

    def builder(cell: Cell, k: int) -> FormSpace:
        carrier = carriers[cell]
        if len(cell) == 1:
            return vertex_space(carrier, k)
        if len(cell) == 2:
            return minimal_edge_space(carrier, k)
        return minimal_top_space(carrier, k)

    return realize("ct-minimal", mesh, (DOUBLE_TRACE,) * 3, carriers, builder, validate=validate)


DG_KINDS: Tuple[RestrictionKind, ...] = (DOUBLE_TRACE, TRACE, PULLBACK)


def clough_tocher_dg(
    mesh: SimplicialComplex, inpoints: Inpoints = None, *, validate: bool = True
) -> FESystem:
    carriers = _carriers(mesh, inpoints)

    def builder(cell: Cell, k: int) -> FormSpace:
        carrier = carriers[cell]
        if k == 0:
            if len(cell) == 1:
                return vertex_space(carrier, 0)
            return edge_space(carrier, 0) if len(cell) == 2 else top_space(carrier, 0)
        if k == 1:
            if len(cell) == 3:
                return constrained_space(carrier, 2, 1, Continuity.C0)
            return whole_space(carrier, TRACE, 1, 2 if len(cell) == 2 else 0)
        if len(cell) == 3:
            return whole_space(carrier, PULLBACK, 2, 1, "P1Λ2")
        return zero_space(carrier, PULLBACK, 2)

    return realize("ct-dg", mesh, DG_KINDS, carriers, builder, validate=validate)


def _minimal_dg_one_forms(carrier: Carrier) -> FormSpace:
    """d A^0 + span{p_W dx∧dy}, W the cone vertex."""
    center = common_vertex(carrier)
    layout = FormLayout(carrier, 1, 2)
    area = PolyForm.constant(carrier, {(0, 1): 1})
    forms = [u.d() for u in minimal_top_space(carrier, 0).forms()] + [area.poincare(center)]
    return FormSpace.span((layout,), forms, "CTdgmin^1")


def _minimal_dg_edge_one_forms(carrier: Carrier) -> FormSpace:
    system = ConstraintSystem(jet_layouts(carrier, TRACE, 1, 2), "CTdgmin^1(E)")
    require_affine_normal(system, 0, carrier.pieces)
    return system.solve()


def clough_tocher_dg_minimal(
    mesh: SimplicialComplex, inpoints: Inpoints = None, *, validate: bool = True
) -> FESystem:
    carriers = _carriers(mesh, inpoints)

    def builder(cell: Cell, k: int) -> FormSpace:
        carrier = carriers[cell]
        if k == 0:
            if len(cell) == 1:
                return vertex_space(carrier, 0)
            if len(cell) == 2:
                return minimal_edge_space(carrier, 0)
            return minimal_top_space(carrier, 0)
        if k == 1:
            if len(cell) == 3:
                return _minimal_dg_one_forms(carrier)
            if len(cell) == 2:
                return _minimal_dg_edge_one_forms(carrier)
            return whole_space(carrier, TRACE, 1)
        if len(cell) == 3:
            return whole_space(carrier, PULLBACK, 2, 0, "P0Λ2")
        return zero_space(carrier, PULLBACK, 2)

    return realize("ct-dg-minimal", mesh, DG_KINDS, carriers, builder, validate=validate)


def minimal_cross_check(system: FESystem, cell: Cell) -> bool:
    """
    On a ct-minimal top cell, A^1 is spanned by the differentials of A^0 and the cone images
    (p_W w, w) of A^2.
    """
    assert system.realization is not None
    spaces = system.realization.spaces
    one_forms = spaces[cell, 1]
    center = common_vertex(one_forms.carrier)
    jets = [(u[1], PolyForm.zero(u[1].carrier, 2)) for u in spaces[cell, 0].elements]
    jets += [(w[0].poincare(center), w[0]) for w in spaces[cell, 2].elements]
    return FormSpace.span(one_forms.layouts, jets).equals(one_forms)
