"""
Unisolvence by exact rank: the explicit functionals of each family on a top cell, the harmonic
functionals on every cell, and for Powell-Sabin the vanishing of C0 P1 forms with constant
differential and zero vertex values.
"""

from dataclasses import dataclass
from fractions import Fraction
import logging
from typing import Any, Callable, Dict, List, Optional, Sequence

from fesc.elements.catalog import DofFamily, ElementName, ElementSpec, build, dof_schema
from fesc.elements.common import edge_normal
from fesc.elements.powell_sabin import PowellSabinSplit
from fesc.fes import FESystem, harmonic_dofs
from fesc.geometry import Simplex, isobarycenter
from fesc.linalg import RatMatrix, rank, ZERO
from fesc.polyform import AltIndex, PolyForm, alt_indices
from fesc.simplicial import Cell
from fesc.spaces import ConstraintSystem, Continuity, FormLayout, FormSpace, Jet

log = logging.getLogger(__name__)

Functional = Callable[[Jet], Fraction]


@dataclass
class UnisolvenceRow:
    element: str
    cell: Cell
    k: int
    dofs: str
    count: int
    dim: int
    rank: int

    @property
    def square(self) -> bool:
        return self.count == self.dim

    @property
    def ok(self) -> bool:
        """Only zero has all its functionals zero."""
        return self.rank == self.dim

    def to_json(self) -> Dict[str, Any]:
        return {
            "cell": list(self.cell),
            "k": self.k,
            "dofs": self.dofs,
            "count": self.count,
            "dim": self.dim,
            "rank": self.rank,
            "square": self.square,
            "ok": self.ok,
        }


@dataclass
class UnisolvenceReport:
    element: str
    rows: List[UnisolvenceRow]

    @property
    def ok(self) -> bool:
        return all(row.ok for row in self.rows)

    def to_json(self) -> Dict[str, Any]:
        return {
            "element": self.element,
            "ok": self.ok,
            "rows": [row.to_json() for row in self.rows],
        }


def _derivative(jet: Jet) -> PolyForm:
    return jet[1] if len(jet) > 1 else jet[0].d()


def _component(form: PolyForm, point: Sequence[Fraction], index: AltIndex) -> Fraction:
    return form.evaluate(point).get(index, ZERO)


def family_functionals(simplex: Simplex, family: DofFamily, k: int) -> List[Functional]:
    """The functionals of one family on the k-forms of a top cell `simplex`."""
    n = simplex.dim
    found: List[Functional] = []
    if family is DofFamily.VERTEX_VALUES:
        for point in simplex.points:
            for index in alt_indices(n, k):
                found.append(
                    lambda jet, point=point, index=index: _component(jet[0], point, index)
                )
    elif family is DofFamily.VERTEX_DIFFERENTIALS:
        if k < n:
            for point in simplex.points:
                for index in alt_indices(n, k + 1):
                    found.append(
                        lambda jet, point=point, index=index: _component(
                            _derivative(jet), point, index
                        )
                    )
    elif family is DofFamily.EDGE_NORMALS:
        if n != 2 or k > 1:
            raise ValueError("Edge normal functionals act on the 1-forms of planar jets.")
        for edge in simplex.faces(1):
            middle = isobarycenter(edge.points)
            normal = edge_normal(edge)

            def normal_value(jet: Jet, middle=middle, normal=normal) -> Fraction:
                form = _derivative(jet) if k == 0 else jet[0]
                return _component(form.contract(normal), middle, ())

            found.append(normal_value)
    else:
        for face in simplex.faces(k):
            found.append(lambda jet, face=face: jet[0].integrate(face))
    return found


def functional_matrix(space: FormSpace, functionals: Sequence[Functional]) -> RatMatrix:
    """Functionals (rows) applied to the basis (columns)."""
    elements = space.elements
    return RatMatrix.from_rows(
        [[functional(element) for element in elements] for functional in functionals],
        len(elements),
    )


def explicit_row(
    system: FESystem, cell: Cell, k: int, families: Sequence[DofFamily], element: str = ""
) -> UnisolvenceRow:
    assert system.realization is not None
    space = system.realization.spaces[cell, k]
    simplex = system.realization.mesh.simplex(cell)
    functionals = [f for family in families for f in family_functionals(simplex, family, k)]
    matrix = functional_matrix(space, functionals)
    return UnisolvenceRow(
        element or system.name,
        cell,
        k,
        " + ".join(family.value for family in families),
        len(functionals),
        space.dim,
        rank(matrix) if functionals else 0,
    )


def harmonic_rows(system: FESystem, element: str = "") -> List[UnisolvenceRow]:
    dofs = harmonic_dofs(system)
    rows = []
    for cell in system.cells:
        for k in range(system.degree + 1):
            matrix = dofs.matrix(cell, k)
            rows.append(
                UnisolvenceRow(
                    element or system.name,
                    cell,
                    k,
                    "harmonic",
                    matrix.rows,
                    system.dims[cell, k],
                    rank(matrix),
                )
            )
    return rows


def constant_differential_space(split: PowellSabinSplit, cell: Cell, k: int) -> FormSpace:
    """C0 P1 Λ^k on R_k(T) with a differential that is one constant form on the whole cell."""
    carrier = split.carriers[cell]
    if k == len(cell) - 1:
        layouts = (FormLayout(carrier, k, 1),)
    else:
        layouts = (FormLayout(carrier, k, 1), FormLayout(carrier, k + 1, 0))
    system = ConstraintSystem(layouts, f"C0P1Λ{k}(R{k}), du constant")
    system.require_continuity(0, Continuity.C0)
    system.require_unbroken(0, split.groups(cell, k))
    if len(layouts) > 1:
        system.require_unbroken(1, (tuple(range(len(carrier))),))
        system.require_zero(lambda jet: jet[0].d() - jet[1])
    return system.solve()


def constant_differential_rows(
    split: PowellSabinSplit, cell: Cell, element: str
) -> List[UnisolvenceRow]:
    """Such forms vanish as soon as their vertex values do."""
    simplex = split.mesh.simplex(cell)
    rows = []
    for k in range(len(cell)):
        space = constant_differential_space(split, cell, k)
        functionals = family_functionals(simplex, DofFamily.VERTEX_VALUES, k)
        matrix = functional_matrix(space, functionals)
        rows.append(
            UnisolvenceRow(
                element,
                cell,
                k,
                "vertex values, du constant",
                len(functionals),
                space.dim,
                rank(matrix),
            )
        )
    return rows


def unisolvence_tests(spec: ElementSpec, system: Optional[FESystem] = None) -> UnisolvenceReport:
    system = system or build(spec)
    cell = system.top_cells[0]
    rows: List[UnisolvenceRow] = []
    for k in range(system.degree + 1):
        families = dof_schema(spec, k)
        if families:
            rows.append(explicit_row(system, cell, k, families, spec.label))
    rows += harmonic_rows(system, spec.label)
    if spec.name is ElementName.PS3D:
        assert system.realization is not None
        split = PowellSabinSplit(system.realization.mesh, spec.inpoints)
        rows += constant_differential_rows(split, cell, spec.label)
    report = UnisolvenceReport(spec.label, rows)
    for row in rows:
        if not row.ok:
            log.warning(
                "%s: %s on %s at degree %s has rank %s for dim %s",
                spec.label,
                row.dofs,
                row.cell,
                row.k,
                row.rank,
                row.dim,
            )
    log.info("%s: unisolvent=%s", spec.label, report.ok)
    return report
