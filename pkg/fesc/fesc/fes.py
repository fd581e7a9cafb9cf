"""
Finite element systems: per-cell spaces A^k(T) glued by restrictions.

Forms and spaces enter through a `Realization`; everything else works at the matrix level,
against the bases of the cell spaces:

    R[T', T, k]   restriction A^k(T) -> A^k(T') for every proper face T' of T
    D[T, k]       differential A^k(T) -> A^{k+1}(T)
    c[T]          coordinates of the constant 1 in A^0(T)
    e[T]          integral of A^{dim T}(T) over T

The axioms (d∘d = 0, r∘d = d∘r, the composition law, r c = c and the Stokes identity) are checked
exactly when the system is built. On top of that: inverse limits, zero-boundary subspaces,
extensions, local exactness, compatibility, dimension audits, harmonic degrees of freedom, the
commuting interpolator and extension by dimension sweep.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
import logging
from typing import Any, Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from fesc.exceptions import FESystemError, NoExtension, UnisolvenceFailure
from fesc.geometry import Simplex
from fesc.linalg import (
    RatMatrix,
    SparseRow,
    hstack,
    inverse,
    nullspace,
    rank,
    solve,
    sparse_nullspace,
    vstack,
    ZERO,
    ONE,
)
from fesc.polyform import Carrier, PolyForm
from fesc.simplicial import Cell, SimplicialComplex, relative_orientation, subcells
from fesc.spaces import FormLayout, FormSpace, Jet, inner_product
from fesc.threads import parallel_map

log = logging.getLogger(__name__)


class RestrictionKind(str, Enum):
    PULLBACK = "pullback"
    TRACE = "trace"
    DOUBLE_TRACE = "double-trace"


PULLBACK = RestrictionKind.PULLBACK
TRACE = RestrictionKind.TRACE
DOUBLE_TRACE = RestrictionKind.DOUBLE_TRACE


def jet_layouts(carrier: Carrier, kind: RestrictionKind, k: int, p: int) -> Tuple[FormLayout, ...]:
    """Layouts of a cell space: (u,) or, for double traces, (u, v) with v one degree lower."""
    if kind is DOUBLE_TRACE:
        return FormLayout(carrier, k, p), FormLayout(carrier, k + 1, max(p - 1, 0))
    return (FormLayout(carrier, k, p),)


def restrict_jet(jet: Jet, kind: RestrictionKind, target: Carrier) -> Jet:
    if kind is PULLBACK:
        return (jet[0].pullback(target, check=False),)
    if kind is TRACE:
        return (jet[0].trace(target),)
    return jet[0].trace(target), jet[1].trace(target)


def differential_jet(jet: Jet, kind: RestrictionKind, next_kind: RestrictionKind) -> Jet:
    """The differential of a cell space, from `kind` at degree k to `next_kind` at k + 1."""
    if kind is DOUBLE_TRACE:
        v0, v1 = jet
        if next_kind is DOUBLE_TRACE:
            return v1, PolyForm.zero(v1.carrier, v1.k + 1)
        if next_kind is TRACE:
            return (v1,)
        return (v1.project(),)
    if next_kind is PULLBACK:
        return (jet[0].d().project(),)
    raise FESystemError(f"No differential from {kind.value} to {next_kind.value} data.")


def constant_jet(carrier: Carrier, kind: RestrictionKind) -> Jet:
    one = PolyForm.constant(carrier, 1)
    if kind is DOUBLE_TRACE:
        return one, PolyForm.zero(carrier, 1)
    return (one,)


def evaluate_jet(jet: Jet, simplex: Simplex) -> Fraction:
    return jet[0].integrate(simplex)


@dataclass
class Realization:
    """The forms behind a system: kinds per degree, carriers and spaces per cell."""

    mesh: SimplicialComplex
    kinds: Tuple[RestrictionKind, ...]
    carriers: Dict[Cell, Carrier]
    spaces: Dict[Tuple[Cell, int], FormSpace]

    def kind(self, k: int) -> RestrictionKind:
        return self.kinds[k]

    def restrict(self, jet: Jet, face: Cell, k: int) -> Jet:
        return restrict_jet(jet, self.kinds[k], self.carriers[face])

    def differential(self, jet: Jet, k: int) -> Jet:
        return differential_jet(jet, self.kinds[k], self.kinds[k + 1])


@dataclass
class FESystem:
    name: str
    cells: Tuple[Cell, ...]
    cell_dims: Dict[Cell, int]
    facets: Dict[Cell, Tuple[Tuple[Cell, int], ...]]
    degree: int
    dims: Dict[Tuple[Cell, int], int]
    restrictions: Dict[Tuple[Cell, Cell, int], RatMatrix]
    differentials: Dict[Tuple[Cell, int], RatMatrix]
    constants: Dict[Cell, Tuple[Fraction, ...]]
    evaluations: Dict[Cell, Tuple[Fraction, ...]]
    realization: Optional[Realization] = field(default=None, repr=False)

    @cached_property
    def _faces(self) -> Dict[Cell, Tuple[Cell, ...]]:
        faces: Dict[Cell, Tuple[Cell, ...]] = {}
        for cell in sorted(self.cells, key=lambda c: self.cell_dims[c]):
            found = set()
            for facet, _ in self.facets.get(cell, ()):
                found.add(facet)
                found.update(faces[facet])
            faces[cell] = tuple(sorted(found, key=lambda c: (self.cell_dims[c], c)))
        return faces

    def faces(self, cell: Cell) -> Tuple[Cell, ...]:
        """Proper faces, by dimension."""
        return self._faces[cell]

    def closure(self, cell: Cell) -> Tuple[Cell, ...]:
        return self.faces(cell) + (cell,)

    def cells_of_dim(self, d: int) -> Tuple[Cell, ...]:
        return tuple(cell for cell in self.cells if self.cell_dims[cell] == d)

    @property
    def top_cells(self) -> Tuple[Cell, ...]:
        covered = {facet for facets in self.facets.values() for facet, _ in facets}
        return tuple(cell for cell in self.cells if cell not in covered)

    def restriction(self, face: Cell, cell: Cell, k: int) -> RatMatrix:
        if face == cell:
            return RatMatrix.identity(self.dims[cell, k])
        return self.restrictions[face, cell, k]

    def differential(self, cell: Cell, k: int) -> RatMatrix:
        if k >= self.degree:
            return RatMatrix.zeros(0, self.dims[cell, k])
        return self.differentials[cell, k]

    def validate(self) -> None:
        """Raises `FESystemError` on the first failing axiom."""
        for cell in self.cells:
            for k in range(self.degree - 1):
                if not (self.differential(cell, k + 1) @ self.differential(cell, k)).is_zero():
                    raise FESystemError(f"{self.name}: d∘d ≠ 0 on {cell} at degree {k}.")
            if self.dims[cell, 0] and any(self.differential(cell, 0).apply(self.constants[cell])):
                raise FESystemError(f"{self.name}: constants are not closed on {cell}.")
            for face in self.faces(cell):
                for k in range(self.degree + 1):
                    r = self.restriction(face, cell, k)
                    if k < self.degree:
                        left = self.restriction(face, cell, k + 1) @ self.differential(cell, k)
                        right = self.differential(face, k) @ r
                        if left != right:
                            raise FESystemError(
                                f"{self.name}: restriction to {face} does not commute with d "
                                f"on {cell} at degree {k}."
                            )
                    for subface in self.faces(face):
                        chained = self.restriction(subface, face, k) @ r
                        if chained != self.restriction(subface, cell, k):
                            raise FESystemError(
                                f"{self.name}: restrictions {cell} → {face} → {subface} "
                                f"are not compatible at degree {k}."
                            )
                if r_constant := self.restriction(face, cell, 0).apply(self.constants[cell]):
                    if tuple(r_constant) != tuple(self.constants[face]):
                        raise FESystemError(
                            f"{self.name}: the constant of {cell} does not restrict to {face}."
                        )
            self._validate_stokes(cell)

    def _validate_stokes(self, cell: Cell) -> None:
        d = self.cell_dims[cell]
        if not d or d > self.degree:
            return
        evaluation = RatMatrix.from_rows([self.evaluations[cell]], self.dims[cell, d])
        left = evaluation @ self.differential(cell, d - 1)
        right = RatMatrix.zeros(1, self.dims[cell, d - 1])
        for facet, sign in self.facets[cell]:
            row = RatMatrix.from_rows([self.evaluations[facet]], self.dims[facet, d - 1])
            right = right + (row @ self.restriction(facet, cell, d - 1)).scale(Fraction(sign))
        if left != right:
            raise FESystemError(f"{self.name}: the Stokes identity fails on {cell}.")


def build_system(
    name: str, realization: Realization, *, validate: bool = True
) -> FESystem:
    """Computes the matrices of a realized system, then checks the axioms."""
    mesh = realization.mesh
    degree = len(realization.kinds) - 1
    cells = tuple(mesh.all_cells)
    cell_dims = {cell: len(cell) - 1 for cell in cells}
    facets = {
        cell: tuple(
            (face, relative_orientation(cell, face)) for face in subcells(cell, len(cell) - 2)
        )
        for cell in cells
    }
    spaces = realization.spaces
    dims = {key: space.dim for key, space in spaces.items()}

    def coordinates(space: FormSpace, jets: Sequence[Jet], what: str) -> RatMatrix:
        matrix = space.coordinates_matrix(jets)
        if matrix is None:
            target = space.name or "the target space"
            raise FESystemError(f"{name}: {what} does not land in {target}.")
        return matrix

    def cell_matrices(cell: Cell) -> Dict[str, Any]:
        result: Dict[str, Any] = {"restrictions": {}, "differentials": {}}
        for k in range(degree + 1):
            elements = spaces[cell, k].elements
            for face in mesh.faces_of(cell):
                if face == cell:
                    continue
                restricted = [realization.restrict(jet, face, k) for jet in elements]
                result["restrictions"][face, cell, k] = coordinates(
                    spaces[face, k], restricted, f"the restriction {cell} → {face} at degree {k}"
                )
            if k < degree:
                derived = [realization.differential(jet, k) for jet in elements]
                result["differentials"][cell, k] = coordinates(
                    spaces[cell, k + 1], derived, f"d of A^{k}({cell})"
                )
        constant = constant_jet(realization.carriers[cell], realization.kinds[0])
        coords = spaces[cell, 0].coordinates(constant)
        if coords is None:
            raise FESystemError(f"{name}: A^0({cell}) does not contain the constants.")
        result["constant"] = coords
        d = cell_dims[cell]
        if d <= degree:
            simplex = mesh.simplex(cell)
            result["evaluation"] = tuple(
                evaluate_jet(jet, simplex) for jet in spaces[cell, d].elements
            )
        return result

    restrictions: Dict[Tuple[Cell, Cell, int], RatMatrix] = {}
    differentials: Dict[Tuple[Cell, int], RatMatrix] = {}
    constants: Dict[Cell, Tuple[Fraction, ...]] = {}
    evaluations: Dict[Cell, Tuple[Fraction, ...]] = {}
    for cell, result in zip(cells, parallel_map(cell_matrices, cells)):
        restrictions.update(result["restrictions"])
        differentials.update(result["differentials"])
        constants[cell] = result["constant"]
        if "evaluation" in result:
            evaluations[cell] = result["evaluation"]
    system = FESystem(
        name,
        cells,
        cell_dims,
        facets,
        degree,
        dims,
        restrictions,
        differentials,
        constants,
        evaluations,
        realization,
    )
    if validate:
        system.validate()
    log.debug("%s: built over %s cells, dims %s", name, len(cells), system_dims(system))
    return system


def system_dims(system: FESystem, cell: Optional[Cell] = None) -> Tuple[int, ...]:
    """Dims of A^k for a cell (the first top cell by default)."""
    cell = cell or system.top_cells[0]
    return tuple(system.dims[cell, k] for k in range(system.degree + 1))


@dataclass(frozen=True)
class FamilySpace:
    """Families (x_T) over some cells, single-valued under restrictions; one column per element."""

    cells: Tuple[Cell, ...]
    offsets: Tuple[int, ...]
    basis: RatMatrix

    @property
    def dim(self) -> int:
        return self.basis.cols

    def block(self, vector: Sequence[Fraction], cell: Cell) -> Tuple[Fraction, ...]:
        i = self.cells.index(cell)
        return tuple(vector[self.offsets[i] : self.offsets[i + 1]])


def _closure(system: FESystem, cells: Iterable[Cell]) -> Tuple[Cell, ...]:
    found = set()
    for cell in cells:
        found.update(system.closure(cell))
    return tuple(sorted(found, key=lambda c: (system.cell_dims[c], c)))


def _offsets(system: FESystem, cells: Sequence[Cell], k: int) -> Tuple[int, ...]:
    offsets = [0]
    for cell in cells:
        offsets.append(offsets[-1] + system.dims[cell, k])
    return tuple(offsets)


def inverse_limit_space(
    system: FESystem, k: int, cells: Optional[Iterable[Cell]] = None
) -> FamilySpace:
    """Families over the closure of `cells` (every cell by default) agreeing on shared faces."""
    cells = _closure(system, system.cells if cells is None else cells)
    offsets = _offsets(system, cells, k)
    position = {cell: offsets[i] for i, cell in enumerate(cells)}
    rows: List[SparseRow] = []
    for cell in cells:
        for facet, _ in system.facets.get(cell, ()):
            matrix = system.restriction(facet, cell, k)
            for i, entries in enumerate(matrix.entries):
                row: SparseRow = {position[cell] + j: v for j, v in enumerate(entries) if v}
                row[position[facet] + i] = row.get(position[facet] + i, ZERO) - ONE
                rows.append(row)
    return FamilySpace(cells, offsets, sparse_nullspace(rows, offsets[-1]))


def boundary_restriction(
    system: FESystem, cell: Cell, k: int
) -> Tuple[Tuple[Cell, ...], RatMatrix]:
    """The map A^k(T) -> ⊕_{T' ⊂ ∂T} A^k(T'), blocks in the order of the returned faces."""
    faces = system.faces(cell)
    blocks = [system.restriction(face, cell, k) for face in faces]
    if not blocks:
        return faces, RatMatrix.zeros(0, system.dims[cell, k])
    return faces, vstack(*blocks)


def zero_boundary_coordinates(system: FESystem, cell: Cell, k: int) -> RatMatrix:
    """A basis of A^k_0(T), as coordinate columns against A^k(T); all of A^k(V) for a vertex."""
    _, restriction = boundary_restriction(system, cell, k)
    return nullspace(restriction)


def zero_boundary_subspace(system: FESystem, cell: Cell, k: int) -> FormSpace:
    if system.realization is None:
        raise FESystemError(f"{system.name} has no form realization.")
    space = system.realization.spaces[cell, k]
    return space.subspace(zero_boundary_coordinates(system, cell, k), f"A{k}_0{cell}")


def check_extensions(system: FESystem, cell: Cell, k: int) -> bool:
    faces, restriction = boundary_restriction(system, cell, k)
    if not faces:
        return True
    boundary = inverse_limit_space(system, k, [face for face in faces])
    return rank(restriction) == boundary.dim


def _cohomology(maps: Sequence[RatMatrix], dims: Sequence[int]) -> Tuple[int, ...]:
    """h^k = dim ker maps[k] - rank maps[k-1], where maps[k] leaves degree k."""
    ranks = [rank(m) for m in maps]
    return tuple(
        dims[k] - ranks[k] - (ranks[k - 1] if k else 0) for k in range(len(dims))
    )


def check_local_exactness(system: FESystem, cell: Cell) -> Tuple[int, ...]:
    """Cohomology of ℝ -> A^0(T) -> ... -> A^n(T) -> 0; all zeros when exact."""
    dims = [system.dims[cell, k] for k in range(system.degree + 1)]
    maps = [system.differential(cell, k) for k in range(system.degree + 1)]
    constants = RatMatrix.from_columns([system.constants[cell]], dims[0])
    ranks = [rank(constants)] + [rank(m) for m in maps]
    return tuple(dims[k] - ranks[k + 1] - ranks[k] for k in range(len(dims)))


def zero_boundary_cohomology(system: FESystem, cell: Cell) -> Tuple[Tuple[int, ...], bool]:
    """
    Cohomology of A^•_0(T) (no augmentation) and whether the integral is an isomorphism from the
    cohomology at k = dim T onto ℝ.
    """
    bases = [zero_boundary_coordinates(system, cell, k) for k in range(system.degree + 1)]
    maps = []
    for k in range(system.degree + 1):
        image = system.differential(cell, k) @ bases[k]
        if k < system.degree:
            coordinates = solve(bases[k + 1], image)
            if coordinates is None:
                raise FESystemError(f"{system.name}: d does not preserve A_0 on {cell}.")
            maps.append(coordinates)
        else:
            maps.append(RatMatrix.zeros(0, bases[k].cols))
    cohomology = _cohomology(maps, [b.cols for b in bases])
    d = system.cell_dims[cell]
    iso = False
    if d <= system.degree and cohomology[d] == 1:
        closed = nullspace(maps[d])
        values = RatMatrix.from_rows([system.evaluations[cell]], system.dims[cell, d]) @ bases[d]
        iso = not (values @ closed).is_zero()
    return cohomology, iso


@dataclass
class CellReport:
    cell: Cell
    dims: Tuple[int, ...]
    zero_dims: Tuple[int, ...]
    extensions: Tuple[bool, ...]
    cohomology: Tuple[int, ...]
    zero_cohomology: Tuple[int, ...]
    evaluation_iso: bool

    @property
    def exact(self) -> bool:
        return not any(self.cohomology)

    @property
    def compatible(self) -> bool:
        return self.exact and all(self.extensions)

    @property
    def concentrated(self) -> bool:
        """A^•_0(T) has cohomology ℝ at k = dim T only, detected by the integral."""
        d = len(self.cell) - 1
        return self.evaluation_iso and all(
            not h for k, h in enumerate(self.zero_cohomology) if k != d
        )

    def to_json(self) -> Dict[str, Any]:
        return {
            "cell": list(self.cell),
            "dims": list(self.dims),
            "zero_dims": list(self.zero_dims),
            "extensions": list(self.extensions),
            "cohomology": list(self.cohomology),
            "zero_cohomology": list(self.zero_cohomology),
            "evaluation_iso": self.evaluation_iso,
            "compatible": self.compatible,
        }


@dataclass
class AuditRow:
    k: int
    lhs: int
    rhs: int

    @property
    def equal(self) -> bool:
        return self.lhs == self.rhs

    def to_json(self) -> Dict[str, Any]:
        return {"k": self.k, "lhs": self.lhs, "rhs": self.rhs, "equal": self.equal}


@dataclass
class CompatibilityReport:
    name: str
    cells: List[CellReport]
    audit: List[AuditRow]

    @property
    def compatible(self) -> bool:
        return all(report.compatible for report in self.cells)

    @property
    def concentrated(self) -> bool:
        return all(report.concentrated for report in self.cells)

    def cell(self, cell: Cell) -> CellReport:
        return next(report for report in self.cells if report.cell == cell)

    def to_json(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "compatible": self.compatible,
            "concentrated": self.concentrated,
            "cells": [report.to_json() for report in self.cells],
            "audit": [row.to_json() for row in self.audit],
        }


def cell_report(system: FESystem, cell: Cell) -> CellReport:
    degrees = range(system.degree + 1)
    zero_cohomology, iso = zero_boundary_cohomology(system, cell)
    return CellReport(
        cell=cell,
        dims=tuple(system.dims[cell, k] for k in degrees),
        zero_dims=tuple(zero_boundary_coordinates(system, cell, k).cols for k in degrees),
        extensions=tuple(check_extensions(system, cell, k) for k in degrees),
        cohomology=check_local_exactness(system, cell),
        zero_cohomology=zero_cohomology,
        evaluation_iso=iso,
    )


def dimension_audit(system: FESystem, k: int) -> AuditRow:
    """dim A^k(𝒯) against Σ_T dim A^k_0(T); the first never exceeds the second."""
    lhs = inverse_limit_space(system, k).dim
    rhs = sum(zero_boundary_coordinates(system, cell, k).cols for cell in system.cells)
    if lhs > rhs:
        raise FESystemError(f"{system.name}: dim A^{k} = {lhs} exceeds Σ dim A^{k}_0 = {rhs}.")
    return AuditRow(k, lhs, rhs)


def check_compatibility(system: FESystem) -> CompatibilityReport:
    reports = parallel_map(lambda cell: cell_report(system, cell), system.cells)
    audit = [dimension_audit(system, k) for k in range(system.degree + 1)]
    report = CompatibilityReport(system.name, list(reports), audit)
    log.info("%s: compatible=%s", system.name, report.compatible)
    return report


def global_cohomology(system: FESystem) -> Tuple[int, ...]:
    """Cohomology of the global complex A^•(𝒯) (families over every cell)."""
    spaces = [inverse_limit_space(system, k) for k in range(system.degree + 1)]
    maps = []
    for k, space in enumerate(spaces):
        if k == system.degree:
            maps.append(RatMatrix.zeros(0, space.dim))
            continue
        target = spaces[k + 1]
        blocks = []
        for i, cell in enumerate(space.cells):
            rows = system.differential(cell, k)
            block = space.basis.select_rows(range(space.offsets[i], space.offsets[i + 1]))
            blocks.append(rows @ block)
        image = vstack(*blocks) if blocks else RatMatrix.zeros(0, space.dim)
        coordinates = solve(target.basis, image)
        if coordinates is None:
            raise FESystemError(f"{system.name}: d does not map families to families.")
        maps.append(coordinates)
    return _cohomology(maps, [space.dim for space in spaces])


# degrees of freedom


class DofKind(str, Enum):
    PAIRING = "pairing"
    DERIVATIVE = "derivative-pairing"
    INTEGRAL = "integral"


@dataclass(frozen=True)
class DofFunctional:
    """A functional on A^k(T): ⟨u|v⟩, ⟨d u|v⟩ or the integral of u over T."""

    cell: Cell
    k: int
    kind: DofKind
    weight: Optional[Jet] = None

    def apply(self, system: FESystem, jet: Jet) -> Fraction:
        realization = system.realization
        assert realization is not None
        if self.kind is DofKind.INTEGRAL:
            return evaluate_jet(jet, realization.mesh.simplex(self.cell))
        assert self.weight is not None
        if self.kind is DofKind.DERIVATIVE:
            jet = realization.differential(jet, self.k)
        return inner_product(jet, self.weight)

    def to_json(self) -> Dict[str, Any]:
        return {
            "cell": list(self.cell),
            "k": self.k,
            "kind": self.kind.value,
            "weight": [form.to_json() for form in self.weight] if self.weight else None,
        }


@dataclass
class DofSet:
    system: FESystem
    functionals: Dict[Tuple[Cell, int], Tuple[DofFunctional, ...]]
    warnings: Tuple[str, ...] = ()

    def count(self, cell: Cell, k: int) -> int:
        return len(self.functionals[cell, k])

    @cached_property
    def _rows(self) -> Dict[Tuple[Cell, int], RatMatrix]:
        """Every functional applied to the basis of its own cell space."""
        assert self.system.realization is not None
        spaces = self.system.realization.spaces
        rows = {}
        for (cell, k), functionals in self.functionals.items():
            elements = spaces[cell, k].elements
            rows[cell, k] = RatMatrix.from_rows(
                [[f.apply(self.system, e) for e in elements] for f in functionals], len(elements)
            )
        return rows

    def matrix(self, cell: Cell, k: int) -> RatMatrix:
        """The functionals of every face of `cell` applied to the basis of A^k(cell)."""
        blocks = [
            self._rows[face, k] @ self.system.restriction(face, cell, k)
            for face in self.system.closure(cell)
        ]
        return vstack(*blocks)

    def unisolvent(self, cell: Cell, k: int) -> bool:
        matrix = self.matrix(cell, k)
        return matrix.rows == matrix.cols and inverse(matrix) is not None

    def values(self, cell: Cell, k: int, jet: Jet) -> Tuple[Fraction, ...]:
        """All the functionals of the closure of `cell` applied to a jet living on `cell`."""
        assert self.system.realization is not None
        realization = self.system.realization
        values: List[Fraction] = []
        for face in self.system.closure(cell):
            restricted = jet if face == cell else realization.restrict(jet, face, k)
            values.extend(f.apply(self.system, restricted) for f in self.functionals[face, k])
        return tuple(values)

    def to_json(self) -> Dict[str, Any]:
        return {
            "system": self.system.name,
            "warnings": list(self.warnings),
            "functionals": [
                [f.to_json() for f in functionals]
                for _, functionals in sorted(self.functionals.items())
            ],
        }


def harmonic_dofs(system: FESystem) -> DofSet:
    """
    On every cell T and degree k: ⟨·|v⟩ for v ∈ d A^{k-1}_0(T), ⟨d·|w⟩ for w ∈ d A^k_0(T), and the
    integral over T when k = dim T. For compatible systems d A^{k-1}_0(T) is the kernel of d on
    A^k_0(T) away from k = dim T, and a hyperplane of it at k = dim T.
    """
    realization = system.realization
    if realization is None:
        raise FESystemError(f"{system.name} has no form realization.")
    warnings: List[str] = []
    functionals: Dict[Tuple[Cell, int], Tuple[DofFunctional, ...]] = {}
    for cell in system.cells:
        d = system.cell_dims[cell]
        spaces = [zero_boundary_subspace(system, cell, k) for k in range(system.degree + 1)]
        images: List[Tuple[Jet, ...]] = []
        for k in range(system.degree):
            target = realization.spaces[cell, k + 1]
            image = FormSpace.span(
                target.layouts, (realization.differential(jet, k) for jet in spaces[k].elements)
            )
            images.append(image.elements)
        images.append(())
        for k in range(system.degree + 1):
            found: List[DofFunctional] = []
            if k:
                found.extend(DofFunctional(cell, k, DofKind.PAIRING, jet) for jet in images[k - 1])
            found.extend(DofFunctional(cell, k, DofKind.DERIVATIVE, jet) for jet in images[k])
            if k == d:
                found.append(DofFunctional(cell, k, DofKind.INTEGRAL))
            if len(found) != spaces[k].dim:
                warnings.append(
                    f"{cell} degree {k}: {len(found)} functionals for dim A_0 = {spaces[k].dim}"
                )
            functionals[cell, k] = tuple(found)
    for warning in warnings:
        log.warning("%s: %s", system.name, warning)
    return DofSet(system, functionals, tuple(warnings))


def interpolate(dofs: DofSet, k: int, jets: Mapping[Cell, Jet]) -> Dict[Cell, Tuple[Fraction, ...]]:
    """
    Coordinates in A^k(S), for every top cell S, of the element sharing all degrees of freedom
    with the given jets (one per top cell, living on its carrier).
    """
    result = {}
    for cell, jet in jets.items():
        matrix = dofs.matrix(cell, k)
        values = RatMatrix.from_columns([dofs.values(cell, k, jet)], matrix.rows)
        if matrix.rows != matrix.cols or inverse(matrix) is None:
            raise UnisolvenceFailure(
                f"{dofs.system.name}: {matrix.rows} functionals for dim A^{k}{cell} = "
                f"{matrix.cols}."
            )
        solution = solve(matrix, values)
        assert solution is not None
        result[cell] = solution.column(0)
    return result


def source_jets(
    system: FESystem, k: int, factory: Callable[[Carrier], PolyForm]
) -> Dict[Cell, Jet]:
    """Jets of a smooth form on every top cell, in the shape of the degree-k cell spaces."""
    assert system.realization is not None
    realization = system.realization
    jets = {}
    for cell in system.top_cells:
        u = factory(realization.carriers[cell])
        if realization.kinds[k] is DOUBLE_TRACE:
            jets[cell] = (u, u.d())
        else:
            jets[cell] = (u,)
    return jets


def check_commuting(dofs: DofSet, k: int, jets: Mapping[Cell, Jet]) -> bool:
    """I(du) = d(I u) on every top cell."""
    system = dofs.system
    assert system.realization is not None
    first = interpolate(dofs, k, jets)
    derived = {cell: system.realization.differential(jet, k) for cell, jet in jets.items()}
    second = interpolate(dofs, k + 1, derived)
    return all(
        system.differential(cell, k).apply(first[cell]) == second[cell] for cell in jets
    )


Extender = Callable[[Cell, Cell, int, Tuple[Fraction, ...]], Optional[Tuple[Fraction, ...]]]


def _lift(matrix: RatMatrix, target: Sequence[Fraction]) -> Optional[Tuple[Fraction, ...]]:
    """The minimal-norm solution Mᵀ z of M x = target, or None."""
    gram = matrix @ matrix.T
    z = solve(gram, RatMatrix.from_columns([target], matrix.rows))
    if z is None:
        return None
    x = matrix.T @ z
    return x.column(0) if matrix.apply(x.column(0)) == tuple(target) else None


def extend(
    system: FESystem,
    cell: Cell,
    k: int,
    boundary: Mapping[Cell, Sequence[Fraction]],
    extenders: Optional[Extender] = None,
) -> Tuple[Fraction, ...]:
    """
    An element of A^k(T) whose restrictions are the given boundary family, built face dimension
    by face dimension: at each step the residual is supported on faces of the current dimension
    and is lifted face by face, with a bespoke extender when one is available.
    """
    faces, restriction = boundary_restriction(system, cell, k)
    dim = system.dims[cell, k]
    x = [ZERO] * dim
    if not faces:
        return tuple(x)
    offsets = _offsets(system, faces, k)
    target = [Fraction(v) for face in faces for v in boundary[face]]
    if len(target) != offsets[-1]:
        raise NoExtension(f"Boundary data of length {len(target)} for {offsets[-1]} coordinates.")
    for level in range(system.cell_dims[cell]):
        current = restriction.apply(x)
        residual = [t - c for t, c in zip(target, current)]
        lower = [i for i, face in enumerate(faces) if system.cell_dims[face] <= level]
        rows = [r for i in lower for r in range(offsets[i], offsets[i + 1])]
        partial = restriction.select_rows(rows)
        for i, face in enumerate(faces):
            if system.cell_dims[face] != level:
                continue
            block = tuple(residual[offsets[i] : offsets[i + 1]])
            if not any(block):
                continue
            lifted = extenders(face, cell, k, block) if extenders else None
            if lifted is None:
                data = [
                    residual[r] if offsets[i] <= r < offsets[i + 1] else ZERO for r in rows
                ]
                lifted = _lift(partial, data)
            if lifted is None:
                raise NoExtension(
                    f"{system.name}: cannot extend from {face} to {cell} at degree {k}."
                )
            x = [a + b for a, b in zip(x, lifted)]
    if tuple(restriction.apply(x)) != tuple(target):
        raise NoExtension(f"{system.name}: the boundary data on {cell} is not reachable.")
    return tuple(x)


def quadrilateral_system() -> FESystem:
    """
    The unit square as a single cell with P1-type spaces: A^0(Q) = span{1, x, y}, edges carry
    endpoint values, A^1(Q) the constant 1-forms, A^1(E) the edge integral, A^2 = 0. Its
    restriction map onto the boundary is not onto (3 < 4).
    """
    quad: Cell = (0, 1, 2, 3)
    corners = {0: (0, 0), 1: (1, 0), 2: (1, 1), 3: (0, 1)}
    edges: List[Cell] = [(0, 1), (1, 2), (2, 3), (0, 3)]
    vertices: List[Cell] = [(v,) for v in range(4)]
    cells = tuple(vertices + edges + [quad])
    cell_dims = {cell: (2 if cell == quad else len(cell) - 1) for cell in cells}
    facets: Dict[Cell, Tuple[Tuple[Cell, int], ...]] = {v: () for v in vertices}
    for a, b in edges:
        facets[a, b] = (((a,), -1), ((b,), 1))
    # counterclockwise boundary; (0, 3) is traversed backwards
    facets[quad] = (((0, 1), 1), ((1, 2), 1), ((2, 3), 1), ((0, 3), -1))
    dims = {}
    for v in vertices:
        dims.update({(v, 0): 1, (v, 1): 0, (v, 2): 0})
    for e in edges:
        dims.update({(e, 0): 2, (e, 1): 1, (e, 2): 0})
    dims.update({(quad, 0): 3, (quad, 1): 2, (quad, 2): 0})
    restrictions: Dict[Tuple[Cell, Cell, int], RatMatrix] = {}
    for a, b in edges:
        restrictions[(a,), (a, b), 0] = RatMatrix.from_rows([[1, 0]])
        restrictions[(b,), (a, b), 0] = RatMatrix.from_rows([[0, 1]])
        for v in ((a,), (b,)):
            restrictions[v, (a, b), 1] = RatMatrix.zeros(0, 1)
            restrictions[v, (a, b), 2] = RatMatrix.zeros(0, 0)
        # 1, x, y at the endpoints; dx, dy integrated along a → b
        pa, pb = corners[a], corners[b]
        restrictions[(a, b), quad, 0] = RatMatrix.from_rows([[1, pa[0], pa[1]], [1, pb[0], pb[1]]])
        restrictions[(a, b), quad, 1] = RatMatrix.from_rows([[pb[0] - pa[0], pb[1] - pa[1]]])
        restrictions[(a, b), quad, 2] = RatMatrix.zeros(0, 0)
    for v in vertices:
        x, y = corners[v[0]]
        restrictions[v, quad, 0] = RatMatrix.from_rows([[1, x, y]])
        restrictions[v, quad, 1] = RatMatrix.zeros(0, 2)
        restrictions[v, quad, 2] = RatMatrix.zeros(0, 0)
    differentials = {}
    for v in vertices:
        differentials[v, 0] = RatMatrix.zeros(0, 1)
        differentials[v, 1] = RatMatrix.zeros(0, 0)
    for e in edges:
        differentials[e, 0] = RatMatrix.from_rows([[-1, 1]])
        differentials[e, 1] = RatMatrix.zeros(0, 1)
    differentials[quad, 0] = RatMatrix.from_rows([[0, 1, 0], [0, 0, 1]])
    differentials[quad, 1] = RatMatrix.zeros(0, 2)
    constants = {v: (ONE,) for v in vertices}
    constants.update({e: (ONE, ONE) for e in edges})
    constants[quad] = (ONE, ZERO, ZERO)
    evaluations: Dict[Cell, Tuple[Fraction, ...]] = {v: (ONE,) for v in vertices}
    evaluations.update({e: (ONE,) for e in edges})
    evaluations[quad] = ()
    system = FESystem(
        "quadrilateral",
        cells,
        cell_dims,
        facets,
        2,
        dims,
        restrictions,
        differentials,
        constants,
        evaluations,
    )
    system.validate()
    return system
