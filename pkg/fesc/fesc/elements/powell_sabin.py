"""
Powell-Sabin type complexes on the split R_0, in any dimension (ps3d for n = 3).

Every cell T of dimension d is split around its inpoint W_T. On the pieces of R_0(T):

    K^k(T)   closed C0 P1 k-forms that are unbroken on the coarser split R_{k-1}(T)
    A^k(S)   K^k(S) ⊕ p_{W_S} K^{k+1}(S) on a top cell S, carried with its differential
    A^k(T)   pairs (u, v) on a face: C0 on R_{k-1} and R_k respectively, admissible, with pull u in
             K^k(T) + κ_{W_T} K^{k+1}(T) and with the contractions of v and of u - κ_{W_T} v by
             every transverse direction in 𝕎_T affine on T

The branch complexes switch at degree ℓ to a single trace space and to Whitney forms above it.

Face spaces are then narrowed to the elements whose restrictions land in the spaces of their own
facets, so that the restriction axiom holds cell by cell.
"""

from dataclasses import dataclass
import logging
from typing import Any, Dict, List, Tuple, Union

from fesc.elements.common import admissibility_defect, realize, whole_space
from fesc.exceptions import InconsistentMesh, SplitError
from fesc.fes import DOUBLE_TRACE, PULLBACK, TRACE, FESystem, RestrictionKind, jet_layouts
from fesc.geometry import Point, sub, vector_rank
from fesc.linalg import RatMatrix, column_basis
from fesc.polyform import Carrier, PolyForm, affine_defect, alt_indices
from fesc.simplicial import Cell, SimplicialComplex, is_face
from fesc.spaces import ConstraintSystem, Continuity, FormLayout, FormSpace, whitney_space
from fesc.splits import InpointAssignment, RefinedComplex, inpoint_of, inpoints_for, refine

log = logging.getLogger(__name__)

Inpoints = Union[None, str, InpointAssignment]


def default_strategy(mesh: SimplicialComplex) -> str:
    """Isobarycenters on a single simplex; aligned inpoints as soon as cells are shared."""
    if len(mesh.tops) == 1:
        return "isobarycenter"
    return "worsey-farin" if mesh.ambient == 2 else "worsey-piper"


@dataclass(frozen=True)
class WTSpan:
    """The transverse directions 𝕎_T = span{W_U - W_T : T ⊂ U}, as a basis."""

    cell: Cell
    center: Point
    vectors: Tuple[Point, ...]

    @property
    def dim(self) -> int:
        return len(self.vectors)


def wt_span(mesh: SimplicialComplex, inpoints: InpointAssignment, cell: Cell) -> WTSpan:
    n = mesh.ambient
    d = len(cell) - 1
    center = inpoint_of(mesh, inpoints, cell)
    found: List[Tuple[Cell, RatMatrix]] = []
    for top in mesh.star_tops(cell):
        vectors = [
            sub(inpoint_of(mesh, inpoints, other), center)
            for other in mesh.faces_of(top)
            if other != cell and is_face(cell, other)
        ]
        span = column_basis(RatMatrix.from_columns(vectors, n))
        if span.cols != n - d:
            raise SplitError(
                f"The inpoints around {cell} in {top} span {span.cols} directions, "
                f"expected {n - d}."
            )
        found.append((top, span))
    first_top, first = found[0]
    for top, span in found[1:]:
        if vector_rank(first.columns() + span.columns(), n) != n - d:
            raise InconsistentMesh(
                f"{first_top} and {top} induce different transverse spaces on {cell}."
            )
    edges = mesh.simplex(cell).edges.columns() if d else []
    if vector_rank(first.columns() + edges, n) != n:
        raise SplitError(f"The transverse directions at {cell} are not transverse to it.")
    return WTSpan(cell, center, tuple(first.columns()))


class PowellSabinSplit:
    """The carriers and groupings of the refinements R_0 ⊆ R_1 ⊆ ... of one mesh."""

    def __init__(self, mesh: SimplicialComplex, inpoints: Inpoints = None) -> None:
        if mesh.dim != mesh.ambient:
            raise SplitError("Powell-Sabin complexes need a full-dimensional mesh.")
        self.mesh = mesh
        if not isinstance(inpoints, InpointAssignment):
            inpoints = inpoints_for(mesh, inpoints or default_strategy(mesh))
        self.inpoints = inpoints
        # R_0 (Powell-Sabin) up to R_{n-1} (Alfeld); R_n would leave the tops unsplit
        self.refinements: Dict[int, RefinedComplex] = {
            m: refine(mesh, m, inpoints) for m in self.split_levels
        }
        self.carriers = {cell: Carrier.of(self.refinements[0], cell) for cell in mesh.all_cells}
        self.spans = {
            cell: wt_span(mesh, inpoints, cell)
            for cell in mesh.all_cells
            if 0 < len(cell) - 1 < mesh.ambient
        }

    @property
    def n(self) -> int:
        return self.mesh.ambient

    @property
    def split_levels(self) -> range:
        return range(self.mesh.dim)

    def center(self, cell: Cell) -> Point:
        return inpoint_of(self.mesh, self.inpoints, cell)

    def groups(self, cell: Cell, m: int) -> Tuple[Tuple[int, ...], ...]:
        """The pieces of R_0(T) grouped by the pieces of R_m(T)."""
        fine = self.carriers[cell]
        if m <= 0:
            return tuple((i,) for i in range(len(fine)))
        if m >= len(cell) - 1:
            return (tuple(range(len(fine))),)
        return fine.groups(Carrier.of(self.refinements[m], cell))

    def intrinsic(self, cell: Cell) -> bool:
        return len(cell) - 1 < self.n


def kernel_space(split: PowellSabinSplit, cell: Cell, k: int) -> FormSpace:
    """K^k(T); the constants at k = 0."""
    carrier = split.carriers[cell]
    layout = FormLayout(carrier, k, 1)
    if not k:
        return FormSpace.span((layout,), [PolyForm.constant(carrier, 1)], "K^0")
    system = ConstraintSystem((layout,), f"K^{k}{cell}")
    if split.intrinsic(cell):
        system.require_zero(lambda jet: jet[0] - jet[0].project())
    system.require_continuity(0, Continuity.C0)
    system.require_unbroken(0, split.groups(cell, k - 1))
    system.require_closed(0)
    return system.solve()


def continuous_dim(split: PowellSabinSplit, cell: Cell, k: int, m: int) -> int:
    """dim C0 P1 Λ^k(R_m(T)), without any closedness."""
    system = ConstraintSystem((FormLayout(split.carriers[cell], k, 1),), f"C0P1Λ{k}(R{m})")
    system.require_continuity(0, Continuity.C0)
    system.require_unbroken(0, split.groups(cell, m))
    return system.solve().dim


def top_space(split: PowellSabinSplit, cell: Cell, k: int) -> FormSpace:
    carrier = split.carriers[cell]
    center = split.center(cell)
    jets = [(u, PolyForm.zero(carrier, k + 1)) for u in kernel_space(split, cell, k).forms()]
    if k < split.n:
        jets += [(v.poincare(center), v) for v in kernel_space(split, cell, k + 1).forms()]
    return FormSpace.span(jet_layouts(carrier, DOUBLE_TRACE, k, 2), jets, f"PS^{k}")


def direct_sum(split: PowellSabinSplit, cell: Cell, k: int) -> bool:
    """dim A^k(S) = dim K^k(S) + dim K^{k+1}(S)."""
    upper = kernel_space(split, cell, k + 1).dim if k < split.n else 0
    return top_space(split, cell, k).dim == kernel_space(split, cell, k).dim + upper


def cone_space(split: PowellSabinSplit, cell: Cell, k: int) -> FormSpace:
    """K^k(T) + κ_{W_T} K^{k+1}(T), intrinsic."""
    carrier = split.carriers[cell]
    center = split.center(cell)
    forms = list(kernel_space(split, cell, k).forms())
    forms += [v.koszul(center).project() for v in kernel_space(split, cell, k + 1).forms()]
    return FormSpace.span((FormLayout(carrier, k, 2),), forms, f"M^{k}{cell}")


def face_space(split: PowellSabinSplit, cell: Cell, k: int) -> FormSpace:
    carrier = split.carriers[cell]
    simplex = split.mesh.simplex(cell)
    span = split.spans[cell]
    system = ConstraintSystem(jet_layouts(carrier, DOUBLE_TRACE, k, 2), f"PS^{k}{cell}")
    system.require_continuity(0, Continuity.C0)
    system.require_unbroken(0, split.groups(cell, k - 1))
    system.require_continuity(1, Continuity.C0)
    system.require_unbroken(1, split.groups(cell, k))
    system.require_zero(admissibility_defect)
    system.require_mapped_member(0, PolyForm.project, cone_space(split, cell, k))
    for vector in span.vectors:
        system.require_zero(
            lambda jet, vector=vector: affine_defect(jet[1].contract(vector).project(), simplex)
        )
        system.require_zero(
            lambda jet, vector=vector: affine_defect(
                (jet[0] - jet[1].koszul(span.center)).contract(vector).project(), simplex
            )
        )
    return system.solve()


def _cell_space(split: PowellSabinSplit, cell: Cell, k: int) -> FormSpace:
    carrier = split.carriers[cell]
    if len(cell) == 1:
        return whole_space(carrier, DOUBLE_TRACE, k, 0, f"jet^{k}(V)")
    if len(cell) - 1 == split.n:
        return top_space(split, cell, k)
    return face_space(split, cell, k)


def powell_sabin(
    mesh: SimplicialComplex, inpoints: Inpoints = None, *, validate: bool = True
) -> FESystem:
    """ps3d on a tetrahedral mesh; the same construction in the plane and beyond."""
    split = PowellSabinSplit(mesh, inpoints)
    name = "ps3d" if split.n == 3 else f"ps{split.n}d"
    return realize(
        name,
        mesh,
        (DOUBLE_TRACE,) * (split.n + 1),
        split.carriers,
        lambda cell, k: _cell_space(split, cell, k),
        validate=validate,
        narrow=True,
    )


def _constant_forms(carrier: Carrier, k: int) -> List[PolyForm]:
    return [PolyForm.constant(carrier, {index: 1}) for index in alt_indices(carrier.ambient, k)]


def branch_top_space(split: PowellSabinSplit, cell: Cell, ell: int) -> FormSpace:
    """K^ℓ(S) + p_{W_S} Λ^{ℓ+1}."""
    carrier = split.carriers[cell]
    center = split.center(cell)
    forms = list(kernel_space(split, cell, ell).forms())
    forms += [c.poincare(center) for c in _constant_forms(carrier, ell + 1)]
    return FormSpace.span((FormLayout(carrier, ell, 2),), forms, f"PSbranch^{ell}")


def branch_face_space(split: PowellSabinSplit, cell: Cell, ell: int) -> FormSpace:
    carrier = split.carriers[cell]
    simplex = split.mesh.simplex(cell)
    span = split.spans[cell]
    forms = list(kernel_space(split, cell, ell).forms())
    forms += [
        c.project().koszul(span.center).project() for c in _constant_forms(carrier, ell + 1)
    ]
    target = FormSpace.span((FormLayout(carrier, ell, 2),), forms, f"N^{ell}{cell}")
    system = ConstraintSystem((FormLayout(carrier, ell, 2),), f"PSbranch^{ell}{cell}")
    system.require_continuity(0, Continuity.C0)
    system.require_unbroken(0, split.groups(cell, ell - 1))
    system.require_mapped_member(0, PolyForm.project, target)
    for vector in span.vectors:
        system.require_zero(
            lambda jet, vector=vector: affine_defect(jet[0].contract(vector).project(), simplex)
        )
    return system.solve()


def branch_kinds(n: int, ell: int) -> Tuple[RestrictionKind, ...]:
    return tuple(
        DOUBLE_TRACE if k < ell else TRACE if k == ell else PULLBACK for k in range(n + 1)
    )


def powell_sabin_branch(
    mesh: SimplicialComplex, ell: int, inpoints: Inpoints = None, *, validate: bool = True
) -> FESystem:
    split = PowellSabinSplit(mesh, inpoints)
    if not 1 <= ell <= split.n - 1:
        raise ValueError(f"The branch degree must lie in [1, {split.n - 1}], got {ell}.")

    def builder(cell: Cell, k: int) -> FormSpace:
        carrier = split.carriers[cell]
        if k < ell:
            return _cell_space(split, cell, k)
        if k > ell:
            return whitney_space(mesh.simplex(cell), k, carrier)
        if len(cell) == 1:
            return whole_space(carrier, TRACE, ell)
        if len(cell) - 1 == split.n:
            return branch_top_space(split, cell, ell)
        return branch_face_space(split, cell, ell)

    kinds = branch_kinds(split.n, ell)
    name = f"ps{split.n}d-branch-{ell}"
    return realize(name, mesh, kinds, split.carriers, builder, validate=validate, narrow=True)


@dataclass
class PowellSabinCounts:
    """Dimension counts on a top cell: kernels, augmented spaces and plain continuous spaces."""

    kernels: Tuple[int, ...]
    spaces: Tuple[int, ...]
    direct: Tuple[bool, ...]
    continuous: Dict[str, int]

    def to_json(self) -> Dict[str, Any]:
        return {
            "kernels": list(self.kernels),
            "spaces": list(self.spaces),
            "direct": list(self.direct),
            "continuous": dict(self.continuous),
        }


def powell_sabin_counts(split: PowellSabinSplit, cell: Cell) -> PowellSabinCounts:
    degrees = range(split.n + 1)
    continuous = {}
    if split.n == 3:
        continuous = {
            "C0P1Λ2(R1)": continuous_dim(split, cell, 2, 1),
            "C0P1Λ1(R0)": continuous_dim(split, cell, 1, 0),
        }
    return PowellSabinCounts(
        kernels=tuple(kernel_space(split, cell, k).dim for k in degrees),
        spaces=tuple(top_space(split, cell, k).dim for k in degrees),
        direct=tuple(direct_sum(split, cell, k) for k in degrees),
        continuous=continuous,
    )
