"""
Finite dimensional spaces of piecewise polynomial forms.

A space element is a *jet*: a tuple of forms, one per component. Most spaces have a single
component; double-trace spaces carry the pair (u, du) or (v0, v1). Each component is written in
a `FormLayout` (carrier, form degree, polynomial degree), and a `FormSpace` keeps an exact basis
of coordinate columns over the concatenated layouts.

Spaces are carved out of a layout by a `ConstraintSystem`: every requirement (continuity across
the interfaces of the carrier, closedness, membership in another space, affinity on a face...) is
turned into sparse rows, and the space is the exact nullspace of all of them.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property
from itertools import combinations
import logging
from math import comb, factorial
from typing import Callable, Dict, Iterable, List, Optional, Sequence, Tuple, Union

from fesc.exceptions import GeometryError
from fesc.geometry import Simplex, compositions
from fesc.linalg import (
    RatMatrix,
    SparseRow,
    column_basis,
    hstack,
    left_nullspace,
    multinomial_factor,
    nullspace,
    rank,
    solve,
    sparse_nullspace,
    ZERO,
    ONE,
)
from fesc.polyform import AltIndex, Carrier, PolyForm, alt_indices
from fesc.threads import parallel_map

log = logging.getLogger(__name__)

Jet = Tuple[PolyForm, ...]
JetLike = Union[PolyForm, Sequence[PolyForm]]
LayoutKey = Tuple[int, Tuple[int, ...], AltIndex]


def as_jet(value: JetLike) -> Jet:
    if isinstance(value, PolyForm):
        return (value,)
    return tuple(value)


class Continuity(str, Enum):
    NONE = "none"
    C0 = "C0"
    TANGENTIAL = "tangential"
    C1 = "C1"
    C0D = "C0d"


@dataclass(frozen=True)
class FormLayout:
    """Coordinates of k-forms of polynomial degree p on a carrier: one per (piece, α, I)."""

    carrier: Carrier
    k: int
    p: int

    @cached_property
    def keys(self) -> Tuple[LayoutKey, ...]:
        alts = alt_indices(self.carrier.ambient, self.k)
        return tuple(
            (i, alpha, index)
            for i, piece in enumerate(self.carrier.pieces)
            for alpha in compositions(self.p, len(piece.points))
            for index in alts
        )

    @cached_property
    def index(self) -> Dict[LayoutKey, int]:
        return {key: i for i, key in enumerate(self.keys)}

    @cached_property
    def positions_by_piece(self) -> Tuple[Tuple[int, ...], ...]:
        positions: List[List[int]] = [[] for _ in self.carrier.pieces]
        for position, (piece, _, _) in enumerate(self.keys):
            positions[piece].append(position)
        return tuple(tuple(p) for p in positions)

    @property
    def size(self) -> int:
        return len(self.keys)

    def sparse(self, form: PolyForm, offset: int = 0) -> SparseRow:
        if form.carrier != self.carrier:
            raise GeometryError("The form does not live on the carrier of the layout.")
        if form.k != self.k:
            raise ValueError(f"A {form.k}-form does not fit a layout of {self.k}-forms.")
        if form.is_zero():
            return {}
        form = form.reduced(self.p)
        return {
            offset + self.index[(i, alpha, index)]: value
            for i, table in enumerate(form.terms)
            for (alpha, index), value in table.items()
        }

    def vector(self, form: PolyForm) -> Tuple[Fraction, ...]:
        values = [ZERO] * self.size
        for position, value in self.sparse(form).items():
            values[position] = value
        return tuple(values)

    def form(self, coefficients: Sequence[Fraction]) -> PolyForm:
        terms: List[Dict] = [{} for _ in self.carrier.pieces]
        for (i, alpha, index), value in zip(self.keys, coefficients):
            if value:
                terms[i][(alpha, index)] = value
        return PolyForm(self.k, self.p, self.carrier, tuple(terms))

    def unit(self, position: int) -> PolyForm:
        piece, alpha, index = self.keys[position]
        return PolyForm.monomial(self.carrier, piece, alpha, index)


def _offsets(layouts: Sequence[FormLayout]) -> Tuple[int, ...]:
    offsets = [0]
    for layout in layouts:
        offsets.append(offsets[-1] + layout.size)
    return tuple(offsets)


def _jet_sparse(layouts: Sequence[FormLayout], jet: JetLike) -> SparseRow:
    jet = as_jet(jet)
    if len(jet) != len(layouts):
        raise ValueError(f"Expected a jet of {len(layouts)} components, got {len(jet)}.")
    offsets = _offsets(layouts)
    entries: SparseRow = {}
    for layout, offset, form in zip(layouts, offsets, jet):
        entries.update(layout.sparse(form, offset))
    return entries


def _columns_to_matrix(columns: Sequence[SparseRow], rows: int) -> RatMatrix:
    entries = [[ZERO] * len(columns) for _ in range(rows)]
    for j, column in enumerate(columns):
        for i, value in column.items():
            entries[i][j] = value
    return RatMatrix.from_rows(entries, len(columns))


def _vectorize(outputs: Sequence[Jet]) -> Tuple[List[SparseRow], int]:
    """
    Coordinates of the images of a linear map, one sparse column per image. Keys are allocated on
    the fly, each output slot being elevated to the highest polynomial degree it reaches.
    """
    if not outputs:
        return [], 0
    degrees = [
        max((out[slot].p for out in outputs if not out[slot].is_zero()), default=0)
        for slot in range(len(outputs[0]))
    ]
    keys: Dict[Tuple, int] = {}
    columns = []
    for output in outputs:
        column: SparseRow = {}
        for slot, form in enumerate(output):
            if form.is_zero():
                continue
            form = form.elevate(degrees[slot])
            for piece, table in enumerate(form.terms):
                for term, value in table.items():
                    position = keys.setdefault((slot, piece, term), len(keys))
                    column[position] = value
        columns.append(column)
    return columns, len(keys)


@dataclass(frozen=True)
class FormSpace:
    """A subspace of the layouts, given by basis columns of exact coordinates."""

    layouts: Tuple[FormLayout, ...]
    basis: RatMatrix
    name: str = field(default="", compare=False)

    def __post_init__(self) -> None:
        if self.basis.rows != sum(layout.size for layout in self.layouts):
            raise ValueError("The basis does not match the layouts.")

    @classmethod
    def span(
        cls, layouts: Sequence[FormLayout], jets: Iterable[JetLike], name: str = ""
    ) -> "FormSpace":
        layouts = tuple(layouts)
        size = sum(layout.size for layout in layouts)
        columns = [_jet_sparse(layouts, jet) for jet in jets]
        matrix = _columns_to_matrix(columns, size)
        return cls(layouts, column_basis(matrix) if columns else matrix, name)

    @classmethod
    def whole(cls, layouts: Sequence[FormLayout], name: str = "") -> "FormSpace":
        layouts = tuple(layouts)
        return cls(layouts, RatMatrix.identity(sum(layout.size for layout in layouts)), name)

    @classmethod
    def zero(cls, layouts: Sequence[FormLayout], name: str = "") -> "FormSpace":
        layouts = tuple(layouts)
        return cls(layouts, RatMatrix.zeros(sum(layout.size for layout in layouts), 0), name)

    @property
    def dim(self) -> int:
        return self.basis.cols

    @property
    def size(self) -> int:
        return self.basis.rows

    @property
    def carrier(self) -> Carrier:
        return self.layouts[0].carrier

    @property
    def k(self) -> int:
        return self.layouts[0].k

    def jet(self, coefficients: Sequence[Fraction]) -> Jet:
        """The element with the given coordinates in the layouts."""
        offsets = _offsets(self.layouts)
        return tuple(
            layout.form(coefficients[start:end])
            for layout, start, end in zip(self.layouts, offsets, offsets[1:])
        )

    def combine(self, weights: Sequence[Fraction]) -> Jet:
        """The element Σ weights[i] · basis[i]."""
        return self.jet(self.basis.apply(weights))

    @cached_property
    def elements(self) -> Tuple[Jet, ...]:
        return tuple(self.jet(column) for column in self.basis.columns())

    def forms(self) -> Tuple[PolyForm, ...]:
        """First components of the basis elements."""
        return tuple(element[0] for element in self.elements)

    def vector(self, jet: JetLike) -> Tuple[Fraction, ...]:
        values = [ZERO] * self.size
        for position, value in _jet_sparse(self.layouts, jet).items():
            values[position] = value
        return tuple(values)

    def coordinates(self, jet: JetLike) -> Optional[Tuple[Fraction, ...]]:
        """Coordinates against the basis, or None if the jet is not in the space."""
        try:
            column = RatMatrix.from_columns([self.vector(jet)], self.size)
        except ValueError:
            return None
        solution = solve(self.basis, column)
        return None if solution is None else solution.column(0)

    def coordinates_matrix(self, jets: Sequence[JetLike]) -> Optional[RatMatrix]:
        """Coordinates of several jets at once (one column each); None if any is outside."""
        try:
            columns = RatMatrix.from_columns([self.vector(jet) for jet in jets], self.size)
        except ValueError:
            return None
        if not jets:
            return RatMatrix.zeros(self.dim, 0)
        return solve(self.basis, columns)

    def contains(self, jet: JetLike) -> bool:
        return self.coordinates(jet) is not None

    def is_subspace(self, other: "FormSpace") -> bool:
        """self ⊆ other."""
        self._check_layouts(other)
        return solve(other.basis, self.basis) is not None

    def equals(self, other: "FormSpace") -> bool:
        return self.dim == other.dim and self.is_subspace(other)

    def _check_layouts(self, other: "FormSpace") -> None:
        if self.layouts != other.layouts:
            raise GeometryError(f"Spaces {self.name!r} and {other.name!r} use different layouts.")

    def sum(self, other: "FormSpace", name: str = "") -> "FormSpace":
        self._check_layouts(other)
        return FormSpace(self.layouts, column_basis(hstack(self.basis, other.basis)), name)

    def intersection(self, other: "FormSpace", name: str = "") -> "FormSpace":
        self._check_layouts(other)
        kernel = nullspace(hstack(self.basis, -other.basis))
        top = kernel.select_rows(range(self.dim))
        return FormSpace(self.layouts, column_basis(self.basis @ top), name)

    def subspace(self, coordinates: RatMatrix, name: str = "") -> "FormSpace":
        """The span of the given coordinate columns (against this basis)."""
        return FormSpace(self.layouts, column_basis(self.basis @ coordinates), name)

    def image(
        self, func: Callable[[Jet], JetLike], layouts: Sequence[FormLayout], name: str = ""
    ) -> "FormSpace":
        return FormSpace.span(layouts, (func(element) for element in self.elements), name)

    def kernel(self, func: Callable[[Jet], JetLike], name: str = "") -> "FormSpace":
        columns, rows = _vectorize([as_jet(func(element)) for element in self.elements])
        if rows:
            kernel = nullspace(_columns_to_matrix(columns, rows))
        else:
            kernel = RatMatrix.identity(self.dim)
        return FormSpace(self.layouts, self.basis @ kernel, name)

    def preimage(
        self, func: Callable[[Jet], JetLike], target: "FormSpace", name: str = ""
    ) -> "FormSpace":
        """The elements mapped into `target` by the linear `func`."""
        annihilator = left_nullspace(target.basis).columns()
        if not annihilator or not self.dim:
            return FormSpace(self.layouts, self.basis, name or self.name)
        images = [_jet_sparse(target.layouts, func(element)) for element in self.elements]
        rows: List[SparseRow] = []
        for y in annihilator:
            row: SparseRow = {}
            for j, image in enumerate(images):
                value = sum((y[i] * v for i, v in image.items()), ZERO)
                if value:
                    row[j] = value
            rows.append(row)
        kernel = sparse_nullspace(rows, self.dim)
        return FormSpace(self.layouts, self.basis @ kernel, name or self.name)

    def map_rank(self, func: Callable[[Jet], JetLike]) -> int:
        columns, rows = _vectorize([as_jet(func(element)) for element in self.elements])
        return rank(_columns_to_matrix(columns, rows)) if rows else 0

    def relayout(self, layouts: Sequence[FormLayout], name: str = "") -> "FormSpace":
        """The same space written in other layouts (finer carriers, higher degrees)."""
        layouts = tuple(layouts)
        if layouts == self.layouts:
            return self
        jets = [
            tuple(
                form.transfer(layout.carrier) if form.carrier != layout.carrier else form
                for form, layout in zip(element, layouts)
            )
            for element in self.elements
        ]
        return FormSpace.span(layouts, jets, name or self.name)


def _continuity_quantities(unit: PolyForm, mode: Continuity) -> Tuple[PolyForm, ...]:
    if mode is Continuity.C1:
        return (unit,) + tuple(unit.partial(axis) for axis in range(unit.n))
    if mode is Continuity.C0D:
        return unit, unit.d()
    return (unit,)


class ConstraintSystem:
    """Sparse linear constraints over the concatenated coordinates of several layouts."""

    def __init__(self, layouts: Sequence[FormLayout], name: str = "") -> None:
        self.layouts = tuple(layouts)
        self.name = name
        self.offsets = _offsets(self.layouts)
        self.rows: List[SparseRow] = []

    @property
    def size(self) -> int:
        return self.offsets[-1]

    def unit_jet(self, component: int, position: int) -> Jet:
        return tuple(
            layout.unit(position) if c == component else PolyForm.zero(layout.carrier, layout.k)
            for c, layout in enumerate(self.layouts)
        )

    def _add_columns(self, columns: Dict[int, SparseRow]) -> None:
        """Columns indexed by unknown, keyed by constraint; appends the transposed rows."""
        rows: Dict[int, SparseRow] = {}
        for unknown, column in columns.items():
            for key, value in column.items():
                if value:
                    rows.setdefault(key, {})[unknown] = value
        self.rows.extend(rows[key] for key in sorted(rows))

    def require_zero(
        self, func: Callable[[Jet], JetLike], components: Optional[Sequence[int]] = None
    ) -> None:
        """Every element must satisfy func(element) = 0; func must be linear."""
        components = range(len(self.layouts)) if components is None else components
        unknowns = []
        outputs = []
        for component in components:
            for position in range(self.layouts[component].size):
                unknowns.append(self.offsets[component] + position)
                outputs.append(as_jet(func(self.unit_jet(component, position))))
        columns, _ = _vectorize(outputs)
        self._add_columns(dict(zip(unknowns, columns)))

    def require_equal(
        self, first: Callable[[Jet], JetLike], second: Callable[[Jet], JetLike]
    ) -> None:
        self.require_zero(
            lambda jet: tuple(a - b for a, b in zip(as_jet(first(jet)), as_jet(second(jet))))
        )

    def require_member(self, component: int, space: FormSpace) -> None:
        """The component must lie in a single-component space (rewritten in this layout)."""
        space = space.relayout((self.layouts[component],))
        annihilator = left_nullspace(space.basis)
        offset = self.offsets[component]
        for column in annihilator.columns():
            self.rows.append({offset + i: value for i, value in enumerate(column) if value})

    def require_mapped_member(
        self, component: int, func: Callable[[PolyForm], PolyForm], space: FormSpace
    ) -> None:
        """func(component) must lie in a single-component space; func must be linear."""
        layout = self.layouts[component]
        target = space.layouts[0]
        annihilator = left_nullspace(space.basis).columns()
        if not annihilator:
            return
        columns: Dict[int, SparseRow] = {}
        for position in range(layout.size):
            image = target.sparse(func(layout.unit(position)))
            column: SparseRow = {}
            for j, y in enumerate(annihilator):
                value = sum((v * y[i] for i, v in image.items()), ZERO)
                if value:
                    column[j] = value
            columns[self.offsets[component] + position] = column
        self._add_columns(columns)

    def require_continuity(self, component: int, mode: Continuity) -> None:
        """One-sided quantities must agree across every interface of the carrier."""
        if mode is Continuity.NONE:
            return
        layout = self.layouts[component]
        offset = self.offsets[component]
        carrier = layout.carrier

        def interface_entries(
            interface: Tuple[Simplex, int, int]
        ) -> List[Tuple[Tuple, int, Fraction]]:
            face, first, second = interface
            target = Carrier.single(face)
            entries = []
            for sign, piece in ((1, first), (-1, second)):
                single = Carrier.single(carrier.pieces[piece])
                for position in layout.positions_by_piece[piece]:
                    _, alpha, index = layout.keys[position]
                    unit = PolyForm.monomial(single, 0, alpha, index)
                    for slot, quantity in enumerate(_continuity_quantities(unit, mode)):
                        if mode is Continuity.TANGENTIAL:
                            restricted = quantity.pullback(target, check=False)
                        else:
                            restricted = quantity.trace(target, check=False)
                        for term, value in restricted.terms[0].items():
                            entries.append(((slot, term), offset + position, sign * value))
            return entries

        for entries in parallel_map(interface_entries, carrier.interfaces):
            rows: Dict[Tuple, SparseRow] = {}
            for key, unknown, value in entries:
                row = rows.setdefault(key, {})
                total = row.get(unknown, ZERO) + value
                if total:
                    row[unknown] = total
                else:
                    row.pop(unknown, None)
            self.rows.extend(row for _, row in sorted(rows.items()) if row)
        log.debug(
            "%s: %s continuity over %s interfaces", self.name, mode.value, len(carrier.interfaces)
        )

    def require_closed(self, component: int) -> None:
        self.require_zero(lambda jet: jet[component].d().project(), [component])

    def require_unbroken(self, component: int, groups: Sequence[Sequence[int]]) -> None:
        """Within each group, the pieces carry one and the same polynomial."""
        layout = self.layouts[component]
        offset = self.offsets[component]
        carrier = layout.carrier
        for group in groups:
            lead = group[0]
            lead_carrier = Carrier.single(carrier.pieces[lead])
            for other in group[1:]:
                target = Carrier.single(carrier.pieces[other])
                columns: Dict[int, SparseRow] = {}
                keys: Dict[Tuple, int] = {}
                for position in layout.positions_by_piece[lead]:
                    _, alpha, index = layout.keys[position]
                    extended = PolyForm.monomial(lead_carrier, 0, alpha, index).extend_piece(
                        0, target
                    )
                    columns[offset + position] = {
                        keys.setdefault(term, len(keys)): value
                        for term, value in extended.terms[0].items()
                    }
                for position in layout.positions_by_piece[other]:
                    _, alpha, index = layout.keys[position]
                    columns[offset + position] = {keys.setdefault((alpha, index), len(keys)): -ONE}
                self._add_columns(columns)

    def solve(self, name: str = "") -> FormSpace:
        basis = sparse_nullspace(self.rows, self.size)
        log.debug(
            "%s: %s constraints, %s unknowns, dim %s",
            name or self.name,
            len(self.rows),
            self.size,
            basis.cols,
        )
        return FormSpace(self.layouts, basis, name or self.name)


def full_space(carrier: Carrier, k: int, p: int, name: str = "") -> FormSpace:
    return FormSpace.whole((FormLayout(carrier, k, p),), name)


def constrained_space(
    carrier: Carrier, p: int, k: int, continuity: Union[Continuity, str] = Continuity.NONE
) -> FormSpace:
    """Piecewise P^p k-forms on the carrier with the requested interface continuity."""
    continuity = Continuity(continuity)
    system = ConstraintSystem((FormLayout(carrier, k, p),), f"{continuity.value}P{p}Λ{k}")
    system.require_continuity(0, continuity)
    return system.solve()


def whitney_forms(simplex: Simplex, k: int) -> List[PolyForm]:
    """k! Σ_i (-1)^i λ_{σ_i} dλ_{σ_0} ∧ ... (omitting σ_i) ... for every k-face σ."""
    carrier = Carrier.single(simplex)
    bary = [PolyForm.barycentric(carrier, i) for i in range(len(simplex.points))]
    grads = [b.d() for b in bary]
    forms = []
    for face in combinations(range(len(simplex.points)), k + 1):
        total = PolyForm.zero(carrier, k, 1)
        for i, vertex in enumerate(face):
            term = bary[vertex]
            for other in face:
                if other != vertex:
                    term = term.wedge(grads[other])
            total = total + term * ((-1) ** i * factorial(k))
        forms.append(total)
    return forms


def whitney_space(simplex: Simplex, k: int, carrier: Optional[Carrier] = None) -> FormSpace:
    """Whitney k-forms on a simplex, optionally written on a finer carrier, as pullbacks."""
    forms = whitney_forms(simplex, k)
    if carrier is not None:
        forms = [form.transfer(carrier) for form in forms]
    forms = [form.project() for form in forms]
    target = carrier or Carrier.single(simplex)
    return FormSpace.span((FormLayout(target, k, 1),), forms, f"Whitney{k}")


def augment(
    lower: FormSpace, upper: FormSpace, center: Sequence[Fraction], name: str = ""
) -> FormSpace:
    """V^k + p_W V^{k+1}."""
    p = max(lower.layouts[0].p, upper.layouts[0].p + 1)
    layout = FormLayout(lower.carrier, lower.k, p)
    forms = list(lower.forms()) + [form.poincare(center) for form in upper.forms()]
    return FormSpace.span((layout,), forms, name)


@dataclass(frozen=True)
class AugmentedComplex:
    spaces: Tuple[FormSpace, ...]
    direct: Tuple[bool, ...]

    @property
    def dims(self) -> Tuple[int, ...]:
        return tuple(space.dim for space in self.spaces)


def augmented_complex(
    complex_: Sequence[FormSpace], center: Sequence[Fraction]
) -> AugmentedComplex:
    """
    W^k = V^k + p_W V^{k+1} for a complex V; also checks W^k = d W^{k-1} ⊕ p_W W^{k+1} by rank.
    """
    spaces = []
    for k, space in enumerate(complex_):
        if k + 1 < len(complex_):
            spaces.append(augment(space, complex_[k + 1], center, f"W{k}"))
        else:
            spaces.append(space)
    direct = []
    for k, space in enumerate(spaces):
        layout = space.layouts[0]
        derived = [f.d() for f in spaces[k - 1].forms()] if k else []
        coned = [f.poincare(center) for f in spaces[k + 1].forms()] if k + 1 < len(spaces) else []
        first = FormSpace.span((layout,), derived)
        second = FormSpace.span((layout,), coned)
        both = first.sum(second)
        direct.append(both.dim == first.dim + second.dim == space.dim and both.equals(space))
    return AugmentedComplex(tuple(spaces), tuple(direct))


def trimmed_space(simplex: Simplex, k: int, r: int) -> FormSpace:
    """P⁻_r Λ^k = P_{r-1} Λ^k + κ P_{r-1} Λ^{k+1}."""
    carrier = Carrier.single(simplex)
    lower = full_space(carrier, k, r - 1)
    upper = full_space(carrier, k + 1, r - 1)
    forms = list(lower.forms()) + [f.koszul(simplex.isobarycenter) for f in upper.forms()]
    return FormSpace.span((FormLayout(carrier, k, r),), forms, f"P{r}-Λ{k}")


def trimmed_dimension(n: int, k: int, r: int) -> int:
    return comb(r + k - 1, k) * comb(n + r, n - k)


def inner_product(first: JetLike, second: JetLike) -> Fraction:
    """
    L² pairing of jets, component by component, with the Euclidean metric on the Alt part. The
    measure is normalized by the first piece's volume so that every value stays rational.
    """
    total = ZERO
    for u, v in zip(as_jet(first), as_jet(second)):
        if u.carrier != v.carrier:
            raise GeometryError("Cannot pair forms living on different carriers.")
        for weight, a, b in zip(u.carrier.weights, u.terms, v.terms):
            if not a or not b:
                continue
            by_alt: Dict[AltIndex, List[Tuple[Tuple[int, ...], Fraction]]] = {}
            for (beta, index), y in b.items():
                by_alt.setdefault(index, []).append((beta, y))
            piece_total = ZERO
            for (alpha, index), x in a.items():
                for beta, y in by_alt.get(index, ()):
                    piece_total += x * y * multinomial_factor(
                        tuple(i + j for i, j in zip(alpha, beta))
                    )
            total += weight * piece_total
    return total


def gram_matrix(first: Sequence[JetLike], second: Sequence[JetLike]) -> RatMatrix:
    return RatMatrix.from_rows([[inner_product(a, b) for b in second] for a in first], len(second))
