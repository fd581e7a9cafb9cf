"""
Piecewise polynomial differential forms.

A `PolyForm` of degree k lives on a `Carrier`: a tuple of simplices (the pieces) of a common
dimension in ℝⁿ. On every piece it is stored as

    Σ c[α, I] λ^α dx_I

where λ are the barycentric coordinates of the piece, every α has the same total degree p (forms
are kept homogeneous in λ, which makes the Bernstein-like monomials a basis of P_p), and dx_I runs
over the global frame: I is a strictly increasing tuple of 0-based axis indices. Keeping the Alt
part in the global frame turns traces into coefficient comparisons and pullbacks into an exact
linear map on the Alt indices.

Forms on a lower-dimensional piece (an edge in ℝ², a face in ℝ³) use the tangential gradients of
the piece's barycentric coordinates; their `d` is the tangential exterior derivative, and only
`pullback` is intrinsic to the piece.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations, product
import logging
from math import comb, factorial
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

from fesc.exceptions import GeometryError, MultiValuedTrace, NotAdmissible, NotConeShaped
from fesc.geometry import (
    Point,
    Simplex,
    as_point,
    format_point,
    locate,
    relative_volume,
    sub,
)
from fesc.linalg import MultiIndex, RatMatrix, determinant, multinomial_factor, ZERO, ONE

log = logging.getLogger(__name__)

AltIndex = Tuple[int, ...]
Term = Tuple[MultiIndex, AltIndex]
Terms = Dict[Term, Fraction]
Scalar = Union[int, Fraction]


def alt_indices(n: int, k: int) -> List[AltIndex]:
    return list(combinations(range(n), k))


def wedge_indices(first: AltIndex, second: AltIndex) -> Tuple[int, AltIndex]:
    """dx_I ∧ dx_J = sign · dx_K; sign is 0 when I and J intersect."""
    if set(first) & set(second):
        return 0, ()
    inversions = sum(1 for i in first for j in second if i > j)
    return (-1 if inversions % 2 else 1), tuple(sorted(first + second))


def contract_index(index: AltIndex, vector: Sequence[Fraction]) -> List[Tuple[Fraction, AltIndex]]:
    """dx_I ⌞ v = Σ_m (-1)^m v[I_m] dx_{I without I_m}."""
    result = []
    for m, axis in enumerate(index):
        if vector[axis]:
            sign = -1 if m % 2 else 1
            result.append((sign * vector[axis], index[:m] + index[m + 1 :]))
    return result


def _add_to(terms: Terms, key: Term, value: Fraction) -> None:
    if not value:
        return
    total = terms.get(key, ZERO) + value
    if total:
        terms[key] = total
    else:
        terms.pop(key, None)


def _unit(length: int, position: int) -> MultiIndex:
    return tuple(1 if i == position else 0 for i in range(length))


def _shift(alpha: MultiIndex, position: int, amount: int) -> MultiIndex:
    return alpha[:position] + (alpha[position] + amount,) + alpha[position + 1 :]


def _multiply_polynomials(
    first: Mapping[MultiIndex, Fraction], second: Mapping[MultiIndex, Fraction]
) -> Dict[MultiIndex, Fraction]:
    result: Dict[MultiIndex, Fraction] = {}
    for a, x in first.items():
        for b, y in second.items():
            key = tuple(i + j for i, j in zip(a, b))
            result[key] = result.get(key, ZERO) + x * y
    return {key: value for key, value in result.items() if value}


@lru_cache(maxsize=None)
def _elevation(alpha: MultiIndex, steps: int) -> Tuple[Tuple[MultiIndex, Fraction], ...]:
    """λ^α (Σλ)^steps expanded."""
    polynomial: Dict[MultiIndex, Fraction] = {alpha: ONE}
    for _ in range(steps):
        bigger: Dict[MultiIndex, Fraction] = {}
        for beta, value in polynomial.items():
            for i in range(len(alpha)):
                key = _shift(beta, i, 1)
                bigger[key] = bigger.get(key, ZERO) + value
        polynomial = bigger
    return tuple(polynomial.items())


@lru_cache(maxsize=None)
def _affine_expansion(alpha: MultiIndex) -> Tuple[Tuple[MultiIndex, Fraction], ...]:
    """λ^α with λ_0 = 1 - Σ_{i>0} λ_i, as a polynomial in λ_1, ..., λ_d."""
    size = len(alpha) - 1
    polynomial: Dict[MultiIndex, Fraction] = {(0,) * size: ONE}
    complement = {(0,) * size: ONE}
    complement.update({_unit(size, i): -ONE for i in range(size)})
    for _ in range(alpha[0]):
        polynomial = _multiply_polynomials(polynomial, complement)
    for i, a in enumerate(alpha[1:]):
        for _ in range(a):
            polynomial = _multiply_polynomials(polynomial, {_unit(size, i): ONE})
    return tuple(polynomial.items())


@lru_cache(maxsize=None)
def _substitution(source: Simplex, target: Simplex) -> Tuple[Tuple[Fraction, ...], ...]:
    """M[i][j] = λ^source_i at vertex j of target, so that λ^source_i = Σ_j M[i][j] λ^target_j."""
    rows = [source.barycentric(point) for point in target.points]
    return tuple(tuple(row[i] for row in rows) for i in range(len(source.points)))


@lru_cache(maxsize=None)
def _restrict_monomial(
    alpha: MultiIndex, source: Simplex, target: Simplex
) -> Tuple[Tuple[MultiIndex, Fraction], ...]:
    matrix = _substitution(source, target)
    size = len(target.points)
    selection = []
    for row in matrix:
        nonzero = [j for j, value in enumerate(row) if value]
        selection.append(nonzero[0] if len(nonzero) == 1 and row[nonzero[0]] == ONE else None)
    if all(s is not None or not a for s, a in zip(selection, alpha)):
        beta = [0] * size
        for s, a in zip(selection, alpha):
            if a:
                beta[s] += a  # type: ignore
        return ((tuple(beta), ONE),)
    polynomial: Dict[MultiIndex, Fraction] = {(0,) * size: ONE}
    for row, a in zip(matrix, alpha):
        linear = {_unit(size, j): value for j, value in enumerate(row) if value}
        for _ in range(a):
            polynomial = _multiply_polynomials(polynomial, linear)
    return tuple(polynomial.items())


def _evaluate_monomial(alpha: MultiIndex, weights: Sequence[Fraction]) -> Fraction:
    value = ONE
    for a, w in zip(alpha, weights):
        if a:
            value *= w**a
    return value


def _pullback_alt(
    alt: Mapping[AltIndex, Fraction], projector: RatMatrix, k: int
) -> Dict[AltIndex, Fraction]:
    """(ω∘P)_I = Σ_J ω_J det P[J, I]."""
    if not k:
        return dict(alt)
    n = projector.rows
    result: Dict[AltIndex, Fraction] = {}
    for target in combinations(range(n), k):
        value = ZERO
        for source, coefficient in alt.items():
            minor = RatMatrix.from_rows(
                [[projector.entries[i][j] for j in target] for i in source], k
            )
            value += coefficient * determinant(minor)
        if value:
            result[target] = value
    return result


@lru_cache(maxsize=None)
def _pullback_matrix(
    projector: RatMatrix, k: int
) -> Tuple[Tuple[AltIndex, Tuple[Tuple[AltIndex, Fraction], ...]], ...]:
    """For each source index J, the images (I, det P[J, I]) that are nonzero."""
    n = projector.rows
    rows = []
    for source in combinations(range(n), k):
        images = _pullback_alt({source: ONE}, projector, k)
        rows.append((source, tuple(images.items())))
    return tuple(rows)


@dataclass(frozen=True)
class Carrier:
    """The pieces a piecewise form lives on; all pieces share one dimension."""

    pieces: Tuple[Simplex, ...]

    def __post_init__(self) -> None:
        if not self.pieces:
            raise GeometryError("A carrier needs at least one piece.")
        if len({piece.dim for piece in self.pieces}) != 1:
            raise GeometryError("Carrier pieces must share one dimension.")

    @classmethod
    def single(cls, simplex: Simplex) -> "Carrier":
        return cls((simplex,))

    @classmethod
    def point(cls, point: Sequence[object]) -> "Carrier":
        return cls((Simplex((as_point(point),)),))

    @classmethod
    def of(cls, rc: Any, base_cell: Tuple[int, ...]) -> "Carrier":
        """The pieces of a refined complex (`splits.RefinedComplex`) tiling `base_cell`."""
        return cls(rc.piece_simplices(base_cell))

    @classmethod
    def split(
        cls, simplex: Simplex, m: int, inpoints: Optional[Mapping[Tuple[int, ...], Point]] = None
    ) -> "Carrier":
        """R_m of a single simplex; `inpoints` maps sorted local vertex tuples to points."""
        from fesc.simplicial import SimplicialComplex
        from fesc.splits import InpointAssignment, isobarycenter_inpoints, refine

        local = SimplicialComplex.from_tops(simplex.points, [range(len(simplex.points))])
        assignment = isobarycenter_inpoints(local)
        if inpoints:
            assignment = InpointAssignment({**assignment.points, **inpoints}, "explicit")
        rc = refine(local, m, assignment)
        return cls.of(rc, tuple(range(len(simplex.points))))

    @property
    def dim(self) -> int:
        return self.pieces[0].dim

    @property
    def ambient(self) -> int:
        return self.pieces[0].ambient

    def __len__(self) -> int:
        return len(self.pieces)

    @cached_property
    def vertices(self) -> Tuple[Point, ...]:
        return tuple(sorted({p for piece in self.pieces for p in piece.points}))

    @cached_property
    def _facets(self) -> Dict[Tuple[Point, ...], List[int]]:
        facets: Dict[Tuple[Point, ...], List[int]] = {}
        for index, piece in enumerate(self.pieces):
            if not piece.dim:
                continue
            for facet in piece.facets():
                facets.setdefault(tuple(sorted(facet.points)), []).append(index)
        return facets

    @cached_property
    def interfaces(self) -> Tuple[Tuple[Simplex, int, int], ...]:
        """Codimension-1 faces shared by two pieces, with the two piece indices."""
        return tuple(
            (Simplex(points), owners[0], owners[1])
            for points, owners in sorted(self._facets.items())
            if len(owners) == 2
        )

    @cached_property
    def boundary_facets(self) -> Tuple[Simplex, ...]:
        return tuple(
            Simplex(points) for points, owners in sorted(self._facets.items()) if len(owners) == 1
        )

    def locate(self, point: Sequence[Fraction]) -> Optional[int]:
        return locate(self.pieces, point)

    def contains_simplex(self, simplex: Simplex) -> bool:
        return any(piece.contains_simplex(simplex) for piece in self.pieces)

    def groups(self, coarse: "Carrier") -> Tuple[Tuple[int, ...], ...]:
        """For each coarse piece, the indices of the pieces of this carrier that it contains."""
        groups = []
        for piece in coarse.pieces:
            members = tuple(
                i
                for i, fine in enumerate(self.pieces)
                if piece.contains_strictly(fine.isobarycenter)
            )
            groups.append(members)
        if sorted(i for group in groups for i in group) != list(range(len(self.pieces))):
            raise GeometryError("The coarse carrier does not group the pieces of the fine one.")
        return tuple(groups)

    @cached_property
    def weights(self) -> Tuple[Fraction, ...]:
        """Piece volumes relative to the first piece."""
        return tuple(abs(relative_volume(self.pieces[0], piece)) for piece in self.pieces)

    def describe(self) -> List[List[List[str]]]:
        return [[[str(c) for c in p] for p in piece.points] for piece in self.pieces]


@lru_cache(maxsize=None)
def _covering(source: Carrier, target: Carrier) -> Tuple[Tuple[int, ...], ...]:
    covering = []
    for piece in target.pieces:
        owners = tuple(i for i, s in enumerate(source.pieces) if s.contains_simplex(piece))
        if not owners:
            raise GeometryError(f"Piece {piece} is not contained in the carrier of the form.")
        covering.append(owners)
    return tuple(covering)


@dataclass(frozen=True, eq=False)
class PolyForm:
    k: int
    p: int
    carrier: Carrier
    terms: Tuple[Terms, ...]

    def __post_init__(self) -> None:
        if len(self.terms) != len(self.carrier.pieces):
            raise ValueError("One term table per carrier piece is required.")

    # construction

    @classmethod
    def zero(cls, carrier: Carrier, k: int, p: int = 0) -> "PolyForm":
        return cls(k, p, carrier, tuple({} for _ in carrier.pieces))

    @classmethod
    def constant(
        cls, carrier: Carrier, alt: Union[Mapping[AltIndex, Scalar], Scalar], k: int = 0
    ) -> "PolyForm":
        """A constant form; `alt` maps Alt indices to coefficients, or is a scalar 0-form."""
        if not isinstance(alt, Mapping):
            alt = {(): alt}
        else:
            k = len(next(iter(alt))) if alt else k
        terms = []
        for piece in carrier.pieces:
            zero_alpha = (0,) * len(piece.points)
            terms.append({(zero_alpha, I): Fraction(c) for I, c in alt.items() if c})
        return cls(k, 0, carrier, tuple(terms))

    @classmethod
    def dx(cls, carrier: Carrier, axis: int) -> "PolyForm":
        return cls.constant(carrier, {(axis,): 1})

    @classmethod
    def coordinate(cls, carrier: Carrier, axis: int) -> "PolyForm":
        """x_axis = Σ λ_i V_i[axis]."""
        terms = []
        for piece in carrier.pieces:
            size = len(piece.points)
            table: Terms = {}
            for i, vertex in enumerate(piece.points):
                _add_to(table, (_unit(size, i), ()), vertex[axis])
            terms.append(table)
        return cls(0, 1, carrier, tuple(terms))

    @classmethod
    def barycentric(cls, carrier: Carrier, index: int) -> "PolyForm":
        """λ_index of a single-piece carrier."""
        if len(carrier.pieces) != 1:
            raise GeometryError("Barycentric coordinates need a single-piece carrier.")
        size = len(carrier.pieces[0].points)
        return cls(0, 1, carrier, ({(_unit(size, index), ()): ONE},))

    @classmethod
    def monomial(
        cls, carrier: Carrier, piece: int, alpha: MultiIndex, index: AltIndex = ()
    ) -> "PolyForm":
        """λ^α dx_I on one piece, zero elsewhere."""
        terms = tuple({(alpha, index): ONE} if i == piece else {} for i in range(len(carrier)))
        return cls(len(index), sum(alpha), carrier, terms)

    @classmethod
    def from_sympy(
        cls,
        carrier: Carrier,
        components: Union[Any, Mapping[AltIndex, Any]],
        symbols: Sequence[Any],
        k: int = 0,
    ) -> "PolyForm":
        """
        Builds a form from sympy polynomials in the global coordinates `symbols`; `components`
        maps Alt indices to polynomial coefficients (or is a single polynomial 0-form).
        """
        import sympy

        if not isinstance(components, Mapping):
            components = {(): components}
        else:
            k = len(next(iter(components))) if components else k
        coordinates = [cls.coordinate(carrier, axis) for axis in range(carrier.ambient)]
        result = cls.zero(carrier, k)
        for index, expression in components.items():
            polynomial = sympy.Poly(sympy.sympify(expression), *symbols)
            for exponents, coefficient in polynomial.terms():
                rational = sympy.Rational(coefficient)
                term = cls.constant(carrier, {index: Fraction(int(rational.p), int(rational.q))})
                for axis, power in enumerate(exponents):
                    for _ in range(power):
                        term = coordinates[axis].wedge(term)
                result = result + term
        return result

    # structure

    @property
    def n(self) -> int:
        return self.carrier.ambient

    def piece(self, index: int) -> "PolyForm":
        return PolyForm(
            self.k, self.p, Carrier.single(self.carrier.pieces[index]), (dict(self.terms[index]),)
        )

    def is_zero(self) -> bool:
        return not any(self.terms)

    def elevate(self, p: int) -> "PolyForm":
        """The same form written with monomials of degree p ≥ self.p."""
        if p == self.p:
            return self
        if p < self.p:
            raise ValueError(f"Cannot lower the polynomial degree from {self.p} to {p}.")
        terms = []
        for table in self.terms:
            elevated: Terms = {}
            for (alpha, index), value in table.items():
                for beta, factor in _elevation(alpha, p - self.p):
                    _add_to(elevated, (beta, index), value * factor)
            terms.append(elevated)
        return PolyForm(self.k, p, self.carrier, tuple(terms))

    def reduced(self, p: int) -> "PolyForm":
        """
        The same form written with monomials of degree p, which may be below self.p when the
        actual polynomial degree allows it; raises ValueError otherwise.
        """
        if p >= self.p:
            return self.elevate(p)
        terms = []
        for table in self.terms:
            affine: Dict[Tuple[MultiIndex, AltIndex], Fraction] = {}
            for (alpha, index), value in table.items():
                for gamma, factor in _affine_expansion(alpha):
                    _add_to(affine, (gamma, index), value * factor)
            reduced: Terms = {}
            for (gamma, index), value in affine.items():
                if sum(gamma) > p:
                    raise ValueError(f"The form has polynomial degree above {p}.")
                for beta, factor in _elevation((0,) + gamma, p - sum(gamma)):
                    _add_to(reduced, (beta, index), value * factor)
            terms.append(reduced)
        return PolyForm(self.k, p, self.carrier, tuple(terms))

    def _aligned(self, other: "PolyForm") -> Tuple["PolyForm", "PolyForm"]:
        if self.carrier != other.carrier:
            raise GeometryError("Forms live on different carriers.")
        if self.k != other.k:
            raise ValueError(f"Cannot combine a {self.k}-form with a {other.k}-form.")
        p = max(self.p, other.p)
        return self.elevate(p), other.elevate(p)

    def __add__(self, other: "PolyForm") -> "PolyForm":
        first, second = self._aligned(other)
        terms = []
        for a, b in zip(first.terms, second.terms):
            table = dict(a)
            for key, value in b.items():
                _add_to(table, key, value)
            terms.append(table)
        return PolyForm(first.k, first.p, first.carrier, tuple(terms))

    def __mul__(self, factor: Scalar) -> "PolyForm":
        factor = Fraction(factor)
        if not factor:
            return PolyForm.zero(self.carrier, self.k, self.p)
        return PolyForm(
            self.k,
            self.p,
            self.carrier,
            tuple({key: value * factor for key, value in table.items()} for table in self.terms),
        )

    __rmul__ = __mul__

    def __neg__(self) -> "PolyForm":
        return self * -1

    def __sub__(self, other: "PolyForm") -> "PolyForm":
        return self + (-other)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PolyForm):
            return NotImplemented
        if self.carrier != other.carrier or self.k != other.k:
            return False
        return (self - other).is_zero()

    def __repr__(self) -> str:
        return (
            f"PolyForm(k={self.k}, p={self.p}, pieces={len(self.carrier)}, "
            f"terms={list(self.terms)})"
        )

    # calculus

    def d(self) -> "PolyForm":
        """Exterior derivative, piece by piece (tangential on lower-dimensional pieces)."""
        if self.k >= self.n:
            return PolyForm.zero(self.carrier, self.k + 1)
        terms = []
        for piece, table in zip(self.carrier.pieces, self.terms):
            gradients = piece.gradients
            result: Terms = {}
            for (alpha, index), value in table.items():
                for i, a in enumerate(alpha):
                    if not a:
                        continue
                    lowered = _shift(alpha, i, -1)
                    for axis, g in enumerate(gradients[i]):
                        if not g:
                            continue
                        sign, bigger = wedge_indices((axis,), index)
                        if sign:
                            _add_to(result, (lowered, bigger), sign * a * g * value)
            terms.append(result)
        return PolyForm(self.k + 1, max(self.p - 1, 0), self.carrier, tuple(terms))

    def partial(self, axis: int) -> "PolyForm":
        """Componentwise derivative along a coordinate axis."""
        terms = []
        for piece, table in zip(self.carrier.pieces, self.terms):
            gradients = piece.gradients
            result: Terms = {}
            for (alpha, index), value in table.items():
                for i, a in enumerate(alpha):
                    if a and gradients[i][axis]:
                        key = (_shift(alpha, i, -1), index)
                        _add_to(result, key, a * gradients[i][axis] * value)
            terms.append(result)
        return PolyForm(self.k, max(self.p - 1, 0), self.carrier, tuple(terms))

    def wedge(self, other: "PolyForm") -> "PolyForm":
        if self.carrier != other.carrier:
            raise GeometryError("Forms live on different carriers.")
        terms = []
        for a, b in zip(self.terms, other.terms):
            result: Terms = {}
            for (alpha, first), x in a.items():
                for (beta, second), y in b.items():
                    sign, index = wedge_indices(first, second)
                    if sign:
                        key = (tuple(i + j for i, j in zip(alpha, beta)), index)
                        _add_to(result, key, sign * x * y)
            terms.append(result)
        return PolyForm(self.k + other.k, self.p + other.p, self.carrier, tuple(terms))

    def contract(self, vector: Sequence[Scalar]) -> "PolyForm":
        """u ⌞ v for a constant vector v (contraction in the first slot); zero on 0-forms."""
        vector = [Fraction(v) for v in vector]
        if not self.k:
            return PolyForm.zero(self.carrier, 0, self.p)
        terms = []
        for table in self.terms:
            result: Terms = {}
            for (alpha, index), value in table.items():
                for coefficient, smaller in contract_index(index, vector):
                    _add_to(result, (alpha, smaller), coefficient * value)
            terms.append(result)
        return PolyForm(self.k - 1, self.p, self.carrier, tuple(terms))

    def koszul(self, center: Sequence[Scalar]) -> "PolyForm":
        """κ_W u = u ⌞ (x - W); polynomial degree goes up by one. Zero on 0-forms."""
        center = as_point(center)
        if not self.k:
            return PolyForm.zero(self.carrier, 0, self.p + 1)
        terms = []
        for piece, table in zip(self.carrier.pieces, self.terms):
            offsets = [sub(vertex, center) for vertex in piece.points]
            result: Terms = {}
            for (alpha, index), value in table.items():
                for i, offset in enumerate(offsets):
                    raised = _shift(alpha, i, 1)
                    for coefficient, smaller in contract_index(index, offset):
                        _add_to(result, (raised, smaller), coefficient * value)
            terms.append(result)
        return PolyForm(self.k - 1, self.p + 1, self.carrier, tuple(terms))

    def poincare(self, center: Sequence[Scalar]) -> "PolyForm":
        """
        The Poincaré operator of the straight-line contraction to W:

            (p_W u)(x) = ∫₀¹ t^{k-1} u(W + t(x - W)) ⌞ (x - W) dt

        Every piece must contain W (closed), so that the segments stay inside one piece.
        Zero on 0-forms.
        """
        center = as_point(center)
        for piece in self.carrier.pieces:
            if not piece.contains(center):
                raise NotConeShaped(
                    f"Poincaré center {format_point(center)} is outside the piece {piece}."
                )
        if not self.k:
            return PolyForm.zero(self.carrier, 0, self.p + 1)
        k, p = self.k, self.p
        terms = []
        for piece, table in zip(self.carrier.pieces, self.terms):
            beta = piece.barycentric(center)
            averaged: Terms = {}
            for (alpha, index), value in table.items():
                for sub_alpha in product(*(range(a + 1) for a in alpha)):
                    size = sum(sub_alpha)
                    coefficient = Fraction(
                        factorial(k + size - 1) * factorial(p - size), factorial(k + p)
                    )
                    for a, j, b in zip(alpha, sub_alpha, beta):
                        coefficient *= comb(a, j) * b ** (a - j)
                    if not coefficient:
                        continue
                    for elevated, factor in _elevation(tuple(sub_alpha), p - size):
                        _add_to(averaged, (elevated, index), coefficient * factor * value)
            terms.append(averaged)
        return PolyForm(k, p, self.carrier, tuple(terms)).koszul(center)

    # restriction

    def _restricted_tables(self, target: Carrier, owner: int, index: int) -> Terms:
        source = self.carrier.pieces[owner]
        piece = target.pieces[index]
        result: Terms = {}
        for (alpha, alt), value in self.terms[owner].items():
            for beta, factor in _restrict_monomial(alpha, source, piece):
                _add_to(result, (beta, alt), value * factor)
        return result

    def trace(self, target: Carrier, *, check: bool = True) -> "PolyForm":
        """
        Restriction of every Alt component to the points of `target`, whose pieces must lie in
        pieces of this form's carrier. With `check`, every piece containing a target piece must
        agree, else `MultiValuedTrace`.
        """
        return self._restrict(target, check=check, project=False)

    def pullback(self, target: Carrier, *, check: bool = True) -> "PolyForm":
        """Trace followed by restricting the alternating action to tangent vectors of `target`."""
        return self._restrict(target, check=check, project=True)

    def _restrict(self, target: Carrier, *, check: bool, project: bool) -> "PolyForm":
        covering = _covering(self.carrier, target)
        terms = []
        for index, owners in enumerate(covering):
            candidates = owners if check else owners[:1]
            tables = []
            for owner in candidates:
                table = self._restricted_tables(target, owner, index)
                if project:
                    table = _project_terms(table, target.pieces[index], self.k)
                tables.append(table)
            for owner, table in zip(candidates[1:], tables[1:]):
                if table != tables[0]:
                    raise MultiValuedTrace(
                        f"Pieces {candidates[0]} and {owner} disagree on {target.pieces[index]}."
                    )
            terms.append(tables[0])
        return PolyForm(self.k, self.p, target, tuple(terms))

    def double_trace(self, target: Carrier, *, check: bool = True) -> Tuple["PolyForm", "PolyForm"]:
        return self.trace(target, check=check), self.d().trace(target, check=check)

    def transfer(self, fine: Carrier) -> "PolyForm":
        """The same form written on a carrier refining this one."""
        return self.trace(fine, check=False)

    def extend_piece(self, index: int, target: Carrier) -> "PolyForm":
        """The polynomial of one piece continued to every piece of `target`, inside or not."""
        source = self.carrier.pieces[index]
        terms = []
        for piece in target.pieces:
            table: Terms = {}
            for (alpha, alt), value in self.terms[index].items():
                for beta, factor in _restrict_monomial(alpha, source, piece):
                    _add_to(table, (beta, alt), value * factor)
            terms.append(table)
        return PolyForm(self.k, self.p, target, tuple(terms))

    def project(self) -> "PolyForm":
        """Canonical intrinsic representative: pullback onto the form's own pieces."""
        return PolyForm(
            self.k,
            self.p,
            self.carrier,
            tuple(
                _project_terms(table, piece, self.k)
                for table, piece in zip(self.terms, self.carrier.pieces)
            ),
        )

    # evaluation

    def evaluate_piece(self, index: int, point: Sequence[Fraction]) -> Dict[AltIndex, Fraction]:
        """Value of the polynomial of one piece at `point`, extended outside the piece if needed."""
        weights = self.carrier.pieces[index].barycentric(point)
        values: Dict[AltIndex, Fraction] = {}
        for (alpha, alt), value in self.terms[index].items():
            values[alt] = values.get(alt, ZERO) + value * _evaluate_monomial(alpha, weights)
        return {alt: value for alt, value in values.items() if value}

    def evaluate(self, point: Sequence[Scalar]) -> Dict[AltIndex, Fraction]:
        point = as_point(point)
        index = self.carrier.locate(point)
        if index is None:
            raise GeometryError(f"Point {format_point(point)} is outside the carrier.")
        return self.evaluate_piece(index, point)

    def integrate(self, simplex: Union[Simplex, Sequence[Sequence[Scalar]]]) -> Fraction:
        """Integral of the pullback over an oriented k-simplex, oriented by its vertex order."""
        if not isinstance(simplex, Simplex):
            simplex = Simplex.of(simplex)
        if simplex.dim != self.k:
            raise ValueError(f"Cannot integrate a {self.k}-form over a {simplex.dim}-simplex.")
        total = ZERO
        for tile in _tiles(self.carrier, simplex):
            restricted = self.trace(Carrier.single(tile), check=False)
            edges = tile.edges
            minors: Dict[AltIndex, Fraction] = {}
            for (alpha, index), value in restricted.terms[0].items():
                if index not in minors:
                    minors[index] = determinant(edges.select_rows(index)) if self.k else ONE
                total += value * minors[index] * multinomial_factor(alpha)
        return total

    # serialization

    def to_json(self) -> Dict[str, Any]:
        return {
            "degree": self.k,
            "poly_degree": self.p,
            "pieces": self.carrier.describe(),
            "terms": [
                [
                    [list(alpha), list(index), str(value)]
                    for (alpha, index), value in sorted(table.items())
                ]
                for table in self.terms
            ],
        }

    @classmethod
    def from_json(cls, document: Mapping[str, Any]) -> "PolyForm":
        carrier = Carrier(tuple(Simplex.of(piece) for piece in document["pieces"]))
        terms = tuple(
            {(tuple(alpha), tuple(index)): Fraction(value) for alpha, index, value in table}
            for table in document["terms"]
        )
        return cls(document["degree"], document["poly_degree"], carrier, terms)


def _project_terms(table: Terms, piece: Simplex, k: int) -> Terms:
    if not k:
        return dict(table)
    images = dict(_pullback_matrix(piece.tangent_projector, k))
    result: Terms = {}
    for (alpha, index), value in table.items():
        for target, factor in images[index]:
            _add_to(result, (alpha, target), value * factor)
    return result


def _tiles(carrier: Carrier, simplex: Simplex) -> List[Simplex]:
    """Simplices tiling `simplex`, each inside one carrier piece, oriented like `simplex`."""
    if carrier.contains_simplex(simplex):
        return [simplex]
    found: Dict[Tuple[Point, ...], Simplex] = {}
    for piece in carrier.pieces:
        for face in piece.faces(simplex.dim):
            if simplex.contains_simplex(face):
                found.setdefault(tuple(sorted(face.points)), face)
    tiles = []
    covered = ZERO
    for face in found.values():
        volume = relative_volume(simplex, face)
        if not volume:
            continue
        if volume < 0:
            face = Simplex((face.points[1], face.points[0]) + face.points[2:])
        tiles.append(face)
        covered += abs(volume)
    if covered != ONE:
        raise GeometryError(f"The carrier does not tile the simplex {simplex}.")
    return tiles


@dataclass(frozen=True)
class AdmissiblePair:
    """Face data (v0, v1) with d(pull v0) = pull v1."""

    v0: PolyForm
    v1: PolyForm

    def __post_init__(self) -> None:
        if not is_admissible(self.v0, self.v1):
            raise NotAdmissible("d(pull v0) differs from pull v1.")


def is_admissible(v0: PolyForm, v1: PolyForm) -> bool:
    if v1.k != v0.k + 1 or v0.carrier != v1.carrier:
        return False
    return v0.project().d().project() == v1.project()


def admissible_differential(pair: AdmissiblePair) -> AdmissiblePair:
    return AdmissiblePair(pair.v1, PolyForm.zero(pair.v1.carrier, pair.v1.k + 1))


def barycentric_on(carrier: Carrier, simplex: Simplex, index: int) -> PolyForm:
    """The barycentric coordinate λ_index of `simplex`, written on the pieces of `carrier`."""
    terms = []
    for piece in carrier.pieces:
        size = len(piece.points)
        table: Terms = {}
        for i, point in enumerate(piece.points):
            _add_to(table, (_unit(size, i), ()), simplex.barycentric(point)[index])
        terms.append(table)
    return PolyForm(0, 1, carrier, tuple(terms))


def affine_interpolant(u: PolyForm, simplex: Simplex) -> PolyForm:
    """The form, affine on `simplex`, agreeing with u at the vertices of `simplex`."""
    result = PolyForm.zero(u.carrier, u.k, 1)
    for index, vertex in enumerate(simplex.points):
        values = u.evaluate(vertex)
        if values:
            result = result + barycentric_on(u.carrier, simplex, index).wedge(
                PolyForm.constant(u.carrier, values)
            )
    return result


def affine_defect(u: PolyForm, simplex: Simplex) -> PolyForm:
    """Zero exactly when every component of u is affine on `simplex`."""
    return u - affine_interpolant(u, simplex)
