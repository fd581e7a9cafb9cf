"""
Explicit extension operators for the Clough-Tocher complexes.

Vertex jets are extended by a quadratic bubble of the vertex; edge data vanishing at both ends is
written as polynomials of the edge position t = λ_1 and extended through the bubbles Φ and Ψ,
step by step, each step removing one component of the residual.
"""

from fractions import Fraction
import logging
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import sympy

from fesc.elements.clough_tocher import top_space
from fesc.exceptions import NoExtension
from fesc.fes import (
    DOUBLE_TRACE,
    Extender,
    FESystem,
    jet_layouts,
    restrict_jet,
    zero_boundary_coordinates,
)
from fesc.geometry import Point, Simplex, sub
from fesc.linalg import RatMatrix, solve, ZERO
from fesc.polyform import AdmissiblePair, AltIndex, Carrier, PolyForm, barycentric_on
from fesc.simplicial import Cell
from fesc.spaces import FormSpace, Jet

log = logging.getLogger(__name__)

Labels = Tuple[int, int, int]

_t = sympy.Symbol("t")


def _rational(value: Fraction) -> sympy.Rational:
    return sympy.Rational(value.numerator, value.denominator)


def _fraction(value: object) -> Fraction:
    rational = sympy.Rational(value)
    return Fraction(int(rational.p), int(rational.q))


def vertex_jet_extension(
    simplex: Simplex,
    vertex: int,
    v0: Mapping[AltIndex, Fraction],
    v1: Mapping[AltIndex, Fraction],
    k: int,
) -> AdmissiblePair:
    """
    A polynomial (u, du) on the triangle with value v0 and differential v1 at one vertex, vanishing
    to second order on the opposite edge:

        u = λ² v0 + λ² κ_V (v1 - 2 dλ ∧ v0) / (k + 1)
    """
    carrier = Carrier.single(simplex)
    point = simplex.points[vertex]
    lam = PolyForm.barycentric(carrier, vertex)
    square = lam.wedge(lam)
    value = PolyForm.constant(carrier, dict(v0), k)
    rest = PolyForm.constant(carrier, dict(v1), k + 1) - lam.d().wedge(value) * 2
    u = square.wedge(value) + square.wedge(rest.koszul(point)) * Fraction(1, k + 1)
    return AdmissiblePair(u, u.d())


def _ct_carrier(simplex: Simplex, carrier: Optional[Carrier]) -> Carrier:
    return carrier if carrier is not None else Carrier.split(simplex, 1)


def _match_traces(
    space: FormSpace, simplex: Simplex, target: Callable[[Carrier], Jet]
) -> Jet:
    """The element of a double-trace space whose traces on the edges of T are the given pairs."""
    k, p = space.k, space.layouts[0].p
    edges = [Carrier.single(edge) for edge in simplex.facets()]

    def vector(traces: Callable[[Carrier], Jet]) -> List[Fraction]:
        values: List[Fraction] = []
        for edge in edges:
            for form, layout in zip(traces(edge), jet_layouts(edge, DOUBLE_TRACE, k, p)):
                values.extend(layout.vector(form))
        return values

    wanted = vector(target)
    columns = [
        vector(lambda edge, element=element: restrict_jet(element, DOUBLE_TRACE, edge))
        for element in space.elements
    ]
    solution = solve(
        RatMatrix.from_columns(columns, len(wanted)), RatMatrix.from_columns([wanted], len(wanted))
    )
    if solution is None:
        raise NoExtension(f"No element of {space.name} has the requested boundary traces.")
    return space.combine(solution.column(0))


def edge_bubble_phi(
    simplex: Simplex, labels: Labels = (0, 1, 2), carrier: Optional[Carrier] = None
) -> PolyForm:
    """The C1 cubic Φ with double traces (0, λ_0 λ_1 dλ_2) on every edge."""
    carrier = _ct_carrier(simplex, carrier)
    i0, i1, i2 = labels
    form = (
        barycentric_on(carrier, simplex, i0)
        .wedge(barycentric_on(carrier, simplex, i1))
        .wedge(barycentric_on(carrier, simplex, i2).d())
    )
    space = top_space(carrier, 0)
    return _match_traces(
        space, simplex, lambda edge: (PolyForm.zero(edge, 0), form.trace(edge))
    )[0]


def edge_bubble_psi(
    simplex: Simplex, labels: Labels = (0, 1, 2), carrier: Optional[Carrier] = None
) -> PolyForm:
    """The 1-form Ψ of ct-full A^1 with double traces (λ_0 λ_1 dλ_1, 0) on every edge."""
    carrier = _ct_carrier(simplex, carrier)
    i0, i1, _ = labels
    second = barycentric_on(carrier, simplex, i1)
    form = barycentric_on(carrier, simplex, i0).wedge(second).wedge(second.d())
    space = top_space(carrier, 1)
    return _match_traces(
        space, simplex, lambda edge: (form.trace(edge), PolyForm.zero(edge, 2))
    )[0]


def edge_profile(form: PolyForm, start: Point, end: Point) -> sympy.Poly:
    """A 0-form along the segment start → end, as a polynomial of the position t ∈ [0, 1]."""
    degree = max(form.p, 1)
    samples = []
    for j in range(degree + 1):
        s = Fraction(j, degree)
        point = tuple(a + s * (b - a) for a, b in zip(start, end))
        samples.append((sympy.Rational(j, degree), _rational(form.evaluate(point).get((), ZERO))))
    return sympy.Poly(sympy.interpolate(samples, _t), _t, domain=sympy.QQ)


def lift_profile(polynomial: sympy.Poly, lam: PolyForm) -> PolyForm:
    """w(λ) for a polynomial w of t."""
    result = PolyForm.zero(lam.carrier, 0)
    if polynomial.is_zero:
        return result
    power = PolyForm.constant(lam.carrier, 1)
    for j in range(polynomial.degree() + 1):
        coefficient = _fraction(polynomial.coeff_monomial(_t**j))
        if coefficient:
            result = result + power * coefficient
        power = power.wedge(lam)
    return result


def _divide(polynomial: sympy.Poly, divisor: sympy.Poly) -> sympy.Poly:
    quotient, remainder = sympy.div(polynomial, divisor)
    if not remainder.is_zero:
        raise NoExtension("The edge data does not vanish at the edge endpoints.")
    return quotient


class _Residual:
    def __init__(self, data: Jet, simplex: Simplex, labels: Labels) -> None:
        self.data = data
        self.edge = data[0].carrier
        self.start, self.end, self.apex = (simplex.points[i] for i in labels)
        self.along = sub(self.end, self.start)
        self.across = sub(self.apex, self.start)

    def of(self, u: PolyForm) -> Jet:
        traced = u.double_trace(self.edge)
        return tuple(given - found for given, found in zip(self.data, traced))

    def profile(self, form: PolyForm, *vectors: Point) -> sympy.Poly:
        for vector in vectors:
            form = form.contract(vector)
        return edge_profile(form, self.start, self.end)


def edge_extension(
    data: Sequence[PolyForm],
    simplex: Simplex,
    labels: Labels,
    p: int,
    carrier: Optional[Carrier] = None,
) -> PolyForm:
    """
    Extends edge data (v0, v1) in A^k_0(E) of the degree p complex, E the edge labels[0] labels[1],
    to a form u on the triangle with double trace (v0, v1) on E and zero on the other edges.
    """
    carrier = _ct_carrier(simplex, carrier)
    data = tuple(data)
    k = data[0].k
    residual = _Residual(data, simplex, labels)
    first, second = (barycentric_on(carrier, simplex, i) for i in labels[:2])
    bubble = sympy.Poly(_t * (1 - _t), _t, domain=sympy.QQ)
    phi = edge_bubble_phi(simplex, labels, carrier)

    u = PolyForm.zero(carrier, k)
    if k == 0:
        q = _divide(residual.profile(data[0]), bubble**2)
        u = lift_profile(q, second).wedge(first.wedge(first).wedge(second).wedge(second))
        w1 = _divide(residual.profile(residual.of(u)[1], residual.across), bubble)
        u = u + lift_profile(w1, second).wedge(phi)
    elif k == 1:
        w2 = _divide(residual.profile(data[1], residual.along, residual.across), bubble)
        primitive = sympy.Poly(sympy.integrate(w2.as_expr(), _t), _t, domain=sympy.QQ)
        u = lift_profile(primitive, second).wedge(phi.d())
        w1 = _divide(residual.profile(residual.of(u)[0], residual.across), bubble)
        u = u + lift_profile(w1, second).wedge(phi).d()
        w0 = _divide(residual.profile(residual.of(u)[0], residual.along), bubble)
        u = u + lift_profile(w0, second).wedge(edge_bubble_psi(simplex, labels, carrier))
    elif k == 2:
        w0 = _divide(residual.profile(data[0], residual.along, residual.across), bubble)
        psi = edge_bubble_psi(simplex, labels, carrier)
        u = lift_profile(w0, second).wedge(first.d().wedge(psi))
    else:
        raise NoExtension(f"No edge extension at degree {k}.")
    if any(not form.is_zero() for form in residual.of(u)):
        raise NoExtension(f"The degree {k} edge data is not in the zero-boundary space.")
    if u.p > p - k:
        try:
            u = u.reduced(p - k)
        except ValueError as exception:
            raise NoExtension(f"The extension exceeds polynomial degree {p - k}.") from exception
    return u


def clough_tocher_extender(system: FESystem, p: int) -> Extender:
    """Bespoke lifts for the Clough-Tocher systems; None where the generic lift applies."""
    realization = system.realization
    assert realization is not None
    mesh = realization.mesh

    def extender(
        face: Cell, cell: Cell, k: int, block: Tuple[Fraction, ...]
    ) -> Optional[Tuple[Fraction, ...]]:
        if len(cell) != 3:
            return None
        data = realization.spaces[face, k].combine(block)
        simplex = mesh.simplex(cell)
        carrier = realization.carriers[cell]
        if len(face) == 1:
            if p - k < 3:
                return None
            point = data[0].carrier.pieces[0].points[0]
            values = [form.evaluate_piece(0, point) for form in data]
            pair = vertex_jet_extension(simplex, cell.index(face[0]), values[0], values[1], k)
            u = pair.v0.transfer(carrier)
        else:
            third = next(v for v in cell if v not in face)
            labels = (cell.index(face[0]), cell.index(face[1]), cell.index(third))
            try:
                u = edge_extension(data, simplex, labels, p, carrier)
            except NoExtension:
                log.debug("No bespoke extension from %s to %s at degree %s", face, cell, k)
                return None
        return realization.spaces[cell, k].coordinates((u, u.d()))

    return extender


def verify_extensions(system: FESystem, p: int) -> Dict[str, bool]:
    """
    Every vertex jet and every zero-boundary edge element lifts to each adjacent triangle with the
    right restriction on its face and nothing on the other faces.
    """
    extender = clough_tocher_extender(system, p)
    results = {"vertex": True, "edge": True}
    for cell in system.top_cells:
        for k in range(system.degree + 1):
            for face in system.faces(cell):
                if len(face) == 1:
                    if p - k < 3:
                        continue
                    blocks = RatMatrix.identity(system.dims[face, k]).columns()
                    key = "vertex"
                else:
                    blocks = zero_boundary_coordinates(system, face, k).columns()
                    key = "edge"
                for block in blocks:
                    lifted = extender(face, cell, k, tuple(block))
                    if lifted is None or not _lands(system, cell, face, k, lifted, tuple(block)):
                        log.warning(
                            "%s: extension from %s to %s fails at degree %s",
                            system.name,
                            face,
                            cell,
                            k,
                        )
                        results[key] = False
    return results


def _lands(
    system: FESystem,
    cell: Cell,
    face: Cell,
    k: int,
    lifted: Sequence[Fraction],
    block: Tuple[Fraction, ...],
) -> bool:
    for other in system.faces(cell):
        if system.cell_dims[other] > system.cell_dims[face]:
            continue
        restricted = system.restriction(other, cell, k).apply(lifted)
        expected = block if other == face else (ZERO,) * len(restricted)
        if tuple(restricted) != tuple(expected):
            return False
    return True
