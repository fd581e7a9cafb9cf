from fractions import Fraction

from coveo_testing.markers import UnitTest
from coveo_testing.parametrize import parametrize

from fesc.geometry import Simplex
from fesc.meshes import single_simplex
from fesc.polyform import Carrier, PolyForm
from fesc.spaces import (
    Continuity,
    ConstraintSystem,
    FormLayout,
    FormSpace,
    constrained_space,
    full_space,
    inner_product,
    trimmed_dimension,
    trimmed_space,
    whitney_space,
)

TRIANGLE = Simplex.of([(0, 0), (1, 0), (0, 1)])


@UnitTest
@parametrize(("n", "expected"), ((2, (3, 3, 1)), (3, (4, 6, 4, 1))))
def test_whitney_dimensions(n: int, expected: tuple) -> None:
    simplex = single_simplex(n).simplex(tuple(range(n + 1)))
    assert tuple(whitney_space(simplex, k).dim for k in range(n + 1)) == expected


@UnitTest
def test_whitney_forms_form_a_complex() -> None:
    zero, one = whitney_space(TRIANGLE, 0), whitney_space(TRIANGLE, 1)
    assert all(one.contains((form.d(),)) for form in zero.forms())


@UnitTest
@parametrize(("k", "r"), ((0, 1), (1, 1), (1, 2), (2, 2)))
def test_trimmed_space_matches_its_dimension_formula(k: int, r: int) -> None:
    assert trimmed_space(TRIANGLE, k, r).dim == trimmed_dimension(2, k, r)


@UnitTest
def test_full_space_dimension() -> None:
    assert full_space(Carrier.single(TRIANGLE), 1, 1).dim == 6


@UnitTest
@parametrize(
    ("p", "continuity", "expected"),
    ((1, Continuity.NONE, 9), (1, Continuity.C0, 4), (3, Continuity.C1, 12)),
)
def test_constrained_spaces_on_the_three_piece_split(
    p: int, continuity: Continuity, expected: int
) -> None:
    split = Carrier.split(TRIANGLE, 1)
    assert constrained_space(split, p, 0, continuity).dim == expected


@UnitTest
def test_constraint_system_with_a_vanishing_requirement() -> None:
    carrier = Carrier.single(TRIANGLE)
    system = ConstraintSystem((FormLayout(carrier, 0, 1),), "mean free")
    system.require_zero(lambda jet: jet[0].d())
    assert system.solve().dim == 1


@UnitTest
def test_inner_product_of_constants_is_the_area() -> None:
    one = PolyForm.constant(Carrier.single(TRIANGLE), 1)
    assert inner_product(one, one) == Fraction(1, 2)
    x = PolyForm.coordinate(Carrier.single(TRIANGLE), 0)
    assert inner_product(x, one) == Fraction(1, 6)


@UnitTest
def test_preimage_keeps_the_forms_vanishing_on_an_edge() -> None:
    edge = Carrier.single(Simplex.of([(0, 0), (1, 0)]))
    quadratics = full_space(Carrier.single(TRIANGLE), 0, 2)
    vanishing = quadratics.preimage(
        lambda jet: jet[0].trace(edge), FormSpace.zero((FormLayout(edge, 0, 2),))
    )
    assert vanishing.dim == 3
    y = PolyForm.coordinate(Carrier.single(TRIANGLE), 1)
    assert vanishing.contains((y,))
    assert not vanishing.contains((PolyForm.constant(Carrier.single(TRIANGLE), 1),))
