from fractions import Fraction
from random import Random

import pytest
from coveo_testing.markers import UnitTest
from coveo_testing.parametrize import parametrize

from fesc.exceptions import GeometryError, MultiValuedTrace, NotAdmissible
from fesc.geometry import Simplex, compositions
from fesc.polyform import AdmissiblePair, Carrier, PolyForm, alt_indices, is_admissible

TRIANGLE = Simplex.of([(0, 0), (1, 0), (0, 1)])


def _carrier() -> Carrier:
    return Carrier.single(TRIANGLE)


@UnitTest
def test_d_squares_to_zero() -> None:
    carrier = _carrier()
    x, y = PolyForm.coordinate(carrier, 0), PolyForm.coordinate(carrier, 1)
    u = x.wedge(x).wedge(y)
    assert not u.d().is_zero()
    assert u.d().d().is_zero()


@UnitTest
def test_partial_derivatives_of_a_product() -> None:
    carrier = _carrier()
    x, y = PolyForm.coordinate(carrier, 0), PolyForm.coordinate(carrier, 1)
    assert x.wedge(y).partial(0) == y
    assert x.wedge(y).partial(1) == x


@UnitTest
def test_wedge_of_one_forms_anticommutes() -> None:
    carrier = _carrier()
    dx, dy = PolyForm.dx(carrier, 0), PolyForm.dx(carrier, 1)
    assert dx.wedge(dy) == -dy.wedge(dx)
    assert dx.wedge(dx).is_zero()


@UnitTest
def test_evaluate_and_contract() -> None:
    carrier = _carrier()
    x, y = PolyForm.coordinate(carrier, 0), PolyForm.coordinate(carrier, 1)
    assert x.wedge(y).evaluate((Fraction(1, 2), Fraction(1, 2))) == {(): Fraction(1, 4)}
    area = PolyForm.dx(carrier, 0).wedge(PolyForm.dx(carrier, 1))
    assert area.contract((1, 0)) == PolyForm.dx(carrier, 1)
    with pytest.raises(GeometryError):
        x.evaluate((2, 2))


@UnitTest
def test_integral_of_the_differential_matches_the_boundary_integral() -> None:
    carrier = _carrier()
    w = PolyForm.coordinate(carrier, 0).wedge(PolyForm.dx(carrier, 1))
    inside = w.d().integrate(TRIANGLE)
    edges = [((0, 0), (1, 0)), ((1, 0), (0, 1)), ((0, 1), (0, 0))]
    boundary = sum((w.integrate(edge) for edge in edges), Fraction(0))
    assert inside == boundary == Fraction(1, 2)


@UnitTest
def test_integral_over_a_split_carrier() -> None:
    split = Carrier.split(TRIANGLE, 1)
    assert len(split) == 3
    area = PolyForm.dx(split, 0).wedge(PolyForm.dx(split, 1))
    assert area.integrate(TRIANGLE) == Fraction(1, 2)


@UnitTest
def test_trace_of_a_broken_form_is_multivalued() -> None:
    split = Carrier.split(TRIANGLE, 1)
    interface, first, _ = split.interfaces[0]
    broken = PolyForm.monomial(split, first, (0, 0, 0))
    with pytest.raises(MultiValuedTrace):
        broken.trace(Carrier.single(interface))
    smooth = PolyForm.coordinate(split, 0)
    assert not smooth.trace(Carrier.single(interface)).is_zero()


@UnitTest
def test_koszul_and_poincare_operators() -> None:
    carrier = _carrier()
    area = PolyForm.constant(carrier, {(0, 1): 1})
    assert area.koszul((0, 0)).d() == area * 2
    assert area.poincare((0, 0)).d() == area


TETRAHEDRON = Simplex.of([(0, 0, 0), (2, 0, 0), (0, 3, 0), (1, 1, 2)])


def _random_form(carrier: Carrier, k: int, p: int, rng: Random) -> PolyForm:
    form = PolyForm.zero(carrier, k, p)
    for alpha in compositions(p, len(carrier.pieces[0].points)):
        for index in alt_indices(carrier.ambient, k):
            coefficient = Fraction(rng.randint(-6, 6), rng.randint(1, 5))
            form = form + PolyForm.monomial(carrier, 0, alpha, index) * coefficient
    return form


@UnitTest
@parametrize(("k", "seed"), [(k, seed) for k in range(4) for seed in (3, 17, 2024)])
def test_poincare_is_a_homotopy_on_sampled_forms(k: int, seed: int) -> None:
    carrier = Carrier.single(TETRAHEDRON)
    center = TETRAHEDRON.isobarycenter
    u = _random_form(carrier, k, 2, Random(seed))
    if not k:
        value = u.evaluate(center).get((), Fraction(0))
        assert u.d().poincare(center) == u - PolyForm.constant(carrier, value)
    else:
        homotopy = u.poincare(center).d()
        if k < TETRAHEDRON.ambient:
            homotopy = homotopy + u.d().poincare(center)
        assert homotopy == u


@UnitTest
@parametrize("seed", (5, 11))
def test_koszul_scales_homogeneous_forms(seed: int) -> None:
    carrier = Carrier.single(TETRAHEDRON)
    center = TETRAHEDRON.isobarycenter
    rng = Random(seed)
    # constant 2-forms are homogeneous of degree 0 around any center
    u = _random_form(carrier, 2, 0, rng)
    assert u.koszul(center).d() + u.d().koszul(center) == u * 2


@UnitTest
def test_admissible_pairs() -> None:
    carrier = _carrier()
    x = PolyForm.coordinate(carrier, 0)
    assert is_admissible(x, PolyForm.dx(carrier, 0))
    assert not is_admissible(x, PolyForm.dx(carrier, 1))
    with pytest.raises(NotAdmissible):
        AdmissiblePair(x, PolyForm.dx(carrier, 1))


@UnitTest
def test_json_document_restores_the_form() -> None:
    carrier = _carrier()
    u = PolyForm.coordinate(carrier, 0).wedge(PolyForm.dx(carrier, 1))
    assert PolyForm.from_json(u.to_json()) == u
