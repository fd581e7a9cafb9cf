from fractions import Fraction

import numpy as np
import pytest
from coveo_testing.markers import UnitTest
from coveo_testing.parametrize import parametrize

from fesc.exceptions import DegenerateSimplex
from fesc.linalg import (
    RatMatrix,
    determinant,
    integrate_monomial,
    inverse,
    left_nullspace,
    multinomial_factor,
    nullspace,
    rank,
    smallest_generalized_singular_value,
    solve,
)

SINGULAR = RatMatrix.from_rows([[1, 2, 3], [2, 4, 6], [1, 0, 1]])


@UnitTest
def test_rank_and_nullspace_are_exact() -> None:
    assert rank(SINGULAR) == 2
    kernel = nullspace(SINGULAR)
    assert kernel.shape == (3, 1)
    assert (SINGULAR @ kernel).is_zero()
    assert (left_nullspace(SINGULAR).T @ SINGULAR).is_zero()


@UnitTest
def test_solve_returns_none_when_inconsistent() -> None:
    assert solve(SINGULAR, RatMatrix.from_rows([[1], [0], [0]])) is None
    solution = solve(SINGULAR, RatMatrix.from_rows([[1], [2], [0]]))
    assert solution is not None
    assert SINGULAR @ solution == RatMatrix.from_rows([[1], [2], [0]])


@UnitTest
def test_inverse_and_determinant() -> None:
    matrix = RatMatrix.from_rows([[2, 1], [1, 1]])
    assert determinant(matrix) == 1
    assert inverse(matrix) == RatMatrix.from_rows([[1, -1], [-1, 2]])
    assert inverse(SINGULAR) is None
    assert determinant(RatMatrix.from_rows([[Fraction(1, 3), 0], [0, 3]])) == 1


@UnitTest
@parametrize(
    ("alpha", "expected"),
    (((0, 0, 0), Fraction(1, 2)), ((1, 0, 0), Fraction(1, 6)), ((1, 1, 0), Fraction(1, 24))),
)
def test_multinomial_factor(alpha: tuple, expected: Fraction) -> None:
    assert multinomial_factor(alpha) == expected


@UnitTest
def test_integrate_monomial_on_a_scaled_triangle() -> None:
    vertices = [(0, 0), (2, 0), (0, 2)]
    assert integrate_monomial((0, 0, 0), vertices) == 2
    assert integrate_monomial((0, 1, 0), vertices) == Fraction(2, 3)
    with pytest.raises(DegenerateSimplex):
        integrate_monomial((0, 0, 0), [(0, 0), (1, 1), (2, 2)])


@UnitTest
def test_generalized_singular_value() -> None:
    identity = np.eye(2)
    assert smallest_generalized_singular_value(identity, 2 * identity, identity) == pytest.approx(2)
    b = np.array([[1.0, 0.0], [0.0, 0.0]])
    assert smallest_generalized_singular_value(identity, b, identity) == pytest.approx(1)
    assert smallest_generalized_singular_value(identity, b, identity, skip=1) == pytest.approx(1)
    assert smallest_generalized_singular_value(identity, b, identity, nonzero=False) < 1e-8
