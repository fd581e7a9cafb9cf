from fractions import Fraction

import pytest
from coveo_testing.markers import UnitTest
from coveo_testing.parametrize import parametrize

from fesc.exceptions import InpointError, SplitError
from fesc.meshes import single_simplex, square_mesh, tet_pair_mesh
from fesc.splits import (
    InpointAssignment,
    inpoints_for,
    refine,
    validate_split,
    worsey_farin_inpoints,
)


@UnitTest
@parametrize(
    ("n", "m", "pieces"),
    ((2, 2, 1), (2, 1, 3), (2, 0, 6), (3, 2, 4), (3, 1, 12), (3, 0, 24)),
)
def test_refinement_piece_counts(n: int, m: int, pieces: int) -> None:
    rc = refine(single_simplex(n), m)
    assert len(rc.refined.tops) == pieces
    assert validate_split(rc).ok


@UnitTest
def test_inpoints_come_after_the_base_vertices() -> None:
    rc = refine(single_simplex(2), 1)
    assert rc.parent[(3,)] == (0, 1, 2)
    assert rc.refined.points[3] == (Fraction(1, 3), Fraction(1, 3))


@UnitTest
def test_inpoint_on_the_boundary_is_rejected() -> None:
    assignment = InpointAssignment({(0, 1, 2): (Fraction(0), Fraction(0))})
    with pytest.raises(InpointError):
        refine(single_simplex(2), 1, assignment)
    with pytest.raises(InpointError):
        refine(single_simplex(2), 1, InpointAssignment({}))


@UnitTest
def test_circumcenter_of_a_right_triangle_is_not_an_inpoint() -> None:
    with pytest.raises(InpointError):
        refine(single_simplex(2), 1, "circumcenter")


@UnitTest
def test_bad_refinement_arguments() -> None:
    with pytest.raises(ValueError):
        refine(single_simplex(2), -1)
    with pytest.raises(ValueError):
        inpoints_for(single_simplex(2), "voronoi")


@UnitTest
def test_worsey_farin_places_facet_inpoints_on_the_segment() -> None:
    assignment = worsey_farin_inpoints(square_mesh(1))
    assert assignment[(0, 3)] == (Fraction(1, 2), Fraction(1, 2))
    assert validate_split(refine(square_mesh(1), 0, assignment)).ok


@UnitTest
def test_worsey_piper_needs_acute_simplices() -> None:
    with pytest.raises(SplitError):
        inpoints_for(square_mesh(1), "worsey-piper")
    assert inpoints_for(tet_pair_mesh(), "worsey-piper").strategy == "worsey-piper"
