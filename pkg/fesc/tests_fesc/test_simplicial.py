import pytest
from coveo_testing.markers import UnitTest
from coveo_testing.parametrize import parametrize

from fesc.exceptions import GeometryError, MeshFormatError
from fesc.meshes import (
    annulus_mesh,
    cube_mesh,
    fixture,
    mesh_summary,
    read_mesh,
    refine_levels,
    single_simplex,
    square_mesh,
    tet_pair_mesh,
    uniform_refine,
    write_mesh,
)
from fesc.simplicial import Cochain, SimplicialComplex, cellular_cohomology


@UnitTest
@parametrize(
    ("name", "expected"),
    (
        ("triangle", (1, 0, 0)),
        ("tetrahedron", (1, 0, 0, 0)),
        ("square", (1, 0, 0)),
        ("annulus", (1, 1, 0)),
        ("cube", (1, 0, 0, 0)),
        ("tet-pair", (1, 0, 0, 0)),
    ),
)
def test_cellular_cohomology_of_fixtures(name: str, expected: tuple) -> None:
    assert cellular_cohomology(fixture(name)) == expected


@UnitTest
def test_fixture_sizes() -> None:
    assert mesh_summary(annulus_mesh()) == (8, 16, 8)
    assert mesh_summary(square_mesh(1)) == (4, 5, 2)
    assert mesh_summary(square_mesh(1, "crisscross")) == (5, 8, 4)
    assert len(cube_mesh().tops) == 6
    assert len(tet_pair_mesh().tops) == 2


@UnitTest
def test_boundary_cells_of_two_triangles() -> None:
    square = square_mesh(1)
    assert (0, 2) in square.boundary_cells
    assert (0, 3) not in square.boundary_cells
    assert all((v,) in square.boundary_cells for v in range(4))
    assert square.cofaces((0, 3)) == ((0, 1, 3), (0, 2, 3))


@UnitTest
def test_coboundary_squares_to_zero() -> None:
    mesh = annulus_mesh()
    vertex_values = Cochain(0, tuple(range(len(mesh.cells(0)))))
    assert not any(vertex_values.coboundary(mesh).coboundary(mesh).values)


@UnitTest
def test_uniform_refinement() -> None:
    levels = refine_levels(square_mesh(1), 3)
    assert [len(mesh.tops) for mesh in levels] == [2, 8, 32]
    assert cellular_cohomology(levels[-1]) == (1, 0, 0)
    with pytest.raises(ValueError):
        uniform_refine(single_simplex(3))


@UnitTest
def test_mesh_text_format() -> None:
    text = "# a triangle\ndim 2\nv 0 0\nv 1 0\nv 0 1/2\ns 0 1 2\np 0 0\n"
    mesh, parents = read_mesh(text)
    assert mesh.points[2] == (0, 0.5)
    assert parents == {0: 0}
    assert write_mesh(mesh, parents) == "dim 2\nv 0 0\nv 1 0\nv 0 1/2\ns 0 1 2\np 0 0\n"


@UnitTest
@parametrize(
    "text",
    (
        "v 0 0\n",
        "dim 2\nv 0\n",
        "dim 2\nv 0 0\ns 0 1\n",
        "dim 2\nv 0 x\n",
        "dim 2\nq 1\n",
    ),
)
def test_mesh_format_errors(text: str) -> None:
    with pytest.raises(MeshFormatError):
        read_mesh(text)


@UnitTest
def test_overlapping_triangles_are_rejected() -> None:
    with pytest.raises(GeometryError):
        SimplicialComplex.from_tops([(0, 0), (1, 0), (0, 1), (1, 1)], [(0, 1, 2), (0, 1, 3)])


@UnitTest
@parametrize(
    ("points", "tops"),
    (
        ([(0, 0), (2, 0), (0, 2), ("1/4", "1/4"), (3, 1), (1, 3)], [(0, 1, 2), (3, 4, 5)]),
        ([(0, 0), (2, 0), (0, 2), (2, 2), (-1, 1)], [(0, 1, 2), (0, 3, 4)]),
        ([(0, 0), (3, 0), (0, 3), (2, 2), (-1, 1)], [(0, 1, 2), (1, 2, 3), (0, 3, 4)]),
        (
            [(0, 0, 0), (2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, -1), ("1/4", "1/4", 1)],
            [(0, 1, 2, 3), (1, 2, 4, 5)],
        ),
    ),
)
def test_tops_without_a_common_facet_must_not_overlap(points: list, tops: list) -> None:
    with pytest.raises(GeometryError):
        SimplicialComplex.from_tops(points, tops)


@UnitTest
def test_tops_meeting_at_a_vertex_are_accepted() -> None:
    mesh = SimplicialComplex.from_tops(
        [(0, 0), (1, 0), (0, 1), (-1, 0), (0, -1)], [(0, 1, 2), (0, 3, 4)]
    )
    assert len(mesh.tops) == 2
