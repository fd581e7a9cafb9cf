import pytest
from coveo_testing.markers import Integration, UnitTest

from fesc.assemble import (
    commuting_check,
    de_rham_check,
    divergence_inclusion_check,
    global_differential,
    global_space,
)
from fesc.elements import build, element_spec, whitney_system
from fesc.meshes import annulus_mesh, single_simplex, square_mesh


@UnitTest
def test_global_spaces_of_the_minimal_dg_element() -> None:
    mesh = square_mesh(1)
    spec = element_spec("ct-dg-minimal")
    system = build(spec, mesh)
    velocity = global_space(mesh, spec, 0, system)
    assert velocity.dim == velocity.dof_count == 12
    assert velocity.spot_check()


@UnitTest
def test_global_top_forms_of_the_full_element() -> None:
    mesh = square_mesh(1)
    spec = element_spec("ct-full")
    top = global_space(mesh, spec, 2)
    assert top.dim == 6


@UnitTest
def test_global_space_needs_a_spec_or_a_system() -> None:
    with pytest.raises(ValueError):
        global_space(square_mesh(1), None, 0)


@UnitTest
def test_whitney_global_differential_is_the_coboundary() -> None:
    mesh = annulus_mesh()
    system = whitney_system(mesh)
    spaces = [global_space(mesh, None, k, system) for k in range(3)]
    assert [space.dim for space in spaces] == [8, 16, 8]
    d0 = global_differential(spaces[0], spaces[1])
    d1 = global_differential(spaces[1], spaces[2])
    assert (d1 @ d0).is_zero()


@UnitTest
def test_divergence_inclusion() -> None:
    mesh = square_mesh(1)
    assert divergence_inclusion_check(element_spec("ct-dg-minimal"), mesh)


@UnitTest
def test_de_rham_check_on_the_square() -> None:
    report = de_rham_check(square_mesh(1), element_spec("ct-dg-minimal"))
    assert report.cohomology == (1, 0, 0)
    assert report.ok
    assert report.to_json()["cellular"] == [1, 0, 0]


@Integration
def test_de_rham_check_on_the_annulus() -> None:
    mesh = annulus_mesh()
    report = de_rham_check(mesh, element_spec("ct-full"))
    assert report.cohomology == (1, 1, 0)
    assert report.ok


@UnitTest
def test_harmonic_interpolation_commutes_with_d() -> None:
    assert all(commuting_check(whitney_system(single_simplex(2))))
    assert all(commuting_check(build(element_spec("ct-dg-minimal"))))
