from typing import Callable, Tuple

from coveo_testing.markers import Integration, UnitTest
from coveo_testing.parametrize import parametrize

from fesc.elements import whitney_system
from fesc.fes import (
    check_compatibility,
    global_cohomology,
    harmonic_dofs,
    inverse_limit_space,
    quadrilateral_system,
    system_dims,
    zero_boundary_coordinates,
)
from fesc.meshes import annulus_mesh, single_simplex, square_mesh
from fesc.simplicial import SimplicialComplex


@UnitTest
def test_whitney_forms_are_a_compatible_system() -> None:
    system = whitney_system(single_simplex(2))
    assert system_dims(system) == (3, 3, 1)
    report = check_compatibility(system)
    assert report.compatible
    assert report.concentrated
    assert all(row.equal for row in report.audit)


@UnitTest
def test_zero_boundary_spaces_of_whitney_forms() -> None:
    system = whitney_system(single_simplex(2))
    top = system.top_cells[0]
    assert tuple(zero_boundary_coordinates(system, top, k).cols for k in range(3)) == (0, 0, 1)


@UnitTest
def test_quadrilateral_cannot_extend_its_boundary_values() -> None:
    system = quadrilateral_system()
    report = check_compatibility(system)
    assert not report.compatible
    assert report.cell((0, 1, 2, 3)).extensions == (False, False, True)
    assert report.cell((0, 1, 2, 3)).exact


@UnitTest
def test_harmonic_dofs_are_unisolvent_for_whitney_forms() -> None:
    system = whitney_system(single_simplex(2))
    dofs = harmonic_dofs(system)
    assert not dofs.warnings
    top = system.top_cells[0]
    assert all(dofs.unisolvent(top, k) for k in range(3))


@Integration
@parametrize(
    ("mesh_factory", "expected"), ((square_mesh, (1, 0, 0)), (annulus_mesh, (1, 1, 0)))
)
def test_global_cohomology_of_whitney_forms(
    mesh_factory: Callable[[], SimplicialComplex], expected: Tuple[int, ...]
) -> None:
    system = whitney_system(mesh_factory())
    assert global_cohomology(system) == expected


@UnitTest
def test_families_over_the_annulus_are_cochains() -> None:
    mesh = annulus_mesh()
    system = whitney_system(mesh)
    assert tuple(inverse_limit_space(system, k).dim for k in range(3)) == (8, 16, 8)
