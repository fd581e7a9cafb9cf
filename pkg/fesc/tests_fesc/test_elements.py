import json
from pathlib import Path
from typing import Optional, Tuple

import pytest
from coveo_testing.markers import Integration, UnitTest
from coveo_testing.parametrize import parametrize

from fesc.elements import (
    build,
    check_dimensions,
    discrepancies,
    element_descriptor,
    element_spec,
    load_descriptor,
    minimal_cross_check,
    sector_complex,
    unisolvence_tests,
    verify_extensions,
)
from fesc.elements.catalog import (
    edge_dims,
    highorder_dims,
    parse_descriptor,
    vertex_dims,
    zero_edge_dims,
)
from fesc.elements.fixtures import SKEWED_RAYS
from fesc.elements.powell_sabin import PowellSabinSplit, powell_sabin
from fesc.exceptions import ElementSpecError
from fesc.fes import check_compatibility, global_cohomology, system_dims
from fesc.meshes import single_simplex, tet_pair_mesh
from fesc.simplicial import cellular_cohomology


@UnitTest
@parametrize(
    ("name", "p", "ell"),
    (
        ("ct-quartic", None, None),
        ("ct-highorder", 2, None),
        ("ct-full", 4, None),
        ("ps3d-branch", None, 3),
        ("ps3d-branch", None, 0),
    ),
)
def test_invalid_element_specs(name: str, p: Optional[int], ell: Optional[int]) -> None:
    with pytest.raises(ElementSpecError):
        element_spec(name, p=p, ell=ell)


@UnitTest
def test_spec_rejects_a_mesh_of_the_wrong_dimension() -> None:
    with pytest.raises(ElementSpecError):
        element_spec("ps3d").validate(single_simplex(2))


@UnitTest
def test_pressure_and_labels() -> None:
    assert element_spec("ct-dg").pressure.value == "discontinuous"
    assert element_spec("ct-full").pressure.value == "continuous"
    assert element_spec("ct-highorder", p=5).label == "ct-highorder p=5"
    assert element_spec("ps3d-branch", ell=1).n == 3


@UnitTest
@parametrize(
    ("p", "full", "edge", "zero_edge"),
    ((3, (12, 15, 4), (7, 8, 2), (1, 2, 0)), (4, (21, 30, 10), (9, 11, 3), (3, 5, 1))),
)
def test_dimension_formulas(
    p: int,
    full: Tuple[int, int, int],
    edge: Tuple[int, int, int],
    zero_edge: Tuple[int, int, int],
) -> None:
    assert highorder_dims(p) == full
    assert edge_dims(p) == edge
    assert zero_edge_dims(p) == zero_edge


@UnitTest
def test_vertex_dimensions() -> None:
    assert vertex_dims(2) == (3, 3, 1)
    assert vertex_dims(2, 1) == (3, 2, 0)
    assert vertex_dims(3, 2) == (4, 6, 3, 0)


@UnitTest
def test_discrepancies_are_reported_for_the_high_order_family_only() -> None:
    assert discrepancies(element_spec("ct-full")) == []
    found = discrepancies(element_spec("ct-highorder", p=4))
    assert [d.degree for d in found] == [1, 2]
    assert all(d.conflicting for d in found)
    assert found[0].proof == 30


@UnitTest
@parametrize(
    ("name", "expected"),
    (
        ("ct-full", (12, 15, 4)),
        ("ct-minimal", (9, 12, 4)),
        ("ct-dg", (12, 20, 9)),
        ("ct-dg-minimal", (9, 9, 1)),
    ),
)
def test_clough_tocher_dimensions(name: str, expected: Tuple[int, ...]) -> None:
    spec = element_spec(name)
    system = build(spec)
    assert system_dims(system) == expected
    assert all(check.ok for check in check_dimensions(spec, system))
    assert check_compatibility(system).compatible


@UnitTest
@parametrize("n", (2, 3))
def test_every_split_level_is_refined(n: int) -> None:
    split = PowellSabinSplit(single_simplex(n))
    top = tuple(range(n + 1))
    assert list(split.refinements) == list(range(n))
    assert len(split.groups(top, n - 1)) == n + 1
    assert split.groups(top, n) == (tuple(range(len(split.carriers[top]))),)


@UnitTest
def test_planar_powell_sabin_restrictions_land() -> None:
    system = powell_sabin(single_simplex(2))
    top = system.top_cells[0]
    assert system.dims[top, 0] == 9
    system.validate()


@Integration
def test_powell_sabin_dimensions() -> None:
    spec = element_spec("ps3d")
    system = build(spec)
    assert system_dims(system) == (16, 30, 20, 5)
    checks = {check.expectation.what: check for check in check_dimensions(spec, system)}
    assert checks["K(S)"].measured == (1, 15, 15, 5)
    assert all(check.ok for check in checks.values())
    assert check_compatibility(system).compatible


@Integration
@parametrize(("ell", "degree", "expected"), ((1, 1, 18), (2, 2, 16)))
def test_branch_dimensions(ell: int, degree: int, expected: int) -> None:
    spec = element_spec("ps3d-branch", ell=ell)
    system = build(spec)
    top = system.top_cells[0]
    assert system.dims[top, degree] == expected
    assert system.dims[top, 3] == 1
    assert all(check.ok for check in check_dimensions(spec, system))
    assert check_compatibility(system).compatible


@Integration
@parametrize("ell", (1, 2))
def test_branch_on_two_tetrahedra_is_a_de_rham_complex(ell: int) -> None:
    mesh = tet_pair_mesh()
    system = build(element_spec("ps3d-branch", ell=ell), mesh)
    assert check_compatibility(system).compatible
    assert global_cohomology(system) == cellular_cohomology(mesh)


@Integration
@parametrize("p", (3, 4, 5, 6))
def test_high_order_clough_tocher_is_compatible(p: int) -> None:
    spec = element_spec("ct-highorder", p=p)
    system = build(spec)
    assert system_dims(system) == highorder_dims(p)
    assert check_compatibility(system).compatible


@UnitTest
def test_ct_minimal_one_forms_come_from_both_neighbours() -> None:
    system = build(element_spec("ct-minimal"))
    assert minimal_cross_check(system, system.top_cells[0])


@Integration
def test_clough_tocher_extensions() -> None:
    system = build(element_spec("ct-full"))
    assert verify_extensions(system, 3) == {"vertex": True, "edge": True}


@UnitTest
@parametrize("name", ("ct-full", "ct-minimal", "ct-dg", "ct-dg-minimal"))
def test_unisolvence(name: str) -> None:
    report = unisolvence_tests(element_spec(name))
    assert report.rows
    assert report.ok


@Integration
def test_powell_sabin_unisolvence() -> None:
    report = unisolvence_tests(element_spec("ps3d"))
    assert {row.dofs for row in report.rows} >= {"harmonic", "vertex values, du constant"}
    assert report.ok


@UnitTest
def test_descriptor_describes_the_built_element(tmp_path: Path) -> None:
    spec = element_spec("ct-dg-minimal")
    system = build(spec)
    document = element_descriptor(spec, system)
    assert document["faces"]["2"]["dims"] == [9, 9, 1]
    path = tmp_path / "element.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    descriptor = load_descriptor(path)
    assert descriptor.spec == spec
    assert descriptor.mismatches(system) == []


@UnitTest
def test_descriptor_with_wrong_dims_mismatches() -> None:
    spec = element_spec("ct-dg-minimal")
    system = build(spec)
    descriptor = parse_descriptor({"name": "ct-dg-minimal", "faces": {"2": {"dims": [9, 9, 2]}}})
    assert descriptor.mismatches(system)


@UnitTest
@parametrize(
    "document",
    (
        [],
        {"faces": {}},
        {"name": "ct-full", "faces": {"2": {"dims": ["many"]}}},
        {"name": "ct-full", "faces": {"2": {}}},
    ),
)
def test_malformed_descriptors(document: object) -> None:
    with pytest.raises(ElementSpecError):
        parse_descriptor(document)


@UnitTest
def test_unreadable_descriptor(tmp_path: Path) -> None:
    path = tmp_path / "element.json"
    path.write_text("{ not json", encoding="utf-8")
    with pytest.raises(ElementSpecError):
        load_descriptor(path)
    with pytest.raises(ElementSpecError):
        load_descriptor(tmp_path / "missing.json")


@UnitTest
def test_aligned_sectors_end_with_the_alternating_sum() -> None:
    report = sector_complex()
    assert report.dims == (8, 10, 4)
    assert report.cohomology == (0, 0, 1)
    assert report.exact_with_end


@UnitTest
def test_skewed_sectors_have_no_end_map() -> None:
    report = sector_complex(SKEWED_RAYS)
    assert report.end_rank is None
    assert report.exact_with_end is None
