import json
from pathlib import Path
from typing import List

from click.testing import CliRunner, Result
from coveo_testing.markers import Integration, UnitTest
from coveo_testing.parametrize import parametrize

from fesc.cli import EXIT_FAILURE, EXIT_USAGE, fesc
from fesc.meshes import read_mesh, single_simplex, square_mesh, write_mesh


def _invoke(*args: str) -> Result:
    return CliRunner().invoke(fesc, list(args), catch_exceptions=False)


@UnitTest
@parametrize(
    "args",
    (
        ["verify"],
        ["verify", "ct-quartic"],
        ["verify", "ct-highorder", "--p", "2"],
        ["verify", "ps3d-branch", "--ell", "3"],
        ["cohomology", "ct-full", "--fixture", "cube"],
        ["mesh", "square", "--n", "0"],
    ),
)
def test_usage_errors(args: List[str]) -> None:
    assert _invoke(*args).exit_code == EXIT_USAGE


@UnitTest
def test_mesh_fixture_commands() -> None:
    result = _invoke("mesh", "annulus")
    assert result.exit_code == 0
    annulus, parents = read_mesh(result.stdout)
    assert len(annulus.tops) == 8
    assert not parents
    square, _ = read_mesh(_invoke("mesh", "square", "--n", "2", "--pattern", "crisscross").stdout)
    assert len(square.tops) == 16


@UnitTest
def test_mesh_split_records_the_parents(tmp_path: Path) -> None:
    path = tmp_path / "triangle.mesh"
    path.write_text(write_mesh(single_simplex(2)), encoding="utf-8")
    result = _invoke("mesh", "split", str(path), "--m", "1")
    assert result.exit_code == 0
    refined, parents = read_mesh(result.stdout)
    assert len(refined.tops) == 3
    assert len(parents) == 3


@UnitTest
def test_mesh_split_with_a_bad_inpoint_fails(tmp_path: Path) -> None:
    path = tmp_path / "triangle.mesh"
    path.write_text(write_mesh(single_simplex(2)), encoding="utf-8")
    result = _invoke("mesh", "split", str(path), "--strategy", "circumcenter")
    assert result.exit_code == EXIT_FAILURE


@UnitTest
def test_mesh_refine(tmp_path: Path) -> None:
    path = tmp_path / "square.mesh"
    path.write_text(write_mesh(square_mesh(1)), encoding="utf-8")
    output = tmp_path / "fine.mesh"
    result = _invoke("mesh", "refine", str(path), "--levels", "2", "--output", str(output))
    assert result.exit_code == 0
    refined, _ = read_mesh(output.read_text(encoding="utf-8"))
    assert len(refined.tops) == 32

    tetrahedron = tmp_path / "tetrahedron.mesh"
    tetrahedron.write_text(write_mesh(single_simplex(3)), encoding="utf-8")
    assert _invoke("mesh", "refine", str(tetrahedron)).exit_code == EXIT_USAGE


@UnitTest
def test_corrupted_files_fail_verification(tmp_path: Path) -> None:
    element = tmp_path / "element.json"
    element.write_text('{"name": "ct-dg-minimal", "faces": {"2": {"dims": [9, ', encoding="utf-8")
    assert _invoke("cohomology", "--element", str(element)).exit_code == EXIT_FAILURE

    mesh = tmp_path / "broken.mesh"
    mesh.write_text("dim 2\nv 0 0\ns 0 1 2\n", encoding="utf-8")
    result = _invoke("cohomology", "ct-dg-minimal", "--mesh", str(mesh))
    assert result.exit_code == EXIT_FAILURE


@UnitTest
def test_descriptor_mismatch_fails_verification(tmp_path: Path) -> None:
    element = tmp_path / "element.json"
    element.write_text(
        json.dumps({"name": "ct-dg-minimal", "faces": {"2": {"dims": [9, 9, 2]}}}),
        encoding="utf-8",
    )
    assert _invoke("cohomology", "--element", str(element)).exit_code == EXIT_FAILURE


@UnitTest
def test_verify_reports_deterministic_json(tmp_path: Path) -> None:
    descriptor = tmp_path / "element.json"
    first = _invoke("verify", "ct-dg-minimal", "--descriptor", str(descriptor))
    second = _invoke("verify", "ct-dg-minimal")
    assert first.exit_code == second.exit_code == 0
    assert first.stdout == second.stdout
    report = json.loads(first.stdout)
    assert report["ok"]
    assert report["dims"] == [9, 9, 1]
    assert all(check["provenance"] in ("[PAPER]", "[DERIVED]") for check in report["expectations"])
    assert json.loads(descriptor.read_text(encoding="utf-8"))["name"] == "ct-dg-minimal"


@UnitTest
def test_verify_text_format() -> None:
    result = _invoke("verify", "ct-dg-minimal", "--format", "text")
    assert result.exit_code == 0
    assert result.stdout.splitlines()[0].startswith("ct-dg-minimal dims")


@UnitTest
def test_cohomology_of_the_square(tmp_path: Path) -> None:
    output = tmp_path / "report.json"
    result = _invoke(
        "cohomology", "ct-dg-minimal", "--fixture", "square", "--output", str(output)
    )
    assert result.exit_code == 0
    report = json.loads(output.read_text(encoding="utf-8"))
    assert report["cohomology"] == [1, 0, 0]
    assert report["mesh"] == [4, 5, 2]


@UnitTest
def test_element_descriptor_drives_cohomology(tmp_path: Path) -> None:
    descriptor = tmp_path / "element.json"
    assert _invoke("verify", "ct-dg-minimal", "--descriptor", str(descriptor)).exit_code == 0
    result = _invoke("cohomology", "--element", str(descriptor), "--fixture", "square")
    assert result.exit_code == 0
    assert json.loads(result.stdout)["ok"]


@UnitTest
def test_stokes_command(tmp_path: Path) -> None:
    table = tmp_path / "fields.txt"
    result = _invoke("stokes", "ct-dg-minimal", "--fixture", "square", "--table", str(table))
    assert result.exit_code == 0
    document = json.loads(result.stdout)
    assert document["case"] == "enclosed"
    assert [level["cells"] for level in document["levels"]] == [2]
    assert document["levels"][0]["max_div"] <= 1e-10
    assert table.read_text(encoding="utf-8").splitlines()[0] == "x y u1 u2 p div"


@Integration
def test_broken_pair_inf_sup_command(tmp_path: Path) -> None:
    mesh = tmp_path / "crisscross.mesh"
    mesh.write_text(write_mesh(square_mesh(1, "crisscross")), encoding="utf-8")
    result = _invoke("infsup", "--broken", "--mesh", str(mesh), "--levels", "1")
    assert result.exit_code == 0
    series = json.loads(result.stdout)["series"]
    assert len(series) == 1
    assert series[0]["value"] < 1e-6
