"""The `fesc` command line: element verification, global cohomology, Stokes solves and meshes."""

import json
from pathlib import Path
import sys
from typing import Any, Callable, Dict, List, Optional

import click
from coveo_styles.styles import echo, ExitWithFailure, install_pretty_exception_hook

from fesc.assemble import commuting_check, de_rham_check
from fesc.elements import (
    ElementName,
    ElementSpec,
    build,
    check_dimensions,
    discrepancies,
    element_descriptor,
    element_spec,
    load_descriptor,
    minimal_cross_check,
    unisolvence_tests,
    verify_extensions,
)
from fesc.exceptions import (
    ElementSpecError,
    FescException,
    GeometryError,
    MeshFormatError,
    VerificationFailed,
)
from fesc.fes import check_compatibility, system_dims
from fesc.meshes import (
    FIXTURES,
    annulus_mesh,
    cube_mesh,
    fixture,
    load_mesh,
    mesh_summary,
    refine_levels,
    square_mesh,
    tet_pair_mesh,
    uniform_refine,
    write_mesh,
)
from fesc.simplicial import SimplicialComplex
from fesc.splits import STRATEGIES, refine, validate_split
from fesc.stokes import StokesCase, broken_pair_inf_sup, inf_sup, stokes_solve

EXIT_USAGE = 1
EXIT_FAILURE = 2


class FescGroup(click.Group):
    """Usage errors exit with 1; `ExitWithFailure` exits with its own code."""

    def main(self, *args: Any, **kwargs: Any) -> Any:
        kwargs["standalone_mode"] = False
        try:
            return super().main(*args, **kwargs)
        except click.ClickException as exception:
            exception.show()
            sys.exit(EXIT_USAGE)
        except click.Abort:
            echo.error("Aborted.")
            sys.exit(EXIT_USAGE)
        except ExitWithFailure as exception:
            echo.passthrough(str(exception), err=True)
            sys.exit(exception.exit_code)


click_argument_element = click.argument(
    "element", required=False, type=click.Choice([name.value for name in ElementName])
)
click_option_p = click.option("--p", "p", type=int, default=None, help="Polynomial degree.")
click_option_ell = click.option("--ell", type=int, default=None, help="Whitney branch degree.")
click_option_inpoints = click.option(
    "--inpoints", type=click.Choice(STRATEGIES), default=None, help="Inpoint strategy."
)
click_option_mesh = click.option(
    "--mesh", "mesh_path", type=click.Path(dir_okay=False), help="A mesh file."
)
click_option_fixture = click.option(
    "--fixture", "fixture_name", type=click.Choice(sorted(FIXTURES)), help="A built-in mesh."
)
click_option_format = click.option(
    "--format", "output_format", type=click.Choice(["json", "text"]), default="json"
)
click_option_output = click.option(
    "--output", type=click.Path(dir_okay=False), default=None, help="Write the report here."
)


def _spec(
    element: Optional[str], p: Optional[int], ell: Optional[int], inpoints: Optional[str]
) -> ElementSpec:
    if element is None:
        raise click.UsageError("An element name is required.")
    try:
        return element_spec(element, p=p, ell=ell, inpoints=inpoints)
    except ElementSpecError as exception:
        raise click.UsageError(str(exception)) from exception


def _failure(*failures: str) -> ExitWithFailure:
    """Raise it `from` the library exception, which becomes the header of the message."""
    return ExitWithFailure(failures=list(failures) or None, exit_code=EXIT_FAILURE)


def _mesh(
    spec: Optional[ElementSpec], mesh_path: Optional[str], fixture_name: Optional[str]
) -> SimplicialComplex:
    if mesh_path and fixture_name:
        raise click.UsageError("Use either --mesh or --fixture, not both.")
    try:
        if mesh_path:
            mesh = load_mesh(mesh_path)
        elif fixture_name:
            mesh = fixture(fixture_name)
        else:
            mesh = square_mesh(1) if spec is None or spec.n == 2 else tet_pair_mesh()
    except (MeshFormatError, GeometryError) as exception:
        raise _failure() from exception
    except OSError as exception:
        raise click.UsageError(f"Cannot read {mesh_path}: {exception}") from exception
    if spec is not None:
        try:
            spec.validate(mesh)
        except ElementSpecError as exception:
            raise click.UsageError(str(exception)) from exception
    return mesh


def _emit(
    document: Dict[str, Any],
    text: Callable[[], str],
    output_format: str,
    output: Optional[str],
) -> None:
    """JSON reports are byte-stable: sorted keys, rationals already rendered as strings."""
    if output_format == "json":
        payload = json.dumps(document, sort_keys=True, indent=2, ensure_ascii=False)
    else:
        payload = text()
    if output:
        Path(output).write_text(payload + "\n", encoding="utf-8")
        echo.noise(f"Report written to {output}", err=True)
    else:
        echo.passthrough(payload)


def _text_lines(rows: List[List[Any]]) -> str:
    return "\n".join(" ".join(str(value) for value in row) for row in rows)


@click.group(cls=FescGroup)
def fesc() -> None:
    install_pretty_exception_hook()


@fesc.command()
@click_argument_element
@click_option_p
@click_option_ell
@click_option_inpoints
@click.option(
    "--descriptor",
    type=click.Path(dir_okay=False),
    default=None,
    help="Also write the element.json descriptor here.",
)
@click_option_format
@click_option_output
def verify(
    element: Optional[str],
    p: Optional[int] = None,
    ell: Optional[int] = None,
    inpoints: Optional[str] = None,
    descriptor: Optional[str] = None,
    output_format: str = "json",
    output: Optional[str] = None,
) -> None:
    """Builds an element on its reference simplex and checks every known property."""
    spec = _spec(element, p, ell, inpoints)
    try:
        system = build(spec)
        checks = check_dimensions(spec, system)
        compatibility = check_compatibility(system)
        unisolvence = unisolvence_tests(spec, system)
        commuting = commuting_check(system)
        extra: Dict[str, bool] = {}
        if spec.name is ElementName.CT_MINIMAL:
            extra["minimal_span"] = minimal_cross_check(system, system.top_cells[0])
        if spec.name in (ElementName.CT_FULL, ElementName.CT_HIGHORDER):
            extra.update(
                {
                    f"{key}_extensions": value
                    for key, value in verify_extensions(system, spec.p).items()
                }
            )
    except FescException as exception:
        raise _failure() from exception

    report = {
        "element": spec.label,
        "name": spec.name.value,
        "parameters": spec.parameters(),
        "dims": list(system_dims(system)),
        "expectations": [check.to_json() for check in checks],
        "discrepancies": [discrepancy.to_json() for discrepancy in discrepancies(spec)],
        "compatibility": compatibility.to_json(),
        "unisolvence": unisolvence.to_json(),
        "commuting": commuting,
        "checks": extra,
    }
    failures = [
        f"{check.expectation.what} at {list(check.expectation.degrees)}: measured "
        f"{list(check.measured)}, expected {list(check.expectation.values)} "
        f"{check.expectation.provenance.tag}"
        for check in checks
        if not check.ok
    ]
    if not compatibility.compatible:
        failures.append("the element system is not compatible")
    if not unisolvence.ok:
        failures.append("the degrees of freedom are not unisolvent")
    if not all(commuting):
        failures.append("the interpolation does not commute with d")
    failures.extend(f"{name} failed" for name, ok in sorted(extra.items()) if not ok)
    report["ok"] = not failures

    def text() -> str:
        rows: List[List[Any]] = [[spec.label, "dims", tuple(system_dims(system))]]
        for check in checks:
            rows.append(
                [
                    check.expectation.what,
                    tuple(check.expectation.degrees),
                    tuple(check.measured),
                    tuple(check.expectation.values),
                    check.expectation.provenance.tag,
                    "ok" if check.ok else "MISMATCH",
                ]
            )
        for discrepancy in discrepancies(spec):
            rows.append(
                [
                    discrepancy.what,
                    discrepancy.degree,
                    f"stated {discrepancy.stated}",
                    f"proof {discrepancy.proof}",
                    "[DERIVED]",
                    "conflicting" if discrepancy.conflicting else "agrees",
                ]
            )
        rows.append(["compatible", compatibility.compatible])
        rows.append(["unisolvent", unisolvence.ok])
        rows.append(["commuting", all(commuting)])
        rows.extend([name, ok] for name, ok in sorted(extra.items()))
        return _text_lines(rows)

    _emit(report, text, output_format, output)
    if descriptor:
        Path(descriptor).write_text(
            json.dumps(element_descriptor(spec, system), sort_keys=True, indent=2) + "\n",
            encoding="utf-8",
        )
    if failures:
        raise ExitWithFailure(failures=failures, exit_code=EXIT_FAILURE) from VerificationFailed(
            f"{spec.label} failed verification."
        )


@fesc.command()
@click_argument_element
@click_option_p
@click_option_ell
@click_option_inpoints
@click.option(
    "--element",
    "element_file",
    type=click.Path(dir_okay=False),
    default=None,
    help="An element.json descriptor to build from.",
)
@click_option_mesh
@click_option_fixture
@click_option_format
@click_option_output
def cohomology(
    element: Optional[str],
    p: Optional[int] = None,
    ell: Optional[int] = None,
    inpoints: Optional[str] = None,
    element_file: Optional[str] = None,
    mesh_path: Optional[str] = None,
    fixture_name: Optional[str] = None,
    output_format: str = "json",
    output: Optional[str] = None,
) -> None:
    """Compares the cohomology of the global complex with the cellular cohomology of the mesh."""
    descriptor = None
    if element_file:
        try:
            descriptor = load_descriptor(element_file)
        except ElementSpecError as exception:
            raise _failure(element_file) from exception
        spec = descriptor.spec
    else:
        spec = _spec(element, p, ell, inpoints)
    mesh = _mesh(spec, mesh_path, fixture_name)
    try:
        system = build(spec, mesh)
        mismatches = descriptor.mismatches(system) if descriptor else []
        if mismatches:
            raise ExitWithFailure(failures=mismatches, exit_code=EXIT_FAILURE) from (
                ElementSpecError(f"{element_file} does not describe {spec.label}.")
            )
        report = de_rham_check(mesh, spec, system)
    except FescException as exception:
        raise _failure() from exception

    document = {**report.to_json(), "mesh": list(mesh_summary(mesh))}

    def text() -> str:
        return _text_lines(
            [
                [spec.label, "cells", tuple(mesh_summary(mesh))],
                ["dims", report.dims],
                ["cohomology", report.cohomology],
                ["cellular", report.expected],
            ]
        )

    _emit(document, text, output_format, output)
    if not report.ok:
        raise ExitWithFailure(exit_code=EXIT_FAILURE) from VerificationFailed(
            f"{spec.label}: cohomology {report.cohomology} differs from the cellular "
            f"{report.expected}."
        )


@fesc.command()
@click_argument_element
@click_option_p
@click_option_ell
@click_option_inpoints
@click_option_mesh
@click_option_fixture
@click.option(
    "--case",
    type=click.Choice([case.value for case in StokesCase]),
    default=StokesCase.ENCLOSED.value,
)
@click.option("--levels", type=click.IntRange(min=1), default=1, help="Uniform refinements.")
@click.option(
    "--table",
    type=click.Path(dir_okay=False),
    default=None,
    help="Write the sampled fields of the finest solve here.",
)
@click_option_format
@click_option_output
def stokes(
    element: Optional[str],
    p: Optional[int] = None,
    ell: Optional[int] = None,
    inpoints: Optional[str] = None,
    mesh_path: Optional[str] = None,
    fixture_name: Optional[str] = None,
    case: str = StokesCase.ENCLOSED.value,
    levels: int = 1,
    table: Optional[str] = None,
    output_format: str = "json",
    output: Optional[str] = None,
) -> None:
    """Solves the Stokes problem with zero velocity on the boundary."""
    spec = _spec(element, p, ell, inpoints)
    mesh = _mesh(spec, mesh_path, fixture_name)
    stokes_case = StokesCase(case)
    try:
        meshes = refine_levels(mesh, levels)
    except ValueError as exception:
        raise click.UsageError(str(exception)) from exception
    try:
        solutions = [stokes_solve(level, spec, stokes_case) for level in meshes]
    except FescException as exception:
        raise _failure() from exception
    except ValueError as exception:
        raise click.UsageError(str(exception)) from exception

    document = {
        "element": spec.label,
        "case": stokes_case.value,
        "levels": [
            {**solution.to_json(), "cells": len(level.tops)}
            for level, solution in zip(meshes, solutions)
        ],
    }

    def text() -> str:
        rows: List[List[Any]] = [["cells", "velocity_error", "max_div", "residual"]]
        for level, solution in zip(meshes, solutions):
            error = solution.velocity_error
            rows.append(
                [
                    len(level.tops),
                    "-" if error is None else f"{error:.6e}",
                    f"{solution.max_div:.3e}",
                    f"{solution.residuals['system']:.3e}",
                ]
            )
        return _text_lines(rows)

    _emit(document, text, output_format, output)
    if table:
        Path(table).write_text(solutions[-1].table() + "\n", encoding="utf-8")


@fesc.command()
@click_argument_element
@click_option_p
@click_option_ell
@click_option_inpoints
@click_option_mesh
@click_option_fixture
@click.option("--levels", type=click.IntRange(min=1), default=3, help="Uniform refinements.")
@click.option(
    "--broken", is_flag=True, default=False, help="Use the unsplit P1/P0 pair instead."
)
@click_option_format
@click_option_output
def infsup(
    element: Optional[str],
    p: Optional[int] = None,
    ell: Optional[int] = None,
    inpoints: Optional[str] = None,
    mesh_path: Optional[str] = None,
    fixture_name: Optional[str] = None,
    levels: int = 3,
    broken: bool = False,
    output_format: str = "json",
    output: Optional[str] = None,
) -> None:
    """The discrete inf-sup constant on a mesh and its uniform refinements."""
    spec = None if broken else _spec(element, p, ell, inpoints)
    mesh = _mesh(spec, mesh_path, fixture_name)
    try:
        meshes = refine_levels(mesh, levels)
    except ValueError as exception:
        raise click.UsageError(str(exception)) from exception
    try:
        if spec is None:
            values = [broken_pair_inf_sup(level) for level in meshes]
        else:
            values = [inf_sup(level, spec) for level in meshes]
    except FescException as exception:
        raise _failure() from exception
    except ValueError as exception:
        raise click.UsageError(str(exception)) from exception

    label = "P1/P0" if spec is None else spec.label
    document = {
        "element": label,
        "series": [
            {"level": i, "cells": len(level.tops), "value": value}
            for i, (level, value) in enumerate(zip(meshes, values))
        ],
    }

    def text() -> str:
        return _text_lines(
            [["level", "cells", "inf_sup"]]
            + [
                [i, len(level.tops), f"{value:.6g}"]
                for i, (level, value) in enumerate(zip(meshes, values))
            ]
        )

    _emit(document, text, output_format, output)


@fesc.group()
def mesh() -> None:
    """Mesh files: fixtures, refinements and splits."""


def _write(complex_: SimplicialComplex, output: Optional[str], parents: Any = None) -> None:
    text = write_mesh(complex_, parents)
    if output:
        Path(output).write_text(text, encoding="utf-8")
        echo.noise(f"Mesh written to {output}", err=True)
    else:
        echo.passthrough(text.rstrip("\n"))


def _read(path: str) -> SimplicialComplex:
    try:
        return load_mesh(path)
    except (MeshFormatError, GeometryError) as exception:
        raise _failure(path) from exception
    except OSError as exception:
        raise click.UsageError(f"Cannot read {path}: {exception}") from exception


@mesh.command("refine")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--levels", type=click.IntRange(min=1), default=1)
@click_option_output
def mesh_refine(path: str, levels: int = 1, output: Optional[str] = None) -> None:
    """Uniform red refinement of a triangle mesh."""
    complex_ = _read(path)
    try:
        for _ in range(levels):
            complex_ = uniform_refine(complex_)
    except ValueError as exception:
        raise click.UsageError(str(exception)) from exception
    _write(complex_, output)


@mesh.command("split")
@click.argument("path", type=click.Path(dir_okay=False))
@click.option("--m", "m", type=click.IntRange(min=0), default=1, help="Keep the m-skeleton.")
@click.option("--strategy", type=click.Choice(STRATEGIES), default="isobarycenter")
@click_option_output
def mesh_split(
    path: str, m: int = 1, strategy: str = "isobarycenter", output: Optional[str] = None
) -> None:
    """Refines every simplex above dimension m around its inpoint."""
    complex_ = _read(path)
    try:
        rc = refine(complex_, m, strategy)
    except GeometryError as exception:
        raise _failure(path) from exception
    report = validate_split(rc)
    if not report.ok:
        raise ExitWithFailure(failures=report.failures, exit_code=EXIT_FAILURE) from GeometryError(
            f"The {strategy} split of {path} is invalid."
        )
    _write(rc.refined, output, rc.parent_block())


@mesh.command("annulus")
@click_option_output
def mesh_annulus(output: Optional[str] = None) -> None:
    """The square ring fixture."""
    _write(annulus_mesh(), output)


@mesh.command("cube")
@click_option_output
def mesh_cube(output: Optional[str] = None) -> None:
    """The unit cube in six tetrahedra."""
    _write(cube_mesh(), output)


@mesh.command("square")
@click.option("--n", "n", type=click.IntRange(min=1), default=1)
@click.option("--pattern", type=click.Choice(["diagonal", "crisscross"]), default="diagonal")
@click_option_output
def mesh_square(n: int = 1, pattern: str = "diagonal", output: Optional[str] = None) -> None:
    """The unit square cut in n × n squares."""
    _write(square_mesh(n, pattern), output)


@mesh.command("tet-pair")
@click_option_output
def mesh_tet_pair(output: Optional[str] = None) -> None:
    """Two acute tetrahedra sharing a face."""
    _write(tet_pair_mesh(), output)
