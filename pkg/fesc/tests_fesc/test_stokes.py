from fractions import Fraction

import numpy as np
import pytest
import sympy
from coveo_testing.markers import Integration, UnitTest

from fesc.elements import element_spec
from fesc.geometry import Simplex
from fesc.meshes import square_mesh
from fesc.polyform import Carrier
from fesc.stokes import (
    StokesCase,
    body_force,
    broken_pair,
    broken_pair_inf_sup,
    flux_form,
    flux_values,
    inf_sup,
    manufactured_velocity,
    stokes_solve,
)

X, Y, Z = sympy.symbols("x y z")


@UnitTest
def test_flux_proxy_in_the_plane() -> None:
    carrier = Carrier.single(Simplex.of([(0, 0), (1, 0), (0, 1)]))
    velocity = flux_form(carrier, (X, Y), (X, Y))
    point = (Fraction(1, 4), Fraction(1, 4))
    assert flux_values(velocity, point) == point
    assert velocity.d().evaluate(point) == {(0, 1): 2}


@UnitTest
def test_flux_proxy_in_space() -> None:
    carrier = Carrier.single(Simplex.of([(0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1)]))
    velocity = flux_form(carrier, (X, 0, 0), (X, Y, Z))
    point = (Fraction(1, 8), Fraction(1, 8), Fraction(1, 8))
    assert flux_values(velocity, point) == (Fraction(1, 8), 0, 0)
    assert velocity.d().evaluate(point) == {(0, 1, 2): 1}


@UnitTest
def test_manufactured_velocity_is_divergence_free() -> None:
    u, v = manufactured_velocity(2)
    assert sympy.simplify(sympy.diff(u, X) + sympy.diff(v, Y)) == 0
    assert u.subs(X, 0) == 0 and v.subs(Y, 1) == 0
    with pytest.raises(ValueError):
        manufactured_velocity(3)


@UnitTest
def test_body_forces() -> None:
    assert body_force(StokesCase.ZERO, 2) is None
    assert body_force(StokesCase.ENCLOSED, 2) == (Y**2, X * Y)
    assert len(body_force(StokesCase.ENCLOSED, 3) or ()) == 3


@UnitTest
def test_unforced_flow_is_at_rest() -> None:
    solution = stokes_solve(square_mesh(1), element_spec("ct-dg-minimal"), StokesCase.ZERO)
    assert solution.velocity.size == 1
    assert solution.pressure.size == 2
    assert np.allclose(solution.velocity, 0)
    assert np.allclose(solution.pressure, 0)
    assert solution.residuals["system"] <= 1e-9


@UnitTest
def test_enclosed_flow_is_divergence_free() -> None:
    solution = stokes_solve(square_mesh(1), element_spec("ct-dg-minimal"), StokesCase.ENCLOSED)
    assert solution.max_div <= 1e-10
    assert solution.samples
    document = solution.to_json()
    assert document["dims"] == {"velocity": 1, "pressure": 2}
    assert solution.table().splitlines()[0] == "x y u1 u2 p div"


@UnitTest
def test_split_element_is_inf_sup_stable() -> None:
    assert inf_sup(square_mesh(1), element_spec("ct-dg-minimal")) > 1e-3


@UnitTest
def test_unsplit_pair_loses_stability() -> None:
    mesh = square_mesh(1, "crisscross")
    pair = broken_pair(mesh)
    assert (pair.velocity_dim, pair.pressure_dim) == (2, 4)
    assert broken_pair_inf_sup(mesh) < 1e-6


@Integration
def test_manufactured_flow_converges_on_a_finer_mesh() -> None:
    spec = element_spec("ct-dg-minimal")
    coarse = stokes_solve(square_mesh(1), spec, StokesCase.MANUFACTURED)
    fine = stokes_solve(square_mesh(2), spec, StokesCase.MANUFACTURED)
    assert coarse.velocity_error is not None and fine.velocity_error is not None
    assert fine.velocity_error < coarse.velocity_error
    assert fine.max_div <= 1e-10
