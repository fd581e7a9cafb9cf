"""
The Stokes pair of a complex: velocities in the global (n-1)-forms, pressures in the global
n-forms.

Velocities are reported through their flux proxy. In 2D the 1-form a dx + b dy is the field
(b, -a); in 3D the 2-form c01 dx∧dy + c02 dx∧dz + c12 dy∧dz is the field (c12, -c02, c01). With
these conventions d of the velocity is its divergence times the volume form, the Euclidean
pairing of forms is the dot product of fields, and the pressure is the coefficient of the volume
form. Cell matrices are computed exactly, then the saddle system is solved in floats.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
import logging
from typing import Any, Dict, List, Optional, Sequence, Tuple
import warnings

import numpy as np
import scipy.sparse as sprs
import scipy.sparse.linalg as spla

from fesc.assemble import GlobalSpace, global_space
from fesc.elements.catalog import ElementSpec, Pressure, build
from fesc.exceptions import SolverFailure
from fesc.fes import FESystem
from fesc.linalg import (
    RatMatrix,
    determinant,
    nullspace,
    smallest_generalized_singular_value,
    vstack,
    ZERO,
)
from fesc.meshes import refine_levels
from fesc.polyform import AltIndex, Carrier, PolyForm
from fesc.settings import FESC_SOLVER_TOLERANCE, FESC_STOKES_SAMPLES
from fesc.simplicial import Cell, SimplicialComplex
from fesc.spaces import ConstraintSystem, Continuity, FormLayout, inner_product
from fesc.threads import parallel_map

log = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-9


class StokesCase(str, Enum):
    ZERO = "zero"
    MANUFACTURED = "manufactured"
    ENCLOSED = "enclosed"


def flux_indices(n: int) -> Tuple[Tuple[int, AltIndex], ...]:
    """(sign, Alt index) of each component of the flux proxy of an (n-1)-form."""
    if n == 2:
        return (1, (1,)), (-1, (0,))
    if n == 3:
        return (1, (1, 2)), (-1, (0, 2)), (1, (0, 1))
    raise ValueError(f"No flux proxy in dimension {n}.")


def volume_index(n: int) -> AltIndex:
    return tuple(range(n))


def flux_form(carrier: Carrier, vector: Sequence[Any], symbols: Sequence[Any]) -> PolyForm:
    """The (n-1)-form whose flux proxy is the sympy vector field `vector`."""
    components = {
        index: sign * expression
        for (sign, index), expression in zip(flux_indices(carrier.ambient), vector)
    }
    return PolyForm.from_sympy(carrier, components, symbols)


def flux_values(form: PolyForm, point: Sequence[Fraction]) -> Tuple[Fraction, ...]:
    values = form.evaluate(point)
    return tuple(sign * values.get(index, ZERO) for sign, index in flux_indices(form.n))


def _symbols(n: int) -> Tuple[Any, ...]:
    import sympy

    return tuple(sympy.symbols("x y z")[:n])


def stream_function() -> Any:
    x, y = _symbols(2)
    return x**2 * (1 - x) ** 2 * y**2 * (1 - y) ** 2


def manufactured_velocity(n: int) -> Tuple[Any, ...]:
    """curl ψ for ψ = x²(1-x)²y²(1-y)²; divergence free and zero on the unit square boundary."""
    import sympy

    if n != 2:
        raise ValueError("The manufactured solution is defined on the unit square.")
    x, y = _symbols(2)
    psi = stream_function()
    return sympy.expand(sympy.diff(psi, y)), sympy.expand(-sympy.diff(psi, x))


def body_force(case: StokesCase, n: int) -> Optional[Tuple[Any, ...]]:
    """The force f of -Δu + ∇p = f; None for the unforced case."""
    import sympy

    symbols = _symbols(n)
    if case is StokesCase.ZERO:
        return None
    if case is StokesCase.MANUFACTURED:
        return tuple(
            sympy.expand(-sum(sympy.diff(u, s, 2) for s in symbols))
            for u in manufactured_velocity(n)
        )
    if n == 2:
        x, y = symbols
        return y**2, x * y
    x, y, z = symbols
    return y**2, z**2, x**2


@dataclass
class CellMatrices:
    """Exact matrices of one top cell, in the coordinates of its velocity and pressure spaces."""

    stiffness: RatMatrix
    mass: RatMatrix
    divergence: RatMatrix
    pressure_mass: RatMatrix
    pressure_stiffness: Optional[RatMatrix]
    mean: Tuple[Fraction, ...]
    load: Optional[Tuple[Fraction, ...]] = None
    exact: Optional[Tuple[Fraction, ...]] = None
    exact_norm: Fraction = ZERO
    points: Tuple[Tuple[Fraction, ...], ...] = ()
    velocity_samples: Optional[RatMatrix] = None
    divergence_samples: Optional[RatMatrix] = None
    pressure_samples: Optional[RatMatrix] = None


def _gram(first: Sequence[PolyForm], second: Sequence[PolyForm], scale: Fraction) -> RatMatrix:
    return RatMatrix.from_rows(
        [[scale * inner_product(a, b) for b in second] for a in first], len(second)
    )


def _stiffness(forms: Sequence[PolyForm], n: int, scale: Fraction) -> RatMatrix:
    total = RatMatrix.zeros(len(forms), len(forms))
    for axis in range(n):
        derived = [form.partial(axis) for form in forms]
        total = total + _gram(derived, derived, scale)
    return total


def cell_matrices(
    velocities: Sequence[PolyForm],
    pressures: Sequence[PolyForm],
    carrier: Carrier,
    *,
    pressure: Pressure,
    force: Optional[Sequence[Any]] = None,
    exact: Optional[Sequence[Any]] = None,
    points: Sequence[Tuple[Fraction, ...]] = (),
) -> CellMatrices:
    """
    Stiffness, mass and divergence pairings on one carrier, scaled to the true measure; optional
    load and exact-solution pairings and point samples.
    """
    n = carrier.ambient
    scale = abs(determinant(carrier.pieces[0].edges))
    divergences = [form.d() for form in velocities]
    volume = PolyForm.constant(carrier, {volume_index(n): 1})
    matrices = CellMatrices(
        stiffness=_stiffness(velocities, n, scale),
        mass=_gram(velocities, velocities, scale),
        divergence=_gram(pressures, divergences, scale),
        pressure_mass=_gram(pressures, pressures, scale),
        pressure_stiffness=(
            _stiffness(pressures, n, scale) if pressure is Pressure.CONTINUOUS else None
        ),
        mean=tuple(scale * inner_product(p, volume) for p in pressures),
    )
    symbols = _symbols(n)
    if force is not None:
        f = flux_form(carrier, force, symbols)
        matrices.load = tuple(scale * inner_product(f, u) for u in velocities)
    if exact is not None:
        u = flux_form(carrier, exact, symbols)
        matrices.exact = tuple(scale * inner_product(u, v) for v in velocities)
        matrices.exact_norm = scale * inner_product(u, u)
    if points:
        full = volume_index(n)
        matrices.points = tuple(points)
        matrices.velocity_samples = RatMatrix.from_columns(
            [[v for point in points for v in flux_values(u, point)] for u in velocities],
            n * len(points),
        )
        matrices.divergence_samples = RatMatrix.from_columns(
            [[du.evaluate(point).get(full, ZERO) for point in points] for du in divergences],
            len(points),
        )
        matrices.pressure_samples = RatMatrix.from_columns(
            [[p.evaluate(point).get(full, ZERO) for point in points] for p in pressures],
            len(points),
        )
    return matrices


def zero_boundary_basis(space: GlobalSpace) -> RatMatrix:
    """Global elements whose restriction to every boundary cell vanishes (columns)."""
    cells = [cell for cell in space.family.cells if cell in space.mesh.boundary_cells]
    if not cells:
        return RatMatrix.identity(space.dim)
    return nullspace(vstack(*(space.local_matrix(cell) for cell in cells)))


@dataclass
class StokesSystem:
    """Float matrices of the discrete problem on the zero-boundary velocities."""

    element: str
    n: int
    pressure: Pressure
    stiffness: np.ndarray
    mass: np.ndarray
    divergence: np.ndarray
    pressure_mass: np.ndarray
    pressure_stiffness: Optional[np.ndarray]
    mean: np.ndarray
    load: np.ndarray
    exact: Optional[np.ndarray] = None
    exact_norm: float = 0.0
    # per top cell: (points, velocity, divergence, pressure) samples in global coordinates
    samples: List[Tuple[Any, ...]] = field(default_factory=list)

    @property
    def velocity_dim(self) -> int:
        return self.stiffness.shape[0]

    @property
    def pressure_dim(self) -> int:
        return self.pressure_mass.shape[0]


def assemble_stokes(
    mesh: SimplicialComplex,
    spec: Optional[ElementSpec],
    system: Optional[FESystem] = None,
    case: StokesCase = StokesCase.ZERO,
    *,
    pressure: Optional[Pressure] = None,
    samples: Optional[int] = None,
) -> StokesSystem:
    if system is None:
        if spec is None:
            raise ValueError("Either an element spec or a built system is required.")
        system = build(spec, mesh)
    assert system.realization is not None
    n = system.degree
    pressure = pressure or (spec.pressure if spec else Pressure.DISCONTINUOUS)
    velocity = global_space(mesh, spec, n - 1, system)
    pressures = global_space(mesh, spec, n, system)
    free = zero_boundary_basis(velocity).to_float()
    log.debug(
        "%s: %s velocities (%s interior), %s pressures",
        system.name,
        velocity.dim,
        free.shape[1],
        pressures.dim,
    )
    force = body_force(case, n)
    exact = manufactured_velocity(n) if case is StokesCase.MANUFACTURED else None
    degree = int(FESC_STOKES_SAMPLES) if samples is None else samples
    realization = system.realization

    def compute(cell: Cell) -> CellMatrices:
        return cell_matrices(
            [jet[0] for jet in realization.spaces[cell, n - 1].elements],
            [jet[0] for jet in realization.spaces[cell, n].elements],
            realization.carriers[cell],
            pressure=pressure,
            force=force,
            exact=exact,
            points=mesh.simplex(cell).lattice(degree),
        )

    tops = tuple(mesh.tops)
    locals_ = parallel_map(compute, tops)

    size, count = free.shape[1], pressures.dim
    assembled = StokesSystem(
        system.name,
        n,
        pressure,
        stiffness=np.zeros((size, size)),
        mass=np.zeros((size, size)),
        divergence=np.zeros((count, size)),
        pressure_mass=np.zeros((count, count)),
        pressure_stiffness=np.zeros((count, count)) if pressure is Pressure.CONTINUOUS else None,
        mean=np.zeros(count),
        load=np.zeros(size),
        exact=np.zeros(size) if exact is not None else None,
    )
    for cell, local in zip(tops, locals_):
        t = velocity.local_matrix(cell).to_float() @ free
        q = pressures.local_matrix(cell).to_float()
        assembled.stiffness += t.T @ local.stiffness.to_float() @ t
        assembled.mass += t.T @ local.mass.to_float() @ t
        assembled.divergence += q.T @ local.divergence.to_float() @ t
        assembled.pressure_mass += q.T @ local.pressure_mass.to_float() @ q
        if assembled.pressure_stiffness is not None and local.pressure_stiffness is not None:
            assembled.pressure_stiffness += q.T @ local.pressure_stiffness.to_float() @ q
        assembled.mean += q.T @ np.array([float(v) for v in local.mean])
        if local.load is not None:
            assembled.load += t.T @ np.array([float(v) for v in local.load])
        if assembled.exact is not None and local.exact is not None:
            assembled.exact += t.T @ np.array([float(v) for v in local.exact])
            assembled.exact_norm += float(local.exact_norm)
        assert local.velocity_samples is not None
        assert local.divergence_samples is not None and local.pressure_samples is not None
        assembled.samples.append(
            (
                local.points,
                local.velocity_samples.to_float() @ t,
                local.divergence_samples.to_float() @ t,
                local.pressure_samples.to_float() @ q,
            )
        )
    return assembled


@dataclass
class StokesSolution:
    element: str
    case: StokesCase
    n: int
    velocity: np.ndarray
    pressure: np.ndarray
    residuals: Dict[str, float]
    max_div: float
    velocity_error: Optional[float]
    samples: List[Tuple[Tuple[float, ...], Tuple[float, ...], float, float]]

    def to_json(self) -> Dict[str, Any]:
        return {
            "element": self.element,
            "case": self.case.value,
            "dims": {"velocity": int(self.velocity.size), "pressure": int(self.pressure.size)},
            "velocity": [float(v) for v in self.velocity],
            "pressure": [float(p) for p in self.pressure],
            "residuals": dict(self.residuals),
            "max_div": self.max_div,
            "velocity_error": self.velocity_error,
        }

    def table(self) -> str:
        """The sampled fields: `x y [z] u1 u2 [u3] p div`, one line per sample point."""
        axes = "x y z"[: 2 * self.n - 1]
        header = " ".join([axes] + [f"u{i + 1}" for i in range(self.n)] + ["p", "div"])
        lines = [header]
        for point, velocity, p, div in self.samples:
            values = list(point) + list(velocity) + [p, div]
            lines.append(" ".join(f"{v:.12g}" for v in values))
        return "\n".join(lines)


def _solve_saddle(matrix: sprs.spmatrix, rhs: np.ndarray) -> np.ndarray:
    with warnings.catch_warnings():
        warnings.simplefilter("error", spla.MatrixRankWarning)
        try:
            solution = spla.spsolve(matrix.tocsc(), rhs)
        except (spla.MatrixRankWarning, RuntimeError) as exception:
            raise SolverFailure(f"The Stokes system is singular: {exception}") from exception
    solution = np.atleast_1d(solution)
    if not np.all(np.isfinite(solution)):
        raise SolverFailure("The Stokes system is singular beyond the pressure constant.")
    return solution


def stokes_solve(
    mesh: SimplicialComplex,
    spec: Optional[ElementSpec],
    case: StokesCase = StokesCase.ZERO,
    system: Optional[FESystem] = None,
) -> StokesSolution:
    """
    Solves -Δu + ∇p = f, div u = 0 with u = 0 on the boundary and a mean free pressure. The
    pressure mean is fixed by a Lagrange multiplier.
    """
    assembled = assemble_stokes(mesh, spec, system, case)
    size, count = assembled.velocity_dim, assembled.pressure_dim
    if not size:
        raise SolverFailure(f"{assembled.element}: no velocity degree of freedom off the boundary.")
    a = sprs.csr_matrix(assembled.stiffness)
    b = sprs.csr_matrix(assembled.divergence)
    m = sprs.csr_matrix(assembled.mean.reshape(count, 1))
    saddle = sprs.bmat([[a, -b.T, None], [-b, None, m], [None, m.T, None]], format="csr")
    rhs = np.concatenate((assembled.load, np.zeros(count + 1)))
    solution = _solve_saddle(saddle, rhs)
    u, p = solution[:size], solution[size : size + count]

    scale = max(1.0, float(np.linalg.norm(rhs)))
    residuals = {
        "system": float(np.linalg.norm(saddle @ solution - rhs)) / scale,
        "momentum": float(np.linalg.norm(a @ u - b.T @ p - assembled.load)) / scale,
        "mass": float(np.linalg.norm(b @ u - solution[-1] * assembled.mean)) / scale,
    }
    if residuals["system"] > RESIDUAL_TOLERANCE:
        raise SolverFailure(
            f"{assembled.element}: residual {residuals['system']:.3e} after the direct solve."
        )

    velocity_error = None
    if assembled.exact is not None:
        squared = u @ assembled.mass @ u - 2 * u @ assembled.exact + assembled.exact_norm
        velocity_error = float(np.sqrt(max(squared, 0.0)))

    samples = []
    max_div = 0.0
    n = assembled.n
    for points, velocities, divergences, pressures in assembled.samples:
        vel, div, pre = velocities @ u, divergences @ u, pressures @ p
        for i, point in enumerate(points):
            samples.append(
                (
                    tuple(float(c) for c in point),
                    tuple(float(v) for v in vel[n * i : n * i + n]),
                    float(pre[i]),
                    float(div[i]),
                )
            )
        if div.size:
            max_div = max(max_div, float(np.max(np.abs(div))))
    log.info(
        "%s: %s solve, %s velocities, %s pressures, max |div| %.3e",
        assembled.element,
        case.value,
        size,
        count,
        max_div,
    )
    return StokesSolution(
        assembled.element,
        case,
        n,
        u,
        p,
        residuals,
        max_div,
        velocity_error,
        samples,
    )


def _pressure_norm(assembled: StokesSystem) -> np.ndarray:
    if assembled.pressure_stiffness is not None:
        return assembled.pressure_mass + assembled.pressure_stiffness
    return assembled.pressure_mass


def inf_sup(
    mesh: SimplicialComplex,
    spec: Optional[ElementSpec],
    system: Optional[FESystem] = None,
    pressure: Optional[Pressure] = None,
) -> float:
    """
    inf_q sup_v (div v, q) / (|v|_1 ‖q‖) over the zero-boundary velocities and the pressures
    modulo constants. Continuous pressures are measured in the H¹ norm.
    """
    assembled = assemble_stokes(mesh, spec, system, pressure=pressure, samples=0)
    value = smallest_generalized_singular_value(
        assembled.stiffness,
        assembled.divergence,
        _pressure_norm(assembled),
        tol=float(FESC_SOLVER_TOLERANCE),
        skip=1,
    )
    log.info("%s: inf-sup %.6g on %s cells", assembled.element, value, len(mesh.tops))
    return value


def inf_sup_series(mesh: SimplicialComplex, spec: ElementSpec, levels: int) -> List[float]:
    """inf_sup on `mesh` and its successive uniform refinements."""
    return [inf_sup(level, spec) for level in refine_levels(mesh, levels)]


@dataclass
class BrokenPair:
    """C0 P1 velocities vanishing on the boundary against P0 pressures, on unsplit triangles."""

    velocity_dim: int
    pressure_dim: int
    stiffness: np.ndarray
    divergence: np.ndarray
    pressure_mass: np.ndarray


def broken_pair(mesh: SimplicialComplex) -> BrokenPair:
    if mesh.dim != 2 or mesh.ambient != 2:
        raise ValueError("The P1/P0 pair is built on planar triangle meshes.")
    carrier = Carrier(tuple(mesh.simplex(top) for top in mesh.tops))
    constraints = ConstraintSystem((FormLayout(carrier, 1, 1),), "C0P1 velocity")
    constraints.require_continuity(0, Continuity.C0)
    for facet in carrier.boundary_facets:
        target = Carrier.single(facet)
        for axis in ((1, 0), (0, 1)):
            constraints.require_zero(
                lambda jet, target=target, axis=axis: jet[0]
                .contract(axis)
                .trace(target, check=False)
            )
    velocity = constraints.solve()
    velocities = velocity.forms()
    pressures = [FormLayout(carrier, 2, 0).unit(i) for i in range(len(carrier))]
    scale = abs(determinant(carrier.pieces[0].edges))
    divergences = [form.d() for form in velocities]
    return BrokenPair(
        velocity.dim,
        len(pressures),
        _stiffness(velocities, 2, scale).to_float(),
        _gram(pressures, divergences, scale).to_float(),
        _gram(pressures, pressures, scale).to_float(),
    )


def broken_pair_inf_sup(mesh: SimplicialComplex) -> float:
    pair = broken_pair(mesh)
    value = smallest_generalized_singular_value(
        pair.stiffness,
        pair.divergence,
        pair.pressure_mass,
        tol=float(FESC_SOLVER_TOLERANCE),
        skip=1,
    )
    log.info(
        "P1/P0: %s velocities, %s pressures, inf-sup %.3e",
        pair.velocity_dim,
        pair.pressure_dim,
        value,
    )
    return value
