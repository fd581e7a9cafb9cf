"""
The element catalog: named families, their parameters, the dimensions they are expected to reach
(each tagged with where the number comes from) and the `element.json` descriptors.
"""

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
import json
import logging
from math import comb
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

from fesc.elements.clough_tocher import (
    clough_tocher,
    clough_tocher_dg,
    clough_tocher_dg_minimal,
    clough_tocher_minimal,
)
from fesc.elements.powell_sabin import (
    PowellSabinSplit,
    continuous_dim,
    kernel_space,
    powell_sabin,
    powell_sabin_branch,
)
from fesc.exceptions import ElementSpecError
from fesc.fes import FESystem, zero_boundary_coordinates
from fesc.meshes import single_simplex
from fesc.simplicial import Cell, SimplicialComplex

log = logging.getLogger(__name__)


class ElementName(str, Enum):
    CT_FULL = "ct-full"
    CT_MINIMAL = "ct-minimal"
    CT_DG = "ct-dg"
    CT_DG_MINIMAL = "ct-dg-minimal"
    CT_HIGHORDER = "ct-highorder"
    PS3D = "ps3d"
    PS3D_BRANCH = "ps3d-branch"


CLOUGH_TOCHER = (
    ElementName.CT_FULL,
    ElementName.CT_MINIMAL,
    ElementName.CT_DG,
    ElementName.CT_DG_MINIMAL,
    ElementName.CT_HIGHORDER,
)
POWELL_SABIN = (ElementName.PS3D, ElementName.PS3D_BRANCH)


class Provenance(str, Enum):
    PAPER = "PAPER"
    DERIVED = "DERIVED"

    @property
    def tag(self) -> str:
        return f"[{self.value}]"


class Pressure(str, Enum):
    CONTINUOUS = "continuous"
    DISCONTINUOUS = "discontinuous"


class DofFamily(str, Enum):
    """Explicit functionals on the closure of a top cell."""

    VERTEX_VALUES = "vertex values"
    VERTEX_DIFFERENTIALS = "vertex values of d"
    # the normal component, at each edge midpoint, of the 1-form of the jet
    EDGE_NORMALS = "edge normal midpoints"
    FACE_INTEGRALS = "k-face integrals"


MINIMAL = "A0(T), dim T = k"

VV = DofFamily.VERTEX_VALUES
VD = DofFamily.VERTEX_DIFFERENTIALS
EN = DofFamily.EDGE_NORMALS
FI = DofFamily.FACE_INTEGRALS


@dataclass(frozen=True)
class ElementSpec:
    name: ElementName
    p: int = 3
    ell: int = 2
    inpoints: Optional[str] = None

    @property
    def n(self) -> int:
        return 2 if self.name in CLOUGH_TOCHER else 3

    @property
    def pressure(self) -> Pressure:
        if self.name in (ElementName.CT_DG, ElementName.CT_DG_MINIMAL, ElementName.PS3D_BRANCH):
            return Pressure.DISCONTINUOUS
        return Pressure.CONTINUOUS

    @property
    def label(self) -> str:
        if self.name is ElementName.CT_HIGHORDER:
            return f"{self.name.value} p={self.p}"
        if self.name is ElementName.PS3D_BRANCH:
            return f"{self.name.value} ℓ={self.ell}"
        return self.name.value

    def validate(self, mesh: Optional[SimplicialComplex] = None) -> None:
        if self.name is ElementName.CT_HIGHORDER:
            if self.p < 3:
                raise ElementSpecError(f"ct-highorder needs p ≥ 3, got p={self.p}.")
        elif self.p != 3:
            raise ElementSpecError(
                f"{self.name.value} is a cubic element; use ct-highorder for p={self.p}."
            )
        if self.name is ElementName.PS3D_BRANCH and not 1 <= self.ell <= self.n - 1:
            raise ElementSpecError(f"ps3d-branch needs 1 ≤ ℓ ≤ {self.n - 1}, got ℓ={self.ell}.")
        if mesh is not None and (mesh.dim != self.n or mesh.ambient != self.n):
            raise ElementSpecError(
                f"{self.name.value} needs a {self.n}-dimensional mesh in R^{self.n}, got a "
                f"{mesh.dim}-complex in R^{mesh.ambient}."
            )

    def parameters(self) -> Dict[str, Any]:
        parameters: Dict[str, Any] = {
            "n": self.n,
            "pressure": self.pressure.value,
            "inpoints": self.inpoints,
        }
        if self.name in CLOUGH_TOCHER:
            parameters["p"] = self.p
        if self.name is ElementName.PS3D_BRANCH:
            parameters["ell"] = self.ell
        return parameters


def element_spec(
    name: Union[str, ElementName],
    p: Optional[int] = None,
    ell: Optional[int] = None,
    inpoints: Optional[str] = None,
) -> ElementSpec:
    """A validated spec; `ElementSpecError` on unknown names and bad parameters."""
    try:
        element = ElementName(name)
    except ValueError as exception:
        known = ", ".join(member.value for member in ElementName)
        raise ElementSpecError(f"Unknown element {name!r}; expected one of {known}.") from exception
    spec = ElementSpec(element, 3 if p is None else p, 2 if ell is None else ell, inpoints)
    spec.validate()
    return spec


CATALOG: Tuple[ElementSpec, ...] = (
    ElementSpec(ElementName.CT_FULL),
    ElementSpec(ElementName.CT_MINIMAL),
    ElementSpec(ElementName.CT_DG),
    ElementSpec(ElementName.CT_DG_MINIMAL),
    ElementSpec(ElementName.CT_HIGHORDER, p=4),
    ElementSpec(ElementName.PS3D),
    ElementSpec(ElementName.PS3D_BRANCH, ell=1),
    ElementSpec(ElementName.PS3D_BRANCH, ell=2),
)


def default_mesh(spec: ElementSpec) -> SimplicialComplex:
    """The single reference simplex the element is verified on."""
    return single_simplex(spec.n)


def build(spec: ElementSpec, mesh: Optional[SimplicialComplex] = None) -> FESystem:
    mesh = mesh or default_mesh(spec)
    spec.validate(mesh)
    log.debug("Building %s on %s cells", spec.label, len(mesh.all_cells))
    name = spec.name
    if name in (ElementName.CT_FULL, ElementName.CT_HIGHORDER):
        return clough_tocher(mesh, spec.p, spec.inpoints)
    if name is ElementName.CT_MINIMAL:
        return clough_tocher_minimal(mesh, spec.inpoints)
    if name is ElementName.CT_DG:
        return clough_tocher_dg(mesh, spec.inpoints)
    if name is ElementName.CT_DG_MINIMAL:
        return clough_tocher_dg_minimal(mesh, spec.inpoints)
    if name is ElementName.PS3D:
        return powell_sabin(mesh, spec.inpoints)
    return powell_sabin_branch(mesh, spec.ell, spec.inpoints)


# expected dimensions


@dataclass(frozen=True)
class Expectation:
    """Expected dims of one space family at the listed degrees."""

    what: str
    degrees: Tuple[int, ...]
    values: Tuple[int, ...]
    provenance: Provenance
    note: str = ""

    def to_json(self) -> Dict[str, Any]:
        return {
            "what": self.what,
            "degrees": list(self.degrees),
            "expected": list(self.values),
            "provenance": self.provenance.tag,
            "note": self.note,
        }


@dataclass(frozen=True)
class Discrepancy:
    """A closed formula quoted for a family that disagrees with the exact count."""

    what: str
    degree: int
    stated: Fraction
    proof: int
    formula: str

    @property
    def conflicting(self) -> bool:
        return self.stated != self.proof

    def to_json(self) -> Dict[str, Any]:
        return {
            "what": self.what,
            "degree": self.degree,
            "stated": str(self.stated),
            "stated_formula": self.formula,
            "proof": self.proof,
            "conflicting": self.conflicting,
        }


def highorder_dims(p: int) -> Tuple[int, int, int]:
    a0 = 3 * p * (p - 1) // 2 + 3
    a2 = 3 * (p - 2) * (p - 1) // 2 + 1
    return a0, 3 * (p - 1) ** 2 + 3, a2


def edge_dims(p: int) -> Tuple[int, int, int]:
    return 2 * p + 1, 3 * p - 1, p - 1


def zero_edge_dims(p: int) -> Tuple[int, int, int]:
    return 2 * p - 5, 3 * p - 7, p - 3


def vertex_dims(n: int, ell: Optional[int] = None) -> Tuple[int, ...]:
    """
    dim Alt^k ⊕ Alt^{k+1} below the degree ℓ (double traces), dim Alt^k at ℓ (traces) and 0
    above it (pullbacks). No ℓ means double traces throughout.
    """
    alt = [comb(n, k) for k in range(n + 2)]
    ell = n + 1 if ell is None else ell
    dims = []
    for k in range(n + 1):
        if k < ell:
            dims.append(alt[k] + alt[k + 1])
        elif k == ell:
            dims.append(alt[k])
        else:
            dims.append(0)
    return tuple(dims)


def minimal_degrees(spec: ElementSpec) -> Tuple[int, ...]:
    """Degrees k at which dim A^k_0(T) = 1 on the k-cells T."""
    if spec.name in (ElementName.CT_MINIMAL, ElementName.CT_DG_MINIMAL):
        return (1, 2)
    if spec.name is ElementName.PS3D:
        return (2, 3)
    if spec.name is ElementName.PS3D_BRANCH:
        return tuple(range(spec.ell, 4))
    return ()


def expectations(spec: ElementSpec) -> List[Expectation]:
    name = spec.name
    quoted, derived = Provenance.PAPER, Provenance.DERIVED
    found: List[Expectation] = []
    if name in (ElementName.CT_FULL, ElementName.CT_HIGHORDER):
        p = spec.p
        provenance = quoted if p == 3 else derived
        found += [
            Expectation("A(S)", (0, 1, 2), highorder_dims(p), provenance),
            Expectation("A(E)", (0, 1, 2), edge_dims(p), derived, "2p+1, 3p-1, p-1"),
            Expectation("A0(E)", (0, 1, 2), zero_edge_dims(p), derived, "2p-5, 3p-7, p-3"),
        ]
    elif name is ElementName.CT_MINIMAL:
        found.append(Expectation("A(S)", (0, 1, 2), (9, 12, 4), derived, "1-9+12-4 = 0"))
    elif name is ElementName.CT_DG:
        found.append(Expectation("A(S)", (0, 1, 2), (12, 20, 9), quoted))
    elif name is ElementName.CT_DG_MINIMAL:
        found.append(Expectation("A(S)", (0, 1, 2), (9, 9, 1), quoted))
    elif name is ElementName.PS3D:
        found += [
            Expectation("A(S)", (0, 1, 2, 3), (16, 30, 20, 5), quoted),
            Expectation("K(S)", (0, 1, 2, 3), (1, 15, 15, 5), quoted),
            Expectation("C0P1Λ2(R1)", (2,), (27,), quoted, "no transverse constraint"),
            Expectation("C0P1Λ1(R0)", (1,), (45,), quoted, "no transverse constraint"),
        ]
    elif spec.ell == 2:
        found.append(Expectation("A(S)", (2, 3), (16, 1), quoted, "15 + 1; (n+1)², 1"))
    else:
        found.append(Expectation("A(S)", (1,), (18,), quoted, "15 + 3"))
    degrees = minimal_degrees(spec)
    if degrees:
        found.append(Expectation(MINIMAL, degrees, (1,) * len(degrees), derived, "minimality"))
    vertices = vertex_dims(spec.n, _vertex_ell(spec))
    found.append(Expectation("A(V)", tuple(range(spec.n + 1)), vertices, derived))
    return found


def _vertex_ell(spec: ElementSpec) -> Optional[int]:
    if spec.name in (ElementName.CT_DG, ElementName.CT_DG_MINIMAL):
        return 1
    if spec.name is ElementName.PS3D_BRANCH:
        return spec.ell
    return None


def discrepancies(spec: ElementSpec) -> List[Discrepancy]:
    """
    The closed formulas quoted for the high order family next to the exact counts:
    3p(p-2) against 3(p-1)²+3 at degree 1 and (3/2)(p-1)(p-2)-2 against (3/2)(p-2)(p-1)+1 at
    degree 2. Reported as they are, never reconciled.
    """
    if spec.name is not ElementName.CT_HIGHORDER:
        return []
    p = spec.p
    _, a1, a2 = highorder_dims(p)
    return [
        Discrepancy("A(S)", 1, Fraction(3 * p * (p - 2)), a1, "3p(p-2)"),
        Discrepancy("A(S)", 2, Fraction(3, 2) * (p - 1) * (p - 2) - 2, a2, "(3/2)(p-1)(p-2)-2"),
    ]


def _first(system: FESystem, d: int) -> Cell:
    return system.cells_of_dim(d)[0]


Measure = Callable[[FESystem, int], int]


def _measures(spec: ElementSpec, system: FESystem) -> Dict[str, Measure]:
    n = system.degree
    split: List[PowellSabinSplit] = []

    def ps_split() -> PowellSabinSplit:
        if not split:
            assert system.realization is not None
            split.append(PowellSabinSplit(system.realization.mesh, spec.inpoints))
        return split[0]

    return {
        "A(S)": lambda s, k: s.dims[_first(s, n), k],
        "A(E)": lambda s, k: s.dims[_first(s, 1), k],
        "A(V)": lambda s, k: s.dims[_first(s, 0), k],
        MINIMAL: lambda s, k: zero_boundary_coordinates(s, _first(s, k), k).cols,
        "A0(E)": lambda s, k: zero_boundary_coordinates(s, _first(s, 1), k).cols,
        "K(S)": lambda s, k: kernel_space(ps_split(), _first(s, n), k).dim,
        "C0P1Λ2(R1)": lambda s, k: continuous_dim(ps_split(), _first(s, n), k, 1),
        "C0P1Λ1(R0)": lambda s, k: continuous_dim(ps_split(), _first(s, n), k, 0),
    }


@dataclass
class DimensionCheck:
    expectation: Expectation
    measured: Tuple[int, ...]

    @property
    def ok(self) -> bool:
        return self.measured == self.expectation.values

    def to_json(self) -> Dict[str, Any]:
        return {**self.expectation.to_json(), "measured": list(self.measured), "ok": self.ok}


def check_dimensions(spec: ElementSpec, system: FESystem) -> List[DimensionCheck]:
    measures = _measures(spec, system)
    checks = []
    for expectation in expectations(spec):
        measure = measures[expectation.what]
        measured = tuple(measure(system, k) for k in expectation.degrees)
        checks.append(DimensionCheck(expectation, measured))
        if measured != expectation.values:
            log.warning(
                "%s: %s at degrees %s is %s, expected %s %s",
                spec.label,
                expectation.what,
                expectation.degrees,
                measured,
                expectation.values,
                expectation.provenance.tag,
            )
    return checks


# descriptors


def dof_schema(spec: ElementSpec, k: int) -> Tuple[DofFamily, ...]:
    """The explicit functionals of degree k; empty when only the harmonic ones are known."""
    name = spec.name
    if name is ElementName.CT_FULL or (name is ElementName.CT_HIGHORDER and spec.p == 3):
        return ((VV, VD, EN), (VV, VD, EN, FI), (VV, FI))[k]
    if name is ElementName.CT_MINIMAL:
        return ((VV, VD), (VV, VD, FI), (VV, FI))[k]
    if name is ElementName.CT_DG:
        return (VV, VD, EN) if k == 0 else ()
    if name is ElementName.CT_DG_MINIMAL:
        return ((VV, VD), (VV, FI), (FI,))[k]
    if name is ElementName.PS3D:
        return (VV, VD, FI) if k else (VV, VD)
    if name is ElementName.PS3D_BRANCH:
        if k < spec.ell:
            return (VV, VD, FI) if k else (VV, VD)
        return (VV, FI) if k == spec.ell else (FI,)
    return ()


def element_descriptor(spec: ElementSpec, system: FESystem) -> Dict[str, Any]:
    """The `element.json` document: parameters, dims per face dimension and DoF schema."""
    degrees = range(system.degree + 1)
    faces: Dict[str, Dict[str, List[int]]] = {}
    for d in range(system.degree + 1):
        cells = system.cells_of_dim(d)
        if not cells:
            continue
        cell = cells[0]
        faces[str(d)] = {
            "dims": [system.dims[cell, k] for k in degrees],
            "zero_dims": [zero_boundary_coordinates(system, cell, k).cols for k in degrees],
        }
    return {
        "name": spec.name.value,
        "parameters": spec.parameters(),
        "faces": faces,
        "dofs": {str(k): [family.value for family in dof_schema(spec, k)] for k in degrees},
    }


@dataclass
class Descriptor:
    """A parsed `element.json`."""

    spec: ElementSpec
    faces: Dict[int, Tuple[int, ...]] = field(default_factory=dict)

    def mismatches(self, system: FESystem) -> List[str]:
        found = []
        for d, dims in sorted(self.faces.items()):
            cells = system.cells_of_dim(d)
            if not cells:
                found.append(f"the mesh has no {d}-cells")
                continue
            actual = tuple(system.dims[cells[0], k] for k in range(system.degree + 1))
            if actual != dims:
                found.append(f"{d}-cells have dims {actual}, the descriptor says {dims}")
        return found


def parse_descriptor(document: Any) -> Descriptor:
    try:
        parameters = document.get("parameters", {})
        spec = element_spec(
            document["name"],
            p=parameters.get("p"),
            ell=parameters.get("ell"),
            inpoints=parameters.get("inpoints"),
        )
        faces = {
            int(d): tuple(int(v) for v in entry["dims"])
            for d, entry in document.get("faces", {}).items()
        }
    except (AttributeError, KeyError, TypeError, ValueError) as exception:
        raise ElementSpecError(f"Malformed element descriptor: {exception}") from exception
    return Descriptor(spec, faces)


def load_descriptor(path: Union[str, Path]) -> Descriptor:
    try:
        document = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exception:
        raise ElementSpecError(
            f"Cannot read the element descriptor {path}: {exception}"
        ) from exception
    return parse_descriptor(document)
