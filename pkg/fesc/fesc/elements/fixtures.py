"""Standalone complexes: sectors around a singular vertex, and the lowest order Whitney system."""

from dataclasses import dataclass
from fractions import Fraction
import logging
from typing import Any, Dict, Optional, Sequence, Tuple

from fesc.elements.common import realize
from fesc.fes import PULLBACK, FESystem
from fesc.geometry import Simplex
from fesc.linalg import ZERO
from fesc.polyform import Carrier, PolyForm
from fesc.simplicial import Cell, SimplicialComplex
from fesc.spaces import Continuity, FormSpace, constrained_space, full_space, whitney_space

log = logging.getLogger(__name__)

Ray = Tuple[int, int]

# two lines crossing at the origin
ALIGNED_RAYS: Tuple[Ray, ...] = ((1, 0), (0, 1), (-1, 0), (0, -1))
# four rays, no two of them opposite
SKEWED_RAYS: Tuple[Ray, ...] = ((1, 0), (0, 1), (-1, 1), (1, -3))


def sector_carrier(rays: Sequence[Ray] = ALIGNED_RAYS) -> Carrier:
    """The triangles (0, r_i, r_{i+1}), counterclockwise around the origin."""
    count = len(rays)
    return Carrier(
        tuple(Simplex.of([(0, 0), rays[i], rays[(i + 1) % count]]) for i in range(count))
    )


def _alternating_sum(form: PolyForm) -> Fraction:
    """u(++) - u(-+) + u(--) - u(+-) for a piecewise constant 2-form on the aligned sectors."""
    total = ZERO
    for index, piece in enumerate(form.carrier.pieces):
        value = form.evaluate_piece(index, piece.isobarycenter).get((0, 1), ZERO)
        total += -value if index % 2 else value
    return total


@dataclass
class SectorReport:
    dims: Tuple[int, ...]
    ranks: Tuple[int, ...]
    end_rank: Optional[int]
    end_closes: Optional[bool]

    @property
    def cohomology(self) -> Tuple[int, ...]:
        """Cohomology of ℝ -> A^0 -> A^1 -> A^2 -> 0."""
        constants, d0, d1 = self.ranks
        return (
            self.dims[0] - d0 - constants,
            self.dims[1] - d1 - d0,
            self.dims[2] - d1,
        )

    @property
    def exact_with_end(self) -> Optional[bool]:
        """Exactness of ℝ -> A^0 -> A^1 -> A^2 -> ℝ -> 0, ending with the alternating sum."""
        if self.end_rank is None:
            return None
        h0, h1, h2 = self.cohomology
        return not h0 and not h1 and h2 == self.end_rank == 1 and bool(self.end_closes)

    def to_json(self) -> Dict[str, Any]:
        return {
            "dims": list(self.dims),
            "ranks": list(self.ranks),
            "cohomology": list(self.cohomology),
            "end_rank": self.end_rank,
            "exact_with_end": self.exact_with_end,
        }


def sector_spaces(carrier: Carrier) -> Tuple[FormSpace, FormSpace, FormSpace]:
    """C1 P2 Λ0, C0 P1 Λ1 and P0 Λ2 on the sectors."""
    return (
        constrained_space(carrier, 2, 0, Continuity.C1),
        constrained_space(carrier, 1, 1, Continuity.C0),
        full_space(carrier, 2, 0, "P0Λ2"),
    )


def sector_complex(rays: Sequence[Ray] = ALIGNED_RAYS) -> SectorReport:
    """
    The smooth complex on sectors around a vertex. On the aligned configuration, the vertex is
    singular: the complex misses exactness at the top by the alternating sum of the values.
    """
    carrier = sector_carrier(rays)
    a0, a1, a2 = sector_spaces(carrier)
    constants = 1 if a0.contains(PolyForm.constant(carrier, 1)) else 0
    ranks = (
        constants,
        a0.map_rank(lambda jet: jet[0].d()),
        a1.map_rank(lambda jet: jet[0].d()),
    )
    end_rank: Optional[int] = None
    end_closes: Optional[bool] = None
    if tuple(rays) == ALIGNED_RAYS:
        end_rank = 1 if any(_alternating_sum(form) for form in a2.forms()) else 0
        end_closes = not any(_alternating_sum(form.d()) for form in a1.forms())
    report = SectorReport((a0.dim, a1.dim, a2.dim), ranks, end_rank, end_closes)
    log.debug("Sector complex on %s rays: %s", len(rays), report.to_json())
    return report


def whitney_system(mesh: SimplicialComplex, *, validate: bool = True) -> FESystem:
    """Lowest order Whitney forms on every cell, restricted by pullback."""
    carriers = {cell: Carrier.single(mesh.simplex(cell)) for cell in mesh.all_cells}

    def builder(cell: Cell, k: int) -> FormSpace:
        return whitney_space(mesh.simplex(cell), k)

    kinds = (PULLBACK,) * (mesh.ambient + 1)
    return realize("whitney", mesh, kinds, carriers, builder, validate=validate)
