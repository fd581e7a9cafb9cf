"""
Exact rational linear algebra over sympy's `QQ` domain, exact monomial integration on simplices,
and the float eigen-solver used by the inf-sup harness.

Dense `RatMatrix` values hold bases and small operators. Constraint systems are usually built as
sparse rows (one `Dict[int, Fraction]` per row) and reduced through `sparse_nullspace` /
`sparse_rank` without ever being densified.

Elimination is delegated to `DomainMatrix.rref`, which pivots deterministically, so the bases
returned here are reproducible from one run to the next.
"""

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
import logging
from math import factorial
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from sympy import QQ
from sympy.polys.matrices import DomainMatrix

from fesc.exceptions import DegenerateSimplex, SolverFailure

log = logging.getLogger(__name__)

Rational = Fraction
SparseRow = Dict[int, Fraction]
MultiIndex = Tuple[int, ...]

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class RatMatrix:
    """A dense matrix of exact rationals. Immutable; every operation returns a new matrix."""

    rows: int
    cols: int
    entries: Tuple[Tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        if len(self.entries) != self.rows or any(len(row) != self.cols for row in self.entries):
            raise ValueError(f"Inconsistent matrix shape: expected {self.rows}x{self.cols}.")

    @classmethod
    def from_rows(cls, rows: Iterable[Iterable[object]], cols: Optional[int] = None) -> "RatMatrix":
        entries = tuple(tuple(Fraction(value) for value in row) for row in rows)  # type: ignore
        if cols is None:
            cols = len(entries[0]) if entries else 0
        return cls(len(entries), cols, entries)

    @classmethod
    def from_columns(cls, columns: Iterable[Sequence[object]], rows: int) -> "RatMatrix":
        columns = [tuple(Fraction(value) for value in column) for column in columns]  # type: ignore
        entries = tuple(tuple(column[i] for column in columns) for i in range(rows))
        return cls(rows, len(columns), entries)

    @classmethod
    def from_sparse_rows(cls, rows: Sequence[SparseRow], cols: int) -> "RatMatrix":
        return cls(
            len(rows),
            cols,
            tuple(tuple(row.get(j, ZERO) for j in range(cols)) for row in rows),
        )

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "RatMatrix":
        return cls(rows, cols, tuple((ZERO,) * cols for _ in range(rows)))

    @classmethod
    def identity(cls, size: int) -> "RatMatrix":
        rows = tuple(tuple(ONE if i == j else ZERO for j in range(size)) for i in range(size))
        return cls(size, size, rows)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.rows, self.cols

    def column(self, index: int) -> Tuple[Fraction, ...]:
        return tuple(row[index] for row in self.entries)

    def columns(self) -> List[Tuple[Fraction, ...]]:
        return [self.column(j) for j in range(self.cols)]

    def select_columns(self, indices: Sequence[int]) -> "RatMatrix":
        return RatMatrix(
            self.rows, len(indices), tuple(tuple(row[j] for j in indices) for row in self.entries)
        )

    def select_rows(self, indices: Sequence[int]) -> "RatMatrix":
        return RatMatrix(len(indices), self.cols, tuple(self.entries[i] for i in indices))

    def transpose(self) -> "RatMatrix":
        return RatMatrix(self.cols, self.rows, tuple(zip(*self.entries)) if self.rows else tuple(
            () for _ in range(self.cols)
        ))

    @property
    def T(self) -> "RatMatrix":
        return self.transpose()

    def __matmul__(self, other: "RatMatrix") -> "RatMatrix":
        if self.cols != other.rows:
            raise ValueError(f"Cannot multiply {self.shape} by {other.shape}.")
        other_columns = other.columns()
        entries = []
        for row in self.entries:
            nonzero = [(j, value) for j, value in enumerate(row) if value]
            entries.append(
                tuple(
                    sum((value * column[j] for j, value in nonzero), ZERO)
                    for column in other_columns
                )
            )
        return RatMatrix(self.rows, other.cols, tuple(entries))

    def apply(self, vector: Sequence[Fraction]) -> Tuple[Fraction, ...]:
        if len(vector) != self.cols:
            raise ValueError(f"Vector of length {len(vector)} does not fit {self.shape}.")
        nonzero = [(j, value) for j, value in enumerate(vector) if value]
        return tuple(sum((row[j] * value for j, value in nonzero), ZERO) for row in self.entries)

    def __add__(self, other: "RatMatrix") -> "RatMatrix":
        if self.shape != other.shape:
            raise ValueError(f"Cannot add {self.shape} and {other.shape}.")
        return RatMatrix(
            self.rows,
            self.cols,
            tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.entries, other.entries)),
        )

    def __neg__(self) -> "RatMatrix":
        return self.scale(-ONE)

    def __sub__(self, other: "RatMatrix") -> "RatMatrix":
        return self + (-other)

    def scale(self, factor: Fraction) -> "RatMatrix":
        return RatMatrix(
            self.rows, self.cols, tuple(tuple(factor * v for v in row) for row in self.entries)
        )

    def is_zero(self) -> bool:
        return not any(any(row) for row in self.entries)

    def to_sparse_rows(self) -> List[SparseRow]:
        return [{j: v for j, v in enumerate(row) if v} for row in self.entries]

    def to_float(self) -> np.ndarray:
        return np.array(
            [[float(v) for v in row] for row in self.entries], dtype=float
        ).reshape(self.rows, self.cols)

    def __str__(self) -> str:
        return "\n".join(" ".join(str(v) for v in row) for row in self.entries)


def hstack(*matrices: RatMatrix) -> RatMatrix:
    rows = {m.rows for m in matrices}
    if len(rows) > 1:
        raise ValueError(f"Cannot hstack matrices with row counts {sorted(rows)}.")
    nrows = rows.pop() if rows else 0
    return RatMatrix(
        nrows,
        sum(m.cols for m in matrices),
        tuple(reduce(lambda a, m: a + m.entries[i], matrices, ()) for i in range(nrows)),
    )


def vstack(*matrices: RatMatrix) -> RatMatrix:
    cols = {m.cols for m in matrices}
    if len(cols) > 1:
        raise ValueError(f"Cannot vstack matrices with column counts {sorted(cols)}.")
    return RatMatrix(
        sum(m.rows for m in matrices),
        cols.pop() if cols else 0,
        tuple(row for m in matrices for row in m.entries),
    )


def to_fraction(value: object) -> Fraction:
    """Converts a `QQ` domain element to a Fraction."""
    return Fraction(int(QQ.numer(value)), int(QQ.denom(value)))


def _rref(rows: Sequence[SparseRow], cols: int) -> Tuple[Dict[int, SparseRow], Tuple[int, ...]]:
    """Reduced row echelon form; returns the nonzero rows keyed by row index, and the pivots."""
    dok = {
        (i, j): QQ(value.numerator, value.denominator)
        for i, row in enumerate(rows)
        for j, value in row.items()
        if value
    }
    if not dok:
        return {}, ()
    reduced, pivots = DomainMatrix.from_dok(dok, (len(rows), cols), QQ).rref()
    echelon: Dict[int, SparseRow] = {}
    for (i, j), value in reduced.to_dok().items():
        if value:
            echelon.setdefault(i, {})[j] = to_fraction(value)
    return echelon, tuple(pivots)


def sparse_rank(rows: Sequence[SparseRow], cols: int) -> int:
    return len(_rref(rows, cols)[1])


def sparse_nullspace(rows: Sequence[SparseRow], cols: int) -> RatMatrix:
    """Reduced echelon kernel basis: one column per free variable, in increasing order."""
    echelon, pivots = _rref(rows, cols)
    pivot_rows = [(pivot, echelon[i]) for i, pivot in enumerate(pivots)]
    pivot_set = set(pivots)
    basis = []
    for free in range(cols):
        if free in pivot_set:
            continue
        vector = [ZERO] * cols
        vector[free] = ONE
        for pivot, row in pivot_rows:
            value = row.get(free)
            if value:
                vector[pivot] = -value
        basis.append(vector)
    return RatMatrix.from_columns(basis, cols)


def rank(matrix: RatMatrix) -> int:
    return sparse_rank(matrix.to_sparse_rows(), matrix.cols)


def nullity(matrix: RatMatrix) -> int:
    return matrix.cols - rank(matrix)


def nullspace(matrix: RatMatrix) -> RatMatrix:
    return sparse_nullspace(matrix.to_sparse_rows(), matrix.cols)


def left_nullspace(matrix: RatMatrix) -> RatMatrix:
    """Columns y with yᵀ M = 0."""
    return nullspace(matrix.transpose())


def pivot_columns(matrix: RatMatrix) -> Tuple[int, ...]:
    """Indices of the first maximal set of linearly independent columns."""
    return _rref(matrix.to_sparse_rows(), matrix.cols)[1]


def column_basis(matrix: RatMatrix) -> RatMatrix:
    return matrix.select_columns(pivot_columns(matrix))


def solve(matrix: RatMatrix, rhs: RatMatrix) -> Optional[RatMatrix]:
    """
    Solves `matrix @ X = rhs` exactly; returns None when some column has no solution.
    Free variables are set to zero, so the answer is deterministic for singular systems.
    """
    if matrix.rows != rhs.rows:
        raise ValueError(f"Cannot solve {matrix.shape} against {rhs.shape}.")
    augmented = hstack(matrix, rhs)
    echelon, pivots = _rref(augmented.to_sparse_rows(), augmented.cols)
    if any(pivot >= matrix.cols for pivot in pivots):
        return None
    solution = [[ZERO] * rhs.cols for _ in range(matrix.cols)]
    for i, pivot in enumerate(pivots):
        row = echelon[i]
        for j in range(rhs.cols):
            solution[pivot][j] = row.get(matrix.cols + j, ZERO)
    return RatMatrix.from_rows(solution, rhs.cols)


def inverse(matrix: RatMatrix) -> Optional[RatMatrix]:
    if matrix.rows != matrix.cols or rank(matrix) != matrix.rows:
        return None
    return solve(matrix, RatMatrix.identity(matrix.rows))


def determinant(matrix: RatMatrix) -> Fraction:
    if matrix.rows != matrix.cols:
        raise ValueError(f"Determinant of a non-square {matrix.shape} matrix.")
    if not matrix.rows:
        return ONE
    return to_fraction(
        DomainMatrix.from_list(
            [[(v.numerator, v.denominator) for v in row] for row in matrix.entries], QQ
        ).det()
    )


def multinomial_factor(alpha: MultiIndex) -> Fraction:
    """α! / (|α| + k)! for a multi-index over the k+1 barycentric coordinates of a k-simplex."""
    k = len(alpha) - 1
    numerator = 1
    for a in alpha:
        numerator *= factorial(a)
    return Fraction(numerator, factorial(sum(alpha) + k))


def integrate_monomial(alpha: MultiIndex, vertices: Sequence[Sequence[Fraction]]) -> Fraction:
    """
    Exact integral of the barycentric monomial λ^α over the oriented simplex spanned by `vertices`.
    The simplex must be full-dimensional in its ambient space; its orientation sign is the sign of
    the Jacobian determinant.
    """
    if len(alpha) != len(vertices):
        raise ValueError(f"Multi-index {alpha} does not index the {len(vertices)} vertices.")
    origin = vertices[0]
    jacobian = RatMatrix.from_columns(
        [[Fraction(a) - Fraction(b) for a, b in zip(vertex, origin)] for vertex in vertices[1:]],
        len(origin),
    )
    if jacobian.rows != jacobian.cols:
        raise ValueError(f"A {jacobian.cols}-simplex is not full-dimensional in R^{jacobian.rows}.")
    det = determinant(jacobian)
    if not det:
        raise DegenerateSimplex(f"Simplex {list(map(list, vertices))} has zero volume.")
    return det * multinomial_factor(alpha)


def smallest_generalized_singular_value(
    a: np.ndarray,
    b: np.ndarray,
    m: np.ndarray,
    *,
    nonzero: bool = True,
    tol: float = 1e-10,
    skip: Optional[int] = None,
) -> float:
    """
    Smallest generalized singular value of `b` measured in the `a`-norm (columns) and the
    `m`-norm (rows): the square root of the smallest eigenvalue of B A⁻¹ Bᵀ p = σ² M p.

    With `skip`, exactly that many of the smallest eigenvalues are dropped first; otherwise, with
    `nonzero`, the eigenvalues below `tol` (relative to the largest).
    """
    if not b.size or not np.any(b):
        return 0.0
    try:
        schur = b @ scipy.linalg.solve(a, b.T, assume_a="pos")
        schur = (schur + schur.T) / 2
        eigenvalues = scipy.linalg.eigh(schur, m, eigvals_only=True)
    except (np.linalg.LinAlgError, ValueError) as exception:
        raise SolverFailure(f"Generalized eigenproblem failed: {exception}") from exception
    scale = max(1.0, float(np.max(np.abs(eigenvalues))))
    if skip is not None:
        eigenvalues = np.sort(eigenvalues)[skip:]
        if not eigenvalues.size:
            return 0.0
    elif nonzero:
        eigenvalues = eigenvalues[eigenvalues > tol * scale]
        if not eigenvalues.size:
            return 0.0
    smallest = float(np.min(eigenvalues))
    log.debug("Smallest generalized eigenvalue: %s", smallest)
    return float(np.sqrt(max(smallest, 0.0)))
