"""Exact rational feasibility LP: does x >= 0 with A x = b exist?

Revised phase-one simplex with Bland's rule, so the pivot sequence is
deterministic and cannot cycle. Only the m x m basis inverse is held as
``Fraction``; the matrix itself is stored column by column in numpy index
arrays and priced in blocks, the reduced cost of an atom being a sum of the
duals of the rows it appears in. An infeasible system comes back with a
Farkas certificate y such that yᵀA >= 0 componentwise and yᵀb < 0.
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from math import gcd, lcm
from typing import Mapping, Optional, Sequence, Union

import numpy as np

from onespace.errors import DimensionMismatch

logger = logging.getLogger(__name__)

TOTAL_LABEL = "P(*)"
PRICING_BLOCK = 1 << 16
INT64_SAFE = 1 << 62

Number = Union[int, Fraction]


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Equality system over nonnegative unknowns, one column per joint atom.

    Column j is nonzero only in rows ``support[j]``, with entries
    ``values[j]``; when ``values`` is None every stored entry is 1.
    """

    support: np.ndarray
    values: Optional[np.ndarray]
    rhs: tuple[Fraction, ...]
    labels: tuple[str, ...]
    columns: Sequence[tuple]

    def __post_init__(self):
        if len(self.rhs) != len(self.labels):
            raise DimensionMismatch("rhs and labels must have the same length")
        if self.support.ndim != 2 or self.support.shape[0] != len(self.columns):
            raise DimensionMismatch(f"Support of shape {self.support.shape} for {len(self.columns)} columns")
        if self.values is not None and self.values.shape != self.support.shape:
            raise DimensionMismatch(f"Values of shape {self.values.shape}, support of shape {self.support.shape}")
        if self.support.size and (self.support.min() < 0 or self.support.max() >= len(self.rhs)):
            raise DimensionMismatch(f"Support refers to rows outside 0..{len(self.rhs) - 1}")
        if self.values is None:
            bound, integral = 1, True
        else:
            bound = max((abs(value) for value in self.values.ravel().tolist()), default=0)
            integral = self.values.dtype.kind in "iu"
        object.__setattr__(self, "_coefficient_bound", bound)
        object.__setattr__(self, "_integral", integral)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[Number]], rhs, labels, columns) -> "LinearSystem":
        """Build from dense rows; meant for systems with a handful of columns."""
        n, m = len(columns), len(rows)
        for row in rows:
            if len(row) != n:
                raise DimensionMismatch(f"Row of length {len(row)} for {n} columns")
        if m != len(rhs):
            raise DimensionMismatch(f"{m} rows for {len(rhs)} right-hand sides")
        entries = [[Fraction(row[j]) for row in rows] for j in range(n)]
        if all(value.denominator == 1 for column in entries for value in column):
            values = np.array([[int(value) for value in column] for column in entries], dtype=np.int64)
        else:
            values = np.empty((n, m), dtype=object)
            for j, column in enumerate(entries):
                values[j, :] = column
        support = np.tile(np.arange(m, dtype=np.int64), (n, 1))
        return cls(support, values.reshape(n, m), tuple(Fraction(b) for b in rhs), tuple(labels), tuple(columns))

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @property
    def n_cols(self) -> int:
        return len(self.columns)

    def column(self, j: int) -> list[tuple[int, Number]]:
        """Nonzero entries of column j as (row, value) pairs."""
        rows = self.support[j].tolist()
        if self.values is None:
            return [(row, 1) for row in rows]
        return [(row, value) for row, value in zip(rows, self.values[j].tolist()) if value != 0]

    def first_positive(self, weights: Sequence[Number], start: int = 0) -> Optional[int]:
        """Smallest column index j >= start with wᵀA_j > 0, or None."""
        w = self._weight_array(weights)
        for lo in range(start, self.n_cols, PRICING_BLOCK):
            hi = min(lo + PRICING_BLOCK, self.n_cols)
            hits = np.flatnonzero(np.asarray(self._block_products(w, lo, hi) > 0, dtype=bool))
            if hits.size:
                return lo + int(hits[0])
        return None

    def has_negative(self, weights: Sequence[Number]) -> bool:
        """True iff wᵀA_j < 0 for some column j."""
        w = self._weight_array(weights)
        for lo in range(0, self.n_cols, PRICING_BLOCK):
            hi = min(lo + PRICING_BLOCK, self.n_cols)
            if np.asarray(self._block_products(w, lo, hi) < 0, dtype=bool).any():
                return True
        return False

    def _weight_array(self, weights: Sequence[Number]) -> np.ndarray:
        # A positive rescaling to integers keeps every sign.
        fractions = [Fraction(value) for value in weights]
        scale = lcm(*(value.denominator for value in fractions)) if fractions else 1
        integers = [int(value * scale) for value in fractions]
        largest = max((abs(value) for value in integers), default=0)
        if self._integral and largest * self._coefficient_bound * max(self.support.shape[1], 1) < INT64_SAFE:
            return np.array(integers, dtype=np.int64)
        return np.array(integers, dtype=object)

    def _block_products(self, w: np.ndarray, lo: int, hi: int) -> np.ndarray:
        gathered = w[self.support[lo:hi]]
        if self.values is not None:
            gathered = gathered * self.values[lo:hi]
        return gathered.sum(axis=1)


@dataclass(frozen=True)
class FeasibilityResult:
    """Either a witness (one mass per column) or a certificate (one coefficient per row)."""

    columns: Sequence[tuple]
    labels: tuple[str, ...]
    witness: Optional[tuple[Fraction, ...]] = None
    certificate: Optional[tuple[Fraction, ...]] = None
    pivots: int = 0

    def __post_init__(self):
        if (self.witness is None) == (self.certificate is None):
            raise ValueError("Exactly one of witness and certificate must be set")

    @property
    def feasible(self) -> bool:
        return self.witness is not None

    def witness_map(self) -> dict[tuple, Fraction]:
        """Atoms carrying positive mass."""
        if self.witness is None:
            return {}
        return {self.columns[j]: mass for j, mass in enumerate(self.witness) if mass}

    def certificate_map(self) -> dict[str, Fraction]:
        return dict(zip(self.labels, self.certificate or ()))


def _normalize_certificate(y: list[Fraction]) -> tuple[Fraction, ...]:
    """Scale to coprime integers; a positive multiple of a certificate is still one."""
    denominators = [value.denominator for value in y]
    scale = lcm(*denominators) if denominators else 1
    integers = [int(value * scale) for value in y]
    divisor = 0
    for value in integers:
        divisor = gcd(divisor, value)
    divisor = divisor or 1
    return tuple(Fraction(value // divisor) for value in integers)


def verify_farkas(system: LinearSystem, certificate) -> bool:
    """True iff yᵀA >= 0 on every column and yᵀb < 0, computed exactly."""
    if isinstance(certificate, Mapping):
        known = set(system.labels)
        unknown = [label for label in certificate if label not in known]
        if unknown:
            raise DimensionMismatch(f"Certificate names rows {unknown} that the system does not have")
        y = [Fraction(certificate.get(label, 0)) for label in system.labels]
    else:
        y = [Fraction(value) for value in certificate]
    if len(y) != system.n_rows:
        raise DimensionMismatch(
            f"Certificate has {len(y)} coefficients, system has {system.n_rows} rows"
        )
    combined_rhs = sum((yi * bi for yi, bi in zip(y, system.rhs)), Fraction(0))
    if combined_rhs >= 0:
        return False
    return not system.has_negative(y)


def _phase_one_duals(inverse: list[list[Fraction]], basis: list[int], n: int) -> list[Fraction]:
    """y = c_Bᵀ B⁻¹ for the phase-one cost (1 on artificials, 0 on atoms)."""
    duals = [Fraction(0)] * len(inverse)
    for i, column in enumerate(basis):
        if column >= n:
            duals = [d + value for d, value in zip(duals, inverse[i])]
    return duals


def solve_system(system: LinearSystem) -> FeasibilityResult:
    m, n = system.n_rows, system.n_cols
    signs = [1 if b >= 0 else -1 for b in system.rhs]

    inverse = [[Fraction(int(i == k)) for k in range(m)] for i in range(m)]
    values = [abs(Fraction(b)) for b in system.rhs]
    # Columns 0..n-1 are the atoms, n..n+m-1 the phase-one artificials.
    basis = [n + i for i in range(m)]

    pivots = 0
    while True:
        duals = _phase_one_duals(inverse, basis, n)
        entering = system.first_positive([s * y for s, y in zip(signs, duals)])
        if entering is None:
            entering = next((n + r for r in range(m) if duals[r] > 1), None)
        if entering is None:
            break
        if entering < n:
            column = [(r, signs[r] * value) for r, value in system.column(entering)]
        else:
            column = [(entering - n, 1)]
        direction = [sum((row[r] * value for r, value in column), Fraction(0)) for row in inverse]

        leaving = None
        best_key = None
        for i in range(m):
            if direction[i] > 0:
                key = (values[i] / direction[i], basis[i])
                if best_key is None or key < best_key:
                    best_key, leaving = key, i
        if leaving is None:
            # The phase-one objective is bounded below by zero.
            raise RuntimeError("Phase-one LP reported unbounded")
        _pivot(inverse, values, direction, leaving)
        basis[leaving] = entering
        pivots += 1
        logger.debug(f"Pivot {pivots}: column {entering} enters, row {leaving} leaves")

    infeasibility = sum((values[i] for i in range(m) if basis[i] >= n), Fraction(0))
    logger.debug(f"Phase one finished after {pivots} pivots, residual {infeasibility}")

    if infeasibility == 0:
        witness = [Fraction(0)] * n
        for i, column in enumerate(basis):
            if column < n:
                witness[column] = values[i]
        return FeasibilityResult(system.columns, system.labels, witness=tuple(witness), pivots=pivots)

    duals = _phase_one_duals(inverse, basis, n)
    certificate = _normalize_certificate([-signs[i] * duals[i] for i in range(m)])
    if not verify_farkas(system, certificate):
        raise RuntimeError("Phase-one duals do not form a Farkas certificate")
    return FeasibilityResult(system.columns, system.labels, certificate=certificate, pivots=pivots)


def _pivot(inverse: list[list[Fraction]], values: list[Fraction], direction: list[Fraction], r: int):
    pivot_row = inverse[r]
    element = direction[r]
    if element != 1:
        pivot_row[:] = [value / element for value in pivot_row]
        values[r] /= element
    nonzero = [k for k, value in enumerate(pivot_row) if value != 0]
    for i, factor in enumerate(direction):
        if i == r or factor == 0:
            continue
        row = inverse[i]
        for k in nonzero:
            row[k] -= factor * pivot_row[k]
        values[i] -= factor * values[r]
