"""
Perturbation Module
Formal power series phi = sum_j lambda^j phi_j of the Duhamel equation.

    phi_0 = S*xi + C f + S g
    phi_j = -S*( sum_{n} p!/(n_0! n_1! ...) prod_i phi_i^{n_i} ),  j >= 1

where n ranges over non-negative integer vectors with sum_i n_i = p and
sum_i i n_i = j - 1. Such vectors have support in 0..j-1.
"""

from __future__ import annotations

import logging
import math
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from skg.errors import CoefficientOverflowError
from skg.solvers.duhamel import (
    SpaceTimeField,
    TimeGrid,
    duhamel_rhs,
    field_power,
    source_convolve,
    zeroth_order,
)
from skg.spectral.kernels import DispersionTable, ModelParams
from skg.spectral.lattice import Field

logger = logging.getLogger(__name__)

INT64_MAX = 2**63 - 1


# ==================== Domain Types ====================

class PartitionTerm(BaseModel):
    """One index vector of the order-j recursion with its multinomial coefficient"""
    model_config = ConfigDict(frozen=True)

    counts: Tuple[int, ...]
    coefficient: int

    @model_validator(mode="after")
    def _check_multinomial(self) -> "PartitionTerm":
        if any(n < 0 for n in self.counts):
            raise ValueError("partition counts must be non-negative")
        if self.coefficient != multinomial(self.counts):
            raise ValueError("coefficient is not the multinomial of the counts")
        return self

    @property
    def power(self) -> int:
        return sum(self.counts)

    @property
    def order(self) -> int:
        """The series order j this term contributes to"""
        return sum(i * n for i, n in enumerate(self.counts)) + 1


class OrderField(BaseModel):
    """Coefficient phi_j of lambda^j"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    order: int
    field: SpaceTimeField


class RemainderRow(BaseModel):
    lam: float
    gap: float


# ==================== Partitions ====================

def multinomial(counts: Tuple[int, ...]) -> int:
    """p! / prod n_i! in exact integers"""
    result = math.factorial(sum(counts))
    for n in counts:
        result //= math.factorial(n)
    return result


def _descending_vectors(total: int, weight: int, index: int, length: int) -> Iterator[Tuple[int, ...]]:
    """(n_index, ..., n_{length-1}) with sum n_i = total and sum i n_i = weight"""
    if index == length - 1:
        if index * total == weight:
            yield (total,)
        return
    for head in range(total, -1, -1):
        rest = total - head
        left = weight - index * head
        if left < (index + 1) * rest or left > (length - 1) * rest:
            continue
        for tail in _descending_vectors(rest, left, index + 1, length):
            yield (head,) + tail


def enumerate_partitions(p: int, j: int) -> List[PartitionTerm]:
    """
    Index vectors (n_0, ..., n_{j-1}) with sum n_i = p and sum i n_i = j - 1

    Args:
        p: nonlinearity exponent (>= 1)
        j: series order (>= 1)

    Returns:
        Terms in descending lexicographic order of their count vectors

    Raises:
        CoefficientOverflowError: if a coefficient exceeds signed 64-bit range
    """
    if p < 1 or j < 1:
        raise ValueError("enumerate_partitions needs p >= 1 and j >= 1")
    terms = []
    for counts in _descending_vectors(p, j - 1, 0, j):
        coefficient = multinomial(counts)
        if coefficient > INT64_MAX:
            raise CoefficientOverflowError(f"multinomial {counts} exceeds 64-bit range")
        terms.append(PartitionTerm(counts=counts, coefficient=coefficient))
    return terms


# ==================== Orders ====================

def compute_orders(
    J: int,
    f: Field,
    g: Field,
    xi: Optional[SpaceTimeField],
    params: ModelParams,
    table: DispersionTable,
    grid: TimeGrid,
) -> List[OrderField]:
    """
    Build phi_0 .. phi_J recursively

    Every phi_i is kept for reuse by the higher orders.
    """
    if J < 0:
        raise ValueError("J must be non-negative")
    phi0 = zeroth_order(f, g, xi, table, grid)
    orders = [OrderField(order=0, field=phi0)]
    powers: Dict[Tuple[int, int], np.ndarray] = {}

    def power_of(i: int, n: int) -> np.ndarray:
        key = (i, n)
        if key not in powers:
            powers[key] = field_power(orders[i].field.values, n)
        return powers[key]

    for j in range(1, J + 1):
        source = np.zeros_like(phi0.values)
        for term in enumerate_partitions(params.power, j):
            product = np.full_like(phi0.values, float(term.coefficient))
            for i, n in enumerate(term.counts):
                if n:
                    product = product * power_of(i, n)
            source = source + product
        phi_j = source_convolve(phi0.with_values(source), table)
        orders.append(OrderField(order=j, field=phi_j.with_values(-phi_j.values)))
        logger.debug("order %d: sup-norm %.3e", j, orders[-1].field.sup_norm())
    return orders


def partial_sum(orders: List[OrderField], lam: float) -> SpaceTimeField:
    """sum_{j <= J} lambda^j phi_j by Horner's rule"""
    ordered = sorted(orders, key=lambda o: o.order)
    result = ordered[-1].field.values
    for order in reversed(ordered[:-1]):
        result = result * lam + order.field.values
    return ordered[0].field.with_values(result)


def series_residual(
    orders: List[OrderField],
    lam: float,
    params: ModelParams,
    table: DispersionTable,
) -> float:
    """Duhamel residual of the truncated series; scales as lambda^(J+1)"""
    approx = partial_sum(orders, lam)
    scaled = params.model_copy(update={"lam": lam})
    return approx.sup_distance(duhamel_rhs(approx, orders[0].field, scaled, table))


def remainder_scaling(
    orders: List[OrderField],
    solutions: Dict[float, SpaceTimeField],
) -> List[RemainderRow]:
    """
    Sup-norm gap between reference solutions and the truncated series

    Args:
        orders: phi_0 .. phi_J
        solutions: lambda -> reference solution (e.g. Picard) at that lambda

    Returns:
        One row per lambda, ascending
    """
    rows = []
    for lam in sorted(solutions):
        gap = solutions[lam].sup_distance(partial_sum(orders, lam))
        rows.append(RemainderRow(lam=lam, gap=gap))
    return rows
