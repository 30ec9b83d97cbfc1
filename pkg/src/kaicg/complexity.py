"""Analytic multiplication counts of the DoA estimators.

All arithmetic runs on exact fractions, so the counts reproduce bit for bit
and integer-valued rows come out as exact integers.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError, ValidationError

ALGORITHMS = ("MS-KAI-CG", "MS-KAI-CG-FB", "MUSIC", "Root-MUSIC", "AVF", "CG", "ESPRIT", "TS-ESPRIT")


@dataclass(frozen=True)
class ComplexityQuery:
    algorithm: str
    m: int
    n: int
    p: int
    delta_deg: float = 0.2
    tau: int = 11

    def __post_init__(self):
        if min(self.m, self.n, self.p) < 1 or not self.delta_deg > 0:
            raise ValidationError("m, n, p and delta_deg must be positive")
        if self.tau < 2:
            raise ValidationError(f"tau must be at least 2, got {self.tau}")


def _cg_search(m, p, grid):
    return grid * (m ** 2 * (p + 1) + m * (6 * p + 2) + p + 1)


def _kai(m, n, p, grid, tau):
    h = Fraction(1, 2)
    inner = (_cg_search(m, p, grid)
             + Fraction(10, 3) * m ** 3 + m ** 2 * (n + p + 3) + m * (3 * h * p ** 2 + h * p)
             + p ** 2 * (h * p + 3 * h))
    outer = p * (2 * m ** 3 + m ** 2 * p + m * (h * p) + p ** 2 * (h * p + 3 * h))
    return p * tau * inner + outer + _cg_search(m, p, grid) + m ** 2 * (n + 2) + m * p


def _ts_esprit(m, n, p, tau):
    h = Fraction(1, 2)
    shared = m * (5 * h * p ** 2 - 3 * h * p + 8 * n ** 2) + p ** 2 * (17 * h * p + h)
    return (tau * (3 * m ** 3 + m ** 2 * (3 * p + 2) + shared + 1)
            + 2 * m ** 3 + m ** 2 * (3 * p) + shared)


def multiplication_count_exact(q: ComplexityQuery) -> Fraction:
    m, n, p, tau = q.m, q.n, q.p, q.tau
    # str() keeps 0.2 as 1/5 instead of its binary approximation
    grid = Fraction(180) / Fraction(str(q.delta_deg))
    if q.algorithm in ("MS-KAI-CG", "MS-KAI-CG-FB"):
        return _kai(m, n, p, grid, tau)
    if q.algorithm == "MUSIC":
        return grid * (m ** 2 + m * (2 - p) - p) + 8 * m * n ** 2
    if q.algorithm == "Root-MUSIC":
        return Fraction(2 * m ** 3 - m ** 2 * p + 8 * m * n ** 2)
    if q.algorithm == "AVF":
        return grid * (m ** 2 * (3 * p + 1) + m * (4 * p - 2) + p + 2) + m ** 2 * n
    if q.algorithm == "CG":
        return _cg_search(m, p, grid) + m ** 2 * n
    if q.algorithm == "ESPRIT":
        return Fraction(2 * m ** 2 * p + m * (p ** 2 - 2 * p + 8 * n ** 2) + 8 * p ** 3 - p ** 2)
    if q.algorithm == "TS-ESPRIT":
        return _ts_esprit(m, n, p, tau)
    raise DomainError(f"unknown algorithm {q.algorithm!r}; expected one of {', '.join(ALGORITHMS)}")


def multiplication_count(q: ComplexityQuery) -> float:
    """Number of complex multiplications for the algorithm named in ``q``."""
    return float(multiplication_count_exact(q))
