"""Torus geometry, coordinate wrapping, and derived model dimensions.

The model lives on an n-by-m torus whose horizontal size is slaved to the
vertical one: n = m + c(m) with c(m) = ceil(cprime * sqrt(m * ln m)).
``gamma`` is the number of consecutive strands that make up one global
traversal, gamma = floor(m / c(m) - 2 * m**(1/4)).  For small m this can be
nonpositive; such dims are flagged rather than rejected so that unit tests
can still build geometry.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple


class Vertex(NamedTuple):
    x1: int
    x2: int


class DualVertex(NamedTuple):
    """Vertical edge between rows k and k+1 (mod m) in column x1."""

    x1: int
    k: int


@dataclass(frozen=True)
class TorusDims:
    m: int
    cprime: float
    cm: int
    n: int
    gamma: int

    @property
    def degenerate_gamma(self) -> bool:
        return self.gamma < 1

    @property
    def size(self) -> int:
        return self.n * self.m

    def require_traversals(self, minimum: int = 1) -> None:
        if self.gamma < minimum:
            raise ValueError(
                f"gamma={self.gamma} is degenerate (< {minimum}); "
                f"traversal-based operations need larger m or smaller cprime"
            )


def _fourth_root(m: int):
    """m**(1/4), exact int when m is a perfect fourth power."""
    r = round(m ** 0.25)
    if r ** 4 == m:
        return r
    return m ** 0.25


def make_dims(m: int, cprime: float) -> TorusDims:
    """Build the geometry record for vertical size m and constant cprime.

    Uses the natural logarithm in c(m); the constant cprime absorbs any
    base change.
    """
    if not isinstance(m, (int,)) or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m!r}")
    if not cprime > 0:
        raise ValueError(f"cprime must be positive, got {cprime!r}")
    cm = math.ceil(cprime * math.sqrt(m * math.log(m)))
    n = m + cm
    mq = _fourth_root(m)
    if isinstance(mq, int):
        gamma = math.floor(Fraction(m, cm) - 2 * mq)
    else:
        gamma = math.floor(m / cm - 2.0 * mq)
    return TorusDims(m=m, cprime=float(cprime), cm=cm, n=n, gamma=gamma)


def dims_from_sizes(n: int, m: int) -> TorusDims:
    """Raw geometry for an explicitly sized torus (tests, file loading).

    gamma is set to 0 (flagged degenerate); use :func:`make_dims` when the
    horizontal size should follow from m and cprime.
    """
    if not (isinstance(n, int) and isinstance(m, int)) or m < 2 or n <= m:
        raise ValueError(f"need integers n > m >= 2, got n={n!r}, m={m!r}")
    return TorusDims(m=m, cprime=float("nan"), cm=n - m, n=n, gamma=0)


def endpoints(v: DualVertex, m: int) -> tuple[Vertex, Vertex]:
    """The two vertices joined by dual vertex v: rows k and k+1 (mod m)."""
    k = v.k % m
    return Vertex(v.x1, k), Vertex(v.x1, (k + 1) % m)


def vertical_dist(a: int, b: int, m: int) -> int:
    """Cyclic graph distance between rows a and b on a cycle of length m."""
    d = abs(a - b) % m
    return min(d, m - d)
