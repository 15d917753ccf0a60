"""Cycle extraction and geometry: strands, global traversals, contacts.

Every orbit of the permutation advances one column per step, so each cycle
visits every column the same number K of times and has K * n vertices.
The decomposition is therefore available two ways: a direct visited-marking
walk over all vertices (:func:`extract_cycles`), and a reduction to the
return map of column 0 (:func:`strand_counts`), which composes the n
per-column row bijections and decomposes an m-element permutation.  The
two routes are checked against each other in the tests.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .permutation import ArrowField, apply
from .torus import DualVertex, TorusDims, Vertex, vertical_dist

_MATERIALIZE_LIMIT = 1 << 20


@dataclass
class CycleDecomposition:
    """Orbit partition of an arrow field.

    ``labels[j, k]`` is the cycle index of vertex (j, k); ``lengths`` are
    vertex counts in discovery order (column-major scan of starting
    vertices); ``structure`` is the non-increasing list of normalized
    lengths.  Vertex lists are materialized only for small tori; use
    :meth:`orbit` to walk one on demand.
    """

    dims: TorusDims
    labels: np.ndarray
    lengths: np.ndarray
    structure: np.ndarray
    cycles: list[list[Vertex]] | None = None
    _field: ArrowField | None = field(default=None, repr=False)

    @property
    def cycle_count(self) -> int:
        return len(self.lengths)

    def orbit(self, index: int) -> list[Vertex]:
        if self.cycles is not None:
            return self.cycles[index]
        if self._field is None:
            raise ValueError("orbit vertices unavailable: field not retained")
        start = np.argwhere(self.labels == index)
        j, k = (int(start[0][0]), int(start[0][1]))
        return _walk_orbit(self._field, Vertex(j, k))

    def strand_count(self, index: int) -> int:
        return int(self.lengths[index]) // self.dims.n


def _walk_orbit(fld: ArrowField, start: Vertex) -> list[Vertex]:
    out = [start]
    v = apply(fld, start)
    while v != start:
        out.append(v)
        v = apply(fld, v)
    return out


def extract_cycles(fld: ArrowField, materialize: bool | None = None) -> CycleDecomposition:
    """Orbit partition by visited-marking traversal.

    Scans starting vertices column-major and opens a new orbit at the
    first unvisited one; iterative walk, no recursion.
    """
    n, m = fld.dims.n, fld.dims.m
    arrows = fld.arrows
    labels = np.full((n, m), -1, dtype=np.int64)
    lengths: list[int] = []
    if materialize is None:
        materialize = n * m <= _MATERIALIZE_LIMIT
    orbits: list[list[Vertex]] | None = [] if materialize else None
    for j0 in range(n):
        for k0 in range(m):
            if labels[j0, k0] >= 0:
                continue
            cid = len(lengths)
            orbit = [] if materialize else None
            j, k = j0, k0
            count = 0
            while True:
                labels[j, k] = cid
                count += 1
                if orbit is not None:
                    orbit.append(Vertex(j, k))
                j, k = (j + 1) % n, (k + int(arrows[j, k]) + 1) % m
                if j == j0 and k == k0:
                    break
            lengths.append(count)
            if orbits is not None:
                orbits.append(orbit)
    lengths_arr = np.array(lengths, dtype=np.int64)
    structure = np.sort(lengths_arr)[::-1] / (n * m)
    return CycleDecomposition(
        dims=fld.dims,
        labels=labels,
        lengths=lengths_arr,
        structure=structure,
        cycles=orbits,
        _field=fld,
    )


# ---------------------------------------------------------------------------
# column-0 reduction

@dataclass
class StrandCounts:
    """Cycles of the column-0 return map.

    ``counts[c]`` is the number of strands (column-0 visits) of cycle c,
    anchored and ordered by the smallest column-0 row it contains;
    ``row_cycle[r]`` maps a column-0 row to its cycle index; ``psi`` is
    the return map itself.
    """

    dims: TorusDims
    psi: np.ndarray
    counts: np.ndarray
    anchors: np.ndarray
    row_cycle: np.ndarray

    @property
    def cycle_count(self) -> int:
        return len(self.counts)

    def normalized_structure(self) -> np.ndarray:
        return np.sort(self.counts)[::-1] / self.dims.m


def strand_counts_from_psi(psi: np.ndarray, dims: TorusDims) -> StrandCounts:
    m = dims.m
    row_cycle = np.full(m, -1, dtype=np.int64)
    counts: list[int] = []
    anchors: list[int] = []
    for r0 in range(m):
        if row_cycle[r0] >= 0:
            continue
        cid = len(counts)
        anchors.append(r0)
        r = r0
        c = 0
        while True:
            row_cycle[r] = cid
            c += 1
            r = int(psi[r])
            if r == r0:
                break
        counts.append(c)
    return StrandCounts(
        dims=dims,
        psi=np.asarray(psi, dtype=np.int64),
        counts=np.array(counts, dtype=np.int64),
        anchors=np.array(anchors, dtype=np.int64),
        row_cycle=row_cycle,
    )


def strand_counts(fld: ArrowField) -> StrandCounts:
    psi = kernels.compose_return_map(fld.occupation())
    return strand_counts_from_psi(psi, fld.dims)


# ---------------------------------------------------------------------------
# strands and traversals

@dataclass
class Strand:
    """One horizontal wrap of an orbit: n vertices, one per column."""

    start: Vertex
    path: list[Vertex]
    increments: np.ndarray
    end: Vertex
    m: int

    def rows_by_column(self) -> np.ndarray:
        rows = np.empty(len(self.path), dtype=np.int64)
        for v in self.path:
            rows[v.x1] = v.x2
        return rows


def strand_at(fld: ArrowField, v: Vertex) -> Strand:
    n = fld.dims.n
    path = [Vertex(v[0] % n, v[1] % fld.dims.m)]
    incs = np.empty(n - 1, dtype=np.int8)
    cur = path[0]
    for t in range(n - 1):
        incs[t] = fld.arrows[cur.x1, cur.x2]
        cur = apply(fld, cur)
        path.append(cur)
    return Strand(start=path[0], path=path, increments=incs,
                  end=apply(fld, path[-1]), m=fld.dims.m)


@dataclass
class GlobalTraversal:
    start: Vertex
    strands: list[Strand]


def traversal_at(fld: ArrowField, v: Vertex, dims: TorusDims) -> GlobalTraversal:
    """gamma consecutive strands from v; requires them all distinct."""
    dims.require_traversals()
    strands = []
    cur = Vertex(v[0], v[1])
    seen = set()
    for _ in range(dims.gamma):
        if cur in seen:
            raise ValueError(f"no global traversal at {v}: strands repeat")
        seen.add(cur)
        s = strand_at(fld, cur)
        strands.append(s)
        cur = s.end
    return GlobalTraversal(start=strands[0].start, strands=strands)


@dataclass(frozen=True)
class TraversalCount:
    """Whole and fractional global traversals of one cycle.

    ``whole * gamma + frac_num`` equals the cycle's strand count exactly;
    the fractional part is the rational frac_num / gamma.
    """

    whole: int
    frac_num: int
    gamma: int

    @property
    def frac(self) -> float:
        return self.frac_num / self.gamma

    @property
    def strands(self) -> int:
        return self.whole * self.gamma + self.frac_num


def traversal_counts(dec: CycleDecomposition | StrandCounts, dims: TorusDims) -> list[TraversalCount]:
    dims.require_traversals()
    gamma = dims.gamma
    if isinstance(dec, StrandCounts):
        ks = [int(c) for c in dec.counts]
    else:
        ks = [int(L) // dims.n for L in dec.lengths]
    return [TraversalCount(whole=k // gamma, frac_num=k % gamma, gamma=gamma) for k in ks]


def traversal_ids_by_start_row(sc: StrandCounts, gamma: int) -> tuple[np.ndarray, int]:
    """Label each column-0 row with the traversal id of the strand that
    starts there, anchoring each cycle's decomposition at its minimal
    column-0 row (the cycle's minimal vertex in column-major order).
    Strands in the fractional remainder get -1.  Returns (ids, n_tr).
    """
    m = sc.dims.m
    tid = np.full(m, -1, dtype=np.int64)
    next_id = 0
    for cid, anchor in enumerate(sc.anchors):
        k = int(sc.counts[cid])
        whole = k // gamma
        r = int(anchor)
        for s in range(k):
            if s < whole * gamma:
                tid[r] = next_id + s // gamma
            r = int(sc.psi[r])
        next_id += whole
    return tid, next_id


# ---------------------------------------------------------------------------
# distances and the separation event

def dist_minus(sA: Strand, sB: Strand) -> int:
    return int(np.min(_columnwise_dists(sA, sB)))


def dist_plus(sA: Strand, sB: Strand) -> int:
    return int(np.max(_columnwise_dists(sA, sB)))


def _columnwise_dists(sA: Strand, sB: Strand) -> np.ndarray:
    if len(sB.path) != len(sA.path) or sA.m != sB.m:
        raise ValueError("strands come from different fields")
    return _cyclic_dist_vec(sA.rows_by_column(), sB.rows_by_column(), sA.m)


def _cyclic_dist_vec(ra: np.ndarray, rb: np.ndarray, m: int) -> np.ndarray:
    d = np.abs(ra - rb) % m
    return np.minimum(d, m - d)


@dataclass(frozen=True)
class SeparationReport:
    holds: bool
    min_gap: int
    max_gap: int
    lower_threshold: float
    upper_threshold: float


def check_separation_event(fld: ArrowField, dims: TorusDims, D: float) -> SeparationReport:
    """Do all consecutive-strand pairs stay in the corridor?

    Lower requirement: min-over-columns distance >= D * sqrt(m ln m);
    upper: max-over-columns distance <= (4 + 1.5 D) * sqrt(m ln m).
    One strand starts at each of the m vertices of column 0.
    """
    n, m = dims.n, dims.m
    scale = math.sqrt(m * math.log(m))
    lower = D * scale
    upper = (4.0 + 1.5 * D) * scale
    occ = fld.occupation()
    rows = _walker_rows(occ, n, m)
    psi_full = kernels.compose_return_map(occ)
    gaps = _cyclic_dist_vec(rows, rows[psi_full], m)
    min_gap = int(gaps.min())
    max_gap = int(gaps.max())
    holds = (min_gap >= lower) and (max_gap <= upper)
    return SeparationReport(holds=holds, min_gap=min_gap, max_gap=max_gap,
                            lower_threshold=lower, upper_threshold=upper)


def _walker_rows(occ: np.ndarray, n: int, m: int) -> np.ndarray:
    """rows[r, j] = row of the strand started at (0, r) when it is in column j."""
    rows = np.empty((m, n), dtype=np.int64)
    pos = np.arange(m)
    arange_m = np.arange(m)
    for j in range(n):
        rows[:, j] = pos
        col = occ[j].astype(np.int64)
        arrows = col - np.roll(col, 1)
        psi = (arange_m + arrows + 1) % m
        pos = psi[pos]
    return rows


# ---------------------------------------------------------------------------
# contacts

@dataclass
class ContactSet:
    sites: set[DualVertex]

    def __contains__(self, v) -> bool:
        return v in self.sites

    def __len__(self) -> int:
        return len(self.sites)


def contact_mask(fld: ArrowField) -> np.ndarray:
    """mask[j, k] is True iff the arrows at rows k, k+1 of column j swap
    or are parallel (exactly the sites a Glauber update can toggle)."""
    occ = fld.occupation()
    left = np.roll(occ, 1, axis=1)
    right = np.roll(occ, -1, axis=1)
    return (occ == 1) | ((left == 0) & (occ == 0) & (right == 0))


def contacts(fld: ArrowField) -> ContactSet:
    mask = contact_mask(fld)
    js, ks = np.nonzero(mask)
    return ContactSet(sites={DualVertex(int(j), int(k)) for j, k in zip(js, ks)})


def contacts_between(fld: ArrowField, A, B) -> int:
    """Dual sites with one endpoint in A and the other in B (either order).

    Overlapping A and B count each qualifying site once (site semantics;
    with A = B = all vertices this is the total number of contacts).
    """
    A = {Vertex(*v) for v in A}
    B = {Vertex(*v) for v in B}
    m = fld.dims.m
    mask = contact_mask(fld)
    js, ks = np.nonzero(mask)
    count = 0
    for j, k in zip(js, ks):
        u = Vertex(int(j), int(k))
        w = Vertex(int(j), (int(k) + 1) % m)
        if (u in A and w in B) or (u in B and w in A):
            count += 1
    return count


@dataclass(frozen=True)
class PairContactStats:
    mean: float
    variance: float
    cv: float
    pair_count: int
    traversal_count: int
    total_contacts: int


def traversal_pair_contact_stats(fld: ArrowField, dims: TorusDims) -> PairContactStats:
    """Contact-count statistics over every unordered pair of distinct
    whole traversals (pairs with no contacts count as zero)."""
    dims.require_traversals(2)
    sc = strand_counts(fld)
    tid, n_tr = traversal_ids_by_start_row(sc, dims.gamma)
    if n_tr < 2:
        return PairContactStats(math.nan, math.nan, math.nan, 0, n_tr, 0)
    counts, total = kernels.pair_contact_counts(fld.occupation(), tid, n_tr)
    iu = np.triu_indices(n_tr, k=1)
    vals = counts[iu]
    mean = float(vals.mean())
    var = float(vals.var(ddof=1))
    cv = math.sqrt(var) / mean if mean > 0 else math.nan
    return PairContactStats(mean=mean, variance=var, cv=cv,
                            pair_count=len(vals), traversal_count=n_tr,
                            total_contacts=total)


# ---------------------------------------------------------------------------
# CSV emitters

STRUCTURE_CSV_HEADER = ["sample_id", "rank", "normalized_length"]
PAIR_CSV_HEADER = ["sample_id", "pair_id", "count"]


def write_structure_csv(path, rows) -> None:
    """rows: iterable of (sample_id, rank, normalized_length)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STRUCTURE_CSV_HEADER)
        w.writerows(rows)


def write_pair_csv(path, rows) -> None:
    """rows: iterable of (sample_id, pair_id, count)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PAIR_CSV_HEADER)
        w.writerows(rows)
