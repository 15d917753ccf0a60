"""Reference distributions: stick breaking, uniform permutation cycles,
and the random transposition chain.

Stick breaking with uniform fractions, sorted, is the law that the large
cycles of uniformly random permutations converge to; the random
transposition chain (compose with a uniformly random transposition of two
distinct elements) keeps the uniform measure invariant and acts on cycle
sizes as a size-biased split-merge.  These are the yardsticks the torus
experiments are measured against.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy import stats as sp_stats


@dataclass
class SimplexPoint:
    """Finite head of a point of the infinite simplex.

    parts are sorted non-increasing; tail_mass is the unassigned
    remainder, strictly below the truncation threshold.
    """

    parts: np.ndarray
    tail_mass: float

    def check(self, tail_eps: float | None = None) -> None:
        total = float(np.sum(self.parts)) + self.tail_mass
        if abs(total - 1.0) > 1e-12:
            raise AssertionError(f"parts + tail = {total}, not 1")
        if np.any(np.diff(self.parts) > 0):
            raise AssertionError("parts not sorted non-increasing")
        if tail_eps is not None and not self.tail_mass < tail_eps:
            raise AssertionError(f"tail mass {self.tail_mass} >= {tail_eps}")


def pd1_sample(rng, tail_eps: float = 1e-9) -> SimplexPoint:
    """Stick breaking with uniform fractions until the remaining stick is
    below tail_eps; parts sorted, remainder kept as tail_mass."""
    if not 0.0 < tail_eps < 1.0:
        raise ValueError(f"tail_eps must be in (0, 1), got {tail_eps}")
    parts = []
    rem = 1.0
    while rem >= tail_eps:
        u = float(rng.random())
        x = u * rem
        parts.append(x)
        rem -= x
    parts.sort(reverse=True)
    return SimplexPoint(parts=np.array(parts), tail_mass=rem)


def pd1_largest_parts(n_samples: int, rng, tail_eps: float = 1e-9,
                      chunk: int = 1 << 14) -> np.ndarray:
    """Largest stick-breaking part for each of n_samples draws, vectorized.

    Uses a fixed budget of fractions per sample, wide enough that the
    remainder is far below tail_eps with room to spare (the remainder
    after k fractions is exp(-Theta(k))); any sample that still exceeds
    the threshold falls back to the scalar sampler.
    """
    depth = max(64, int(8 * math.log(1.0 / tail_eps)))
    out = np.empty(n_samples)
    done = 0
    while done < n_samples:
        b = min(chunk, n_samples - done)
        u = rng.random((b, depth))
        rems = np.cumprod(1.0 - u, axis=1)
        rems_before = np.hstack([np.ones((b, 1)), rems[:, :-1]])
        parts = rems_before * u
        kept = rems_before >= tail_eps  # the draw after the threshold-crossing is the last
        big = np.max(np.where(kept, parts, 0.0), axis=1)
        bad = rems[:, -1] >= tail_eps
        if np.any(bad):
            for i in np.nonzero(bad)[0]:
                big[i] = float(np.max(pd1_sample(rng, tail_eps).parts))
        out[done : done + b] = big
        done += b
    return out


def uniform_cycles(N: int, rng) -> np.ndarray:
    """Sorted normalized cycle lengths of a uniformly random permutation.

    Samples lengths directly: the cycle containing the smallest unplaced
    element has length uniform on {1, ..., remaining}; no permutation is
    materialized, so N up to 10**7 is cheap.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    lengths = []
    r = N
    while r > 0:
        L = int(rng.integers(1, r + 1))
        lengths.append(L)
        r -= L
    lengths.sort(reverse=True)
    return np.array(lengths, dtype=np.int64) / N


@dataclass
class PartitionState:
    """Permutation word of [0, N) plus its cycle lengths."""

    N: int
    word: np.ndarray
    cycle_lengths: np.ndarray

    @classmethod
    def identity(cls, N: int) -> "PartitionState":
        return cls(N=N, word=np.arange(N), cycle_lengths=np.ones(N, dtype=np.int64))

    def check(self) -> None:
        if sorted(self.word.tolist()) != list(range(self.N)):
            raise AssertionError("word is not a permutation")
        if int(self.cycle_lengths.sum()) != self.N:
            raise AssertionError("cycle lengths do not sum to N")


def cycle_lengths_of_word(word: np.ndarray) -> np.ndarray:
    N = len(word)
    seen = np.zeros(N, dtype=bool)
    out = []
    for s in range(N):
        if seen[s]:
            continue
        c = 0
        x = s
        while not seen[x]:
            seen[x] = True
            c += 1
            x = int(word[x])
        out.append(c)
    return np.array(sorted(out, reverse=True), dtype=np.int64)


def transposition_step(st: PartitionState, rng) -> PartitionState:
    """Compose with a uniformly random transposition of two distinct
    elements: merges their cycles if distinct, splits the cycle at the
    two chosen positions otherwise.  Cycle count always moves by one.
    """
    if st.N < 2:
        raise ValueError("need N >= 2 to transpose")
    a = int(rng.integers(st.N))
    b = int(rng.integers(st.N - 1))
    if b >= a:
        b += 1
    word = st.word.copy()
    # left-compose (a b): swap the images a and b wherever they occur
    ia = int(np.nonzero(word == a)[0][0])
    ib = int(np.nonzero(word == b)[0][0])
    word[ia], word[ib] = b, a
    return PartitionState(N=st.N, word=word,
                          cycle_lengths=cycle_lengths_of_word(word))


def transposition_type_occupation(N: int, n_chains: int, n_steps: int, rng,
                                  burn_in: int = 0) -> Counter:
    """Pooled cycle types along n_chains random-transposition chains.

    The chain alternates permutation parity deterministically, so its law
    at any fixed time is confined to one parity class; the trajectory-
    pooled (Cesaro) empirical law is the quantity that converges to the
    uniform-measure cycle-type law, and is what this returns.  Steps are
    vectorized across chains; types are read off every step past burn_in.
    """
    word = np.tile(np.arange(N), (n_chains, 1))
    inv = word.copy()
    rows = np.arange(n_chains)
    types: Counter = Counter()
    for t in range(n_steps):
        a = rng.integers(0, N, size=n_chains)
        b = rng.integers(0, N - 1, size=n_chains)
        b = np.where(b >= a, b + 1, b)
        ia = inv[rows, a]
        ib = inv[rows, b]
        word[rows, ia] = b
        word[rows, ib] = a
        inv[rows, a] = ib
        inv[rows, b] = ia
        if t >= burn_in:
            for r in range(n_chains):
                types[tuple(cycle_lengths_of_word(word[r]).tolist())] += 1
    return types


def exact_cycle_type_law(N: int) -> dict[tuple[int, ...], float]:
    """P[cycle type] under the uniform measure: 1 / prod(k^m_k * m_k!)."""
    laws = {}
    for part in _partitions(N):
        mult = Counter(part)
        denom = 1.0
        for k, mk in mult.items():
            denom *= (k ** mk) * math.factorial(mk)
        laws[tuple(sorted(part, reverse=True))] = 1.0 / denom
    total = sum(laws.values())
    if abs(total - 1.0) > 1e-12:
        raise AssertionError(f"cycle type law sums to {total}")
    return laws


def _partitions(n: int, largest: int | None = None):
    if largest is None:
        largest = n
    if n == 0:
        yield ()
        return
    for k in range(min(n, largest), 0, -1):
        for rest in _partitions(n - k, k):
            yield (k,) + rest


@dataclass(frozen=True)
class TwoSampleStats:
    ks_statistic: float
    ks_pvalue: float
    mean_diff: float
    mean_diff_se: float


def two_sample_stats(xs, ys) -> TwoSampleStats:
    """Two-sample Kolmogorov-Smirnov (asymptotic p) plus mean difference
    with pooled standard error."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) == 0 or len(ys) == 0:
        raise ValueError("two_sample_stats needs nonempty samples")
    ks = sp_stats.ks_2samp(xs, ys, method="asymp")
    se = math.sqrt(np.var(xs, ddof=1) / len(xs) + np.var(ys, ddof=1) / len(ys)) \
        if len(xs) > 1 and len(ys) > 1 else float("nan")
    return TwoSampleStats(
        ks_statistic=float(ks.statistic),
        ks_pvalue=float(ks.pvalue),
        mean_diff=float(xs.mean() - ys.mean()),
        mean_diff_se=se,
    )


PARTS_CSV_HEADER = ["sample_id", "rank", "value"]


def write_parts_csv(path, rows) -> None:
    """rows: iterable of (sample_id, rank, value)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(PARTS_CSV_HEADER)
        w.writerows(rows)
