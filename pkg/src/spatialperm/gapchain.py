"""The ideal gap chain: vertical distance between two idealized strands.

A positive-integer Markov chain whose one-step law at state i mixes the
conditional occupation probabilities of the infinite-line hard-core model
(the q-table): the lower strand's arrow resamples with the three-way law
(p, 1-2p, p) and the upper strand reacts through the conditional
occupations at distance i.  Jumps live in {-2, ..., +2}; state 1 admits
only {0, +1, +2}, and state 2 cannot jump -2 because adjacent occupation
is impossible.  Beyond the table cutoff the increment law is exactly the
two-step convolution of the symmetric single-arrow law.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .hardcore import QTable
from .streams import key_from_generator

JUMPS = np.arange(-2, 3)


@dataclass
class GapChain:
    qt: QTable
    rows: np.ndarray  # (i_max + 2, 5); row i for state i, last row asymptotic

    @property
    def i_max(self) -> int:
        return self.qt.i_max


def _asymptotic_row(p: float) -> np.ndarray:
    q = 1.0 - 2.0 * p
    return np.array([p * p, 2 * p * q, q * q + 2 * p * p, 2 * p * q, p * p])


def build_chain(qt: QTable) -> GapChain:
    p = qt.p
    qm, qp, qz = qt.q_minus, qt.q_plus, qt.q_zero
    rows = np.zeros((qt.i_max + 2, 5))
    rows[1] = [
        0.0,
        0.0,
        (1 - 2 * p) * (1 - qz[1]) + p,
        (1 - 2 * p) * qz[1] + p * (1 - qm[1] - qm[0]),
        p * qm[1],
    ]
    for i in range(2, qt.i_max + 1):
        rows[i] = [
            p * qp[i - 1],
            (1 - 2 * p) * qz[i - 1] + p * (1 - qp[i] - qp[i - 1]),
            (1 - 2 * p) * (1 - qz[i] - qz[i - 1]) + p * (qp[i] + qm[i - 1]),
            (1 - 2 * p) * qz[i] + p * (1 - qm[i] - qm[i - 1]),
            p * qm[i],
        ]
    rows[qt.i_max + 1] = _asymptotic_row(p)
    sums = rows[1:].sum(axis=1)
    bad = np.max(np.abs(sums - 1.0))
    if bad > 1e-12:
        raise AssertionError(f"transition rows do not normalize: off by {bad:.3e}")
    if np.any(rows < -1e-15):
        raise AssertionError("negative transition mass")
    np.clip(rows, 0.0, None, out=rows)
    return GapChain(qt=qt, rows=rows)


def transition_row(chain: GapChain, i: int) -> np.ndarray:
    """Jump distribution over {-2, ..., +2} from state i >= 1."""
    if i < 1:
        raise ValueError(f"gap chain states start at 1, got {i}")
    idx = min(i, chain.i_max + 1)
    return chain.rows[idx].copy()


def step(chain: GapChain, state: int, rng) -> int:
    row = chain.rows[min(state, chain.i_max + 1)]
    u = rng.random()
    acc = 0.0
    for jump in (-2, -1, 0, 1):
        acc += row[jump + 2]
        if u < acc:
            return state + jump
    return state + 2


def simulate(chain: GapChain, z0: int, rng, steps: int | None = None,
             hit: set[int] | None = None, max_steps: int = 10_000_000) -> np.ndarray:
    """Trajectory from z0, stopped after ``steps`` or on hitting ``hit``."""
    if z0 < 1:
        raise ValueError(f"states are positive integers, got z0={z0}")
    if (steps is None) == (hit is None):
        raise ValueError("give exactly one stopping rule: steps or hit")
    traj = [z0]
    state = z0
    limit = steps if steps is not None else max_steps
    for _ in range(limit):
        if hit is not None and state in hit:
            break
        state = step(chain, state, rng)
        traj.append(state)
    else:
        if hit is not None:
            raise RuntimeError(f"hit set not reached within {max_steps} steps")
    return np.array(traj, dtype=np.int64)


@dataclass(frozen=True)
class HitEstimate:
    estimate: float
    stderr: float
    reps: int
    successes: int


def hitting_prob_up(chain: GapChain, j1: int, j2: int, reps: int, rng) -> HitEstimate:
    """Monte Carlo P[reach level >= j2 before visiting 1 | Z_0 = j1].

    Convention: j1 == j2 returns estimate 1 (the upward hitting time is 0).
    """
    if not 1 < j1 <= j2:
        raise ValueError(f"need 1 < j1 <= j2, got j1={j1}, j2={j2}")
    key = key_from_generator(rng)
    hits = kernels.gapchain_hits(chain.rows, chain.i_max, j1, j2, reps, key)
    k = int(np.sum(hits))
    p = k / reps
    se = math.sqrt(max(p * (1.0 - p), 1.0 / reps) / reps)
    return HitEstimate(estimate=p, stderr=se, reps=reps, successes=k)


def local_time_at_one(chain: GapChain, z0: int, until: set[int], rng,
                      max_steps: int = 10_000_000) -> int:
    """Visits to state 1 (including time 0) before hitting ``until``."""
    if z0 < 1:
        raise ValueError(f"states are positive integers, got z0={z0}")
    if z0 in until:
        return 0
    count = 1 if z0 == 1 else 0
    state = z0
    for _ in range(max_steps):
        state = step(chain, state, rng)
        if state in until:
            return count
        if state == 1:
            count += 1
    raise RuntimeError(f"stop set not reached within {max_steps} steps")


def local_times_batch(chain: GapChain, z0: int, stop_lo: int, reps: int, rng) -> np.ndarray:
    """Batch local times with the stop set {stop_lo, stop_lo + 1}.

    Jumps are at most 2, so an upward crossing always lands in the set;
    stopping at state >= stop_lo is equivalent.
    """
    key = key_from_generator(rng)
    return kernels.gapchain_local_times(chain.rows, chain.i_max, z0, stop_lo, reps, key)


HITTING_CSV_HEADER = ["lambda", "j1", "j2", "reps", "estimate", "stderr"]


def write_hitting_csv(path, rows) -> None:
    """rows: iterable of (lambda, j1, j2, reps, estimate, stderr)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(HITTING_CSV_HEADER)
        w.writerows(rows)
