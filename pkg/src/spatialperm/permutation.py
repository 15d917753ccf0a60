"""Directed spatial permutations: arrow fields and their exact samplers.

A configuration assigns each torus vertex a step in {-1, 0, +1}; the map
(x1, x2) -> (x1 + 1, x2 + step + 1) must be a bijection, which is a
separate condition on every column.  Conditioned on containing no global
shift (a column of all +1 or all -1 steps), bijective columns are in exact
correspondence with hard-core configurations on the dual column: an
occupied dual site (k, k+1) means the two incident arrows swap.

The induced hard-core activity is lambda = a**2 / (1 - 2a)**2 where a is
the probability of a +1 (or -1) step.  NOTE: this differs from the
a**2 / (1 - a)**2 sometimes quoted for this family of models; that form is
inconsistent with the step law's zero-step mass 1 - 2a, and the rejection
oracle in the acceptance suite adjudicates in favor of the corrected value
(at a = 1/3 all bijective non-shift columns are equally likely, which
forces lambda = 1).  The uncorrected value remains available behind the
``uncorrected`` flag for comparison runs.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from typing import Iterable, Literal

import numpy as np

from .hardcore import Activity, HardCoreColumn
from .torus import TorusDims, Vertex

_MAGIC = b"SPARROWF"
_FORMAT_VERSION = 1


@dataclass(frozen=True)
class StepParam:
    """Step law: P[+1] = P[-1] = a, P[0] = 1 - 2a, with 0 < a < 1/2."""

    a: float

    def __post_init__(self):
        if not 0.0 < self.a < 0.5:
            raise ValueError(f"step parameter must lie in (0, 1/2), got {self.a!r}")


@dataclass
class ColumnConfig:
    """One column of steps; may be non-bijective (oracle input)."""

    steps: np.ndarray

    def __post_init__(self):
        self.steps = np.asarray(self.steps, dtype=np.int8)


@dataclass
class ArrowField:
    """Per-vertex steps on the n-by-m torus, stored (n, m) with each
    column contiguous (the hot loops walk columns)."""

    dims: TorusDims
    arrows: np.ndarray

    def __post_init__(self):
        self.arrows = np.ascontiguousarray(self.arrows, dtype=np.int8)
        if self.arrows.shape != (self.dims.n, self.dims.m):
            raise ValueError(
                f"arrows shape {self.arrows.shape} != (n, m) = "
                f"{(self.dims.n, self.dims.m)}"
            )

    def occupation(self) -> np.ndarray:
        """Dual occupation matrix: occ[j, k] = 1 iff arrows swap at (j, k)."""
        return (self.arrows == 1).astype(np.int8)

    def column(self, j: int) -> ColumnConfig:
        return ColumnConfig(self.arrows[j].copy())

    def is_bijective(self) -> bool:
        n, m = self.arrows.shape
        targets = (np.arange(m)[None, :] + self.arrows + 1) % m
        sorted_targets = np.sort(targets, axis=1)
        return bool(np.all(sorted_targets == np.arange(m)[None, :]))

    def has_global_shift(self) -> bool:
        return bool(np.any(np.all(self.arrows == 1, axis=1)) or
                    np.any(np.all(self.arrows == -1, axis=1)))


def activity_from_step(p: StepParam, uncorrected: bool = False) -> Activity:
    """Hard-core activity induced by the step law (see module docstring)."""
    a = p.a
    if uncorrected:
        return Activity(a * a / ((1.0 - a) ** 2))
    return Activity(a * a / ((1.0 - 2.0 * a) ** 2))


def occupation_to_arrows(occ: np.ndarray) -> np.ndarray:
    """Arrows from dual occupation, one or many columns at once.

    ``arrow[k] = +1`` if dual site k is occupied, ``-1`` if dual site k-1
    is occupied, else 0; occupation being an independent set makes the
    cases exclusive.
    """
    occ = np.asarray(occ, dtype=np.int8)
    return occ - np.roll(occ, 1, axis=-1)


def arrows_from_columns(cols: Iterable[HardCoreColumn], dims: TorusDims) -> ArrowField:
    """Assemble the arrow field coupled to n hard-core columns."""
    occ = np.stack([np.asarray(c.occ, dtype=np.int8) for c in cols])
    if occ.shape != (dims.n, dims.m):
        raise ValueError(
            f"need exactly n={dims.n} columns of length m={dims.m}, got {occ.shape}"
        )
    return ArrowField(dims, occupation_to_arrows(occ))


def field_from_occupation(dims: TorusDims, occ: np.ndarray) -> ArrowField:
    return ArrowField(dims, occupation_to_arrows(occ))


def apply(field: ArrowField, v: Vertex) -> Vertex:
    """One step of the permutation: (x1, x2) -> (x1+1, x2+step+1)."""
    n, m = field.dims.n, field.dims.m
    x1 = v[0] % n
    x2 = v[1] % m
    return Vertex((x1 + 1) % n, (x2 + int(field.arrows[x1, x2]) + 1) % m)


def column_targets(col: ColumnConfig) -> np.ndarray:
    m = len(col.steps)
    return (np.arange(m) + col.steps + 1) % m


def is_column_bijection(col: ColumnConfig) -> bool:
    m = len(col.steps)
    return len(np.unique(column_targets(col))) == m


def detect_global_shift(col: ColumnConfig) -> Literal["none", "up", "down"]:
    if np.all(col.steps == 1):
        return "up"
    if np.all(col.steps == -1):
        return "down"
    return "none"


class RejectionCapExceeded(RuntimeError):
    pass


def _steps_from_uniforms(u: np.ndarray, a: float) -> np.ndarray:
    steps = np.zeros(u.shape, dtype=np.int8)
    steps[u < a] = 1
    steps[u >= 1.0 - a] = -1
    return steps


def rejection_sample_columns(
    m: int,
    p: StepParam,
    exclude_shifts: bool,
    count: int,
    rng,
    max_attempts: int = 10_000_000,
) -> np.ndarray:
    """``count`` independent draws of the conditioned column law, by
    brute-force rejection.  Test oracle; m is capped at 64 because the
    acceptance probability decays exponentially.
    """
    if m < 3:
        raise ValueError(f"rejection oracle needs m >= 3, got {m}")
    if m > 64:
        raise ValueError(f"rejection oracle capped at m <= 64, got {m}")
    rows = np.arange(m)
    out = np.empty((count, m), dtype=np.int8)
    found = 0
    attempts = 0
    chunk = max(1024, min(1 << 16, 4 * count))
    while found < count:
        if attempts >= max_attempts:
            raise RejectionCapExceeded(
                f"rejection sampler exceeded {max_attempts} attempts "
                f"({found}/{count} accepted; m={m}, a={p.a})"
            )
        take = min(chunk, max_attempts - attempts)
        steps = _steps_from_uniforms(rng.random((take, m)), p.a)
        attempts += take
        targets = np.sort((rows[None, :] + steps + 1) % m, axis=1)
        ok = np.all(targets == rows[None, :], axis=1)
        if exclude_shifts:
            ok &= ~np.all(steps == 1, axis=1)
            ok &= ~np.all(steps == -1, axis=1)
        good = steps[ok]
        take_n = min(len(good), count - found)
        out[found : found + take_n] = good[:take_n]
        found += take_n
    return out


def rejection_sample_column(
    m: int,
    p: StepParam,
    exclude_shifts: bool,
    rng,
    max_attempts: int = 10_000_000,
) -> ColumnConfig:
    """Single draw from the exact conditioned law (see the batch form)."""
    row = rejection_sample_columns(m, p, exclude_shifts, 1, rng, max_attempts)
    return ColumnConfig(row[0])


def sample_equilibrium(dims: TorusDims, p: StepParam, rng) -> ArrowField:
    """Exact equilibrium sample of the permutation, conditioned on no
    global shift: n independent hard-core columns at the induced activity,
    mapped through the swap coupling."""
    from . import kernels
    from .streams import key_from_generator

    if dims.m < 3:
        raise ValueError(f"equilibrium sampler needs m >= 3, got {dims.m}")
    act = activity_from_step(p)
    key = key_from_generator(rng)
    occ = kernels.sample_occupation(dims.m, dims.n, act, key)
    return field_from_occupation(dims, occ)


def save_field(field: ArrowField, path) -> None:
    """Versioned binary layout: magic, version, n, m as u64 LE, then
    n*m signed bytes in column-major order (column j contiguous)."""
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<QQQ", _FORMAT_VERSION, field.dims.n, field.dims.m))
        fh.write(field.arrows.tobytes(order="C"))


def load_field(path, dims: TorusDims | None = None) -> ArrowField:
    with open(path, "rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        version, n, m = struct.unpack("<QQQ", fh.read(24))
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported format version {version}")
        raw = fh.read(n * m)
        if len(raw) != n * m:
            raise ValueError("truncated arrow payload")
    arrows = np.frombuffer(raw, dtype=np.int8).reshape(n, m).copy()
    if dims is None:
        from .torus import dims_from_sizes

        dims = dims_from_sizes(int(n), int(m))
    elif (dims.n, dims.m) != (n, m):
        raise ValueError(f"file is {(n, m)}, dims say {(dims.n, dims.m)}")
    return ArrowField(dims, arrows)


def field_to_json(field: ArrowField) -> str:
    """Debug dump {n, m, arrows: [[column 0 steps], [column 1 steps], ...]}."""
    return json.dumps(
        {
            "n": field.dims.n,
            "m": field.dims.m,
            "arrows": field.arrows.tolist(),
        }
    )


def field_from_json(text: str, dims: TorusDims) -> ArrowField:
    doc = json.loads(text)
    if (doc["n"], doc["m"]) != (dims.n, dims.m):
        raise ValueError("json dims do not match")
    return ArrowField(dims, np.array(doc["arrows"], dtype=np.int8))
