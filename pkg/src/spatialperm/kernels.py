"""Backend selection for the hot kernels.

The compiled extension ``spatialperm._kernels`` is used when available;
otherwise the numpy/pure-python twins in ``_kernels_py`` take over.  Both
consume identical counter streams, so results are backend independent.
Set ``SPATIALPERM_BACKEND=py`` or ``=c`` to force a choice (forcing ``c``
raises if the extension is missing).
"""

from __future__ import annotations

import os

import numpy as np

from . import _kernels_py
from .hardcore import Activity, occupation_prob, path_fill_probs

_choice = os.environ.get("SPATIALPERM_BACKEND", "").strip().lower()
if _choice in ("", "c"):
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "c"
    except ImportError:
        if _choice == "c":
            raise
        _impl = _kernels_py
        BACKEND = "py"
elif _choice == "py":
    _impl = _kernels_py
    BACKEND = "py"
else:
    raise RuntimeError(f"SPATIALPERM_BACKEND must be 'c' or 'py', got {_choice!r}")


def backend_name() -> str:
    return BACKEND


def occupation_tables(m: int, act: Activity):
    """Branch-indexed conditional fill probabilities for column sampling.

    Row 0: site 0 vacant, the rest of the column is a path of m-1 sites.
    Row 1: site 0 occupied, sites 1 and m-1 are blocked and the middle is
    a path of m-3 sites.  Entry [b, s] is P[site s occupied | previous
    site vacant] in branch b.
    """
    probs = path_fill_probs(m - 1, act)
    thresh = np.zeros((2, m))
    for s in range(1, m):
        thresh[0, s] = probs[m - s]
    for s in range(2, m - 1):
        thresh[1, s] = probs[m - s - 1]
    p0 = occupation_prob(m, act)
    return p0, thresh


def sample_occupation(m: int, n_cols: int, act: Activity, key: int) -> np.ndarray:
    p0, thresh = occupation_tables(m, act)
    return _impl.sample_occupation(m, n_cols, p0, thresh, np.uint64(key))


def sample_return_map(m: int, n_cols: int, act: Activity, key: int) -> np.ndarray:
    p0, thresh = occupation_tables(m, act)
    return np.asarray(
        _impl.sample_return_map(m, n_cols, p0, thresh, np.uint64(key)), dtype=np.int64
    )


def compose_return_map(occ: np.ndarray) -> np.ndarray:
    occ = np.ascontiguousarray(occ, dtype=np.int8)
    return np.asarray(_impl.compose_return_map(occ), dtype=np.int64)


def pair_contact_counts(occ: np.ndarray, tid_start: np.ndarray, n_tr: int):
    occ = np.ascontiguousarray(occ, dtype=np.int8)
    tid_start = np.ascontiguousarray(tid_start, dtype=np.int64)
    counts, total = _impl.pair_contact_counts(occ, tid_start, n_tr)
    return np.asarray(counts, dtype=np.int64), int(total)


def glauber_run(occ, psi, psi_inv, cycle_count, lam, key, n_steps,
                start_step, track, record, every=1):
    return _impl.glauber_run(
        occ, psi, psi_inv, int(cycle_count), float(lam), np.uint64(key),
        int(n_steps), int(start_step), bool(track), bool(record), int(every),
    )


def glauber_probe(occ, row_cycle, lam, key, n_probes):
    occ = np.ascontiguousarray(occ, dtype=np.int8)
    row_cycle = np.ascontiguousarray(row_cycle, dtype=np.int64)
    return _impl.glauber_probe(occ, row_cycle, float(lam), np.uint64(key), int(n_probes))


def gapchain_hits(rows, i_max, z0, j2, n_reps, key, max_steps=1 << 31):
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    return _impl.gapchain_hits(rows, int(i_max), int(z0), int(j2),
                               int(n_reps), np.uint64(key), int(max_steps))


def gapchain_local_times(rows, i_max, z0, stop_lo, n_reps, key, max_steps=1 << 31):
    rows = np.ascontiguousarray(rows, dtype=np.float64)
    return _impl.gapchain_local_times(rows, int(i_max), int(z0), int(stop_lo),
                                      int(n_reps), np.uint64(key), int(max_steps))
