"""Pure-python/numpy twins of the compiled kernels.

Every function here consumes exactly the same splitmix64 counter streams
as its compiled counterpart in ``_kernels.pyx``, draw for draw, so the two
backends produce bit-identical results.  The compiled core is selected at
import time by :mod:`spatialperm.kernels`; this module is the fallback and
the readable reference.

Stream layout (keys derived with :func:`spatialperm.streams.subkey`):

* column sampling: one child stream per column, counter = site index,
  one uniform per site whether used or not;
* Glauber runs: a single stream, three uniforms per update step
  (column, dual site, acceptance) at counters 3t, 3t+1, 3t+2;
* gap-chain runs: one child stream per replica, counter = step index.
"""

from __future__ import annotations

import numpy as np

from .streams import stream_unit, stream_unit_np, subkey, subkeys_np

BACKEND_NAME = "python"


# ---------------------------------------------------------------------------
# hard-core column sampling

def sample_occupation(m, n_cols, p0, thresh, key):
    """Sample ``n_cols`` independent hard-core columns; occ is (n_cols, m).

    ``p0`` is the occupation probability of site 0 on the cycle; ``thresh``
    is the (2, m) table of conditional fill probabilities (row 0 for the
    vacant-start branch, row 1 for the occupied-start branch).
    """
    keys = subkeys_np(key, np.arange(n_cols))
    occ = np.zeros((n_cols, m), dtype=np.int8)
    u = stream_unit_np(keys, 0)
    occ[:, 0] = u < p0
    branch = occ[:, 0].astype(np.intp)
    prev = occ[:, 0].copy()
    for s in range(1, m):
        u = stream_unit_np(keys, s)
        t = thresh[branch, s]
        hit = (prev == 0) & (u < t)
        occ[:, s] = hit
        prev = occ[:, s]
    return occ


def _psi_column(occ_col, m):
    arrows = occ_col.astype(np.int64) - np.roll(occ_col, 1).astype(np.int64)
    return (np.arange(m) + arrows + 1) % m


def compose_return_map(occ):
    """Row map of one full horizontal wrap, composed column by column."""
    n_cols, m = occ.shape
    perm = np.arange(m)
    for j in range(n_cols):
        perm = _psi_column(occ[j], m)[perm]
    return perm


def sample_return_map(m, n_cols, p0, thresh, key):
    """Fused sample + compose (the compiled core avoids storing occ)."""
    occ = sample_occupation(m, n_cols, p0, thresh, key)
    return compose_return_map(occ)


# ---------------------------------------------------------------------------
# traversal labeling and contact pair counts

def pair_contact_counts(occ, tid_start, n_tr):
    """Count contacts per unordered traversal pair in one column pass.

    ``tid_start[r]`` labels the strand starting at row r of column 0 with
    its traversal id (or -1 for strands in a fractional remainder).
    Returns (counts, total) where ``counts`` is an (n_tr, n_tr) int64
    matrix, upper triangle for cross-traversal pairs, diagonal for
    self-contacts of a traversal, and ``total`` is the number of contact
    sites on the torus.
    """
    n_cols, m = occ.shape
    pos = np.arange(m)
    lab = np.empty(m, dtype=np.int64)
    flat = np.zeros(n_tr * n_tr, dtype=np.int64)
    total = 0
    pending = []
    pending_size = 0
    for j in range(n_cols):
        col = occ[j]
        lab[pos] = tid_start
        left = np.roll(col, 1)
        right = np.roll(col, -1)
        contact = (col == 1) | ((left == 0) & (col == 0) & (right == 0))
        total += int(contact.sum())
        t1 = lab[contact]
        t2 = np.roll(lab, -1)[contact]
        ok = (t1 >= 0) & (t2 >= 0)
        t1, t2 = t1[ok], t2[ok]
        lo = np.minimum(t1, t2)
        hi = np.maximum(t1, t2)
        pending.append(lo * n_tr + hi)
        pending_size += len(lo)
        if pending_size >= 1 << 20:
            flat += np.bincount(np.concatenate(pending), minlength=n_tr * n_tr)
            pending, pending_size = [], 0
        pos = _psi_column(col, m)[pos]
    if pending:
        flat += np.bincount(np.concatenate(pending), minlength=n_tr * n_tr)
    return flat.reshape(n_tr, n_tr), total


# ---------------------------------------------------------------------------
# Glauber dynamics

def _walk_to_col0(occ, j, r, n_cols, m):
    """Follow arrows from (column j, row r) forward to column 0."""
    for jj in range(j, n_cols):
        col = occ[jj]
        r = (r + col[r] - col[r - 1] + 1) % m
    return int(r)


def _psi_same_cycle(psi, u0, v0):
    cur = psi[u0]
    while cur != u0 and cur != v0:
        cur = psi[cur]
    return cur == v0


def glauber_run(occ, psi, psi_inv, cycle_count, lam, key, n_steps,
                start_step, track, record, every):
    """Run ``n_steps`` single-site updates in place.

    Returns (cycle_count, stats, records) where stats is the int64 triple
    (blocked, accepted, changed) and records is None or the columnar
    tuple (step, column, site, proposal, accepted, effect, count_after).
    Effect codes: 0 none, 1 split, 2 merge.
    """
    key = int(key)
    n_cols, m = occ.shape
    p_occ = lam / (1.0 + lam)
    blocked = accepted = changed = 0
    rec = None
    w = 0
    if record:
        n_rec = (n_steps + every - 1) // every
        rec = (
            np.empty(n_rec, dtype=np.int64),
            np.empty(n_rec, dtype=np.int32),
            np.empty(n_rec, dtype=np.int32),
            np.empty(n_rec, dtype=np.int8),
            np.empty(n_rec, dtype=np.int8),
            np.empty(n_rec, dtype=np.int8),
            np.empty(n_rec, dtype=np.int64),
        )
    for i in range(n_steps):
        t = start_step + i
        j = int(stream_unit(key, 3 * t) * n_cols)
        k = int(stream_unit(key, 3 * t + 1) * m)
        u = stream_unit(key, 3 * t + 2)
        col = occ[j]
        effect = 0
        if col[(k - 1) % m] or col[(k + 1) % m]:
            blocked += 1
            proposal = 0
            acc = 0
        else:
            acc = 1
            accepted += 1
            new = 1 if u < p_occ else 0
            proposal = new
            if new != col[k]:
                changed += 1
                if track:
                    u0 = (k + 1) % m
                    v0 = (k + 2) % m
                    if j + 1 < n_cols:
                        u0 = _walk_to_col0(occ, j + 1, u0, n_cols, m)
                        v0 = _walk_to_col0(occ, j + 1, v0, n_cols, m)
                    if _psi_same_cycle(psi, u0, v0):
                        effect = 1
                        cycle_count += 1
                    else:
                        effect = 2
                        cycle_count -= 1
                    xu = psi_inv[u0]
                    xv = psi_inv[v0]
                    psi[xu] = v0
                    psi[xv] = u0
                    psi_inv[v0] = xu
                    psi_inv[u0] = xv
                col[k] = new
        if record and i % every == 0:
            rec[0][w] = t
            rec[1][w] = j
            rec[2][w] = k
            rec[3][w] = proposal
            rec[4][w] = acc
            rec[5][w] = effect
            rec[6][w] = cycle_count if track else -1
            w += 1
    if record:
        rec = tuple(a[:w] for a in rec)
    return cycle_count, (blocked, accepted, changed), rec


def glauber_probe(occ, row_cycle, lam, key, n_probes):
    """One-step selection probes of a frozen state (no mutation).

    For each probe, draw an update exactly as :func:`glauber_run` would;
    when it would change the state, report the pair of cycles touched
    (snapshot ids from ``row_cycle``, indexed by column-0 row) and the
    effect.  Returns (cyc_a, cyc_b, effect) arrays of length n_probes
    with -1/-1/0 rows for probes that would not change the state.
    """
    key = int(key)
    n_cols, m = occ.shape
    p_occ = lam / (1.0 + lam)
    cyc_a = np.full(n_probes, -1, dtype=np.int64)
    cyc_b = np.full(n_probes, -1, dtype=np.int64)
    effect = np.zeros(n_probes, dtype=np.int8)
    for t in range(n_probes):
        j = int(stream_unit(key, 3 * t) * n_cols)
        k = int(stream_unit(key, 3 * t + 1) * m)
        u = stream_unit(key, 3 * t + 2)
        col = occ[j]
        if col[(k - 1) % m] or col[(k + 1) % m]:
            continue
        new = 1 if u < p_occ else 0
        if new == col[k]:
            continue
        u0 = (k + 1) % m
        v0 = (k + 2) % m
        if j + 1 < n_cols:
            u0 = _walk_to_col0(occ, j + 1, u0, n_cols, m)
            v0 = _walk_to_col0(occ, j + 1, v0, n_cols, m)
        ca = int(row_cycle[u0])
        cb = int(row_cycle[v0])
        cyc_a[t] = min(ca, cb)
        cyc_b[t] = max(ca, cb)
        effect[t] = 1 if ca == cb else 2
    return cyc_a, cyc_b, effect


# ---------------------------------------------------------------------------
# ideal gap chain trajectories

def _gap_rows_cdf(rows):
    return np.cumsum(rows, axis=1)


def gapchain_hits(rows, i_max, z0, j2, n_reps, key, max_steps):
    """Per replica: 1 if the chain reaches >= j2 before visiting 1."""
    cdf = _gap_rows_cdf(rows)
    keys = subkeys_np(key, np.arange(n_reps))
    state = np.full(n_reps, z0, dtype=np.int64)
    out = np.zeros(n_reps, dtype=np.int8)
    active = np.ones(n_reps, dtype=bool)
    if z0 >= j2:
        return np.ones(n_reps, dtype=np.int8)
    for t in range(max_steps):
        if not active.any():
            return out
        idx = np.nonzero(active)[0]
        u = stream_unit_np(keys[idx], t)
        s = np.minimum(state[idx], i_max + 1)
        jump = (u[:, None] >= cdf[s, :4]).sum(axis=1) - 2
        ns = state[idx] + jump
        state[idx] = ns
        hit_top = ns >= j2
        hit_bot = ns == 1
        out[idx[hit_top]] = 1
        active[idx[hit_top | hit_bot]] = False
    raise RuntimeError(f"gap chain not absorbed within {max_steps} steps")


def gapchain_local_times(rows, i_max, z0, stop_lo, n_reps, key, max_steps):
    """Visits to state 1 before the chain first reaches >= stop_lo."""
    cdf = _gap_rows_cdf(rows)
    keys = subkeys_np(key, np.arange(n_reps))
    state = np.full(n_reps, z0, dtype=np.int64)
    counts = np.zeros(n_reps, dtype=np.int64)
    active = np.ones(n_reps, dtype=bool)
    if z0 >= stop_lo:
        return counts
    counts[state == 1] += 1
    for t in range(max_steps):
        if not active.any():
            return counts
        idx = np.nonzero(active)[0]
        u = stream_unit_np(keys[idx], t)
        s = np.minimum(state[idx], i_max + 1)
        jump = (u[:, None] >= cdf[s, :4]).sum(axis=1) - 2
        ns = state[idx] + jump
        state[idx] = ns
        stopped = ns >= stop_lo
        counts[idx[(ns == 1) & ~stopped]] += 1
        active[idx[stopped]] = False
    raise RuntimeError(f"gap chain not absorbed within {max_steps} steps")
