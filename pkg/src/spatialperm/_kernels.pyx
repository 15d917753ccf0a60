# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels.

Mirrors ``_kernels_py`` function for function; both consume the same
splitmix64 counter streams, so outputs are bit-identical across backends.
See ``_kernels_py`` for the stream layout documentation.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport int8_t, int32_t, int64_t, uint64_t

cnp.import_array()

BACKEND_NAME = "c"

cdef extern from *:
    """
    static inline uint64_t spx_mix64(uint64_t z) {
        z ^= z >> 30; z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27; z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }
    static inline uint64_t spx_stream_u64(uint64_t key, uint64_t counter) {
        return spx_mix64(key + (counter + 1ULL) * 0x9E3779B97F4A7C15ULL);
    }
    static inline double spx_stream_unit(uint64_t key, uint64_t counter) {
        return (double)(spx_stream_u64(key, counter) >> 11) * (1.0 / 9007199254740992.0);
    }
    static inline uint64_t spx_subkey(uint64_t key, uint64_t index) {
        return spx_mix64(key ^ ((index + 1ULL) * 0xD2B74407B1CE6E93ULL));
    }
    """
    uint64_t spx_mix64(uint64_t z) nogil
    uint64_t spx_stream_u64(uint64_t key, uint64_t counter) nogil
    double spx_stream_unit(uint64_t key, uint64_t counter) nogil
    uint64_t spx_subkey(uint64_t key, uint64_t index) nogil


cdef inline void _sample_column_into(int8_t* col, Py_ssize_t m, double p0,
                                     const double* thresh, uint64_t key_j) noexcept nogil:
    cdef Py_ssize_t s
    cdef int branch, prev
    cdef double u
    u = spx_stream_unit(key_j, 0)
    if u < p0:
        col[0] = 1
        branch = 1
        prev = 1
    else:
        col[0] = 0
        branch = 0
        prev = 0
    for s in range(1, m):
        u = spx_stream_unit(key_j, <uint64_t>s)
        if prev == 0 and u < thresh[branch * m + s]:
            col[s] = 1
            prev = 1
        else:
            col[s] = 0
            prev = 0


def sample_occupation(Py_ssize_t m, Py_ssize_t n_cols, double p0,
                      cnp.ndarray[cnp.float64_t, ndim=2] thresh, key):
    cdef uint64_t k64 = <uint64_t>int(key)
    cdef cnp.ndarray[cnp.int8_t, ndim=2] occ = np.zeros((n_cols, m), dtype=np.int8)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] th = np.ascontiguousarray(thresh)
    cdef Py_ssize_t j
    with nogil:
        for j in range(n_cols):
            _sample_column_into(&occ[j, 0], m, p0, &th[0, 0],
                                spx_subkey(k64, <uint64_t>j))
    return occ


cdef inline int64_t _psi_apply(const int8_t* col, Py_ssize_t m, int64_t r) noexcept nogil:
    # one column of the return map: r -> r + arrow(r) + 1 (mod m)
    cdef int64_t a = col[r] - col[(r - 1 + m) % m]
    return (r + a + 1 + m) % m


def compose_return_map(cnp.ndarray[cnp.int8_t, ndim=2] occ):
    cdef Py_ssize_t n_cols = occ.shape[0]
    cdef Py_ssize_t m = occ.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] perm = np.arange(m, dtype=np.int64)
    cdef Py_ssize_t j, r
    with nogil:
        for j in range(n_cols):
            for r in range(m):
                perm[r] = _psi_apply(&occ[j, 0], m, perm[r])
    return perm


def sample_return_map(Py_ssize_t m, Py_ssize_t n_cols, double p0,
                      cnp.ndarray[cnp.float64_t, ndim=2] thresh, key):
    cdef uint64_t k64 = <uint64_t>int(key)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] th = np.ascontiguousarray(thresh)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] perm = np.arange(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] col = np.zeros(m, dtype=np.int8)
    cdef Py_ssize_t j, r
    with nogil:
        for j in range(n_cols):
            _sample_column_into(&col[0], m, p0, &th[0, 0],
                                spx_subkey(k64, <uint64_t>j))
            for r in range(m):
                perm[r] = _psi_apply(&col[0], m, perm[r])
    return perm


def pair_contact_counts(cnp.ndarray[cnp.int8_t, ndim=2] occ,
                        cnp.ndarray[cnp.int64_t, ndim=1] tid_start,
                        Py_ssize_t n_tr):
    cdef Py_ssize_t n_cols = occ.shape[0]
    cdef Py_ssize_t m = occ.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] pos = np.arange(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] lab = np.empty(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=2] counts = np.zeros((n_tr, n_tr), dtype=np.int64)
    cdef int64_t total = 0
    cdef Py_ssize_t j, r, k, kp1
    cdef int64_t t1, t2, lo, hi
    cdef int contact
    cdef int8_t* col
    with nogil:
        for j in range(n_cols):
            col = &occ[j, 0]
            for r in range(m):
                lab[pos[r]] = tid_start[r]
            for k in range(m):
                kp1 = (k + 1) % m
                if col[k] == 1:
                    contact = 1
                elif col[(k - 1 + m) % m] == 0 and col[k] == 0 and col[kp1] == 0:
                    contact = 1
                else:
                    contact = 0
                if contact:
                    total += 1
                    t1 = lab[k]
                    t2 = lab[kp1]
                    if t1 >= 0 and t2 >= 0:
                        if t1 <= t2:
                            lo = t1; hi = t2
                        else:
                            lo = t2; hi = t1
                        counts[lo, hi] += 1
            for r in range(m):
                pos[r] = _psi_apply(col, m, pos[r])
    return counts, total


cdef inline int64_t _walk_to_col0(int8_t* occ, Py_ssize_t n_cols, Py_ssize_t m,
                                  Py_ssize_t j, int64_t r) noexcept nogil:
    cdef Py_ssize_t jj
    for jj in range(j, n_cols):
        r = _psi_apply(occ + jj * m, m, r)
    return r


cdef inline int _psi_same_cycle(int64_t* psi, int64_t u0, int64_t v0) noexcept nogil:
    cdef int64_t cur = psi[u0]
    while cur != u0 and cur != v0:
        cur = psi[cur]
    return cur == v0


def glauber_run(cnp.ndarray[cnp.int8_t, ndim=2] occ,
                cnp.ndarray[cnp.int64_t, ndim=1] psi,
                cnp.ndarray[cnp.int64_t, ndim=1] psi_inv,
                int64_t cycle_count, double lam, key,
                int64_t n_steps, int64_t start_step,
                bint track, bint record, int64_t every):
    cdef uint64_t k64 = <uint64_t>int(key)
    cdef Py_ssize_t n_cols = occ.shape[0]
    cdef Py_ssize_t m = occ.shape[1]
    cdef double p_occ = lam / (1.0 + lam)
    cdef int64_t blocked = 0, accepted = 0, changed = 0
    cdef int64_t i, t, u0, v0, xu, xv
    cdef Py_ssize_t j, k
    cdef int new, acc, proposal, effect
    cdef double u
    cdef int8_t* col

    cdef cnp.ndarray[cnp.int64_t, ndim=1] r_step
    cdef cnp.ndarray[cnp.int32_t, ndim=1] r_col, r_site
    cdef cnp.ndarray[cnp.int8_t, ndim=1] r_prop, r_acc, r_eff
    cdef cnp.ndarray[cnp.int64_t, ndim=1] r_count
    cdef int64_t n_rec = 0, w = 0
    if record:
        n_rec = (n_steps + every - 1) // every
    r_step = np.empty(n_rec, dtype=np.int64)
    r_col = np.empty(n_rec, dtype=np.int32)
    r_site = np.empty(n_rec, dtype=np.int32)
    r_prop = np.empty(n_rec, dtype=np.int8)
    r_acc = np.empty(n_rec, dtype=np.int8)
    r_eff = np.empty(n_rec, dtype=np.int8)
    r_count = np.empty(n_rec, dtype=np.int64)

    with nogil:
        for i in range(n_steps):
            t = start_step + i
            j = <Py_ssize_t>(spx_stream_unit(k64, <uint64_t>(3 * t)) * n_cols)
            k = <Py_ssize_t>(spx_stream_unit(k64, <uint64_t>(3 * t + 1)) * m)
            u = spx_stream_unit(k64, <uint64_t>(3 * t + 2))
            col = &occ[j, 0]
            effect = 0
            if col[(k - 1 + m) % m] or col[(k + 1) % m]:
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
                            u0 = _walk_to_col0(&occ[0, 0], n_cols, m, j + 1, u0)
                            v0 = _walk_to_col0(&occ[0, 0], n_cols, m, j + 1, v0)
                        if _psi_same_cycle(&psi[0], u0, v0):
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
                    col[k] = <int8_t>new
            if record and i % every == 0:
                r_step[w] = t
                r_col[w] = <int32_t>j
                r_site[w] = <int32_t>k
                r_prop[w] = <int8_t>proposal
                r_acc[w] = <int8_t>acc
                r_eff[w] = <int8_t>effect
                r_count[w] = cycle_count if track else -1
                w += 1

    stats = (int(blocked), int(accepted), int(changed))
    if record:
        rec = (r_step[:w], r_col[:w], r_site[:w], r_prop[:w], r_acc[:w],
               r_eff[:w], r_count[:w])
    else:
        rec = None
    return int(cycle_count), stats, rec


def glauber_probe(cnp.ndarray[cnp.int8_t, ndim=2] occ,
                  cnp.ndarray[cnp.int64_t, ndim=1] row_cycle,
                  double lam, key, int64_t n_probes):
    cdef uint64_t k64 = <uint64_t>int(key)
    cdef Py_ssize_t n_cols = occ.shape[0]
    cdef Py_ssize_t m = occ.shape[1]
    cdef double p_occ = lam / (1.0 + lam)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cyc_a = np.full(n_probes, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] cyc_b = np.full(n_probes, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] effect = np.zeros(n_probes, dtype=np.int8)
    cdef int64_t t, u0, v0, ca, cb
    cdef Py_ssize_t j, k
    cdef int new
    cdef double u
    cdef int8_t* col
    with nogil:
        for t in range(n_probes):
            j = <Py_ssize_t>(spx_stream_unit(k64, <uint64_t>(3 * t)) * n_cols)
            k = <Py_ssize_t>(spx_stream_unit(k64, <uint64_t>(3 * t + 1)) * m)
            u = spx_stream_unit(k64, <uint64_t>(3 * t + 2))
            col = &occ[j, 0]
            if col[(k - 1 + m) % m] or col[(k + 1) % m]:
                continue
            new = 1 if u < p_occ else 0
            if new == col[k]:
                continue
            u0 = (k + 1) % m
            v0 = (k + 2) % m
            if j + 1 < n_cols:
                u0 = _walk_to_col0(&occ[0, 0], n_cols, m, j + 1, u0)
                v0 = _walk_to_col0(&occ[0, 0], n_cols, m, j + 1, v0)
            ca = row_cycle[u0]
            cb = row_cycle[v0]
            if ca <= cb:
                cyc_a[t] = ca; cyc_b[t] = cb
            else:
                cyc_a[t] = cb; cyc_b[t] = ca
            effect[t] = 1 if ca == cb else 2
    return cyc_a, cyc_b, effect


def gapchain_hits(cnp.ndarray[cnp.float64_t, ndim=2] rows, int64_t i_max,
                  int64_t z0, int64_t j2, int64_t n_reps, key, int64_t max_steps):
    cdef uint64_t k64 = <uint64_t>int(key)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cdf = np.cumsum(rows, axis=1)
    cdef cnp.ndarray[cnp.int8_t, ndim=1] out = np.zeros(n_reps, dtype=np.int8)
    cdef int64_t r, t, state, s, jump
    cdef uint64_t key_r
    cdef double u
    cdef int q
    if z0 >= j2:
        out[:] = 1
        return out
    with nogil:
        for r in range(n_reps):
            key_r = spx_subkey(k64, <uint64_t>r)
            state = z0
            for t in range(max_steps):
                u = spx_stream_unit(key_r, <uint64_t>t)
                s = state if state <= i_max + 1 else i_max + 1
                jump = -2
                for q in range(4):
                    if u >= cdf[s, q]:
                        jump += 1
                state += jump
                if state >= j2:
                    out[r] = 1
                    break
                if state == 1:
                    break
            else:
                with gil:
                    raise RuntimeError(f"gap chain not absorbed within {max_steps} steps")
    return out


def gapchain_local_times(cnp.ndarray[cnp.float64_t, ndim=2] rows, int64_t i_max,
                         int64_t z0, int64_t stop_lo, int64_t n_reps, key,
                         int64_t max_steps):
    cdef uint64_t k64 = <uint64_t>int(key)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] cdf = np.cumsum(rows, axis=1)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts = np.zeros(n_reps, dtype=np.int64)
    cdef int64_t r, t, state, s, jump
    cdef uint64_t key_r
    cdef double u
    cdef int q
    if z0 >= stop_lo:
        return counts
    with nogil:
        for r in range(n_reps):
            key_r = spx_subkey(k64, <uint64_t>r)
            state = z0
            if state == 1:
                counts[r] += 1
            for t in range(max_steps):
                u = spx_stream_unit(key_r, <uint64_t>t)
                s = state if state <= i_max + 1 else i_max + 1
                jump = -2
                for q in range(4):
                    if u >= cdf[s, q]:
                        jump += 1
                state += jump
                if state >= stop_lo:
                    break
                if state == 1:
                    counts[r] += 1
            else:
                with gil:
                    raise RuntimeError(f"gap chain not absorbed within {max_steps} steps")
    return counts
