# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch sampling kernels.

Twin of derange._kernels_py with identical stream consumption: every kernel
pulls raw doubles from the BitGenerator in the same order as the numpy
implementation pulls them through Generator.random, so both produce
bit-identical batches from the same (seed, stream_id).
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.stdint cimport int32_t, int64_t
from numpy.random cimport bitgen_t

cnp.import_array()


cdef bitgen_t *_bitgen_ptr(object bitgen) except NULL:
    return <bitgen_t *> PyCapsule_GetPointer(bitgen.capsule, "BitGenerator")


def chain_batch(object bitgen, double[::1] pcols, int n, long long reps):
    """Sample `reps` rows of ordered cycle lengths from the chain.

    Returns (lengths int32, offsets int64); see the numpy twin for the
    column/probability layout.
    """
    cdef bitgen_t *bg = _bitgen_ptr(bitgen)
    cdef int ncols = pcols.shape[0]
    cdef int c, state, last, i, emit, row_max
    cdef double u, est_row

    # mean writes per row is 1 + expected emits, bounded by 1 + sum(pcols);
    # sizing from that keeps growth copies out of the hot path at any theta
    est_row = 1.0
    for c in range(ncols):
        est_row += pcols[c]
    cdef int64_t cap = <int64_t> (reps * (est_row * 1.25 + 2.0)) + 16
    cdef cnp.ndarray buf_arr = np.empty(cap, dtype=np.int32)
    cdef int32_t[::1] buf = buf_arr
    cdef cnp.ndarray offs_arr = np.empty(reps + 1, dtype=np.int64)
    cdef int64_t[::1] offs = offs_arr
    cdef int64_t pos = 0
    cdef int64_t s

    row_max = n // 2 + 1
    offs[0] = 0
    for s in range(reps):
        if pos + row_max > cap:
            cap = 2 * cap + row_max
            new_arr = np.empty(cap, dtype=np.int32)
            new_arr[:pos] = buf_arr[:pos]
            buf_arr = new_arr
            buf = buf_arr
        state = 0
        last = n + 1
        for c in range(ncols):
            u = bg.next_double(bg.state)
            # branchless update keeps the per-step cost flat in theta: the
            # write lands in the next free slot and only commits on an emit
            i = n - 1 - c
            emit = (state == 0) & (u < pcols[c])
            buf[pos] = last - i
            pos += emit
            last -= emit * (last - i)
            state = emit
        buf[pos] = last - 1
        pos += 1
        offs[s + 1] = pos
    return buf_arr[:pos].copy(), offs_arr


def feller_batch(object bitgen, double[::1] pcols, int n, long long want,
                 long long max_attempts):
    """Rejection-sample `want` rows from Bernoulli spacings.

    Every attempt consumes exactly n-1 doubles even when rejection is
    already decided, to keep stream parity with the numpy twin.  Returns
    (lengths int32, offsets int64, attempts int64, total int).
    """
    cdef bitgen_t *bg = _bitgen_ptr(bitgen)
    cdef int ncols = pcols.shape[0]
    cdef int64_t cap = want * 3 + 16
    cdef cnp.ndarray buf_arr = np.empty(cap, dtype=np.int32)
    cdef int32_t[::1] buf = buf_arr
    cdef cnp.ndarray offs_arr = np.zeros(want + 1, dtype=np.int64)
    cdef int64_t[::1] offs = offs_arr
    cdef cnp.ndarray att_arr = np.empty(want, dtype=np.int64)
    cdef int64_t[::1] att = att_arr
    cdef cnp.ndarray ones_arr = np.empty(n + 2, dtype=np.int32)
    cdef int32_t[::1] ones = ones_arr
    cdef int64_t pos = 0, accepted = 0, attempts = 0, since_last = 0
    cdef int c, prev, xi, bad, cnt, k, p, row_max
    cdef double u

    row_max = n // 2 + 1
    while accepted < want and attempts < max_attempts:
        attempts += 1
        since_last += 1
        prev = 1
        bad = 0
        cnt = 0
        for c in range(ncols):
            u = bg.next_double(bg.state)
            xi = 1 if u < pcols[c] else 0
            if xi == 1:
                if prev == 1:
                    bad = 1
                ones[cnt] = c + 2
                cnt += 1
            prev = xi
        if prev == 1:
            bad = 1
        if bad:
            continue
        if pos + row_max > cap:
            cap = 2 * cap + row_max
            new_arr = np.empty(cap, dtype=np.int32)
            new_arr[:pos] = buf_arr[:pos]
            buf_arr = new_arr
            buf = buf_arr
        p = n + 1
        for k in range(cnt - 1, -1, -1):
            buf[pos] = p - ones[k]
            pos += 1
            p = ones[k]
        buf[pos] = p - 1  # down to the closing 1 at position 1
        pos += 1
        att[accepted] = since_last
        since_last = 0
        accepted += 1
        offs[accepted] = pos
    return (
        buf_arr[:pos].copy(),
        offs_arr[: accepted + 1].copy(),
        att_arr[:accepted].copy(),
        int(attempts),
    )


def poisson_batch(object bitgen, double[::1] cdf_flat, int64_t[::1] cdf_offs,
                  int n, long long want, long long max_attempts):
    """Rejection-sample `want` rows from tilted Poisson counts via CDF
    inversion, accepting when the length-weighted sum hits n.

    Row lengths come out ascending.  Return layout matches feller_batch.
    """
    cdef bitgen_t *bg = _bitgen_ptr(bitgen)
    cdef int ncols = n - 1
    cdef int64_t cap = want * 3 + 16
    cdef cnp.ndarray buf_arr = np.empty(cap, dtype=np.int32)
    cdef int32_t[::1] buf = buf_arr
    cdef cnp.ndarray offs_arr = np.zeros(want + 1, dtype=np.int64)
    cdef int64_t[::1] offs = offs_arr
    cdef cnp.ndarray att_arr = np.empty(want, dtype=np.int64)
    cdef int64_t[::1] att = att_arr
    cdef cnp.ndarray z_arr = np.empty(max(ncols, 1), dtype=np.int32)
    cdef int32_t[::1] z = z_arr
    cdef int64_t pos = 0, accepted = 0, attempts = 0, since_last = 0
    cdef int64_t off, hi
    cdef int c, k, total, r, row_max
    cdef double u

    row_max = n // 2 + 1
    while accepted < want and attempts < max_attempts:
        attempts += 1
        since_last += 1
        total = 0
        for c in range(ncols):
            u = bg.next_double(bg.state)
            off = cdf_offs[c]
            hi = cdf_offs[c + 1]
            k = 0
            while off + k < hi and u >= cdf_flat[off + k]:
                k += 1
            z[c] = k
            total += (c + 2) * k
        if total != n:
            continue
        if pos + row_max > cap:
            cap = 2 * cap + row_max
            new_arr = np.empty(cap, dtype=np.int32)
            new_arr[:pos] = buf_arr[:pos]
            buf_arr = new_arr
            buf = buf_arr
        for c in range(ncols):
            for r in range(z[c]):
                buf[pos] = c + 2
                pos += 1
        att[accepted] = since_last
        since_last = 0
        accepted += 1
        offs[accepted] = pos
    return (
        buf_arr[:pos].copy(),
        offs_arr[: accepted + 1].copy(),
        att_arr[:accepted].copy(),
        int(attempts),
    )
