# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of ``_pykernels``; same signatures, same results."""
import numpy as np
cimport numpy as cnp
from libc.stdint cimport int8_t, int16_t, int32_t, int64_t, uint8_t, uint16_t, uint32_t

cnp.import_array()


def rr_repair(const int64_t[:] fr, const int64_t[:] fc, int n_rows):
    cdef Py_ssize_t i, n = fr.shape[0]
    cdef int64_t[:] counts = np.zeros(n_rows, dtype=np.int64)
    out = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[:] o = out
    for i in range(n):
        counts[fr[i]] += 1
    for i in range(n):
        if counts[fr[i]] == 1:
            o[i] = 1
    return out


def cr_repair(const int64_t[:] fr, const int64_t[:] fc, int n_cols):
    cdef Py_ssize_t i, n = fr.shape[0]
    cdef uint8_t[:] used = np.zeros(n_cols, dtype=np.uint8)
    out = np.zeros(n, dtype=np.uint8)
    cdef uint8_t[:] o = out
    for i in range(n):
        if not used[fc[i]]:
            used[fc[i]] = 1
            o[i] = 1
    return out


def augment_match(const int64_t[:] cand0, const int64_t[:] cand1, int n_spares):
    cdef Py_ssize_t n = cand0.shape[0]
    cdef Py_ssize_t f, depth, i
    cdef int64_t g, s, slot, found
    cdef int64_t[:] owner = np.full(n_spares, -1, dtype=np.int64)
    cdef uint8_t[:] seen = np.zeros(n_spares, dtype=np.uint8)
    # depth never exceeds n_spares + 1
    cdef int64_t[:] st_fault = np.empty(n_spares + 2, dtype=np.int64)
    cdef int64_t[:] st_slot = np.empty(n_spares + 2, dtype=np.int64)
    cdef int64_t[:] path = np.empty(n_spares + 2, dtype=np.int64)
    assign_arr = np.full(n, -1, dtype=np.int64)
    cdef int64_t[:] assign = assign_arr
    for f in range(n):
        seen[:] = 0
        depth = 1
        st_fault[0] = f
        st_slot[0] = 0
        found = -1
        while depth > 0:
            g = st_fault[depth - 1]
            slot = st_slot[depth - 1]
            if slot >= 2:
                depth -= 1
                continue
            st_slot[depth - 1] = slot + 1
            s = cand0[g] if slot == 0 else cand1[g]
            if s < 0 or seen[s]:
                continue
            seen[s] = 1
            path[depth - 1] = s
            if owner[s] < 0:
                found = s
                break
            st_fault[depth] = owner[s]
            st_slot[depth] = 0
            depth += 1
        if found < 0:
            continue
        for i in range(depth):
            owner[path[i]] = st_fault[i]
            assign[st_fault[i]] = path[i]
    return assign_arr


def surviving_prefix(const int64_t[:] fc, const uint8_t[:] repaired, int n_cols):
    cdef Py_ssize_t i
    cdef int64_t best = n_cols
    for i in range(fc.shape[0]):
        if not repaired[i] and fc[i] < best:
            best = fc[i]
    return int(best)


def place_clustered(const int64_t[:] center_idx, const int64_t[:, :, :] offsets,
                    const int64_t[:, :] centers, const double[:] fallback_u,
                    int rows, int cols):
    cdef Py_ssize_t n = center_idx.shape[0]
    cdef Py_ssize_t attempts = offsets.shape[1]
    cdef Py_ssize_t i, a, j
    cdef int64_t r, c, cr, cc, cell, k, free = rows * cols
    cdef uint8_t[:] taken = np.zeros(rows * cols, dtype=np.uint8)
    out_r_arr = np.empty(n, dtype=np.int64)
    out_c_arr = np.empty(n, dtype=np.int64)
    cdef int64_t[:] out_r = out_r_arr
    cdef int64_t[:] out_c = out_c_arr
    for i in range(n):
        cr = centers[center_idx[i], 0]
        cc = centers[center_idx[i], 1]
        cell = -1
        for a in range(attempts):
            r = cr + offsets[i, a, 0]
            c = cc + offsets[i, a, 1]
            if 0 <= r < rows and 0 <= c < cols and not taken[r * cols + c]:
                cell = r * cols + c
                break
        if cell < 0:
            k = <int64_t>(fallback_u[i] * free)
            if k >= free:
                k = free - 1
            for j in range(rows * cols):
                if not taken[j]:
                    if k == 0:
                        cell = j
                        break
                    k -= 1
        taken[cell] = 1
        free -= 1
        out_r[i] = cell // cols
        out_c[i] = cell % cols
    return out_r_arr, out_c_arr


cdef inline int32_t _mac(const int8_t[:] x, const int8_t[:] w,
                         uint32_t a0, uint32_t a1, uint32_t a2, uint32_t a3,
                         uint32_t o0, uint32_t o1, uint32_t o2, uint32_t o3,
                         Py_ssize_t n_steps) nogil:
    cdef uint32_t acc = (0 & a3) | o3
    cdef int32_t xi, wi, prod
    cdef Py_ssize_t t
    for t in range(n_steps):
        xi = <int8_t>(((<uint8_t>x[t]) & a0) | o0)
        wi = <int8_t>(((<uint8_t>w[t]) & a1) | o1)
        prod = <int16_t>(((<uint16_t>(xi * wi)) & a2) | o2)
        acc = ((acc + <uint32_t>prod) & a3) | o3
    return <int32_t>acc


def mac_accumulate(const int8_t[:] x, const int8_t[:] w, and_m, or_m, Py_ssize_t n_steps):
    return int(_mac(x, w, <uint32_t>and_m[0], <uint32_t>and_m[1], <uint32_t>and_m[2],
                    <uint32_t>and_m[3], <uint32_t>or_m[0], <uint32_t>or_m[1],
                    <uint32_t>or_m[2], <uint32_t>or_m[3], n_steps))


def conv_kernel(const int8_t[:, :] X, const int8_t[:, :] W,
                const uint32_t[:, :, :] and_m, const uint32_t[:, :, :] or_m,
                int rows, int cols):
    cdef Py_ssize_t P = X.shape[0], T = X.shape[1], M = W.shape[0]
    cdef Py_ssize_t m, p, r, c
    out_arr = np.empty((M, P), dtype=np.int32)
    cdef int32_t[:, :] out = out_arr
    with nogil:
        for m in range(M):
            c = m % cols
            for p in range(P):
                r = p % rows
                out[m, p] = _mac(X[p], W[m],
                                 and_m[r, c, 0], and_m[r, c, 1], and_m[r, c, 2], and_m[r, c, 3],
                                 or_m[r, c, 0], or_m[r, c, 1], or_m[r, c, 2], or_m[r, c, 3], T)
    return out_arr
