"""Pure-Python hot kernels.

Reference behaviour for the compiled twin in ``_ckernels.pyx``; both must
return identical results for identical inputs. Fault arrays are always given
in (col, row) ascending order.
"""
import numpy as np

MASK8 = 0xFF
MASK16 = 0xFFFF
MASK32 = 0xFFFFFFFF


def _s8(u):
    return u - 0x100 if u & 0x80 else u


def _s16(u):
    return u - 0x10000 if u & 0x8000 else u


def _s32(u):
    return u - 0x100000000 if u & 0x80000000 else u


def rr_repair(fr, fc, n_rows):
    """Row spares: a row's spare only fixes the row when it holds a single fault."""
    counts = [0] * n_rows
    for r in fr:
        counts[r] += 1
    out = np.zeros(len(fr), dtype=np.uint8)
    for i, r in enumerate(fr):
        if counts[r] == 1:
            out[i] = 1
    return out


def cr_repair(fr, fc, n_cols):
    """Column spares: the topmost fault of each column takes the spare."""
    used = [False] * n_cols
    out = np.zeros(len(fr), dtype=np.uint8)
    for i, c in enumerate(fc):
        if not used[c]:
            used[c] = True
            out[i] = 1
    return out


def augment_match(cand0, cand1, n_spares):
    """Maximum matching of faults to spares by augmenting paths.

    Faults are inserted in the given priority order; once matched a fault
    stays matched, so the matched set is the greedy basis of the transversal
    matroid (maximum cardinality, and every priority prefix that can be
    matched is matched). Returns the spare index per fault, -1 if none.
    """
    n = len(cand0)
    owner = [-1] * n_spares
    assign = np.full(n, -1, dtype=np.int64)
    for f in range(n):
        seen = [False] * n_spares
        # iterative DFS; stack holds (fault, next-candidate slot)
        stack = [[f, 0]]
        path = []
        found = -1
        while stack:
            top = stack[-1]
            g, slot = top
            if slot >= 2:
                stack.pop()
                if path:
                    path.pop()
                continue
            top[1] += 1
            s = cand0[g] if slot == 0 else cand1[g]
            if s < 0 or seen[s]:
                continue
            seen[s] = True
            path.append(s)
            if owner[s] < 0:
                found = s
                break
            stack.append([owner[s], 0])
        if found < 0:
            continue
        # path[i] is the spare taken by stack[i][0]
        for (g, _), s in zip(stack, path):
            owner[s] = g
            assign[g] = s
    return assign


def surviving_prefix(fc, repaired, n_cols):
    best = n_cols
    for c, ok in zip(fc, repaired):
        if not ok and c < best:
            best = c
    return best


def place_clustered(center_idx, offsets, centers, fallback_u, rows, cols):
    """Place faults around cluster centres, rejecting out-of-bounds and taken cells.

    ``offsets`` has shape (n, attempts, 2). A fault whose attempts are all
    rejected takes the ``floor(u * free)``-th free cell in row-major order.
    """
    n = len(center_idx)
    attempts = offsets.shape[1]
    taken = np.zeros(rows * cols, dtype=np.uint8)
    out_r = np.empty(n, dtype=np.int64)
    out_c = np.empty(n, dtype=np.int64)
    free = rows * cols
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
            k = int(fallback_u[i] * free)
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
    return out_r, out_c


def mac_accumulate(x, w, and_m, or_m, n_steps):
    """Run ``n_steps`` MACs through one PE's masked registers.

    ``and_m``/``or_m`` hold the (input, weight, intermediate, accumulator)
    register masks. Returns the signed 32-bit accumulator.
    """
    a0, a1, a2, a3 = (int(v) for v in and_m)
    o0, o1, o2, o3 = (int(v) for v in or_m)
    acc = (0 & a3) | o3
    for t in range(n_steps):
        xi = _s8(((int(x[t]) & MASK8) & a0) | o0)
        wi = _s8(((int(w[t]) & MASK8) & a1) | o1)
        prod = _s16((((xi * wi) & MASK16) & a2) | o2)
        acc = (((acc + prod) & MASK32) & a3) | o3
    return _s32(acc)


def conv_kernel(X, W, and_m, or_m, rows, cols):
    """Output-stationary convolution over im2col operands.

    ``X`` is (pixels, T) and ``W`` is (channels, T); output pixel ``p`` runs on
    row ``p % rows`` and channel ``m`` on column ``m % cols``.
    """
    P, T = X.shape
    M = W.shape[0]
    out = np.empty((M, P), dtype=np.int32)
    for m in range(M):
        c = m % cols
        wrow = W[m]
        for p in range(P):
            r = p % rows
            out[m, p] = mac_accumulate(X[p], wrow, and_m[r, c], or_m[r, c], T)
    return out
