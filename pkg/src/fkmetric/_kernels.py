"""Numba kernels for the matching dynamic programs and pairwise distances.

The solvers run on dense node-compatibility matrices. Two DP families:

  * `lcs_*`: maximum order-preserving matching cardinality (discrete
    matchings), a longest-chain recurrence over point pairs.
  * `cover_dp*`: maximum matched-cell coverage for the slope-constrained
    continuous matching. Matched pieces are unit diagonal cells (slope 1)
    plus optional drift pieces of cell extent (L, L+1) or (L+1, L) with
    L = ceil(1/eps), the shortest pieces whose slope 1 +- 1/L stays inside
    the open window (1-eps, 1+eps). Gaps may jump anywhere forward.

Coverage is credited min(dx, dy) cells per piece so a feasible value
certifies both lambda(A) and lambda(A') at once.
"""

import numpy as np
from numba import njit

JIT = dict(cache=True, nogil=True)


# ---------------------------------------------------------------------------
# discrete maximum matching (longest chain)

@njit(**JIT)
def lcs_dense(M):
    nx, ny = M.shape
    prev = np.zeros(ny + 1, dtype=np.int32)
    cur = np.zeros(ny + 1, dtype=np.int32)
    for i in range(nx):
        cur[0] = 0
        for j in range(ny):
            v = prev[j + 1]
            if M[i, j] and prev[j] + 1 > v:
                v = prev[j] + 1
            if cur[j] > v:
                v = cur[j]
            cur[j + 1] = v
        prev, cur = cur, prev
    return prev[ny]


@njit(**JIT)
def lcs_circle(vx, vy, delta):
    nx = vx.shape[0]
    ny = vy.shape[0]
    prev = np.zeros(ny + 1, dtype=np.int32)
    cur = np.zeros(ny + 1, dtype=np.int32)
    for i in range(nx):
        cur[0] = 0
        a = vx[i]
        for j in range(ny):
            g = a - vy[j]
            if g < 0.0:
                g = -g
            if g > 0.5:
                g = 1.0 - g
            v = prev[j + 1]
            if g < delta and prev[j] + 1 > v:
                v = prev[j] + 1
            if cur[j] > v:
                v = cur[j]
            cur[j + 1] = v
        prev, cur = cur, prev
    return prev[ny]


@njit(**JIT)
def lcs_torus(x1, y1, x2, y2, delta):
    nx = x1.shape[0]
    ny = x2.shape[0]
    prev = np.zeros(ny + 1, dtype=np.int32)
    cur = np.zeros(ny + 1, dtype=np.int32)
    for i in range(nx):
        cur[0] = 0
        for j in range(ny):
            g = x1[i] - x2[j]
            if g < 0.0:
                g = -g
            if g > 0.5:
                g = 1.0 - g
            h = y1[i] - y2[j]
            if h < 0.0:
                h = -h
            if h > 0.5:
                h = 1.0 - h
            if h > g:
                g = h
            v = prev[j + 1]
            if g < delta and prev[j] + 1 > v:
                v = prev[j] + 1
            if cur[j] > v:
                v = cur[j]
            cur[j + 1] = v
        prev, cur = cur, prev
    return prev[ny]


@njit(**JIT)
def lcs_packed(px, py, delta):
    """Binary shift windows packed MSB-first into uint64; the window metric
    equals xor * 2^-64, so the threshold test is one float compare."""
    nx = px.shape[0]
    ny = py.shape[0]
    scale = 2.0 ** -64
    prev = np.zeros(ny + 1, dtype=np.int32)
    cur = np.zeros(ny + 1, dtype=np.int32)
    for i in range(nx):
        cur[0] = 0
        a = px[i]
        for j in range(ny):
            d = np.float64(a ^ py[j]) * scale
            v = prev[j + 1]
            if d < delta and prev[j] + 1 > v:
                v = prev[j] + 1
            if cur[j] > v:
                v = cur[j]
            cur[j + 1] = v
        prev, cur = cur, prev
    return prev[ny]


@njit(**JIT)
def lcs_suffix_table(M):
    nx, ny = M.shape
    S = np.zeros((nx + 1, ny + 1), dtype=np.int32)
    for i in range(nx - 1, -1, -1):
        for j in range(ny - 1, -1, -1):
            v = S[i + 1, j]
            if S[i, j + 1] > v:
                v = S[i, j + 1]
            if M[i, j] and S[i + 1, j + 1] + 1 > v:
                v = S[i + 1, j + 1] + 1
            S[i, j] = v
    return S


@njit(**JIT)
def lcs_lex_pairs(M, S):
    """Lexicographically smallest maximum matching given the suffix table."""
    total = S[0, 0]
    pairs = np.empty((total, 2), dtype=np.int32)
    i = 0
    j = 0
    for k in range(total):
        remaining = total - k
        r = i
        while True:
            found = -1
            if S[r, j] >= remaining:
                for c in range(j, M.shape[1]):
                    if M[r, c] and S[r + 1, c + 1] >= remaining - 1:
                        found = c
                        break
            if found >= 0:
                pairs[k, 0] = r
                pairs[k, 1] = found
                i = r + 1
                j = found + 1
                break
            r += 1
    return pairs


# ---------------------------------------------------------------------------
# slope-constrained coverage DP

@njit(**JIT)
def cover_dp(M, L):
    """Max matched-cell coverage over monotone piecewise matchings.

    M is node compatibility (mx, my); cells are index pairs between
    consecutive nodes. L > 0 enables drift pieces of extent (L, L+1) and
    (L+1, L); L = 0 restricts to unit diagonal cells.
    """
    mx, my = M.shape
    nx = mx - 1
    ny = my - 1
    if nx < 1 or ny < 1:
        return np.int32(0)
    span = L + 2 if L > 0 else 2
    ring = np.zeros((span, ny + 1), dtype=np.int32)
    r2 = np.zeros(my, dtype=np.int32)  # diagonal run lengths of M[r][c] & M[r][c+1], row r = i-1
    for c in range(my - 1):
        if M[0, c] and M[0, c + 1]:
            r2[c] = 1
    for i in range(1, nx + 1):
        if i >= 2:
            r = i - 1
            for c in range(my - 2, 0, -1):
                if M[r, c] and M[r, c + 1]:
                    r2[c] = r2[c - 1] + 1
                else:
                    r2[c] = 0
            if M[r, 0] and M[r, 1]:
                r2[0] = 1
            else:
                r2[0] = 0
        prev = ring[(i - 1) % span]
        cur = ring[i % span]
        cur[0] = 0
        run = 0
        for j in range(1, ny + 1):
            v = prev[j]
            if M[i - 1, j - 1] and M[i, j]:
                w = prev[j - 1] + 1
                if w > v:
                    v = w
            if L > 0:
                if i > L and j > L + 1 and M[i, j] and M[i - L, j - L - 1] and r2[j - 2] >= L - 1:
                    w = ring[(i - L) % span][j - L - 1] + L
                    if w > v:
                        v = w
                if i > L + 1 and j > L and M[i, j] and M[i - L - 1, j - L] and r2[j - 1] >= L:
                    w = ring[(i - L - 1) % span][j - L] + L
                    if w > v:
                        v = w
            if run > v:
                v = run
            run = v
            cur[j] = v
    return ring[nx % span][ny]


@njit(**JIT)
def cover_dp_choices(M, L):
    """As cover_dp but records per-state choices for certificate backtrack.
    Choice codes: 0 skip-y, 1 skip-x, 2 diagonal cell, 3 up drift (L, L+1),
    4 down drift (L+1, L)."""
    mx, my = M.shape
    nx = mx - 1
    ny = my - 1
    B = np.zeros((nx + 1, ny + 1), dtype=np.int32)
    ch = np.zeros((nx + 1, ny + 1), dtype=np.uint8)
    r2 = np.zeros(my, dtype=np.int32)
    for c in range(my - 1):
        if M[0, c] and M[0, c + 1]:
            r2[c] = 1
    for j in range(1, ny + 1):
        ch[0, j] = 0
    for i in range(1, nx + 1):
        if i >= 2:
            r = i - 1
            for c in range(my - 2, 0, -1):
                if M[r, c] and M[r, c + 1]:
                    r2[c] = r2[c - 1] + 1
                else:
                    r2[c] = 0
            if M[r, 0] and M[r, 1]:
                r2[0] = 1
            else:
                r2[0] = 0
        for j in range(1, ny + 1):
            v = B[i - 1, j]
            c = np.uint8(1)
            if M[i - 1, j - 1] and M[i, j]:
                w = B[i - 1, j - 1] + 1
                if w > v:
                    v = w
                    c = np.uint8(2)
            if L > 0:
                if i > L and j > L + 1 and M[i, j] and M[i - L, j - L - 1] and r2[j - 2] >= L - 1:
                    w = B[i - L, j - L - 1] + L
                    if w > v:
                        v = w
                        c = np.uint8(3)
                if i > L + 1 and j > L and M[i, j] and M[i - L - 1, j - L] and r2[j - 1] >= L:
                    w = B[i - L - 1, j - L] + L
                    if w > v:
                        v = w
                        c = np.uint8(4)
            if B[i, j - 1] > v:
                v = B[i, j - 1]
                c = np.uint8(0)
            B[i, j] = v
            ch[i, j] = c
    return B, ch


# ---------------------------------------------------------------------------
# pairwise distance / compatibility matrices

@njit(**JIT)
def dist_mat_circle(vx, vy):
    nx = vx.shape[0]
    ny = vy.shape[0]
    D = np.empty((nx, ny), dtype=np.float64)
    for i in range(nx):
        for j in range(ny):
            g = vx[i] - vy[j]
            if g < 0.0:
                g = -g
            if g > 0.5:
                g = 1.0 - g
            D[i, j] = g
    return D


@njit(**JIT)
def dist_mat_torus(x1, y1, x2, y2):
    nx = x1.shape[0]
    ny = x2.shape[0]
    D = np.empty((nx, ny), dtype=np.float64)
    for i in range(nx):
        for j in range(ny):
            g = x1[i] - x2[j]
            if g < 0.0:
                g = -g
            if g > 0.5:
                g = 1.0 - g
            h = y1[i] - y2[j]
            if h < 0.0:
                h = -h
            if h > 0.5:
                h = 1.0 - h
            if h > g:
                g = h
            D[i, j] = g
    return D


@njit(**JIT)
def dist_mat_packed(px, py):
    nx = px.shape[0]
    ny = py.shape[0]
    scale = 2.0 ** -64
    D = np.empty((nx, ny), dtype=np.float64)
    for i in range(nx):
        a = px[i]
        for j in range(ny):
            D[i, j] = np.float64(a ^ py[j]) * scale
    return D


@njit(**JIT)
def dist_mat_susp_circle(hx, rx, bx, hy, ry, by, alpha):
    """Suspension surrogate over a circle rotation base (base map is an
    isometry, so sliced base distances collapse to plain arcs)."""
    nx = hx.shape[0]
    ny = hy.shape[0]
    D = np.empty((nx, ny), dtype=np.float64)
    for i in range(nx):
        for j in range(ny):
            ha = hx[i]
            hb = hy[j]
            if ha >= hb:
                hih = ha
                loh = hb
                rhi = rx[i]
                hib = bx[i]
                lob = by[j]
            else:
                hih = hb
                loh = ha
                rhi = ry[j]
                hib = by[j]
                lob = bx[i]
            g = bx[i] - by[j]
            if g < 0.0:
                g = -g
            g = g - np.floor(g)
            if g > 0.5:
                g = 1.0 - g
            down = (hih - loh) + g
            e = (hib + alpha) - lob
            e = e - np.floor(e)
            if e > 0.5:
                e = 1.0 - e
            up = (rhi - hih) + loh + e
            D[i, j] = down if down <= up else up
    return D


@njit(**JIT)
def dist_mat_susp_packed(hx, rx, px0, px1, px2, hy, ry, py0, py1, py2):
    """Suspension surrogate over a binary shift base with packed windows."""
    nx = hx.shape[0]
    ny = hy.shape[0]
    scale = 2.0 ** -64
    D = np.empty((nx, ny), dtype=np.float64)
    for i in range(nx):
        for j in range(ny):
            ha = hx[i]
            hb = hy[j]
            rmax = rx[i] if rx[i] >= ry[j] else ry[j]
            d0 = np.float64(px0[i] ^ py0[j]) * scale
            d1 = np.float64(px1[i] ^ py1[j]) * scale
            if ha >= hb:
                loh = hb
                gap = ha - hb
                rhi = rx[i]
                hih = ha
                e0 = np.float64(px1[i] ^ py0[j]) * scale
                e1 = np.float64(px2[i] ^ py1[j]) * scale
            else:
                loh = ha
                gap = hb - ha
                rhi = ry[j]
                hih = hb
                e0 = np.float64(px0[i] ^ py1[j]) * scale
                e1 = np.float64(px1[i] ^ py2[j]) * scale
            theta = loh / rmax
            down = gap + (1.0 - theta) * d0 + theta * d1
            up = (rhi - hih) + loh + (1.0 - theta) * e0 + theta * e1
            D[i, j] = down if down <= up else up
    return D


@njit(**JIT)
def dist_mat_word_symbols(sx, sy, arity):
    """Generic window metric for arity > 2: weighted symbol mismatches."""
    nx = sx.shape[0]
    ny = sy.shape[0]
    w = sx.shape[1]
    D = np.empty((nx, ny), dtype=np.float64)
    for i in range(nx):
        for j in range(ny):
            d = 0.0
            weight = 0.5
            for k in range(w):
                if sx[i, k] != sy[j, k]:
                    d += weight
                weight *= 0.5
            D[i, j] = d
    return D
