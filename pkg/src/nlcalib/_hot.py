"""Hot inner loops, each with a numba kernel and a pure-numpy twin.

Every kernel works on 2D arrays; one-dimensional lattices are carried as
``(N, 1)`` arrays with a ``(2R + 1, 1)`` weight table.  Cells outside the
stored universe contribute nothing.  Weight tables are centered: entry
``table[r0 + a, r1 + b]`` is the weight of displacement ``(a, b)``.

The public names at the bottom dispatch on :data:`nlcalib._accel.USE_NUMBA`.
Both implementations stay importable so the benchmark and the test-suite
can compare them directly.
"""

import numpy as np

from ._accel import USE_NUMBA, njit

# --------------------------------------------------------------------------
# numba kernels
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _sgn(a, b):
    if a > b:
        return 1.0
    if a < b:
        return -1.0
    return 0.0


@njit(cache=True, nogil=True)
def _kahan_add(s, c, x):
    # Neumaier compensated summation step; returns the new (sum, compensation)
    t = s + x
    if abs(s) >= abs(x):
        c += (s - t) + x
    else:
        c += (x - t) + s
    return t, c


@njit(cache=True, nogil=True)
def _set_sums_nb(cells, v, table, eps2, rcut2):
    n0, n1 = v.shape
    r0 = (table.shape[0] - 1) // 2
    r1 = (table.shape[1] - 1) // 2
    out = np.zeros(cells.shape[0])
    for k in range(cells.shape[0]):
        i = cells[k, 0]
        j = cells[k, 1]
        acc = 0.0
        comp = 0.0
        for a in range(-r0, r0 + 1):
            for b in range(-r1, r1 + 1):
                d2 = a * a + b * b
                if d2 == 0 or d2 < eps2 or d2 > rcut2:
                    continue
                w = table[a + r0, b + r1]
                if w == 0.0:
                    continue
                p = 0.0
                ii = i + a
                jj = j + b
                if 0 <= ii < n0 and 0 <= jj < n1:
                    p += v[ii, jj]
                ii = i - a
                jj = j - b
                if 0 <= ii < n0 and 0 <= jj < n1:
                    p += v[ii, jj]
                acc, comp = _kahan_add(acc, comp, w * p)
        out[k] = 0.5 * (acc + comp)
    return out


@njit(cache=True, nogil=True)
def _level_sums_nb(cells, phi, table, eps2, rcut2):
    n0, n1 = phi.shape
    r0 = (table.shape[0] - 1) // 2
    r1 = (table.shape[1] - 1) // 2
    out = np.zeros(cells.shape[0])
    for k in range(cells.shape[0]):
        i = cells[k, 0]
        j = cells[k, 1]
        px = phi[i, j]
        acc = 0.0
        comp = 0.0
        for a in range(-r0, r0 + 1):
            for b in range(-r1, r1 + 1):
                d2 = a * a + b * b
                if d2 == 0 or d2 < eps2 or d2 > rcut2:
                    continue
                w = table[a + r0, b + r1]
                if w == 0.0:
                    continue
                p = 0.0
                ii = i + a
                jj = j + b
                if 0 <= ii < n0 and 0 <= jj < n1:
                    p += _sgn(px, phi[ii, jj])
                ii = i - a
                jj = j - b
                if 0 <= ii < n0 and 0 <= jj < n1:
                    p += _sgn(px, phi[ii, jj])
                acc, comp = _kahan_add(acc, comp, w * p)
        out[k] = 0.5 * (acc + comp)
    return out


@njit(cache=True, nogil=True)
def _interaction_nb(amask, bmask, table):
    n0, n1 = amask.shape
    r0 = (table.shape[0] - 1) // 2
    r1 = (table.shape[1] - 1) // 2
    acc = 0.0
    comp = 0.0
    for i in range(n0):
        for j in range(n1):
            if not amask[i, j]:
                continue
            for a in range(-r0, r0 + 1):
                ii = i + a
                if ii < 0 or ii >= n0:
                    continue
                for b in range(-r1, r1 + 1):
                    jj = j + b
                    if jj < 0 or jj >= n1:
                        continue
                    if bmask[ii, jj]:
                        acc, comp = _kahan_add(acc, comp, table[a + r0, b + r1])
    return acc + comp


@njit(cache=True, nogil=True)
def _pair_abs_nb(f, win, table):
    n0, n1 = f.shape
    r0 = (table.shape[0] - 1) // 2
    r1 = (table.shape[1] - 1) // 2
    acc = 0.0
    comp = 0.0
    for i in range(n0):
        for j in range(n1):
            for a in range(-r0, r0 + 1):
                ii = i + a
                if ii < 0 or ii >= n0:
                    continue
                for b in range(-r1, r1 + 1):
                    jj = j + b
                    if jj < 0 or jj >= n1 or (a == 0 and b == 0):
                        continue
                    if not (win[i, j] or win[ii, jj]):
                        continue
                    acc, comp = _kahan_add(acc, comp, abs(f[i, j] - f[ii, jj]) * table[a + r0, b + r1])
    return 0.5 * (acc + comp)


@njit(cache=True, nogil=True)
def _pair_sign_nb(f, phi, win, table):
    n0, n1 = f.shape
    r0 = (table.shape[0] - 1) // 2
    r1 = (table.shape[1] - 1) // 2
    acc = 0.0
    comp = 0.0
    for i in range(n0):
        for j in range(n1):
            for a in range(-r0, r0 + 1):
                ii = i + a
                if ii < 0 or ii >= n0:
                    continue
                for b in range(-r1, r1 + 1):
                    jj = j + b
                    if jj < 0 or jj >= n1 or (a == 0 and b == 0):
                        continue
                    if not (win[i, j] or win[ii, jj]):
                        continue
                    df = f[i, j] - f[ii, jj]
                    if df == 0.0:
                        continue
                    acc, comp = _kahan_add(acc, comp, _sgn(phi[i, j], phi[ii, jj]) * df * table[a + r0, b + r1])
    return 0.5 * (acc + comp)


@njit(cache=True, nogil=True)
def _masked_sign_nb(xmask, ymask, phi, table):
    n0, n1 = xmask.shape
    r0 = (table.shape[0] - 1) // 2
    r1 = (table.shape[1] - 1) // 2
    acc = 0.0
    comp = 0.0
    for i in range(n0):
        for j in range(n1):
            if not xmask[i, j]:
                continue
            for a in range(-r0, r0 + 1):
                ii = i + a
                if ii < 0 or ii >= n0:
                    continue
                for b in range(-r1, r1 + 1):
                    jj = j + b
                    if jj < 0 or jj >= n1 or (a == 0 and b == 0):
                        continue
                    if ymask[ii, jj]:
                        acc, comp = _kahan_add(acc, comp, _sgn(phi[i, j], phi[ii, jj]) * table[a + r0, b + r1])
    return acc + comp


@njit(cache=True, nogil=True)
def _gray_walk_nb(p0, g0, wff, tol, cap, every):
    m = g0.shape[0]
    g = g0.copy()
    state = np.zeros(m, np.int8)
    n = np.int64(1) << m
    best = p0
    vals = np.empty(cap)
    pats = np.empty(cap, np.int64)
    vals[0] = p0
    pats[0] = 0
    cnt = 1
    overflow = False
    ncp = (n + every - 1) // every
    cp_pat = np.empty(ncp, np.int64)
    cp_val = np.empty(ncp)
    cp_pat[0] = 0
    cp_val[0] = p0
    used = 1
    p = p0
    pat = np.int64(0)
    for s in range(1, n):
        k = 0
        t = s
        while (t & 1) == 0:
            t >>= 1
            k += 1
        if state[k] == 0:
            p += g[k]
            state[k] = 1
            sg = 1.0
        else:
            p -= g[k]
            state[k] = 0
            sg = -1.0
        for j in range(m):
            g[j] -= 2.0 * sg * wff[j, k]
        pat ^= np.int64(1) << k
        if p <= best + tol:
            if p < best:
                best = p
            if cnt == cap:
                keep = 0
                for q in range(cnt):
                    if vals[q] <= best + tol:
                        vals[keep] = vals[q]
                        pats[keep] = pats[q]
                        keep += 1
                cnt = keep
            if cnt < cap:
                vals[cnt] = p
                pats[cnt] = pat
                cnt += 1
            else:
                overflow = True
        if s % every == 0:
            cp_pat[used] = pat
            cp_val[used] = p
            used += 1
    return best, vals[:cnt], pats[:cnt], overflow, cp_pat[:used], cp_val[:used]


# --------------------------------------------------------------------------
# numpy twins
# --------------------------------------------------------------------------


def _radius(table):
    return (table.shape[0] - 1) // 2, (table.shape[1] - 1) // 2


def _distance_masked(table, eps2, rcut2):
    r0, r1 = _radius(table)
    a = np.arange(-r0, r0 + 1)[:, None]
    b = np.arange(-r1, r1 + 1)[None, :]
    d2 = a * a + b * b
    keep = (d2 != 0) & (d2 >= eps2) & (d2 <= rcut2)
    return np.where(keep, table, 0.0)


def _set_sums_np(cells, v, table, eps2, rcut2):
    r0, r1 = _radius(table)
    wt = _distance_masked(table, eps2, rcut2)
    vp = np.pad(v, ((r0, r0), (r1, r1)))
    out = np.empty(cells.shape[0])
    for k, (i, j) in enumerate(cells):
        block = vp[i : i + 2 * r0 + 1, j : j + 2 * r1 + 1]
        out[k] = 0.5 * np.sum(wt * (block + block[::-1, ::-1]))
    return out


def _level_sums_np(cells, phi, table, eps2, rcut2):
    r0, r1 = _radius(table)
    wt = _distance_masked(table, eps2, rcut2)
    pp = np.pad(phi, ((r0, r0), (r1, r1)), constant_values=np.nan)
    out = np.empty(cells.shape[0])
    for k, (i, j) in enumerate(cells):
        px = phi[i, j]
        block = pp[i : i + 2 * r0 + 1, j : j + 2 * r1 + 1]
        s = (px > block).astype(float) - (px < block)
        out[k] = 0.5 * np.sum(wt * (s + s[::-1, ::-1]))
    return out


def _shifts(shape, table):
    """Yield ``(weight, x_slices, y_slices)`` for every nonzero displacement."""
    n0, n1 = shape
    r0, r1 = _radius(table)
    for a in range(-r0, r0 + 1):
        if abs(a) >= n0:
            continue
        for b in range(-r1, r1 + 1):
            if (a == 0 and b == 0) or abs(b) >= n1:
                continue
            w = table[a + r0, b + r1]
            if w == 0.0:
                continue
            xs = (slice(max(0, -a), n0 - max(0, a)), slice(max(0, -b), n1 - max(0, b)))
            ys = (slice(max(0, a), n0 + min(0, a)), slice(max(0, b), n1 + min(0, b)))
            yield w, xs, ys


def _interaction_np(amask, bmask, table):
    acc = 0.0
    for w, xs, ys in _shifts(amask.shape, table):
        acc += w * np.count_nonzero(amask[xs] & bmask[ys])
    return acc


def _pair_abs_np(f, win, table):
    acc = 0.0
    for w, xs, ys in _shifts(f.shape, table):
        live = win[xs] | win[ys]
        acc += w * np.sum(np.abs(f[xs] - f[ys])[live])
    return 0.5 * acc


def _pair_sign_np(f, phi, win, table):
    acc = 0.0
    for w, xs, ys in _shifts(f.shape, table):
        live = win[xs] | win[ys]
        s = (phi[xs] > phi[ys]).astype(float) - (phi[xs] < phi[ys])
        acc += w * np.sum((s * (f[xs] - f[ys]))[live])
    return 0.5 * acc


def _masked_sign_np(xmask, ymask, phi, table):
    acc = 0.0
    for w, xs, ys in _shifts(xmask.shape, table):
        live = xmask[xs] & ymask[ys]
        s = (phi[xs] > phi[ys]).astype(float) - (phi[xs] < phi[ys])
        acc += w * np.sum(s[live])
    return acc


def _chunk_energies_np(p0, g0, wff, block=1 << 14):
    """Energies of all ``2**m`` flip patterns, natural binary order."""
    m = g0.shape[0]
    n = 1 << m
    out = np.empty(n)
    shifts = np.arange(m)
    for start in range(0, n, block):
        idx = np.arange(start, min(n, start + block))
        bits = ((idx[:, None] >> shifts) & 1).astype(float)
        out[idx] = p0 + bits @ g0 - np.einsum("ij,ij->i", bits @ wff, bits)
    return out


def _gray_walk_np(p0, g0, wff, tol, cap, every):
    energies = _chunk_energies_np(p0, g0, wff)
    best = energies.min()
    pats = np.flatnonzero(energies <= best + tol)
    overflow = pats.size > cap
    pats = pats[:cap]
    cp_pat = np.arange(0, energies.size, every, dtype=np.int64)
    return best, energies[pats], pats.astype(np.int64), overflow, cp_pat, energies[cp_pat]


# --------------------------------------------------------------------------
# dispatch
# --------------------------------------------------------------------------

if USE_NUMBA:
    set_sums = _set_sums_nb
    level_sums = _level_sums_nb
    interaction_sum = _interaction_nb
    pair_abs_sum = _pair_abs_nb
    pair_sign_sum = _pair_sign_nb
    masked_sign_sum = _masked_sign_nb
    gray_walk = _gray_walk_nb
else:
    set_sums = _set_sums_np
    level_sums = _level_sums_np
    interaction_sum = _interaction_np
    pair_abs_sum = _pair_abs_np
    pair_sign_sum = _pair_sign_np
    masked_sign_sum = _masked_sign_np
    gray_walk = _gray_walk_np

chunk_energies = _chunk_energies_np
