# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-column decoding kernels.

Same contract as ``sebbkit._kernels_py``; every sum is accumulated in the
same order so both backends produce identical floats.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport isnan

cnp.import_array()


cdef inline double _fmax(double a, double b) noexcept nogil:
    return a if a > b else b


cdef inline double _clip(double x, double lo, double hi) noexcept nogil:
    if x < lo:
        x = lo
    if x > hi:
        x = hi
    return x


cdef void _step(const double[::1] s, Py_ssize_t h, double[::1] out) noexcept nogil:
    cdef Py_ssize_t T = s.shape[0], t, k
    cdef double r, l
    for t in range(T):
        out[t] = 0.0
    for t in range(h, T - h):
        r = 0.0
        l = 0.0
        for k in range(h):
            r = r + s[t + k]
        for k in range(h):
            l = l + s[t - h + k]
        out[t] = (r - l) / h


def step_filter(s, Py_ssize_t h):
    cdef double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    out = np.zeros(sv.shape[0])
    cdef double[::1] ov = out
    _step(sv, h, ov)
    return out


cdef Py_ssize_t _scan(const double[::1] d, bint signed, double tol,
                      cnp.int64_t[::1] pos, cnp.int8_t[::1] kind) noexcept nogil:
    """Candidates in time order; returns their count."""
    cdef Py_ssize_t n = d.shape[0], t, c = 0
    cdef double a, b, x
    for t in range(2, n):
        a = d[t - 2]
        b = d[t - 1]
        x = d[t]
        if x <= b and b > a:
            if not signed or b > tol:
                pos[c] = t - 1
                kind[c] = 1
                c += 1
        elif x > b and b <= a:
            if not signed or b < -tol:
                pos[c] = t - 1
                kind[c] = -1
                c += 1
    return c


def scan_extrema(d, bint signed, double tol):
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    cdef Py_ssize_t n = dv.shape[0]
    pos = np.zeros(max(n, 1), dtype=np.int64)
    kind = np.zeros(max(n, 1), dtype=np.int8)
    cdef Py_ssize_t c = _scan(dv, signed, tol, pos, kind) if n >= 3 else 0
    pos, kind = pos[:c], kind[:c]
    return pos[kind == 1], pos[kind == -1]


cdef Py_ssize_t _boundaries(const double[::1] d, cnp.int64_t[::1] pos, cnp.int8_t[::1] kind,
                            Py_ssize_t c, cnp.int64_t[::1] out) noexcept nogil:
    """Collapse same-kind runs and interleave; writes into ``out`` and returns its length."""
    cdef Py_ssize_t n = d.shape[0], i, m = 0, start = 0, nb
    # collapse in place
    for i in range(c):
        if m > 0 and kind[m - 1] == kind[i]:
            if (kind[i] == 1 and d[pos[i]] > d[pos[m - 1]]) or (kind[i] == -1 and d[pos[i]] < d[pos[m - 1]]):
                pos[m - 1] = pos[i]
        else:
            pos[m] = pos[i]
            kind[m] = kind[i]
            m += 1
    out[0] = 0
    nb = 1
    if m > 0 and kind[0] == -1:
        start = 1
    for i in range(start, m):
        out[nb] = pos[i]
        nb += 1
    if m > start and kind[m - 1] == 1:
        out[nb] = n - 1
        nb += 1
    if out[nb - 1] != n - 1:
        out[nb] = n - 1
        nb += 1
    return nb


def build_boundaries(d, onsets, offsets):
    cdef double[::1] dv = np.ascontiguousarray(d, dtype=np.float64)
    on = np.asarray(onsets, dtype=np.int64)
    off = np.asarray(offsets, dtype=np.int64)
    allpos = np.concatenate([on, off])
    allkind = np.concatenate([np.ones(on.shape[0], np.int8), -np.ones(off.shape[0], np.int8)])
    order = np.argsort(allpos, kind="stable")
    pos = np.ascontiguousarray(allpos[order])
    kind = np.ascontiguousarray(allkind[order])
    out = np.zeros(pos.shape[0] + 4, dtype=np.int64)
    cdef Py_ssize_t nb = _boundaries(dv, pos, kind, pos.shape[0], out)
    return out[:nb]


cdef void _prefix(const double[::1] s, double[::1] cs) noexcept nogil:
    cdef Py_ssize_t i
    cs[0] = 0.0
    for i in range(s.shape[0]):
        cs[i + 1] = cs[i] + s[i]


cdef void _stats(const double[::1] s, const double[::1] cs, const cnp.int64_t[::1] b, Py_ssize_t nb,
                 double[::1] means, double[::1] mins, double[::1] maxs) noexcept nogil:
    cdef Py_ssize_t j, i, lo, hi
    cdef double mn, mx
    for j in range(nb - 1):
        lo = b[j]
        hi = b[j + 1]
        mn = s[lo]
        mx = s[lo]
        for i in range(lo + 1, hi):
            if s[i] < mn:
                mn = s[i]
            if s[i] > mx:
                mx = s[i]
        mins[j] = mn
        maxs[j] = mx
        means[j] = _clip((cs[hi] - cs[lo]) / <double>(hi - lo), mn, mx)


def segment_stats(s, bounds):
    cdef double[::1] sv = np.ascontiguousarray(s, dtype=np.float64)
    cdef cnp.int64_t[::1] bv = np.ascontiguousarray(bounds, dtype=np.int64)
    cdef Py_ssize_t k = bv.shape[0] - 1
    cs = np.zeros(sv.shape[0] + 1)
    means = np.zeros(k)
    mins = np.zeros(k)
    maxs = np.zeros(k)
    _prefix(sv, cs)
    _stats(sv, cs, bv, bv.shape[0], means, mins, maxs)
    return means, mins, maxs


cdef Py_ssize_t _merge(cnp.int64_t[::1] b, Py_ssize_t nb, double[::1] means, double[::1] mins,
                       double[::1] maxs, double theta_rel, double theta_abs, double eps,
                       cnp.uint8_t[::1] ok) noexcept nogil:
    """Merge in place; returns the new boundary count."""
    cdef Py_ssize_t m = (nb - 1) // 2, k, j, o, w
    cdef double den, gmin
    cdef bint any_ok = False
    if m < 2:
        return nb
    for k in range(m - 1):
        gmin = mins[2 * k + 2]
        den = _fmax(gmin, eps)
        ok[k] = (maxs[2 * k + 1] / den < theta_rel) and (maxs[2 * k + 3] / den < theta_rel)
        if ok[k] and not isnan(theta_abs) and not (gmin > theta_abs):
            ok[k] = 0
        if ok[k]:
            any_ok = True
    if not any_ok:
        return nb
    # walk old segments, folding dropped boundaries into the running segment
    o = 0
    w = 1
    cdef double acc = (b[1] - b[0]) * means[0]
    cdef double mn = mins[0], mx = maxs[0]
    cdef cnp.int64_t seg_start = b[0]
    for j in range(1, nb - 1):
        # boundary b[j] is dropped when it is the offset (2k+2) or next onset (2k+3) of a merged gap k
        if (j >= 2 and j % 2 == 0 and ok[(j - 2) // 2]) or (j >= 3 and j % 2 == 1 and ok[(j - 3) // 2]):
            acc = acc + (b[j + 1] - b[j]) * means[j]
            if mins[j] < mn:
                mn = mins[j]
            if maxs[j] > mx:
                mx = maxs[j]
            continue
        means[o] = _clip(acc / <double>(b[j] - seg_start), mn, mx)
        mins[o] = mn
        maxs[o] = mx
        o += 1
        seg_start = b[j]
        b[w] = b[j]
        w += 1
        acc = (b[j + 1] - b[j]) * means[j]
        mn = mins[j]
        mx = maxs[j]
    means[o] = _clip(acc / <double>(b[nb - 1] - seg_start), mn, mx)
    mins[o] = mn
    maxs[o] = mx
    b[w] = b[nb - 1]
    return w + 1


def merge(bounds, means, mins, maxs, double theta_rel, double theta_abs, double eps):
    b = np.array(bounds, dtype=np.int64)
    mu = np.array(means, dtype=np.float64)
    lo = np.array(mins, dtype=np.float64)
    hi = np.array(maxs, dtype=np.float64)
    ok = np.zeros(max(b.shape[0], 1), dtype=np.uint8)
    cdef Py_ssize_t nb = _merge(b, b.shape[0], mu, lo, hi, theta_rel, theta_abs, eps, ok)
    return b[:nb], mu[:nb - 1], lo[:nb - 1], hi[:nb - 1]


def decode_column(sp, Py_ssize_t h, Py_ssize_t pad, Py_ssize_t T, double theta_rel,
                  double theta_abs, bint signed, double tol, double eps):
    cdef double[::1] s = np.ascontiguousarray(sp, dtype=np.float64)
    cdef Py_ssize_t n = s.shape[0], i, c, nb, m, k, on, off, ne = 0
    shat_arr = np.zeros(n)
    cdef double[::1] shat = shat_arr
    _step(s, h, shat)
    cdef double[::1] change
    if signed:
        change = shat
    else:
        change = np.zeros(max(n - 1, 0))
        for i in range(n - 1):
            change[i] = abs(shat[i + 1] - shat[i])
    cdef Py_ssize_t nc = change.shape[0]
    pos_arr = np.zeros(max(nc, 1) + 4, dtype=np.int64)
    kind_arr = np.zeros(max(nc, 1) + 4, dtype=np.int8)
    b_arr = np.zeros(max(nc, 1) + 4, dtype=np.int64)
    cdef cnp.int64_t[::1] pos = pos_arr
    cdef cnp.int8_t[::1] kind = kind_arr
    cdef cnp.int64_t[::1] b = b_arr
    c = _scan(change, signed, tol, pos, kind) if nc >= 3 else 0
    nb = _boundaries(change, pos, kind, c, b)
    cs_arr = np.zeros(n + 1)
    means_arr = np.zeros(nb)
    mins_arr = np.zeros(nb)
    maxs_arr = np.zeros(nb)
    ok_arr = np.zeros(nb, dtype=np.uint8)
    cdef double[::1] cs = cs_arr
    _prefix(s, cs)
    _stats(s, cs, b, nb, means_arr, mins_arr, maxs_arr)
    nb = _merge(b, nb, means_arr, mins_arr, maxs_arr, theta_rel, theta_abs, eps, ok_arr)
    m = (nb - 1) // 2
    ons = np.zeros(m, dtype=np.int64)
    offs = np.zeros(m, dtype=np.int64)
    conf = np.zeros(m)
    cdef cnp.int64_t[::1] onv = ons
    cdef cnp.int64_t[::1] offv = offs
    cdef double[::1] cv = conf
    for k in range(m):
        on = b[2 * k + 1] - pad
        off = b[2 * k + 2] - pad
        on = 0 if on < 0 else (T if on > T else on)
        off = 0 if off < 0 else (T if off > T else off)
        if off > on:
            onv[ne] = on
            offv[ne] = off
            cv[ne] = _clip((cs[off + pad] - cs[on + pad]) / <double>(off - on), 0.0, 1.0)
            ne += 1
    return ons[:ne], offs[:ne], conf[:ne]
