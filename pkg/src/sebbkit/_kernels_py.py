"""NumPy implementation of the per-column decoding kernels.

This is the fallback for ``sebbkit._kernels`` (Cython) and defines its
semantics: both backends accumulate every window sum and segment sum in the
same sequential order, so they agree bit for bit.

``theta_abs`` is passed as NaN when the absolute gate is off.
"""
import math

import numpy as np

ONSET = 1
OFFSET = -1


def step_filter(s, h):
    s = np.ascontiguousarray(s, dtype=np.float64)
    T = s.shape[0]
    out = np.zeros(T)
    n = T - 2 * h
    if n <= 0:
        return out
    right = np.zeros(n)
    left = np.zeros(n)
    for k in range(h):
        right += s[h + k:h + k + n]
        left += s[k:k + n]
    out[h:T - h] = (right - left) / h
    return out


def scan_extrema(d, signed, tol):
    """Local maxima (onset candidates) and minima (offset candidates) of ``d``.

    A maximum at ``t-1`` ends a strict rise, a minimum at ``t-1`` starts one.
    With ``signed`` set, maxima must exceed ``tol`` and minima lie below ``-tol``.
    """
    d = np.asarray(d, dtype=np.float64)
    if d.shape[0] < 3:
        return np.zeros(0, np.int64), np.zeros(0, np.int64)
    d0, d1, d2 = d[:-2], d[1:-1], d[2:]
    is_on = (d2 <= d1) & (d1 > d0)
    is_off = (d2 > d1) & (d1 <= d0)
    if signed:
        is_on &= d1 > tol
        is_off &= d1 < -tol
    return np.flatnonzero(is_on) + 1, np.flatnonzero(is_off) + 1


def build_boundaries(d, onsets, offsets):
    """Interleave candidates into ``[0, on0, off0, on1, off1, ..., n-1]``.

    Same-kind runs keep their strongest member (largest onset score, smallest
    offset score, earliest on ties). A leading offset has no onset to pair
    with and is dropped; a trailing onset is closed at ``n - 1``.
    """
    d = np.asarray(d, dtype=np.float64)
    n = d.shape[0]
    cands = sorted([(int(p), ONSET) for p in onsets] + [(int(p), OFFSET) for p in offsets])
    seq = []
    for pos, kind in cands:
        if seq and seq[-1][1] == kind:
            prev = seq[-1][0]
            if (kind == ONSET and d[pos] > d[prev]) or (kind == OFFSET and d[pos] < d[prev]):
                seq[-1] = (pos, kind)
        else:
            seq.append((pos, kind))
    if seq and seq[0][1] == OFFSET:
        seq.pop(0)
    if seq and seq[-1][1] == ONSET:
        seq.append((n - 1, OFFSET))
    bounds = [0] + [p for p, _ in seq]
    if bounds[-1] != n - 1:
        bounds.append(n - 1)
    return np.asarray(bounds, dtype=np.int64)


def _prefix(s):
    cs = np.zeros(s.shape[0] + 1)
    np.cumsum(s, out=cs[1:])
    return cs


def segment_stats(s, bounds):
    """(mean, min, max) of ``s[b[j]:b[j+1]]`` for consecutive boundaries."""
    s = np.asarray(s, dtype=np.float64)
    b = np.asarray(bounds, dtype=np.int64)
    cs = _prefix(s)
    starts, ends = b[:-1], b[1:]
    means = (cs[ends] - cs[starts]) / (ends - starts)
    head = s[:b[-1]]
    mins = np.minimum.reduceat(head, starts) if starts.size else np.zeros(0)
    maxs = np.maximum.reduceat(head, starts) if starts.size else np.zeros(0)
    return np.clip(means, mins, maxs), mins, maxs


def merge(bounds, means, mins, maxs, theta_rel, theta_abs, eps):
    """Merge every gap whose dip is shallow relative to both flanking events.

    Gap ``k`` sits between events ``k`` and ``k+1``; the merge set is decided
    once from the input statistics, then merged segments are re-aggregated
    from their parts (length-weighted mean, min of mins, max of maxs).
    """
    b = np.asarray(bounds, dtype=np.int64)
    m = (b.shape[0] - 1) // 2
    if m < 2:
        return b, means, mins, maxs
    ev_max = maxs[1:2 * m:2]
    gap_min = mins[2:2 * m - 1:2]
    den = np.maximum(gap_min, eps)
    ok = (ev_max[:-1] / den < theta_rel) & (ev_max[1:] / den < theta_rel)
    if not math.isnan(theta_abs):
        ok &= gap_min > theta_abs
    if not ok.any():
        return b, means, mins, maxs
    drop = np.zeros(b.shape[0], dtype=bool)
    ks = np.flatnonzero(ok)
    drop[2 * ks + 2] = True
    drop[2 * ks + 3] = True
    nb = b[~drop]
    lengths = (b[1:] - b[:-1]).astype(np.float64)
    # old segment j starts at b[j]; it belongs to the last kept boundary <= b[j]
    owner = np.cumsum(~drop[:-1]) - 1
    first = np.flatnonzero(np.r_[True, owner[1:] != owner[:-1]])
    acc = np.bincount(owner, weights=lengths * means, minlength=nb.shape[0] - 1)
    nmins = np.minimum.reduceat(mins, first)
    nmaxs = np.maximum.reduceat(maxs, first)
    nmeans = acc / (nb[1:] - nb[:-1])
    return nb, np.clip(nmeans, nmins, nmaxs), nmins, nmaxs


def decode_column(sp, h, pad, T, theta_rel, theta_abs, signed, tol, eps):
    """Full per-column pipeline on an edge-padded score column.

    Returns onset frames, exclusive offset frames (both in unpadded
    coordinates, clipped to ``[0, T]``) and mean raw score per event.
    """
    sp = np.ascontiguousarray(sp, dtype=np.float64)
    shat = step_filter(sp, h)
    change = shat if signed else np.abs(np.diff(shat))
    on, off = scan_extrema(change, signed, tol)
    b = build_boundaries(change, on, off)
    means, mins, maxs = segment_stats(sp, b)
    b, means, mins, maxs = merge(b, means, mins, maxs, theta_rel, theta_abs, eps)
    m = (b.shape[0] - 1) // 2
    ons = np.clip(b[1:2 * m:2] - pad, 0, T)
    offs = np.clip(b[2:2 * m + 1:2] - pad, 0, T)
    keep = offs > ons
    ons, offs = ons[keep], offs[keep]
    cs = _prefix(sp)
    conf = (cs[offs + pad] - cs[ons + pad]) / (offs - ons)
    return ons.astype(np.int64), offs.astype(np.int64), np.clip(conf, 0.0, 1.0)
