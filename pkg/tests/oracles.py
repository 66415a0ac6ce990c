"""Plain-loop reference transcriptions used as test oracles.

Written without numpy vectorisation and without sharing code with the
package, so agreement is meaningful.
"""
import math

EPS = 1e-8


def oracle_percentile(values, p):
    xs = sorted(values)
    pos = p / 100.0 * (len(xs) - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (xs[hi] - xs[lo]) * (pos - lo)


def oracle_moments(s):
    T = len(s)
    mu = sum(s) / T
    var = sum((x - mu) ** 2 for x in s) / T
    return mu, math.sqrt(var)


def oracle_cal_stats(s, mu, sigma):
    T = len(s)
    nl = oracle_percentile(s, 10)
    mask = [1 if s[t] > mu + 0.5 * sigma else 0 for t in range(T)]
    sl = sum(s[t] * mask[t] for t in range(T)) / T
    t_e = sum(mask)
    e_c = 0
    in_event = False
    for t in range(T):
        if mask[t] == 1 and not in_event:
            e_c += 1
            in_event = True
        elif mask[t] == 0:
            in_event = False
    pcr = 10 * math.log10(sl / max(nl, EPS))
    dur = t_e / max(e_c, EPS)
    return pcr, dur


def oracle_step_filter(s, l_step):
    h = l_step // 2
    out = [0.0] * len(s)
    for t in range(h, len(s) - h):
        right = 0.0
        for i in range(t, t + h):
            right += s[i]
        left = 0.0
        for i in range(t - h, t):
            left += s[i]
        out[t] = (right - left) / h
    return out


def oracle_delta(s_hat):
    return [abs(s_hat[t + 1] - s_hat[t]) for t in range(len(s_hat) - 1)]


def _seg_stats(s, start, end):
    seg = s[start:end]
    return (sum(seg) / len(seg), min(seg), max(seg))


def oracle_find_boundary(delta, s):
    t_on, t_off = [], []
    for t in range(2, len(delta)):
        if delta[t] <= delta[t - 1] and delta[t - 1] > delta[t - 2]:
            t_on.append(t - 1)
        elif delta[t] > delta[t - 1] and delta[t - 1] <= delta[t - 2]:
            t_off.append(t - 1)
    if len(t_on) > len(t_off):
        t_off.append(len(delta) - 1)
    B = [0]
    for i in range(len(t_on)):
        B.append(t_on[i])
        B.append(t_off[i])
    B.append(len(delta) - 1)
    S = [_seg_stats(s, B[j], B[j + 1]) for j in range(len(B) - 1)]
    return B, S


def oracle_merge(B, S, theta_rel, s):
    """Gap j (between events j and j+1) merges when both flank maxima over its min are below theta_rel.

    Gap minima below EPS are floored at EPS in the ratio denominator.
    Merged segments get their statistics recomputed from ``s``.
    """
    B = list(B)
    if len(B) >= 6:
        s_max = [S[j][2] for j in range(1, len(S), 2)]
        s_min = [S[j][1] for j in range(2, len(S), 2)]
        idx = []
        for j in range(len(s_max) - 1):
            if j >= len(s_min):
                break
            den = max(s_min[j], EPS)
            r0 = s_max[j] / den
            r1 = s_max[j + 1] / den
            if r0 < theta_rel and r1 < theta_rel:
                idx.append(j)
        for j in sorted(idx, reverse=True):
            del B[2 * j + 3]
            del B[2 * j + 2]
        S = [_seg_stats(s, B[j], B[j + 1]) for j in range(len(B) - 1)]
    onsets = B[1::2][: (len(B) - 1) // 2]
    offsets = B[2::2][: (len(B) - 1) // 2]
    means = [S[j][0] for j in range(1, len(S), 2)][: len(onsets)]
    return list(zip(onsets, offsets, means))


def oracle_theta_rel(pcr):
    if 0 <= pcr < 10:
        return pcr / 10 * 0.1 + 2.0
    if 10 <= pcr < 20:
        return (pcr - 10) / (20 - 10) * 0.3 + 2.4
    if 20 <= pcr < 30:
        return (pcr - 20) / (30 - 20) * 0.3 + 2.8
    if 30 <= pcr < 50:
        return (pcr - 30) / (50 - 30) * 0.3 + 3.2
    raise ValueError(pcr)


def oracle_staircase_psds(points_per_class, alpha_st, efpr_max):
    """Area under mean - alpha*std of per-class best-TPR staircases, by brute force over breakpoints.

    ``points_per_class`` maps class -> list of (efpr, tpr).
    """
    classes = sorted(points_per_class)
    cuts = sorted({0.0} | {e for pts in points_per_class.values() for e, _ in pts if e < efpr_max})
    cuts.append(efpr_max)
    area = 0.0
    for a, b in zip(cuts, cuts[1:]):
        r = []
        for c in classes:
            best = 0.0
            for e, tp in points_per_class[c]:
                if e <= a and tp > best:
                    best = tp
            r.append(best)
        mean = sum(r) / len(r)
        std = math.sqrt(sum((x - mean) ** 2 for x in r) / len(r))
        area += max(0.0, mean - alpha_st * std) * (b - a)
    return area / efpr_max
