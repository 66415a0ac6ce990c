"""Per-class score descriptors and the adaptive parameter lookup of nSEBBs.

Durations are measured in frames throughout. The duration bins of the
lookup tables (up to 200) are frame counts; at the default 64 ms hop they
cover events of up to 12.8 s.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

EPS = 1e-8

# (upper bin edge, value); lower edge of the first bin is 0.
DUR_BIN_EDGES = (20.0, 40.0, 90.0, 200.0)
L_STEP_BY_DUR = (0.384, 0.512, 0.640, 0.800)
THETA_ABS_BY_DUR = (0.12, 0.18, 0.24, 0.3)
PCR_BIN_EDGES = (10.0, 20.0, 30.0, 50.0)
THETA_BASE_BY_PCR = (2.0, 2.4, 2.8, 3.2)
PCR_MAX = PCR_BIN_EDGES[-1]


@dataclass(frozen=True)
class ClassStats:
    mu: float
    sigma: float
    pcr: float
    dur: float
    noise_level: float
    signal_level: float
    active_frames: int = 0
    active_runs: int = 0


@dataclass(frozen=True)
class AdaptiveConfig:
    l_step_s: float
    theta_base: float
    theta_rel: float
    theta_abs: Optional[float] = None


def moments(s) -> tuple[float, float]:
    """Mean and population standard deviation of a score column."""
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0:
        raise ValueError("moments of an empty sequence")
    mu = float(s.mean())
    return mu, float(np.sqrt(np.mean((s - mu) ** 2)))


def percentile(values, p: float) -> float:
    """Linear-interpolation percentile: position ``p/100 * (n-1)`` in the sorted values."""
    v = np.sort(np.asarray(values, dtype=np.float64))
    if v.size == 0:
        raise ValueError("percentile of an empty sequence")
    if not 0.0 <= p <= 100.0:
        raise ValueError(f"percentile rank {p} outside [0, 100]")
    pos = p / 100.0 * (v.size - 1)
    lo = int(math.floor(pos))
    hi = min(lo + 1, v.size - 1)
    frac = pos - lo
    return float(v[lo] + (v[hi] - v[lo]) * frac)


def count_runs(mask: np.ndarray) -> int:
    if mask.size == 0:
        return 0
    m = mask.astype(np.int8)
    return int(m[0]) + int(np.count_nonzero(np.diff(m) == 1))


def cal_stats(s, mu: float, sigma: float) -> ClassStats:
    """Noise floor, masked signal level, contrast ratio and mean run length.

    The mask keeps frames strictly above ``mu + 0.5 * sigma``. ``sl`` is the
    masked sum divided by *all* frames, and both ``sl`` and ``nl`` are
    floored at ``EPS`` so the contrast ratio stays finite.
    """
    s = np.asarray(s, dtype=np.float64)
    if s.size == 0:
        raise ValueError("cal_stats of an empty sequence")
    nl = percentile(s, 10)
    mask = s > (mu + 0.5 * sigma)
    sl = float(np.sum(s * mask) / s.size)
    active = int(mask.sum())
    runs = count_runs(mask)
    pcr = 10.0 * math.log10(max(sl, EPS) / max(nl, EPS))
    dur = active / max(runs, EPS)
    return ClassStats(mu, sigma, pcr, dur, nl, sl, active, runs)


def _bin(x: float, edges) -> int:
    for i, hi in enumerate(edges):
        if x < hi:
            return i
    return len(edges) - 1


def theta_rel_from_pcr(pcr: float) -> tuple[float, float]:
    """Relative merge threshold for a contrast ratio, after clamping into [0, 50).

    Returns ``(theta_base, theta_rel)``.
    """
    pcr = min(max(pcr, 0.0), math.nextafter(PCR_MAX, 0.0))
    i = _bin(pcr, PCR_BIN_EDGES)
    base = THETA_BASE_BY_PCR[i]
    if i == 0:
        rel = pcr / 10.0 * 0.1 + base
    elif i == 1:
        rel = (pcr - 10.0) / (20.0 - 10.0) * 0.3 + base
    elif i == 2:
        rel = (pcr - 20.0) / (30.0 - 20.0) * 0.3 + base
    else:
        # float rounding can reach 3.5 just below pcr = 50; keep the range half-open
        rel = min((pcr - 30.0) / (50.0 - 30.0) * 0.3 + base, math.nextafter(base + 0.3, 0.0))
    return base, rel


def adaptive_parameters(stats: ClassStats, dual_threshold: bool = False) -> AdaptiveConfig:
    dur_bin = _bin(max(stats.dur, 0.0), DUR_BIN_EDGES)
    base, rel = theta_rel_from_pcr(stats.pcr)
    return AdaptiveConfig(
        l_step_s=L_STEP_BY_DUR[dur_bin],
        theta_base=base,
        theta_rel=rel,
        theta_abs=THETA_ABS_BY_DUR[dur_bin] if dual_threshold else None,
    )
