"""Change-point machinery: step filter, delta scores, boundary search, merging.

Frame conventions
-----------------
Boundaries index the change-score sequence. Segment ``j`` covers frames
``[B[j], B[j+1])``; odd segments are event candidates, even segments between
two events are gaps. An event ``(on, off)`` therefore spans frames
``on .. off-1`` and maps to ``[on * hop, off * hop)`` seconds.

Change score
------------
``decode_class`` feeds the boundary search with the signed step-filter
response by default: its positive peaks are rising edges (onsets) and its
negative troughs falling edges (offsets). ``change_score="delta"`` uses the
absolute first difference of the response instead; that score is blind to
the edge direction and is kept for comparison only.
"""
from __future__ import annotations

import math
import warnings
from contextlib import contextmanager
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from . import kernels
from .stats import EPS, percentile

SIGN_TOL = 1e-9


class ShortClipWarning(UserWarning):
    """Score column shorter than the step filter; no events decoded."""


@dataclass
class SegmentStats:
    boundaries: np.ndarray
    means: np.ndarray
    mins: np.ndarray
    maxs: np.ndarray

    @property
    def n_events(self) -> int:
        return (len(self.boundaries) - 1) // 2

    def events(self) -> List[Tuple[int, int, float]]:
        b = self.boundaries
        return [(int(b[2 * k + 1]), int(b[2 * k + 2]), float(self.means[2 * k + 1]))
                for k in range(self.n_events)]


class _Counter:
    def __init__(self):
        self.pipeline_runs = 0


_active_counters: List[_Counter] = []


@contextmanager
def count_pipeline_runs():
    """Count ``decode_class`` calls made inside the block (same process only)."""
    c = _Counter()
    _active_counters.append(c)
    try:
        yield c
    finally:
        _active_counters.remove(c)


def step_filter(s_c, l_step_frames: int) -> np.ndarray:
    """Difference of the mean of the next ``h`` and previous ``h`` frames, ``h = l/2``.

    Outputs at ``t < h`` and ``t > T - h - 1`` are 0.
    """
    s = np.asarray(s_c, dtype=np.float64)
    l_step_frames = int(l_step_frames)
    if l_step_frames < 2 or l_step_frames % 2:
        raise ValueError(f"step filter length must be an even integer >= 2, got {l_step_frames}")
    if s.shape[0] < l_step_frames:
        raise ValueError(
            f"signal of {s.shape[0]} frames is shorter than the step filter ({l_step_frames}); "
            "use a shorter filter")
    return kernels.step_filter(s, l_step_frames // 2)


def delta_scores(s_hat) -> np.ndarray:
    s_hat = np.asarray(s_hat, dtype=np.float64)
    if s_hat.shape[0] < 2:
        raise ValueError("delta scores need at least 2 frames")
    return np.abs(np.diff(s_hat))


def find_boundary(delta, s_c, signed: bool = False) -> SegmentStats:
    """Boundary list and per-segment (mean, min, max) of ``s_c``.

    Scanning ``t = 2 .. len(delta)-1``: a local maximum at ``t-1`` is an onset
    candidate, a local minimum an offset candidate. Candidates are then put
    into alternating order (see ``kernels.build_boundaries``), framed by
    ``0`` and ``len(delta) - 1``. With ``signed``, ``delta`` is a signed
    change score and only positive maxima / negative minima count.
    """
    d = np.asarray(delta, dtype=np.float64)
    s = np.asarray(s_c, dtype=np.float64)
    if d.shape[0] < 3:
        raise ValueError("find_boundary needs at least 3 change scores")
    if s.shape[0] < d.shape[0]:
        raise ValueError("score column shorter than the change score sequence")
    on, off = kernels.scan_extrema(d, signed, SIGN_TOL)
    b = kernels.build_boundaries(d, on, off)
    means, mins, maxs = kernels.segment_stats(s, b)
    return SegmentStats(b, means, mins, maxs)


def merge_segments(seg: SegmentStats, theta_rel: float,
                   theta_abs: Optional[float] = None) -> List[Tuple[int, int, float]]:
    """Merge shallow gaps and return ``(onset_frame, offset_frame, mean_score)`` events.

    Gap ``k`` is merged when both ``max(event k) / min(gap k)`` and
    ``max(event k+1) / min(gap k)`` are below ``theta_rel`` and, if
    ``theta_abs`` is given, ``min(gap k) > theta_abs``. The offset frame is
    exclusive.
    """
    b, means, mins, maxs = kernels.merge(
        seg.boundaries, seg.means, seg.mins, seg.maxs, float(theta_rel),
        math.nan if theta_abs is None else float(theta_abs), EPS)
    return SegmentStats(b, means, mins, maxs).events()


def l_step_to_frames(l_step_s: float, hop_seconds: float) -> int:
    """Nearest even frame count (halves round up), at least 2."""
    half = math.floor(l_step_s / (2.0 * hop_seconds) + 0.5 + 1e-9)
    return max(2, 2 * int(half))


def pad_column(s: np.ndarray, pad: int, pad_mode: str = "floor") -> np.ndarray:
    """Extend a column by ``pad`` frames on both sides.

    ``"floor"`` pads with the 10th-percentile level, i.e. assumes background
    outside the clip, so an event cut by the clip start or end still shows
    an edge there. ``"edge"`` repeats the first and last frames.
    """
    if pad_mode == "floor":
        return np.pad(s, pad, mode="constant", constant_values=percentile(s, 10.0))
    if pad_mode == "edge":
        return np.pad(s, pad, mode="edge")
    raise ValueError(f"unknown pad mode {pad_mode!r}")


def decode_class(s_c, hop_seconds: float, l_step_s: float, theta_rel: float,
                 theta_abs: Optional[float] = None, change_score: str = "signed",
                 pad_mode: str = "floor") -> List[Tuple[float, float, float]]:
    """Decode one score column into ``(onset_s, offset_s, confidence)`` events.

    The column is padded by ``h + 1`` frames (see ``pad_column``) so that
    events touching the clip start or end are bounded; the padding is
    removed afterwards and confidences are means over the unpadded event
    frames.
    """
    for c in _active_counters:
        c.pipeline_runs += 1
    if change_score not in ("signed", "delta"):
        raise ValueError(f"unknown change score {change_score!r}")
    s = np.asarray(s_c, dtype=np.float64)
    frames = l_step_to_frames(l_step_s, hop_seconds)
    T = s.shape[0]
    if T < frames:
        warnings.warn(f"{T} frames < step filter length {frames}; no events", ShortClipWarning,
                      stacklevel=2)
        return []
    h = frames // 2
    pad = h + 1
    sp = pad_column(s, pad, pad_mode)
    ons, offs, conf = kernels.decode_column(
        sp, h, pad, T, float(theta_rel), math.nan if theta_abs is None else float(theta_abs),
        change_score == "signed", SIGN_TOL, EPS)
    return [(float(a) * hop_seconds, float(b) * hop_seconds, float(c))
            for a, b, c in zip(ons, offs, conf)]
