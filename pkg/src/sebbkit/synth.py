"""Synthetic posteriograms with known ground truth.

Every clip draws from its own stream ``np.random.default_rng([seed, clip])``
so clips can be generated in any order. Events are frame aligned: an event
on frames ``[a, b)`` is annotated as ``[a * hop, b * hop)`` seconds.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .io import (AnnotationSet, ClipEntry, CorpusManifest, DEFAULT_HOP_SECONDS, EventBox, ScoreMatrix,
                 write_annotations, write_manifest, write_score_matrix)

SYNTH_ALGORITHM = "sebbkit-synth/1 (numpy PCG64, SeedSequence([seed, clip_index]))"


class SynthError(ValueError):
    pass


@dataclass(frozen=True)
class SynthSpec:
    clips: int = 200
    classes: int = 10
    clip_duration_s: float = 10.0
    hop_seconds: float = DEFAULT_HOP_SECONDS
    events_per_class: Tuple[int, int] = (0, 2)
    event_duration_s: Tuple[float, float] = (0.5, 3.0)
    foreground_level: Tuple[float, float] = (0.7, 0.98)
    background_level: Tuple[float, float] = (0.02, 0.2)
    smoothing_width_frames: int = 3
    noise_level: float = 0.0
    min_gap_s: float = 1.0
    edge_margin_s: float = 0.0
    gap_dip_depth: Optional[float] = None
    dip_width_frames: int = 6
    seed: int = 0

    def __post_init__(self):
        for name in ("events_per_class", "event_duration_s", "foreground_level", "background_level"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if self.clips < 0 or self.classes < 1:
            raise SynthError("need clips >= 0 and classes >= 1")
        if not self.hop_seconds > 0 or not self.clip_duration_s > 0:
            raise SynthError("hop and clip duration must be positive")
        lo, hi = self.events_per_class
        if not 0 <= lo <= hi:
            raise SynthError(f"bad events_per_class range {self.events_per_class}")
        dlo, dhi = self.event_duration_s
        if not 0 < dlo <= dhi:
            raise SynthError(f"bad event duration range {self.event_duration_s}")
        flo, fhi = self.foreground_level
        blo, bhi = self.background_level
        if not (0 <= blo <= bhi < flo <= fhi <= 1):
            raise SynthError("levels must satisfy 0 <= background < foreground <= 1")
        if self.noise_level < 0 or self.smoothing_width_frames < 1 or self.seed < 0:
            raise SynthError("noise_level >= 0, smoothing width >= 1 and seed >= 0 required")
        if self.gap_dip_depth is not None and not 0 < self.gap_dip_depth < 1:
            raise SynthError("gap_dip_depth must lie in (0, 1)")
        worst = hi * self._frames(dhi) + max(hi - 1, 0) * self.gap_frames
        if worst > self.n_frames - 2 * self.margin_frames:
            raise SynthError(f"{hi} events of up to {dhi} s do not fit in a {self.clip_duration_s} s clip")

    def _frames(self, seconds: float) -> int:
        return max(1, int(round(seconds / self.hop_seconds)))

    @property
    def n_frames(self) -> int:
        return int(round(self.clip_duration_s / self.hop_seconds))

    @property
    def gap_frames(self) -> int:
        return int(math.ceil(self.min_gap_s / self.hop_seconds - 1e-9))

    @property
    def margin_frames(self) -> int:
        return int(math.ceil(self.edge_margin_s / self.hop_seconds - 1e-9))

    @property
    def class_names(self) -> List[str]:
        return [f"class_{i:02d}" for i in range(self.classes)]


def smooth(x: np.ndarray, width: int) -> np.ndarray:
    """Moving average with edge padding; output has the input length."""
    if width <= 1:
        return x.copy()
    left = width // 2
    xp = np.pad(x, (left, width - 1 - left), mode="edge")
    return np.convolve(xp, np.ones(width) / width, mode="valid")


def render_column(n_frames: int, events: Sequence[Tuple[int, int]], levels: Sequence[float],
                  background: float, smoothing_width: int = 1, noise: Optional[np.ndarray] = None,
                  dips: Sequence[Tuple[int, int, float]] = ()) -> np.ndarray:
    """Rectangles ``[a, b)`` at ``levels`` over a flat background, then noise, smoothing and clamping."""
    x = np.full(n_frames, float(background))
    for (a, b), lev in zip(events, levels):
        x[a:b] = lev
    for a, b, lev in dips:
        x[a:b] = lev
    if noise is not None:
        x = x + noise
    return np.clip(smooth(x, smoothing_width), 0.0, 1.0)


def _place(rng: np.random.Generator, spec: SynthSpec, n: int) -> List[Tuple[int, int]]:
    durs = [spec._frames(d) for d in rng.uniform(*spec.event_duration_s, size=n)]
    usable = spec.n_frames - 2 * spec.margin_frames
    slack = usable - sum(durs) - max(n - 1, 0) * spec.gap_frames
    if slack < 0:
        raise SynthError("infeasible packing")
    cuts = np.sort(rng.integers(0, slack + 1, size=n))
    out, pos, prev = [], spec.margin_frames, 0
    for d, c in zip(durs, cuts):
        pos += int(c) - prev
        prev = int(c)
        out.append((pos, pos + d))
        pos += d + spec.gap_frames
    return out


def generate_clip(spec: SynthSpec, rng: np.random.Generator, clip_id: str = "clip"
                  ) -> Tuple[ScoreMatrix, List[EventBox]]:
    T, hop = spec.n_frames, spec.hop_seconds
    cols, truth = [], []
    for label in spec.class_names:
        n = int(rng.integers(spec.events_per_class[0], spec.events_per_class[1] + 1))
        background = float(rng.uniform(*spec.background_level))
        events = _place(rng, spec, n)
        levels = rng.uniform(*spec.foreground_level, size=n)
        dips = []
        if spec.gap_dip_depth is not None:
            for (a, b), lev in zip(events, levels):
                w = spec.dip_width_frames
                if b - a >= w + 4:
                    mid = (a + b - w) // 2
                    dips.append((mid, mid + w, lev * (1.0 - spec.gap_dip_depth)))
        noise = rng.uniform(-spec.noise_level, spec.noise_level, size=T) if spec.noise_level > 0 else None
        cols.append(render_column(T, events, levels, background, spec.smoothing_width_frames, noise, dips))
        truth += [EventBox(clip_id, label, a * hop, b * hop) for a, b in events]
    m = ScoreMatrix(clip_id, np.stack(cols, axis=1), spec.class_names, hop)
    return m, truth


def clip_rng(spec: SynthSpec, index: int) -> np.random.Generator:
    return np.random.default_rng([spec.seed, index])


def generate(spec: SynthSpec) -> Tuple[List[ScoreMatrix], AnnotationSet]:
    """In-memory corpus: score matrices and their annotations."""
    matrices, entries, durations = [], [], {}
    for i in range(spec.clips):
        cid = f"clip_{i:04d}"
        m, truth = generate_clip(spec, clip_rng(spec, i), cid)
        matrices.append(m)
        entries += [(e.clip_id, e.class_label, e.onset_s, e.offset_s) for e in truth]
        durations[cid] = spec.clip_duration_s
    return matrices, AnnotationSet(entries, durations)


def generate_corpus(spec: SynthSpec, out_dir) -> CorpusManifest:
    """Write ``scores/<clip>.csv``, ``truth.tsv`` and ``manifest.json`` under ``out_dir``."""
    out = Path(out_dir)
    (out / "scores").mkdir(parents=True, exist_ok=True)
    matrices, truth = generate(spec)
    clips = []
    for m in matrices:
        path = out / "scores" / f"{m.clip_id}.csv"
        write_score_matrix(m, path)
        clips.append(ClipEntry(m.clip_id, path, spec.clip_duration_s))
    write_annotations(truth, out / "truth.tsv")
    manifest = CorpusManifest(clips, spec.hop_seconds, spec.class_names,
                              {"algorithm": SYNTH_ALGORITHM, "spec": asdict(spec)})
    write_manifest(manifest, out / "manifest.json")
    return manifest
