"""Readers and writers for score matrices, annotations, detections and manifests.

File formats
------------
Score CSV
    Header ``frame,<class1>,...,<classC>``, one row per frame, 0-based
    contiguous frame index, scores in [0, 1].
Annotation / detection TSV
    DCASE column order ``filename onset offset event_label`` (detections add
    a trailing ``confidence`` column). Times are written with 6 decimals.
Manifest JSON
    ``{"format": ..., "hop_seconds": ..., "classes": [...], "clips": [...]}``
    where every clip is ``{"clip_id", "scores", "duration_s"}`` and score
    paths are relative to the manifest's directory.
"""
from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

DEFAULT_HOP_SECONDS = 0.064
MANIFEST_FORMAT = "sebbkit-manifest/1"
TIME_DECIMALS = 6
TIME_TOL = 1e-6

ANNOTATION_HEADER = ["filename", "onset", "offset", "event_label"]
DETECTION_HEADER = ANNOTATION_HEADER + ["confidence"]


class ParseError(ValueError):
    """Input file is syntactically malformed."""


class ValidationError(ValueError):
    """Input parsed but violates a domain invariant."""


@dataclass
class ScoreMatrix:
    """Frame-level class posteriors of one clip, shape ``(T, C)``."""

    clip_id: str
    scores: np.ndarray
    class_names: List[str]
    hop_seconds: float = DEFAULT_HOP_SECONDS

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=np.float64)
        self.class_names = list(self.class_names)
        if self.scores.ndim != 2:
            raise ValidationError(f"{self.clip_id}: score matrix must be 2-D, got shape {self.scores.shape}")
        n_frames, n_classes = self.scores.shape
        if n_frames < 1 or n_classes < 1:
            raise ValidationError(f"{self.clip_id}: score matrix needs T >= 1 and C >= 1, got {self.scores.shape}")
        if len(self.class_names) != n_classes:
            raise ValidationError(
                f"{self.clip_id}: {len(self.class_names)} class names for {n_classes} score columns")
        if len(set(self.class_names)) != n_classes:
            raise ValidationError(f"{self.clip_id}: duplicate class names")
        if not np.all(np.isfinite(self.scores)) or self.scores.min() < 0.0 or self.scores.max() > 1.0:
            raise ValidationError(f"{self.clip_id}: scores must lie in [0, 1]")
        if not self.hop_seconds > 0:
            raise ValidationError(f"{self.clip_id}: hop_seconds must be positive")

    @property
    def n_frames(self) -> int:
        return self.scores.shape[0]

    @property
    def n_classes(self) -> int:
        return self.scores.shape[1]

    def column(self, class_name: str) -> np.ndarray:
        return self.scores[:, self.class_names.index(class_name)]


@dataclass(frozen=True)
class EventBox:
    """One detected (or reference) event: ``(clip, class, onset, offset, confidence)``."""

    clip_id: str
    class_label: str
    onset_s: float
    offset_s: float
    confidence: float = 1.0

    def __post_init__(self):
        if not (self.onset_s >= 0.0 and self.offset_s > self.onset_s):
            raise ValidationError(
                f"{self.clip_id}/{self.class_label}: need 0 <= onset < offset, "
                f"got ({self.onset_s}, {self.offset_s})")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValidationError(f"{self.clip_id}/{self.class_label}: confidence {self.confidence} outside [0, 1]")

    @property
    def duration(self) -> float:
        return self.offset_s - self.onset_s

    def sort_key(self) -> Tuple:
        return (self.clip_id, self.class_label, self.onset_s, self.offset_s)


@dataclass
class AnnotationSet:
    """Ground-truth events plus the duration of every evaluated clip.

    Clips without any event still belong in ``clip_durations``; they count
    towards the false-positive rate denominator of PSDS.
    """

    entries: List[Tuple[str, str, float, float]] = field(default_factory=list)
    clip_durations: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        self.entries = [(str(c), str(lab), float(on), float(off)) for c, lab, on, off in self.entries]
        for i, (clip, label, onset, offset) in enumerate(self.entries):
            if not (onset >= 0.0 and onset < offset):
                raise ValidationError(f"annotation {i} ({clip}, {label}): need 0 <= onset < offset, got {onset}, {offset}")
            dur = self.clip_durations.get(clip)
            if dur is not None and offset > dur + TIME_TOL:
                raise ValidationError(
                    f"annotation {i} ({clip}, {label}): offset {offset} exceeds clip duration {dur}")

    @property
    def clip_ids(self) -> List[str]:
        ids = set(self.clip_durations) | {e[0] for e in self.entries}
        return sorted(ids)

    @property
    def class_labels(self) -> List[str]:
        return sorted({e[1] for e in self.entries})

    def by_clip(self) -> Dict[str, List[Tuple[str, float, float]]]:
        groups: Dict[str, List[Tuple[str, float, float]]] = {}
        for clip, label, onset, offset in self.entries:
            groups.setdefault(clip, []).append((label, onset, offset))
        return groups

    def total_duration_s(self) -> float:
        return float(sum(self.clip_durations.values()))

    def as_events(self) -> List[EventBox]:
        return [EventBox(c, lab, on, off, 1.0) for c, lab, on, off in self.entries]


@dataclass(frozen=True)
class ClipEntry:
    clip_id: str
    score_path: Path
    duration_s: float


@dataclass
class CorpusManifest:
    clips: List[ClipEntry]
    hop_seconds: float = DEFAULT_HOP_SECONDS
    class_names: List[str] = field(default_factory=list)
    generator: Optional[dict] = None

    def __post_init__(self):
        ids = [c.clip_id for c in self.clips]
        if len(set(ids)) != len(ids):
            raise ValidationError("manifest clip ids must be unique")
        if not self.hop_seconds > 0:
            raise ValidationError("manifest hop_seconds must be positive")

    @property
    def clip_durations(self) -> Dict[str, float]:
        return {c.clip_id: c.duration_s for c in self.clips}


def _fmt_time(x: float) -> str:
    return f"{x:.{TIME_DECIMALS}f}"


def load_score_matrix(path, hop_seconds: float = DEFAULT_HOP_SECONDS, clip_id: Optional[str] = None) -> ScoreMatrix:
    """Read a per-clip score CSV.

    Raises
    ------
    ParseError
        Bad header, non-numeric cell, wrong column count or a frame index
        that is not contiguous from 0; the message carries the line number.
    ValidationError
        Empty file or a score outside [0, 1].
    """
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValidationError(f"{path}: empty score file")
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "frame":
        raise ParseError(f"{path}:1: header must be 'frame,<class1>,...', got {rows[0]!r}")
    class_names = header[1:]
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValidationError(f"{path}: no frames")
    scores = np.empty((len(body), len(class_names)))
    k = 0
    for i, row in enumerate(rows[1:]):
        lineno = i + 2
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(f"{path}:{lineno}: expected {len(header)} columns, got {len(row)}")
        try:
            frame = int(row[0])
            values = [float(v) for v in row[1:]]
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if frame != k:
            raise ParseError(f"{path}:{lineno}: frame index {frame}, expected {k}")
        scores[k] = values
        k += 1
    bad = ~np.isfinite(scores) | (scores < 0.0) | (scores > 1.0)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ValidationError(
            f"{path}:{r + 2}: score {scores[r, c]!r} for class {class_names[c]!r} outside [0, 1]")
    return ScoreMatrix(clip_id or path.stem, scores, class_names, hop_seconds)


def write_score_matrix(m: ScoreMatrix, path, decimals: int = 6) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        f.write(",".join(["frame"] + m.class_names) + "\n")
        fmt = f"{{:.{decimals}f}}"
        for t, row in enumerate(m.scores):
            f.write(",".join([str(t)] + [fmt.format(v) for v in row]) + "\n")


def _read_tsv(path, header: Sequence[str], optional: Sequence[str] = ()) -> List[Tuple[int, Dict[str, str]]]:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f, delimiter="\t"))
    if not rows:
        raise ParseError(f"{path}:1: missing header")
    got = [h.strip() for h in rows[0]]
    allowed = list(header) + list(optional)
    unknown = [h for h in got if h not in allowed]
    missing = [h for h in header if h not in got]
    if unknown or missing:
        raise ParseError(f"{path}:1: unknown columns {unknown}, missing columns {missing}")
    out = []
    for i, row in enumerate(rows[1:]):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(got):
            raise ParseError(f"{path}:{i + 2}: expected {len(got)} fields, got {len(row)}")
        out.append((i + 2, dict(zip(got, (c.strip() for c in row)))))
    return out


def load_annotations(path, clip_durations: Optional[Dict[str, float]] = None) -> AnnotationSet:
    """Read a DCASE ground-truth TSV.

    ``clip_durations`` (typically from a manifest) is attached to the result
    and used to bound offsets; clips missing from it get no duration check.
    """
    entries = []
    for lineno, rec in _read_tsv(path, ANNOTATION_HEADER):
        try:
            onset, offset = float(rec["onset"]), float(rec["offset"])
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        if not onset < offset:
            raise ValidationError(f"{path}:{lineno}: onset {onset} must be < offset {offset}")
        entries.append((rec["filename"], rec["event_label"], onset, offset))
    return AnnotationSet(entries, dict(clip_durations or {}))


def write_annotations(ann: AnnotationSet, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write("\t".join(ANNOTATION_HEADER) + "\n")
        for clip, label, onset, offset in sorted(ann.entries, key=lambda e: (e[0], e[2], e[1], e[3])):
            f.write(f"{clip}\t{_fmt_time(onset)}\t{_fmt_time(offset)}\t{label}\n")


def write_events(events: Iterable[EventBox], path) -> None:
    try:
        with open(path, "w", encoding="utf-8") as f:
            f.write("\t".join(DETECTION_HEADER) + "\n")
            for e in events:
                f.write(f"{e.clip_id}\t{_fmt_time(e.onset_s)}\t{_fmt_time(e.offset_s)}\t"
                        f"{e.class_label}\t{_fmt_time(e.confidence)}\n")
    except OSError as exc:
        raise OSError(f"cannot write detections to {path}: {exc}") from exc


def read_events(path) -> List[EventBox]:
    """Read a detection TSV; a missing confidence column means confidence 1."""
    events = []
    for lineno, rec in _read_tsv(path, ANNOTATION_HEADER, optional=["confidence"]):
        try:
            onset, offset = float(rec["onset"]), float(rec["offset"])
            conf = float(rec.get("confidence", 1.0))
        except ValueError as exc:
            raise ParseError(f"{path}:{lineno}: {exc}") from None
        try:
            events.append(EventBox(rec["filename"], rec["event_label"], onset, offset, conf))
        except ValidationError as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    return events


def load_manifest(path, hop_seconds: Optional[float] = None, check_files: bool = True) -> CorpusManifest:
    """Load a manifest JSON; ``hop_seconds`` overrides the manifest value."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict) or "clips" not in doc:
        raise ParseError(f"{path}: manifest must be an object with a 'clips' list")
    base = path.parent
    clips = []
    for i, c in enumerate(doc["clips"]):
        try:
            entry = ClipEntry(str(c["clip_id"]), base / c["scores"], float(c["duration_s"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"{path}: clip #{i} malformed ({exc})") from None
        if check_files and not entry.score_path.is_file():
            raise ValidationError(f"{path}: clip {entry.clip_id}: missing score file {entry.score_path}")
        clips.append(entry)
    hop = float(hop_seconds if hop_seconds is not None else doc.get("hop_seconds", DEFAULT_HOP_SECONDS))
    return CorpusManifest(clips, hop, list(doc.get("classes", [])), doc.get("generator"))


def write_manifest(manifest: CorpusManifest, path) -> None:
    path = Path(path)
    base = path.parent.resolve()
    doc = {
        "format": MANIFEST_FORMAT,
        "hop_seconds": manifest.hop_seconds,
        "classes": manifest.class_names,
        "clips": [
            {
                "clip_id": c.clip_id,
                "scores": os.path.relpath(Path(c.score_path).resolve(), base).replace(os.sep, "/"),
                "duration_s": c.duration_s,
            }
            for c in manifest.clips
        ],
    }
    if manifest.generator is not None:
        doc["generator"] = manifest.generator
    path.write_text(json.dumps(doc, indent=2, sort_keys=False) + "\n", encoding="utf-8")


def load_corpus_scores(manifest: CorpusManifest) -> List[ScoreMatrix]:
    return [load_score_matrix(c.score_path, manifest.hop_seconds, c.clip_id) for c in manifest.clips]
