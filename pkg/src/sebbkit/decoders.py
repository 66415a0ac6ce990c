"""End-to-end decoders and the corpus batch driver."""
from __future__ import annotations

import hashlib
import itertools
import json
import logging
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .boundary import decode_class
from .io import CorpusManifest, EventBox, ScoreMatrix, load_score_matrix
from .stats import adaptive_parameters, cal_stats, moments

log = logging.getLogger(__name__)

METHODS = ("median", "csebbs", "nsebbs", "csebbs_d", "nsebbs_d")
L_STEP_GRID = (0.32, 0.48, 0.64)
THETA_ABS_GRID = (0.15, 0.2, 0.3)
THETA_REL_GRID = (1.5, 2.0, 3.0)


class ConfigError(ValueError):
    pass


@dataclass
class DecoderConfig:
    method: str = "nsebbs"
    median_window: int = 7
    median_threshold: float = 0.5
    l_step_s: Optional[float] = None
    theta_abs: Optional[float] = None
    theta_rel: Optional[float] = None
    l_step_grid: Tuple[float, ...] = L_STEP_GRID
    theta_abs_grid: Tuple[float, ...] = THETA_ABS_GRID
    theta_rel_grid: Tuple[float, ...] = THETA_REL_GRID
    change_score: str = "signed"

    def __post_init__(self):
        self.method = self.method.replace("-", "_")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.median_window < 1 or self.median_window % 2 == 0:
            raise ConfigError(f"median window must be a positive odd integer, got {self.median_window}")
        if not 0.0 < self.median_threshold < 1.0:
            raise ConfigError(f"median threshold must lie in (0, 1), got {self.median_threshold}")
        fixed = (self.l_step_s, self.theta_abs, self.theta_rel)
        if self.method.startswith("nsebbs") and any(v is not None for v in fixed):
            raise ConfigError(f"{self.method} derives l_step/theta per class; fixed SEBB parameters are not allowed")
        if self.l_step_s is not None and not self.l_step_s > 0:
            raise ConfigError("l_step must be positive")
        if self.theta_rel is not None and not self.theta_rel > 0:
            raise ConfigError("theta_rel must be positive")

    def resolved_csebbs(self) -> Tuple[float, Optional[float], float]:
        """Static (l_step, theta_abs, theta_rel) for the csebbs family.

        Unset values default to the middle of each grid. ``csebbs_d`` always
        gates on theta_abs; plain ``csebbs`` only when one is supplied.
        """
        l_step = self.l_step_s if self.l_step_s is not None else 0.48
        theta_rel = self.theta_rel if self.theta_rel is not None else 2.0
        theta_abs = self.theta_abs
        if self.method == "csebbs_d" and theta_abs is None:
            theta_abs = 0.2
        return l_step, theta_abs, theta_rel

    def fingerprint(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class DetectionSet:
    events: List[EventBox] = field(default_factory=list)
    provenance: Dict = field(default_factory=dict)

    def __post_init__(self):
        self.events = sorted(self.events, key=EventBox.sort_key)

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def by_clip_class(self) -> Dict[Tuple[str, str], List[EventBox]]:
        out: Dict[Tuple[str, str], List[EventBox]] = {}
        for e in self.events:
            out.setdefault((e.clip_id, e.class_label), []).append(e)
        return out

    def check(self) -> None:
        """Raise ``AssertionError`` unless events are sorted and non-overlapping per clip and class."""
        for key, evs in self.by_clip_class().items():
            for a, b in zip(evs, evs[1:]):
                assert a.offset_s <= b.onset_s + 1e-9, f"overlap in {key}: {a} / {b}"


def _to_events(clip_id: str, label: str, triples) -> List[EventBox]:
    return [EventBox(clip_id, label, on, off, conf) for on, off, conf in triples]


def median_filter_binary(active: np.ndarray, window: int) -> np.ndarray:
    """Majority vote over a centred window that shrinks at the clip edges (ties -> 0)."""
    active = np.asarray(active, dtype=np.int64)
    T = active.shape[0]
    half = window // 2
    cs = np.concatenate([[0], np.cumsum(active)])
    idx = np.arange(T)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, T)
    ones = cs[hi] - cs[lo]
    return 2 * ones > (hi - lo)


def _runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    m = np.concatenate([[0], mask.astype(np.int8), [0]])
    d = np.diff(m)
    return list(zip(np.flatnonzero(d == 1), np.flatnonzero(d == -1)))


def median_decode(m: ScoreMatrix, window: int = 7, threshold: float = 0.5) -> List[EventBox]:
    """Threshold, median-filter the binary activity, and emit each 1-run as an event."""
    if window < 1 or window % 2 == 0:
        raise ConfigError(f"median window must be a positive odd integer, got {window}")
    if window > m.n_frames:
        raise ConfigError(f"median window {window} longer than clip ({m.n_frames} frames)")
    hop = m.hop_seconds
    events = []
    for c, label in enumerate(m.class_names):
        s = m.scores[:, c]
        smoothed = median_filter_binary(s > threshold, window)
        for a, b in _runs(smoothed):
            conf = float(np.clip(s[a:b].mean(), 0.0, 1.0))
            events.append(EventBox(m.clip_id, label, a * hop, b * hop, conf))
    return events


def nsebbs_decode(m: ScoreMatrix, dual: bool = False, change_score: str = "signed") -> List[EventBox]:
    events = []
    for c, label in enumerate(m.class_names):
        s = m.scores[:, c]
        mu, sigma = moments(s)
        cfg = adaptive_parameters(cal_stats(s, mu, sigma), dual_threshold=dual)
        events += _to_events(m.clip_id, label, decode_class(
            s, m.hop_seconds, cfg.l_step_s, cfg.theta_rel, cfg.theta_abs, change_score))
    return events


def csebbs_decode(m: ScoreMatrix, l_step_s: float, theta_abs: Optional[float], theta_rel: float,
                  change_score: str = "signed") -> List[EventBox]:
    events = []
    for c, label in enumerate(m.class_names):
        events += _to_events(m.clip_id, label, decode_class(
            m.scores[:, c], m.hop_seconds, l_step_s, theta_rel, theta_abs, change_score))
    return events


def decode_matrix(m: ScoreMatrix, config: DecoderConfig) -> List[EventBox]:
    if config.method == "median":
        return median_decode(m, config.median_window, config.median_threshold)
    if config.method in ("nsebbs", "nsebbs_d"):
        return nsebbs_decode(m, dual=config.method == "nsebbs_d", change_score=config.change_score)
    l_step, theta_abs, theta_rel = config.resolved_csebbs()
    return csebbs_decode(m, l_step, theta_abs, theta_rel, config.change_score)


def _decode_one(m: ScoreMatrix, config: DecoderConfig):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            events = decode_matrix(m, config)
            err = None
        except Exception as exc:  # noqa: BLE001 -- one bad clip must not end the corpus run
            events, err = [], f"{type(exc).__name__}: {exc}"
    return m.clip_id, events, err, [f"{m.clip_id}: {w.message}" for w in caught]


def _load_and_decode(args):
    entry, hop, config = args
    try:
        m = load_score_matrix(entry.score_path, hop, entry.clip_id)
    except Exception as exc:  # noqa: BLE001
        return entry.clip_id, [], f"{type(exc).__name__}: {exc}", []
    return _decode_one(m, config)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("SEBBKIT_JOBS", "1")))
    except ValueError:
        return 1


def decode_corpus(corpus, config: DecoderConfig, jobs: Optional[int] = None) -> DetectionSet:
    """Decode every clip of a manifest (or a list of loaded ``ScoreMatrix``).

    Per-clip failures are collected in ``provenance["failures"]`` instead of
    aborting. Output order is independent of ``jobs``.
    """
    jobs = default_jobs() if jobs is None else max(1, int(jobs))
    t0 = time.perf_counter()
    if isinstance(corpus, CorpusManifest):
        work = [(c, corpus.hop_seconds, config) for c in corpus.clips]
        fn = _load_and_decode
    else:
        work = [(m, config) for m in corpus]
        fn = _star_decode
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(fn, work, chunksize=max(1, len(work) // (4 * jobs))))
    else:
        results = [fn(w) for w in work]
    events, failures, notes, clips = [], {}, [], []
    for clip_id, evs, err, warns in results:
        clips.append(clip_id)
        events += evs
        notes += warns
        if err is not None:
            failures[clip_id] = err
            log.warning("clip %s failed: %s", clip_id, err)
    elapsed = time.perf_counter() - t0
    return DetectionSet(events, {
        "method": config.method,
        "config": asdict(config),
        "config_fingerprint": config.fingerprint(),
        "clips": sorted(clips),
        "failures": failures,
        "warnings": notes,
        "wall_clock_s": elapsed,
    })


def _star_decode(args):
    return _decode_one(*args)


@dataclass
class GridResult:
    best: Tuple[float, float, float]
    best_score: float
    table: List[Dict]
    wall_clock_s: float


def csebbs_grid(config: Optional[DecoderConfig] = None) -> List[Tuple[float, float, float]]:
    config = config or DecoderConfig(method="csebbs")
    return sorted(itertools.product(config.l_step_grid, config.theta_abs_grid, config.theta_rel_grid))


def _matrices(corpus) -> List[ScoreMatrix]:
    if isinstance(corpus, CorpusManifest):
        return [load_score_matrix(c.score_path, corpus.hop_seconds, c.clip_id) for c in corpus.clips]
    return list(corpus)


def grid_search_csebbs(corpus, refs=None, objective: Union[str, Callable[[DetectionSet], float]] = "psds1",
                       grid: Optional[Sequence[Tuple[float, float, float]]] = None,
                       change_score: str = "signed", f1_threshold: Optional[float] = 0.5) -> GridResult:
    """Exhaustive search over (l_step, theta_abs, theta_rel); highest objective wins.

    ``corpus`` is a manifest or a list of ``ScoreMatrix``. ``objective`` is a
    metric id scored against ``refs`` or any callable on a ``DetectionSet``.
    Ties go to the lexicographically smallest triple, which is the first one
    visited because the grid is iterated in sorted order.
    """
    matrices = _matrices(corpus)
    if not matrices:
        raise ValueError("grid search over an empty corpus")
    if isinstance(objective, str):
        if refs is None:
            raise ValueError(f"objective {objective!r} needs reference annotations")
        from .metrics import objective as metric_objective
        objective = metric_objective(objective, refs, f1_threshold)
    grid = sorted(grid) if grid is not None else csebbs_grid()
    if not grid:
        raise ValueError("empty parameter grid")
    t0 = time.perf_counter()
    table, best, best_score = [], None, -np.inf
    for l_step, theta_abs, theta_rel in grid:
        events = []
        for m in matrices:
            events += csebbs_decode(m, l_step, theta_abs, theta_rel, change_score)
        score = float(objective(DetectionSet(events)))
        table.append({"l_step_s": l_step, "theta_abs": theta_abs, "theta_rel": theta_rel,
                      "score": score, "n_events": len(events)})
        if score > best_score:
            best, best_score = (l_step, theta_abs, theta_rel), score
    return GridResult(best, best_score, table, time.perf_counter() - t0)
