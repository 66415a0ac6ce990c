"""Sound event bounding boxes: adaptive post-processing of frame-level SED scores."""
__version__ = "0.1.0"

from .io import (AnnotationSet, ClipEntry, CorpusManifest, EventBox, ScoreMatrix, load_annotations,
                 load_manifest, load_score_matrix, read_events, write_events)
from .stats import AdaptiveConfig, ClassStats, adaptive_parameters, cal_stats, moments
from .boundary import decode_class, delta_scores, find_boundary, merge_segments, step_filter
from .decoders import (DecoderConfig, DetectionSet, csebbs_decode, decode_corpus, grid_search_csebbs,
                       median_decode, nsebbs_decode)
from .metrics import PSDS1, PSDS2, PSDSParams, event_f1, intersection_f1, psds, threshold_sweep
from .synth import SynthSpec, generate_clip, generate_corpus

__all__ = [
    "AnnotationSet", "ClipEntry", "CorpusManifest", "EventBox", "ScoreMatrix", "load_annotations",
    "load_manifest", "load_score_matrix", "read_events", "write_events",
    "AdaptiveConfig", "ClassStats", "adaptive_parameters", "cal_stats", "moments",
    "decode_class", "delta_scores", "find_boundary", "merge_segments", "step_filter",
    "DecoderConfig", "DetectionSet", "csebbs_decode", "decode_corpus", "grid_search_csebbs",
    "median_decode", "nsebbs_decode",
    "PSDS1", "PSDS2", "PSDSParams", "event_f1", "intersection_f1", "psds", "threshold_sweep",
    "SynthSpec", "generate_clip", "generate_corpus",
]
