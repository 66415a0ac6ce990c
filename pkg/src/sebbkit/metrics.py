"""Event-based F1, intersection-based F1 and PSDS.

Detections are any iterable of ``EventBox``; references an ``AnnotationSet``
whose ``clip_durations`` cover every evaluated clip.

Intersection bookkeeping
------------------------
A detection passes the detection tolerance criterion (DTC) when its summed
overlap with same-class references covers at least ``rho_dtc`` of its own
duration. A reference is detected when DTC-passing detections of its class
cover at least ``rho_gtc`` of it. A detection failing DTC that covers at
least ``rho_cttc`` of its duration with references of another class is a
cross-trigger; cross-triggers are reported separately and are not false
positives. Without ``rho_cttc`` every DTC failure is a false positive.
"""
from __future__ import annotations

import json
import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .io import AnnotationSet, EventBox

RATIO_TOL = 1e-12
DEFAULT_THRESHOLDS = tuple(np.arange(1, 51) / 51.0)


@dataclass(frozen=True)
class PSDSParams:
    rho_dtc: float
    rho_gtc: float
    rho_cttc: Optional[float] = None
    alpha_ct: float = 0.0
    alpha_st: float = 1.0
    efpr_max: float = 100.0

    def __post_init__(self):
        for name in ("rho_dtc", "rho_gtc", "rho_cttc"):
            v = getattr(self, name)
            if v is not None and not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must lie in (0, 1], got {v}")
        if self.alpha_ct < 0 or self.alpha_st < 0:
            raise ValueError("alpha_ct and alpha_st must be non-negative")
        if not self.efpr_max > 0:
            raise ValueError("efpr_max must be positive")


PSDS1 = PSDSParams(rho_dtc=0.7, rho_gtc=0.7, rho_cttc=None, alpha_ct=0.0, alpha_st=1.0, efpr_max=100.0)
PSDS2 = PSDSParams(rho_dtc=0.1, rho_gtc=0.1, rho_cttc=0.3, alpha_ct=0.5, alpha_st=1.0, efpr_max=100.0)


@dataclass
class MetricReport:
    name: str
    per_class: Dict[str, Dict[str, float]] = field(default_factory=dict)
    macro_f1: Optional[float] = None
    psds: Optional[float] = None
    params: Dict = field(default_factory=dict)
    operating_points: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        out = {"name": self.name, "params": self.params}
        if self.macro_f1 is not None:
            out["macro_f1"] = self.macro_f1
        if self.psds is not None:
            out["psds"] = self.psds
        if self.per_class:
            out["per_class"] = self.per_class
        if self.operating_points:
            out["operating_points"] = self.operating_points
        return out


def _f1(tp: int, fp: int, fn: int) -> Tuple[float, float, float]:
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f


def _check_clips(pred: Sequence[EventBox], ref: AnnotationSet) -> None:
    known = set(ref.clip_ids)
    extra = sorted({e.clip_id for e in pred} - known)
    if extra:
        raise ValueError(f"detections for clips missing from the reference: {extra[:5]}")


def _keep(pred: Iterable[EventBox], threshold: Optional[float]) -> List[EventBox]:
    pred = list(pred)
    if threshold is None:
        return pred
    return [e for e in pred if e.confidence >= threshold]


def event_f1(pred: Iterable[EventBox], ref: AnnotationSet, collar_s: float = 0.2,
             offset_ratio: float = 0.2, threshold: Optional[float] = None) -> MetricReport:
    """Collar-based event F1, greedy one-to-one matching in onset order.

    A detection matches a same-class reference when its onset is within
    ``collar_s`` and its offset within ``max(collar_s, offset_ratio * ref
    duration)``. ``threshold`` optionally drops detections below a
    confidence first; otherwise confidence is ignored.
    """
    pred = _keep(pred, threshold)
    _check_clips(pred, ref)
    refs: Dict[Tuple[str, str], List[Tuple[float, float]]] = defaultdict(list)
    for clip, label, on, off in ref.entries:
        refs[(clip, label)].append((on, off))
    dets: Dict[Tuple[str, str], List[Tuple[float, float]]] = defaultdict(list)
    for e in pred:
        dets[(e.clip_id, e.class_label)].append((e.onset_s, e.offset_s))
    counts: Dict[str, List[int]] = defaultdict(lambda: [0, 0, 0])
    for key in set(refs) | set(dets):
        r = sorted(refs.get(key, []))
        d = sorted(dets.get(key, []))
        used = [False] * len(d)
        tp = 0
        for on, off in r:
            off_collar = max(collar_s, offset_ratio * (off - on))
            for j, (don, doff) in enumerate(d):
                if not used[j] and abs(don - on) <= collar_s + RATIO_TOL and abs(doff - off) <= off_collar + RATIO_TOL:
                    used[j] = True
                    tp += 1
                    break
        c = counts[key[1]]
        c[0] += tp
        c[1] += len(d) - tp
        c[2] += len(r) - tp
    per_class = {}
    for label in sorted(counts):
        tp, fp, fn = counts[label]
        p, r, f = _f1(tp, fp, fn)
        per_class[label] = {"tp": tp, "fp": fp, "fn": fn, "precision": p, "recall": r, "f1": f}
    macro = float(np.mean([v["f1"] for v in per_class.values()])) if per_class else 0.0
    return MetricReport("event-f1", per_class, macro,
                        params={"collar_s": collar_s, "offset_ratio": offset_ratio, "threshold": threshold})


def _overlap(a0: float, a1: float, b0: float, b1: float) -> float:
    return max(0.0, min(a1, b1) - max(a0, b0))


@dataclass
class _Intersections:
    """Threshold-independent intersection facts for one detection set."""

    classes: List[str]
    n_ref: Dict[str, int]
    det_class: List[str]
    det_conf: np.ndarray
    det_dtc: np.ndarray                      # passes DTC
    det_ct: List[Tuple[str, ...]]           # cross-triggered classes (only when DTC fails)
    ref_key: List[Tuple[str, str, float, float]]
    ref_contrib: List[List[Tuple[float, float, int]]]  # (conf, overlap, det index) of DTC-passing dets


def _intersections(pred: Sequence[EventBox], ref: AnnotationSet, dtc: float, gtc: float,
                   cttc: Optional[float], classes: Optional[Sequence[str]] = None) -> _Intersections:
    _check_clips(pred, ref)
    ref_by_clip: Dict[str, List[Tuple[int, str, float, float]]] = defaultdict(list)
    for i, (clip, label, on, off) in enumerate(ref.entries):
        ref_by_clip[clip].append((i, label, on, off))
    classes = sorted(set(classes) if classes is not None else set(ref.class_labels) | {e.class_label for e in pred})
    n_ref = {c: 0 for c in classes}
    for _, label, _, _ in ref.entries:
        if label in n_ref:
            n_ref[label] += 1
    contrib: List[List[Tuple[float, float, int]]] = [[] for _ in ref.entries]
    dtc_ok = np.zeros(len(pred), dtype=bool)
    cts: List[Tuple[str, ...]] = []
    for k, e in enumerate(pred):
        dur = e.offset_s - e.onset_s
        same, other = [], defaultdict(float)
        for i, label, on, off in ref_by_clip.get(e.clip_id, ()):
            ov = _overlap(e.onset_s, e.offset_s, on, off)
            if ov <= 0.0:
                continue
            if label == e.class_label:
                same.append((i, ov))
            else:
                other[label] += ov
        passed = sum(ov for _, ov in same) / dur >= dtc - RATIO_TOL
        dtc_ok[k] = passed
        if passed:
            for i, ov in same:
                contrib[i].append((e.confidence, ov, k))
            cts.append(())
        elif cttc is not None:
            cts.append(tuple(sorted(lab for lab, ov in other.items() if ov / dur >= cttc - RATIO_TOL)))
        else:
            cts.append(())
    return _Intersections(classes, n_ref, [e.class_label for e in pred],
                          np.array([e.confidence for e in pred], dtype=float), dtc_ok, cts,
                          list(ref.entries), contrib)


def _ref_detection_threshold(contrib: List[Tuple[float, float, int]], need: float) -> float:
    """Largest confidence threshold at which the kept detections still satisfy GTC (-inf if never)."""
    cum = 0.0
    for conf, ov, _ in sorted(contrib, key=lambda x: -x[0]):
        cum += ov
        if cum >= need - RATIO_TOL:
            return conf
    return -math.inf


def intersection_f1(pred: Iterable[EventBox], ref: AnnotationSet, dtc: float = 0.5, gtc: float = 0.5,
                    cttc: Optional[float] = 0.3, threshold: Optional[float] = None) -> MetricReport:
    """Intersection-based F1.

    A detection is a true positive when it passes DTC and overlaps a
    reference that is detected under GTC. Precision counts true-positive
    detections against false positives (DTC failures that are not
    cross-triggers); recall counts detected references.
    """
    pred = _keep(pred, threshold)
    x = _intersections(pred, ref, dtc, gtc, cttc)
    ref_hit = []
    for (clip, label, on, off), contrib in zip(x.ref_key, x.ref_contrib):
        ref_hit.append(sum(ov for _, ov, _ in contrib) >= gtc * (off - on) - RATIO_TOL)
    det_tp = np.zeros(len(pred), dtype=bool)
    for hit, contrib in zip(ref_hit, x.ref_contrib):
        if hit:
            for _, _, k in contrib:
                det_tp[k] = True
    per_class = {}
    for c in x.classes:
        tp_det = sum(1 for k in range(len(pred)) if x.det_class[k] == c and det_tp[k])
        fp = sum(1 for k in range(len(pred)) if x.det_class[k] == c and not x.det_dtc[k] and not x.det_ct[k])
        ct = sum(1 for k in range(len(pred)) if x.det_class[k] == c and x.det_ct[k])
        n = x.n_ref[c]
        hits = sum(1 for (clip, label, _, _), h in zip(x.ref_key, ref_hit) if label == c and h)
        p = tp_det / (tp_det + fp) if tp_det + fp else 0.0
        r = hits / n if n else 0.0
        f = 2 * p * r / (p + r) if p + r else 0.0
        per_class[c] = {"tp": tp_det, "fp": fp, "fn": n - hits, "cross_triggers": ct,
                        "precision": p, "recall": r, "f1": f}
    macro = float(np.mean([v["f1"] for v in per_class.values()])) if per_class else 0.0
    return MetricReport("inter-f1", per_class, macro,
                        params={"dtc": dtc, "gtc": gtc, "cttc": cttc, "threshold": threshold})


def threshold_sweep(det: Iterable[EventBox], thresholds: Optional[Sequence[float]] = None
                    ) -> List[Tuple[float, List[EventBox]]]:
    """Detection subsets with confidence >= each threshold."""
    det = list(det)
    thresholds = DEFAULT_THRESHOLDS if thresholds is None else thresholds
    return [(float(t), [e for e in det if e.confidence >= t]) for t in thresholds]


def operating_points(det: Iterable[EventBox], ref: AnnotationSet, params: PSDSParams,
                     thresholds: Optional[Sequence[float]] = None,
                     total_duration_h: Optional[float] = None) -> Tuple[List[str], np.ndarray, np.ndarray, List[Dict]]:
    """Per-threshold, per-class TPR and effective FPR.

    Returns ``(classes, tpr, efpr, table)`` with arrays shaped
    ``(n_thresholds, n_classes)``. Only classes with references count.
    """
    det = list(det)
    thresholds = np.asarray(DEFAULT_THRESHOLDS if thresholds is None else thresholds, dtype=float)
    if total_duration_h is None:
        total_duration_h = ref.total_duration_s() / 3600.0
    if not total_duration_h > 0:
        raise ValueError("total evaluated duration must be positive")
    classes = ref.class_labels
    x = _intersections(det, ref, params.rho_dtc, params.rho_gtc, params.rho_cttc, classes)
    cidx = {c: i for i, c in enumerate(classes)}
    K = len(classes)
    ref_thr = np.array([_ref_detection_threshold(contrib, params.rho_gtc * (off - on))
                        for (_, _, on, off), contrib in zip(x.ref_key, x.ref_contrib)])
    ref_cls = np.array([cidx.get(lab, -1) for _, lab, _, _ in x.ref_key], dtype=int)
    n_ref = np.array([x.n_ref[c] for c in classes], dtype=float)
    det_cls = np.array([cidx.get(c, -1) for c in x.det_class], dtype=int)
    fp_mask = ~x.det_dtc & np.array([not ct for ct in x.det_ct], dtype=bool) & (det_cls >= 0)
    tpr = np.zeros((len(thresholds), K))
    efpr = np.zeros((len(thresholds), K))
    table = []
    for i, tau in enumerate(thresholds):
        tp = np.bincount(ref_cls[(ref_thr >= tau) & (ref_cls >= 0)], minlength=K)[:K]
        kept = x.det_conf >= tau
        fp = np.bincount(det_cls[fp_mask & kept], minlength=K)[:K]
        ct = np.zeros((K, K))
        for k in np.flatnonzero(kept & (det_cls >= 0)):
            for lab in x.det_ct[k]:
                if lab in cidx:
                    ct[det_cls[k], cidx[lab]] += 1
        tpr[i] = np.where(n_ref > 0, tp / np.maximum(n_ref, 1), 0.0)
        cross = ct.sum(axis=1) / (K - 1) if K > 1 else np.zeros(K)
        efpr[i] = fp / total_duration_h + params.alpha_ct * cross / total_duration_h
        table.append({
            "threshold": float(tau),
            "per_class": {c: {"tp": int(tp[j]), "fp": int(fp[j]), "ct": int(ct[j].sum()),
                              "tpr": float(tpr[i, j]), "efpr": float(efpr[i, j])}
                          for j, c in enumerate(classes)},
        })
    return classes, tpr, efpr, table


def psd_roc(tpr: np.ndarray, efpr: np.ndarray, alpha_st: float, efpr_max: float
            ) -> Tuple[np.ndarray, np.ndarray]:
    """Effective-TPR staircase on ``[0, efpr_max]``.

    Returns breakpoints ``e`` (starting at 0) and the effective TPR holding
    on ``[e[i], e[i+1])``; the last step runs to ``efpr_max``. Each class
    curve is the best TPR reachable at effective FPR <= e.
    """
    K = tpr.shape[1]
    if K == 0:
        return np.array([0.0]), np.array([0.0])
    e = np.unique(np.concatenate([[0.0], efpr[efpr < efpr_max].ravel()]))
    per_class = np.zeros((e.shape[0], K))
    for j in range(K):
        order = np.argsort(efpr[:, j], kind="stable")
        ej, rj = efpr[order, j], np.maximum.accumulate(tpr[order, j])
        pos = np.searchsorted(ej, e, side="right") - 1
        per_class[:, j] = np.where(pos >= 0, rj[np.maximum(pos, 0)], 0.0)
    eff = per_class.mean(axis=1) - alpha_st * per_class.std(axis=1)
    return e, np.maximum(eff, 0.0)


def psds(det: Iterable[EventBox], ref: AnnotationSet, params: PSDSParams = PSDS1,
         total_duration_h: Optional[float] = None, thresholds: Optional[Sequence[float]] = None) -> float:
    """Normalised area under the PSD-ROC up to ``params.efpr_max``."""
    return psds_report(det, ref, params, total_duration_h, thresholds).psds


def psds_report(det: Iterable[EventBox], ref: AnnotationSet, params: PSDSParams = PSDS1,
                total_duration_h: Optional[float] = None, thresholds: Optional[Sequence[float]] = None,
                name: str = "psds") -> MetricReport:
    classes, tpr, efpr, table = operating_points(det, ref, params, thresholds, total_duration_h)
    e, eff = psd_roc(tpr, efpr, params.alpha_st, params.efpr_max)
    widths = np.diff(np.concatenate([e, [params.efpr_max]]))
    value = float(np.clip(np.sum(eff * widths) / params.efpr_max, 0.0, 1.0))
    return MetricReport(name, psds=value, operating_points=table, params={
        "rho_dtc": params.rho_dtc, "rho_gtc": params.rho_gtc, "rho_cttc": params.rho_cttc,
        "alpha_ct": params.alpha_ct, "alpha_st": params.alpha_st, "efpr_max": params.efpr_max,
        "n_thresholds": len(table)})


METRIC_IDS = ("psds1", "psds2", "event-f1", "inter-f1")


def evaluate(pred: Iterable[EventBox], ref: AnnotationSet, metrics: Sequence[str] = METRIC_IDS,
             f1_threshold: Optional[float] = None, collar_s: float = 0.2) -> Dict[str, Dict]:
    """Run the requested metrics; returns ``{metric_id: report_dict}``."""
    pred = list(pred)
    out: Dict[str, Dict] = {}
    for mid in metrics:
        if mid == "psds1":
            out[mid] = psds_report(pred, ref, PSDS1, name="psds1").to_dict()
        elif mid == "psds2":
            out[mid] = psds_report(pred, ref, PSDS2, name="psds2").to_dict()
        elif mid == "event-f1":
            out[mid] = event_f1(pred, ref, collar_s=collar_s, threshold=f1_threshold).to_dict()
        elif mid == "inter-f1":
            out[mid] = intersection_f1(pred, ref, threshold=f1_threshold).to_dict()
        else:
            raise ValueError(f"unknown metric {mid!r}; choose from {', '.join(METRIC_IDS)}")
    return out


def headline(report: Dict[str, Dict]) -> Dict[str, float]:
    return {k: v.get("psds", v.get("macro_f1")) for k, v in report.items()}


def objective(metric_id: str, ref: AnnotationSet, f1_threshold: Optional[float] = 0.5):
    """Callable scoring a detection set by one metric (for grid search)."""
    if metric_id == "psds1":
        return lambda det: psds(det, ref, PSDS1)
    if metric_id == "psds2":
        return lambda det: psds(det, ref, PSDS2)
    if metric_id == "event-f1":
        return lambda det: event_f1(det, ref, threshold=f1_threshold).macro_f1
    if metric_id == "inter-f1":
        return lambda det: intersection_f1(det, ref, threshold=f1_threshold).macro_f1
    raise ValueError(f"unknown objective {metric_id!r}")


def summary_text(report: Dict[str, Dict]) -> str:
    lines = []
    for mid, rep in report.items():
        val = rep.get("psds", rep.get("macro_f1"))
        lines.append(f"{mid:>9}: {val:.4f}")
    return "\n".join(lines)


def dumps(report: Dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)
