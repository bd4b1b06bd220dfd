"""Scoring detected pattern sets against planted ground truth.

Quality is measured by matching each planted issue to the pattern that best
explains its requests (by F1), then pooling precision and recall over the
matched pairs.  Clusters from the K-means baseline are scored through the
same machinery, with cluster membership standing in for pattern hits.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import LabelMissingError
from .model import Dataset, Pattern, PatternSet

CLIFFS_THRESHOLDS = ((0.147, "negligible"), (0.33, "small"), (0.474, "medium"))


@dataclass(frozen=True)
class QualityReport:
    q_prec: float
    q_rec: float
    q_f1: float
    best_match: dict  # label -> {"index": ..., "f1": ...}
    per_pattern: tuple[dict, ...]  # precision/recall/f1 vs SLO positives
    overlap: Optional[float]
    shared_match: bool  # both labels matched by the same pattern

    def to_dict(self) -> dict:
        return {
            "q_prec": self.q_prec,
            "q_rec": self.q_rec,
            "q_f1": self.q_f1,
            "best_match": self.best_match,
            "per_pattern": list(self.per_pattern),
            "overlap": self.overlap,
            "shared_match": self.shared_match,
        }


def pattern_mask(dataset: Dataset, pattern: Pattern) -> np.ndarray:
    """Boolean hit mask over all requests, by direct column comparison."""
    if pattern.void:
        return np.zeros(dataset.n_requests, dtype=bool)
    mask = np.ones(dataset.n_requests, dtype=bool)
    for p in pattern.predicates:
        col = dataset.exec_times[:, p.rpc]
        mask &= (col >= p.e_min) & (col < p.e_max)
    return mask


def set_masks(dataset: Dataset, pattern_set: PatternSet) -> list[np.ndarray]:
    return [pattern_mask(dataset, p) for p in pattern_set.patterns]


def _f1(tp: int, fp: int, fn: int) -> float:
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom else 0.0


def _best_match_index(masks: Sequence[np.ndarray], truth: np.ndarray) -> tuple[int, float]:
    best_idx, best_f1 = 0, -1.0
    for idx, mask in enumerate(masks):
        tp = int(np.count_nonzero(mask & truth))
        fp = int(np.count_nonzero(mask & ~truth))
        fn = int(np.count_nonzero(~mask & truth))
        score = _f1(tp, fp, fn)
        if score > best_f1:  # ties keep the lower index
            best_idx, best_f1 = idx, score
    return best_idx, best_f1


def best_matching_pattern(pattern_set: PatternSet, dataset: Dataset, adc: str) -> int:
    """Index of the pattern maximizing F1 against the label's request set."""
    if dataset.labels is None:
        raise LabelMissingError("dataset has no ground-truth labels")
    truth = np.zeros(dataset.n_requests, dtype=bool)
    truth[dataset.label_indices(adc)] = True
    if not truth.any():
        raise LabelMissingError(f"no request labeled {adc!r}")
    idx, _ = _best_match_index(set_masks(dataset, pattern_set), truth)
    return idx


def overlap_of_masks(masks: Sequence[np.ndarray]) -> Optional[float]:
    if len(masks) < 2:
        return None  # undefined for a single pattern
    union = np.zeros_like(masks[0])
    inter = np.ones_like(masks[0])
    for mask in masks:
        union |= mask
        inter &= mask
    denom = int(np.count_nonzero(union))
    return int(np.count_nonzero(inter)) / denom if denom else 0.0


def overlap(pattern_set: PatternSet, dataset: Dataset) -> Optional[float]:
    """Intersection-over-union of the per-pattern hit sets (None if |S| < 2)."""
    return overlap_of_masks(set_masks(dataset, pattern_set))


def quality_from_masks(
    masks: Sequence[np.ndarray], dataset: Dataset, per_pattern: Sequence[dict]
) -> QualityReport:
    labels = dataset.distinct_labels()
    if len(labels) != 2:
        raise LabelMissingError(
            f"quality scoring expects exactly 2 ground-truth labels, found {labels}"
        )
    truths = {}
    for label in labels:
        truth = np.zeros(dataset.n_requests, dtype=bool)
        truth[dataset.label_indices(label)] = True
        truths[label] = truth

    best: dict[str, dict] = {}
    hit_total = 0
    matched_total = 0
    for label in labels:
        idx, score = _best_match_index(masks, truths[label])
        best[label] = {"index": idx, "f1": score}
        matched_total += int(np.count_nonzero(masks[idx] & truths[label]))
        hit_total += int(np.count_nonzero(masks[idx]))

    truth_union = np.zeros(dataset.n_requests, dtype=bool)
    for truth in truths.values():
        truth_union |= truth

    q_prec = matched_total / hit_total if hit_total else 0.0
    q_rec = matched_total / int(np.count_nonzero(truth_union))
    q_f1 = 2 * q_prec * q_rec / (q_prec + q_rec) if q_prec + q_rec else 0.0
    return QualityReport(
        q_prec=q_prec,
        q_rec=q_rec,
        q_f1=q_f1,
        best_match=best,
        per_pattern=tuple(per_pattern),
        overlap=overlap_of_masks(masks),
        shared_match=len({entry["index"] for entry in best.values()}) < len(best),
    )


def pattern_slo_metrics(masks: Sequence[np.ndarray], dataset: Dataset) -> list[dict]:
    """Per-pattern precision/recall/F1 against the SLO positives."""
    positives = dataset.positives_mask()
    n_pos = int(np.count_nonzero(positives))
    out = []
    for mask in masks:
        tp = int(np.count_nonzero(mask & positives))
        fp = int(np.count_nonzero(mask & ~positives))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / n_pos if n_pos else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        out.append(
            {
                "precision": precision,
                "recall": recall,
                "f1": f1,
                "matched_requests": tp + fp,
            }
        )
    return out


def quality(pattern_set: PatternSet, dataset: Dataset) -> QualityReport:
    """Score a pattern set against the dataset's two planted issues."""
    masks = set_masks(dataset, pattern_set)
    return quality_from_masks(masks, dataset, pattern_slo_metrics(masks, dataset))


def cliffs_delta(sample_a: Sequence[float], sample_b: Sequence[float]) -> tuple[float, str]:
    """Cliff's delta of A over B with its conventional magnitude label."""
    a = np.asarray(sample_a, dtype=np.float64)
    b = np.sort(np.asarray(sample_b, dtype=np.float64))
    if len(a) == 0 or len(b) == 0:
        raise ValueError("cliffs_delta needs two non-empty samples")
    greater = int(np.searchsorted(b, a, side="left").sum())
    less = int((len(b) - np.searchsorted(b, a, side="right")).sum())
    delta = (greater - less) / (len(a) * len(b))
    magnitude = "large"
    for threshold, name in CLIFFS_THRESHOLDS:
        if abs(delta) < threshold:
            magnitude = name
            break
    return delta, magnitude


# ---------------------------------------------------------------------------
# K-means baseline
# ---------------------------------------------------------------------------


def _standardize(matrix: np.ndarray) -> np.ndarray:
    mean = matrix.mean(axis=0)
    std = matrix.std(axis=0)
    std[std == 0] = 1.0  # constant columns end up exactly 0
    return (matrix - mean) / std


def _lloyd(
    points: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 100
) -> tuple[np.ndarray, float]:
    """One Lloyd run from a random distinct-point init: (assignment, inertia)."""
    distinct = np.unique(points, axis=0)
    seed_idx = rng.choice(len(distinct), size=k, replace=False)
    centers = distinct[seed_idx].copy()
    assignment = np.zeros(len(points), dtype=np.intp)
    for _ in range(max_iter):
        distances = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assignment = distances.argmin(axis=1)
        for c in range(k):
            members = points[new_assignment == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:  # re-seed an empty cluster at the worst-fit point
                centers[c] = points[distances.min(axis=1).argmax()]
        if np.array_equal(new_assignment, assignment):
            break
        assignment = new_assignment
    inertia = float(((points - centers[assignment]) ** 2).sum())
    return assignment, inertia


def kmeans_baseline(
    dataset: Dataset,
    k_range: Sequence[int] = range(2, 11),
    restarts: int = 10,
    seed: int = 0,
    standardize: bool = False,
) -> tuple[np.ndarray, QualityReport, int]:
    """Cluster the execution-time vectors and score the clusters.

    Within each k the best of ``restarts`` random starts (by inertia) is
    kept; across k the clustering with the best ground-truth F1 wins,
    mirroring how this baseline is conventionally tuned.  Features are raw
    milliseconds by default, matching stock K-means usage; ``standardize``
    switches to z-scored columns (with a zero-variance guard).
    """
    points = _standardize(dataset.exec_times) if standardize else dataset.exec_times
    n_distinct = len(np.unique(points, axis=0))
    rng = np.random.default_rng(seed)

    best_quality: Optional[QualityReport] = None
    best_assignment: Optional[np.ndarray] = None
    best_k = 0
    for k in k_range:
        if k > n_distinct:
            continue  # not enough distinct points for k clusters
        run_best: Optional[tuple[np.ndarray, float]] = None
        for _ in range(restarts):
            assignment, inertia = _lloyd(points, k, rng)
            if run_best is None or inertia < run_best[1]:
                run_best = (assignment, inertia)
        assignment = run_best[0]
        masks = [assignment == c for c in range(k)]
        report = quality_from_masks(masks, dataset, pattern_slo_metrics(masks, dataset))
        if best_quality is None or report.q_f1 > best_quality.q_f1:
            best_quality, best_assignment, best_k = report, assignment, k

    if best_quality is None:
        raise ValueError("no usable k: dataset has too few distinct points")
    return best_assignment, best_quality, best_k
