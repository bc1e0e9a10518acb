"""Ranking metrics and selection-analysis statistics.

Predictions are (bag, relation) pairs scored by the model; a prediction
is correct when the bag's gold relation equals that relation. AUC is
average precision over the ranked list; ties keep input order.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus


class UndefinedMetricError(ValueError):
    """Ranking metric requested on a list without any correct prediction."""


@dataclass
class RankedPrediction:
    bag_id: int
    relation: int
    score: float
    is_correct: bool


@dataclass
class SelectionRecord:
    """One document-side selection of one path, for selection statistics."""

    bag_id: int
    path_id: int
    side: str                 # "head" or "tail"
    selected: list[int]
    evidence_hits: int = 0
    evidence_total: int = 0


def _ranked(preds) -> list[RankedPrediction]:
    scores = np.array([p.score for p in preds], dtype=float)
    order = np.argsort(-scores, kind="stable")
    return [preds[i] for i in order]


def pr_auc(preds) -> float:
    """Average precision of the ranked prediction list."""
    if not preds:
        raise UndefinedMetricError("no predictions")
    ranked = _ranked(preds)
    n_pos = sum(p.is_correct for p in ranked)
    if n_pos == 0:
        raise UndefinedMetricError("no correct prediction in the list")
    tp = 0
    total = 0.0
    for k, p in enumerate(ranked, start=1):
        if p.is_correct:
            tp += 1
            total += tp / k
    return total / n_pos


def best_f1(preds) -> float:
    """Best harmonic mean of precision and recall over all score cutoffs."""
    if not preds:
        raise UndefinedMetricError("no predictions")
    ranked = _ranked(preds)
    n_pos = sum(p.is_correct for p in ranked)
    if n_pos == 0:
        raise UndefinedMetricError("no correct prediction in the list")
    best = 0.0
    tp = 0
    for k, p in enumerate(ranked, start=1):
        if p.is_correct:
            tp += 1
        precision = tp / k
        recall = tp / n_pos
        if tp:
            best = max(best, 2 * precision * recall / (precision + recall))
    return best


def precision_at_k(preds, k: int) -> float:
    """Fraction correct among the top k by score (k clamped to the list)."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not preds:
        return 0.0
    ranked = _ranked(preds)
    k = min(k, len(ranked))
    return sum(p.is_correct for p in ranked[:k]) / k


def count_bridge_mentions(doc, selected, bridge_entities) -> int:
    bridge_entities = set(bridge_entities)
    return sum(
        1
        for idx in selected
        for e in doc.sentences[idx].mentions
        if e in bridge_entities
    )


def bridge_mention_stats(selections, corpus: Corpus) -> dict:
    """Bridge-mention means by bag type and histograms by path type.

    Means cover all selections grouped by whether the bag has a positive
    relation; histograms cover only positive bags, split into positive
    and no-relation paths (one count per document-side selection).
    """
    mean_acc = {"positive": [], "na": []}
    hist_pos: dict[int, int] = {}
    hist_na: dict[int, int] = {}
    for rec in selections:
        bag = corpus.bags[rec.bag_id]
        path = bag.paths[rec.path_id]
        doc = path.head_doc if rec.side == "head" else path.tail_doc
        count = count_bridge_mentions(doc, rec.selected, path.bridge_entities)
        mean_acc["na" if bag.is_na else "positive"].append(count)
        if not bag.is_na:
            labels = bag.path_oracle_labels
            path_positive = labels[rec.path_id] if labels is not None else True
            hist = hist_pos if path_positive else hist_na
            hist[count] = hist.get(count, 0) + 1
    return {
        "mean_positive_bags": float(np.mean(mean_acc["positive"])) if mean_acc["positive"] else 0.0,
        "mean_na_bags": float(np.mean(mean_acc["na"])) if mean_acc["na"] else 0.0,
        "hist_positive_paths": dict(sorted(hist_pos.items())),
        "hist_na_paths": dict(sorted(hist_na.items())),
    }
