"""Rank-based evaluation metrics and per-tag report assembly.

roc_auc uses the rank-sum (Mann-Whitney) form with midranks for ties, so it
equals the pair-counting probability P(score+ > score-) + 0.5 P(tie)
exactly. pr_auc is average precision with tied scores entering together.
"""

import csv
import json
from dataclasses import dataclass

import numpy as np


def _midranks(x: np.ndarray) -> np.ndarray:
    order = np.argsort(x, kind="mergesort")
    ranks = np.empty(x.size, dtype=np.float64)
    sx = x[order]
    i = 0
    while i < x.size:
        j = i
        while j + 1 < x.size and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def roc_auc(scores, labels) -> float:
    """P(random positive outranks random negative), midrank tie handling."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ValueError("roc_auc needs at least one positive and one negative")
    ranks = _midranks(scores)
    rank_sum = ranks[pos].sum()
    return float((rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def pr_auc(scores, labels) -> float:
    """Average precision by step integration, descending scores, ties grouped."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise ValueError("pr_auc needs at least one positive")
    order = np.argsort(-scores, kind="mergesort")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    tp = np.cumsum(sorted_labels == 1)
    k = np.arange(1, scores.size + 1)
    # last index of each tied group: everything tied enters together
    group_end = np.nonzero(
        np.concatenate([sorted_scores[1:] != sorted_scores[:-1], [True]])
    )[0]
    ap = 0.0
    prev_tp = 0
    for g in group_end:
        precision = tp[g] / k[g]
        ap += precision * (tp[g] - prev_tp)
        prev_tp = tp[g]
    return float(ap / n_pos)


def accuracy(pred_classes, true_classes) -> float:
    pred = np.asarray(pred_classes)
    true = np.asarray(true_classes)
    if pred.shape != true.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {true.shape}")
    return float(np.mean(pred == true))


@dataclass
class TagresultRow:
    tag: str
    roc_auc: float | None
    pr_auc: float | None
    positive_count: int


@dataclass
class EvalReport:
    per_tag: list
    macro_roc_auc: float | None
    macro_pr_auc: float | None
    accuracy: float | None = None

    def to_json(self) -> str:
        summary = {
            "macro_roc_auc": self.macro_roc_auc,
            "macro_pr_auc": self.macro_pr_auc,
            "accuracy": self.accuracy,
        }
        return json.dumps(
            {
                **{k: v for k, v in summary.items() if v is not None},
                "per_tag": [
                    {
                        "tag": r.tag,
                        "roc_auc": r.roc_auc,
                        "pr_auc": r.pr_auc,
                        "positive_count": r.positive_count,
                    }
                    for r in self.per_tag
                ],
            },
            indent=2,
            sort_keys=True,
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["tag", "roc_auc", "pr_auc", "positive_count"])
            for r in self.per_tag:
                writer.writerow(
                    [
                        r.tag,
                        "" if r.roc_auc is None else f"{r.roc_auc:.6f}",
                        "" if r.pr_auc is None else f"{r.pr_auc:.6f}",
                        r.positive_count,
                    ]
                )


def evaluate_tagging(scores: np.ndarray, labels: np.ndarray, tag_names) -> EvalReport:
    """Per-tag AUCs plus unweighted macro means.

    Tags missing a positive or a negative in ``labels`` are reported with
    absent AUCs and excluded from both macro averages.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 2:
        raise ValueError(f"scores {scores.shape} vs labels {labels.shape}")
    if scores.shape[1] != len(tag_names):
        raise ValueError("tag name count does not match label columns")
    rows = []
    rocs, prs = [], []
    for k, tag in enumerate(tag_names):
        col = labels[:, k]
        n_pos = int(np.sum(col == 1))
        n_neg = int(col.size - n_pos)
        if n_pos == 0 or n_neg == 0:
            rows.append(TagresultRow(tag, None, None, n_pos))
            continue
        r = roc_auc(scores[:, k], col)
        p = pr_auc(scores[:, k], col)
        rows.append(TagresultRow(tag, r, p, n_pos))
        rocs.append(r)
        prs.append(p)
    macro_r = float(np.mean(rocs)) if rocs else None
    macro_p = float(np.mean(prs)) if prs else None
    return EvalReport(per_tag=rows, macro_roc_auc=macro_r, macro_pr_auc=macro_p)


def evaluate_keyword(pred_classes, true_classes, class_names) -> EvalReport:
    acc = accuracy(pred_classes, true_classes)
    true = np.asarray(true_classes)
    rows = [
        TagresultRow(name, None, None, int(np.sum(true == k)))
        for k, name in enumerate(class_names)
    ]
    return EvalReport(
        per_tag=rows, macro_roc_auc=None, macro_pr_auc=None, accuracy=acc
    )
