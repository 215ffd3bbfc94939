"""Metric kernels shared by every stress axis.

All kernels are pure functions over numpy arrays. Classification metrics take
a PredictionTable (per-unit class probabilities produced by an external model
or the built-in reference model), integer labels and an explicit evaluation
unit set; ranking metrics take precomputed ranks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    BadProbability,
    EmptyEvalSet,
    EmptyQuerySet,
    LengthMismatch,
    MissingFile,
    MissingPrediction,
    OneClassOnly,
)


@dataclass
class PredictionTable:
    """Per-unit class-probability rows keyed by unit id.

    ``rows`` has one probability vector per entry of ``unit_ids``; binary
    scalar scores are stored as a single column and expanded on demand.
    """

    unit_ids: np.ndarray  # (n,) int64
    rows: np.ndarray      # (n, num_classes) float64, or (n, 1) scalar scores
    _order: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.unit_ids = np.asarray(self.unit_ids, dtype=np.int64)
        self.rows = np.atleast_2d(np.asarray(self.rows, dtype=np.float64))
        if self.rows.shape[0] != len(self.unit_ids):
            raise LengthMismatch("one probability row per unit id required")
        if len(np.unique(self.unit_ids)) != len(self.unit_ids):
            raise LengthMismatch("duplicate unit ids in prediction table")
        if not np.all(np.isfinite(self.rows)):
            raise BadProbability("prediction rows must be finite")
        if self.num_classes > 1:
            sums = self.rows.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > 1e-4):
                raise BadProbability("probability rows must sum to 1 within 1e-4")
        self._order = np.argsort(self.unit_ids, kind="stable")

    @property
    def num_classes(self) -> int:
        return self.rows.shape[1]

    def rows_for(self, units: np.ndarray) -> np.ndarray:
        """Probability rows for the requested units, in request order."""
        units = np.asarray(units, dtype=np.int64)
        sorted_ids = self.unit_ids[self._order]
        pos = np.searchsorted(sorted_ids, units)
        bad = (pos >= len(sorted_ids)) | (sorted_ids[np.minimum(pos, len(sorted_ids) - 1)] != units)
        if np.any(bad):
            raise MissingPrediction(f"no prediction for unit {int(units[np.flatnonzero(bad)[0]])}")
        return self.rows[self._order[pos]]

    def scores_for(self, units: np.ndarray) -> np.ndarray:
        """Scalar score per unit: the single column, or P(class 1) for binary rows."""
        rows = self.rows_for(units)
        if rows.shape[1] == 1:
            return rows[:, 0]
        if rows.shape[1] == 2:
            return rows[:, 1]
        raise LengthMismatch("scalar scores undefined for >2 classes")

    def predicted_classes(self, units: np.ndarray, threshold: float | None = None) -> np.ndarray:
        """Argmax class per unit; ties resolve to the lowest class id.

        With ``threshold`` and single-column scores, predicts 1 iff
        score >= threshold.
        """
        rows = self.rows_for(units)
        if rows.shape[1] == 1:
            t = 0.5 if threshold is None else threshold
            return (rows[:, 0] >= t).astype(np.int64)
        if threshold is not None and rows.shape[1] == 2:
            return (rows[:, 1] >= threshold).astype(np.int64)
        return np.argmax(rows, axis=1).astype(np.int64)


def _check_eval_set(eval_set: np.ndarray) -> np.ndarray:
    eval_set = np.asarray(eval_set, dtype=np.int64)
    if len(eval_set) == 0:
        raise EmptyEvalSet("evaluation unit set is empty")
    return eval_set


def accuracy(preds: PredictionTable, labels: np.ndarray, eval_set: np.ndarray) -> float:
    eval_set = _check_eval_set(eval_set)
    predicted = preds.predicted_classes(eval_set)
    return float(np.mean(predicted == np.asarray(labels)[eval_set]))


def per_class_recall(preds: PredictionTable, labels: np.ndarray, eval_set: np.ndarray,
                     num_classes: int | None = None) -> np.ndarray:
    """Recall per class; classes with no eval support come back as NaN."""
    eval_set = _check_eval_set(eval_set)
    labels = np.asarray(labels)
    true = labels[eval_set]
    predicted = preds.predicted_classes(eval_set)
    if num_classes is None:
        num_classes = max(preds.num_classes, int(true.max()) + 1)
    support = np.bincount(true, minlength=num_classes).astype(np.float64)
    correct = np.bincount(true[predicted == true], minlength=num_classes).astype(np.float64)
    with np.errstate(invalid="ignore"):
        recall = correct / support
    recall[support == 0] = np.nan
    return recall


def balanced_accuracy(preds: PredictionTable, labels: np.ndarray, eval_set: np.ndarray,
                      num_classes: int | None = None) -> float:
    recall = per_class_recall(preds, labels, eval_set, num_classes)
    return float(np.nanmean(recall))


def macro_f1(preds: PredictionTable, labels: np.ndarray, eval_set: np.ndarray,
             num_classes: int | None = None) -> float:
    """Unweighted mean F1 over classes with eval support.

    A class never predicted has precision treated as 0, hence F1 = 0.
    """
    eval_set = _check_eval_set(eval_set)
    true = np.asarray(labels)[eval_set]
    predicted = preds.predicted_classes(eval_set)
    if num_classes is None:
        num_classes = max(preds.num_classes, int(true.max()) + 1)
    support = np.bincount(true, minlength=num_classes).astype(np.float64)
    pred_count = np.bincount(predicted, minlength=num_classes).astype(np.float64)
    tp = np.bincount(true[predicted == true], minlength=num_classes).astype(np.float64)
    f1 = np.zeros(num_classes)
    denom = support + pred_count
    nz = denom > 0
    f1[nz] = 2.0 * tp[nz] / denom[nz]
    return float(np.mean(f1[support > 0]))


def roc_auc(scores: np.ndarray, labels: np.ndarray, eval_set: np.ndarray | None = None) -> float:
    """Mann-Whitney AUC with midrank tie handling: P(s+ > s-) + P(s+ = s-)/2."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if eval_set is not None:
        eval_set = _check_eval_set(eval_set)
        scores, labels = scores[eval_set], labels[eval_set]
    pos = labels == 1
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise OneClassOnly("ROC-AUC needs both label values in the eval set")
    ranks = _midranks(scores)
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def _midranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks; tied scores all get the mean of their rank range."""
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def rank_of_true(scores: np.ndarray, true_index: int) -> float:
    """Average-tie rank of one candidate: better + equal-others/2 + 1."""
    scores = np.asarray(scores, dtype=np.float64)
    s = scores[true_index]
    better = int(np.sum(scores > s))
    equal_others = int(np.sum(scores == s)) - 1
    return better + equal_others / 2.0 + 1.0


def mrr(ranks: np.ndarray) -> float:
    ranks = np.asarray(ranks, dtype=np.float64)
    if len(ranks) == 0:
        raise EmptyQuerySet("no query ranks")
    if np.any(ranks < 1):
        raise LengthMismatch("ranks are 1-based")
    return float(np.mean(1.0 / ranks))


def hits_at_k(ranks: np.ndarray, k: int) -> float:
    ranks = np.asarray(ranks, dtype=np.float64)
    if len(ranks) == 0:
        raise EmptyQuerySet("no query ranks")
    return float(np.mean(ranks <= k))


# ---------------------------------------------------------------------------
# prediction / ranking files
# ---------------------------------------------------------------------------

def read_prediction_file(path) -> PredictionTable:
    """Text format: header ``#num_classes<TAB>C`` then ``unit_id<TAB>p0<TAB>p1...``."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    with open(path) as f:
        header = f.readline().rstrip("\n").split("\t")
        if len(header) != 2 or header[0] != "#num_classes":
            raise LengthMismatch(f"{path}: first line must be '#num_classes<TAB>C'")
        num_classes = int(header[1])
        ids, rows = [], []
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != num_classes + 1:
                raise LengthMismatch(f"{path}: row for unit {parts[0]} has wrong column count")
            ids.append(int(parts[0]))
            rows.append([float(x) for x in parts[1:]])
    if not ids:
        raise EmptyEvalSet(f"{path}: no prediction rows")
    return PredictionTable(np.array(ids, dtype=np.int64), np.array(rows, dtype=np.float64))


def write_prediction_file(path, table: PredictionTable) -> None:
    with open(path, "w") as f:
        f.write(f"#num_classes\t{table.num_classes}\n")
        for uid, row in zip(table.unit_ids.tolist(), table.rows):
            f.write(str(uid) + "\t" + "\t".join(repr(float(x)) for x in row) + "\n")


def read_ranking_file(path) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rows ``query_id<TAB>candidate_id<TAB>score``; returns three aligned arrays."""
    path = Path(path)
    if not path.is_file():
        raise MissingFile(str(path))
    queries, cands, scores = [], [], []
    with open(path) as f:
        for line in f:
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            q, c, s = line.split("\t")
            queries.append(int(q))
            cands.append(int(c))
            scores.append(float(s))
    return (np.array(queries, dtype=np.int64), np.array(cands, dtype=np.int64),
            np.array(scores, dtype=np.float64))


def write_ranking_file(path, queries: np.ndarray, cands: np.ndarray, scores: np.ndarray) -> None:
    with open(path, "w") as f:
        for q, c, s in zip(queries.tolist(), cands.tolist(), scores.tolist()):
            f.write(f"{q}\t{c}\t{repr(float(s))}\n")


def ranks_from_ranking(queries: np.ndarray, cands: np.ndarray, scores: np.ndarray,
                       truth: dict[int, int]) -> np.ndarray:
    """Average-tie rank of the true candidate within each query's score list."""
    if len(queries) == 0:
        raise EmptyQuerySet("ranking table is empty")
    ranks = []
    for q in np.unique(queries):
        sel = queries == q
        q_cands, q_scores = cands[sel], scores[sel]
        if int(q) not in truth:
            raise MissingPrediction(f"no true candidate recorded for query {int(q)}")
        where = np.flatnonzero(q_cands == truth[int(q)])
        if len(where) == 0:
            raise MissingPrediction(f"query {int(q)}: true candidate not scored")
        ranks.append(rank_of_true(q_scores, int(where[0])))
    return np.array(ranks, dtype=np.float64)
