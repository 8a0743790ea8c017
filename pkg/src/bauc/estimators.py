"""Counting-based AUC estimators: Mann-Whitney and stratified k-fold CV."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .classifiers import LogRegConfig, predict_scores, train_logreg_l2
from .data import Dataset, MissingClassError
from .numerics import RngStream


def empirical_auc(scores, labels) -> float:
    """Mann-Whitney AUC with midrank ties: the fraction of (class 1, class 2)
    pairs where the class-2 score is larger, ties counting one half."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-d of equal length")
    pos = labels == 2
    n2 = int(pos.sum())
    n1 = scores.size - n2
    if n1 == 0 or n2 == 0:
        raise MissingClassError("empirical AUC needs both classes")
    ranks = rankdata(scores, method="average")
    u = ranks[pos].sum() - n2 * (n2 + 1) / 2.0
    return float(u / (n1 * n2))


@dataclass(frozen=True)
class FoldAssignment:
    fold_of_sample: np.ndarray
    k: int

    def validation_mask(self, fold: int) -> np.ndarray:
        return self.fold_of_sample == fold


def make_folds(labels, k: int, stream: RngStream) -> FoldAssignment:
    """Stratified assignment: each class is shuffled and dealt round-robin.

    Class 1 is dealt from fold 0 upward and class 2 continues where class 1
    stopped, so total fold sizes also stay balanced.
    """
    labels = np.asarray(labels)
    if k < 2:
        raise ValueError("need at least 2 folds")
    folds = np.empty(labels.size, dtype=int)
    offset = 0
    for c in (1, 2):
        idx = np.flatnonzero(labels == c)
        if idx.size < k:
            raise ValueError(f"class {c} has {idx.size} samples, fewer than {k} folds")
        idx = idx[stream.permutation(idx.size)]
        folds[idx] = (np.arange(idx.size) + offset) % k
        offset = (offset + idx.size) % k
    return FoldAssignment(folds, k)


def cv_auc(dataset: Dataset, k: int, trainer_config: LogRegConfig, stream: RngStream) -> float:
    """Mean of the per-fold validation AUCs of logistic models trained on the other folds.

    A training failure in any fold propagates; folds are never skipped.
    """
    assignment = make_folds(dataset.labels, k, stream)
    fold_aucs = []
    for f in range(k):
        val = assignment.validation_mask(f)
        model = train_logreg_l2(dataset.subset(~val), trainer_config)
        held = dataset.subset(val)
        fold_aucs.append(empirical_auc(predict_scores(model, held), held.labels))
    return float(np.mean(fold_aucs))
