"""Dyad-fold cross-validation and predictive metrics (ROC, PR, separation).

Folds partition the n(n-1) ordered dyads; masking y_ij does not mask y_ji.
AUC-ROC comes from the trapezoid rule over distinct-threshold points, which
equals the tie-corrected pairwise concordance statistic.  AUC-PR interpolates
precision in true-positive count between adjacent achievable points (linear
interpolation in recall would overstate performance).
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
from joblib import Parallel, delayed

from . import ame, glmbase, lsm, netdata
from .errors import DataError
from .randkit import SeededStream


@dataclass(frozen=True)
class FoldAssignment:
    """Fold index per ordered dyad; -1 on the diagonal."""

    n: int
    S: int
    fold_of: np.ndarray  # n x n int

    def pairs_in_fold(self, s: int) -> np.ndarray:
        return np.argwhere(self.fold_of == s)

    def sizes(self) -> np.ndarray:
        return np.bincount(self.fold_of[self.fold_of >= 0], minlength=self.S)


@dataclass(frozen=True)
class PredictionSet:
    """Out-of-sample (or in-sample) scored dyads."""

    sender: np.ndarray
    receiver: np.ndarray
    label: np.ndarray
    score: np.ndarray
    fold: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.score)):
            raise DataError("prediction scores must be finite")

    @property
    def size(self) -> int:
        return int(self.label.shape[0])


def assign_folds(n: int, S: int, seed: int) -> FoldAssignment:
    """Uniform random partition of ordered dyads into S near-equal folds."""
    m = n * (n - 1)
    if not 2 <= S <= m:
        raise DataError(f"S must lie in [2, {m}], got {S}")
    stream = SeededStream(seed).derive(0)
    perm = stream.permutation(m)
    fold_flat = np.empty(m, dtype=int)
    base, rem = divmod(m, S)
    start = 0
    for s in range(S):
        size = base + (1 if s < rem else 0)
        fold_flat[perm[start : start + size]] = s
        start += size
    fold_of = np.full((n, n), -1, dtype=int)
    off = ~np.eye(n, dtype=bool)
    fold_of[off] = fold_flat
    return FoldAssignment(n=n, S=S, fold_of=fold_of)


def _fit_and_score(Y, X, model: str, model_config, fold_mask, fold_idx, seed):
    masked = Y.cells.copy()
    masked[fold_mask] = np.nan
    Y_train = Y.with_cells(masked)
    remaining = Y_train.cells[np.isfinite(Y_train.cells)]
    if remaining.size == 0 or np.all(remaining == remaining[0]):
        raise DataError(
            f"fold {fold_idx}: masking leaves a degenerate network (constant outcomes)"
        )
    if model == "ame":
        cfg = dataclasses.replace(model_config, seed=seed, chains=1, n_jobs=1)
        samples = ame.fit(Y_train, X, cfg, _lineage=(1, fold_idx))
        prob = ame.predict_proba(samples)
    elif model == "lsm":
        cfg = dataclasses.replace(model_config, seed=seed, chains=1, n_jobs=1)
        samples = lsm.fit_lsm(Y_train, X, cfg, _lineage=(1, fold_idx))
        prob = samples.prob_mean
    elif model == "logit":
        fitres = glmbase.fit_logit(Y_train, X)
        prob = glmbase.predict_proba(fitres, X)
    else:
        raise DataError(f"unknown model {model!r}")
    return prob[fold_mask]


def cross_validate(
    Y: netdata.Network,
    X: netdata.DesignArray | None,
    model: str,
    model_config,
    S: int,
    seed: int,
    n_jobs: int = 1,
) -> PredictionSet:
    """Mask each fold in turn, refit, and score the held-out dyads.

    Every originally observed dyad appears exactly once, scored by a model
    that never saw it.  Fold fits run independently with derived seeds.
    """
    if Y.family != "binary":
        raise DataError("cross-validation requires a binary network")
    if X is None:
        X = netdata.intercept_design(Y.n)
    folds = assign_folds(Y.n, S, seed)
    obs = Y.observed_mask()

    def run(s):
        fold_mask = (folds.fold_of == s) & obs
        if not fold_mask.any():
            return s, fold_mask, np.empty(0)
        return s, fold_mask, _fit_and_score(Y, X, model, model_config, fold_mask, s, seed)

    if n_jobs != 1:
        results = Parallel(n_jobs=n_jobs)(delayed(run)(s) for s in range(S))
    else:
        results = [run(s) for s in range(S)]

    senders, receivers, labels, scores, fold_ids = [], [], [], [], []
    for s, fold_mask, sc in sorted(results, key=lambda r: r[0]):
        idx = np.argwhere(fold_mask)
        senders.append(idx[:, 0])
        receivers.append(idx[:, 1])
        labels.append(Y.cells[fold_mask])
        scores.append(sc)
        fold_ids.append(np.full(idx.shape[0], s, dtype=int))
    return PredictionSet(
        sender=np.concatenate(senders),
        receiver=np.concatenate(receivers),
        label=np.concatenate(labels).astype(int),
        score=np.concatenate(scores),
        fold=np.concatenate(fold_ids),
    )


def in_sample_predictions(Y: netdata.Network, prob: np.ndarray) -> PredictionSet:
    """Wrap a fitted probability matrix as a PredictionSet over observed dyads."""
    obs = Y.observed_mask()
    idx = np.argwhere(obs)
    return PredictionSet(
        sender=idx[:, 0],
        receiver=idx[:, 1],
        label=Y.cells[obs].astype(int),
        score=prob[obs],
        fold=np.zeros(idx.shape[0], dtype=int),
    )


def _threshold_counts(label: np.ndarray, score: np.ndarray):
    """Cumulative (TP, FP) at every distinct score threshold, descending."""
    order = np.argsort(-score, kind="stable")
    y = label[order]
    s = score[order]
    tp = np.cumsum(y == 1)
    fp = np.cumsum(y == 0)
    # Keep the last index of each tie block: counts *after* consuming all
    # dyads at that threshold.
    last = np.nonzero(np.diff(s, append=-np.inf))[0]
    return tp[last].astype(float), fp[last].astype(float)


def roc_points(preds: PredictionSet):
    """ROC points over all distinct thresholds plus trapezoid AUC."""
    pos = int((preds.label == 1).sum())
    neg = int((preds.label == 0).sum())
    if pos == 0 or neg == 0:
        raise DataError("ROC needs both classes present")
    tp, fp = _threshold_counts(preds.label, preds.score)
    tpr = np.concatenate([[0.0], tp / pos])
    fpr = np.concatenate([[0.0], fp / neg])
    auc = float(np.trapezoid(tpr, fpr))
    return list(zip(fpr, tpr)), auc


def pr_points(preds: PredictionSet):
    """PR points at achievable thresholds plus interpolated AUC-PR.

    The area sums precision over unit true-positive steps, with the false
    positive count interpolated linearly in TP between adjacent achievable
    points.
    """
    pos = int((preds.label == 1).sum())
    if pos == 0:
        raise DataError("PR needs at least one positive")
    tp, fp = _threshold_counts(preds.label, preds.score)
    recall = tp / pos
    precision = tp / (tp + fp)
    points = list(zip(recall, precision))

    auc = 0.0
    prev_tp, prev_fp = 0.0, 0.0
    for t, f in zip(tp, fp):
        if t > prev_tp:
            ks = np.arange(prev_tp + 1.0, t + 1.0)
            fps = prev_fp + (f - prev_fp) * (ks - prev_tp) / (t - prev_tp)
            auc += float((ks / (ks + fps)).sum()) / pos
        prev_tp, prev_fp = t, f
    return points, auc


def separation_data(preds: PredictionSet):
    """Observations ordered by ascending score (stable ties): (rank, label, score)."""
    order = np.argsort(preds.score, kind="stable")
    return [
        (rank + 1, int(preds.label[i]), float(preds.score[i]))
        for rank, i in enumerate(order)
    ]
