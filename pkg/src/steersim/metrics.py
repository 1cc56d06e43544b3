"""ROC curves, AUC, and stratified train/test splitting."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import stream
from .errors import ClassStarvedError


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray  # first entry is +inf: nothing selected
    auc: float

    @property
    def points(self) -> list[tuple[float, float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist(), self.thresholds.tolist()))

    def to_csv(self) -> str:
        lines = ["fpr,tpr,threshold"]
        lines += [f"{f!r},{t!r},{th!r}" for f, t, th in self.points]
        lines.append(f"# auc={self.auc!r}")
        return "\n".join(lines) + "\n"

    def write_csv(self, path: str | Path) -> None:
        Path(path).write_text(self.to_csv(), encoding="utf-8")


def _check(scores, labels):
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=bool)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be 1-D and of equal length")
    if labels.all() or not labels.any():
        raise ClassStarvedError("ROC needs both positive and negative labels")
    return scores, labels


def roc_curve(scores: Sequence[float], labels: Sequence[bool]) -> RocCurve:
    """ROC swept over distinct score thresholds, highest first.

    Tied scores enter as a single step, which draws a diagonal segment and
    gives ties half credit in the area.
    """
    scores, labels = _check(scores, labels)
    order = np.argsort(-scores, kind="stable")
    s, y = scores[order], labels[order]
    last_of_group = np.r_[s[1:] != s[:-1], True]
    tp = np.cumsum(y)[last_of_group]
    fp = np.cumsum(~y)[last_of_group]
    tpr = np.r_[0.0, tp / tp[-1]]
    fpr = np.r_[0.0, fp / fp[-1]]
    thresholds = np.r_[np.inf, s[last_of_group]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(fpr, tpr, thresholds, auc)


def auc_pairwise_oracle(scores: Sequence[float], labels: Sequence[bool]) -> float:
    """Mann-Whitney statistic by explicit comparison of every positive/negative pair."""
    scores, labels = _check(scores, labels)
    pos, neg = scores[labels], scores[~labels]
    wins = 0.0
    chunk = max(1, 2_000_000 // len(neg))
    for i in range(0, len(pos), chunk):
        p = pos[i:i + chunk, None]
        wins += np.count_nonzero(p > neg) + 0.5 * np.count_nonzero(p == neg)
    return wins / (len(pos) * len(neg))


def stratified_split_indices(labels: Sequence[bool], test_fraction: float, seed: int,
                             stage: str = "split") -> tuple[np.ndarray, np.ndarray]:
    """Sorted train and test indices with class ratios preserved.

    The test set gets round(test_fraction * n) samples, shared between the two
    classes by largest remainder; each class keeps at least one sample on
    each side.
    """
    if not 0.0 < test_fraction < 1.0:
        raise ValueError("test_fraction must be in (0, 1)")
    labels = np.asarray(labels, dtype=bool)
    groups = [np.flatnonzero(~labels), np.flatnonzero(labels)]
    for name, g in zip(("negative", "positive"), groups):
        if len(g) < 2:
            raise ClassStarvedError(f"{name} class has {len(g)} samples; cannot stratify")
    n_test = int(round(test_fraction * len(labels)))
    exact = [test_fraction * len(g) for g in groups]
    take = [int(np.floor(e)) for e in exact]
    spare = n_test - sum(take)
    for i in sorted(range(2), key=lambda i: -(exact[i] - take[i]))[:max(spare, 0)]:
        take[i] += 1
    take = [min(max(t, 1), len(g) - 1) for t, g in zip(take, groups)]
    rng = stream(seed, stage)
    test = []
    for g, t in zip(groups, take):
        test.append(rng.permutation(g)[:t])
    test_idx = np.sort(np.concatenate(test))
    mask = np.ones(len(labels), dtype=bool)
    mask[test_idx] = False
    return np.flatnonzero(mask), test_idx


def split(data, test_fraction: float, seed: int):
    """Stratified shuffle split of an mlcore Dataset into (train, test)."""
    train_idx, test_idx = stratified_split_indices(data.labels, test_fraction, seed)
    return data.subset(train_idx), data.subset(test_idx)


def adjusted_rand_index(a: Sequence[int], b: Sequence[int]) -> float:
    """Hubert-Arabie adjusted Rand index between two labelings."""
    a = np.unique(np.asarray(a), return_inverse=True)[1]
    b = np.unique(np.asarray(b), return_inverse=True)[1]
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)

    def pairs(x):
        return (x * (x - 1) // 2).sum()

    n = len(a)
    index = pairs(table)
    rows, cols = pairs(table.sum(axis=1)), pairs(table.sum(axis=0))
    expected = rows * cols / (n * (n - 1) / 2)
    maximum = (rows + cols) / 2
    if maximum == expected:
        return 1.0
    return float((index - expected) / (maximum - expected))
