"""Informativeness scoring of samples against class centroids.

The score of a sample is the cross-entropy of the model's prediction at a
reference label: the ground-truth class for labeled data, and a
similarity-based label for unlabeled data. The similarity-based label is the
class whose centroid shares the largest top-k feature-index overlap (IoU)
with the sample, ranking feature entries by absolute magnitude.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import IntEnum

import numpy as np
from scipy.special import logsumexp

from .classifier import Classifier

PROB_FLOOR = 1e-12
LOG_PROB_FLOOR = float(np.log(PROB_FLOOR))


class Category(IntEnum):
    """The four target-data categories, doubling as mixture-component ids."""

    CC = 1  # confident-consistent
    UC = 2  # uncertain-consistent
    UI = 3  # uncertain-inconsistent
    CI = 4  # confident-inconsistent


@dataclass
class CentroidSet:
    """Per-class mean feature vectors over labeled data."""

    A: np.ndarray  # (C, d_feat)
    counts: np.ndarray  # (C,)

    @property
    def C(self) -> int:
        return self.A.shape[0]


def centroids_from_features(F: np.ndarray, y: np.ndarray, C: int) -> CentroidSet:
    """Mean feature vector per class. Every class must be represented."""
    F = np.atleast_2d(F)
    y = np.asarray(y, dtype=int)
    counts = np.bincount(y, minlength=C)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise ValueError(f"no labeled samples for classes {missing.tolist()}")
    A = np.zeros((C, F.shape[1]))
    np.add.at(A, y, F)
    A /= counts[:, None]
    return CentroidSet(A=A, counts=counts)


def compute_centroids(model: Classifier, X: np.ndarray, y: np.ndarray) -> CentroidSet:
    """Class centroids in the model's current feature space.

    Recomputed from scratch at every sampling step: a stale centroid would
    mix model drift into the distribution-change signal.
    """
    return centroids_from_features(model.features(X), y, model.C)


# -- top-k index overlap -----------------------------------------------------


def topk_indices(v: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest-magnitude entries, ties going to the smaller
    index. Returned in rank order."""
    v = np.asarray(v)
    if k > v.shape[-1]:
        raise ValueError(f"k={k} exceeds vector dimension {v.shape[-1]}")
    if k < 1:
        raise ValueError("k must be positive")
    order = np.argsort(-np.abs(v), kind="stable")
    return order[:k]


def _topk_mask(F: np.ndarray, k: int) -> np.ndarray:
    idx = np.argsort(-np.abs(F), axis=1, kind="stable")[:, :k]
    mask = np.zeros(F.shape, dtype=bool)
    np.put_along_axis(mask, idx, True, axis=1)
    return mask


def index_iou(a: np.ndarray, b: np.ndarray) -> float:
    """Intersection-over-union of two index sets."""
    a, b = set(np.asarray(a).tolist()), set(np.asarray(b).tolist())
    return len(a & b) / len(a | b)


def similarity_labels(
    F: np.ndarray, centroids: CentroidSet, k: int
) -> np.ndarray:
    """Similarity-based label for each feature row: the class whose centroid
    top-k index set has maximal IoU with the row's top-k index set. Ties go
    to the smallest class index."""
    F = np.atleast_2d(F)
    if k > F.shape[1]:
        raise ValueError(f"k={k} exceeds feature dimension {F.shape[1]}")
    f_mask = _topk_mask(F, k)
    c_mask = _topk_mask(centroids.A, k)
    inter = f_mask.astype(int) @ c_mask.T.astype(int)
    # both sets have exactly k members, so |union| = 2k - |intersection|
    iou = inter / (2 * k - inter)
    return np.argmax(iou, axis=1)


def similarity_label(feature: np.ndarray, centroids: CentroidSet, k: int) -> int:
    return int(similarity_labels(feature[None, :], centroids, k)[0])


# -- informativeness scores ----------------------------------------------


def info_scores_unlabeled(
    model: Classifier, centroids: CentroidSet, X: np.ndarray, k: int
):
    """Scores and similarity-based labels for a batch of unlabeled samples.

    score = -log P at the similarity-based label, probability floored at
    1e-12 so saturated predictions cannot produce infinities.
    """
    X = np.atleast_2d(X)
    F = model.features(X)
    labels = similarity_labels(F, centroids, k)
    z = F @ model.W_out + model.b_out
    logp = z - logsumexp(z, axis=1, keepdims=True)
    picked = np.maximum(logp[np.arange(len(labels)), labels], LOG_PROB_FLOOR)
    return -picked, labels


def info_score_unlabeled(
    model: Classifier, centroids: CentroidSet, x: np.ndarray, k: int
) -> float:
    scores, _ = info_scores_unlabeled(model, centroids, x[None, :], k)
    return float(scores[0])


def info_scores_labeled(model: Classifier, X: np.ndarray, y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=int)
    if (y < 0).any() or (y >= model.C).any():
        raise ValueError("label outside [0, C)")
    logp = model.log_proba(np.atleast_2d(X))
    return -np.maximum(logp[np.arange(len(y)), y], LOG_PROB_FLOOR)


def info_score_labeled(model: Classifier, x: np.ndarray, y: int) -> float:
    return float(info_scores_labeled(model, x[None, :], [y])[0])


# -- observation labels ----------------------------------------------------


def observation_labels(
    model: Classifier, X: np.ndarray, y: np.ndarray, tau: float
) -> np.ndarray:
    """Hard category per labeled sample from confidence and prediction
    agreement:

      CC if max P >= tau and y == argmax P      UC if max P < tau and y == argmax P
      UI if max P < tau and y != argmax P       CI if max P >= tau and y != argmax P

    Exactly one branch holds for any sample; the threshold comparison is
    inclusive.
    """
    y = np.asarray(y, dtype=int)
    if (y < 0).any() or (y >= model.C).any():
        raise ValueError("label outside [0, C)")
    P = model.predict_proba(np.atleast_2d(X))
    pred = np.argmax(P, axis=1)
    confident = P.max(axis=1) >= tau
    consistent = pred == y
    q = np.where(
        consistent,
        np.where(confident, Category.CC, Category.UC),
        np.where(confident, Category.CI, Category.UI),
    )
    return q.astype(int)


def observation_label(model: Classifier, x: np.ndarray, y: int, tau: float) -> Category:
    return Category(int(observation_labels(model, x[None, :], [y], tau)[0]))


# -- debug dump --------------------------------------------------------------

SCORE_DUMP_FIELDS = ["id", "info_score", "sim_label", "pred_label", "max_prob", "obs_or_component"]


def write_score_dump(path, rows) -> None:
    """CSV of per-sample scoring detail; rows are dicts keyed by
    SCORE_DUMP_FIELDS."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SCORE_DUMP_FIELDS)
        writer.writeheader()
        writer.writerows(rows)
