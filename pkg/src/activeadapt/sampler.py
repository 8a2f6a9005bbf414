"""Active-batch selection and unlabeled-pool partitioning.

Selection ranks the whole unlabeled pool by the posterior of the
uncertain-inconsistent mixture component and takes the top b. After
annotation the remaining pool is partitioned by posterior argmax:
confident-consistent samples feed the consistency loss,
uncertain-consistent samples feed the entropy loss, confident-inconsistent
samples are withheld, and residual uncertain-inconsistent samples wait for
the next round.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .classifier import Classifier
from .gmm import GmmParams, component_posteriors
from .scoring import (
    Category,
    CentroidSet,
    centroids_from_features,
    info_scores_unlabeled,
    similarity_labels,
)


@dataclass
class PartitionAssignment:
    """Category per remaining unlabeled sample id."""

    category: dict[int, Category]

    def ids(self, cat: Category) -> list[int]:
        return [i for i, c in self.category.items() if c == cat]

    @property
    def sizes(self) -> dict[str, int]:
        out = {c.name: 0 for c in Category}
        for c in self.category.values():
            out[c.name] += 1
        return out


@dataclass
class SfdaConfig:
    """Adaptive thresholds for the source-free bootstrap. t_c_init defaults
    to 1/C + 1e-5 at call time when left unset."""

    t_v_init: float = 0.95
    t_v_step: float = 0.1
    t_c_init: float | None = None
    t_c_step: float = 0.1

    def __post_init__(self):
        if self.t_v_step <= 0 or self.t_c_step <= 0:
            raise ValueError("threshold steps must be positive")


def select_active_batch(ids, scores, params: GmmParams, b: int) -> list[int]:
    """The min(b, |U|) sample ids with the highest uncertain-inconsistent
    component posterior, in descending order; ties go to the smaller id."""
    if b < 0:
        raise ValueError("batch size must be nonnegative")
    ids = np.asarray(ids, dtype=int)
    scores = np.asarray(scores, dtype=float)
    if ids.size == 0 or b == 0:
        return []
    post = component_posteriors(scores, params)[:, Category.UI - 1]
    order = np.lexsort((ids, -post))
    return [int(i) for i in ids[order[: min(b, ids.size)]]]


def partition_unlabeled(
    ids,
    X,
    model: Classifier,
    centroids: CentroidSet,
    params: GmmParams,
    k: int,
) -> PartitionAssignment:
    """Assign every remaining unlabeled sample to the argmax component of
    its score posterior. Annotated ids must already be out of (ids, X)."""
    ids = np.asarray(ids, dtype=int)
    if ids.size == 0:
        return PartitionAssignment(category={})
    scores, _ = info_scores_unlabeled(model, centroids, X, k)
    post = component_posteriors(scores, params)
    cats = np.argmax(post, axis=1) + 1
    return PartitionAssignment(
        category={int(i): Category(int(c)) for i, c in zip(ids, cats)}
    )


# -- source-free bootstrap ---------------------------------------------------


@dataclass
class SfdaResult:
    pseudo_labeled: list[tuple[int, int]]  # (id, predicted label)
    active_ids: list[int]
    centroids: CentroidSet
    t_v: float
    t_c: float


def sfda_bootstrap(
    model: Classifier, ids, X, cfg: SfdaConfig, b: int, k: int
) -> SfdaResult:
    """Bootstrap labeled-data proxies when no labeled samples exist.

    High-confidence predictions (max P >= t_v) form the pseudo-labeled set;
    t_v starts at its configured value and relaxes by t_v_step until every
    class is covered, or fails hard if the pool never covers a class.
    Active candidates are the samples whose prediction disagrees with their
    similarity-based label and whose confidence is at most t_c; t_c starts
    at 1/C + 1e-5 and grows by t_c_step until at least b candidates qualify
    (or the whole inconsistent set is in). When more than b qualify, the
    least confident are taken first.
    """
    ids = np.asarray(ids, dtype=int)
    X = np.atleast_2d(X)
    if ids.size == 0:
        raise ValueError("bootstrap needs a non-empty unlabeled pool")
    C = model.C
    P = model.predict_proba(X)
    pred = np.argmax(P, axis=1)
    maxp = P.max(axis=1)

    t_v = cfg.t_v_init
    while True:
        proxy = maxp >= t_v
        if len(np.unique(pred[proxy])) == C:
            break
        if t_v <= 0:
            raise ValueError(
                "predictions never cover every class; cannot bootstrap a proxy labeled set"
            )
        t_v -= cfg.t_v_step

    centroids = centroids_from_features(
        model.features(X[proxy]), pred[proxy], C
    )
    sim = similarity_labels(model.features(X), centroids, k)
    inconsistent = pred != sim

    t_c = cfg.t_c_init if cfg.t_c_init is not None else 1.0 / C + 1e-5
    while True:
        candidates = inconsistent & (maxp <= t_c)
        if candidates.sum() >= b or t_c >= 1.0:
            break
        t_c += cfg.t_c_step

    cand_idx = np.flatnonzero(candidates)
    order = np.lexsort((ids[cand_idx], maxp[cand_idx]))
    take = cand_idx[order[: min(b, cand_idx.size)]]

    return SfdaResult(
        pseudo_labeled=[(int(i), int(p)) for i, p in zip(ids[proxy], pred[proxy])],
        active_ids=[int(i) for i in ids[take]],
        centroids=centroids,
        t_v=t_v,
        t_c=t_c,
    )


# -- consistency diagnostic ----------------------------------------------


def consistency_rate(
    X, model: Classifier, centroids: CentroidSet, k: int
) -> float:
    """Fraction of samples whose predicted class equals their
    similarity-based label."""
    X = np.atleast_2d(X)
    if X.shape[0] == 0:
        raise ValueError("consistency rate of an empty subset is undefined")
    pred = model.predict(X)
    sim = similarity_labels(model.features(X), centroids, k)
    return float(np.mean(pred == sim))


def loss_quantile_split(losses, quantile: float):
    """Boolean masks (low, high) splitting samples at a loss quantile:
    low has loss <= the quantile point, high has loss above it."""
    losses = np.asarray(losses, dtype=float)
    if losses.size == 0:
        raise ValueError("cannot split an empty loss vector")
    if not 0.0 < quantile < 1.0:
        raise ValueError("quantile must lie in (0, 1)")
    cut = np.quantile(losses, quantile)
    low = losses <= cut
    return low, ~low
