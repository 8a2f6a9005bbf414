"""Data pools for pool-based active adaptation runs.

Three pools are tracked: labeled source data, labeled target data (grows as
the oracle annotates), and unlabeled target data. Ground-truth labels of
target samples are hidden; the simulated oracle is the only sanctioned way
to read them during a run.
"""

from __future__ import annotations

import copy as _copy
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from scipy.linalg import expm


class Domain(Enum):
    SOURCE = "S"
    TARGET = "T"


class ShiftKind(Enum):
    ROTATION = "rotation"
    TRANSLATION = "translation"
    COVARIANCE_SCALE = "covariance_scale"
    MIXED = "mixed"


@dataclass(eq=False)
class Sample:
    """One raw input vector. Labels live in the pool, not on the sample."""

    id: int
    x: np.ndarray
    domain: Domain


@dataclass
class ShiftConfig:
    """Synthetic dataset recipe: class-conditional Gaussians plus a
    configurable source-to-target transform.

    shift_magnitude is a continuous domain-gap knob: 0 means the target
    distribution equals the source distribution exactly.
    """

    C: int
    d_in: int
    n_source: int
    n_target: int
    shift_kind: ShiftKind = ShiftKind.ROTATION
    shift_magnitude: float = 0.5
    seed: int = 0
    class_separation: float = 4.0
    class_std: float = 1.0

    def __post_init__(self):
        if isinstance(self.shift_kind, str):
            self.shift_kind = ShiftKind(self.shift_kind)
        if self.C < 2:
            raise ValueError(f"need at least 2 classes, got C={self.C}")
        if self.d_in < self.C - 1:
            raise ValueError(
                f"d_in={self.d_in} cannot hold a {self.C}-vertex simplex "
                f"(need d_in >= C-1)"
            )
        if self.n_source <= 0 or self.n_target <= 0:
            raise ValueError("n_source and n_target must be positive")
        if self.n_source < self.C:
            raise ValueError("n_source must cover every class at least once")
        if self.shift_magnitude < 0:
            raise ValueError("shift_magnitude must be nonnegative")


@dataclass
class DataPool:
    """The S / T / U pools plus the hidden label table.

    Invariants: the three pools are pairwise disjoint by sample id, every
    class appears in source_labeled, and the labeled-target pool only grows
    through annotate_batch.
    """

    C: int
    d_in: int
    source_labeled: list[tuple[Sample, int]] = field(default_factory=list)
    target_labeled: list[tuple[Sample, int]] = field(default_factory=list)
    target_unlabeled: list[Sample] = field(default_factory=list)
    _truth: dict[int, int] = field(default_factory=dict, repr=False)

    # -- oracle ----------------------------------------------------------

    def oracle_label(self, sample_id: int) -> int:
        """Return the hidden true label of an unlabeled target sample.

        Simulates the human annotator. Does not mutate the pool; raises on
        ids outside the unlabeled pool so double-annotation cannot slip
        through silently.
        """
        if sample_id not in self._truth:
            raise ValueError(f"unknown sample id {sample_id}")
        if not any(s.id == sample_id for s in self.target_unlabeled):
            raise ValueError(
                f"sample id {sample_id} is not in the unlabeled pool"
            )
        return self._truth[sample_id]

    def annotate_batch(self, ids: list[int]) -> "DataPool":
        """Move the given unlabeled samples into the labeled target pool,
        attaching their oracle labels. Fails atomically: either every id is
        valid or the pool is left untouched."""
        ids = list(ids)
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate ids in annotation batch")
        by_id = {s.id: s for s in self.target_unlabeled}
        missing = [i for i in ids if i not in by_id]
        if missing:
            raise ValueError(f"ids not in unlabeled pool: {missing}")
        picked = set(ids)
        for i in ids:
            self.target_labeled.append((by_id[i], self._truth[i]))
        self.target_unlabeled = [
            s for s in self.target_unlabeled if s.id not in picked
        ]
        return self

    # -- array views -----------------------------------------------------

    def labeled_arrays(self, include_source: bool = True):
        """Feature matrix and labels over S ∪ T (or T alone)."""
        pairs = (self.source_labeled if include_source else []) + self.target_labeled
        if not pairs:
            return np.zeros((0, self.d_in)), np.zeros(0, dtype=int)
        X = np.stack([s.x for s, _ in pairs])
        y = np.array([lab for _, lab in pairs], dtype=int)
        return X, y

    def unlabeled_arrays(self):
        """Ids and feature matrix over U, in pool order."""
        if not self.target_unlabeled:
            return np.zeros(0, dtype=int), np.zeros((0, self.d_in))
        ids = np.array([s.id for s in self.target_unlabeled], dtype=int)
        X = np.stack([s.x for s in self.target_unlabeled])
        return ids, X

    def target_arrays(self):
        """Ids and feature matrix over the full target domain (T ∪ U)."""
        samples = [s for s, _ in self.target_labeled] + self.target_unlabeled
        ids = np.array([s.id for s in samples], dtype=int)
        X = (
            np.stack([s.x for s in samples])
            if samples
            else np.zeros((0, self.d_in))
        )
        return ids, X

    def evaluation_labels(self, ids) -> np.ndarray:
        """True labels for the given target ids.

        Metric computation only (target-domain accuracy, selected-sample
        error rate); adaptation code must go through oracle_label.
        """
        return np.array([self._truth[i] for i in ids], dtype=int)

    # -- bookkeeping -----------------------------------------------------

    @property
    def unlabeled_ids(self) -> set[int]:
        return {s.id for s in self.target_unlabeled}

    @property
    def sizes(self) -> tuple[int, int, int]:
        return (
            len(self.source_labeled),
            len(self.target_labeled),
            len(self.target_unlabeled),
        )

    def copy(self) -> "DataPool":
        return _copy.deepcopy(self)

    def check_invariants(self):
        """Raise if pool bookkeeping is corrupted."""
        sid = [s.id for s, _ in self.source_labeled]
        tid = [s.id for s, _ in self.target_labeled]
        uid = [s.id for s in self.target_unlabeled]
        all_ids = sid + tid + uid
        if len(set(all_ids)) != len(all_ids):
            raise ValueError("sample ids are not pairwise disjoint across pools")
        covered = {lab for _, lab in self.source_labeled}
        if covered != set(range(self.C)):
            raise ValueError(
                f"source pool covers classes {sorted(covered)}, expected all of [0, {self.C})"
            )
        bad = [lab for _, lab in self.source_labeled + self.target_labeled if not 0 <= lab < self.C]
        if bad:
            raise ValueError(f"labels outside [0, C): {bad}")


# -- synthetic generator ---------------------------------------------------


def simplex_means(C: int, d_in: int, separation: float) -> np.ndarray:
    """Class means on a regular simplex embedded in d_in dimensions,
    centered at the origin, with pairwise distance `separation`."""
    V = np.eye(C) - 1.0 / C
    # rank C-1; project onto the spanned subspace
    U, s, _ = np.linalg.svd(V)
    coords = U[:, : C - 1] * s[: C - 1]
    pair_dist = np.linalg.norm(coords[0] - coords[1])
    coords *= separation / pair_dist
    means = np.zeros((C, d_in))
    means[:, : C - 1] = coords
    return means


def shift_transform(cfg: ShiftConfig):
    """The source-to-target transform implied by a config.

    Returns (rotation, offset, cov_scale): target samples are drawn as
    rotation @ (mu_c + cov_scale * sigma * eps) + offset. At magnitude 0 this
    is exactly (identity, zero, 1), so source and target coincide.
    """
    m = cfg.shift_magnitude
    rng = np.random.default_rng([cfg.seed, 0x5147])
    rotation = np.eye(cfg.d_in)
    offset = np.zeros(cfg.d_in)
    cov_scale = 1.0

    want_rot = cfg.shift_kind in (ShiftKind.ROTATION, ShiftKind.MIXED)
    want_tra = cfg.shift_kind in (ShiftKind.TRANSLATION, ShiftKind.MIXED)
    want_cov = cfg.shift_kind in (ShiftKind.COVARIANCE_SCALE, ShiftKind.MIXED)

    # rng consumption order is fixed so the transform is reproducible
    G = rng.standard_normal((cfg.d_in, cfg.d_in))
    skew = G - G.T
    norm = np.linalg.norm(skew, 2)
    if want_rot and m > 0 and norm > 0:
        rotation = expm(m * skew / norm)
    u = rng.standard_normal(cfg.d_in)
    if want_tra and m > 0:
        offset = m * u / np.linalg.norm(u)
    if want_cov:
        cov_scale = 1.0 + m
    return rotation, offset, cov_scale


def _labels_covering(rng, n: int, C: int) -> np.ndarray:
    # every class at least once whenever n allows it
    if n >= C:
        lab = np.concatenate([np.arange(C), rng.integers(0, C, n - C)])
        rng.shuffle(lab)
    else:
        lab = rng.integers(0, C, n)
    return lab.astype(int)


def generate_shifted_dataset(cfg: ShiftConfig) -> DataPool:
    """Draw a synthetic domain-shifted classification dataset.

    Source samples come from C class-conditional Gaussians with means on a
    scaled simplex; target samples come from the same Gaussians pushed
    through the configured shift. Pure function of the config, seed
    included.
    """
    rng = np.random.default_rng(cfg.seed)
    means = simplex_means(cfg.C, cfg.d_in, cfg.class_separation)
    rotation, offset, cov_scale = shift_transform(cfg)

    y_s = _labels_covering(rng, cfg.n_source, cfg.C)
    X_s = means[y_s] + cfg.class_std * rng.standard_normal((cfg.n_source, cfg.d_in))

    y_t = _labels_covering(rng, cfg.n_target, cfg.C)
    base = means[y_t] + cov_scale * cfg.class_std * rng.standard_normal(
        (cfg.n_target, cfg.d_in)
    )
    X_t = base @ rotation.T + offset

    pool = DataPool(C=cfg.C, d_in=cfg.d_in)
    for i in range(cfg.n_source):
        s = Sample(id=i, x=X_s[i], domain=Domain.SOURCE)
        pool.source_labeled.append((s, int(y_s[i])))
        pool._truth[i] = int(y_s[i])
    for j in range(cfg.n_target):
        sid = cfg.n_source + j
        s = Sample(id=sid, x=X_t[j], domain=Domain.TARGET)
        pool.target_unlabeled.append(s)
        pool._truth[sid] = int(y_t[j])
    return pool


# -- delimited-file ingestion ----------------------------------------------
#
# Format: header line "d_in,C", then one line per sample:
#   id,domain,label,f_0,...,f_{d_in-1}     with domain in {S, T}
# Target labels are loaded into the hidden table only.


def save_pool(pool: DataPool, path) -> None:
    """Write a pool to the delimited dataset format.

    Intended for fresh pools; labeled-target membership is not encoded, so
    loading a saved pool puts every target sample back into U.
    """
    lines = [f"{pool.d_in},{pool.C}"]
    for s, lab in pool.source_labeled:
        feats = ",".join(repr(float(v)) for v in s.x)
        lines.append(f"{s.id},S,{lab},{feats}")
    target = [(s, pool._truth[s.id]) for s, _ in pool.target_labeled]
    target += [(s, pool._truth[s.id]) for s in pool.target_unlabeled]
    for s, lab in target:
        feats = ",".join(repr(float(v)) for v in s.x)
        lines.append(f"{s.id},T,{lab},{feats}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_pool(path) -> DataPool:
    """Read a pool from the delimited dataset format."""
    text = Path(path).read_text().strip()
    if not text:
        raise ValueError(f"empty dataset file: {path}")
    lines = text.splitlines()
    try:
        d_in, C = (int(v) for v in lines[0].split(","))
    except Exception as exc:
        raise ValueError(f"bad header line {lines[0]!r}") from exc
    pool = DataPool(C=C, d_in=d_in)
    for ln, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != 3 + d_in:
            raise ValueError(f"line {ln}: expected {3 + d_in} fields, got {len(parts)}")
        sid, dom, lab = int(parts[0]), parts[1], int(parts[2])
        x = np.array([float(v) for v in parts[3:]])
        if sid in pool._truth:
            raise ValueError(f"line {ln}: duplicate sample id {sid}")
        if not 0 <= lab < C:
            raise ValueError(f"line {ln}: label {lab} outside [0, {C})")
        pool._truth[sid] = lab
        if dom == "S":
            pool.source_labeled.append((Sample(sid, x, Domain.SOURCE), lab))
        elif dom == "T":
            pool.target_unlabeled.append(Sample(sid, x, Domain.TARGET))
        else:
            raise ValueError(f"line {ln}: domain must be S or T, got {dom!r}")
    pool.check_invariants()
    return pool
