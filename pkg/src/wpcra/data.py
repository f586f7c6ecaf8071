"""Datasets: CSV ingestion, synthetic blobs, client partitioning and trigger injection."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

__all__ = [
    "Dataset",
    "AttackSpec",
    "minmax_normalize",
    "load_csv",
    "synth_dataset",
    "train_test_split",
    "partition",
    "inject_trigger",
    "trigger_values",
]


@dataclass(frozen=True)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    num_classes: int
    groups: np.ndarray | None = None
    feature_names: tuple[str, ...] = ()
    class_names: tuple[str, ...] = ()

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        y = np.asarray(self.y, dtype=int)
        if X.ndim != 2:
            raise ValueError("X must be a 2-D array")
        if y.shape != (X.shape[0],):
            raise ValueError(f"{X.shape[0]} samples but {y.shape[0]} labels")
        if y.size and (y.min() < 0 or y.max() >= self.num_classes):
            raise ValueError(f"labels must lie in [0, {self.num_classes})")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        if self.groups is not None:
            object.__setattr__(self, "groups", np.asarray(self.groups))

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def num_features(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        groups = None if self.groups is None else self.groups[idx]
        return replace(self, X=self.X[idx], y=self.y[idx], groups=groups)


@dataclass(frozen=True)
class AttackSpec:
    """Backdoor settings shared by all attackers.

    ``repeat=True`` keeps poisoning every round from ``adversarial_round`` on;
    the default is a single-shot attack.
    """

    trigger_features: tuple[int, ...] = (0, 1)
    gamma: float = 0.1
    target_label: int = 0
    poison_fraction: float = 0.5
    scale_factor: float = 1.0
    adversarial_round: int = 1
    attacker_ids: tuple[int, ...] = ()
    repeat: bool = False

    def __post_init__(self):
        object.__setattr__(self, "trigger_features", tuple(int(j) for j in self.trigger_features))
        object.__setattr__(self, "attacker_ids", tuple(int(i) for i in self.attacker_ids))
        if not 0.0 <= self.poison_fraction <= 1.0:
            raise ValueError(f"poison_fraction must be in [0, 1], got {self.poison_fraction}")
        if self.poison_fraction > 0 and not self.trigger_features:
            raise ValueError("a positive poison_fraction needs at least one trigger feature")
        if self.gamma < 0:
            raise ValueError(f"gamma must be >= 0, got {self.gamma}")
        if not self.scale_factor > 0:
            raise ValueError(f"scale_factor must be > 0, got {self.scale_factor}")
        if self.adversarial_round < 1:
            raise ValueError(f"adversarial_round must be >= 1, got {self.adversarial_round}")

    def is_attack_round(self, t: int) -> bool:
        if self.repeat:
            return t >= self.adversarial_round
        return t == self.adversarial_round


def minmax_normalize(X: np.ndarray) -> np.ndarray:
    """Scale each column to [0, 1]; constant columns become all zeros."""
    X = np.asarray(X, dtype=float)
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    out = np.zeros_like(X)
    ok = span > 0
    out[:, ok] = (X[:, ok] - lo[ok]) / span[ok]
    return out


def load_csv(
    path: str | Path,
    label_column: str,
    group_column: str | None = None,
    normalize: bool = True,
) -> Dataset:
    """Read a numeric CSV with a header row.

    Every column other than the label and group columns is a feature and must
    parse as a real number.  Labels are encoded densely in first-appearance
    order.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        for col in (label_column, group_column):
            if col is not None and col not in header:
                raise ValueError(f"{path}: column {col!r} not found in header {header}")
        label_at = header.index(label_column)
        group_at = header.index(group_column) if group_column is not None else None
        feat_at = [k for k in range(len(header)) if k not in (label_at, group_at)]
        if not feat_at:
            raise ValueError(f"{path}: no feature columns besides the label/group columns")

        rows, labels, groups = [], [], []
        classes: dict[str, int] = {}
        for lineno, rec in enumerate(reader, start=2):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ValueError(
                    f"{path}: row {lineno} has {len(rec)} cells, header has {len(header)}"
                )
            vals = []
            for k in feat_at:
                cell = rec[k].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {lineno}, column {header[k]!r}: cannot parse {cell!r} "
                        "as a number (categorical columns must be pre-encoded)"
                    ) from None
                if not math.isfinite(v):
                    raise ValueError(f"{path}: row {lineno}, column {header[k]!r}: non-finite value")
                vals.append(v)
            rows.append(vals)
            lab = rec[label_at].strip()
            labels.append(classes.setdefault(lab, len(classes)))
            if group_at is not None:
                groups.append(rec[group_at].strip())

    if len(classes) < 2:
        raise ValueError(
            f"{path}: label column {label_column!r} has {len(classes)} distinct value(s), need >= 2"
        )
    X = np.array(rows, dtype=float)
    if normalize:
        X = minmax_normalize(X)
    return Dataset(
        X=X,
        y=np.array(labels, dtype=int),
        num_classes=len(classes),
        groups=np.array(groups) if group_at is not None else None,
        feature_names=tuple(header[k] for k in feat_at),
        class_names=tuple(classes),
    )


def synth_dataset(
    num_samples: int,
    num_features: int,
    num_classes: int,
    class_separation: float,
    seed: int | np.random.Generator,
) -> Dataset:
    """Gaussian blobs, one per class, min-max normalized to [0, 1].

    Class means sit on (near-)orthogonal directions scaled so that pairwise
    mean distances are ``class_separation`` in units of the unit-variance noise.
    """
    if num_features < 2 or num_classes < 2:
        raise ValueError("need at least 2 features and 2 classes")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    dirs = rng.standard_normal((max(num_features, num_classes), num_features))
    if num_classes <= num_features:
        q, _ = np.linalg.qr(dirs[:num_features].T)
        dirs = q.T[:num_classes]
    else:
        dirs = dirs[:num_classes]
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    means = dirs * (class_separation / math.sqrt(2.0))
    y = rng.permutation(np.arange(num_samples) % num_classes)
    X = means[y] + rng.standard_normal((num_samples, num_features))
    return Dataset(X=minmax_normalize(X), y=y, num_classes=num_classes)


def train_test_split(
    dataset: Dataset, test_fraction: float, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    """Split stratified by class; each class contributes ``round(test_fraction * n_c)`` test rows."""
    test_idx = []
    for c in range(dataset.num_classes):
        idx = np.flatnonzero(dataset.y == c)
        k = int(round(test_fraction * idx.size))
        test_idx.append(rng.permutation(idx)[:k])
    test_idx = np.sort(np.concatenate(test_idx))
    mask = np.ones(len(dataset), dtype=bool)
    mask[test_idx] = False
    return dataset.subset(np.flatnonzero(mask)), dataset.subset(test_idx)


def partition(
    dataset: Dataset,
    num_clients: int,
    strategy: str = "uniform",
    rng: np.random.Generator | None = None,
    beta: float = 0.5,
) -> list[Dataset]:
    """Split ``dataset`` into ``num_clients`` disjoint shards covering every sample.

    Strategies: ``"by_group"`` (one distinct group value per client, in sorted
    order), ``"uniform"`` (random permutation cut into near-equal shards) and
    ``"dirichlet"`` (per-class proportions drawn from ``Dir(beta)``).
    """
    if num_clients < 2:
        raise ValueError(f"need at least 2 clients, got {num_clients}")
    n = len(dataset)
    if strategy == "by_group":
        if dataset.groups is None:
            raise ValueError("by_group partitioning needs a dataset with group labels")
        values = np.unique(dataset.groups)
        if values.size != num_clients:
            raise ValueError(
                f"by_group needs exactly one group per client: {values.size} groups, "
                f"{num_clients} clients"
            )
        shards = [np.flatnonzero(dataset.groups == g) for g in values]
    elif strategy == "uniform":
        if rng is None:
            raise ValueError("uniform partitioning needs a random generator")
        shards = np.array_split(rng.permutation(n), num_clients)
    elif strategy == "dirichlet":
        if rng is None:
            raise ValueError("dirichlet partitioning needs a random generator")
        if not beta > 0:
            raise ValueError(f"dirichlet beta must be > 0, got {beta}")
        for _ in range(100):
            shards = _dirichlet_shards(dataset.y, dataset.num_classes, num_clients, beta, rng)
            if min(s.size for s in shards) > 0:
                break
    else:
        raise ValueError(f"unknown partition strategy {strategy!r}")

    if min(s.size for s in shards) == 0:
        raise ValueError(
            f"partitioning {n} samples over {num_clients} clients left a client empty; "
            "use a larger dataset or fewer clients"
        )
    return [dataset.subset(np.sort(s)) for s in shards]


def _dirichlet_shards(y, num_classes, num_clients, beta, rng):
    parts = [[] for _ in range(num_clients)]
    for c in range(num_classes):
        idx = rng.permutation(np.flatnonzero(y == c))
        props = rng.dirichlet(np.full(num_clients, beta))
        cuts = (np.cumsum(props)[:-1] * idx.size).astype(int)
        for k, chunk in enumerate(np.split(idx, cuts)):
            parts[k].append(chunk)
    return [np.concatenate(p) for p in parts]


def trigger_values(values: np.ndarray, gamma: float, n_triggers: int) -> np.ndarray:
    """Additive trigger clamped at 1: ``min(v + gamma / sqrt(n), 1)``."""
    return np.minimum(np.asarray(values, dtype=float) + gamma / math.sqrt(n_triggers), 1.0)


def inject_trigger(
    dataset: Dataset,
    spec: AttackSpec,
    rng: np.random.Generator,
    fraction: float | None = None,
) -> Dataset:
    """Return a copy with ``floor(r * |D|)`` random samples triggered and relabelled.

    ``fraction`` overrides ``spec.poison_fraction``; pass ``1.0`` to build a fully
    triggered evaluation set.
    """
    r = spec.poison_fraction if fraction is None else fraction
    if r > 0 and not spec.trigger_features:
        raise ValueError("cannot inject a trigger with an empty trigger feature set")
    if not 0 <= spec.target_label < dataset.num_classes:
        raise ValueError(f"target_label {spec.target_label} outside [0, {dataset.num_classes})")
    cols = np.asarray(spec.trigger_features, dtype=int)
    if cols.size and (cols.min() < 0 or cols.max() >= dataset.num_features):
        raise ValueError(f"trigger features {spec.trigger_features} outside the feature range")
    k = math.floor(r * len(dataset))
    chosen = np.sort(rng.choice(len(dataset), size=k, replace=False))
    X = dataset.X.copy()
    y = dataset.y.copy()
    if k:
        X[np.ix_(chosen, cols)] = trigger_values(X[np.ix_(chosen, cols)], spec.gamma, cols.size)
        y[chosen] = spec.target_label
    return replace(dataset, X=X, y=y)
