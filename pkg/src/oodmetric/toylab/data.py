"""Synthetic point datasets standing in for detections of foreground, background and OOD objects.

Foreground classes are Gaussian clusters, OOD objects are Gaussian clusters kept away from every
foreground mean, and background points fill the region between the foreground clusters. The OOD clusters
of the training partition and of the validation partition are different, so validation measures how the
model treats OOD objects it has never seen.
"""

import math
from dataclasses import dataclass, field
from enum import IntEnum
from itertools import combinations

import numpy as np

from oodmetric.errors import InputError


class Group(IntEnum):
    """The generating group of a point."""

    FG = 0
    OOD = 1
    BG = 2


def ring(radius: float, angles_deg: tuple[float, ...]) -> tuple[tuple[float, float], ...]:
    """Points on a circle around the origin at the given angles (degrees)."""
    return tuple(
        (radius * math.cos(math.radians(a)), radius * math.sin(math.radians(a))) for a in angles_deg
    )


_FG_ANGLES = (90.0, 210.0, 330.0)
# Training OOD every 30 degrees, covering the foreground rays and the class boundaries;
# validation OOD halfway between them, off every foreground ray.
_OOD_TRAIN_ANGLES = tuple(30.0 * k for k in range(12))
_OOD_VAL_ANGLES = tuple(15.0 + 30.0 * k for k in range(12))


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the generator.

    Attributes:
        fg_means: One cluster mean per foreground class.
        ood_train_means: Means of the OOD clusters of the training partition.
        ood_val_means: Means of the OOD clusters of the validation partition.
        cluster_std: Standard deviation of every cluster, per dimension.
        n_fg_per_class: Foreground points per class and partition.
        n_ood_per_cluster: Points per OOD cluster.
        n_bg: Background points per partition.
        bg_radius: Radius of the ball around the foreground centroid background is drawn from.
        bg_exclusion: Background points closer than this to any cluster mean are rejected.
        ood_margin: Minimum distance between any OOD mean and any foreground mean.
    """

    fg_means: tuple[tuple[float, ...], ...] = field(default_factory=lambda: ring(3.0, _FG_ANGLES))
    ood_train_means: tuple[tuple[float, ...], ...] = field(default_factory=lambda: ring(6.0, _OOD_TRAIN_ANGLES))
    ood_val_means: tuple[tuple[float, ...], ...] = field(default_factory=lambda: ring(6.0, _OOD_VAL_ANGLES))
    cluster_std: float = 0.5
    n_fg_per_class: int = 200
    n_ood_per_cluster: int = 50
    n_bg: int = 300
    bg_radius: float = 2.0
    bg_exclusion: float = 1.5
    ood_margin: float = 2.0

    def __post_init__(self):
        if len(self.fg_means) < 2:
            raise InputError(f"at least 2 foreground classes required, got {len(self.fg_means)}")
        if len(self.ood_train_means) < 1 or len(self.ood_val_means) < 1:
            raise InputError("at least one OOD cluster per partition required")
        if min(self.n_fg_per_class, self.n_ood_per_cluster, self.n_bg) < 0:
            raise InputError("point counts must be non-negative")
        if self.cluster_std <= 0 or self.bg_radius <= 0 or self.bg_exclusion < 0 or self.ood_margin < 0:
            raise InputError("cluster_std and bg_radius must be positive, bg_exclusion and ood_margin non-negative")
        means = [np.asarray(m, dtype=np.float64) for m in self.all_means]
        if len({m.shape for m in means}) != 1 or means[0].ndim != 1:
            raise InputError("all cluster means must have the same dimension")
        for a, b in combinations(means, 2):
            if np.linalg.norm(a - b) < 1e-9:
                raise InputError(f"coincident cluster means {a.tolist()}")
        for o in self.ood_train_means + self.ood_val_means:
            for f in self.fg_means:
                if math.dist(o, f) < self.ood_margin:
                    raise InputError(f"OOD mean {list(o)} is closer than {self.ood_margin} to FG mean {list(f)}")

    @property
    def all_means(self) -> tuple[tuple[float, ...], ...]:
        return tuple(self.fg_means) + tuple(self.ood_train_means) + tuple(self.ood_val_means)

    @property
    def dim(self) -> int:
        return len(self.fg_means[0])

    @property
    def n_classes(self) -> int:
        return len(self.fg_means)


@dataclass
class PointSet:
    """Points with their generating group and, for foreground, their class.

    Attributes:
        features: `(n, d)` coordinates.
        groups: `(n,)` `Group` codes.
        labels: `(n,)` class ids, -1 for OOD and background points.
    """

    features: np.ndarray
    groups: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return len(self.groups)

    def mask(self, group: Group) -> np.ndarray:
        return self.groups == group

    def count(self, group: Group) -> int:
        return int(np.count_nonzero(self.mask(group)))


@dataclass
class SyntheticDataset:
    """A training and a validation partition drawn from one spec and seed."""

    train: PointSet
    validation: PointSet
    spec: SyntheticSpec
    seed: int


def _sample_background(rng: np.random.Generator, spec: SyntheticSpec, n: int) -> np.ndarray:
    center = np.mean(np.asarray(spec.fg_means, dtype=np.float64), axis=0)
    means = np.asarray(spec.all_means, dtype=np.float64)
    accepted: list[np.ndarray] = []
    n_accepted = 0
    for _ in range(1000):
        if n_accepted >= n:
            break
        direction = rng.normal(size=(n, spec.dim))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        radius = spec.bg_radius * rng.uniform(size=(n, 1)) ** (1.0 / spec.dim)
        candidates = center + direction * radius
        distances = np.linalg.norm(candidates[:, None, :] - means[None, :, :], axis=2)
        kept = candidates[distances.min(axis=1) >= spec.bg_exclusion]
        accepted.append(kept)
        n_accepted += len(kept)
    if n_accepted < n:
        raise InputError("background region is (almost) entirely excluded; lower bg_exclusion or raise bg_radius")
    return np.concatenate(accepted)[:n]


def _sample_partition(
    rng: np.random.Generator,
    spec: SyntheticSpec,
    ood_means: tuple[tuple[float, ...], ...],
) -> PointSet:
    features, groups, labels = [], [], []
    for c, mean in enumerate(spec.fg_means):
        features.append(rng.normal(loc=mean, scale=spec.cluster_std, size=(spec.n_fg_per_class, spec.dim)))
        groups.append(np.full(spec.n_fg_per_class, Group.FG))
        labels.append(np.full(spec.n_fg_per_class, c))
    for mean in ood_means:
        features.append(rng.normal(loc=mean, scale=spec.cluster_std, size=(spec.n_ood_per_cluster, spec.dim)))
        groups.append(np.full(spec.n_ood_per_cluster, Group.OOD))
        labels.append(np.full(spec.n_ood_per_cluster, -1))
    if spec.n_bg > 0:
        features.append(_sample_background(rng, spec, spec.n_bg))
        groups.append(np.full(spec.n_bg, Group.BG))
        labels.append(np.full(spec.n_bg, -1))
    return PointSet(
        features=np.concatenate(features).reshape(-1, spec.dim),
        groups=np.concatenate(groups).astype(np.int64),
        labels=np.concatenate(labels).astype(np.int64),
    )


def generate(seed: int, spec: SyntheticSpec = SyntheticSpec()) -> SyntheticDataset:
    """Draws both partitions; a pure function of `seed` and `spec`."""
    rng = np.random.default_rng(seed)
    train = _sample_partition(rng, spec, spec.ood_train_means)
    validation = _sample_partition(rng, spec, spec.ood_val_means)
    return SyntheticDataset(train=train, validation=validation, spec=spec, seed=seed)
