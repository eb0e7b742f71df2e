"""Bag/instance data model and single-instance (SI) label bookkeeping.

A dataset is a set of bags, each holding ``bag_size`` feature vectors. A bag
is positive iff it contains at least one truly positive instance; positive
bags contain exactly ``positives_per_bag`` of them. Unpacking flattens the
bags and stamps every instance with its bag's label (the SI assignment),
which partitions the instances into three origins:

* ``pos_bag_pos`` -- positive instances from positive bags,
* ``pos_bag_neg`` -- negative instances from positive bags (the ones the SI
  assignment mislabels),
* ``neg_bag``     -- instances from negative bags.

Ground-truth labels ride along for evaluation only; training code receives a
:class:`TrainingView`, which does not carry them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConsistencyError, ValidationError


class Origin(Enum):
    """Which part of the bag structure an instance came from."""

    POS_BAG_POS = "pos_bag_pos"
    POS_BAG_NEG = "pos_bag_neg"
    NEG_BAG = "neg_bag"


#: Deterministic partition order used everywhere (arrays, CSV rows).
ORIGIN_ORDER = (Origin.POS_BAG_POS, Origin.POS_BAG_NEG, Origin.NEG_BAG)
_ORIGIN_CODE = {origin: code for code, origin in enumerate(ORIGIN_ORDER)}


@dataclass(frozen=True)
class MILConfig:
    """Dataset-shape constants: bag size, positives per positive bag,
    negative-to-positive bag ratio, and the number of positive bags."""

    bag_size: int
    positives_per_bag: int
    imbalance: float
    n_pos_bags: int

    def __post_init__(self) -> None:
        if self.bag_size < 1:
            raise ValidationError(f"bag_size must be >= 1, got {self.bag_size}")
        if not 1 <= self.positives_per_bag <= self.bag_size:
            raise ValidationError(
                f"positives_per_bag must be in [1, {self.bag_size}], "
                f"got {self.positives_per_bag}"
            )
        if self.imbalance <= 0:
            raise ValidationError(f"imbalance must be > 0, got {self.imbalance}")
        if self.n_pos_bags < 1:
            raise ValidationError(f"n_pos_bags must be >= 1, got {self.n_pos_bags}")
        n_neg = self.imbalance * self.n_pos_bags
        if abs(n_neg - round(n_neg)) > 1e-9:
            raise ValidationError(
                "imbalance * n_pos_bags must be an integer number of negative "
                f"bags, got {n_neg}"
            )

    @property
    def n_neg_bags(self) -> int:
        return int(round(self.imbalance * self.n_pos_bags))

    @property
    def n_pos_bag_pos(self) -> int:
        return self.positives_per_bag * self.n_pos_bags

    @property
    def n_pos_bag_neg(self) -> int:
        return (self.bag_size - self.positives_per_bag) * self.n_pos_bags

    @property
    def n_neg_bag(self) -> int:
        return self.bag_size * self.n_neg_bags

    @property
    def n_instances(self) -> int:
        return self.bag_size * (self.n_pos_bags + self.n_neg_bags)

    def partition_sizes(self) -> dict[Origin, int]:
        return {
            Origin.POS_BAG_POS: self.n_pos_bag_pos,
            Origin.POS_BAG_NEG: self.n_pos_bag_neg,
            Origin.NEG_BAG: self.n_neg_bag,
        }


@dataclass(frozen=True)
class Instance:
    """One feature vector with its SI label, hidden truth label and origin."""

    features: np.ndarray
    si_label: int
    truth_label: int
    origin: Origin


@dataclass(frozen=True)
class Bag:
    """A fixed-size collection of instances sharing one binary label."""

    instances: tuple[Instance, ...]
    bag_label: int

    def __post_init__(self) -> None:
        if not self.instances:
            raise ValidationError("a bag must contain at least one instance")
        truth = [inst.truth_label for inst in self.instances]
        has_pos = any(t == 1 for t in truth)
        if bool(self.bag_label) != has_pos:
            raise ConsistencyError(
                f"bag_label={self.bag_label} contradicts instance truth labels "
                f"(contains positive: {has_pos})"
            )


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TrainingView:
    """What the learner is allowed to see: features and SI labels only."""

    features: np.ndarray
    si_labels: np.ndarray


class UnpackedDataset:
    """Flat, immutable view of all instances from all bags.

    Rows are ordered by partition: ``pos_bag_pos``, then ``pos_bag_neg``,
    then ``neg_bag``. Partition counts are validated against ``config``.
    """

    def __init__(
        self,
        features: np.ndarray,
        si_labels: np.ndarray,
        truth_labels: np.ndarray,
        origin_codes: np.ndarray,
        config: MILConfig,
    ):
        features = np.ascontiguousarray(features, dtype=np.float64)
        si_labels = np.asarray(si_labels, dtype=np.int8)
        truth_labels = np.asarray(truth_labels, dtype=np.int8)
        origin_codes = np.asarray(origin_codes, dtype=np.int8)
        n = features.shape[0]
        if features.ndim != 2:
            raise ValidationError("features must be a 2-d array")
        if not (len(si_labels) == len(truth_labels) == len(origin_codes) == n):
            raise ValidationError("feature/label/origin lengths disagree")

        sizes = config.partition_sizes()
        bounds = np.cumsum([0] + [sizes[o] for o in ORIGIN_ORDER])
        if bounds[-1] != n:
            raise ConsistencyError(
                f"instance count {n} does not match config total {bounds[-1]}"
            )
        for k, origin in enumerate(ORIGIN_ORDER):
            block = origin_codes[bounds[k] : bounds[k + 1]]
            if not np.all(block == _ORIGIN_CODE[origin]):
                raise ConsistencyError(
                    f"rows {bounds[k]}..{bounds[k+1]} must all have origin "
                    f"{origin.value}"
                )
        expect_si = np.where(origin_codes == _ORIGIN_CODE[Origin.NEG_BAG], 0, 1)
        if not np.array_equal(si_labels, expect_si):
            raise ConsistencyError("si_labels inconsistent with origins")
        expect_truth = np.where(
            origin_codes == _ORIGIN_CODE[Origin.POS_BAG_POS], 1, 0
        )
        if not np.array_equal(truth_labels, expect_truth):
            raise ConsistencyError("truth_labels inconsistent with origins")

        self.features = _readonly(features)
        self.si_labels = _readonly(si_labels)
        self.truth_labels = _readonly(truth_labels)
        self.origin_codes = _readonly(origin_codes)
        self.config = config

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def origins(self) -> list[Origin]:
        return [ORIGIN_ORDER[c] for c in self.origin_codes]

    def origin_mask(self, origin: Origin) -> np.ndarray:
        return self.origin_codes == _ORIGIN_CODE[origin]

    def instances(self) -> Iterator[Instance]:
        for i in range(len(self)):
            yield Instance(
                features=self.features[i],
                si_label=int(self.si_labels[i]),
                truth_label=int(self.truth_labels[i]),
                origin=ORIGIN_ORDER[self.origin_codes[i]],
            )

    def training_view(self) -> TrainingView:
        """Truth-free view handed to training code."""
        return TrainingView(features=self.features, si_labels=self.si_labels)

    def to_csv(self, path: str | Path) -> None:
        """Write one row per instance: ``x0,..,xd-1,si_label,truth_label,origin``."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                [f"x{j}" for j in range(self.dim)]
                + ["si_label", "truth_label", "origin"]
            )
            for i in range(len(self)):
                writer.writerow(
                    [repr(float(v)) for v in self.features[i]]
                    + [
                        int(self.si_labels[i]),
                        int(self.truth_labels[i]),
                        ORIGIN_ORDER[self.origin_codes[i]].value,
                    ]
                )

    @classmethod
    def from_csv(cls, path: str | Path, config: MILConfig) -> "UnpackedDataset":
        path = Path(path)
        features, si, truth, codes = [], [], [], []
        value_to_origin = {o.value: _ORIGIN_CODE[o] for o in Origin}
        with path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            d = len(header) - 3
            for row in reader:
                features.append([float(v) for v in row[:d]])
                si.append(int(row[d]))
                truth.append(int(row[d + 1]))
                codes.append(value_to_origin[row[d + 2]])
        return cls(
            np.asarray(features, dtype=np.float64),
            np.asarray(si, dtype=np.int8),
            np.asarray(truth, dtype=np.int8),
            np.asarray(codes, dtype=np.int8),
            config,
        )


def unpack(bags: Sequence[Bag]) -> UnpackedDataset:
    """Flatten bags into an :class:`UnpackedDataset` with SI labels.

    The config (bag size, positives per bag, imbalance, positive-bag count)
    is derived from the bags themselves and validated: bags must share one
    size, and every positive bag must contain the same number of positives.
    """
    if not bags:
        raise ValidationError("cannot unpack an empty bag collection")
    sizes = {len(b.instances) for b in bags}
    if len(sizes) != 1:
        raise ValidationError(f"bags must all have the same size, got {sorted(sizes)}")
    bag_size = sizes.pop()

    pos_bags = [b for b in bags if b.bag_label == 1]
    neg_bags = [b for b in bags if b.bag_label != 1]
    if not pos_bags:
        raise ValidationError("at least one positive bag is required")
    pos_counts = {
        sum(inst.truth_label for inst in b.instances) for b in pos_bags
    }
    if len(pos_counts) != 1:
        raise ValidationError(
            f"positive bags must share one positive count, got {sorted(pos_counts)}"
        )
    config = MILConfig(
        bag_size=bag_size,
        positives_per_bag=pos_counts.pop(),
        imbalance=len(neg_bags) / len(pos_bags),
        n_pos_bags=len(pos_bags),
    )

    blocks: dict[Origin, list[np.ndarray]] = {o: [] for o in ORIGIN_ORDER}
    for bag in pos_bags:
        for inst in bag.instances:
            origin = Origin.POS_BAG_POS if inst.truth_label else Origin.POS_BAG_NEG
            blocks[origin].append(np.asarray(inst.features, dtype=np.float64))
    for bag in neg_bags:
        for inst in bag.instances:
            if inst.truth_label:
                raise ConsistencyError("negative bag contains a positive instance")
            blocks[Origin.NEG_BAG].append(np.asarray(inst.features, dtype=np.float64))

    features = np.vstack([np.stack(blocks[o]) for o in ORIGIN_ORDER if blocks[o]])
    codes = np.concatenate(
        [np.full(len(blocks[o]), _ORIGIN_CODE[o], dtype=np.int8) for o in ORIGIN_ORDER]
    )
    si = np.where(codes == _ORIGIN_CODE[Origin.NEG_BAG], 0, 1).astype(np.int8)
    truth = (codes == _ORIGIN_CODE[Origin.POS_BAG_POS]).astype(np.int8)
    return UnpackedDataset(features, si, truth, codes, config)


def balance(dataset: UnpackedDataset) -> float:
    """Negative-to-positive bag ratio of the dataset."""
    cfg = dataset.config
    n_pos = int(dataset.origin_mask(Origin.POS_BAG_POS).sum()) // cfg.positives_per_bag
    n_neg = int(dataset.origin_mask(Origin.NEG_BAG).sum()) // cfg.bag_size
    if n_pos == 0:
        raise ValidationError("balance undefined: no positive bags")
    return n_neg / n_pos
