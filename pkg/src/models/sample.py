"""
sample.py

Core data model for the smartphone HAR features: activity labels,
single samples, labelled partitions and the train/validation/test split.

A Partition keeps its rows as one feature matrix plus aligned label and
subject vectors; `sample(i)` and `samples()` give the per-row view.
"""
from collections.abc import Iterator
from enum import IntEnum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.models.arrays import FloatArray, IntArray

FEATURE_COUNT = 561
SUBJECT_RANGE = (1, 30)


class ActivityLabel(IntEnum):
    """The six activities, coded exactly as in activity_labels.txt"""
    WALKING = 1
    WALKING_UPSTAIRS = 2
    WALKING_DOWNSTAIRS = 3
    SITTING = 4
    STANDING = 5
    LAYING = 6

    @classmethod
    def codes(cls) -> list[int]:
        return [label.value for label in cls]


class Sample(BaseModel):
    """One feature vector with its activity and the subject who produced it"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    features: FloatArray
    label: ActivityLabel
    subject_id: int = Field(0, ge=0, le=SUBJECT_RANGE[1])


class Partition(BaseModel):
    """
    An immutable, labelled set of rows.

    `origin` names the source file pair ("train" or "test") and `row_ids`
    the 0-based line of each row in it, so rows from different partitions
    can be compared for overlap.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    origin: str
    features: FloatArray
    labels: IntArray
    subjects: IntArray
    row_ids: IntArray

    @model_validator(mode='before')
    @classmethod
    def _fill_defaults(cls, data):
        if isinstance(data, dict):
            data = dict(data)
            count = len(data.get('labels', []))
            data.setdefault('subjects', np.zeros(count, dtype=np.int64))
            data.setdefault('row_ids', np.arange(count, dtype=np.int64))
            data.setdefault('origin', data.get('name', 'synthetic'))
        return data

    @model_validator(mode='after')
    def _check_shapes(self):
        if self.features.ndim == 1 and self.features.size == 0:
            object.__setattr__(self, 'features', _empty_matrix())
        if self.features.ndim != 2:
            raise ValueError(f"features must be a matrix, got shape {self.features.shape}")
        rows = self.features.shape[0]
        for field in ('labels', 'subjects', 'row_ids'):
            if getattr(self, field).shape != (rows,):
                raise ValueError(f"{field} must hold {rows} entries, got shape {getattr(self, field).shape}")
        if rows and not np.isin(self.labels, ActivityLabel.codes()).all():
            raise ValueError("labels must be activity codes 1..6")
        return self

    @classmethod
    def from_arrays(cls, features, labels, subjects=None, name: str = 'synthetic') -> 'Partition':
        """Build a partition from plain arrays (subjects default to 0)"""
        data = {'name': name, 'features': features, 'labels': labels}
        if subjects is not None:
            data['subjects'] = subjects
        return cls(**data)

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def dimension(self) -> int:
        return int(self.features.shape[1])

    def sample(self, index: int) -> Sample:
        return Sample(
            features=self.features[index],
            label=ActivityLabel(int(self.labels[index])),
            subject_id=int(self.subjects[index]),
        )

    def samples(self) -> Iterator[Sample]:
        for index in range(len(self)):
            yield self.sample(index)

    def take(self, indices, name: str) -> 'Partition':
        """Sub-partition with the given row positions, keeping provenance"""
        indices = np.asarray(indices, dtype=np.int64)
        return Partition(
            name=name,
            origin=self.origin,
            features=self.features[indices].reshape(len(indices), self.dimension),
            labels=self.labels[indices],
            subjects=self.subjects[indices],
            row_ids=self.row_ids[indices],
        )

    def keys(self) -> set[tuple[str, int]]:
        """(origin, row id) identity of every row"""
        return {(self.origin, int(row)) for row in self.row_ids}


def _empty_matrix() -> np.ndarray:
    matrix = np.zeros((0, 0), dtype=np.float64)
    matrix.setflags(write=False)
    return matrix


class DataSplit(BaseModel):
    """The 70 / 15 / 15 protocol: published train partition, held-out halves"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    train: Partition
    validation: Partition
    test: Partition
    seed: int
    protocol_tag: str = 'uci-har/published-train+stratified-heldout-halves'

    @model_validator(mode='after')
    def _check_disjoint(self):
        parts = [self.train.keys(), self.validation.keys(), self.test.keys()]
        for i in range(3):
            for j in range(i + 1, 3):
                if parts[i] & parts[j]:
                    raise ValueError("train, validation and test must not share rows")
        return self


class PartitionSummary(BaseModel):
    size: int
    histogram: dict[str, int]
    subjects: list[int]


class DatasetSummary(BaseModel):
    """The JSON dataset-summary record"""
    format_version: int = 1
    feature_count: int
    split_seed: int
    protocol_tag: str
    partitions: dict[str, PartitionSummary]
