"""
Shared fixtures: seeded generators, small labelled partitions and a
synthetic dataset directory in the UCI HAR layout (561 features, six
activities, values inside [-1, 1]).
"""
import logging
from pathlib import Path

import numpy as np
import pytest

from src.models.sample import FEATURE_COUNT, ActivityLabel, DataSplit, Partition
from src.services.dataset_service import dataset_service


def make_blobs(per_class: int, dimension: int, seed: int, spread: float = 0.15,
               classes: tuple[int, ...] = tuple(ActivityLabel.codes()), name: str = 'synthetic') -> Partition:
    """Well separated Gaussian clusters, one per class, clipped to [-1, 1]"""
    rng = np.random.default_rng(seed)
    centers = np.random.default_rng(1000 + dimension).uniform(-0.6, 0.6, size=(max(classes) + 1, dimension))
    features, labels = [], []
    for code in classes:
        features.append(centers[code] + spread * rng.standard_normal((per_class, dimension)))
        labels.extend([code] * per_class)
    features = np.clip(np.vstack(features), -1.0, 1.0)
    subjects = (np.arange(len(labels)) % 30) + 1
    return Partition.from_arrays(features, labels, subjects=subjects, name=name)


def write_synthetic_dataset(root: Path, train_per_class: int = 10, heldout_per_class: int = 8,
                            seed: int = 7) -> Path:
    """Write a complete dataset directory and return its root"""
    dataset_service.write_listings(root)
    train = make_blobs(train_per_class, FEATURE_COUNT, seed, name='train')
    heldout = make_blobs(heldout_per_class, FEATURE_COUNT, seed + 1, name='test')
    dataset_service.write_partition(train, root, 'train')
    dataset_service.write_partition(heldout, root, 'test')
    return root


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = list(root.handlers), root.level
    yield
    for handler in list(root.handlers):
        if handler not in handlers:
            root.removeHandler(handler)
    root.setLevel(level)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240601)


@pytest.fixture
def synthetic_root(tmp_path: Path) -> Path:
    return write_synthetic_dataset(tmp_path / 'UCI HAR Dataset')


@pytest.fixture
def small_split() -> DataSplit:
    """Eight-dimensional six-class split, small enough for every model"""
    train = make_blobs(12, 8, seed=1, name='train')
    heldout = make_blobs(10, 8, seed=2, name='heldout')
    heldout = Partition(name='heldout', origin='test', features=heldout.features, labels=heldout.labels,
                        subjects=heldout.subjects, row_ids=heldout.row_ids)
    validation, test = dataset_service.split_heldout(heldout, seed=42)
    return DataSplit(train=train, validation=validation, test=test, seed=42)
