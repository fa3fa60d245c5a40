"""
dataset_service.py

Acquire, parse, validate and split the UCI smartphone HAR dataset.

Published layout under the dataset root:

    activity_labels.txt        "<code> <NAME>" per line
    features.txt               "<index> <feature name>" per line (561 lines)
    train/X_train.txt          561 whitespace-separated numbers per line
    train/y_train.txt          one activity code (1..6) per line
    train/subject_train.txt    one subject id (1..30) per line
    test/...                   same files with the _test suffix

Only the engineered features are read; the "Inertial Signals" windows
are never touched. The published train partition is treated as the 70 %
training set and the published test partition as the 30 % held-out set,
which is then halved (stratified by class) into validation and test.
"""
import logging
import tempfile
import zipfile
from collections.abc import Iterable
from pathlib import Path
from urllib.request import urlretrieve

import numpy as np

from src.errors import (
    AcquisitionError,
    ConfigurationError,
    DataValidationError,
    IntegrityError,
)
from src.models.sample import (
    FEATURE_COUNT,
    SUBJECT_RANGE,
    ActivityLabel,
    DatasetSummary,
    DataSplit,
    Partition,
    PartitionSummary,
    Sample,
)
from src.utils.files import atomic_write_text
from src.utils.numeric import SeededRng

logger = logging.getLogger(__name__)

FEATURE_RANGE_SLACK = 1e-6
ARCHIVE_FOLDER = 'UCI HAR Dataset'


class DatasetService:
    """
    DatasetService Class

    Loading is single-threaded; the partitions it returns are frozen and
    can be shared by any number of consumers.
    """

    def resolve_root(self, root: Path) -> Path:
        """
        Locate the dataset inside root.

        Accepts either the dataset folder itself or the folder the public
        archive was unzipped into (which holds "UCI HAR Dataset/").
        """
        root = Path(root)
        if (root / 'activity_labels.txt').is_file():
            return root
        nested = root / ARCHIVE_FOLDER
        if (nested / 'activity_labels.txt').is_file():
            return nested
        raise AcquisitionError(f"missing file: {root / 'activity_labels.txt'}")

    def load_uci_har(self, root: Path) -> tuple[Partition, Partition]:
        """
        Load the published train partition and the held-out partition.

        Args:
            root: Dataset directory (see module docstring)

        Returns:
            (train partition, held-out partition)

        Raises:
            AcquisitionError: a required file is missing
            IntegrityError: row counts or listings disagree
            DataValidationError: a value is malformed or out of range
        """
        root = self.resolve_root(root)
        self._check_activity_labels(root / 'activity_labels.txt')
        self._check_feature_names(root / 'features.txt')
        train = self.load_partition(root, 'train')
        heldout = self.load_partition(root, 'test', name='heldout')
        if len(train) == 0 or len(heldout) == 0:
            raise IntegrityError("both partitions must be nonempty")
        logger.info("Loaded UCI HAR from %s: %d train rows, %d held-out rows", root, len(train), len(heldout))
        return train, heldout

    def load_partition(self, root: Path, partition: str, name: str | None = None) -> Partition:
        """Parse X_/y_/subject_ files of one published partition"""
        folder = Path(root) / partition
        features_path = folder / f'X_{partition}.txt'
        labels_path = folder / f'y_{partition}.txt'
        subjects_path = folder / f'subject_{partition}.txt'

        features = self._read_feature_matrix(features_path)
        labels = self._read_integer_column(labels_path, 1, 6, 'label')
        subjects = self._read_integer_column(subjects_path, *SUBJECT_RANGE, 'subject')

        counts = {features_path.name: features.shape[0], labels_path.name: len(labels),
                  subjects_path.name: len(subjects)}
        if len(set(counts.values())) != 1:
            raise IntegrityError(f"row counts disagree in {folder}: {counts}")

        return Partition(
            name=name or partition,
            origin=partition,
            features=features,
            labels=labels,
            subjects=subjects,
            row_ids=np.arange(len(labels)),
        )

    def split_heldout(self, heldout: Partition, seed: int) -> tuple[Partition, Partition]:
        """
        Halve the held-out partition into validation and test, stratified.

        Each class is shuffled with the seeded generator and cut in two;
        odd-sized classes alternate which half receives the extra row, so
        per-class counts differ by at most one and the halves' sizes differ
        by at most one. Row order inside each half follows the input order.

        Args:
            heldout: Partition to split
            seed: Split seed (recorded in every report)

        Returns:
            (validation, test)
        """
        if len(heldout) == 0:
            raise ConfigurationError("cannot split an empty held-out partition")
        rng = SeededRng(seed)
        validation_rows: list[int] = []
        test_rows: list[int] = []
        extra_to_validation = True
        for label in ActivityLabel:
            members = np.flatnonzero(heldout.labels == label.value)
            if members.size == 0:
                continue
            shuffled = members[rng.permutation(members.size)]
            half = members.size // 2
            if members.size % 2:
                if extra_to_validation:
                    half += 1
                extra_to_validation = not extra_to_validation
            validation_rows.extend(shuffled[:half].tolist())
            test_rows.extend(shuffled[half:].tolist())
        return (
            heldout.take(sorted(validation_rows), name='validation'),
            heldout.take(sorted(test_rows), name='test'),
        )

    def build_split(self, root: Path, seed: int) -> DataSplit:
        train, heldout = self.load_uci_har(root)
        validation, test = self.split_heldout(heldout, seed)
        return DataSplit(train=train, validation=validation, test=test, seed=seed)

    def class_histogram(self, samples: Partition | Iterable[Sample | int]) -> dict[ActivityLabel, int]:
        """Count rows per activity (samples or bare labels); absent labels count zero"""
        histogram = {label: 0 for label in ActivityLabel}
        if isinstance(samples, Partition):
            codes, counts = np.unique(samples.labels, return_counts=True)
            for code, count in zip(codes.tolist(), counts.tolist()):
                histogram[ActivityLabel(code)] = count
            return histogram
        for sample in samples:
            histogram[ActivityLabel(getattr(sample, 'label', sample))] += 1
        return histogram

    def summarize(self, split: DataSplit, heldout: Partition | None = None) -> DatasetSummary:
        """Dataset-summary record: sizes, histograms, subjects, seed"""
        parts = {'train': split.train, 'validation': split.validation, 'test': split.test}
        if heldout is not None:
            parts['heldout'] = heldout
        return DatasetSummary(
            feature_count=split.train.dimension,
            split_seed=split.seed,
            protocol_tag=split.protocol_tag,
            partitions={
                name: PartitionSummary(
                    size=len(part),
                    histogram={label.name: count for label, count in self.class_histogram(part).items()},
                    subjects=sorted(set(part.subjects.tolist())),
                )
                for name, part in parts.items()
            },
        )

    def write_partition(self, partition: Partition, root: Path, suffix: str) -> None:
        """
        Write a partition in the dataset's own text format.

        Values use 17 significant digits in scientific notation, so
        re-parsing restores every float exactly.
        """
        folder = Path(root) / suffix
        folder.mkdir(parents=True, exist_ok=True)
        lines = [' '.join(f'{value:.16e}' for value in row) for row in partition.features.tolist()]
        atomic_write_text(folder / f'X_{suffix}.txt', _join_lines(lines))
        atomic_write_text(folder / f'y_{suffix}.txt', _join_lines(str(code) for code in partition.labels.tolist()))
        atomic_write_text(folder / f'subject_{suffix}.txt', _join_lines(str(s) for s in partition.subjects.tolist()))

    def write_listings(self, root: Path, feature_names: list[str] | None = None) -> None:
        """Write activity_labels.txt and features.txt"""
        root = Path(root)
        root.mkdir(parents=True, exist_ok=True)
        atomic_write_text(root / 'activity_labels.txt',
                          _join_lines(f'{label.value} {label.name}' for label in ActivityLabel))
        names = feature_names or [f'feature-{index}' for index in range(1, FEATURE_COUNT + 1)]
        atomic_write_text(root / 'features.txt',
                          _join_lines(f'{index} {name}' for index, name in enumerate(names, start=1)))

    def fetch(self, url: str | None, destination: Path, force: bool = False) -> Path:
        """
        Download and unzip the public archive into destination.

        Skipped when the dataset is already there, unless force is set.

        Returns:
            The resolved dataset root
        """
        destination = Path(destination)
        if not force:
            try:
                return self.resolve_root(destination)
            except AcquisitionError:
                pass
        if not url:
            raise ConfigurationError("no dataset URL configured (set HAR_DATASET_URL or pass --url)")
        destination.mkdir(parents=True, exist_ok=True)
        logger.info("Downloading dataset from %s to %s", url, destination)
        with tempfile.TemporaryDirectory() as tempdir:
            archive_path = Path(tempdir) / 'archive.zip'
            try:
                urlretrieve(url, archive_path)
            except OSError as error:
                raise AcquisitionError(f"download failed: {url}: {error}") from error
            with zipfile.ZipFile(archive_path, 'r') as archive:
                archive.extractall(destination)
        return self.resolve_root(destination)

    def _read_lines(self, path: Path) -> list[str]:
        if not path.is_file():
            raise AcquisitionError(f"missing file: {path}")
        lines = path.read_text(encoding='utf-8').splitlines()
        while lines and not lines[-1].strip():
            lines.pop()
        return lines

    def _read_feature_matrix(self, path: Path) -> np.ndarray:
        lines = self._read_lines(path)
        matrix = np.empty((len(lines), FEATURE_COUNT), dtype=np.float64)
        for line_number, line in enumerate(lines, start=1):
            tokens = line.split()
            if len(tokens) != FEATURE_COUNT:
                raise DataValidationError(
                    f"{path.name}: expected {FEATURE_COUNT} features, found {len(tokens)}", line_number)
            try:
                matrix[line_number - 1] = np.asarray(tokens, dtype=np.float64)
            except ValueError as error:
                raise DataValidationError(f"{path.name}: not a number ({error})", line_number) from error

        bound = 1.0 + FEATURE_RANGE_SLACK
        bad_rows = np.flatnonzero(~(np.isfinite(matrix) & (np.abs(matrix) <= bound)).all(axis=1))
        if bad_rows.size:
            raise DataValidationError(
                f"{path.name}: feature out of range [-{bound}, {bound}]", int(bad_rows[0]) + 1)
        return matrix

    def _read_integer_column(self, path: Path, low: int, high: int, what: str) -> np.ndarray:
        values = []
        for line_number, line in enumerate(self._read_lines(path), start=1):
            try:
                value = int(line.strip())
            except ValueError as error:
                raise DataValidationError(f"{path.name}: {what} is not an integer: {line!r}", line_number) from error
            if not low <= value <= high:
                raise DataValidationError(f"{what} out of range {low}..{high}: {value}", line_number)
            values.append(value)
        return np.asarray(values, dtype=np.int64)

    def _check_activity_labels(self, path: Path) -> None:
        listed = {}
        for line in self._read_lines(path):
            code, _, label_name = line.strip().partition(' ')
            if not code.isdigit():
                raise IntegrityError(f"{path.name}: malformed line {line!r}")
            listed[int(code)] = label_name.strip()
        expected = {label.value: label.name for label in ActivityLabel}
        if listed != expected:
            raise IntegrityError(f"{path.name} does not list the six activities: {listed}")

    def _check_feature_names(self, path: Path) -> None:
        count = len(self._read_lines(path))
        if count != FEATURE_COUNT:
            raise IntegrityError(f"{path.name} lists {count} features, expected {FEATURE_COUNT}")


def _join_lines(lines: Iterable[str]) -> str:
    return ''.join(f'{line}\n' for line in lines)


# Create a singleton instance that will be used throughout the application
dataset_service = DatasetService()
