"""
config.py

This file manages the application configuration settings.
It provides a centralized place for the environment-driven settings
(dataset location, download URL, output folder, log level) and the
loader for plain-text key=value experiment files.

Precedence for experiment settings, lowest first:
environment variable < key=value file < command-line flags.
"""
import logging
import os
import sys
from pathlib import Path

from src.errors import ConfigurationError

# Output configuration defaults
#
# Results land next to where the harness is started unless
# HAR_OUTPUT_DIR says otherwise.
DEFAULT_OUTPUT_FOLDER = Path('results')
DEFAULT_LOG_LEVEL = 'INFO'

LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'


class DatasetConfig:
    """
    Dataset configuration class

    Reads the dataset root and the archive URL from the environment.
    No URL is built into the code: fetching needs HAR_DATASET_URL or an
    explicit --url.
    """
    def __init__(self):
        root = os.getenv('HAR_DATASET_ROOT')
        self.root = Path(root) if root else None
        self.url = os.getenv('HAR_DATASET_URL')


class OutputConfig:
    """Where run artifacts are written"""
    def __init__(self):
        self.folder = Path(os.getenv('HAR_OUTPUT_DIR', str(DEFAULT_OUTPUT_FOLDER)))


class LoggingConfig:
    def __init__(self):
        self.level = os.getenv('HAR_LOG_LEVEL', DEFAULT_LOG_LEVEL).upper()


class Config:
    """Application configuration object"""
    def __init__(self):
        self.dataset = DatasetConfig()
        self.output = OutputConfig()
        self.logging = LoggingConfig()


# Create a singleton config instance
config = Config()


def ensure_output_folder(folder: Path) -> Path:
    """
    Ensure the output folder exists

    Args:
        folder: Directory that will receive run artifacts

    Returns:
        The same folder, created if necessary
    """
    folder.mkdir(parents=True, exist_ok=True)
    return folder


def configure_logging(level: str | None = None) -> None:
    """
    Install a single stderr handler on the root logger.

    stdout stays free for command output and the MCP stdio transport.
    """
    resolved = (level or config.logging.level).upper()
    if not isinstance(logging.getLevelName(resolved), int):
        raise ConfigurationError(f"unknown log level {resolved!r}")
    root = logging.getLogger()
    for handler in list(root.handlers):
        root.removeHandler(handler)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root.addHandler(handler)
    root.setLevel(resolved)


def load_key_value_file(path: Path, allowed_keys: set[str] | None = None) -> dict[str, str]:
    """
    Parse a plain-text experiment file.

    One `key = value` pair per line; blank lines and lines starting with
    `#` are ignored. Keys are normalized to snake_case (dashes become
    underscores). Later duplicates win.

    Args:
        path: File to read
        allowed_keys: When given, any other key is rejected

    Returns:
        Mapping of raw string values, validated later by ExperimentConfig

    Raises:
        ConfigurationError: the file is missing, a line has no `=`, or a key
            is not in allowed_keys
    """
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    values: dict[str, str] = {}
    for line_number, raw_line in enumerate(path.read_text(encoding='utf-8').splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith('#'):
            continue
        key, separator, value = line.partition('=')
        if not separator or not key.strip():
            raise ConfigurationError(f"{path.name}:{line_number}: expected key=value, got {raw_line!r}")
        name = key.strip().replace('-', '_')
        if allowed_keys is not None and name not in allowed_keys:
            raise ConfigurationError(f"{path.name}:{line_number}: unknown key {name!r}")
        values[name] = value.strip()
    return values
