"""
files.py

Atomic file output and JSON model persistence. Every emitted file is
written to a temporary sibling and renamed into place, so readers
never see a partial file.
"""
import os
import tempfile
from pathlib import Path
from typing import TypeVar

from pydantic import BaseModel, ValidationError

from src.errors import ConfigurationError

M = TypeVar('M', bound=BaseModel)


def atomic_write_text(path: Path, text: str) -> Path:
    """Write text to path atomically (UTF-8, "\\n" line endings kept as given)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    descriptor, temp_name = tempfile.mkstemp(prefix=f'.{path.name}.', suffix='.tmp', dir=path.parent)
    try:
        with os.fdopen(descriptor, 'w', encoding='utf-8', newline='') as handle:
            handle.write(text)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise
    return path


def write_model(model: BaseModel, path: Path) -> Path:
    """Serialize a pydantic model as indented JSON, atomically"""
    return atomic_write_text(path, model.model_dump_json(indent=2) + '\n')


def read_model(model_type: type[M], path: Path, format_version: int | None = None) -> M:
    """
    Parse a JSON document written by write_model.

    Raises:
        ConfigurationError: the file is missing, malformed, or carries a
            different format_version
    """
    path = Path(path)
    try:
        model = model_type.model_validate_json(path.read_text(encoding='utf-8'))
    except FileNotFoundError as error:
        raise ConfigurationError(f"{path} does not exist") from error
    except ValidationError as error:
        raise ConfigurationError(f"{path} is not a valid {model_type.__name__} document: {error}") from error
    found = getattr(model, 'format_version', None)
    if format_version is not None and found != format_version:
        raise ConfigurationError(f"{path}: format_version {found} is not supported (expected {format_version})")
    return model
