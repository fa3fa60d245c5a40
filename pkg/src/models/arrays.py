"""
arrays.py

Annotated numpy types for pydantic models.

Arrays are copied to the declared dtype on validation, frozen
(write flag off) and serialized to nested lists in JSON mode, so a
model_dump_json / model_validate_json round trip restores the same values.
"""
from typing import Annotated, Any

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def _frozen(value: Any, dtype: type) -> np.ndarray:
    array = np.array(value, dtype=dtype)
    array.setflags(write=False)
    return array


def _float_array(value: Any) -> np.ndarray:
    return _frozen(value, np.float64)


def _int_array(value: Any) -> np.ndarray:
    return _frozen(value, np.int64)


def _to_list(array: np.ndarray) -> list:
    return array.tolist()


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_float_array),
    PlainSerializer(_to_list, return_type=list, when_used='json'),
]

IntArray = Annotated[
    np.ndarray,
    BeforeValidator(_int_array),
    PlainSerializer(_to_list, return_type=list, when_used='json'),
]
