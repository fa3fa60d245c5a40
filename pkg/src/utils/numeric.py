"""
numeric.py

Deterministic numeric primitives shared by every classifier: inner
products, Euclidean distance, kernel evaluation, Gram matrices and the
seeded pseudo-random generator used for splitting, initialization and
epoch ordering.

All arithmetic is float64. Every function here is pure; a SeededRng
belongs to one caller at a time.
"""
from collections.abc import Sequence
from typing import Any, TypeVar

import numpy as np

from src.errors import ConfigurationError, DimensionError
from src.models.kernel import Kernel, KernelKind

T = TypeVar('T')

_UINT64_LIMIT = 2 ** 64
_DOUBLE_SCALE = 2.0 ** -53


def as_vector(x: Any) -> np.ndarray:
    return np.asarray(x, dtype=np.float64)


def _pair(x: Any, y: Any) -> tuple[np.ndarray, np.ndarray]:
    x, y = as_vector(x), as_vector(y)
    if x.shape != y.shape:
        raise DimensionError(f"length mismatch: {x.shape} vs {y.shape}")
    return x, y


def dot(x, y) -> float:
    """Inner product of two equal-length vectors"""
    x, y = _pair(x, y)
    return float(np.dot(x, y))


def euclidean_distance(x, y) -> float:
    """Euclidean distance; symmetric because (x - y)^2 == (y - x)^2 exactly"""
    x, y = _pair(x, y)
    diff = x - y
    return float(np.sqrt(np.dot(diff, diff)))


def row_distances(matrix: np.ndarray, x: np.ndarray) -> np.ndarray:
    """
    Euclidean distance from x to every row of matrix.

    Each row is reduced independently, so a row's distance does not
    depend on where it sits in the matrix.
    """
    if matrix.ndim != 2 or x.shape != (matrix.shape[1],):
        raise DimensionError(f"query of shape {x.shape} against rows of width {matrix.shape[-1]}")
    diff = matrix - x
    return np.sqrt(np.einsum('ij,ij->i', diff, diff))


def apply_kernel(kernel: Kernel, inner: np.ndarray | float) -> np.ndarray | float:
    """Map inner products to kernel values (scalar or array)"""
    if kernel.kind is KernelKind.LINEAR:
        return inner
    if kernel.kind is KernelKind.POLYNOMIAL:
        return (kernel.gamma * inner + kernel.coef0) ** kernel.degree
    return np.tanh(kernel.gamma * inner + kernel.coef0)


def kernel_eval(kernel: Kernel, x, y) -> float:
    """Kernel value k(x, y)"""
    return float(apply_kernel(kernel, dot(x, y)))


def kernel_matrix(kernel: Kernel, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """
    Cross kernel matrix K[i, j] = k(left_i, right_j).

    Args:
        kernel: Kernel specification
        left: (n, d) matrix
        right: (m, d) matrix

    Returns:
        (n, m) matrix
    """
    left = np.atleast_2d(as_vector(left))
    right = np.atleast_2d(as_vector(right))
    if left.shape[1] != right.shape[1]:
        raise DimensionError(f"width mismatch: {left.shape[1]} vs {right.shape[1]}")
    return np.asarray(apply_kernel(kernel, left @ right.T))


def gram_matrix(kernel: Kernel, xs: Sequence) -> np.ndarray:
    """
    Square Gram matrix over xs, exactly symmetric.

    The upper triangle is computed and mirrored, so G[i, j] and G[j, i]
    are the same float.
    """
    if len(xs) == 0:
        return np.zeros((0, 0), dtype=np.float64)
    rows = [as_vector(x) for x in xs]
    width = rows[0].shape
    if any(row.shape != width for row in rows):
        raise DimensionError("all vectors of a Gram matrix must share a length")
    matrix = kernel_matrix(kernel, np.vstack(rows), np.vstack(rows))
    upper = np.triu(matrix)
    return upper + np.triu(upper, 1).T


class SeededRng:
    """
    Reproducible random stream.

    Algorithm: PCG64 (128-bit LCG state, XSL-RR 64-bit output) seeded
    through numpy's SeedSequence; both are specified bit-for-bit and
    stable across platforms and numpy releases. Only the raw 64-bit
    outputs are consumed, and every derived quantity is computed here:

    - uniform doubles: (u64 >> 11) * 2**-53, in [0, 1)
    - permutations: stable argsort of n raw draws
    - bounded integers: floor(uniform * bound)
    """
    ALGORITHM = 'pcg64'

    def __init__(self, seed: int):
        if not 0 <= seed < _UINT64_LIMIT:
            raise ConfigurationError(f"seed must be a 64-bit unsigned integer, got {seed}")
        self.seed = int(seed)
        self._bits = np.random.PCG64(self.seed)

    def raw(self, size: int) -> np.ndarray:
        """size raw 64-bit outputs"""
        return np.asarray(self._bits.random_raw(size), dtype=np.uint64).reshape(size)

    def uniform(self, low: float = 0.0, high: float = 1.0, size: int | tuple[int, ...] = ()) -> np.ndarray | float:
        shape = (size,) if isinstance(size, int) else tuple(size)
        count = int(np.prod(shape)) if shape else 1
        unit = (self.raw(count) >> np.uint64(11)).astype(np.float64) * _DOUBLE_SCALE
        values = low + (high - low) * unit
        if not shape:
            return float(values[0])
        return values.reshape(shape)

    def below(self, bound: int) -> int:
        """Integer in [0, bound)"""
        if bound <= 0:
            raise ConfigurationError(f"bound must be positive, got {bound}")
        return min(int(self.uniform() * bound), bound - 1)

    def permutation(self, n: int) -> np.ndarray:
        if n == 0:
            return np.zeros(0, dtype=np.int64)
        return np.argsort(self.raw(n), kind='stable').astype(np.int64)


def shuffle(rng: SeededRng, indices: Sequence[T]) -> list[T]:
    """A seeded permutation of indices (the input is not modified)"""
    order = rng.permutation(len(indices))
    return [indices[int(i)] for i in order]
