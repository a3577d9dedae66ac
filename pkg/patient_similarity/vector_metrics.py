"""
Vector Distance Metrics

Euclidean, Minkowski, Manhattan and Hamming distances between equal-length
frequency-table rows. The per-pair functions wrap scipy.spatial.distance;
pairwise_vector_matrix is the vectorised all-pairs path used for whole
datasets and agrees with them to floating point precision.
"""

from typing import Sequence, Tuple
import logging

import numpy as np
import scipy.spatial.distance
from scipy.spatial.distance import pdist, squareform

from .errors import DimensionError, ParameterError

logger = logging.getLogger(__name__)

VECTOR_METRICS = ('euclidean', 'minkowski', 'manhattan', 'hamming')


def _as_pair(x: Sequence, y: Sequence) -> Tuple[np.ndarray, np.ndarray]:
    a = np.asarray(x, dtype=float)
    b = np.asarray(y, dtype=float)
    if a.ndim != 1 or b.ndim != 1:
        raise DimensionError("feature vectors must be one-dimensional")
    if a.shape[0] == 0 or a.shape != b.shape:
        raise DimensionError(f"cannot compare vectors of length {a.shape[0]} and {b.shape[0]}")
    return a, b


def _check_minkowski_p(p: float):
    if p is None or not np.isfinite(p) or p < 1:
        raise ParameterError(f"Minkowski exponent must be >= 1, got {p!r}")


def euclidean(x: Sequence, y: Sequence) -> float:
    a, b = _as_pair(x, y)
    return float(scipy.spatial.distance.euclidean(a, b))


def minkowski(x: Sequence, y: Sequence, p: float = 3) -> float:
    _check_minkowski_p(p)
    a, b = _as_pair(x, y)
    return float(scipy.spatial.distance.minkowski(a, b, p))


def manhattan(x: Sequence, y: Sequence) -> float:
    a, b = _as_pair(x, y)
    return float(scipy.spatial.distance.cityblock(a, b))


def hamming(x: Sequence, y: Sequence) -> int:
    """
    Number of positions holding different symbols.

    Works on strings as well as numeric rows: each character or cell is a
    symbol compared by equality.
    """
    a = list(x) if isinstance(x, str) else x
    b = list(y) if isinstance(y, str) else y
    a, b = np.asarray(a), np.asarray(b)
    if a.ndim != 1 or b.ndim != 1 or a.shape != b.shape:
        raise DimensionError(f"cannot compare sequences of length {len(a)} and {len(b)}")
    return int(np.count_nonzero(a != b))


# ========================================
# All pairs
# ========================================

def pairwise_vector_matrix(rows: np.ndarray, metric: str, p: float = 3) -> np.ndarray:
    """
    Full symmetric n x n distance matrix over the rows of a feature table.

    Args:
        rows: (n, d) array of feature vectors
        metric: one of VECTOR_METRICS
        p: Minkowski exponent (ignored by the other metrics)

    Returns:
        np.ndarray: float matrix with an exact zero diagonal
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2 or rows.shape[1] == 0:
        raise DimensionError("feature table must be a non-empty 2-D array")
    n, width = rows.shape
    if n < 2:
        return np.zeros((n, n))

    if metric == 'euclidean':
        condensed = pdist(rows, 'euclidean')
    elif metric == 'minkowski':
        _check_minkowski_p(p)
        condensed = pdist(rows, 'minkowski', p=p)
    elif metric == 'manhattan':
        condensed = pdist(rows, 'cityblock')
    elif metric == 'hamming':
        # pdist reports the mismatching fraction
        condensed = np.rint(pdist(rows, 'hamming') * width)
    else:
        raise ParameterError(f"unknown vector metric: {metric}")

    logger.debug(f"Computed {condensed.shape[0]} {metric} distances over {width} columns")
    return squareform(condensed)
