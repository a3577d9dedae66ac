"""
Distance Matrices

All-pairs distances between patients for any of the six metrics, their
normalisation into [0, 1], and the reports built on top of them: the
smallest-distance pairs, the cross-metric comparison table and the shared
events of a pair.

Usage:
    from patient_similarity.distance_matrix import MetricSpec, distance_matrices, smallest_pairs

    raw, normalized = distance_matrices(dataset, MetricSpec('pqgram', p=1, q=3), mode='native')
    smallest_pairs(normalized, limit=16)
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple
import heapq
import logging

import numpy as np
import pandas as pd

from .edit_distance import ted
from .errors import ParameterError, UnknownPatientError
from .ingestion import PatientDataset, build_frequency_table, build_tree
from .pqgram import PQParams, PQGramProfile, pqgram_profile, profile_distance, profile_distance_norm
from .tree_model import tree_size
from .vector_metrics import VECTOR_METRICS, pairwise_vector_matrix

logger = logging.getLogger(__name__)

TREE_METRICS = ('ted', 'pqgram')
METRIC_NAMES = VECTOR_METRICS + TREE_METRICS
NORMALIZATION_MODES = ('native', 'minmax', 'none')

DEFAULT_MINKOWSKI_P = 3
DEFAULT_PQ = (1, 3)

_COLUMN_NAMES = {
    'euclidean': 'Euclidean',
    'minkowski': 'Minkowski',
    'manhattan': 'Manhattan',
    'hamming': 'Hamming',
    'ted': 'Edit Distance',
}


# ========================================
# Metric selection
# ========================================

@dataclass(frozen=True)
class MetricSpec:
    """
    One of the six metrics with its parameters.

    p is the Minkowski exponent or the pq-gram stem length; q is the
    pq-gram base length. Unused parameters are dropped.
    """
    name: str
    p: Optional[float] = None
    q: Optional[int] = None

    def __post_init__(self):
        name = str(self.name).strip().lower()
        if name not in METRIC_NAMES:
            raise ParameterError(f"unknown metric {self.name!r}; choose from {', '.join(METRIC_NAMES)}")
        object.__setattr__(self, 'name', name)

        if name == 'minkowski':
            p = DEFAULT_MINKOWSKI_P if self.p is None else self.p
            if not np.isfinite(p) or p < 1:
                raise ParameterError(f"Minkowski exponent must be >= 1, got {p!r}")
            object.__setattr__(self, 'p', p)
            object.__setattr__(self, 'q', None)
        elif name == 'pqgram':
            p = DEFAULT_PQ[0] if self.p is None else self.p
            q = DEFAULT_PQ[1] if self.q is None else self.q
            if isinstance(p, float) and p.is_integer():
                p = int(p)
            if isinstance(q, float) and q.is_integer():
                q = int(q)
            PQParams(p, q)
            object.__setattr__(self, 'p', p)
            object.__setattr__(self, 'q', q)
        else:
            object.__setattr__(self, 'p', None)
            object.__setattr__(self, 'q', None)

    @property
    def is_tree(self) -> bool:
        return self.name in TREE_METRICS

    @property
    def pq_params(self) -> PQParams:
        if self.name != 'pqgram':
            raise ParameterError(f"{self.name} has no pq-gram parameters")
        return PQParams(self.p, self.q)

    @property
    def column(self) -> str:
        """Column header used in comparison tables"""
        if self.name == 'pqgram':
            return self.pq_params.label
        return _COLUMN_NAMES[self.name]

    @property
    def tag(self) -> str:
        """Filename-safe identifier, e.g. pqgram_p1_q3 or minkowski_p3"""
        if self.name == 'pqgram':
            return f"pqgram_p{self.p}_q{self.q}"
        if self.name == 'minkowski':
            return f"minkowski_p{self.p:g}"
        return self.name

    def __str__(self) -> str:
        if self.name == 'pqgram':
            return f"pqgram(p={self.p},q={self.q})"
        if self.name == 'minkowski':
            return f"minkowski(p={self.p:g})"
        return self.name


def comparison_metrics(minkowski_p: float = DEFAULT_MINKOWSKI_P) -> List[MetricSpec]:
    """The seven comparison columns, in table order"""
    return [
        MetricSpec('euclidean'),
        MetricSpec('minkowski', p=minkowski_p),
        MetricSpec('manhattan'),
        MetricSpec('hamming'),
        MetricSpec('ted'),
        MetricSpec('pqgram', p=1, q=3),
        MetricSpec('pqgram', p=2, q=3),
    ]


# ========================================
# Matrix type
# ========================================

@dataclass(frozen=True)
class DistanceMatrix:
    """
    Symmetric pairwise distances with a zero diagonal.

    values is stored read-only; normalized matrices hold values in [0, 1].
    """
    ids: Tuple[str, ...]
    values: np.ndarray = field(compare=False, repr=False)
    metric: Optional[MetricSpec] = None
    normalized: bool = False

    def __post_init__(self):
        ids = tuple(str(i) for i in self.ids)
        values = np.array(self.values, dtype=float, copy=True)
        n = len(ids)
        if values.shape != (n, n):
            raise ValueError(f"matrix shape {values.shape} does not match {n} ids")
        if len(set(ids)) != n:
            raise ValueError("matrix ids must be unique")
        if not np.all(np.isfinite(values)):
            raise ValueError("matrix contains non-finite distances")
        if np.any(np.diag(values) != 0):
            raise ValueError("matrix diagonal must be zero")
        if not np.array_equal(values, values.T):
            raise ValueError("matrix must be symmetric")
        if np.any(values < 0):
            raise ValueError("distances must be non-negative")
        if self.normalized and np.any(values > 1):
            raise ValueError("normalized matrix has entries above 1")
        values.flags.writeable = False
        object.__setattr__(self, 'ids', ids)
        object.__setattr__(self, 'values', values)

    @property
    def n(self) -> int:
        return len(self.ids)

    def index(self, patient_id: str) -> int:
        try:
            return self.ids.index(patient_id)
        except ValueError:
            raise UnknownPatientError(f"unknown patient id: {patient_id}")

    def distance(self, first: str, second: str) -> float:
        return float(self.values[self.index(first), self.index(second)])

    def off_diagonal(self) -> np.ndarray:
        """Upper-triangle entries, one per unordered pair"""
        return self.values[np.triu_indices(self.n, k=1)]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, index=list(self.ids), columns=list(self.ids))
        frame.index.name = 'id'
        return frame

    def to_csv(self, path: str) -> str:
        """Header row "id,<id1>,...", one row per patient, 6 decimals"""
        self.to_frame().to_csv(path, float_format='%.6f', lineterminator='\n')
        return path


def read_matrix_csv(path: str, metric: Optional[MetricSpec] = None, normalized: bool = False) -> DistanceMatrix:
    """Load a matrix written by DistanceMatrix.to_csv"""
    frame = pd.read_csv(path, index_col=0, dtype=str, keep_default_na=False)
    if list(frame.index) != list(frame.columns):
        raise ValueError(f"{path}: row ids and column ids differ")
    return DistanceMatrix(ids=tuple(frame.index), values=frame.to_numpy(dtype=float),
                          metric=metric, normalized=normalized)


# ========================================
# Pairwise computation
# ========================================

def _pqgram_pair(first: PQGramProfile, second: PQGramProfile) -> Tuple[float, float]:
    return float(profile_distance(first, second)), profile_distance_norm(first, second)


def _ted_pair(first: tuple, second: tuple) -> Tuple[float, float]:
    (tree_a, size_a), (tree_b, size_b) = first, second
    raw = ted(tree_a, tree_b)
    return float(raw), raw / (size_a + size_b)


_worker_state: Dict[str, object] = {}


def _init_worker(items: Sequence, pair_function: Callable):
    _worker_state['items'] = items
    _worker_state['pair_function'] = pair_function


def _row_distances(i: int) -> Tuple[int, List[Tuple[float, float]]]:
    items = _worker_state['items']
    pair_function = _worker_state['pair_function']
    return i, [pair_function(items[i], items[j]) for j in range(i + 1, len(items))]


def _tree_matrices(items: Sequence, pair_function: Callable, workers: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Fill raw and natively normalised matrices row by row.

    Each unordered pair is computed exactly once, by whichever process owns
    its row, so the result does not depend on the schedule.
    """
    n = len(items)
    raw = np.zeros((n, n))
    norm = np.zeros((n, n))

    if workers > 1 and n > 2:
        with ProcessPoolExecutor(max_workers=workers, initializer=_init_worker,
                                 initargs=(items, pair_function)) as executor:
            rows = list(executor.map(_row_distances, range(n - 1), chunksize=max(1, n // (4 * workers))))
    else:
        _init_worker(items, pair_function)
        rows = [_row_distances(i) for i in range(n - 1)]

    for i, row in rows:
        for offset, (d, d_norm) in enumerate(row):
            j = i + 1 + offset
            raw[i, j] = raw[j, i] = d
            norm[i, j] = norm[j, i] = d_norm
    return raw, norm


def _compute(dataset: PatientDataset, metric: MetricSpec, workers: int) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    if len(dataset) < 2:
        raise ParameterError(f"need at least 2 patients for pairwise distances, got {len(dataset)}")

    if not metric.is_tree:
        table = build_frequency_table(dataset)
        logger.info(f"Computing {len(dataset) * (len(dataset) - 1) // 2} pairwise {metric} distances")
        return pairwise_vector_matrix(table.values, metric.name, p=metric.p or DEFAULT_MINKOWSKI_P), None

    trees = [build_tree(p) for p in dataset.patients]
    if metric.name == 'pqgram':
        params = metric.pq_params
        items = [pqgram_profile(t, params) for t in trees]
        pair_function = _pqgram_pair
    else:
        items = [(t, tree_size(t)) for t in trees]
        pair_function = _ted_pair

    logger.info(f"Computing {len(items) * (len(items) - 1) // 2} pairwise {metric} distances with {max(1, workers)} worker(s)")
    return _tree_matrices(items, pair_function, workers)


def pairwise_distances(dataset: PatientDataset, metric: MetricSpec, workers: int = 1) -> DistanceMatrix:
    """
    Raw all-pairs distances.

    Tree metrics run on build_tree output, vector metrics on frequency
    table rows.

    Raises:
        ParameterError: fewer than two patients
        ReservedLabelError: a tree uses the pq-gram dummy label
    """
    raw, _ = _compute(dataset, metric, workers)
    return DistanceMatrix(ids=dataset.ids, values=raw, metric=metric, normalized=False)


def minmax_normalize(matrix: DistanceMatrix) -> DistanceMatrix:
    """
    Map off-diagonal distances onto [0, 1] with (x - min) / (max - min).

    Already-normalized matrices are returned unchanged; a constant matrix
    maps to all zeros.
    """
    if matrix.normalized:
        return matrix
    values = np.array(matrix.values, dtype=float)
    off = matrix.off_diagonal()
    if off.size == 0 or off.max() == off.min():
        scaled = np.zeros_like(values)
    else:
        low, high = off.min(), off.max()
        scaled = np.clip((values - low) / (high - low), 0.0, 1.0)
        np.fill_diagonal(scaled, 0.0)
    return DistanceMatrix(ids=matrix.ids, values=scaled, metric=matrix.metric, normalized=True)


def distance_matrices(dataset: PatientDataset, metric: MetricSpec, mode: str = 'native',
                      workers: int = 1) -> Tuple[DistanceMatrix, DistanceMatrix]:
    """
    Raw matrix and the matrix normalised according to mode.

    native: pq-gram and edit distance use their own normalisations, vector
            metrics are min-max scaled
    minmax: every metric is min-max scaled
    none:   the raw matrix is returned twice
    """
    if mode not in NORMALIZATION_MODES:
        raise ParameterError(f"unknown normalization {mode!r}; choose from {', '.join(NORMALIZATION_MODES)}")

    raw_values, native_values = _compute(dataset, metric, workers)
    raw = DistanceMatrix(ids=dataset.ids, values=raw_values, metric=metric, normalized=False)

    if mode == 'none':
        return raw, raw
    if mode == 'native' and native_values is not None:
        return raw, DistanceMatrix(ids=dataset.ids, values=native_values, metric=metric, normalized=True)
    return raw, minmax_normalize(raw)


def normalized_distances(dataset: PatientDataset, metric: MetricSpec, mode: str = 'native',
                         workers: int = 1) -> DistanceMatrix:
    return distance_matrices(dataset, metric, mode=mode, workers=workers)[1]


# ========================================
# Reports
# ========================================

Pair = Tuple[str, str, float]


def smallest_pairs(matrix: DistanceMatrix, limit: int) -> List[Pair]:
    """
    Closest pairs first; equal distances are ordered by the (id, id) pair.

    Each pair is reported once with its ids in ascending order.
    """
    if limit < 0:
        raise ParameterError(f"limit must be >= 0, got {limit}")
    if limit == 0:
        return []
    ids = matrix.ids
    rows, cols = np.triu_indices(matrix.n, k=1)
    candidates = (
        (float(matrix.values[i, j]),) + tuple(sorted((ids[i], ids[j])))
        for i, j in zip(rows.tolist(), cols.tolist())
    )
    return [(a, b, d) for d, a, b in heapq.nsmallest(limit, candidates)]


def cross_metric_report(matrices: Mapping[str, DistanceMatrix],
                        pairs: Sequence[Tuple[str, str]]) -> pd.DataFrame:
    """
    One row per pair with its distance under every matrix.

    Args:
        matrices: column name -> normalized matrix, in column order
        pairs: (id, id) pairs; extra tuple fields are ignored

    Raises:
        ValueError: matrices disagree on the id ordering
        UnknownPatientError: a pair names an unknown id
    """
    columns = list(matrices)
    reference = None
    for name, matrix in matrices.items():
        if reference is None:
            reference = matrix.ids
        elif matrix.ids != reference:
            raise ValueError(f"matrix {name!r} uses a different id ordering")

    rows = []
    for pair in pairs:
        first, second = pair[0], pair[1]
        row = {'patient_a': first, 'patient_b': second}
        for name in columns:
            row[name] = matrices[name].distance(first, second)
        rows.append(row)
    return pd.DataFrame(rows, columns=['patient_a', 'patient_b'] + columns)


def shared_events_report(dataset: PatientDataset, pairs: Sequence[Tuple[str, str]],
                         descriptions: Optional[Mapping[str, str]] = None) -> pd.DataFrame:
    """
    Events of both patients of each pair, the events they share and the
    descriptions of the shared codes (when a lookup is given).
    """
    descriptions = descriptions or {}
    rows = []
    for pair in pairs:
        first, second = dataset.get(pair[0]), dataset.get(pair[1])
        events_a = sorted(set(first.events))
        events_b = sorted(set(second.events))
        shared = sorted(set(events_a) & set(events_b))
        rows.append({
            'patient_a': first.patient_id,
            'patient_b': second.patient_id,
            'events_a': ' '.join(events_a),
            'events_b': ' '.join(events_b),
            'shared': ' '.join(shared),
            'description': '; '.join(descriptions[c] for c in shared if c in descriptions),
        })
    return pd.DataFrame(rows, columns=['patient_a', 'patient_b', 'events_a', 'events_b', 'shared', 'description'])


def metric_axiom_report(matrix: DistanceMatrix, tolerance: float = 1e-9) -> Dict[str, int]:
    """
    Count violations of the metric axioms a matrix can show.

    Triangle violations are counted over ordered triples (i, j, k) with
    d(i, j) > d(i, k) + d(k, j) + tolerance.
    """
    values = np.asarray(matrix.values, dtype=float)
    triangle = 0
    for k in range(matrix.n):
        through_k = values[:, k][:, None] + values[k, :][None, :]
        triangle += int(np.count_nonzero(values > through_k + tolerance))
    return {
        'negative': int(np.count_nonzero(values < 0)),
        'nonzero_diagonal': int(np.count_nonzero(np.diag(values) != 0)),
        'asymmetric': int(np.count_nonzero(np.abs(values - values.T) > tolerance)) // 2,
        'triangle_violations': triangle,
    }
