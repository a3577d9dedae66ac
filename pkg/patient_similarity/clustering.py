"""
Patient Clustering

Partitions patients into k clusters from a normalised distance matrix:

    * k-medoids with seeded k-medoids++ initial medoids (any metric)
    * centroid k-means over frequency rows or MDS coordinates
    * a majority-vote consensus over seeded restarts

plus cluster-size summaries with similar / non-similar / others roles,
classical MDS coordinates for plotting and adjusted Rand scoring against
known groups.

Usage:
    from patient_similarity.clustering import consensus_partition, summarize_clusters, embed_2d

    partition = consensus_partition(matrix, k=3, restarts=10, base_seed=0)
    summary = summarize_clusters(partition, matrix)
    coords = embed_2d(matrix)
"""

from collections import Counter
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple
import logging
import warnings

import numpy as np
import pandas as pd
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning
from sklearn.metrics import adjusted_rand_score

from .distance_matrix import DistanceMatrix
from .errors import IngestError, ParameterError, UnknownPatientError

logger = logging.getLogger(__name__)

MAX_ITERATIONS = 100
METHODS = ('kmedoids', 'kmeans')

ROLE_SIMILAR = 'similar'
ROLE_NON_SIMILAR = 'non-similar'
ROLE_OTHERS = 'others'

# slack for float summation order when checking the cost never rises
COST_TOLERANCE = 1e-9


# ========================================
# Types
# ========================================

@dataclass(frozen=True)
class Partition:
    """
    Assignment of every patient to one of k clusters.

    assignment[i] is the 1-based cluster of ids[i]; medoids[c - 1] is the
    medoid patient of cluster c. history holds the cost after every
    iteration.
    """
    ids: Tuple[str, ...]
    assignment: Tuple[int, ...]
    k: int
    medoids: Tuple[str, ...]
    cost: float
    seed: Optional[int] = None
    iterations: int = 0
    method: str = 'kmedoids'
    history: Tuple[float, ...] = ()

    def cluster_of(self, patient_id: str) -> int:
        try:
            return self.assignment[self.ids.index(patient_id)]
        except ValueError:
            raise UnknownPatientError(f"unknown patient id: {patient_id}")

    def members(self, cluster: int) -> List[str]:
        return [pid for pid, c in zip(self.ids, self.assignment) if c == cluster]

    def sizes(self) -> Tuple[int, ...]:
        counts = Counter(self.assignment)
        return tuple(counts.get(c, 0) for c in range(1, self.k + 1))

    def canonical(self) -> 'Partition':
        """Relabel clusters by ascending smallest member id"""
        smallest: Dict[int, str] = {}
        for pid, c in zip(self.ids, self.assignment):
            if c not in smallest or pid < smallest[c]:
                smallest[c] = pid
        order = sorted(smallest, key=lambda c: smallest[c])
        relabel = {old: new for new, old in enumerate(order, start=1)}
        return replace(
            self,
            assignment=tuple(relabel[c] for c in self.assignment),
            medoids=tuple(self.medoids[old - 1] for old in order),
        )

    @property
    def key(self) -> Tuple[int, ...]:
        return self.canonical().assignment


@dataclass(frozen=True)
class ClusterSummary:
    """Per-cluster counts, mean within-cluster distance and role, indexed by cluster - 1"""
    counts: Tuple[int, ...]
    means: Tuple[float, ...]
    roles: Tuple[str, ...]

    @property
    def total(self) -> int:
        return sum(self.counts)

    def role_of(self, cluster: int) -> str:
        return self.roles[cluster - 1]


# ========================================
# k-medoids
# ========================================

def _check_k(k: int, n: int):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1 or k > n:
        raise ParameterError(f"k must be between 1 and {n}, got {k}")


def _initial_medoids(values: np.ndarray, k: int, rng: np.random.Generator) -> List[int]:
    """k-medoids++: each further medoid is drawn with probability ~ squared distance to the nearest one"""
    n = values.shape[0]
    chosen = [int(rng.integers(n))]
    while len(chosen) < k:
        weights = values[:, chosen].min(axis=1) ** 2
        weights[chosen] = 0.0
        total = weights.sum()
        if total > 0:
            chosen.append(int(rng.choice(n, p=weights / total)))
        else:
            remaining = [i for i in range(n) if i not in chosen]
            chosen.append(int(remaining[int(rng.integers(len(remaining)))]))
    return chosen


def _assign(values: np.ndarray, medoids: Sequence[int]) -> Tuple[np.ndarray, float]:
    labels = np.argmin(values[:, medoids], axis=1)
    # duplicate patients can tie with an earlier medoid
    for c, m in enumerate(medoids):
        labels[m] = c
    cost = float(sum(values[i, medoids[c]] for i, c in enumerate(labels)))
    return labels, cost


def _update(values: np.ndarray, labels: np.ndarray, medoids: Sequence[int]) -> List[int]:
    updated = []
    for c, incumbent in enumerate(medoids):
        members = np.flatnonzero(labels == c)
        totals = values[np.ix_(members, members)].sum(axis=1)
        best = members[int(np.argmin(totals))]
        incumbent_total = totals[int(np.flatnonzero(members == incumbent)[0])]
        updated.append(incumbent if incumbent_total <= totals.min() else int(best))
    return updated


def _to_partition(matrix: DistanceMatrix, labels: np.ndarray, medoids: Sequence[int], k: int,
                  cost: float, seed: Optional[int], iterations: int, method: str,
                  history: Sequence[float]) -> Partition:
    return Partition(
        ids=matrix.ids,
        assignment=tuple(int(c) + 1 for c in labels),
        k=k,
        medoids=tuple(matrix.ids[m] for m in medoids),
        cost=cost,
        seed=seed,
        iterations=iterations,
        method=method,
        history=tuple(history),
    ).canonical()


def kmedoids(matrix: DistanceMatrix, k: int, seed: int = 0, max_iter: int = MAX_ITERATIONS) -> Partition:
    """
    Alternate assignment and medoid update until the medoid set is stable.

    Every patient joins its nearest medoid (lowest cluster index on ties)
    and every medoid belongs to its own cluster. The update keeps the
    current medoid unless another member has a strictly smaller total
    distance to the cluster.

    Raises:
        ParameterError: k outside 1..n
    """
    _check_k(k, matrix.n)
    values = np.asarray(matrix.values, dtype=float)
    rng = np.random.default_rng(seed)

    medoids = _initial_medoids(values, k, rng)
    labels, cost = _assign(values, medoids)
    history = [cost]
    iterations = 0

    while iterations < max_iter:
        iterations += 1
        updated = _update(values, labels, medoids)
        if sorted(updated) == sorted(medoids):
            break
        new_labels, new_cost = _assign(values, updated)
        if new_cost > cost + COST_TOLERANCE:
            raise RuntimeError(f"k-medoids cost rose from {cost} to {new_cost} at iteration {iterations}")
        medoids, labels, cost = updated, new_labels, new_cost
        history.append(cost)
    else:
        logger.warning(f"k-medoids (seed {seed}) stopped after {max_iter} iterations without converging")

    logger.debug(f"k-medoids seed={seed} k={k}: cost {cost:.6f} after {iterations} iteration(s)")
    return _to_partition(matrix, labels, medoids, k, cost, seed, iterations, 'kmedoids', history)


# ========================================
# Centroid k-means
# ========================================

def kmeans_partition(features: np.ndarray, matrix: DistanceMatrix, k: int, seed: int = 0) -> Partition:
    """
    Centroid k-means over feature rows (frequency rows or MDS coordinates).

    The medoid of a cluster is the member nearest its centroid; cost is
    measured in the supplied distance matrix. Falls back to k-medoids when
    the features have fewer than k distinct points.
    """
    _check_k(k, matrix.n)
    features = np.asarray(features, dtype=float)
    if features.shape[0] != matrix.n:
        raise ParameterError(f"{features.shape[0]} feature rows for {matrix.n} patients")

    with warnings.catch_warnings():
        warnings.simplefilter('ignore', ConvergenceWarning)
        model = KMeans(n_clusters=k, n_init=1, random_state=seed).fit(features)
    labels = np.asarray(model.labels_)

    if len(np.unique(labels)) < k:
        logger.warning(f"k-means (seed {seed}) found fewer than {k} clusters; using k-medoids")
        return kmedoids(matrix, k, seed)

    medoids = []
    for c in range(k):
        members = np.flatnonzero(labels == c)
        offsets = np.linalg.norm(features[members] - model.cluster_centers_[c], axis=1)
        medoids.append(int(members[int(np.argmin(offsets))]))

    values = np.asarray(matrix.values, dtype=float)
    cost = float(sum(values[i, medoids[c]] for i, c in enumerate(labels)))
    return _to_partition(matrix, labels, medoids, k, cost, seed, int(model.n_iter_), 'kmeans', [cost])


# ========================================
# Consensus
# ========================================

def consensus_partition(matrix: DistanceMatrix, k: int, restarts: int = 10, base_seed: int = 0,
                        method: str = 'kmedoids', features: Optional[np.ndarray] = None) -> Partition:
    """
    Majority vote over restarts with seeds base_seed .. base_seed + restarts - 1.

    Runs are compared in canonical form; the most frequent partition wins,
    ties going to the lower cost and then the lower seed.

    Args:
        matrix: normalised distance matrix
        method: 'kmedoids', or 'kmeans' over features (MDS coordinates of
                the matrix when no features are given)

    Raises:
        ParameterError: restarts < 1, unknown method, or k outside 1..n
    """
    if restarts < 1:
        raise ParameterError(f"restarts must be >= 1, got {restarts}")
    if method not in METHODS:
        raise ParameterError(f"unknown clustering method {method!r}; choose from {', '.join(METHODS)}")
    _check_k(k, matrix.n)

    if method == 'kmeans' and features is None:
        features = mds_coordinates(matrix, dims=None)

    runs = []
    for seed in range(base_seed, base_seed + restarts):
        if method == 'kmeans':
            runs.append(kmeans_partition(features, matrix, k, seed))
        else:
            runs.append(kmedoids(matrix, k, seed))

    votes = Counter(run.assignment for run in runs)
    best = min(runs, key=lambda run: (-votes[run.assignment], run.cost, run.seed))
    logger.info(f"Consensus: {votes[best.assignment]}/{restarts} run(s) agree (seed {best.seed}, cost {best.cost:.6f})")
    return best


# ========================================
# Summaries
# ========================================

def summarize_clusters(partition: Partition, matrix: DistanceMatrix) -> ClusterSummary:
    """
    Counts and mean within-cluster distance per cluster.

    The cluster with the smallest mean is "similar", the one with the
    largest "non-similar" (k >= 2), the rest "others"; equal means fall
    back to cluster order.
    """
    if partition.ids != matrix.ids:
        raise ValueError("partition and matrix use different patient ids")

    labels = np.asarray(partition.assignment)
    values = np.asarray(matrix.values, dtype=float)
    counts, means = [], []
    for c in range(1, partition.k + 1):
        members = np.flatnonzero(labels == c)
        counts.append(int(members.size))
        if members.size < 2:
            means.append(0.0)
            continue
        block = values[np.ix_(members, members)]
        means.append(float(block[np.triu_indices(members.size, k=1)].mean()))

    order = sorted(range(partition.k), key=lambda c: (means[c], c))
    roles = [ROLE_OTHERS] * partition.k
    roles[order[0]] = ROLE_SIMILAR
    if partition.k >= 2:
        roles[order[-1]] = ROLE_NON_SIMILAR
    return ClusterSummary(counts=tuple(counts), means=tuple(means), roles=tuple(roles))


def adjusted_rand(partition: Partition, truth: Mapping[str, object]) -> float:
    """Adjusted Rand index of the partition against known group labels"""
    missing = [pid for pid in partition.ids if pid not in truth]
    if missing:
        raise UnknownPatientError(f"no group label for patient id: {missing[0]}")
    return float(adjusted_rand_score([truth[pid] for pid in partition.ids], list(partition.assignment)))


def read_groups(path: str) -> Dict[str, str]:
    """patient_id -> group from a patient_id,group CSV (as written by gen)"""
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if 'patient_id' not in frame.columns or 'group' not in frame.columns:
        raise IngestError(f"{path}: expected columns patient_id,group", line=1)
    return dict(zip(frame['patient_id'].str.strip(), frame['group'].str.strip()))


# ========================================
# Embedding
# ========================================

def mds_coordinates(matrix: DistanceMatrix, dims: Optional[int] = 2) -> np.ndarray:
    """
    Classical multidimensional scaling of a distance matrix.

    Double-centres -1/2 D^2, keeps the top eigenpairs with negative
    eigenvalues clamped to 0, and flips each column so its
    largest-magnitude entry is positive.

    Args:
        dims: number of coordinates; None keeps every dimension with a
              positive eigenvalue (at least one)

    Returns:
        np.ndarray: (n, dims) coordinates; zero columns where the matrix
        has no spread
    """
    values = np.asarray(matrix.values, dtype=float)
    n = values.shape[0]
    centering = np.eye(n) - np.ones((n, n)) / n
    gram = -centering.dot(values ** 2).dot(centering) / 2

    evals, evecs = np.linalg.eigh(gram)
    idx = np.argsort(evals)[::-1]
    evals = np.clip(evals[idx], 0.0, None)
    evecs = evecs[:, idx]

    if dims is None:
        scale = max(1.0, float(evals[0])) if n else 1.0
        dims = max(1, int(np.count_nonzero(evals > 1e-10 * scale)))

    coords = np.zeros((n, dims))
    keep = min(dims, n)
    coords[:, :keep] = evecs[:, :keep] * np.sqrt(evals[:keep])

    for col in range(keep):
        column = coords[:, col]
        if column.size and column[int(np.argmax(np.abs(column)))] < 0:
            coords[:, col] = -column
    return coords + 0.0


def embed_2d(matrix: DistanceMatrix) -> np.ndarray:
    if matrix.n < 2:
        raise ParameterError(f"need at least 2 patients to embed, got {matrix.n}")
    return mds_coordinates(matrix, dims=2)


# ========================================
# Tables
# ========================================

def partition_frame(partition: Partition, summary: ClusterSummary) -> pd.DataFrame:
    return pd.DataFrame({
        'patient_id': list(partition.ids),
        'cluster': list(partition.assignment),
        'role': [summary.role_of(c) for c in partition.assignment],
    })


def summary_frame(summary: ClusterSummary) -> pd.DataFrame:
    return pd.DataFrame({
        'cluster': list(range(1, len(summary.counts) + 1)),
        'role': list(summary.roles),
        'count': list(summary.counts),
        'mean_distance': list(summary.means),
    })


def embedding_frame(partition: Partition, coords: np.ndarray) -> pd.DataFrame:
    return pd.DataFrame({
        'patient_id': list(partition.ids),
        'x': coords[:, 0],
        'y': coords[:, 1],
        'cluster': list(partition.assignment),
    })


def pair_cluster_frame(partition: Partition, summary: ClusterSummary,
                       pairs: Sequence[Tuple[str, str, float]]) -> pd.DataFrame:
    """
    Cluster membership of listed pairs, usually the closest pairs of the
    matrix the partition was built from.

    role is the role of the shared cluster, empty when the pair is split.

    Raises:
        UnknownPatientError: a pair names a patient outside the partition
    """
    rows = []
    for first, second, distance in pairs:
        cluster_a, cluster_b = partition.cluster_of(first), partition.cluster_of(second)
        same = cluster_a == cluster_b
        rows.append({
            'patient_a': first,
            'patient_b': second,
            'distance': float(distance),
            'cluster_a': cluster_a,
            'cluster_b': cluster_b,
            'same_cluster': same,
            'role': summary.role_of(cluster_a) if same else '',
        })
    return pd.DataFrame(rows, columns=['patient_a', 'patient_b', 'distance', 'cluster_a',
                                       'cluster_b', 'same_cluster', 'role'])
