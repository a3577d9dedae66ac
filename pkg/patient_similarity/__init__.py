"""
Patient Similarity

Distances between patients built from primary-care event records, under
two representations:

    * ordered trees (root, sex, ages, event codes) compared with pq-gram
      distance and tree edit distance
    * frequency-table rows compared with Euclidean, Minkowski, Manhattan
      and Hamming distance

plus normalised distance matrices, k-cluster partitions and cross-metric
reports.

Usage:
    from patient_similarity import load_records, MetricSpec, distance_matrices, consensus_partition

    dataset = load_records('records.csv')
    raw, matrix = distance_matrices(dataset, MetricSpec('pqgram', p=1, q=3))
    partition = consensus_partition(matrix, k=3, restarts=10)

Components:
    - tree_model: bracket-notation trees
    - pqgram / edit_distance / vector_metrics: the six metrics
    - ingestion: record loading, patient trees, frequency tables
    - distance_matrix: all-pairs matrices, normalisation, reports
    - clustering: k-medoids, consensus, summaries, embedding
    - cli: command-line front end
"""

__version__ = "1.0.0"

from .clustering import (
    ClusterSummary, Partition, adjusted_rand, consensus_partition, embed_2d,
    kmeans_partition, kmedoids, mds_coordinates, summarize_clusters,
)
from .config import Config, RunConfig, get_config
from .distance_matrix import (
    DistanceMatrix, MetricSpec, cross_metric_report, distance_matrices, minmax_normalize,
    normalized_distances, pairwise_distances, smallest_pairs,
)
from .edit_distance import ted, ted_norm
from .errors import (
    DimensionError, IngestError, ParameterError, PatientSimilarityError,
    ReservedLabelError, TreeParseError, UnknownPatientError,
)
from .ingestion import PatientDataset, build_frequency_table, build_tree, load_records
from .pqgram import PQParams, pqgram_distance, pqgram_distance_norm, pqgram_profile
from .tree_model import LabeledTree, parse_tree, serialize_tree, tree_size
from .vector_metrics import euclidean, hamming, manhattan, minkowski

__all__ = [
    'ClusterSummary', 'Partition', 'adjusted_rand', 'consensus_partition', 'embed_2d',
    'kmeans_partition', 'kmedoids', 'mds_coordinates', 'summarize_clusters',
    'Config', 'RunConfig', 'get_config',
    'DistanceMatrix', 'MetricSpec', 'cross_metric_report', 'distance_matrices', 'minmax_normalize',
    'normalized_distances', 'pairwise_distances', 'smallest_pairs',
    'ted', 'ted_norm',
    'DimensionError', 'IngestError', 'ParameterError', 'PatientSimilarityError',
    'ReservedLabelError', 'TreeParseError', 'UnknownPatientError',
    'PatientDataset', 'build_frequency_table', 'build_tree', 'load_records',
    'PQParams', 'pqgram_distance', 'pqgram_distance_norm', 'pqgram_profile',
    'LabeledTree', 'parse_tree', 'serialize_tree', 'tree_size',
    'euclidean', 'hamming', 'manhattan', 'minkowski',
]
