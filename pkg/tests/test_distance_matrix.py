"""
Tests for all-pairs distance matrices, normalisation and reports.

Hand-computed values use the three-patient fixture: P1 and P2 are
identical, P3 has the other sex, another age and events A01, C03, C03.
"""

import numpy as np
import pandas as pd
import pytest

from patient_similarity.distance_matrix import (
    DistanceMatrix, MetricSpec, comparison_metrics, cross_metric_report,
    distance_matrices, metric_axiom_report, minmax_normalize, normalized_distances,
    pairwise_distances, read_matrix_csv, shared_events_report, smallest_pairs,
)
from patient_similarity.errors import ParameterError, ReservedLabelError, UnknownPatientError
from patient_similarity.ingestion import PatientDataset, PatientEntry


def _matrix(values, ids=None, normalized=False):
    values = np.asarray(values, dtype=float)
    ids = ids or tuple(f"P{i + 1}" for i in range(values.shape[0]))
    return DistanceMatrix(ids=tuple(ids), values=values, normalized=normalized)


def _random_symmetric(rng, n, high=20):
    upper = np.triu(rng.integers(0, high, size=(n, n)), k=1)
    return upper + upper.T


# ============================================
# Metric selection
# ============================================

class TestMetricSpec:
    """Names, defaults, labels"""

    def test_defaults(self):
        assert MetricSpec('minkowski').p == 3
        pq = MetricSpec('pqgram')
        assert (pq.p, pq.q) == (1, 3)

    def test_unused_parameters_dropped(self):
        spec = MetricSpec('euclidean', p=4, q=2)
        assert spec.p is None and spec.q is None

    def test_integral_float_parameters_for_pqgram(self):
        assert MetricSpec('pqgram', p=2.0, q=3).p == 2

    def test_name_is_case_insensitive(self):
        assert MetricSpec('TED').name == 'ted'

    @pytest.mark.parametrize("name, p, q", [
        ('cosine', None, None),
        ('minkowski', 0.5, None),
        ('pqgram', 0, 3),
        ('pqgram', 1.5, 3),
        ('pqgram', 1, 0),
    ])
    def test_invalid(self, name, p, q):
        with pytest.raises(ParameterError):
            MetricSpec(name, p=p, q=q)

    def test_columns_in_table_order(self):
        assert [m.column for m in comparison_metrics()] == [
            'Euclidean', 'Minkowski', 'Manhattan', 'Hamming', 'Edit Distance', '1,3-Grams', '2,3-Grams',
        ]

    def test_tags(self):
        assert MetricSpec('pqgram', p=1, q=3).tag == 'pqgram_p1_q3'
        assert MetricSpec('minkowski', p=3).tag == 'minkowski_p3'
        assert MetricSpec('ted').tag == 'ted'


# ============================================
# Matrix type
# ============================================

class TestDistanceMatrix:
    """Construction invariants and CSV format"""

    @pytest.mark.parametrize("values", [
        [[0, 1], [2, 0]],
        [[1, 1], [1, 0]],
        [[0, -1], [-1, 0]],
        [[0, 1, 2], [1, 0, 1]],
    ])
    def test_invalid_values(self, values):
        with pytest.raises(ValueError):
            _matrix(values, ids=('a', 'b'))

    def test_normalized_bounds(self):
        with pytest.raises(ValueError):
            _matrix([[0, 2], [2, 0]], normalized=True)

    def test_values_read_only(self):
        matrix = _matrix([[0, 1], [1, 0]])
        with pytest.raises(ValueError):
            matrix.values[0, 1] = 5

    def test_unknown_id(self):
        with pytest.raises(UnknownPatientError):
            _matrix([[0, 1], [1, 0]]).distance('P1', 'P9')

    def test_csv_format(self, tmp_path):
        matrix = _matrix([[0, 0.25, 1], [0.25, 0, 0.5], [1, 0.5, 0]])
        path = matrix.to_csv(str(tmp_path / "m.csv"))
        with open(path, 'rb') as f:
            lines = f.read().decode('utf-8').split('\n')
        assert lines[0] == 'id,P1,P2,P3'
        assert lines[1] == 'P1,0.000000,0.250000,1.000000'
        assert lines[-1] == ''

    def test_csv_read_back(self, tmp_path):
        matrix = _matrix([[0, 0.25, 1], [0.25, 0, 0.5], [1, 0.5, 0]])
        loaded = read_matrix_csv(matrix.to_csv(str(tmp_path / "m.csv")))
        assert loaded.ids == matrix.ids
        assert np.array_equal(loaded.values, matrix.values)


# ============================================
# Pairwise computation
# ============================================

class TestPairwiseDistances:
    """Raw all-pairs distances for the six metrics"""

    def test_three_patient_euclidean(self, three_patient_dataset):
        matrix = pairwise_distances(three_patient_dataset, MetricSpec('euclidean'))
        root8 = np.sqrt(8)
        assert np.allclose(matrix.values, [[0, 0, root8], [0, 0, root8], [root8, root8, 0]], atol=1e-12)

    @pytest.mark.parametrize("spec, expected", [
        (MetricSpec('manhattan'), 6),
        (MetricSpec('hamming'), 5),
        (MetricSpec('minkowski', p=3), 12 ** (1 / 3)),
        (MetricSpec('ted'), 4),
        (MetricSpec('pqgram', p=1, q=3), 20),
        (MetricSpec('pqgram', p=2, q=3), 20),
    ])
    def test_three_patient_values(self, three_patient_dataset, spec, expected):
        matrix = pairwise_distances(three_patient_dataset, spec)
        assert matrix.distance('P1', 'P2') == 0
        assert matrix.distance('P1', 'P3') == pytest.approx(expected, abs=1e-12)
        assert matrix.distance('P3', 'P2') == pytest.approx(expected, abs=1e-12)

    def test_native_tree_normalisations(self, three_patient_dataset):
        ted_matrix = normalized_distances(three_patient_dataset, MetricSpec('ted'))
        assert ted_matrix.distance('P1', 'P3') == pytest.approx(4 / 11, abs=1e-12)
        pq_matrix = normalized_distances(three_patient_dataset, MetricSpec('pqgram'))
        assert pq_matrix.distance('P1', 'P3') == pytest.approx(20 / 21, abs=1e-12)
        assert pq_matrix.normalized

    def test_matrix_invariants_for_every_metric(self, four_patient_dataset):
        for spec in comparison_metrics():
            matrix = pairwise_distances(four_patient_dataset, spec)
            assert matrix.n == 4
            assert np.all(np.diag(matrix.values) == 0)
            assert np.array_equal(matrix.values, matrix.values.T)

    def test_repeatable_and_schedule_independent(self, planted_dataset):
        spec = MetricSpec('ted')
        single = pairwise_distances(planted_dataset, spec, workers=1)
        again = pairwise_distances(planted_dataset, spec, workers=1)
        parallel = pairwise_distances(planted_dataset, spec, workers=3)
        assert np.array_equal(single.values, again.values)
        assert np.array_equal(single.values, parallel.values)

    def test_needs_two_patients(self, three_patient_dataset):
        one = PatientDataset(patients=three_patient_dataset.patients[:1])
        with pytest.raises(ParameterError):
            pairwise_distances(one, MetricSpec('euclidean'))

    def test_reserved_label_propagates(self):
        dataset = PatientDataset(patients=(
            PatientEntry('A', 1, (3,), ('*',)),
            PatientEntry('B', 1, (3,), ('X01',)),
        ))
        with pytest.raises(ReservedLabelError):
            pairwise_distances(dataset, MetricSpec('pqgram'))


# ============================================
# Normalisation
# ============================================

class TestMinmaxNormalize:
    """(x - min) / (max - min) over off-diagonal entries"""

    def test_endpoints_and_midpoint(self):
        matrix = minmax_normalize(_matrix([[0, 2, 4], [2, 0, 6], [4, 6, 0]]))
        assert sorted(matrix.off_diagonal().tolist()) == [0.0, 0.5, 1.0]
        assert matrix.normalized

    def test_constant_maps_to_zero(self):
        matrix = minmax_normalize(_matrix([[0, 3, 3], [3, 0, 3], [3, 3, 0]]))
        assert np.all(matrix.values == 0)

    def test_flagged_matrix_passes_through(self):
        matrix = _matrix([[0, 0.2], [0.2, 0]], normalized=True)
        assert minmax_normalize(matrix) is matrix

    def test_idempotent(self):
        once = minmax_normalize(_matrix([[0, 2, 4], [2, 0, 7], [4, 7, 0]]))
        twice = minmax_normalize(_matrix(once.values))
        assert np.allclose(once.values, twice.values, atol=1e-15)

    def test_ranks_preserved(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            raw = _matrix(_random_symmetric(rng, 8))
            scaled = minmax_normalize(raw)
            a, b = raw.off_diagonal(), scaled.off_diagonal()
            assert np.array_equal(np.sign(a[:, None] - a[None, :]), np.sign(b[:, None] - b[None, :]))
            assert np.all((scaled.values >= 0) & (scaled.values <= 1))

    def test_modes(self, three_patient_dataset):
        spec = MetricSpec('ted')
        raw, same = distance_matrices(three_patient_dataset, spec, mode='none')
        assert same is raw and not raw.normalized
        _, scaled = distance_matrices(three_patient_dataset, spec, mode='minmax')
        assert scaled.distance('P1', 'P3') == 1.0
        _, vector = distance_matrices(three_patient_dataset, MetricSpec('manhattan'), mode='native')
        assert vector.normalized and vector.distance('P1', 'P3') == 1.0

    def test_unknown_mode(self, three_patient_dataset):
        with pytest.raises(ParameterError):
            distance_matrices(three_patient_dataset, MetricSpec('ted'), mode='zscore')


# ============================================
# Reports
# ============================================

class TestSmallestPairs:
    """Closest pairs, ties broken by ids"""

    def test_single_zero_pair_first(self):
        matrix = _matrix([[0, 0.5, 0], [0.5, 0, 0.7], [0, 0.7, 0]])
        assert smallest_pairs(matrix, 1) == [('P1', 'P3', 0.0)]

    def test_ties_lexicographic(self):
        matrix = _matrix(np.ones((4, 4)) - np.eye(4), ids=('d', 'b', 'c', 'a'))
        pairs = [(a, b) for a, b, _ in smallest_pairs(matrix, 10)]
        assert pairs == [('a', 'b'), ('a', 'c'), ('a', 'd'), ('b', 'c'), ('b', 'd'), ('c', 'd')]

    def test_limit(self):
        matrix = _matrix([[0, 0, 1], [0, 0, 0.25], [1, 0.25, 0]])
        assert smallest_pairs(matrix, 2) == [('P1', 'P2', 0.0), ('P2', 'P3', 0.25)]
        assert smallest_pairs(matrix, 0) == []
        with pytest.raises(ParameterError):
            smallest_pairs(matrix, -1)


class TestCrossMetricReport:
    """Seven normalised distances per pair"""

    def test_three_patient_rows(self, three_patient_dataset):
        matrices = {m.column: normalized_distances(three_patient_dataset, m) for m in comparison_metrics()}
        report = cross_metric_report(matrices, [('P1', 'P2'), ('P1', 'P3')])
        assert list(report.columns) == ['patient_a', 'patient_b', 'Euclidean', 'Minkowski', 'Manhattan',
                                        'Hamming', 'Edit Distance', '1,3-Grams', '2,3-Grams']
        assert report.iloc[0, 2:].tolist() == [0.0] * 7
        expected = [1.0, 1.0, 1.0, 1.0, 4 / 11, 20 / 21, 20 / 21]
        assert report.iloc[1, 2:].tolist() == pytest.approx(expected, abs=1e-12)

    def test_unknown_id(self, three_patient_dataset):
        matrices = {'Euclidean': normalized_distances(three_patient_dataset, MetricSpec('euclidean'))}
        with pytest.raises(UnknownPatientError):
            cross_metric_report(matrices, [('P1', 'P9')])

    def test_id_ordering_must_match(self):
        first = _matrix([[0, 1], [1, 0]], ids=('a', 'b'))
        second = _matrix([[0, 1], [1, 0]], ids=('b', 'a'))
        with pytest.raises(ValueError):
            cross_metric_report({'x': first, 'y': second}, [('a', 'b')])


class TestSharedEvents:
    """Events two patients have in common"""

    def test_shared_codes_and_descriptions(self, four_patient_dataset):
        frame = shared_events_report(four_patient_dataset, [('a6706013B', 'a670601yJ')],
                                     {'M26': 'Nasal polyp'})
        row = frame.iloc[0].to_dict()
        assert row['events_a'] == 'M26'
        assert row['events_b'] == 'M26 ZL5'
        assert row['shared'] == 'M26'
        assert row['description'] == 'Nasal polyp'

    def test_no_overlap(self, four_patient_dataset):
        frame = shared_events_report(four_patient_dataset, [('a6706013B', 'a6706015R')])
        assert frame.loc[0, 'shared'] == ''


class TestMetricAxiomReport:
    """Violation counts"""

    def test_clean_matrix(self, four_patient_dataset):
        report = metric_axiom_report(pairwise_distances(four_patient_dataset, MetricSpec('euclidean')))
        assert report == {'negative': 0, 'nonzero_diagonal': 0, 'asymmetric': 0, 'triangle_violations': 0}

    def test_triangle_violation(self):
        report = metric_axiom_report(_matrix([[0, 1, 5], [1, 0, 1], [5, 1, 0]]))
        assert report['triangle_violations'] == 2
