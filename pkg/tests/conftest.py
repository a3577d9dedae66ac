"""
Shared fixtures for the patient similarity test suite.

Run: python -m pytest
Skip scale checks: python -m pytest -m "not slow"
"""

import os
import random
import sys

import pandas as pd
import pytest

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from patient_similarity.ingestion import load_records
from patient_similarity.synthetic import generate_records, write_synthetic
from patient_similarity.tree_model import LabeledTree


# ============================================
# Record files
# ============================================

# the four patients of the worked example; codes carry read-code padding
# that loading truncates to level 3
FOUR_PATIENT_ROWS = [
    ('a6706013B', 1, 15, 'M26z.'),
    ('a6706015R', 2, 10, '1681.'),
    ('a6706015R', 2, 10, '1951.'),
    ('a6706015R', 2, 10, '7302.'),
    ('a6706015R', 2, 10, 'F58..'),
    ('a6706015R', 2, 10, 'F581.'),
    ('a670601o8', 1, 12, '171..'),
    ('a670601o8', 1, 12, '19C..'),
    ('a670601o8', 1, 12, '1A5..'),
    ('a670601o8', 1, 12, 'H17..'),
    ('a670601o8', 1, 12, 'M0...'),
    ('a670601o8', 1, 12, 'M26..'),
    ('a670601o8', 1, 12, 'N24..'),
    ('a670601o8', 1, 12, 'N32..'),
    ('a670601o8', 1, 12, 'SD...'),
    ('a670601o8', 1, 12, 'SL...'),
    ('a670601yJ', 2, 11, 'M26..'),
    ('a670601yJ', 2, 11, 'ZL5..'),
]


def write_records(path, rows):
    frame = pd.DataFrame(rows, columns=['patient_id', 'sex', 'age', 'event_code'])
    frame.to_csv(path, index=False)
    return str(path)


@pytest.fixture
def four_patient_csv(tmp_path):
    """Records of the four worked-example patients"""
    return write_records(tmp_path / "four_patients.csv", FOUR_PATIENT_ROWS)


@pytest.fixture
def four_patient_dataset(four_patient_csv):
    return load_records(four_patient_csv)


@pytest.fixture
def three_patient_csv(tmp_path):
    """
    Small hand-checkable fixture.

    P1 and P2 are identical; P3 differs in sex, age and events.
    """
    rows = [
        ('P1', 1, 5, 'A01'),
        ('P1', 1, 5, 'B02'),
        ('P2', 1, 5, 'A01'),
        ('P2', 1, 5, 'B02'),
        ('P3', 2, 7, 'A01'),
        ('P3', 2, 7, 'C03'),
        ('P3', 2, 7, 'C03'),
    ]
    return write_records(tmp_path / "three_patients.csv", rows)


@pytest.fixture
def three_patient_dataset(three_patient_csv):
    return load_records(three_patient_csv)


@pytest.fixture
def planted_csv(tmp_path):
    """60 synthetic patients in 3 planted groups of 20, plus the group file"""
    records, groups = generate_records(60, 12, 3, seed=0)
    records_path, groups_path = write_synthetic(records, groups, str(tmp_path / "planted.csv"))
    return records_path, groups_path


@pytest.fixture
def planted_dataset(planted_csv):
    return load_records(planted_csv[0])


@pytest.fixture
def planted_truth(planted_csv):
    frame = pd.read_csv(planted_csv[1], dtype=str)
    return dict(zip(frame['patient_id'], frame['group']))


# ============================================
# Random trees
# ============================================

def make_random_tree(rng: random.Random, max_nodes: int, alphabet: str = 'abc') -> LabeledTree:
    """Random ordered tree with 1..max_nodes nodes: each new node hangs under a random earlier one"""
    n = rng.randint(1, max_nodes)
    labels = [rng.choice(alphabet) for _ in range(n)]
    children = [[] for _ in range(n)]
    for i in range(1, n):
        children[rng.randrange(i)].append(i)

    def build(i):
        return LabeledTree(labels[i], tuple(build(c) for c in children[i]))

    return build(0)


@pytest.fixture
def random_tree():
    """Factory: random_tree(rng, max_nodes, alphabet='abc')"""
    return make_random_tree
