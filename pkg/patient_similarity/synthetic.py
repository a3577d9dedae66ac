"""
Synthetic Patient Records

Seeded generator of event records with planted groups of similar
patients, standing in for real primary-care extracts. Output uses the same
CSV layout load_records reads, plus a planted-group file for scoring
cluster recovery.
"""

from typing import List, Tuple
import logging
import os

import numpy as np
import pandas as pd

from .errors import ParameterError

logger = logging.getLogger(__name__)

# read-code style padding after the level-3 stem; removed again by truncate_code
CODE_SUFFIXES = ('..', '0.', '1.', 'z.')
MAX_CODES = 26 * 100
MAX_CORE_CODES = 4
MAX_AGE = 17

REPEAT_EVENT_RATE = 0.1
NOISE_EVENT_RATE = 0.2
SECOND_AGE_RATE = 0.15
SEX_FLIP_RATE = 0.1


def level3_codes(n_codes: int) -> List[str]:
    """A00, A01, ... A99, B00, ..."""
    return [f"{chr(ord('A') + i // 100)}{i % 100:02d}" for i in range(n_codes)]


def generate_records(n_patients: int, n_codes: int, n_groups: int,
                     seed: int = 0) -> Tuple[pd.DataFrame, pd.DataFrame]:
    """
    Generate event records with planted similar-patient groups.

    Patients are dealt to groups round-robin. Every group owns a block of
    core codes, a base age and a dominant sex; each patient gets all core
    codes of its group, with occasional repeats, a noise code, a second age
    or the other sex.

    Returns:
        (records, groups): records has columns patient_id, sex, age,
        event_code (one row per event); groups has patient_id, group
        (1-based planted group)

    Raises:
        ParameterError: a count below 1 or more codes than can be named
    """
    for name, value in (('n_patients', n_patients), ('n_codes', n_codes), ('n_groups', n_groups)):
        if value < 1:
            raise ParameterError(f"{name} must be >= 1, got {value}")
    if n_codes > MAX_CODES:
        raise ParameterError(f"n_codes must be <= {MAX_CODES}, got {n_codes}")

    rng = np.random.default_rng(seed)
    codes = level3_codes(n_codes)
    block = max(1, min(MAX_CORE_CODES, n_codes // n_groups))

    cores = [[codes[(g * block + j) % n_codes] for j in range(block)] for g in range(n_groups)]
    base_ages = [(3 + 5 * g) % (MAX_AGE + 1) for g in range(n_groups)]
    dominant_sex = [1 if g % 2 == 0 else 2 for g in range(n_groups)]

    record_rows = []
    group_rows = []
    for i in range(n_patients):
        g = i % n_groups
        patient_id = f"P{i + 1:05d}"

        sex = dominant_sex[g]
        if rng.random() < SEX_FLIP_RATE:
            sex = 3 - sex

        ages = [base_ages[g]]
        if rng.random() < SECOND_AGE_RATE:
            ages.append(base_ages[g] + 1 if base_ages[g] < MAX_AGE else base_ages[g] - 1)

        events = []
        for code in cores[g]:
            events.append(code)
            if rng.random() < REPEAT_EVENT_RATE:
                events.append(code)
        others = [c for c in codes if c not in cores[g]]
        if others and rng.random() < NOISE_EVENT_RATE:
            events.append(others[int(rng.integers(len(others)))])

        for k, code in enumerate(events):
            suffix = CODE_SUFFIXES[int(rng.integers(len(CODE_SUFFIXES)))]
            record_rows.append({
                'patient_id': patient_id,
                'sex': sex,
                'age': ages[k % len(ages)],
                'event_code': code + suffix,
            })
        group_rows.append({'patient_id': patient_id, 'group': g + 1})

    records = pd.DataFrame(record_rows, columns=['patient_id', 'sex', 'age', 'event_code'])
    groups = pd.DataFrame(group_rows, columns=['patient_id', 'group'])
    logger.info(f"Generated {len(records)} events for {n_patients} patients in {n_groups} planted group(s)")
    return records, groups


def groups_path_for(records_path: str) -> str:
    """records.csv -> records_groups.csv"""
    stem, _ = os.path.splitext(records_path)
    return f"{stem}_groups.csv"


def write_synthetic(records: pd.DataFrame, groups: pd.DataFrame, path: str) -> Tuple[str, str]:
    """Write records to path and the planted groups beside it. Returns both paths."""
    folder = os.path.dirname(path)
    if folder:
        os.makedirs(folder, exist_ok=True)
    records.to_csv(path, index=False, lineterminator='\n')
    group_path = groups_path_for(path)
    groups.to_csv(group_path, index=False, lineterminator='\n')
    return path, group_path
