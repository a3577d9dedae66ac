"""
Patient Record Ingestion

Loads patient event records (one row per event occurrence) and turns them
into the two representations the metrics work on:

    * one ordered LabeledTree per patient (tree metrics)
    * a frequency table of event counts, age flags and sex (vector metrics)

Input columns: patient_id, sex, age, event_code. Event codes are cut to
their first three characters (level-3 read codes) on load.

Usage:
    from patient_similarity.ingestion import load_records, build_tree, build_frequency_table

    dataset = load_records('records.csv', strict=True)
    trees = [build_tree(p) for p in dataset.patients]
    table = build_frequency_table(dataset)
"""

from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Tuple, Union
import io
import logging
import os

import numpy as np
import pandas as pd

from .errors import IngestError, UnknownPatientError
from .tree_model import LabeledTree

logger = logging.getLogger(__name__)

REQUIRED_COLUMNS = ('patient_id', 'sex', 'age', 'event_code')
VALID_SEX_CODES = (1, 2)  # 1 = male, 2 = female
ROOT_LABEL = 'patient'
CODE_LEVEL = 3
RESERVED_CODES = ('*',)


@dataclass(frozen=True)
class EventRecord:
    """One validated input row"""
    patient_id: str
    sex: int
    age: int
    event_code: str


@dataclass(frozen=True)
class PatientEntry:
    """
    All records of one patient.

    ages are distinct and ascending; events is the sorted bag of level-3
    codes (a code appears once per occurrence).
    """
    patient_id: str
    sex: int
    ages: Tuple[int, ...]
    events: Tuple[str, ...]


@dataclass(frozen=True)
class IngestIssue:
    """A row skipped in lenient mode"""
    line: int
    message: str


@dataclass(frozen=True)
class PatientDataset:
    """Patients ordered by patient_id, plus any rows skipped while loading"""
    patients: Tuple[PatientEntry, ...]
    issues: Tuple[IngestIssue, ...] = ()

    def __len__(self) -> int:
        return len(self.patients)

    @property
    def ids(self) -> Tuple[str, ...]:
        return tuple(p.patient_id for p in self.patients)

    def get(self, patient_id: str) -> PatientEntry:
        for p in self.patients:
            if p.patient_id == patient_id:
                return p
        raise UnknownPatientError(f"unknown patient id: {patient_id}")


@dataclass(frozen=True)
class FrequencyTable:
    """
    Patients x features matrix.

    Columns are the sorted event codes, then "age:<a>" for every sorted age,
    then "sex". Event cells count occurrences, age cells are 0/1 flags and
    the sex cell holds the sex code.
    """
    ids: Tuple[str, ...]
    columns: Tuple[str, ...]
    values: np.ndarray = field(compare=False)
    n_event_columns: int = 0

    def row(self, patient_id: str) -> np.ndarray:
        return self.values[self.ids.index(patient_id)]

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, index=list(self.ids), columns=list(self.columns))
        frame.index.name = 'patient_id'
        return frame


# ========================================
# Loading
# ========================================

def truncate_code(code: str) -> str:
    """First three characters of a read code; shorter codes are unchanged"""
    return code[:CODE_LEVEL]


def _read_frame(source: Union[str, io.IOBase]) -> pd.DataFrame:
    """Read CSV (or Excel / ODS when given such a path) as all-string columns"""
    if isinstance(source, str):
        if not os.path.exists(source):
            raise FileNotFoundError(source)
        lowered = source.lower()
        if lowered.endswith('.xlsx') or lowered.endswith('.xls'):
            return pd.read_excel(source, engine='openpyxl', dtype=str, keep_default_na=False)
        if lowered.endswith('.ods'):
            return pd.read_excel(source, engine='odf', dtype=str, keep_default_na=False)
    try:
        return pd.read_csv(source, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise IngestError("input is empty; expected header patient_id,sex,age,event_code", line=1)
    except pd.errors.ParserError as e:
        raise IngestError(f"malformed CSV: {e}")


def _parse_row(row: Dict[str, str]) -> EventRecord:
    patient_id = str(row['patient_id']).strip()
    if not patient_id:
        raise ValueError("empty patient_id")

    sex_text = str(row['sex']).strip()
    try:
        sex = int(sex_text)
    except ValueError:
        raise ValueError(f"sex must be 1 or 2, got {sex_text!r}")
    if sex not in VALID_SEX_CODES:
        raise ValueError(f"sex must be 1 or 2, got {sex_text!r}")

    age_text = str(row['age']).strip()
    try:
        age = int(age_text)
    except ValueError:
        raise ValueError(f"age must be a non-negative integer, got {age_text!r}")
    if age < 0:
        raise ValueError(f"age must be a non-negative integer, got {age_text!r}")

    code = str(row['event_code']).strip()
    if not code:
        raise ValueError("empty event_code")
    if '{' in code or '}' in code:
        raise ValueError(f"event_code may not contain braces: {code!r}")
    code = truncate_code(code)
    if code in RESERVED_CODES:
        raise ValueError(f"event_code {code!r} is reserved")

    return EventRecord(patient_id=patient_id, sex=sex, age=age, event_code=code)


def load_records(source: Union[str, io.IOBase], strict: bool = True) -> PatientDataset:
    """
    Load event records and group them by patient.

    Duplicate rows are kept: they are repeat events and raise the counts.
    Line numbers in errors count the header as line 1 and assume the file
    has no blank lines (pandas skips them).

    Args:
        source: path (.csv, .xlsx, .ods) or an open text stream with CSV
        strict: abort on the first bad row (True) or skip and tally it

    Returns:
        PatientDataset sorted by patient_id

    Raises:
        IngestError: missing columns, or a bad row in strict mode
        FileNotFoundError: the path does not exist
    """
    frame = _read_frame(source)
    frame.columns = [str(c).strip() for c in frame.columns]

    missing = [c for c in REQUIRED_COLUMNS if c not in frame.columns]
    if missing:
        raise IngestError(f"missing column(s): {', '.join(missing)}", line=1)

    sexes: Dict[str, int] = {}
    ages: Dict[str, set] = {}
    events: Dict[str, List[str]] = {}
    issues: List[IngestIssue] = []

    for offset, row in enumerate(frame[list(REQUIRED_COLUMNS)].to_dict('records')):
        line = offset + 2  # header is line 1
        try:
            record = _parse_row(row)
            known_sex = sexes.get(record.patient_id)
            if known_sex is not None and known_sex != record.sex:
                raise ValueError(
                    f"sex {record.sex} conflicts with sex {known_sex} on earlier rows for {record.patient_id}"
                )
        except ValueError as e:
            if strict:
                raise IngestError(str(e), line=line)
            issues.append(IngestIssue(line=line, message=str(e)))
            continue

        sexes[record.patient_id] = record.sex
        ages.setdefault(record.patient_id, set()).add(record.age)
        events.setdefault(record.patient_id, []).append(record.event_code)

    if issues:
        logger.warning(f"Skipped {len(issues)} invalid row(s); first at line {issues[0].line}: {issues[0].message}")

    patients = tuple(
        PatientEntry(
            patient_id=pid,
            sex=sexes[pid],
            ages=tuple(sorted(ages[pid])),
            events=tuple(sorted(events[pid])),
        )
        for pid in sorted(sexes)
    )
    logger.info(f"Loaded {len(patients)} patients ({sum(len(p.events) for p in patients)} events)")
    return PatientDataset(patients=patients, issues=tuple(issues))


def load_code_descriptions(path: str) -> Dict[str, str]:
    """
    Optional read-code lookup file with columns code, description.

    Codes are truncated to level 3; the first description of a level-3
    code wins.
    """
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    frame.columns = [str(c).strip().lower() for c in frame.columns]
    if 'code' not in frame.columns or 'description' not in frame.columns:
        raise IngestError("description file needs columns code,description", line=1)
    descriptions: Dict[str, str] = {}
    for code, description in zip(frame['code'], frame['description']):
        code = truncate_code(code.strip())
        if code and code not in descriptions:
            descriptions[code] = description.strip()
    return descriptions


# ========================================
# Representations
# ========================================

def build_tree(patient: PatientEntry) -> LabeledTree:
    """
    Flat patient tree: root "patient", then "sex:<code>", one "age:<a>"
    node per distinct age (ascending) and one leaf per event occurrence in
    sorted order.
    """
    children = [LabeledTree(f"sex:{patient.sex}")]
    children.extend(LabeledTree(f"age:{age}") for age in patient.ages)
    children.extend(LabeledTree(code) for code in patient.events)
    return LabeledTree(ROOT_LABEL, tuple(children))


def build_frequency_table(dataset: PatientDataset) -> FrequencyTable:
    """
    Frequency table over every level-3 code and age present in the dataset.

    Raises:
        IngestError: the dataset has no patients
    """
    if len(dataset) == 0:
        raise IngestError("cannot build a frequency table from an empty dataset")

    codes = sorted({code for p in dataset.patients for code in p.events})
    all_ages = sorted({age for p in dataset.patients for age in p.ages})
    code_index = {code: i for i, code in enumerate(codes)}
    age_index = {age: len(codes) + i for i, age in enumerate(all_ages)}
    width = len(codes) + len(all_ages) + 1

    values = np.zeros((len(dataset), width), dtype=np.int64)
    for row, patient in enumerate(dataset.patients):
        for code, count in Counter(patient.events).items():
            values[row, code_index[code]] = count
        for age in patient.ages:
            values[row, age_index[age]] = 1
        values[row, width - 1] = patient.sex

    columns = tuple(codes) + tuple(f"age:{age}" for age in all_ages) + ('sex',)
    return FrequencyTable(ids=dataset.ids, columns=columns, values=values, n_event_columns=len(codes))


def dataset_frame(dataset: PatientDataset) -> pd.DataFrame:
    """One row per patient: id, sex, space-separated ages and events, event count"""
    return pd.DataFrame({
        'patient_id': [p.patient_id for p in dataset.patients],
        'sex': [p.sex for p in dataset.patients],
        'ages': [' '.join(str(a) for a in p.ages) for p in dataset.patients],
        'events': [' '.join(p.events) for p in dataset.patients],
        'n_events': [len(p.events) for p in dataset.patients],
    })
