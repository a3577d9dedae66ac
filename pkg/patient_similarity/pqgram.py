"""
PQ-Gram Distance

Approximate tree distance built from pq-gram profiles: the bag of label
tuples of every fixed-shape subtree (a stem of p ancestors-to-node labels
followed by a base of q consecutive child labels) of the tree extended
with dummy "*" nodes.

Usage:
    from patient_similarity.pqgram import PQParams, pqgram_profile, pqgram_distance_norm

    params = PQParams(p=1, q=3)
    profile = pqgram_profile(tree, params)
    pqgram_distance_norm(tree_a, tree_b, params)   # 0.0 .. 1.0
"""

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Deque, Optional, Tuple
import logging

import pandas as pd

from .errors import ParameterError, ReservedLabelError
from .tree_model import LabeledTree, preorder

logger = logging.getLogger(__name__)

DUMMY_LABEL = '*'

Gram = Tuple[str, ...]


@dataclass(frozen=True)
class PQParams:
    """Stem length p and base length q, both at least 1"""
    p: int = 1
    q: int = 3

    def __post_init__(self):
        for name in ('p', 'q'):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, int) or value < 1:
                raise ParameterError(f"pq-gram parameter {name} must be an integer >= 1, got {value!r}")

    @property
    def label(self) -> str:
        return f"{self.p},{self.q}-Grams"


@dataclass(frozen=True)
class PQGramProfile:
    """
    Bag of pq-gram label tuples.

    grams maps each (p+q)-tuple to its multiplicity (always >= 1).
    """
    grams: Counter = field(hash=False)
    p: int
    q: int

    @property
    def size(self) -> int:
        """Bag cardinality |I|"""
        return sum(self.grams.values())

    def __len__(self) -> int:
        return self.size

    def _check_compatible(self, other: 'PQGramProfile'):
        if (self.p, self.q) != (other.p, other.q):
            raise ParameterError(
                f"profiles built with different parameters: ({self.p},{self.q}) vs ({other.p},{other.q})"
            )

    def union_size(self, other: 'PQGramProfile') -> int:
        """|I1 (+) I2|: multiplicities summed"""
        self._check_compatible(other)
        return self.size + other.size

    def intersection_size(self, other: 'PQGramProfile') -> int:
        """Per-tuple minimum multiplicity, summed"""
        self._check_compatible(other)
        small, large = (self.grams, other.grams) if len(self.grams) <= len(other.grams) else (other.grams, self.grams)
        return sum(min(count, large[gram]) for gram, count in small.items() if gram in large)


def _check_reserved(tree: LabeledTree):
    for n in preorder(tree):
        if n.label == DUMMY_LABEL:
            raise ReservedLabelError(f"tree contains the reserved dummy label {DUMMY_LABEL!r}")


def extend_tree(tree: LabeledTree, params: PQParams) -> LabeledTree:
    """
    Build the (p, q)-extended tree.

    p-1 dummy ancestors go above the root, q-1 dummy children before the
    first and after the last child of every non-leaf, and q dummy children
    under every leaf.

    Raises:
        ReservedLabelError: the tree already uses "*"
    """
    _check_reserved(tree)
    q = params.q
    pad = tuple(LabeledTree(DUMMY_LABEL) for _ in range(q - 1))

    # frames: [original node, extended children built so far]
    root = None
    stack = [[tree, []]]
    while stack:
        current, built = stack[-1]
        if len(built) < len(current.children):
            stack.append([current.children[len(built)], []])
            continue
        stack.pop()
        if current.is_leaf:
            extended = LabeledTree(current.label, tuple(LabeledTree(DUMMY_LABEL) for _ in range(q)))
        else:
            extended = LabeledTree(current.label, pad + tuple(built) + pad)
        if stack:
            stack[-1][1].append(extended)
        else:
            root = extended

    for _ in range(params.p - 1):
        root = LabeledTree(DUMMY_LABEL, (root,))
    return root


def pqgram_profile(tree: LabeledTree, params: PQParams) -> PQGramProfile:
    """
    Collect the pq-gram profile without materializing the extended tree.

    The stem and base are kept in fixed-size shift registers that start
    filled with dummies, so the dummy nodes of the extended tree appear
    in the tuples without being built.

    Raises:
        ReservedLabelError: the tree already uses "*"
    """
    _check_reserved(tree)
    p, q = params.p, params.q
    grams: Counter = Counter()

    def enter(n: LabeledTree, ancestors: Deque[str]) -> Optional[list]:
        stem = deque(ancestors, maxlen=p)
        stem.append(n.label)
        base = deque([DUMMY_LABEL] * q, maxlen=q)
        if n.is_leaf:
            grams[tuple(stem) + tuple(base)] += 1
            return None
        return [n, stem, base, 0]

    # frames: [node, stem register, base register, next child index]
    stack = [enter(tree, deque([DUMMY_LABEL] * p, maxlen=p))]
    if stack[0] is None:
        stack = []
    while stack:
        frame = stack[-1]
        current, stem, base, i = frame
        if i < len(current.children):
            frame[3] += 1
            child = current.children[i]
            base.append(child.label)
            grams[tuple(stem) + tuple(base)] += 1
            child_frame = enter(child, stem)
            if child_frame is not None:
                stack.append(child_frame)
            continue
        stack.pop()
        for _ in range(q - 1):
            base.append(DUMMY_LABEL)
            grams[tuple(stem) + tuple(base)] += 1

    return PQGramProfile(grams=grams, p=p, q=q)


# ========================================
# Distances
# ========================================

def profile_distance(first: PQGramProfile, second: PQGramProfile) -> int:
    """|I1 (+) I2| - 2 |I1 (*) I2|"""
    return first.union_size(second) - 2 * first.intersection_size(second)


def profile_distance_norm(first: PQGramProfile, second: PQGramProfile) -> float:
    """Distance over |I1 (+) I2| - |I1 (*) I2|; 0.0 for identical profiles"""
    union = first.union_size(second)
    intersection = first.intersection_size(second)
    denominator = union - intersection
    if denominator == 0:
        return 0.0
    return (union - 2 * intersection) / denominator


def pqgram_distance(first: LabeledTree, second: LabeledTree, params: PQParams) -> int:
    return profile_distance(pqgram_profile(first, params), pqgram_profile(second, params))


def pqgram_distance_norm(first: LabeledTree, second: LabeledTree, params: PQParams) -> float:
    return profile_distance_norm(pqgram_profile(first, params), pqgram_profile(second, params))


# ========================================
# Export
# ========================================

def profile_to_frame(profile: PQGramProfile) -> pd.DataFrame:
    """One row per distinct tuple: label_1..label_{p+q}, multiplicity"""
    width = profile.p + profile.q
    columns = [f"label_{i}" for i in range(1, width + 1)]
    rows = [list(gram) + [count] for gram, count in sorted(profile.grams.items())]
    return pd.DataFrame(rows, columns=columns + ['multiplicity'])


def export_profile(profile: PQGramProfile, path: str) -> str:
    """Write the profile as CSV. Returns the path."""
    profile_to_frame(profile).to_csv(path, index=False, lineterminator='\n')
    logger.info(f"Wrote {len(profile.grams)} distinct pq-grams to {path}")
    return path
