"""
Tests for tree edit distance.

Small trees are checked against an exhaustive search over edit mappings:
one-to-one node pairings that keep both preorder and postorder relations,
costing one per relabeled pair and one per unmapped node of either tree.
"""

import random

import pytest

from patient_similarity.edit_distance import UNIT_COST, EditCostModel, ted, ted_norm
from patient_similarity.tree_model import parse_tree, tree_size


def _numbered(tree):
    """(label, preorder index, postorder index) per node"""
    nodes = []
    counter = {'post': 0}

    def walk(current):
        entry = [current.label, len(nodes), None]
        nodes.append(entry)
        for child in current.children:
            walk(child)
        entry[2] = counter['post']
        counter['post'] += 1

    walk(tree)
    return [tuple(n) for n in nodes]


def brute_force_ted(first, second):
    a, b = _numbered(first), _numbered(second)
    best = [len(a) + len(b)]
    used = [False] * len(b)
    mapping = []

    def consistent(i, j):
        for k, l in mapping:
            if (a[k][1] < a[i][1]) != (b[l][1] < b[j][1]):
                return False
            if (a[k][2] < a[i][2]) != (b[l][2] < b[j][2]):
                return False
        return True

    def search(i, partial):
        if partial >= best[0]:
            return
        if i == len(a):
            total = partial + len(b) - len(mapping)
            best[0] = min(best[0], total)
            return
        for j in range(len(b)):
            if not used[j] and consistent(i, j):
                used[j] = True
                mapping.append((i, j))
                search(i + 1, partial + (a[i][0] != b[j][0]))
                mapping.pop()
                used[j] = False
        search(i + 1, partial + 1)

    search(0, 0)
    return best[0]


# ============================================
# Cost model
# ============================================

class TestCostModel:
    """Unit costs"""

    def test_unit_costs(self):
        assert UNIT_COST == EditCostModel(insert=1, delete=1, relabel_changed=1)
        assert UNIT_COST.relabel('a', 'a') == 0
        assert UNIT_COST.relabel('a', 'b') == 1


# ============================================
# Worked examples
# ============================================

class TestExamples:
    """Hand-checked distances"""

    @pytest.mark.parametrize("first, second, expected", [
        ("{a}", "{a}", 0),
        ("{a{b}}", "{a{c}}", 1),
        ("{a}", "{a{b}}", 1),
        ("{a}", "{b}", 1),
        ("{a{b}{c}}", "{a{c}{b}}", 2),
        ("{a{b{c}}}", "{a{c}}", 1),
        ("{f{d{a}{c{b}}}{e}}", "{f{c{d{a}{b}}}{e}}", 2),
    ])
    def test_distance(self, first, second, expected):
        assert ted(parse_tree(first), parse_tree(second)) == expected

    def test_root_relabel_allowed(self):
        assert ted(parse_tree("{x{b}{c}}"), parse_tree("{y{b}{c}}")) == 1

    def test_normalized(self):
        assert ted_norm(parse_tree("{a{b}}"), parse_tree("{a{c}}")) == pytest.approx(0.25, abs=1e-12)
        assert ted_norm(parse_tree("{a}"), parse_tree("{b}")) == pytest.approx(0.5, abs=1e-12)
        tree = parse_tree("{patient{sex:1}{age:15}{M26}}")
        assert ted_norm(tree, tree) == 0.0

    def test_patient_trees(self):
        first = parse_tree("{patient{sex:1}{age:15}{M26}}")
        second = parse_tree("{patient{sex:2}{age:11}{M26}{ZL5}}")
        assert ted(first, second) == 3


# ============================================
# Exhaustive oracle
# ============================================

class TestBruteForce:
    """Dynamic program against exhaustive mapping search"""

    def test_oracle_agrees_on_examples(self):
        assert brute_force_ted(parse_tree("{a{b}{c}}"), parse_tree("{a{c}{b}}")) == 2
        assert brute_force_ted(parse_tree("{a}"), parse_tree("{a{b}}")) == 1

    def test_small_tree_corpus(self, random_tree):
        rng = random.Random(42)
        corpus = [random_tree(rng, 6) for _ in range(40)]
        for i, first in enumerate(corpus):
            for second in corpus[i:]:
                assert ted(first, second) == brute_force_ted(first, second), \
                    f"{first} vs {second}"


# ============================================
# Metric properties
# ============================================

class TestMetricAxioms:
    """Non-negativity, identity, symmetry, triangle inequality"""

    def test_axioms_on_random_triples(self, random_tree):
        rng = random.Random(99)
        for _ in range(500):
            a, b, c = (random_tree(rng, 12) for _ in range(3))
            ab, ba = ted(a, b), ted(b, a)
            assert ab >= 0
            assert ab == ba
            assert (ab == 0) == (a == b)
            assert ted(a, c) <= ab + ted(b, c)

    def test_upper_bound(self, random_tree):
        rng = random.Random(8)
        for _ in range(200):
            a, b = random_tree(rng, 12), random_tree(rng, 12)
            assert ted(a, b) <= tree_size(a) + tree_size(b)
            assert 0.0 <= ted_norm(a, b) < 1.0


# ============================================
# Deep trees
# ============================================

class TestDeepTrees:
    """Chains deeper than the interpreter recursion limit"""

    def test_chain_against_single_node(self):
        depth = 3000
        chain = parse_tree("{a" * depth + "}" * depth)
        single = parse_tree("{a}")
        assert ted(chain, single) == depth - 1
        assert ted(single, chain) == depth - 1
        assert ted_norm(chain, single) == pytest.approx((depth - 1) / (depth + 1), abs=1e-12)
