"""
Ordered Labeled Trees

Immutable ordered trees with string labels, plus the bracket notation used
to store them ("{label child1 child2 ...}", one tree per line in .trees
files). Shared by the pq-gram and tree edit distance modules.

Usage:
    from patient_similarity.tree_model import parse_tree, serialize_tree

    tree = parse_tree("{patient{sex:1}{age:15}{M26}}")
    tree_size(tree)          # 4
    serialize_tree(tree)     # "{patient{sex:1}{age:15}{M26}}"
"""

from dataclasses import dataclass
from typing import Iterable, Iterator, List, Tuple
import os

from .errors import TreeParseError


@dataclass(frozen=True)
class LabeledTree:
    """
    A node and its ordered children.

    Equality is structural: two trees are equal when labels and child
    sequences match recursively.
    """
    label: str
    children: Tuple['LabeledTree', ...] = ()

    def __post_init__(self):
        if not isinstance(self.label, str) or not self.label:
            raise ValueError("tree label must be a non-empty string")
        if '{' in self.label or '}' in self.label:
            raise ValueError(f"tree label may not contain braces: {self.label!r}")
        if self.label != self.label.strip():
            raise ValueError(f"tree label may not have surrounding whitespace: {self.label!r}")
        # accept any iterable of children but always store a tuple
        if not isinstance(self.children, tuple):
            object.__setattr__(self, 'children', tuple(self.children))
        for child in self.children:
            if not isinstance(child, LabeledTree):
                raise TypeError("children must be LabeledTree instances")

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def __str__(self) -> str:
        return serialize_tree(self)


def node(label: str, *children: LabeledTree) -> LabeledTree:
    """Shorthand constructor: node('a', node('b'), node('c'))"""
    return LabeledTree(label, tuple(children))


# ========================================
# Bracket notation
# ========================================

def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode('utf-8'))


def parse_tree(text: str) -> LabeledTree:
    """
    Parse one tree in bracket notation.

    Labels run up to the next brace and are whitespace-trimmed. Whitespace
    is allowed between sibling subtrees and around the whole tree; anything
    else outside a label is an error.

    Raises:
        TreeParseError: unbalanced braces, empty label or trailing garbage
    """
    i = 0
    n = len(text)

    def skip_ws(pos: int) -> int:
        while pos < n and text[pos].isspace():
            pos += 1
        return pos

    i = skip_ws(i)
    if i >= n or text[i] != '{':
        raise TreeParseError("expected '{'", _byte_offset(text, i))

    # each frame: [label, children list]
    stack: List[list] = []
    root = None

    while i < n:
        ch = text[i]
        if ch == '{':
            if root is not None:
                raise TreeParseError("trailing garbage after tree", _byte_offset(text, i))
            start = i + 1
            j = start
            while j < n and text[j] not in '{}':
                j += 1
            label = text[start:j].strip()
            if not label:
                raise TreeParseError("empty label", _byte_offset(text, i))
            stack.append([label, []])
            i = j
        elif ch == '}':
            if not stack:
                raise TreeParseError("unbalanced '}'", _byte_offset(text, i))
            label, children = stack.pop()
            finished = LabeledTree(label, tuple(children))
            if stack:
                stack[-1][1].append(finished)
            else:
                root = finished
            i = skip_ws(i + 1)
            if i < n and text[i] not in '{}':
                raise TreeParseError("unexpected text between subtrees", _byte_offset(text, i))
        else:
            raise TreeParseError(f"unexpected character {ch!r}", _byte_offset(text, i))

    if stack:
        raise TreeParseError("unbalanced '{': tree not closed", _byte_offset(text, n))
    if root is None:
        raise TreeParseError("no tree found", _byte_offset(text, n))
    return root


def serialize_tree(tree: LabeledTree) -> str:
    """Canonical bracket notation; no whitespace is emitted between nodes"""
    parts: List[str] = []
    # (node, closing) pairs; iterative so deep trees do not hit the recursion limit
    stack = [(tree, False)]
    while stack:
        current, closing = stack.pop()
        if closing:
            parts.append('}')
            continue
        parts.append('{' + current.label)
        stack.append((current, True))
        for child in reversed(current.children):
            stack.append((child, False))
    return ''.join(parts)


# ========================================
# Traversals
# ========================================

def preorder(tree: LabeledTree) -> Iterator[LabeledTree]:
    """Nodes in preorder (parent before children, left to right)"""
    stack = [tree]
    while stack:
        current = stack.pop()
        yield current
        stack.extend(reversed(current.children))


def postorder(tree: LabeledTree) -> Iterator[LabeledTree]:
    """Nodes in postorder (children left to right, then parent)"""
    stack = [(tree, False)]
    while stack:
        current, expanded = stack.pop()
        if expanded or current.is_leaf:
            yield current
            continue
        stack.append((current, True))
        for child in reversed(current.children):
            stack.append((child, False))


def tree_size(tree: LabeledTree) -> int:
    """Number of nodes, root included"""
    return sum(1 for _ in preorder(tree))


def labels(tree: LabeledTree) -> List[str]:
    return [n.label for n in preorder(tree)]


# ========================================
# .trees files
# ========================================

def read_trees(path: str) -> List[LabeledTree]:
    """
    Read a .trees file: one tree per non-blank line.

    Raises:
        TreeParseError: with the 1-based line number in the message
    """
    trees = []
    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                trees.append(parse_tree(line))
            except TreeParseError as e:
                raise TreeParseError(f"{os.path.basename(path)} line {line_no}: {e.reason}", e.offset) from e
    return trees


def write_trees(trees: Iterable[LabeledTree], path: str) -> str:
    """Write trees in canonical form, one per line. Returns the path."""
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for tree in trees:
            f.write(serialize_tree(tree) + '\n')
    return path
