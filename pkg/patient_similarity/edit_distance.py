"""
Tree Edit Distance

Exact ordered tree edit distance with unit-cost insert, delete and relabel,
computed with the keyroot dynamic program over postorder numberings
(forest-distance recurrence), plus the size-normalized variant.
"""

from dataclasses import dataclass
from typing import List

from .tree_model import LabeledTree, tree_size


@dataclass(frozen=True)
class EditCostModel:
    """Costs of the three edit operations"""
    insert: int = 1
    delete: int = 1
    relabel_changed: int = 1

    def relabel(self, a: str, b: str) -> int:
        return 0 if a == b else self.relabel_changed


UNIT_COST = EditCostModel()


class _AnnotatedTree:
    """
    Postorder view of a tree used by the dynamic program.

    labels[i]   label of the i-th node in postorder
    lmld[i]     postorder index of the leftmost leaf descendant of node i
    keyroots    nodes with no ancestor sharing their leftmost leaf, ascending
    """

    def __init__(self, tree: LabeledTree):
        self.labels: List[str] = []
        self.lmld: List[int] = []

        # subtrees may be shared objects, so positions come from the walk itself
        # frames: [node, next child index, leftmost leaf of the first child]
        stack = [[tree, 0, None]]
        while stack:
            frame = stack[-1]
            current, i, leftmost = frame
            if i < len(current.children):
                frame[1] += 1
                stack.append([current.children[i], 0, None])
                continue
            stack.pop()
            index = len(self.labels)
            self.labels.append(current.label)
            self.lmld.append(index if leftmost is None else leftmost)
            if stack and stack[-1][2] is None:
                stack[-1][2] = self.lmld[index]

        last_with_lmld = {}
        for i, leftmost in enumerate(self.lmld):
            last_with_lmld[leftmost] = i
        self.keyroots: List[int] = sorted(last_with_lmld.values())

    def __len__(self) -> int:
        return len(self.labels)


def ted(first: LabeledTree, second: LabeledTree) -> int:
    """
    Minimum number of unit-cost node insertions, deletions and relabelings
    turning the first tree into the second.
    """
    a, b = _AnnotatedTree(first), _AnnotatedTree(second)
    cost = UNIT_COST
    treedist = [[0] * len(b) for _ in range(len(a))]

    for i in a.keyroots:
        for j in b.keyroots:
            _forest_distance(a, b, i, j, treedist, cost)

    return treedist[-1][-1]


def _forest_distance(a: _AnnotatedTree, b: _AnnotatedTree, i: int, j: int,
                     treedist: List[List[int]], cost: EditCostModel):
    li, lj = a.lmld[i], b.lmld[j]
    rows, cols = i - li + 2, j - lj + 2
    # fd[x][y]: distance between forests a[li..li+x-1] and b[lj..lj+y-1]
    fd = [[0] * cols for _ in range(rows)]
    for x in range(1, rows):
        fd[x][0] = fd[x - 1][0] + cost.delete
    for y in range(1, cols):
        fd[0][y] = fd[0][y - 1] + cost.insert

    for x in range(1, rows):
        ax = li + x - 1
        for y in range(1, cols):
            by = lj + y - 1
            if a.lmld[ax] == li and b.lmld[by] == lj:
                fd[x][y] = min(
                    fd[x - 1][y] + cost.delete,
                    fd[x][y - 1] + cost.insert,
                    fd[x - 1][y - 1] + cost.relabel(a.labels[ax], b.labels[by]),
                )
                treedist[ax][by] = fd[x][y]
            else:
                p = a.lmld[ax] - li
                q = b.lmld[by] - lj
                fd[x][y] = min(
                    fd[x - 1][y] + cost.delete,
                    fd[x][y - 1] + cost.insert,
                    fd[p][q] + treedist[ax][by],
                )


def ted_norm(first: LabeledTree, second: LabeledTree) -> float:
    """Edit distance divided by the total node count of both trees"""
    return ted(first, second) / (tree_size(first) + tree_size(second))
