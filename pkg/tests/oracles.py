"""Independent brute-force oracles the implementation is measured against.

Everything here is deliberately naive: exhaustive permutation search for
assignment problems and exhaustive Tai-mapping enumeration for the tree
edit distance. None of it shares code with the library paths it checks.
"""

from itertools import permutations

import numpy as np

from gridtab.teds import TedsTree, normalized_levenshtein


def brute_force_assignment(cost: np.ndarray) -> float:
    """Minimum assignment cost by trying every permutation."""
    cost = np.asarray(cost, dtype=float)
    r, c = cost.shape
    if r <= c:
        return min(sum(cost[i, p[i]] for i in range(r)) for p in permutations(range(c), r))
    return min(sum(cost[p[j], j] for j in range(c)) for p in permutations(range(r), c))


def _preorder(root):
    nodes = []

    def walk(node, ancestors):
        idx = len(nodes)
        nodes.append((node, tuple(ancestors)))
        for child in node.children:
            walk(child, ancestors + (idx,))

    walk(root, ())
    return nodes


def substitution_cost(a: TedsTree, b: TedsTree, struct_only: bool) -> float:
    if a.tag != b.tag:
        return 1.0
    if a.tag == "td":
        if a.rowspan != b.rowspan or a.colspan != b.colspan:
            return 1.0
        return 0.0 if struct_only else normalized_levenshtein(a.content, b.content)
    return 0.0


def brute_force_ted(tree_a: TedsTree, tree_b: TedsTree, struct_only: bool = False) -> float:
    """Tree edit distance by enumerating every valid ordered mapping.

    A mapping must be one-to-one and preserve both the ancestor relation
    and the left-to-right (preorder) order; unmapped nodes cost one
    deletion or insertion each.
    """
    na, nb = _preorder(tree_a), _preorder(tree_b)
    A, B = len(na), len(nb)
    best = [float("inf")]

    def is_ancestor(nodes, i, j):
        return i in nodes[j][1]

    def extend(i, pairs, cost):
        if cost >= best[0]:
            return
        if i == A:
            total = cost + (A - len(pairs)) + (B - len(pairs))
            best[0] = min(best[0], total)
            return
        extend(i + 1, pairs, cost)  # leave node i unmapped
        used = {pj for _, pj in pairs}
        for j in range(B):
            if j in used:
                continue
            valid = all(
                (pi < i) == (pj < j) and is_ancestor(na, pi, i) == is_ancestor(nb, pj, j)
                for pi, pj in pairs
            )
            if valid:
                extend(i + 1, pairs + [(i, j)], cost + substitution_cost(na[i][0], nb[j][0], struct_only))

    extend(0, [], 0.0)
    return best[0]


def random_tree(rng: np.random.Generator, max_nodes: int) -> TedsTree:
    """Small random tree over the table tag alphabet, any shape."""
    budget = [int(rng.integers(1, max_nodes + 1))]
    tags = ("table", "tr", "td")

    def build() -> TedsTree:
        tag = tags[rng.integers(0, 3)]
        budget[0] -= 1
        kids = []
        while budget[0] > 0 and tag != "td" and rng.random() < 0.55:
            kids.append(build())
        content = None
        if tag == "td" and rng.random() < 0.6:
            content = "".join(chr(97 + rng.integers(0, 4)) for _ in range(rng.integers(0, 5)))
        return TedsTree(
            tag,
            colspan=int(rng.integers(1, 3)),
            rowspan=int(rng.integers(1, 3)),
            content=content,
            children=tuple(kids),
        )

    return build()
