"""Tree-edit-distance similarity between HTML table trees.

The distance is the classic Zhang-Shasha ordered-tree edit distance with
unit insert/delete costs. Substitution costs 1 when tags differ, and for
td-td pairs 1 when rowspan/colspan differ, otherwise the normalized
character edit distance of the contents (0 in structure-only mode).

The forest DP is vectorized one row at a time: with unit insert costs the
inner minimization over the insert chain is a running prefix minimum, so
each row collapses to a handful of numpy operations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import LogicalTable

__all__ = ["TedsTree", "table_to_tree", "tree_edit_distance", "teds", "normalized_levenshtein"]

_TAG_IDS = {"table": 0, "thead": 1, "tbody": 2, "tr": 3, "td": 4}


@dataclass(frozen=True)
class TedsTree:
    """Ordered labeled tree node for table similarity scoring."""

    tag: str
    colspan: int = 1
    rowspan: int = 1
    content: str | None = None
    children: tuple["TedsTree", ...] = ()

    def __post_init__(self):
        if self.tag not in _TAG_IDS:
            raise ValueError(f"unsupported tag {self.tag!r}")
        object.__setattr__(self, "children", tuple(self.children))

    def size(self) -> int:
        return 1 + sum(child.size() for child in self.children)


def table_to_tree(table: LogicalTable, with_content: bool = True) -> TedsTree:
    """Flat table>tr>td tree; each cell sits in its anchor row."""
    rows: list[list] = [[] for _ in range(table.rows)]
    for cell in table.cells:
        rows[cell.row_start].append(cell)
    tr_nodes = []
    for row_cells in rows:
        tds = tuple(
            TedsTree(
                "td",
                colspan=cell.colspan,
                rowspan=cell.rowspan,
                content=cell.content if with_content else None,
            )
            for cell in sorted(row_cells, key=lambda c: c.col_start)
        )
        tr_nodes.append(TedsTree("tr", children=tds))
    return TedsTree("table", children=tuple(tr_nodes))


def levenshtein(a: str, b: str) -> int:
    """Plain character edit distance, iterative two-row DP."""
    if a == b:
        return 0
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[-1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def normalized_levenshtein(a: str | None, b: str | None) -> float:
    """Edit distance over max length, in [0, 1]; whitespace is trimmed."""
    a = (a or "").strip()
    b = (b or "").strip()
    if not a and not b:
        return 0.0
    return levenshtein(a, b) / max(len(a), len(b))


class _Annotated:
    """Postorder enumeration with leftmost descendants and keyroots."""

    def __init__(self, root: TedsTree):
        stack: list[tuple[TedsTree, tuple[int, ...]]] = [(root, ())]
        pstack: list[tuple[TedsTree, int, tuple[int, ...]]] = []
        j = 0
        while stack:
            node, anc = stack.pop()
            nid = j
            for child in node.children:
                stack.append((child, (nid,) + anc))
            pstack.append((node, nid, anc))
            j += 1
        lmds_map: dict[int, int] = {}
        keyroots: dict[int, int] = {}
        self.nodes: list[TedsTree] = []
        lmds: list[int] = []
        i = 0
        while pstack:
            node, nid, anc = pstack.pop()
            self.nodes.append(node)
            if not node.children:
                lmd = i
                for a in anc:
                    if a not in lmds_map:
                        lmds_map[a] = i
                    else:
                        break
            else:
                lmd = lmds_map[nid]
            lmds.append(lmd)
            keyroots[lmd] = i
            i += 1
        self.lmds = np.asarray(lmds, dtype=np.int64)
        self.keyroots = sorted(keyroots.values())


def _update_costs(a: _Annotated, b: _Annotated, struct_only: bool) -> np.ndarray:
    na, nb = len(a.nodes), len(b.nodes)
    tag_a = np.array([_TAG_IDS[n.tag] for n in a.nodes])
    tag_b = np.array([_TAG_IDS[n.tag] for n in b.nodes])
    cost = (tag_a[:, None] != tag_b[None, :]).astype(float)

    td_a = tag_a == _TAG_IDS["td"]
    td_b = tag_b == _TAG_IDS["td"]
    rs_a = np.array([n.rowspan for n in a.nodes])
    cs_a = np.array([n.colspan for n in a.nodes])
    rs_b = np.array([n.rowspan for n in b.nodes])
    cs_b = np.array([n.colspan for n in b.nodes])
    both_td = td_a[:, None] & td_b[None, :]
    span_mismatch = (rs_a[:, None] != rs_b[None, :]) | (cs_a[:, None] != cs_b[None, :])
    cost[both_td & span_mismatch] = 1.0
    if not struct_only:
        for i, j in zip(*np.nonzero(both_td & ~span_mismatch)):
            cost[i, j] = normalized_levenshtein(a.nodes[i].content, b.nodes[j].content)
    return cost


def tree_edit_distance(tree_a: TedsTree, tree_b: TedsTree, struct_only: bool = False) -> float:
    """Exact ordered-tree edit distance under the table cost model.

    Keyroot pairs are processed in four groups so that the abundant
    single-node forests (leaf keyroots) batch into whole-array numpy
    operations instead of thousands of vanishingly small DPs:

    1. leaf x leaf pairs close-form: min(substitution, delete + insert);
    2. leaf-A x big-B, one DP row vectorized across all A leaves;
    3. big-A x leaf-B, one DP column vectorized across all B leaves;
    4. big x big with the classic row loop, the insert chain collapsed
       to a prefix minimum (valid because insert cost is the unit).

    Every group only reads subtree distances of strictly smaller keyroot
    pairs, all of which were produced by an earlier group or iteration.
    """
    a, b = _Annotated(tree_a), _Annotated(tree_b)
    update = _update_costs(a, b, struct_only)
    al, bl = a.lmds, b.lmds
    treedists = np.zeros((len(a.nodes), len(b.nodes)))

    akr = np.asarray(a.keyroots)
    bkr = np.asarray(b.keyroots)
    a_leaf = akr[al[akr] == akr]
    a_big = akr[al[akr] != akr]
    b_leaf = bkr[bl[bkr] == bkr]
    b_big = bkr[bl[bkr] != bkr]

    if len(a_leaf) and len(b_leaf):
        ix = np.ix_(a_leaf, b_leaf)
        treedists[ix] = np.minimum(update[ix], 2.0)

    if len(a_leaf):
        for j in b_big:
            n = j - bl[j] + 2
            joff = bl[j] - 1
            yj = np.arange(joff + 1, joff + n)
            bl_eq = bl[yj] == bl[j]
            q_cols = bl[yj] - 1 - joff
            y = np.arange(1.0, n)
            diag = (y - 1.0) + update[np.ix_(a_leaf, yj)]
            other = q_cols + treedists[np.ix_(a_leaf, yj)]
            cand = np.minimum(y + 1.0, np.where(bl_eq, diag, other))
            chain = cand - y
            chain[:, 0] = np.minimum(chain[:, 0], 1.0)  # k=0 term: fd[1][0] = 1
            fd1 = np.minimum.accumulate(chain, axis=1) + y
            treedists[np.ix_(a_leaf, yj[bl_eq])] = fd1[:, bl_eq]

    if len(b_leaf):
        for i in a_big:
            m = i - al[i] + 2
            ioff = al[i] - 1
            xi = np.arange(ioff + 1, ioff + m)
            on_path = al[xi] == al[i]
            p_rows = al[xi] - 1 - ioff
            fd_col = np.ones(len(b_leaf))  # fd[0][1]
            for x in range(1, m):
                node = xi[x - 1]
                if on_path[x - 1]:
                    cand3 = (x - 1.0) + update[node, b_leaf]
                else:
                    cand3 = p_rows[x - 1] + treedists[node, b_leaf]
                fd_col = np.minimum(np.minimum(fd_col + 1.0, x + 1.0), cand3)
                if on_path[x - 1]:
                    treedists[node, b_leaf] = fd_col

    if len(a_big) and len(b_big):
        _big_pairs(update, treedists, al, bl, a_big, b_big)
    return float(treedists[-1, -1])


def _big_pairs(
    update: np.ndarray,
    treedists: np.ndarray,
    al: np.ndarray,
    bl: np.ndarray,
    a_big: np.ndarray,
    b_big: np.ndarray,
) -> None:
    """Forest DP for all multi-node keyroot pairs.

    The B keyroots are grouped by nesting rank and each group's forest
    columns are concatenated, so one A-side DP row advances every
    same-rank B keyroot in a single numpy pass. A keyroot only ever
    reads subtree distances of keyroots nested strictly inside its own
    span (strictly smaller rank), which the per-row rank ordering makes
    available just in time. The prefix-minimum insert chain restarts at
    segment boundaries via per-segment offsets large enough that minima
    never leak across.
    """
    ranks: dict[int, int] = {}
    for j in b_big:
        ranks[j] = 1 + max((ranks[j2] for j2 in b_big if j2 < j and bl[j2] >= bl[j]), default=0)
    by_rank: dict[int, list[int]] = {}
    for j in b_big:
        by_rank.setdefault(ranks[j], []).append(j)

    # Offset spacing must dominate the spread of chain values (bounded by
    # the largest possible edit distance) so minima cannot leak between
    # segments in the shared prefix scan.
    big = 8.0 * (update.shape[0] + update.shape[1] + 16)
    groups = []
    for rank in sorted(by_rank):
        yj_l: list[int] = []
        ylocal_l: list[int] = []
        bleq_l: list[bool] = []
        qflat_l: list[int] = []
        qzero_l: list[bool] = []
        seg_l: list[int] = []
        for s, j in enumerate(by_rank[rank]):
            joff = bl[j] - 1
            start = len(yj_l)
            for y in range(1, j - bl[j] + 2):
                node = joff + y
                q = bl[node] - 1 - joff
                yj_l.append(node)
                ylocal_l.append(y)
                bleq_l.append(bl[node] == bl[j])
                qzero_l.append(q == 0)
                qflat_l.append(start + q - 1 if q >= 1 else 0)
                seg_l.append(s)
        seg = np.asarray(seg_l)
        groups.append(
            (
                np.asarray(yj_l),
                np.asarray(ylocal_l, dtype=float),
                np.asarray(bleq_l),
                np.asarray(qflat_l),
                np.asarray(qzero_l),
                np.asarray(ylocal_l) == 1,  # segment heads
                (seg.max() - seg + 1) * big,  # decreasing offsets per segment
            )
        )

    for i in a_big:
        m = i - al[i] + 2
        ioff = al[i] - 1
        xi_all = np.arange(ioff + 1, ioff + m)
        on_path_a = al[xi_all] == al[i]
        p_rows = al[xi_all] - 1 - ioff
        fds = [np.empty((m, len(g[0]))) for g in groups]
        for fd, g in zip(fds, groups):
            fd[0] = g[1]
        for x in range(1, m):
            xi = xi_all[x - 1]
            onp = bool(on_path_a[x - 1])
            p = int(p_rows[x - 1])
            for fd, (yj, ylocal, bleq, qflat, qzero, heads, off) in zip(fds, groups):
                prev = fd[x - 1]
                other = np.where(qzero, float(p), fd[p, qflat]) + treedists[xi, yj]
                if onp:
                    diag_prev = np.empty_like(prev)
                    diag_prev[1:] = prev[:-1]
                    diag_prev[heads] = x - 1.0
                    cand3 = np.where(bleq, diag_prev + update[xi, yj], other)
                else:
                    cand3 = other
                cand = np.minimum(prev + 1.0, cand3)
                chain = cand - ylocal
                np.minimum(chain, float(x), where=heads, out=chain)
                row = np.minimum.accumulate(chain + off) - off + ylocal
                fd[x] = row
                if onp:
                    treedists[xi, yj[bleq]] = row[bleq]


def teds(tree_a: TedsTree, tree_b: TedsTree, struct_only: bool = False) -> float:
    """Similarity in [0, 1]: 1 - TED / max(node counts)."""
    distance = tree_edit_distance(tree_a, tree_b, struct_only)
    return 1.0 - distance / max(tree_a.size(), tree_b.size())
