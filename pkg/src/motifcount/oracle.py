"""Brute-force ground truth and fixture generators for tests and metrics."""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path

import numpy as np

from . import motif
from . import treelet as tl
from .graph import Graph


class BudgetExceeded(RuntimeError):
    pass


@dataclass
class Census:
    k: int
    counts: dict[int, int] = field(default_factory=dict)
    partial: bool = False

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def frequencies(self) -> dict[int, float]:
        tot = self.total
        return {c: n / tot for c, n in self.counts.items()} if tot else {}


def _masks(graph: Graph) -> list[int]:
    out = []
    for nbrs in graph.adj:
        m = 0
        for u in nbrs:
            m |= 1 << u
        out.append(m)
    return out


def connected_sets(graph: Graph, k: int, colors=None, budget: int | None = None):
    """Yield every connected k-node set once (as a list, root first).

    Ordered extension from the set's minimum node; with ``colors`` only
    colorful sets are produced.  ``budget`` caps the number of sets.
    """
    nb = _masks(graph)
    cols = None if colors is None else [int(c) for c in colors]
    emitted = 0

    def extend(sub, used, closed, ext, above):
        nonlocal emitted
        while ext:
            low = ext & -ext
            ext ^= low
            w = low.bit_length() - 1
            if cols is not None and (used >> cols[w]) & 1:
                continue
            if len(sub) + 1 == k:
                emitted += 1
                if budget is not None and emitted > budget:
                    raise BudgetExceeded(f"more than {budget} connected {k}-sets")
                yield sub + [w]
                continue
            new_ext = ext | (nb[w] & ~closed & above)
            new_used = used if cols is None else used | (1 << cols[w])
            yield from extend(sub + [w], new_used, closed | nb[w], new_ext, above)

    for v in range(graph.n):
        if k == 1:
            yield [v]
            continue
        above = ~((1 << (v + 1)) - 1)
        used = 0 if cols is None else 1 << cols[v]
        yield from extend([v], used, nb[v] | (1 << v), nb[v] & above, above)


def _code(nb: list[int], nodes: list[int], memo: dict[int, int]) -> int:
    k = len(nodes)
    raw = 0
    bit = 0
    for i in range(k):
        row = nb[nodes[i]]
        for j in range(i + 1, k):
            if (row >> nodes[j]) & 1:
                raw |= 1 << bit
            bit += 1
    code = memo.get(raw)
    if code is None:
        code = motif.canonical(raw, k)
        memo[raw] = code
    return code


def exact_census(graph: Graph, k: int, colors=None, budget: int | None = None) -> Census:
    """Induced occurrence counts of every connected k-graphlet.

    With ``colors``, only colorful occurrences are counted.  If ``budget``
    connected sets are exceeded the partial census is returned, flagged.
    """
    if k == 1:
        return Census(1, {0: graph.n} if graph.n else {})
    nb = _masks(graph)
    memo: dict[int, int] = {}
    counts: dict[int, int] = {}
    partial = False
    try:
        for nodes in connected_sets(graph, k, colors, budget):
            c = _code(nb, nodes, memo)
            counts[c] = counts.get(c, 0) + 1
    except BudgetExceeded:
        partial = True
    return Census(k, dict(sorted(counts.items())), partial)


def naive_census(graph: Graph, k: int) -> Census:
    """Second oracle: filter all k-subsets for connectivity."""
    nb = _masks(graph)
    memo: dict[int, int] = {}
    counts: dict[int, int] = {}
    for nodes in combinations(range(graph.n), k):
        nodes = list(nodes)
        rows = [0] * k
        for i in range(k):
            for j in range(k):
                if (nb[nodes[i]] >> nodes[j]) & 1:
                    rows[i] |= 1 << j
        if k > 1 and not motif.is_connected_rows(rows):
            continue
        c = _code(nb, nodes, memo) if k > 1 else 0
        counts[c] = counts.get(c, 0) + 1
    return Census(k, dict(sorted(counts.items())))


def _spanning_edge_sets(nodes: list[int], edges: list[tuple[int, int]]):
    h = len(nodes)
    if h == 1:
        yield []
        return
    for sub in combinations(edges, h - 1):
        parent = {v: v for v in nodes}

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        ok = True
        for a, b in sub:
            ra, rb = find(a), find(b)
            if ra == rb:
                ok = False
                break
            parent[ra] = rb
        if ok:
            yield sub


def exact_colorful_treelets(graph: Graph, colors, h: int, root: int | None = None,
                            zero_rooted: bool = False) -> dict[tuple[int, int], int]:
    """Non-induced colorful copies of every rooted colored h-treelet.

    Returns ``{(colored key, root node): count}``.  ``zero_rooted`` keeps only
    roots of color 0, the convention used for size-k tables.
    """
    cols = [int(c) for c in colors]
    nb = _masks(graph)
    out: dict[tuple[int, int], int] = {}
    for nodes in connected_sets(graph, h, cols):
        cset = 0
        for v in nodes:
            cset |= 1 << cols[v]
        edges = [(a, b) for a, b in combinations(nodes, 2) if (nb[a] >> b) & 1]
        for tree in _spanning_edge_sets(nodes, edges):
            adj = {v: [] for v in nodes}
            for a, b in tree:
                adj[a].append(b)
                adj[b].append(a)
            for r in nodes:
                if root is not None and r != root:
                    continue
                if zero_rooted and cols[r] != 0:
                    continue
                key = tl.colored(tl.encode_rooted(adj, r), cset)
                out[(key, r)] = out.get((key, r), 0) + 1
    return out


def colorful_tree_copies(graph: Graph, colors, k: int) -> list[frozenset]:
    """Every colorful non-induced k-treelet copy, as a set of edges."""
    nb = _masks(graph)
    out = []
    for nodes in connected_sets(graph, k, colors):
        edges = [(a, b) for a, b in combinations(nodes, 2) if (nb[a] >> b) & 1]
        for tree in _spanning_edge_sets(nodes, edges):
            out.append(frozenset(tree))
    return out


def exact_spanning_trees(rows: list[int]) -> tuple[int, dict[int, int]]:
    """Spanning-tree count and per-shape profile by edge-subset filtering."""
    k = len(rows)
    nodes = list(range(k))
    edges = [(i, j) for i in range(k) for j in range(i + 1, k) if (rows[i] >> j) & 1]
    prof: dict[int, int] = {}
    for tree in _spanning_edge_sets(nodes, edges):
        s = tl.shape_of_edges(tree, nodes) if tree else tl.SINGLETON
        prof[s] = prof.get(s, 0) + 1
    return sum(prof.values()), dict(sorted(prof.items()))


# -- generators ---------------------------------------------------------------

def gen_lollipop(n: int, tail: int) -> Graph:
    """Clique on n - tail nodes with a path of ``tail`` nodes hanging off node n-tail-1."""
    if tail < 0 or n < tail + 1:
        raise ValueError("lollipop needs n >= tail + 1")
    q = n - tail
    edges = [(i, j) for i in range(q) for j in range(i + 1, q)]
    prev = q - 1
    for x in range(q, n):
        edges.append((prev, x))
        prev = x
    return Graph.from_edges(n, edges)


def gen_er(n: int, p: float, seed: int = 0) -> Graph:
    if n < 0 or not 0 <= p <= 1:
        raise ValueError("invalid Erdos-Renyi parameters")
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, 1)
    keep = rng.random(len(iu)) < p
    return Graph.from_edges(n, np.stack([iu[keep], ju[keep]], axis=1))


def gen_star(n: int) -> Graph:
    if n < 1:
        raise ValueError("star needs n >= 1")
    return Graph.from_edges(n, [(0, i) for i in range(1, n)])


def gen_path(n: int) -> Graph:
    return Graph.from_edges(n, [(i, i + 1) for i in range(n - 1)])


def gen_cycle(n: int) -> Graph:
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def gen_complete(n: int) -> Graph:
    return Graph.from_edges(n, list(combinations(range(n), 2)))


# -- census files -----------------------------------------------------------

def write_census(census: Census, sink=None) -> str:
    buf = io.StringIO()
    buf.write(f"# k={census.k}\n")
    buf.write("graphlet_code_hex,count\n")
    for code, cnt in sorted(census.counts.items()):
        buf.write(f"{motif.code_hex(code)},{cnt}\n")
    text = buf.getvalue()
    if sink is not None:
        if isinstance(sink, (str, Path)):
            Path(sink).write_text(text)
        else:
            sink.write(text)
    return text


def read_census(source) -> Census:
    if isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_text()
    elif hasattr(source, "read"):
        text = source.read()
    else:
        text = str(source)
    k = None
    counts = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if line[1:].strip().startswith("k="):
                k = int(line[1:].strip()[2:])
            continue
        if line.startswith("graphlet_code_hex"):
            continue
        code, cnt = line.split(",")[:2]
        counts[int(code, 16)] = int(cnt)
    return Census(k or 0, counts)

