"""Graphlet codes, spanning-tree counts and the count estimators.

A k-node graphlet is packed into an integer from the strict upper triangle of
its adjacency matrix, row-major: pair (i, j) with i < j sits at bit
``i*(2k-i-1)/2 + (j-i-1)``.  The canonical code is the smallest packing over
all vertex orders that respect a degree-refined ordered partition, so
isomorphic graphlets share a code.
"""

from __future__ import annotations

import math
import threading
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

from . import treelet as tl

MAX_K = 10

# connected graphs on k unlabeled nodes
GRAPHLET_COUNTS = {1: 1, 2: 1, 3: 2, 4: 6, 5: 21, 6: 112, 7: 853, 8: 11117,
                   9: 261080, 10: 11716571}


class GraphletError(ValueError):
    pass


def pair_index(i: int, j: int, k: int) -> int:
    if i > j:
        i, j = j, i
    return i * (2 * k - i - 1) // 2 + (j - i - 1)


@lru_cache(maxsize=None)
def _pairs(k: int) -> tuple[tuple[int, int], ...]:
    return tuple((i, j) for i in range(k) for j in range(i + 1, k))


def pack(rows: list[int], k: int) -> int:
    """Pack symmetric row bitmasks into the upper-triangle code."""
    code = 0
    for bit, (i, j) in enumerate(_pairs(k)):
        if (rows[i] >> j) & 1:
            code |= 1 << bit
    return code


def unpack(code: int, k: int) -> list[int]:
    rows = [0] * k
    for bit, (i, j) in enumerate(_pairs(k)):
        if (code >> bit) & 1:
            rows[i] |= 1 << j
            rows[j] |= 1 << i
    return rows


def edges_of(code: int, k: int) -> list[tuple[int, int]]:
    return [p for bit, p in enumerate(_pairs(k)) if (code >> bit) & 1]


def is_connected_rows(rows: list[int]) -> bool:
    k = len(rows)
    if k == 0:
        return False
    seen = 1
    frontier = 1
    while frontier:
        nxt = 0
        f = frontier
        while f:
            low = f & -f
            nxt |= rows[low.bit_length() - 1]
            f ^= low
        frontier = nxt & ~seen
        seen |= frontier
    return seen == (1 << k) - 1


def is_connected(code: int, k: int) -> bool:
    return is_connected_rows(unpack(code, k))


# -- canonical form ----------------------------------------------------------

def _refine(rows: list[int]) -> list[int]:
    """Isomorphism-invariant vertex classes by iterated neighbor-class refinement."""
    k = len(rows)
    nbrs = [[j for j in range(k) if (rows[i] >> j) & 1] for i in range(k)]
    cls = [len(nb) for nb in nbrs]
    while True:
        sig = [(cls[i], tuple(sorted(cls[j] for j in nbrs[i]))) for i in range(k)]
        order = sorted(set(sig))
        new = [order.index(s) for s in sig]
        if len(order) == len(set(cls)):
            return new
        cls = new


def _canonical_rows(rows: list[int]) -> int:
    k = len(rows)
    cls = _refine(rows)
    # positions are owned by classes in ascending class order
    owner = sorted(cls)
    # fill positions k-1 .. 0; each step fixes one full row of the upper triangle
    # frontier items: (placed-vertex mask, vertices at positions p+1..k-1)
    frontier: list[tuple[int, tuple[int, ...]]] = [(0, ())]
    best_code = 0
    row_base = [pair_index(p, p + 1, k) if p < k - 1 else 0 for p in range(k)]
    for p in range(k - 1, -1, -1):
        want = owner[p]
        best = None
        nxt: list[tuple[int, tuple[int, ...]]] = []
        for placed, later in frontier:
            tried: list[int] = []
            for x in range(k):
                if cls[x] != want or (placed >> x) & 1:
                    continue
                # skip twins of a candidate already tried from this node
                if any(_twins(rows, x, y) for y in tried):
                    continue
                tried.append(x)
                row = 0
                for off, y in enumerate(later):
                    if (rows[x] >> y) & 1:
                        row |= 1 << off
                if best is None or row < best:
                    best = row
                    nxt = [(placed | (1 << x), (x,) + later)]
                elif row == best:
                    nxt.append((placed | (1 << x), (x,) + later))
        if p < k - 1:
            best_code |= best << row_base[p]
        frontier = _dedup(nxt)
    return best_code


def _twins(rows: list[int], x: int, y: int) -> bool:
    mask = ~((1 << x) | (1 << y))
    return (rows[x] & mask) == (rows[y] & mask)


def _dedup(frontier):
    seen = set()
    out = []
    for item in frontier:
        if item[1] not in seen:
            seen.add(item[1])
            out.append(item)
    return out


_memo: dict[tuple[int, int], int] = {}
_memo_lock = threading.Lock()


def canonical(code: int, k: int) -> int:
    """Canonical code of the graphlet packed in ``code``."""
    hit = _memo.get((code, k))
    if hit is not None:
        return hit
    if not 1 <= k <= MAX_K:
        raise GraphletError(f"graphlet size must be in 1..{MAX_K}")
    if code >> (k * (k - 1) // 2):
        raise GraphletError("code has bits beyond k(k-1)/2")
    rows = unpack(code, k)
    if not is_connected_rows(rows):
        raise GraphletError("graphlet is disconnected")
    canon = _canonical_rows(rows)
    with _memo_lock:
        _memo[(code, k)] = canon
    return canon


def canonical_rows(rows: list[int]) -> int:
    return canonical(pack(rows, len(rows)), len(rows))


def code_hex(code: int) -> str:
    return f"{code:032x}"


# -- spanning trees ----------------------------------------------------------

def _bareiss_det(mat: list[list[int]]) -> int:
    n = len(mat)
    if n == 0:
        return 1
    a = [row[:] for row in mat]
    sign = 1
    prev = 1
    for i in range(n - 1):
        if a[i][i] == 0:
            swap = next((r for r in range(i + 1, n) if a[r][i] != 0), None)
            if swap is None:
                return 0
            a[i], a[swap] = a[swap], a[i]
            sign = -sign
        for r in range(i + 1, n):
            for c in range(i + 1, n):
                a[r][c] = (a[r][c] * a[i][i] - a[r][i] * a[i][c]) // prev
        prev = a[i][i]
    return sign * a[n - 1][n - 1]


def spanning_trees(code: int, k: int) -> int:
    """Number of spanning trees, from a Laplacian minor."""
    if k == 1:
        return 1
    rows = unpack(code, k)
    lap = [[0] * k for _ in range(k)]
    for i in range(k):
        for j in range(k):
            if (rows[i] >> j) & 1:
                lap[i][j] = -1
        lap[i][i] = rows[i].bit_count()
    return _bareiss_det([r[1:] for r in lap[1:]])


@lru_cache(maxsize=None)
def spanning_profile(code: int, k: int) -> dict[int, int]:
    """Spanning trees of the graphlet grouped by unrooted treelet shape.

    Runs the build-up phase on the graphlet itself with node i colored i, so
    every spanning tree is colorful and is stored once, at node 0.
    """
    from .build import build_tables, identity_coloring
    from .graph import Graph

    if k == 1:
        return {tl.SINGLETON: 1}
    g = Graph.from_edges(k, edges_of(code, k))
    table = build_tables(g, identity_coloring(k))
    prof = table.unrooted_totals()
    total = spanning_trees(code, k)
    if sum(prof.values()) != total:
        raise AssertionError(f"profile of {code:#x} sums to {sum(prof.values())}, expected {total}")
    return dict(sorted(prof.items()))


# -- probabilities and estimators -------------------------------------------

def p_k(k: int) -> Fraction:
    """Probability that a fixed k-set is colorful under a uniform k-coloring."""
    if not 1 <= k <= tl.MAX_SIZE:
        raise ValueError("k must be in 1..16")
    return Fraction(math.factorial(k), k ** k)


def colorful_probability(k: int, lam=None):
    """p_k for uniform coloring; k! lam^(k-1) (1-(k-1)lam) for biased coloring."""
    if lam is None:
        return p_k(k)
    return math.factorial(k) * lam ** (k - 1) * (1 - (k - 1) * lam)


def estimate_from_histogram(hist: dict[int, int], M: int, t: int, sigma: dict[int, int],
                            p) -> dict[int, float]:
    """Uncolored count estimates g_i = (hist_i / M) * t / (sigma_i * p)."""
    out = {}
    for code, seen in hist.items():
        if code not in sigma:
            raise GraphletError(f"no spanning-tree count for graphlet {code:#x}")
        if seen == 0 or M == 0:
            out[code] = 0.0
            continue
        out[code] = float(Fraction(seen * t, M * sigma[code]) / Fraction(p))
    return out


# -- census of graphlet shapes ----------------------------------------------

@lru_cache(maxsize=None)
def all_graphlets(k: int) -> tuple[int, ...]:
    """Canonical codes of every connected graphlet on k nodes, ascending."""
    if k == 1:
        return (0,)
    if k > 8:
        raise GraphletError("exhaustive graphlet census limited to k <= 8")
    out = set()
    for base in all_graphlets(k - 1):
        rows = unpack(base, k - 1)
        for mask in range(1, 1 << (k - 1)):
            ext = [r | (((mask >> i) & 1) << (k - 1)) for i, r in enumerate(rows)] + [mask]
            out.add(canonical_rows(ext))
    return tuple(sorted(out))


class ProfileCache:
    """Spanning-tree counts and shape profiles, optionally persisted to a text file.

    Each line reads ``k, code-hex, sigma, shape:count ...``.
    """

    def __init__(self, path=None):
        self.path = None if path is None else Path(path)
        self._rows: dict[tuple[int, int], tuple[int, dict[int, int]]] = {}
        self._lock = threading.Lock()
        self._dirty = False
        if self.path is not None and self.path.exists():
            self._load()

    def _load(self) -> None:
        for line in self.path.read_text().splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = [f.strip() for f in line.split(",")]
            k, code, sigma = int(fields[0]), int(fields[1], 16), int(fields[2])
            prof = {}
            for item in fields[3].split() if len(fields) > 3 else []:
                shape, cnt = item.split(":")
                prof[int(shape, 16)] = int(cnt)
            self._rows[(k, code)] = (sigma, prof)

    def get(self, code: int, k: int) -> tuple[int, dict[int, int]]:
        row = self._rows.get((k, code))
        if row is None:
            row = (spanning_trees(code, k), spanning_profile(code, k))
            with self._lock:
                self._rows[(k, code)] = row
                self._dirty = True
        return row

    def put(self, code: int, k: int, sigma: int, profile: dict[int, int]) -> None:
        with self._lock:
            self._rows[(k, code)] = (sigma, dict(profile))
            self._dirty = True

    def sigma(self, code: int, k: int) -> int:
        return self.get(code, k)[0]

    def profile(self, code: int, k: int) -> dict[int, int]:
        return self.get(code, k)[1]

    def save(self) -> None:
        if self.path is None or not self._dirty:
            return
        lines = []
        for (k, code), (sigma, prof) in sorted(self._rows.items()):
            items = " ".join(f"{s:x}:{c}" for s, c in sorted(prof.items()))
            lines.append(f"{k}, {code_hex(code)}, {sigma}, {items}")
        tmp = self.path.with_suffix(".tmp")
        tmp.write_text("\n".join(lines) + "\n")
        tmp.replace(self.path)
        self._dirty = False


def graphlet_code_of(graph, nodes) -> int:
    """Canonical code of the subgraph induced by ``nodes``."""
    k = len(nodes)
    if k == 1:
        return 0
    return canonical_rows(graph.induced_adjacency(list(nodes)))
