"""Succinct codes for rooted treelets on up to 16 nodes.

A rooted treelet is stored as the bit string of its DFS traversal: step ``i``
sits at bit ``i``, a 1 means moving away from the root and a 0 moving back.
Trailing zeros are implicit, so the full traversal length is always
``2 * popcount``.  Children of every node are visited in non-decreasing
order of their own codes, which makes the code canonical.

Merging appends the second treelet as the *last* child of the root::

    merge(t1, t2) = t1 | 1 << L1 | t2 << (L1 + 1),   L1 = 2 * popcount(t1)

so the decomposition of a treelet splits off the subtree of its root's
last-visited child, which is also its largest child.

A colored treelet key packs the code above a 16-bit color set,
``key = code << 16 | colors``; keys compare first by shape, then by colors.
"""

from __future__ import annotations

from functools import lru_cache
from itertools import combinations

MAX_SIZE = 16
COLOR_BITS = 16
COLOR_MASK = (1 << COLOR_BITS) - 1

SINGLETON = 0
EDGE = 1


class TreeletError(ValueError):
    pass


def size(t: int) -> int:
    return 1 + t.bit_count()


def euler_length(t: int) -> int:
    return 2 * t.bit_count()


@lru_cache(maxsize=None)
def _root_segments(t: int) -> tuple[tuple[int, int], ...]:
    """(start bit, code) of each root child, in visiting order."""
    segs = []
    depth = 0
    start = 0
    for i in range(euler_length(t)):
        if (t >> i) & 1:
            if depth == 0:
                start = i
            depth += 1
        else:
            depth -= 1
            if depth < 0:
                raise TreeletError(f"invalid treelet code {t:#x}")
            if depth == 0:
                width = i - start - 1
                segs.append((start, (t >> (start + 1)) & ((1 << width) - 1)))
    if depth != 0:
        raise TreeletError(f"invalid treelet code {t:#x}")
    return tuple(segs)


def children(t: int) -> tuple[int, ...]:
    """Codes of the root's child subtrees, in visiting order."""
    return tuple(code for _, code in _root_segments(t))


@lru_cache(maxsize=None)
def max_child(t: int) -> int:
    """Largest root child code, or -1 for the singleton."""
    ch = children(t)
    return max(ch) if ch else -1


def can_merge_codes(t1: int, t2: int) -> bool:
    return t2 >= max_child(t1) and size(t1) + size(t2) <= MAX_SIZE


@lru_cache(maxsize=None)
def merge(t1: int, t2: int) -> int:
    if size(t1) + size(t2) > MAX_SIZE:
        raise TreeletError("merged treelet exceeds 16 nodes")
    if t2 < max_child(t1):
        raise TreeletError("non-canonical merge")
    l1 = euler_length(t1)
    return t1 | (1 << l1) | (t2 << (l1 + 1))


@lru_cache(maxsize=None)
def decomp(t: int) -> tuple[int, int]:
    segs = _root_segments(t)
    if not segs:
        raise TreeletError("cannot decompose the singleton treelet")
    start, last = segs[-1]
    return t & ((1 << start) - 1), last


@lru_cache(maxsize=None)
def beta(t: int) -> int:
    """Number of root children whose subtree equals the decomposition's t2."""
    _, t2 = decomp(t)
    return children(t).count(t2)


def is_canonical(t: int) -> bool:
    try:
        ch = children(t)
    except TreeletError:
        return False
    if any(a > b for a, b in zip(ch, ch[1:])):
        return False
    return all(is_canonical(c) for c in ch)


# -- colored keys -----------------------------------------------------------

def colored(t: int, colors: int) -> int:
    if not 0 <= colors <= COLOR_MASK:
        raise TreeletError("color set out of range")
    if colors.bit_count() != size(t):
        raise TreeletError("not colorful: |C| != |T|")
    return (t << COLOR_BITS) | colors


def parts(key: int) -> tuple[int, int]:
    return key >> COLOR_BITS, key & COLOR_MASK


def can_merge(c1: int, c2: int) -> bool:
    t1, s1 = parts(c1)
    t2, s2 = parts(c2)
    return not (s1 & s2) and can_merge_codes(t1, t2)


# -- enumeration and conversion ---------------------------------------------

@lru_cache(maxsize=None)
def enumerate_treelets(h: int) -> tuple[int, ...]:
    """All canonical rooted treelet codes on ``h`` nodes, ascending."""
    if not 1 <= h <= MAX_SIZE:
        raise TreeletError("treelet size must be in 1..16")
    if h == 1:
        return (SINGLETON,)
    out = set()
    for h1 in range(1, h):
        for t1 in enumerate_treelets(h1):
            mc = max_child(t1)
            for t2 in enumerate_treelets(h - h1):
                if t2 >= mc:
                    out.add(merge(t1, t2))
    return tuple(sorted(out))


def encode_rooted(adj: dict[int, list[int]] | list[list[int]], root: int) -> int:
    """Canonical code of a tree given as adjacency lists, rooted at ``root``."""

    def enc(v: int, parent: int) -> int:
        subs = sorted(enc(u, v) for u in adj[v] if u != parent)
        code = 0
        pos = 0
        for c in subs:
            code |= (1 | (c << 1)) << pos
            pos += 2 * c.bit_count() + 2
        return code

    return enc(root, -1)


def decode(t: int) -> list[tuple[int, int]]:
    """Edges (parent, child) of the treelet, nodes numbered in DFS order; root is 0."""
    edges = []
    stack = [0]
    nxt = 1
    for i in range(euler_length(t)):
        if (t >> i) & 1:
            edges.append((stack[-1], nxt))
            stack.append(nxt)
            nxt += 1
        else:
            stack.pop()
    return edges


def _adjacency(n: int, edges) -> list[list[int]]:
    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    return adj


@lru_cache(maxsize=None)
def unrooted_shape(t: int) -> int:
    """Canonical code of the unrooted tree: the minimum over all rootings."""
    adj = _adjacency(size(t), decode(t))
    return min(encode_rooted(adj, r) for r in range(size(t)))


def shape_of_edges(edges, nodes=None) -> int:
    """Unrooted shape code of a tree given by an edge list over arbitrary ids."""
    if nodes is None:
        nodes = sorted({x for e in edges for x in e})
    idx = {v: i for i, v in enumerate(nodes)}
    adj = _adjacency(len(nodes), [(idx[a], idx[b]) for a, b in edges])
    return min(encode_rooted(adj, r) for r in range(len(nodes)))


@lru_cache(maxsize=None)
def enumerate_shapes(h: int) -> tuple[int, ...]:
    """Unrooted tree shapes on ``h`` nodes, ascending by code."""
    return tuple(sorted({unrooted_shape(t) for t in enumerate_treelets(h)}))


@lru_cache(maxsize=None)
def rootings(shape: int) -> tuple[int, ...]:
    """Rooted codes whose unrooted shape is ``shape``."""
    return tuple(t for t in enumerate_treelets(size(shape)) if unrooted_shape(t) == shape)


def colorsets(k: int, h: int):
    """All h-subsets of k colors as bitmasks."""
    for combo in combinations(range(k), h):
        mask = 0
        for c in combo:
            mask |= 1 << c
        yield mask
