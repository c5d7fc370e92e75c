"""Host graph: immutable CSR adjacency with sorted neighbor segments.

Node ids are 32-bit, offsets 64-bit.  The binary layout (little-endian) is::

    "MTV1" | u32 version | u64 n | u64 m | (n+1) x u64 offsets | 2m x u32 neighbors
"""

from __future__ import annotations

import io
import struct
from bisect import bisect_left
from typing import BinaryIO, Iterable, TextIO

import numpy as np

MAGIC = b"MTV1"
VERSION = 1
_HEADER = struct.Struct("<4sIQQ")


class GraphFormatError(ValueError):
    """Raised when a binary graph file is malformed."""


class EdgeListError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class Graph:
    """Undirected simple graph in compressed sparse row form."""

    def __init__(self, offsets, neighbors, labels=None, validate: bool = True):
        self.offsets = np.ascontiguousarray(offsets, dtype=np.uint64)
        self.neighbors = np.ascontiguousarray(neighbors, dtype=np.uint32)
        # external ids, in compacted order; not part of the binary format
        self.labels = labels
        if validate:
            self._validate()
        self._adj: list[list[int]] | None = None
        self._edge_keys: np.ndarray | None = None

    @property
    def n(self) -> int:
        return len(self.offsets) - 1

    @property
    def m(self) -> int:
        return len(self.neighbors) // 2

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return (np.array_equal(self.offsets, other.offsets)
                and np.array_equal(self.neighbors, other.neighbors))

    def _validate(self) -> None:
        off, nb = self.offsets, self.neighbors
        if len(off) == 0:
            raise GraphFormatError("offsets must have n+1 entries")
        n = len(off) - 1
        if off[0] != 0 or int(off[-1]) != len(nb) or len(nb) % 2:
            raise GraphFormatError("offsets inconsistent with neighbor array")
        if n and np.any(np.diff(off.astype(np.int64)) < 0):
            raise GraphFormatError("offsets not monotone")
        if len(nb) == 0:
            return
        if int(nb.max()) >= n:
            raise GraphFormatError("neighbor id out of range")
        src = np.repeat(np.arange(n, dtype=np.int64), np.diff(off.astype(np.int64)))
        dst = nb.astype(np.int64)
        if np.any(src == dst):
            raise GraphFormatError("self-loop")
        keys = src * n + dst
        if np.any(np.diff(keys) <= 0):
            raise GraphFormatError("neighbor segments not strictly sorted")
        rev = np.sort(dst * n + src)
        if not np.array_equal(rev, keys):
            raise GraphFormatError("adjacency is not symmetric")

    # -- construction -------------------------------------------------------

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], labels=None) -> "Graph":
        """Build from an edge iterable; loops and duplicates are dropped."""
        arr = np.asarray(list(edges) if not isinstance(edges, np.ndarray) else edges,
                         dtype=np.int64).reshape(-1, 2)
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError("edge endpoint out of range")
        arr = arr[arr[:, 0] != arr[:, 1]]
        both = np.concatenate([arr, arr[:, ::-1]])
        keys = np.unique(both[:, 0] * max(n, 1) + both[:, 1])
        src = keys // max(n, 1)
        dst = keys % max(n, 1)
        counts = np.bincount(src, minlength=n) if n else np.zeros(0, dtype=np.int64)
        offsets = np.zeros(n + 1, dtype=np.uint64)
        np.cumsum(counts, out=offsets[1:])
        return cls(offsets, dst.astype(np.uint32), labels=labels, validate=False)

    # -- queries ------------------------------------------------------------

    def degree(self, v: int) -> int:
        return int(self.offsets[v + 1] - self.offsets[v])

    def degrees(self) -> np.ndarray:
        return np.diff(self.offsets.astype(np.int64))

    def neighbors_of(self, v: int) -> np.ndarray:
        return self.neighbors[int(self.offsets[v]):int(self.offsets[v + 1])]

    @property
    def adj(self) -> list[list[int]]:
        """Neighbor lists as Python ints, built once for the hot loops."""
        if self._adj is None:
            off = self.offsets.tolist()
            nb = self.neighbors.tolist()
            self._adj = [nb[off[v]:off[v + 1]] for v in range(self.n)]
        return self._adj

    def edges(self) -> list[tuple[int, int]]:
        """Undirected edges as (u, v) with u < v, in CSR order."""
        return [(u, v) for u, nbrs in enumerate(self.adj) for v in nbrs if u < v]

    def _check(self, v: int) -> None:
        if not 0 <= v < self.n:
            raise IndexError(f"node {v} out of range for n={self.n}")

    def has_edge(self, u: int, v: int) -> bool:
        self._check(u)
        self._check(v)
        if u == v:
            return False
        seg, target = self.adj[u], v
        if len(self.adj[v]) < len(seg):
            seg, target = self.adj[v], u
        i = bisect_left(seg, target)
        return i < len(seg) and seg[i] == target

    @property
    def edge_keys(self) -> np.ndarray:
        """Sorted u*n+v keys of all directed edges, for vectorized lookups."""
        if self._edge_keys is None:
            n = self.n
            src = np.repeat(np.arange(n, dtype=np.uint64), np.diff(self.offsets.astype(np.int64)))
            self._edge_keys = src * np.uint64(n) + self.neighbors.astype(np.uint64)
        return self._edge_keys

    def has_edges(self, us: np.ndarray, vs: np.ndarray) -> np.ndarray:
        keys = self.edge_keys
        if len(keys) == 0:
            return np.zeros(np.shape(us), dtype=bool)
        q = np.asarray(us, dtype=np.uint64) * np.uint64(self.n) + np.asarray(vs, dtype=np.uint64)
        pos = np.searchsorted(keys, q)
        pos[pos == len(keys)] = 0
        return keys[pos] == q

    def induced_adjacency(self, nodes: list[int]) -> list[int]:
        """Row bitmasks of the subgraph induced by ``nodes`` (order kept)."""
        k = len(nodes)
        if not 2 <= k <= 16:
            raise ValueError("induced_adjacency needs 2 <= k <= 16")
        if len(set(nodes)) != k:
            raise ValueError("duplicate node id")
        for v in nodes:
            self._check(v)
        rows = [0] * k
        for i in range(k):
            for j in range(i + 1, k):
                if self.has_edge(nodes[i], nodes[j]):
                    rows[i] |= 1 << j
                    rows[j] |= 1 << i
        return rows

    def stats(self) -> dict:
        deg = self.degrees()
        hist = np.bincount(deg) if len(deg) else np.zeros(0, dtype=np.int64)
        return {
            "n": self.n,
            "m": self.m,
            "max_degree": int(deg.max()) if len(deg) else 0,
            "degree_histogram": {d: int(c) for d, c in enumerate(hist) if c},
        }

    # -- binary I/O ---------------------------------------------------------

    def write_binary(self, sink: BinaryIO) -> None:
        sink.write(_HEADER.pack(MAGIC, VERSION, self.n, self.m))
        sink.write(self.offsets.astype("<u8").tobytes())
        sink.write(self.neighbors.astype("<u4").tobytes())

    def to_bytes(self) -> bytes:
        buf = io.BytesIO()
        self.write_binary(buf)
        return buf.getvalue()

    @classmethod
    def read_binary(cls, source: BinaryIO) -> "Graph":
        head = source.read(_HEADER.size)
        if len(head) < 4 or head[:4] != MAGIC:
            raise GraphFormatError("not a motif-engine graph")
        if len(head) < _HEADER.size:
            raise GraphFormatError("truncated header")
        _, version, n, m = _HEADER.unpack(head)
        if version != VERSION:
            raise GraphFormatError(f"unsupported graph format version {version}")
        off_bytes = source.read(8 * (n + 1))
        nb_bytes = source.read(4 * 2 * m)
        if len(off_bytes) != 8 * (n + 1) or len(nb_bytes) != 8 * m:
            raise GraphFormatError("truncated graph file")
        offsets = np.frombuffer(off_bytes, dtype="<u8").astype(np.uint64)
        neighbors = np.frombuffer(nb_bytes, dtype="<u4").astype(np.uint32)
        return cls(offsets, neighbors)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Graph":
        return cls.read_binary(io.BytesIO(data))

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            self.write_binary(fh)

    @classmethod
    def load(cls, path) -> "Graph":
        with open(path, "rb") as fh:
            return cls.read_binary(fh)


def load_edge_list(stream: TextIO | str) -> Graph:
    """Parse a whitespace-separated edge list.

    Ids are compacted to 0..n-1 by first appearance; the original ids end
    up in ``graph.labels``.  Lines starting with '#' or '%' are skipped.
    """
    if isinstance(stream, str):
        stream = io.StringIO(stream)
    index: dict[int, int] = {}
    edges: list[tuple[int, int]] = []
    for lineno, line in enumerate(stream, 1):
        s = line.strip()
        if not s or s[0] in "#%":
            continue
        tok = s.split()
        if len(tok) < 2:
            raise EdgeListError(f"expected 'u v', got {s!r}", lineno)
        try:
            a, b = int(tok[0]), int(tok[1])
        except ValueError:
            raise EdgeListError(f"malformed node id in {s!r}", lineno) from None
        if a < 0 or b < 0:
            raise EdgeListError("negative node id", lineno)
        ia = index.setdefault(a, len(index))
        ib = index.setdefault(b, len(index))
        edges.append((ia, ib))
    if not edges:
        raise EdgeListError("empty edge list")
    labels = np.fromiter(index.keys(), dtype=np.int64, count=len(index))
    return Graph.from_edges(len(index), edges, labels=labels)
