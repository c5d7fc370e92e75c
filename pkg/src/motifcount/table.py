"""Treelet count table: per node and per size, sorted colored-treelet records.

Each record stores ``(key, cumulative count)`` pairs sorted by key, so the raw
count of entry ``j`` is ``cum[j] - cum[j-1]`` and the node total is the last
cumulative.  Records are staged in a dict while a node is being built, then
finalized and appended to the level file.  ``sort_pass`` rewrites the file
ordered by node id with an index footer.

Level file layout (little-endian)::

    header : "MTVT" | u32 version | u32 k | u32 h | u64 record count
    record : u32 node | u32 entry count | entries (6-byte key, 16-byte cum)
    footer : record count x (u32 node, u64 record offset) | u64 footer offset
"""

from __future__ import annotations

import mmap
import os
import struct
import threading
from bisect import bisect_left, bisect_right
from functools import lru_cache
from pathlib import Path
from typing import Iterator

import numpy as np

from . import treelet as tl

TABLE_MAGIC = b"MTVT"
TABLE_VERSION = 1
KEY_BYTES = 6
CUM_BYTES = 16
ENTRY_BYTES = KEY_BYTES + CUM_BYTES
MAX_COUNT = (1 << 128) - 1

_HEADER = struct.Struct("<4sIIIQ")
_REC = struct.Struct("<II")
_IDX = struct.Struct("<IQ")
_TAIL = struct.Struct("<Q")


class CountOverflowError(OverflowError):
    pass


class TableFormatError(ValueError):
    pass


class Record:
    """Sorted colored-treelet counts of one node at one size."""

    __slots__ = ("keys", "cums")

    def __init__(self, keys: list[int], cums: list[int]):
        self.keys = keys
        self.cums = cums

    @classmethod
    def from_counts(cls, counts: dict[int, int]) -> "Record":
        keys = sorted(counts)
        cums = []
        acc = 0
        for key in keys:
            amount = counts[key]
            if amount <= 0:
                raise ValueError("record counts must be positive")
            acc += amount
            cums.append(acc)
        if acc > MAX_COUNT:
            raise CountOverflowError("treelet count exceeds 128 bits")
        return cls(keys, cums)

    def __len__(self) -> int:
        return len(self.keys)

    def __bool__(self) -> bool:
        return bool(self.keys)

    def __eq__(self, other) -> bool:
        return isinstance(other, Record) and self.keys == other.keys and self.cums == other.cums

    @property
    def total(self) -> int:
        return self.cums[-1] if self.cums else 0

    def raw(self, j: int) -> int:
        return self.cums[j] - (self.cums[j - 1] if j else 0)

    def items(self) -> Iterator[tuple[int, int]]:
        prev = 0
        for key, cum in zip(self.keys, self.cums):
            yield key, cum - prev
            prev = cum

    def as_dict(self) -> dict[int, int]:
        return dict(self.items())

    def count(self, key: int) -> int:
        j = bisect_left(self.keys, key)
        if j < len(self.keys) and self.keys[j] == key:
            return self.raw(j)
        return 0

    def span(self, t: int) -> tuple[int, int]:
        """Index range of the entries whose treelet part is ``t``."""
        lo = bisect_left(self.keys, t << tl.COLOR_BITS)
        hi = bisect_left(self.keys, (t + 1) << tl.COLOR_BITS, lo)
        return lo, hi

    def select(self, r: int) -> int:
        """Index of the first entry with cumulative count >= r (1-based r)."""
        return bisect_left(self.cums, r)


EMPTY = Record([], [])


def encode_record(node: int, rec: Record) -> bytes:
    out = [_REC.pack(node, len(rec))]
    for key, cum in zip(rec.keys, rec.cums):
        if cum > MAX_COUNT:
            raise CountOverflowError("treelet count exceeds 128 bits")
        out.append(key.to_bytes(KEY_BYTES, "little"))
        out.append(cum.to_bytes(CUM_BYTES, "little"))
    return b"".join(out)


def _decode_entries(buf, count: int) -> Record:
    if count == 0:
        return Record([], [])
    raw = np.frombuffer(buf, dtype=np.uint8, count=count * ENTRY_BYTES).reshape(count, ENTRY_BYTES)
    kb = np.zeros((count, 8), dtype=np.uint8)
    kb[:, :KEY_BYTES] = raw[:, :KEY_BYTES]
    keys = kb.view("<u8").ravel().tolist()
    lo = np.ascontiguousarray(raw[:, KEY_BYTES:KEY_BYTES + 8]).view("<u8").ravel()
    hi = np.ascontiguousarray(raw[:, KEY_BYTES + 8:]).view("<u8").ravel()
    if not hi.any():
        cums = lo.tolist()
    else:
        cums = [(h << 64) | l for h, l in zip(hi.tolist(), lo.tolist())]
    return Record(keys, cums)


class MemoryLevel:
    """All records of one size kept in a dict."""

    def __init__(self, h: int):
        self.h = h
        self.records: dict[int, Record] = {}

    def record(self, v: int) -> Record:
        return self.records.get(v, EMPTY)

    def nodes(self) -> list[int]:
        return sorted(self.records)

    def entry_count(self) -> int:
        return sum(len(r) for r in self.records.values())


class FileLevel:
    """One sorted level file, read through a memory map."""

    def __init__(self, path, cache_size: int = 1 << 16):
        self.path = Path(path)
        self._fh = open(self.path, "rb")
        size = os.fstat(self._fh.fileno()).st_size
        if size < _HEADER.size + _TAIL.size:
            raise TableFormatError(f"{self.path}: truncated table file")
        self._mm = mmap.mmap(self._fh.fileno(), 0, access=mmap.ACCESS_READ)
        magic, version, k, h, count = _HEADER.unpack_from(self._mm, 0)
        if magic != TABLE_MAGIC:
            raise TableFormatError(f"{self.path}: not a treelet table")
        if version != TABLE_VERSION:
            raise TableFormatError(f"{self.path}: unsupported version {version}")
        self.k, self.h, self.count = k, h, count
        (foot,) = _TAIL.unpack_from(self._mm, size - _TAIL.size)
        if foot + count * _IDX.size + _TAIL.size != size:
            raise TableFormatError(f"{self.path}: corrupt index footer")
        idx = np.frombuffer(self._mm, dtype=np.dtype([("node", "<u4"), ("off", "<u8")]),
                            count=count, offset=foot)
        self._nodes = np.array(idx["node"], dtype=np.int64)
        self._offs = np.array(idx["off"], dtype=np.int64)
        self.record = lru_cache(maxsize=cache_size)(self._read)

    def _read(self, v: int) -> Record:
        i = int(np.searchsorted(self._nodes, v))
        if i == len(self._nodes) or self._nodes[i] != v:
            return EMPTY
        off = int(self._offs[i])
        node, cnt = _REC.unpack_from(self._mm, off)
        start = off + _REC.size
        return _decode_entries(self._mm[start:start + cnt * ENTRY_BYTES], cnt)

    def nodes(self) -> list[int]:
        return self._nodes.tolist()

    def entry_count(self) -> int:
        return (self._foot_offset() - _HEADER.size - self.count * _REC.size) // ENTRY_BYTES

    def _foot_offset(self) -> int:
        return _TAIL.unpack_from(self._mm, len(self._mm) - _TAIL.size)[0]

    def close(self) -> None:
        self.record.cache_clear()
        self._mm.close()
        self._fh.close()


def level_path(directory, h: int) -> Path:
    return Path(directory) / f"h{h:02d}.mtvt"


class LevelWriter:
    """Staging area and single appender for the level of size ``h``.

    Workers stage into their own node's dict; ``finalize_record`` converts the
    node's counts into sorted cumulative form and appends them.
    """

    def __init__(self, table: "CountTable", h: int):
        self.table = table
        self.h = h
        self._staging: dict[int, dict[int, int]] = {}
        self._lock = threading.Lock()
        self._sorted = False
        if table.directory is None:
            self._mem = MemoryLevel(h)
            self._part = None
        else:
            self._mem = None
            self._part_path = level_path(table.directory, h).with_suffix(".part")
            self._part = open(self._part_path, "wb")

    def stage_add(self, node: int, key: int, amount: int) -> None:
        if amount <= 0:
            raise ValueError("staged amount must be positive")
        rec = self._staging.setdefault(node, {})
        rec[key] = rec.get(key, 0) + amount

    def stage_counts(self, node: int, counts: dict[int, int]) -> None:
        if counts:
            self._staging[node] = counts

    def finalize_record(self, node: int) -> None:
        counts = self._staging.pop(node, None)
        if not counts:
            return
        rec = Record.from_counts(counts)
        with self._lock:
            if self._mem is not None:
                self._mem.records[node] = rec
            else:
                self._part.write(encode_record(node, rec))

    def sort_pass(self):
        """Order records by node id, write the index and install the level."""
        if self._sorted:
            return self.table.levels[self.h]
        if self._staging:
            raise RuntimeError("sort_pass with unfinalized records")
        if self._mem is not None:
            self._mem.records = dict(sorted(self._mem.records.items()))
            level = self._mem
        else:
            self._part.close()
            level = _sort_part_file(self._part_path, level_path(self.table.directory, self.h),
                                    self.table.k, self.h)
            os.remove(self._part_path)
        self.table.levels[self.h] = level
        self._sorted = True
        return level


def _sort_part_file(part: Path, dest: Path, k: int, h: int) -> FileLevel:
    data = part.read_bytes()
    spans = []
    pos = 0
    while pos < len(data):
        node, cnt = _REC.unpack_from(data, pos)
        end = pos + _REC.size + cnt * ENTRY_BYTES
        spans.append((node, pos, end))
        pos = end
    spans.sort()
    tmp = dest.with_suffix(".tmp")
    with open(tmp, "wb") as out:
        out.write(_HEADER.pack(TABLE_MAGIC, TABLE_VERSION, k, h, len(spans)))
        index = []
        off = _HEADER.size
        for node, a, b in spans:
            out.write(data[a:b])
            index.append(_IDX.pack(node, off))
            off += b - a
        out.write(b"".join(index))
        out.write(_TAIL.pack(off))
    os.replace(tmp, dest)
    return FileLevel(dest)


class CountTable:
    """Colored treelet counts for sizes 1..k of one coloring.

    ``directory=None`` keeps everything in memory; otherwise each size lives
    in its own level file under ``directory``.
    """

    def __init__(self, k: int, directory=None, meta: dict | None = None):
        if not 1 <= k <= tl.MAX_SIZE:
            raise ValueError("k must be in 1..16")
        self.k = k
        self.directory = None if directory is None else Path(directory)
        if self.directory is not None:
            self.directory.mkdir(parents=True, exist_ok=True)
        self.meta = dict(meta or {})
        self.levels: dict[int, MemoryLevel | FileLevel] = {}

    @classmethod
    def open(cls, directory, meta: dict | None = None) -> "CountTable":
        directory = Path(directory)
        levels = {}
        k = None
        for h in range(1, tl.MAX_SIZE + 1):
            p = level_path(directory, h)
            if p.exists():
                lvl = FileLevel(p)
                levels[h] = lvl
                k = lvl.k
        if k is None:
            raise TableFormatError(f"no table files in {directory}")
        table = cls(k, directory, meta)
        table.levels = levels
        return table

    def writer(self, h: int) -> LevelWriter:
        return LevelWriter(self, h)

    def close(self) -> None:
        for lvl in self.levels.values():
            if isinstance(lvl, FileLevel):
                lvl.close()

    def record(self, v: int, h: int | None = None) -> Record:
        lvl = self.levels.get(self.k if h is None else h)
        return EMPTY if lvl is None else lvl.record(v)

    def entry_count(self, h: int | None = None) -> int:
        hs = [h] if h is not None else list(self.levels)
        return sum(self.levels[x].entry_count() for x in hs if x in self.levels)

    # -- sampling-phase queries (size k) ----------------------------------

    def occ_total(self, v: int) -> int:
        return self.record(v).total

    def occ(self, key: int, v: int, h: int | None = None) -> int:
        if h is None:
            h = tl.size(key >> tl.COLOR_BITS)
        return self.record(v, h).count(key)

    def iter(self, t: int, v: int) -> Iterator[tuple[int, int]]:
        """(color set, raw count) of entries with treelet ``t`` at ``v``."""
        rec = self.record(v, tl.size(t))
        lo, hi = rec.span(t)
        for j in range(lo, hi):
            yield rec.keys[j] & tl.COLOR_MASK, rec.raw(j)

    def sample_colored(self, v: int, rng) -> int:
        """Key drawn with probability raw(key) / occ_total(v)."""
        rec = self.record(v)
        if not rec:
            raise ValueError(f"no size-{self.k} treelets rooted at node {v}")
        r = rng.randrange(rec.total) + 1
        return rec.keys[rec.select(r)]

    def nodes(self, h: int | None = None) -> list[int]:
        lvl = self.levels.get(self.k if h is None else h)
        return [] if lvl is None else lvl.nodes()

    def total_treelets(self) -> int:
        return sum(self.record(v).total for v in self.nodes())

    def shape_totals(self) -> dict[int, int]:
        """r_T per rooted treelet code T of size k."""
        out: dict[int, int] = {}
        for v in self.nodes():
            for key, raw in self.record(v).items():
                t = key >> tl.COLOR_BITS
                out[t] = out.get(t, 0) + raw
        return out

    def unrooted_totals(self) -> dict[int, int]:
        """Colorful occurrence count per unrooted k-treelet shape."""
        out: dict[int, int] = {}
        for t, r in self.shape_totals().items():
            s = tl.unrooted_shape(t)
            out[s] = out.get(s, 0) + r
        return out
