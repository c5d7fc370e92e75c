"""Build-up phase: random coloring plus the treelet-count dynamic program.

For every node ``v`` and colorful rooted treelet ``T_C`` on ``h`` nodes,

    c(T_C, v) = 1/beta_T * sum_{u ~ v} sum_{C'} c(T'_{C'}, v) * c(T''_{C''}, u)

where ``(T', T'')`` is the unique decomposition of ``T``.  The neighbor sum is
re-associated: counts of all neighbors are first aggregated per colored key,
then every record entry of ``v`` is check-and-merged against the aggregate.
Size-k records are only kept at color-0 nodes, so each colorful k-treelet is
stored exactly once.
"""

from __future__ import annotations

import logging
import math
import time
from bisect import bisect_left
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import treelet as tl
from .graph import Graph
from .table import CountTable, LevelWriter

log = logging.getLogger(__name__)

_SHIFT = tl.COLOR_BITS
_MASK = tl.COLOR_MASK


@dataclass(frozen=True)
class BuildConfig:
    k: int
    seed: int = 0
    lam: float | None = None
    threads: int = 1
    # max records staged at once; 0 means one per worker
    staging_budget: int = 0

    def __post_init__(self):
        if not 2 <= self.k <= tl.MAX_SIZE:
            raise ValueError("k must be in 2..16")
        if self.lam is not None:
            upper = 1.0 / (self.k - 1)
            if not 0 < self.lam <= upper:
                raise ValueError(f"lambda must be in (0, {upper}] for k={self.k}")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


@dataclass
class Coloring:
    k: int
    colors: np.ndarray
    mode: str = "uniform"
    lam: float | None = None
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def colorful_probability(self) -> float:
        from .motif import colorful_probability
        return float(colorful_probability(self.k, self.lam))

    def as_meta(self) -> dict:
        return {"k": self.k, "seed": self.seed, "mode": self.mode,
                "lambda": "" if self.lam is None else repr(self.lam)}


def color_graph(graph: Graph, config: BuildConfig) -> Coloring:
    """Assign each node a color in 0..k-1, reproducibly from ``config.seed``.

    Uniform mode gives every color probability 1/k.  Biased mode gives each of
    the colors 1..k-1 probability lambda and color 0 the remaining mass.
    """
    k, n = config.k, graph.n
    rng = np.random.default_rng(config.seed)
    if config.lam is None:
        colors = rng.integers(0, k, size=n)
        return Coloring(k, colors.astype(np.uint8), "uniform", None, config.seed)
    lam = config.lam
    u = rng.random(n)
    p0 = 1.0 - (k - 1) * lam
    colors = np.where(u < p0, 0, 1 + np.minimum(((u - p0) / lam).astype(np.int64), k - 2))
    return Coloring(k, colors.astype(np.uint8), "biased", lam, config.seed)


def identity_coloring(n: int) -> Coloring:
    return Coloring(n, np.arange(n, dtype=np.uint8), "identity", None, 0)


# -- dynamic program ---------------------------------------------------------

def _aggregate(nbrs, levels, h: int) -> list[dict[int, int]]:
    """Sum neighbor records per colored key, for every size below h."""
    aggs: list[dict[int, int]] = [{}]
    for h2 in range(1, h):
        lvl = levels[h2]
        acc: dict[int, int] = {}
        get = acc.get
        for u in nbrs:
            rec = lvl.record(u)
            prev = 0
            for key, cum in zip(rec.keys, rec.cums):
                acc[key] = get(key, 0) + cum - prev
                prev = cum
        aggs.append(acc)
    return aggs


def _reduce(parts: list[list[dict[int, int]]]) -> list[dict[int, int]]:
    out = parts[0]
    for other in parts[1:]:
        for h2, acc in enumerate(other):
            dst = out[h2]
            for key, val in acc.items():
                dst[key] = dst.get(key, 0) + val
    return out


def _combine(v: int, h: int, levels, aggs) -> dict[int, int]:
    """Counts of all colorful h-treelets rooted at v from neighbor aggregates."""
    staging: dict[int, int] = {}
    get = staging.get
    for h1 in range(1, h):
        rec = levels[h1].record(v)
        agg = aggs[h - h1]
        if not rec or not agg:
            continue
        keys2 = sorted(agg)
        vals2 = [agg[x] for x in keys2]
        n2 = len(keys2)
        prev = 0
        for k1, cum in zip(rec.keys, rec.cums):
            c1 = cum - prev
            prev = cum
            t1 = k1 >> _SHIFT
            s1 = k1 & _MASK
            mc = tl.max_child(t1)
            j = bisect_left(keys2, mc << _SHIFT) if mc >= 0 else 0
            l1 = 2 * t1.bit_count()
            head = t1 | (1 << l1)
            sh = l1 + 1
            for j in range(j, n2):
                k2 = keys2[j]
                s2 = k2 & _MASK
                if s1 & s2:
                    continue
                key = ((head | ((k2 >> _SHIFT) << sh)) << _SHIFT) | s1 | s2
                staging[key] = get(key, 0) + c1 * vals2[j]
    for key, val in staging.items():
        b = tl.beta(key >> _SHIFT)
        if b > 1:
            q, r = divmod(val, b)
            if r:
                raise AssertionError(f"count {val} not divisible by beta={b}")
            staging[key] = q
    return staging


def _node_counts(v: int, h: int, levels, adj) -> dict[int, int]:
    nbrs = adj[v]
    if not nbrs:
        return {}
    return _combine(v, h, levels, _aggregate(nbrs, levels, h))


def _split(seq, parts: int):
    step = max(1, math.ceil(len(seq) / parts))
    return [seq[i:i + step] for i in range(0, len(seq), step)]


def _build_level(graph: Graph, table: CountTable, h: int, nodes, threads: int) -> None:
    levels = table.levels
    adj = graph.adj
    writer: LevelWriter = table.writer(h)

    def run_chunk(chunk):
        out = []
        for v in chunk:
            writer.stage_counts(v, _node_counts(v, h, levels, adj))
            out.append(v)
        return out

    if threads <= 1:
        for v in nodes:
            writer.stage_counts(v, _node_counts(v, h, levels, adj))
            writer.finalize_record(v)
    else:
        # bulk: whole vertices per worker; tail: one vertex's neighbor sum split across workers
        split_at = max(0, len(nodes) - threads)
        bulk, tail = nodes[:split_at], nodes[split_at:]
        chunk = max(1, min(256, len(bulk) // (4 * threads) or 1))
        with ThreadPoolExecutor(max_workers=threads) as ex:
            for done in ex.map(run_chunk, [bulk[i:i + chunk] for i in range(0, len(bulk), chunk)]):
                for v in done:
                    writer.finalize_record(v)
            for v in tail:
                nbrs = adj[v]
                if not nbrs:
                    continue
                parts = list(ex.map(lambda part: _aggregate(part, levels, h), _split(nbrs, threads)))
                writer.stage_counts(v, _combine(v, h, levels, _reduce(parts)))
                writer.finalize_record(v)
    writer.sort_pass()


def run_dp(graph: Graph, colors, table: CountTable, max_h: int, threads: int = 1,
           zero_rooting: bool = True) -> CountTable:
    """Fill ``table`` with levels 1..max_h for the given colors."""
    colors = [int(c) for c in colors]
    w = table.writer(1)
    for v in range(graph.n):
        w.stage_add(v, tl.colored(tl.SINGLETON, 1 << colors[v]), 1)
        w.finalize_record(v)
    w.sort_pass()
    for h in range(2, max_h + 1):
        if zero_rooting and h == table.k:
            nodes = [v for v in range(graph.n) if colors[v] == 0]
        else:
            nodes = list(range(graph.n))
        _build_level(graph, table, h, nodes, threads)
        log.debug("level h=%d: %d entries", h, table.entry_count(h))
    return table


def build_tables(graph: Graph, coloring: Coloring, directory=None, threads: int = 1) -> CountTable:
    """Run the build-up phase; tables go to ``directory`` or stay in memory."""
    if coloring.k < 2:
        raise ValueError("k must be >= 2")
    if len(coloring.colors) != graph.n:
        raise ValueError("coloring does not match graph size")
    t0 = time.perf_counter()
    table = CountTable(coloring.k, directory, meta=coloring.as_meta())
    run_dp(graph, coloring.colors, table, coloring.k, threads)
    elapsed = time.perf_counter() - t0
    table.meta["build_seconds"] = elapsed
    if table.directory is not None:
        np.save(table.directory / "colors.npy", np.asarray(coloring.colors, dtype=np.uint8))
        write_manifest(table, graph, elapsed)
    return table


def write_manifest(table: CountTable, graph: Graph, seconds: float) -> Path:
    lines = [f"{key}: {val}" for key, val in table.meta.items() if key != "build_seconds"]
    lines += [f"n: {graph.n}", f"m: {graph.m}"]
    for h in sorted(table.levels):
        lvl = table.levels[h]
        lines.append(f"h{h}: records={len(lvl.nodes())} entries={lvl.entry_count()}")
    lines.append(f"wall_seconds: {seconds:.3f}")
    path = table.directory / "manifest.txt"
    path.write_text("\n".join(lines) + "\n")
    return path


def read_manifest(directory) -> dict:
    out = {}
    path = Path(directory) / "manifest.txt"
    if not path.exists():
        return out
    for line in path.read_text().splitlines():
        key, _, val = line.partition(": ")
        out[key] = val
    return out


def open_tables(directory) -> CountTable:
    """Reopen a built table directory, restoring the coloring metadata."""
    man = read_manifest(directory)
    meta = {}
    if man:
        meta = {"k": int(man["k"]), "seed": int(man["seed"]), "mode": man["mode"],
                "lambda": man.get("lambda", "")}
    return CountTable.open(directory, meta)


def table_lambda(table: CountTable) -> float | None:
    lam = table.meta.get("lambda", "")
    return float(lam) if lam not in ("", None) else None


def choose_lambda(graph: Graph, k: int, b: float = 2.0, seed: int = 0,
                  min_fraction: float = 0.01) -> float:
    """Smallest lambda in the doubling schedule whose size-2 probe is non-trivial.

    Starts at 1/(b(k-1)n) and doubles until at least ``min_fraction`` of the
    nodes have a positive size-2 count.  Falls back to 1/k (uniform) when the
    schedule reaches 1/(k-1).
    """
    if b <= 1:
        raise ValueError("b must be > 1")
    cap = 1.0 / (k - 1)
    lam = 1.0 / (b * (k - 1) * max(graph.n, 1))
    while lam < cap:
        coloring = color_graph(graph, BuildConfig(k, seed=seed, lam=lam))
        probe = CountTable(k)
        run_dp(graph, coloring.colors, probe, 2, zero_rooting=False)
        positive = len(probe.nodes(2))
        if positive >= min_fraction * graph.n:
            return lam
        lam *= 2
    log.warning("lambda schedule reached 1/(k-1); using uniform coloring")
    return 1.0 / k
