"""Sampling phase: uniform colorful treelet occurrences and the naive estimator.

An occurrence of a colored treelet ``T_C`` rooted at ``v`` is expanded by
decomposing ``T`` into ``(T', T'')`` and drawing the pair ``(C', u)`` with
probability proportional to ``c(T'_{C'}, v) * c(T''_{C \\ C'}, u)`` over
``u ~ v``; the two halves are then expanded recursively.  Every copy of
``T_C`` has exactly ``beta_T`` such preimages, so the result is uniform.

Two samplers share these semantics: a scalar one on exact Python integers
and a vectorized batch sampler on int64 cumulative arrays.
"""

from __future__ import annotations

import random
import time
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import accumulate

import numpy as np

from . import motif
from . import treelet as tl
from .graph import Graph
from .table import CountTable

_SHIFT = tl.COLOR_BITS
_MASK = tl.COLOR_MASK
_INT64_SAFE = 1 << 62


class EmptyUrnError(ValueError):
    pass


# -- root selection ----------------------------------------------------------

class RootAlias:
    """Walker/Vose alias table over nodes weighted by (possibly huge) integers."""

    def __init__(self, nodes: list[int], weights: list[int], shape: int | None = None):
        self.nodes = list(nodes)
        self.weights = list(weights)
        self.shape = shape
        self.total = sum(self.weights)
        if self.total <= 0:
            raise EmptyUrnError("no colorful treelets to sample from")
        n = len(self.weights)
        probs = [w / self.total * n for w in self.weights]
        # fall back to exact cumulative search if float scaling loses a weight
        self.exact = any(w > 0 and p == 0.0 for w, p in zip(self.weights, probs))
        if self.exact:
            self._cums = list(accumulate(self.weights))
            return
        self.prob = [0.0] * n
        self.alias = list(range(n))
        small = [i for i, p in enumerate(probs) if p < 1.0]
        large = [i for i, p in enumerate(probs) if p >= 1.0]
        while small and large:
            s, g = small.pop(), large.pop()
            self.prob[s] = probs[s]
            self.alias[s] = g
            probs[g] = probs[g] + probs[s] - 1.0
            (small if probs[g] < 1.0 else large).append(g)
        for i in small + large:
            self.prob[i] = 1.0

    @classmethod
    def for_table(cls, table: CountTable, shape: int | None = None) -> "RootAlias":
        nodes, weights = [], []
        for v in table.nodes():
            w = node_weight(table, v, shape)
            if w:
                nodes.append(v)
                weights.append(w)
        return cls(nodes, weights, shape)

    def draw(self, rng: random.Random) -> int:
        if self.exact:
            r = rng.randrange(self.total)
            return self.nodes[bisect_right(self._cums, r)]
        i = rng.randrange(len(self.nodes))
        return self.nodes[i] if rng.random() < self.prob[i] else self.nodes[self.alias[i]]


def _shape_spans(rec, shape: int | None):
    if shape is None:
        return [(0, len(rec))]
    return [s for s in (rec.span(t) for t in tl.rootings(shape)) if s[1] > s[0]]


def _span_weight(rec, lo: int, hi: int) -> int:
    return rec.cums[hi - 1] - (rec.cums[lo - 1] if lo else 0)


def node_weight(table: CountTable, v: int, shape: int | None = None) -> int:
    """Colorful k-treelets rooted at v, optionally restricted to one unrooted shape."""
    rec = table.record(v)
    return sum(_span_weight(rec, lo, hi) for lo, hi in _shape_spans(rec, shape))


# -- neighbor selection ------------------------------------------------------

class NeighborBuffer:
    """Neighbor draws u ~ c(T''_{C''}, u) over u ~ v, batched for high-degree v.

    For nodes of degree at least ``threshold`` the neighbor sweep runs once per
    ``batch`` draws and the totals are kept; draws stay independent because
    each buffered value is an independent draw from the same distribution.
    """

    def __init__(self, table: CountTable, graph: Graph, threshold: int = 10_000, batch: int = 100):
        self.table = table
        self.adj = graph.adj
        self.threshold = threshold
        self.batch = batch
        self._totals: dict[tuple[int, int], int] = {}
        self._pending: dict[tuple[int, int], list[int]] = {}
        self._last: tuple | None = None

    def _sweep(self, v: int, key: int) -> list[int]:
        lvl = self.table.levels.get(tl.size(key >> _SHIFT))
        if lvl is None:
            return [0] * len(self.adj[v])
        return list(accumulate(lvl.record(u).count(key) for u in self.adj[v]))

    def total(self, v: int, key: int) -> int:
        nbrs = self.adj[v]
        if not nbrs:
            return 0
        if len(nbrs) >= self.threshold:
            tot = self._totals.get((v, key))
            if tot is None:
                tot = self._sweep(v, key)[-1]
                self._totals[(v, key)] = tot
            return tot
        cums = self._sweep(v, key)
        self._last = (v, key, cums)
        return cums[-1]

    def draw(self, v: int, key: int, rng: random.Random) -> int:
        nbrs = self.adj[v]
        if len(nbrs) >= self.threshold:
            queue = self._pending.get((v, key))
            if not queue:
                cums = self._sweep(v, key)
                queue = [nbrs[bisect_right(cums, rng.randrange(cums[-1]))] for _ in range(self.batch)]
                self._pending[(v, key)] = queue
            return queue.pop()
        if self._last is not None and self._last[0] == v and self._last[1] == key:
            cums = self._last[2]
        else:
            cums = self._sweep(v, key)
        return nbrs[bisect_right(cums, rng.randrange(cums[-1]))]


# -- occurrences -------------------------------------------------------------

@dataclass(frozen=True)
class Occurrence:
    nodes: tuple[int, ...]
    key: int
    edges: tuple[tuple[int, int], ...] = ()

    def shape(self) -> int:
        return tl.shape_of_edges(self.edges, self.nodes) if self.edges else tl.SINGLETON


def _expand(table: CountTable, buf: NeighborBuffer, key: int, root: int,
            rng: random.Random) -> Occurrence:
    nodes: list[int] = []
    edges: list[tuple[int, int]] = []
    stack = [(key, root)]
    while stack:
        k0, v = stack.pop()
        t = k0 >> _SHIFT
        if t == tl.SINGLETON:
            nodes.append(v)
            continue
        colors = k0 & _MASK
        t1, t2 = tl.decomp(t)
        cands = []
        acc = 0
        for c1set, c1 in table.iter(t1, v):
            if c1set & ~colors:
                continue
            k2 = (t2 << _SHIFT) | (colors & ~c1set)
            tot = buf.total(v, k2)
            if tot:
                acc += c1 * tot
                cands.append((acc, c1set, k2))
        if not cands:
            raise AssertionError(f"inconsistent table at node {v} for key {k0:#x}")
        r = rng.randrange(acc)
        j = bisect_right([c[0] for c in cands], r)
        _, c1set, k2 = cands[j]
        u = buf.draw(v, k2, rng)
        edges.append((v, u))
        stack.append(((t1 << _SHIFT) | c1set, v))
        stack.append((k2, u))
    return Occurrence(tuple(sorted(nodes)), key, tuple(edges))


def _draw_key(rec, spans, rng: random.Random) -> int:
    weights = [_span_weight(rec, lo, hi) for lo, hi in spans]
    r = rng.randrange(sum(weights))
    for (lo, hi), w in zip(spans, weights):
        if r < w:
            base = rec.cums[lo - 1] if lo else 0
            return rec.keys[rec.select(base + r + 1)]
        r -= w
    raise AssertionError("unreachable")


def sample_occurrence(table: CountTable, graph: Graph, rng: random.Random,
                      alias: RootAlias | None = None, buffer: NeighborBuffer | None = None) -> Occurrence:
    """A uniformly random colorful k-treelet occurrence."""
    alias = alias or RootAlias.for_table(table)
    buffer = buffer or NeighborBuffer(table, graph)
    v = alias.draw(rng)
    key = table.sample_colored(v, rng)
    return _expand(table, buffer, key, v, rng)


def sample_occurrence_of_shape(table: CountTable, graph: Graph, shape: int, rng: random.Random,
                               alias: RootAlias | None = None,
                               buffer: NeighborBuffer | None = None) -> Occurrence:
    """A uniformly random colorful occurrence of the unrooted k-treelet ``shape``."""
    if alias is None or alias.shape != shape:
        alias = RootAlias.for_table(table, shape)
    buffer = buffer or NeighborBuffer(table, graph)
    v = alias.draw(rng)
    rec = table.record(v)
    key = _draw_key(rec, _shape_spans(rec, shape), rng)
    return _expand(table, buffer, key, v, rng)


def materialize(occ: Occurrence, graph: Graph) -> int:
    """Canonical code of the graphlet induced by the occurrence's nodes."""
    return motif.graphlet_code_of(graph, occ.nodes)


def materialize_many(nodes: np.ndarray, graph: Graph) -> np.ndarray:
    """Canonical codes for an (M, k) array of node sets."""
    M, k = nodes.shape
    if M == 0:
        return np.zeros(0, dtype=np.int64)
    if k == 1:
        return np.zeros(M, dtype=np.int64)
    raw = np.zeros(M, dtype=np.int64)
    bit = 0
    for i in range(k):
        for j in range(i + 1, k):
            raw |= graph.has_edges(nodes[:, i], nodes[:, j]).astype(np.int64) << bit
            bit += 1
    uniq, inv = np.unique(raw, return_inverse=True)
    canon = np.array([motif.canonical(int(c), k) for c in uniq], dtype=np.int64)
    return canon[inv.ravel()]


# -- vectorized sampler ------------------------------------------------------

class BatchSampler:
    """Draws many occurrences at once with numpy.

    Each expansion state ``(colored key, node)`` is compiled on first use into
    its list of ``(C', u)`` choices with int64 cumulative weights; a round of
    the batch then advances every pending state with one searchsorted.
    Raises OverflowError when the weights do not fit into int64.
    """

    def __init__(self, table: CountTable, graph: Graph, shape: int | None = None):
        self.table = table
        self.graph = graph
        self.k = table.k
        self.shape = shape
        self.adj = graph.adj
        self._sid: dict[tuple[int, int], int] = {}
        self._key: list[int] = []
        self._node: list[int] = []
        self._leaf: list[bool] = []
        self._base: list[int] = []
        self._tot: list[int] = []
        self._compiled: list[bool] = []
        self._cum: list[int] = []
        self._ca: list[int] = []
        self._cb: list[int] = []
        self._dirty = True
        self._build_roots()

    def _state(self, key: int, v: int) -> int:
        sid = self._sid.get((key, v))
        if sid is None:
            sid = len(self._key)
            self._sid[(key, v)] = sid
            self._key.append(key)
            self._node.append(v)
            self._leaf.append(key >> _SHIFT == tl.SINGLETON)
            self._base.append(0)
            self._tot.append(0)
            self._compiled.append(False)
        return sid

    def _build_roots(self) -> None:
        states, cums = [], []
        acc = 0
        for v in self.table.nodes():
            rec = self.table.record(v)
            for lo, hi in _shape_spans(rec, self.shape):
                prev = rec.cums[lo - 1] if lo else 0
                for j in range(lo, hi):
                    acc += rec.cums[j] - prev
                    prev = rec.cums[j]
                    states.append(self._state(rec.keys[j], v))
                    cums.append(acc)
        if acc == 0:
            raise EmptyUrnError("no colorful treelets to sample from")
        if acc >= _INT64_SAFE:
            raise OverflowError("urn too large for int64 sampling")
        self.total = acc
        self._root_state = np.array(states, dtype=np.int64)
        self._root_cum = np.array(cums, dtype=np.int64)

    def _compile(self, sid: int) -> None:
        key, v = self._key[sid], self._node[sid]
        t, colors = key >> _SHIFT, key & _MASK
        t1, t2 = tl.decomp(t)
        lvl2 = self.table.levels[tl.size(t2)]
        nbrs = self.adj[v]
        start = self._cum[-1] if self._cum else 0
        acc = start
        for c1set, c1 in self.table.iter(t1, v):
            if c1set & ~colors:
                continue
            k2 = (t2 << _SHIFT) | (colors & ~c1set)
            a = None
            for u in nbrs:
                c2 = lvl2.record(u).count(k2)
                if c2:
                    if a is None:
                        a = self._state((t1 << _SHIFT) | c1set, v)
                    acc += c1 * c2
                    self._cum.append(acc)
                    self._ca.append(a)
                    self._cb.append(self._state(k2, u))
        if acc >= _INT64_SAFE:
            raise OverflowError("treelet counts too large for int64 sampling")
        total = acc - start
        expect = tl.beta(t) * self.table.occ(key, v)
        if total != expect:
            raise AssertionError(f"state {key:#x}@{v}: weight {total} != {expect}")
        self._base[sid] = start
        self._tot[sid] = total
        self._compiled[sid] = True
        self._dirty = True

    def _arrays(self):
        if self._dirty:
            self._np_cum = np.array(self._cum, dtype=np.int64)
            self._np_ca = np.array(self._ca, dtype=np.int64)
            self._np_cb = np.array(self._cb, dtype=np.int64)
            self._np_base = np.array(self._base, dtype=np.int64)
            self._np_tot = np.array(self._tot, dtype=np.int64)
            self._np_leaf = np.array(self._leaf, dtype=bool)
            self._np_node = np.array(self._node, dtype=np.int64)
            self._dirty = False

    def draw_nodes(self, M: int, rng: np.random.Generator) -> np.ndarray:
        """An (M, k) array: each row the sorted nodes of one occurrence."""
        k = self.k
        if M == 0:
            return np.zeros((0, k), dtype=np.int64)
        r = rng.integers(0, self.total, size=M)
        states = self._root_state[np.searchsorted(self._root_cum, r, side="right")]
        samples = np.arange(M, dtype=np.int64)
        leaf_s, leaf_v = [], []
        while len(states):
            self._arrays()
            leaf = self._np_leaf[states]
            if leaf.any():
                leaf_s.append(samples[leaf])
                leaf_v.append(self._np_node[states[leaf]])
                samples, states = samples[~leaf], states[~leaf]
                if not len(states):
                    break
            compiled = self._compiled
            for sid in np.unique(states).tolist():
                if not compiled[sid]:
                    self._compile(sid)
            self._arrays()
            r = self._np_base[states] + rng.integers(0, self._np_tot[states])
            idx = np.searchsorted(self._np_cum, r, side="right")
            samples = np.concatenate([samples, samples])
            states = np.concatenate([self._np_ca[idx], self._np_cb[idx]])
        s = np.concatenate(leaf_s)
        v = np.concatenate(leaf_v)
        order = np.lexsort((v, s))
        return v[order].reshape(M, k)

    def draw_codes(self, M: int, rng: np.random.Generator) -> np.ndarray:
        return materialize_many(self.draw_nodes(M, rng), self.graph)


# -- naive estimation --------------------------------------------------------

@dataclass
class NaiveResult:
    k: int
    hist: dict[int, int]
    samples: int
    total: int
    p: float
    estimates: dict[int, float]
    colorful: dict[int, float]
    seconds: float = 0.0
    meta: dict = field(default_factory=dict)


def _draw_scalar(table, graph, M, seed, deadline=None):
    rng = random.Random(seed)
    alias = RootAlias.for_table(table)
    buf = NeighborBuffer(table, graph)
    hist: dict[int, int] = {}
    drawn = 0
    while drawn < M and (deadline is None or time.perf_counter() < deadline):
        code = materialize(sample_occurrence(table, graph, rng, alias, buf), graph)
        hist[code] = hist.get(code, 0) + 1
        drawn += 1
    return hist, drawn


def naive_run(table: CountTable, graph: Graph, samples: int | None = None, seconds: float | None = None,
              seed: int = 0, lam: float | None = None, profiles: motif.ProfileCache | None = None,
              chunk: int = 1 << 16, vectorized: bool = True) -> NaiveResult:
    """Draw occurrences from the whole urn, histogram their graphlets, estimate counts.

    The budget is a sample count, a wall-clock limit in seconds, or both
    (whichever runs out first).
    """
    if samples is None and seconds is None:
        raise ValueError("need a sample or time budget")
    k = table.k
    profiles = profiles or motif.ProfileCache()
    t0 = time.perf_counter()
    deadline = None if seconds is None else t0 + seconds
    cap = samples if samples is not None else 1 << 62
    t = table.total_treelets()
    hist: dict[int, int] = {}
    drawn = 0
    if cap > 0 and (deadline is None or seconds > 0):
        if t == 0:
            raise EmptyUrnError("no colorful treelets to sample from")
        sampler = None
        if vectorized:
            try:
                sampler = BatchSampler(table, graph)
            except OverflowError:
                sampler = None
        if sampler is None:
            hist, drawn = _draw_scalar(table, graph, cap, seed, deadline)
        else:
            rng = np.random.default_rng(seed)
            step = chunk if deadline is None else min(chunk, 4096)
            while drawn < cap and (deadline is None or time.perf_counter() < deadline):
                m = min(step, cap - drawn)
                codes = sampler.draw_codes(m, rng)
                uniq, cnt = np.unique(codes, return_counts=True)
                for c, n in zip(uniq.tolist(), cnt.tolist()):
                    hist[c] = hist.get(c, 0) + n
                drawn += m
    p = float(motif.colorful_probability(k, lam))
    sigma = {code: profiles.sigma(code, k) for code in hist}
    est = motif.estimate_from_histogram(hist, drawn, t, sigma, p)
    colorful = {c: g * p for c, g in est.items()}
    return NaiveResult(k, dict(sorted(hist.items())), drawn, t, p, est, colorful,
                       time.perf_counter() - t0)
