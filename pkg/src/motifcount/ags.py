"""Adaptive graphlet sampling.

Samples are drawn from one unrooted treelet shape at a time.  Each draw from
shape j adds sigma_ji / r_j to the weight of every graphlet i; once a
graphlet has been seen ``cbar`` times it is covered, and sampling switches to
the shape least likely to land on covered graphlets.  The estimate of the
colorful count of graphlet i is c_i / w_i.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import TextIO

import numpy as np

from . import motif
from .graph import Graph
from .sample import (BatchSampler, EmptyUrnError, NeighborBuffer, RootAlias, materialize,
                     sample_occurrence_of_shape)
from .table import CountTable

DEFAULT_CBAR = 1000


def cbar(epsilon: float, delta: float, s: int) -> int:
    """Covering threshold ceil(4/eps^2 * ln(2s/delta))."""
    if not (0 < epsilon < 1 and 0 < delta < 1) or s < 1:
        raise ValueError("need 0 < epsilon, delta < 1 and s >= 1")
    return math.ceil(4.0 / epsilon ** 2 * math.log(2 * s / delta))


@dataclass
class AgsState:
    k: int
    cbar: int
    r: dict[int, int]
    profiles: motif.ProfileCache
    s: int
    counts: dict[int, int] = field(default_factory=dict)
    shape_samples: dict[int, int] = field(default_factory=dict)
    covered: list[int] = field(default_factory=list)
    current: int | None = None
    exact: bool = False

    def sigma_row(self, code: int) -> dict[int, int]:
        return self.profiles.profile(code, self.k)

    def weight(self, code: int):
        """w_i = sum_j n_j sigma_ji / r_j over the samples drawn so far."""
        row = self.sigma_row(code)
        terms = [Fraction(n * row.get(j, 0), self.r[j]) for j, n in self.shape_samples.items() if n]
        if self.exact:
            return sum(terms, Fraction(0))
        return math.fsum(float(t) for t in terms)

    def estimate(self, code: int) -> float:
        w = self.weight(code)
        return float(Fraction(self.counts[code]) / Fraction(w)) if w else 0.0

    def score(self, shape: int) -> float:
        """Estimated probability that a sample of ``shape`` lands on a covered graphlet."""
        acc = []
        for code in self.covered:
            sig = self.sigma_row(code).get(shape, 0)
            if sig:
                acc.append(sig * self.estimate(code))
        return math.fsum(acc) / self.r[shape]


def select_next_treelet(state: AgsState) -> int:
    """Shape minimizing the covered-graphlet score; ties go to the smallest code."""
    shapes = sorted(j for j, r in state.r.items() if r > 0)
    if not shapes:
        raise EmptyUrnError("no treelet shape has colorful occurrences")
    return min(shapes, key=lambda j: (state.score(j), j))


@dataclass
class AgsResult:
    k: int
    colorful: dict[int, float]
    estimates: dict[int, float]
    counts: dict[int, int]
    covered: list[int]
    samples: int
    partial: bool
    p: float
    cbar: int
    shape_samples: dict[int, int]
    events: list[dict]
    initial_shape: int
    reason: str = ""
    discarded: int = 0


class _ShapeDraws:
    """Per-shape batches: vectorized when int64 suffices, exact scalar otherwise."""

    def __init__(self, table: CountTable, graph: Graph, seed: int):
        self.table = table
        self.graph = graph
        self.rng = np.random.default_rng(seed)
        self.pyrng = random.Random(seed)
        self._samplers: dict[int, BatchSampler | None] = {}
        self._alias: dict[int, RootAlias] = {}
        self._buffer = NeighborBuffer(table, graph)

    def draw(self, shape: int, m: int) -> list[int]:
        if shape not in self._samplers:
            try:
                self._samplers[shape] = BatchSampler(self.table, self.graph, shape)
            except OverflowError:
                self._samplers[shape] = None
        sampler = self._samplers[shape]
        if sampler is not None:
            return sampler.draw_codes(m, self.rng).tolist()
        alias = self._alias.get(shape)
        if alias is None:
            alias = self._alias[shape] = RootAlias.for_table(self.table, shape)
        return [materialize(sample_occurrence_of_shape(self.table, self.graph, shape, self.pyrng,
                                                       alias, self._buffer), self.graph)
                for _ in range(m)]


def ags_run(table: CountTable, graph: Graph, epsilon: float | None = None, delta: float | None = None,
            cbar_override: int | None = None, seed: int = 0, max_samples: int | None = None,
            patience: int | None = None, lam: float | None = None,
            profiles: motif.ProfileCache | None = None, diagnostics: TextIO | None = None,
            batch: int = 1024, exact: bool = False) -> AgsResult:
    """Run adaptive sampling until every seen graphlet is covered.

    The loop also stops after ``patience`` consecutive samples that only hit
    covered graphlets (default: the covering threshold); those trailing
    samples are dropped from the counts and weights.  Hitting ``max_samples``
    draws stops early and flags the result partial.
    """
    k = table.k
    s = motif.GRAPHLET_COUNTS[k]
    if cbar_override is not None:
        threshold = int(cbar_override)
    elif epsilon is not None and delta is not None:
        threshold = cbar(epsilon, delta, s)
    else:
        threshold = DEFAULT_CBAR
    if threshold < 1:
        raise ValueError("covering threshold must be >= 1")
    patience = threshold if patience is None else patience
    profiles = profiles or motif.ProfileCache()
    r = {j: v for j, v in table.unrooted_totals().items() if v > 0}
    if not r:
        raise EmptyUrnError("no colorful treelets to sample from")
    state = AgsState(k, threshold, r, profiles, s, exact=exact)
    # first shape: the one with the most colorful occurrences
    state.current = first = max(sorted(r), key=lambda j: r[j])
    draws = _ShapeDraws(table, graph, seed)
    events: list[dict] = []
    covered = set()
    drawn = 0
    streak = 0
    window: list[int] = []
    discarded = 0
    reason = ""
    step = batch
    while True:
        if len(covered) == s:
            reason = "all graphlets covered"
            break
        if max_samples is not None and drawn >= max_samples:
            reason = "max samples reached"
            break
        m = step if max_samples is None else min(step, max_samples - drawn)
        switched = False
        stop = False
        for code in draws.draw(state.current, m):
            drawn += 1
            j = state.current
            state.shape_samples[j] = state.shape_samples.get(j, 0) + 1
            c = state.counts.get(code, 0) + 1
            state.counts[code] = c
            if code in covered:
                streak += 1
                window.append(code)
            else:
                streak = 0
                window.clear()
            if c == threshold and code not in covered:
                covered.add(code)
                state.covered.append(code)
                if len(covered) < s:
                    state.current = select_next_treelet(state)
                ev = {"sample": drawn, "covered": code, "shape": state.current,
                      "scores": {sh: state.score(sh) for sh in sorted(r)}}
                events.append(ev)
                if diagnostics is not None:
                    _report(diagnostics, ev)
                switched = True
                break
            if streak >= patience:
                reason = "patience exhausted"
                stop = True
                break
        if stop:
            # the window found nothing new: drop it so the result reflects the last discovery
            for code in window:
                state.counts[code] -= 1
            state.shape_samples[state.current] -= len(window)
            drawn -= len(window)
            discarded = len(window)
            break
        if not switched:
            step = min(step * 2, 1 << 16)
    p = float(motif.colorful_probability(k, lam))
    colorful = {code: state.estimate(code) for code in sorted(state.counts)}
    return AgsResult(
        k=k,
        colorful=colorful,
        estimates={code: est / p for code, est in colorful.items()},
        counts=dict(sorted(state.counts.items())),
        covered=list(state.covered),
        samples=drawn,
        partial=reason == "max samples reached" and len(covered) < s,
        p=p,
        cbar=threshold,
        shape_samples=dict(state.shape_samples),
        events=events,
        initial_shape=first,
        reason=reason,
        discarded=discarded,
    )


def _report(stream: TextIO, ev: dict) -> None:
    scores = " ".join(f"{sh:x}={sc:.3g}" for sh, sc in ev["scores"].items())
    print(f"sample={ev['sample']} covered={motif.code_hex(ev['covered'])} "
          f"shape={ev['shape']:x} scores: {scores}", file=stream)

