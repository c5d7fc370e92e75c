"""End-to-end acceptance checks.

Each test prints one ``criterion N: PASS|FAIL ...`` line straight to the
terminal and the lines are repeated in the session summary.  Failing criteria
are left failing; see the project notes for the analysis.
"""

import io
import math
import random
import statistics
import time
from itertools import permutations

import networkx as nx
import numpy as np
import pytest

from motifcount import motif
from motifcount import treelet as tl
from motifcount.ags import ags_run
from motifcount.build import BuildConfig, Coloring, build_tables, color_graph
from motifcount.graph import Graph
from motifcount.metrics import count_errors, l1_distance
from motifcount.oracle import (exact_census, exact_colorful_treelets, exact_spanning_trees, gen_complete,
                               gen_er, gen_lollipop)
from motifcount.sample import EmptyUrnError, naive_run
from motifcount.table import ENTRY_BYTES

RESULTS: dict[int, str] = {}


@pytest.fixture
def report(capsys):
    def emit(n: int, ok: bool, detail: str) -> None:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}"
        RESULTS[n] = line
        with capsys.disabled():
            print("\n" + line)
        assert ok, line
    return emit


def _table_dict(table, h):
    return {(key, v): c for v in table.nodes(h) for key, c in table.record(v, h).items()}


def _rainbow_coloring(graph, k, seed):
    return color_graph(graph, BuildConfig(k, seed=seed))


def test_criterion_01_dp_exactness(report):
    t0 = time.perf_counter()
    rng = random.Random(1)
    bad = checked = 0
    for gi in range(50):
        g = gen_er(rng.randint(6, 12), 0.3, seed=gi)
        for k in (3, 4, 5):
            for seed in range(3):
                col = color_graph(g, BuildConfig(k, seed=1000 * gi + 10 * k + seed))
                table = build_tables(g, col)
                for h in range(1, k + 1):
                    checked += 1
                    if _table_dict(table, h) != exact_colorful_treelets(g, col.colors, h, zero_rooted=h == k):
                        bad += 1
    secs = time.perf_counter() - t0
    report(1, bad == 0 and secs < 120, f"{checked} levels compared, {bad} mismatches, {secs:.1f}s")


def test_criterion_02_colorful_probability(report):
    t0 = time.perf_counter()
    trials = 100_000
    rng = np.random.default_rng(2)
    colors = rng.integers(0, 5, size=(trials, 5))
    srt = np.sort(colors, axis=1)
    rate = float(np.all(np.diff(srt, axis=1) != 0, axis=1).mean())
    p = float(motif.p_k(5))
    sd = math.sqrt(p * (1 - p) / trials)
    secs = time.perf_counter() - t0
    report(2, abs(rate - p) <= 4 * sd and secs < 10 and abs(p - 0.0384) < 1e-4,
           f"rate {rate:.5f} vs p_5 {p:.5f} (4 sd = {4 * sd:.5f}), {secs:.1f}s")


@pytest.mark.slow
def test_criterion_03_l1_error(report):
    t0 = time.perf_counter()
    g = gen_er(25, 0.3, seed=3)
    truth = exact_census(g, 4).counts
    gamma = 10
    sums: dict[int, float] = {}
    for i in range(gamma):
        table = build_tables(g, color_graph(g, BuildConfig(4, seed=300 + i)))
        res = naive_run(table, g, samples=1_000_000, seed=i)
        for c, v in res.estimates.items():
            sums[c] = sums.get(c, 0.0) + v / gamma
    l1 = l1_distance(sums, truth)
    secs = time.perf_counter() - t0
    report(3, l1 < 0.05 and secs < 300, f"l1 = {l1:.4f} over {gamma} colorings x 1e6 samples, {secs:.1f}s")


def test_criterion_04_spanning_trees(report):
    t0 = time.perf_counter()
    bad = []
    for k in range(2, 7):
        for code in motif.all_graphlets(k):
            sigma, prof = exact_spanning_trees(motif.unpack(code, k))
            if motif.spanning_trees(code, k) != sigma or motif.spanning_profile(code, k) != prof:
                bad.append(("enum", k, code))
    for k in range(2, 9):
        full = (1 << (k * (k - 1) // 2)) - 1
        if motif.spanning_trees(full, k) != k ** (k - 2):
            bad.append(("cayley", k))
    for k in range(2, 8):
        for code in motif.all_graphlets(k):
            if sum(motif.spanning_profile(code, k).values()) != motif.spanning_trees(code, k):
                bad.append(("profile", k, code))
    secs = time.perf_counter() - t0
    report(4, not bad and secs < 300, f"{len(bad)} disagreements, {secs:.1f}s")


def test_criterion_05_census_cardinality(report):
    counts = {k: len(motif.all_graphlets(k)) for k in (3, 4, 5, 6)}
    # independent check: connected 6-node graphs of the networkx atlas, canonicalized here
    atlas = set()
    for h in nx.graph_atlas_g():
        if h.number_of_nodes() == 6 and nx.is_connected(h):
            rows = [0] * 6
            for a, b in h.edges():
                rows[a] |= 1 << b
                rows[b] |= 1 << a
            atlas.add(motif.canonical_rows(rows))
    ok = counts == {3: 2, 4: 6, 5: 21, 6: 112} and atlas == set(motif.all_graphlets(6))
    report(5, ok, f"distinct graphlets {counts}, atlas 6-node {len(atlas)}")


@pytest.mark.slow
def test_criterion_06_ags_guarantee(report):
    t0 = time.perf_counter()
    g = gen_er(25, 0.3, seed=6)
    good = 0
    worst = []
    for run in range(20):
        col = color_graph(g, BuildConfig(4, seed=600 + run))
        table = build_tables(g, col)
        truth = exact_census(g, 4, colors=col.colors).counts
        res = ags_run(table, g, epsilon=0.5, delta=0.1, seed=run)
        errs = count_errors(res.colorful, truth)
        worst.append(max(abs(e) for e in errs.values()))
        good += all(abs(e) <= 0.5 for e in errs.values())
    secs = time.perf_counter() - t0
    report(6, good >= 18 and secs < 600,
           f"{good}/20 runs within 1 +- 0.5 (median worst err {statistics.median(worst):.3f}), {secs:.1f}s")


@pytest.mark.slow
def test_criterion_07_ags_vs_naive(report):
    t0 = time.perf_counter()
    g = gen_lollipop(60, 3)
    wins = rare = 0
    detail = []
    for run in range(20):
        col = color_graph(g, BuildConfig(5, seed=700 + run))
        table = build_tables(g, col)
        truth = exact_census(g, 5, colors=col.colors).counts
        res = ags_run(table, g, epsilon=0.5, delta=0.1, seed=run)
        budget = res.samples + res.discarded
        nv = naive_run(table, g, samples=budget, seed=run)
        ags_ok = sum(abs(e) <= 0.5 for e in count_errors(res.colorful, truth).values())
        naive_ok = sum(abs(e) <= 0.5 for e in count_errors(nv.colorful, truth).values())
        wins += ags_ok > naive_ok
        rarest = min(truth, key=lambda c: (truth[c], c))
        rare += res.counts.get(rarest, 0) > 0 and nv.hist.get(rarest, 0) == 0
        detail.append(f"{ags_ok}/{naive_ok}")
    secs = time.perf_counter() - t0
    report(7, wins >= 15 and rare >= 10 and secs < 600,
           f"AGS more accurate graphlets in {wins}/20, rarest found only by AGS in {rare}/20 "
           f"(accurate AGS/naive per run: {' '.join(detail)}), {secs:.1f}s")


def test_criterion_08_codec(report):
    t0 = time.perf_counter()
    by_size = {h: tl.enumerate_treelets(h) for h in range(1, 8)}
    sizes = [len(by_size[h]) for h in range(1, 8)]
    bad = 0
    merged = 0
    for h1 in range(1, 8):
        for h2 in range(1, 9 - h1):
            for t1 in by_size[h1]:
                for t2 in by_size[h2]:
                    if not tl.can_merge_codes(t1, t2):
                        continue
                    t = tl.merge(t1, t2)
                    merged += 1
                    if tl.decomp(t) != (t1, t2) or tl.size(t) != h1 + h2 or not tl.is_canonical(t):
                        bad += 1
    for t in tl.enumerate_treelets(8):
        if tl.merge(*tl.decomp(t)) != t:
            bad += 1
    rng = random.Random(8)
    for _ in range(10_000):
        k = rng.randint(2, 8)
        g = nx.gnp_random_graph(k, rng.uniform(0.3, 0.9), seed=rng.randrange(1 << 30))
        if not nx.is_connected(g):
            g = nx.compose(g, nx.path_graph(k))
        perm = list(range(k))
        rng.shuffle(perm)
        rows, prow = [0] * k, [0] * k
        for a, b in g.edges():
            rows[a] |= 1 << b
            rows[b] |= 1 << a
            prow[perm[a]] |= 1 << perm[b]
            prow[perm[b]] |= 1 << perm[a]
        if motif.canonical_rows(rows) != motif.canonical_rows(prow):
            bad += 1
    secs = time.perf_counter() - t0
    ok = sizes == [1, 1, 2, 4, 9, 20, 48] and bad == 0 and secs < 60
    report(8, ok, f"treelets per size {sizes}, {merged} merges, {bad} failures, {secs:.1f}s")


def test_criterion_09_determinism_format(report, tmp_path):
    g = gen_er(150, 0.06, seed=9)
    col = color_graph(g, BuildConfig(5, seed=9))
    a = build_tables(g, col, tmp_path / "a", threads=1)
    entries = {h: a.entry_count(h) for h in range(1, 6)}
    a.close()
    build_tables(g, col, tmp_path / "b", threads=8).close()
    same = all((tmp_path / "a" / f"h{h:02d}.mtvt").read_bytes() == (tmp_path / "b" / f"h{h:02d}.mtvt").read_bytes()
               for h in range(1, 6))
    buf = io.BytesIO()
    g.write_binary(buf)
    buf.seek(0)
    back = Graph.read_binary(buf)
    roundtrip = back == g and back.to_bytes() == g.to_bytes()
    report(9, same and ENTRY_BYTES == 22 and roundtrip,
           f"1 vs 8 threads identical={same}, entry width {ENTRY_BYTES}, graph roundtrip={roundtrip}, "
           f"entries {entries}")


def _build_seconds(g, seed):
    col = color_graph(g, BuildConfig(5, seed=seed))
    t0 = time.perf_counter()
    build_tables(g, col)
    return time.perf_counter() - t0


def test_criterion_10_scaling(report):
    small, big = gen_er(1000, 0.01, seed=10), gen_er(1000, 0.02, seed=10)
    t_small = statistics.median(_build_seconds(small, s) for s in range(5))
    t_big = statistics.median(_build_seconds(big, s) for s in range(5))
    ratio = t_big / t_small
    report(10, ratio <= 2.5, f"m {small.m} -> {big.m}: median build {t_small:.3f}s -> {t_big:.3f}s, "
                             f"ratio {ratio:.2f}")


@pytest.mark.slow
def test_criterion_11_biased_coloring(report):
    t0 = time.perf_counter()
    g = gen_er(2000, 0.005, seed=11)
    uniform = build_tables(g, color_graph(g, BuildConfig(5, seed=11)))
    lam = 0.001
    biased = build_tables(g, color_graph(g, BuildConfig(5, seed=11, lam=lam)))
    e_uni = sum(uniform.entry_count(h) for h in range(1, 6))
    e_bia = sum(biased.entry_count(h) for h in range(1, 6))
    truth = exact_census(g, 5).counts
    frequent = {c: n for c, n in truth.items() if n >= 100}
    try:
        res = naive_run(biased, g, samples=1_000_000, seed=11, lam=lam)
        errs = count_errors(res.estimates, frequent)
        close = sum(abs(e) <= 0.25 for e in errs.values())
        note = f"{close}/{len(frequent)} frequent graphlets within 25%"
        ok_est = close == len(frequent)
    except EmptyUrnError:
        note = f"biased table holds no colorful 5-treelets; 0/{len(frequent)} graphlets estimated"
        ok_est = False
    secs = time.perf_counter() - t0
    report(11, e_bia < e_uni and ok_est, f"entries {e_uni} -> {e_bia}; {note}, {secs:.1f}s")
