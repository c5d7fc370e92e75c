import numpy as np
import pytest

from motifcount import treelet as tl
from motifcount.build import (BuildConfig, Coloring, build_tables, choose_lambda, color_graph,
                              open_tables, read_manifest)
from motifcount.graph import Graph
from motifcount.oracle import exact_colorful_treelets, gen_complete, gen_er, gen_star

from conftest import random_graph, triangle


def _table_dict(table, h):
    return {(key, v): c for v in table.nodes(h) for key, c in table.record(v, h).items()}


def _matches_oracle(g, colors, k):
    table = build_tables(g, Coloring(k, np.asarray(colors, dtype=np.uint8)))
    for h in range(1, k + 1):
        assert _table_dict(table, h) == exact_colorful_treelets(g, colors, h, zero_rooted=(h == k))
    return table


def test_config_validation():
    with pytest.raises(ValueError):
        BuildConfig(1)
    with pytest.raises(ValueError):
        BuildConfig(17)
    with pytest.raises(ValueError):
        BuildConfig(5, lam=0.3)
    with pytest.raises(ValueError):
        BuildConfig(5, lam=0.0)
    BuildConfig(5, lam=0.2)


def test_uniform_coloring_frequencies():
    g = Graph.from_edges(100_000, [])
    col = color_graph(g, BuildConfig(5, seed=11))
    freq = np.bincount(col.colors, minlength=5) / g.n
    sd = (0.2 * 0.8 / g.n) ** 0.5
    assert np.all(np.abs(freq - 0.2) < 4 * sd)


def test_coloring_is_deterministic():
    g = gen_er(200, 0.05, seed=1)
    a = color_graph(g, BuildConfig(5, seed=3))
    b = color_graph(g, BuildConfig(5, seed=3))
    c = color_graph(g, BuildConfig(5, seed=4))
    assert np.array_equal(a.colors, b.colors)
    assert not np.array_equal(a.colors, c.colors)


def test_biased_coloring_frequencies():
    g = Graph.from_edges(100_000, [])
    col = color_graph(g, BuildConfig(6, seed=2, lam=0.001))
    counts = np.bincount(col.colors, minlength=6)
    sd = (0.001 * 0.999 * g.n) ** 0.5
    assert np.all(np.abs(counts[1:] - 100) < 4 * sd)
    assert col.mode == "biased"


@pytest.mark.parametrize("cset,expected", [(0b0110, 2 * 0.1 ** 2), (0b0011, 2 * 0.1 * 0.7)])
def test_biased_set_probability(cset, expected):
    # disjoint node pairs act as independent trials
    n = 200_000
    col = color_graph(Graph.from_edges(n, []), BuildConfig(4, seed=5, lam=0.1)).colors
    a, b = col[0::2].astype(np.int64), col[1::2].astype(np.int64)
    hit = ((1 << a) | (1 << b)) == cset
    trials = n // 2
    sd = (expected * (1 - expected) / trials) ** 0.5
    assert abs(hit.mean() - expected) < 4 * sd


def test_triangle_rainbow():
    table = _matches_oracle(triangle(), [0, 1, 2], 3)
    assert table.nodes(3) == [0]
    assert table.occ_total(0) == 3


def test_star_matches_oracle():
    g = gen_star(4)
    for colors in ([0, 1, 2, 1], [1, 0, 2, 0], [2, 1, 0, 1]):
        _matches_oracle(g, colors, 3)


def test_monochromatic_is_empty():
    g = gen_complete(5)
    for k in (2, 3, 4):
        table = build_tables(g, Coloring(k, np.zeros(5, dtype=np.uint8)))
        assert all(table.entry_count(h) == 0 for h in range(2, k + 1))


def test_random_graphs_match_oracle():
    for seed in range(6):
        g = random_graph(11, 0.35, seed)
        for k in (3, 4, 5):
            col = color_graph(g, BuildConfig(k, seed=seed))
            _matches_oracle(g, col.colors, k)


def test_size_k_only_at_color_zero():
    g = gen_er(40, 0.2, seed=3)
    col = color_graph(g, BuildConfig(4, seed=1))
    table = build_tables(g, col)
    assert table.nodes(4)
    assert all(col.colors[v] == 0 for v in table.nodes(4))
    assert len(table.nodes(3)) > len(table.nodes(4))


def test_threads_bit_identical(tmp_path):
    g = gen_er(120, 0.08, seed=9)
    col = color_graph(g, BuildConfig(5, seed=1))
    build_tables(g, col, tmp_path / "a", threads=1).close()
    build_tables(g, col, tmp_path / "b", threads=8).close()
    for h in range(1, 6):
        name = f"h{h:02d}.mtvt"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_manifest_and_reopen(tmp_path):
    g = gen_er(30, 0.2, seed=2)
    col = color_graph(g, BuildConfig(4, seed=7, lam=0.05))
    table = build_tables(g, col, tmp_path)
    table.close()
    man = read_manifest(tmp_path)
    assert man["k"] == "4" and man["seed"] == "7" and man["mode"] == "biased"
    assert float(man["lambda"]) == 0.05
    assert "wall_seconds" in man and "h4" in man
    again = open_tables(tmp_path)
    assert again.k == 4 and again.meta["seed"] == 7
    again.close()


def test_choose_lambda_schedule():
    g = gen_er(1000, 0.01, seed=1)
    lam = choose_lambda(g, 5, 2.0)
    start = 1 / 8000
    ratio = lam / start
    assert ratio >= 1 and abs(ratio - round(ratio)) < 1e-9
    assert round(ratio) & (round(ratio) - 1) == 0


def test_choose_lambda_complete_graph_baseline():
    # regression baseline: first probe already has positive counts on K50
    assert choose_lambda(gen_complete(50), 5, 2.0) == pytest.approx(1 / 400)


def test_choose_lambda_small_k():
    lam = choose_lambda(gen_complete(2), 2, 2.0)
    assert 0 < lam <= 1


def test_choose_lambda_cap_falls_back_to_uniform():
    g = Graph.from_edges(50, [])
    assert choose_lambda(g, 5, 2.0) == pytest.approx(0.2)
