import io
import math

import networkx as nx
import pytest

from motifcount import motif
from motifcount import treelet as tl
from motifcount.graph import Graph
from motifcount.oracle import (Census, exact_census, exact_colorful_treelets, exact_spanning_trees,
                               gen_complete, gen_cycle, gen_er, gen_lollipop, gen_path, gen_star,
                               naive_census, read_census, write_census)

TRI3 = motif.canonical(0b111, 3)
PATH3 = motif.canonical(0b011, 3)


def _rows(g: Graph) -> list[int]:
    rows = [0] * g.n
    for v in range(g.n):
        for u in g.adj[v]:
            rows[v] |= 1 << int(u)
    return rows


def test_small_census_examples():
    assert exact_census(gen_complete(3), 3).counts == {TRI3: 1}
    assert exact_census(gen_complete(4), 3).counts == {TRI3: 4}
    assert exact_census(gen_cycle(4), 3).counts == {PATH3: 4}


@pytest.mark.parametrize("seed", range(6))
@pytest.mark.parametrize("k", [3, 4, 5])
def test_ordered_extension_matches_subset_filter(seed, k):
    g = gen_er(13, 0.3, seed=seed)
    assert exact_census(g, k).counts == naive_census(g, k).counts


@pytest.mark.parametrize("n,k", [(5, 3), (9, 4), (12, 5), (7, 7)])
def test_path_closed_form(n, k):
    census = exact_census(gen_path(n), k)
    assert census.total == n - k + 1
    assert len(census.counts) == 1


def test_colored_census_only_counts_rainbow_sets():
    g = gen_complete(4)
    assert exact_census(g, 3, colors=[0, 0, 1, 2]).counts == {TRI3: 2}
    assert exact_census(g, 3, colors=[0, 0, 0, 1]).counts == {}


def test_census_budget_partial():
    g = gen_complete(10)
    census = exact_census(g, 4, budget=20)
    assert census.partial and census.total == 20
    assert not exact_census(g, 4).partial


def test_triangle_rainbow_edges():
    out = exact_colorful_treelets(gen_complete(3), [0, 1, 2], 2)
    edge = tl.merge(tl.SINGLETON, tl.SINGLETON)
    for v in range(3):
        sets = sorted(key & 0xFFFF for (key, r) in out if r == v)
        others = [c for c in range(3) if c != v]
        assert sets == sorted((1 << v) | (1 << c) for c in others)
        assert all(key >> 16 == edge and n == 1 for (key, r), n in out.items())


def test_monochrome_has_no_colorful_edges():
    assert exact_colorful_treelets(gen_complete(4), [1, 1, 1, 1], 2) == {}


def test_spanning_tree_examples():
    path4, star4 = tl.enumerate_shapes(4)
    sigma, prof = exact_spanning_trees(_rows(gen_complete(4)))
    assert sigma == 16 and prof == {path4: 12, star4: 4}
    sigma, prof = exact_spanning_trees(_rows(gen_cycle(5)))
    assert sigma == 5 and list(prof) == [tl.enumerate_shapes(5)[0]]
    assert exact_spanning_trees(_rows(gen_star(6)))[0] == 1


def test_generators():
    lol = gen_lollipop(10, 3)
    assert lol.m == math.comb(7, 2) + 3
    assert nx.is_connected(nx.Graph(list(lol.edges())))
    star = gen_star(5)
    assert star.m == 4 and star.stats()["max_degree"] == 4
    a, b = gen_er(40, 0.2, seed=9), gen_er(40, 0.2, seed=9)
    assert list(a.edges()) == list(b.edges())
    with pytest.raises(ValueError):
        gen_lollipop(3, 3)
    with pytest.raises(ValueError):
        gen_er(5, 1.5)


def test_census_file_roundtrip(tmp_path):
    census = exact_census(gen_er(14, 0.35, seed=2), 4)
    text = write_census(census, tmp_path / "c.csv")
    assert text.splitlines()[1] == "graphlet_code_hex,count"
    back = read_census(tmp_path / "c.csv")
    assert back.k == 4 and back.counts == census.counts
    assert read_census(io.StringIO(text)).counts == census.counts
    assert all(len(line.split(",")[0]) == 32 for line in text.splitlines()[2:])


def test_census_is_order_independent():
    g = gen_er(12, 0.4, seed=5)
    perm = list(reversed(range(g.n)))
    h = Graph.from_edges(g.n, [(perm[u], perm[v]) for u, v in g.edges()])
    assert exact_census(g, 4).counts == exact_census(h, 4).counts
    assert Census(4, {1: 2, 3: 2}).frequencies() == {1: 0.5, 3: 0.5}
