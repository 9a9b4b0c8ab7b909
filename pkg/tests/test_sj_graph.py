import itertools

import networkx as nx
import pytest

from xorpir.errors import ParameterError
from xorpir.sj_graph import (
    build_gamma,
    component_count,
    edge_target,
    enumerate_V,
    format_vertex,
    parse_vertex,
    v_size,
)

KNOWN_EDGES = [
    ("(1,101)", "(2,002)"),
    ("(3,202)", "(2,002)"),
    ("(1,110)", "(2,020)"),
    ("(3,220)", "(2,020)"),
    ("(1,112)", "(2,022)"),
    ("(3,222)", "(2,022)"),
    ("(1,211)", "(3,011)"),
    ("(2,121)", "(3,011)"),
    ("(2,211)", "(1,011)"),
    ("(3,121)", "(1,011)"),
]

SMALL = [(2, 1), (2, 2), (2, 3), (3, 2), (3, 3), (4, 2), (5, 2), (3, 4), (4, 3)]


# ---- independent oracle: brute-force V and the edge rule, components via networkx


def oracle_V(n, k):
    return [v for v in itertools.product(range(n), repeat=k) if any(v) and sum(v) % (n - 1) == 0]


def oracle_graph(ell, n, k):
    g = nx.Graph()
    W = [(r, v) for r in range(1, n + 1) for v in oracle_V(n, k)]
    g.add_nodes_from(W)
    for r, v in W:
        if v[ell - 1] == 0:
            continue
        nonzero_others = [i for i in range(k) if i != ell - 1 and v[i]]
        if not nonzero_others:
            continue
        # next non-zero coordinate after ell, cyclically
        order = [(ell - 1 + d) % k for d in range(1, k)]
        ell2 = next(i for i in order if v[i])
        w = next(x for x in range(1, n) if (x - v[ell - 1] - v[ell2]) % (n - 1) == 0)
        v2 = list(v)
        v2[ell - 1] = 0
        v2[ell2] = w
        r2 = next(x for x in range(1, n + 1) if (x - r - v[ell - 1]) % n == 0)
        g.add_edge((r, v), (r2, tuple(v2)))
    return g


@pytest.mark.parametrize(
    "n, k, expected",
    [(2, 2, [(0, 1), (1, 0), (1, 1)]), (3, 2, [(0, 2), (1, 1), (2, 0), (2, 2)])],
)
def test_enumerate_V_examples(n, k, expected):
    assert list(enumerate_V(n, k)) == expected


@pytest.mark.parametrize("n, k", SMALL)
def test_V_matches_brute_force_and_formula(n, k):
    assert list(enumerate_V(n, k)) == oracle_V(n, k)
    assert v_size(n, k) == len(oracle_V(n, k))
    if n > 2:
        assert v_size(n, k) == (n**k - 1) // (n - 1)


def test_V_size_n3_k3():
    assert v_size(3, 3) == 13


@pytest.mark.parametrize("n, k", SMALL)
def test_graph_matches_oracle(n, k):
    for ell in range(1, k + 1):
        ours = build_gamma(ell, n, k)
        ref = oracle_graph(ell, n, k)
        assert {frozenset(e) for e in ours.edges} == {frozenset(e) for e in ref.edges}
        assert sorted(map(sorted, ours.components)) == sorted(sorted(c) for c in nx.connected_components(ref))
        assert len(ours.components) == component_count(n, k)


@pytest.mark.parametrize("n, k", SMALL)
def test_structure(n, k):
    for ell in range(1, k + 1):
        g = build_gamma(ell, n, k)
        assert len(g.part1) == n**k
        assert all(x[1][ell - 1] != 0 for x in g.part1)
        assert all(x[1][ell - 1] == 0 for x in g.part2)
        degree = {x: 0 for x in g.vertices}
        for a, b in g.edges:
            assert a in g.part1 and b in g.part2
            degree[a] += 1
            degree[b] += 1
        assert all(degree[x] <= 1 for x in g.part1)
        for comp in g.components:
            assert len({r for r, _ in comp}) == len(comp)
            if len(comp) > 1:
                centres = [x for x in comp if x in g.part2]
                assert len(centres) == 1 and len(comp) == n
        expected_isolated = {(r, tuple(n - 1 if i == ell - 1 else 0 for i in range(k))) for r in range(1, n + 1)}
        if k > 1:
            assert set(g.isolated) == expected_isolated
        assert len(g.components) == n * (1 + (n ** (k - 1) - 1) // (n - 1))


def test_known_edges_n3_k3():
    g = build_gamma(1, 3, 3)
    edges = {frozenset(e) for e in g.edges}
    for a, b in KNOWN_EDGES:
        assert frozenset((parse_vertex(a), parse_vertex(b))) in edges
    assert parse_vertex("(1,200)") in g.isolated
    assert (len(g.components), len(g.isolated), len(g.part1), v_size(3, 3)) == (15, 3, 27, 13)


def test_edge_target_examples():
    assert edge_target(1, parse_vertex("(1,101)"), 3, 3) == parse_vertex("(2,002)")
    assert edge_target(1, parse_vertex("(1,211)"), 3, 3) == parse_vertex("(3,011)")
    assert edge_target(1, parse_vertex("(1,200)"), 3, 3) is None
    with pytest.raises(ParameterError):
        edge_target(1, parse_vertex("(1,011)"), 3, 3)


def test_n3_k2_components():
    g = build_gamma(1, 3, 2)
    assert len(g.components) == 6
    assert set(g.isolated) == {(r, (2, 0)) for r in (1, 2, 3)}
    assert set(g.centers.values()) == {(r, (0, 2)) for r in (1, 2, 3)}
    assert all(len(g.component_of(c)) == 3 for c in g.centers.values())


def test_n2_k2_components():
    g = build_gamma(1, 2, 2)
    assert len(g.vertices) == 6
    assert len(g.components) == 4
    assert len(g.isolated) == 2


def test_format_roundtrip_and_dot():
    assert format_vertex((1, (1, 0, 1))) == "(1,101)"
    assert parse_vertex("(3,12,0)") == (3, (12, 0))
    assert parse_vertex(format_vertex((2, (10, 1)))) == (2, (10, 1))
    dot = build_gamma(1, 3, 2).to_dot()
    assert dot.startswith("graph") and '"(1,11)" -- ' in dot


def test_bad_arguments():
    with pytest.raises(ParameterError):
        build_gamma(3, 3, 2)
    with pytest.raises(ParameterError):
        build_gamma(1, 1, 2)
