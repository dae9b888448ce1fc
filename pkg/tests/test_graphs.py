import io

import numpy as np
import pytest

from hopcover.graphs import (DirectedGraph, EdgeListError, edge_list_text,
                             generate_erdos_renyi, load_edge_list, out_neighbors,
                             write_id_map_csv)


def test_load_simple_path():
    loaded = load_edge_list(io.StringIO("0 1\n1 2\n"))
    assert loaded.graph.node_count == 3
    assert loaded.graph.arc_count == 2


def test_load_drops_duplicates():
    loaded = load_edge_list(io.StringIO("0 1\n0 1\n1 0\n"))
    assert loaded.graph.node_count == 2
    assert loaded.graph.arc_count == 2
    assert loaded.dropped_duplicates == 1


def test_load_drops_self_loops():
    loaded = load_edge_list(io.StringIO("0 0\n0 1\n"))
    assert loaded.graph.arc_count == 1
    assert loaded.dropped_self_loops == 1


def test_snap_style_comments_and_id_remap():
    text = "# header\n% other comment\n10 20\n20 30\n"
    loaded = load_edge_list(io.StringIO(text))
    assert loaded.graph.node_count == 3
    assert list(loaded.id_map) == [10, 20, 30]
    # round-trip through the id map restores the original ids
    restored = {(loaded.id_map[u], loaded.id_map[v]) for u, v in loaded.graph.arcs}
    assert restored == {(10, 20), (20, 30)}
    assert loaded.to_dense([10, 30]) == [0, 2]
    assert loaded.to_original([0, 2]) == [10, 30]


def test_malformed_line_reports_line_number():
    with pytest.raises(EdgeListError, match="line 2"):
        load_edge_list(io.StringIO("0 1\n0 1 2\n"))
    with pytest.raises(EdgeListError, match="line 1"):
        load_edge_list(io.StringIO("a b\n"))


def test_empty_input_rejected():
    with pytest.raises(EdgeListError, match="empty"):
        load_edge_list(io.StringIO("# only comments\n"))


def test_serialize_reload_identity():
    rng = np.random.default_rng(5)
    graph = generate_erdos_renyi(40, 0.1, 17)
    text = edge_list_text(graph)
    reloaded = load_edge_list(io.StringIO(text))
    assert reloaded.graph == graph
    assert edge_list_text(reloaded.graph) == text
    del rng


def test_adjacency_transpose_consistency():
    graph = generate_erdos_renyi(60, 0.08, 3)
    for u, v in graph.arcs:
        assert v in graph.out_neighbors(u)
        assert u in graph.in_neighbors(v)
    assert graph.out_degrees.sum() == graph.in_degrees.sum() == graph.arc_count


def test_out_neighbors_cases():
    path = DirectedGraph(3, [(0, 1), (1, 2)])
    assert list(out_neighbors(path, 0)) == [1]
    assert list(out_neighbors(path, 2)) == []
    complete = DirectedGraph(4, [(u, v) for u in range(4) for v in range(4) if u != v])
    assert set(out_neighbors(complete, 1)) == {0, 2, 3}
    with pytest.raises(IndexError):
        out_neighbors(path, 3)


def test_constructor_rejects_bad_ids():
    with pytest.raises(ValueError):
        DirectedGraph(2, [(0, 2)])
    with pytest.raises(ValueError):
        DirectedGraph(0, [])


def test_erdos_renyi_extremes():
    empty = generate_erdos_renyi(5, 0.0, 1)
    assert empty.node_count == 5 and empty.arc_count == 0
    full = generate_erdos_renyi(5, 1.0, 1)
    assert full.arc_count == 5 * 4
    assert not any(u == v for u, v in full.arcs)


def test_erdos_renyi_determinism():
    a = generate_erdos_renyi(50, 0.1, 99)
    b = generate_erdos_renyi(50, 0.1, 99)
    assert a == b


def test_erdos_renyi_arc_count_matches_binomial_expectation():
    # independent oracle: E[arcs] = n(n-1)p, checked by Monte Carlo over seeds
    n, p = 100, 0.05
    expected = n * (n - 1) * p
    counts = [generate_erdos_renyi(n, p, seed).arc_count for seed in range(1000)]
    mean = float(np.mean(counts))
    assert abs(mean - expected) <= 0.03 * expected
    # single draws concentrate: binomial sd is ~21.7, allow six sigma
    sd = np.sqrt(n * (n - 1) * p * (1 - p))
    assert all(abs(c - expected) <= 6 * sd for c in counts)


def test_id_map_csv(tmp_path):
    loaded = load_edge_list(io.StringIO("5 9\n9 5\n"))
    out = tmp_path / "idmap.csv"
    write_id_map_csv(loaded.id_map, out)
    assert out.read_text() == "node_id,original_id\n0,5\n1,9\n"
