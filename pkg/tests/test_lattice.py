import pytest
from hypothesis import given
from hypothesis import strategies as st

from fpp_lab.lattice import LatticeWindow, ball, ball_size, enumerate_edges, l1, window_for
from oracles import ball_count, grid_neighbours


@pytest.mark.parametrize("lo,hi,count", [((0, 0), (1, 1), 4), ((0, 0), (2, 2), 12), ((0, 0, 0), (1, 1, 1), 12)])
def test_edge_counts(lo, hi, count):
    win = LatticeWindow(lo, hi)
    assert win.n_edges == count
    assert len(enumerate_edges(win)) == count


def test_edge_set_matches_coordinate_oracle():
    win = LatticeWindow((-1, 0), (2, 2))
    nb = grid_neighbours(win.lo, win.hi)
    oracle = {frozenset((a, b)) for a, bs in nb.items() for b in bs}
    got = {frozenset(e) for e in enumerate_edges(win)}
    assert got == oracle and len(got) == win.n_edges


def test_edge_order_is_lex_min_endpoint_then_axis():
    edges = enumerate_edges(LatticeWindow((0, 0), (2, 2)))
    keys = [(min(e), [a != b for a, b in zip(*e)].index(True)) for e in edges]
    assert keys == sorted(keys)


@given(st.lists(st.integers(-3, 0), min_size=2, max_size=3), st.lists(st.integers(0, 3), min_size=3, max_size=3))
def test_edge_index_roundtrip(lo, span):
    hi = [a + b for a, b in zip(lo, span)]
    win = LatticeWindow(lo, hi)
    for k in range(win.n_edges):
        a, b = win.edge(k)
        assert win.edge_index(a, b) == k
        assert win.edge_index(b, a) == k


def test_vertex_index_roundtrip():
    win = LatticeWindow((-2, -1), (1, 3))
    for i in range(win.n_vertices):
        assert win.vertex_index(win.vertex(i)) == i


@pytest.mark.parametrize("m,count", [(0, 1), (1, 5), (2, 13)])
def test_ball_examples(m, count):
    b = ball(2, m)
    assert len(b) == count
    assert (0, 0) in b.vertices


@pytest.mark.parametrize("d", [1, 2, 3, 4])
@pytest.mark.parametrize("m", range(7))
def test_ball_cardinality_matches_recursion(d, m):
    assert ball_size(d, m) == ball_count(d, m)
    if d <= 3:
        assert len(ball(d, m)) == ball_count(d, m)
        assert all(l1(v) <= m for v in ball(d, m).vertices)


@pytest.mark.parametrize("x,m,margin,lo,hi", [
    ((4, 0), 0, 2, (-2, -2), (6, 2)),
    ((4, 0), 1, 0, (-1, -1), (5, 1)),
    ((3, 3), 0, 1, (-1, -1), (4, 4)),
])
def test_window_for_examples(x, m, margin, lo, hi):
    win = window_for(x, m, margin)
    assert win.lo == lo and win.hi == hi


@given(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), st.integers(0, 3), st.integers(1, 3))
def test_window_for_interior(x, m, margin):
    win = window_for(x, m, margin)
    for y in ball(2, m).vertices:
        assert win.is_interior(y)
        assert win.is_interior(tuple(a + b for a, b in zip(x, y)))


def test_window_serialisation_and_validation():
    win = LatticeWindow((-1, 0, 2), (3, 1, 4))
    assert LatticeWindow.from_dict(win.to_dict()) == win
    assert win.to_dict()["d"] == 3
    with pytest.raises(ValueError):
        LatticeWindow((0, 2), (1, 1))
    with pytest.raises(ValueError):
        ball(2, -1)
