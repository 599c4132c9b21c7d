import math
import warnings

import numpy as np
import pytest

from fpp_lab import distributions as dists
from fpp_lab import geodesics as geo
from fpp_lab.lattice import LatticeWindow
from oracles import brute_geodesics

DISTS = {"uniform": dists.uniform(), "exponential": dists.exponential(1.0), "two_point": dists.two_point(1, 2, 0.5)}


def test_unit_weights_passage_time():
    cfg = geo.constant_config(LatticeWindow((0, 0), (4, 3)))
    T, field = geo.passage_time(cfg, (0, 0), (3, 2))
    assert T == 5.0
    assert field.at(cfg.window, (0, 0)) == 0.0


def _detour_config():
    win = LatticeWindow((-1, -1), (2, 1))
    e = win.edge_index((0, 0), (1, 0))
    return geo.constant_config(win).replace(e, 5.0), e


def test_detour_example():
    cfg, e = _detour_config()
    assert geo.passage_time(cfg, (0, 0), (1, 0)).T == 3.0
    T, _, _ = brute_geodesics(cfg, (0, 0), (1, 0))
    assert T == 3.0
    # A counts every edge but e, so the direct route gives A = 0
    assert geo.critical_value(cfg, e, (0, 0), (1, 0)) == 3.0


def test_critical_value_independent_of_own_weight():
    cfg, e = _detour_config()
    for v in (0.0, 0.5, 2.9, 3.0, 100.0):
        assert geo.critical_value(cfg.replace(e, v), e, (0, 0), (1, 0)) == 3.0


def test_critical_value_zero_when_bypass_is_cheaper():
    win = LatticeWindow((0, 0), (2, 1))
    cfg = geo.constant_config(win, 1.0)
    # e hangs off an expensive spur: any route through it costs more than B
    e = win.edge_index((0, 1), (1, 1))
    cfg = cfg.replace(win.edge_index((0, 0), (0, 1)), 50.0).replace(win.edge_index((1, 0), (1, 1)), 50.0)
    cfg = cfg.replace(win.edge_index((1, 1), (2, 1)), 50.0)
    assert geo.critical_value(cfg, e, (0, 0), (2, 0)) == 0.0


def test_identity_example_arithmetic():
    # s = 1, t = 2, D = 3 on the detour gadget
    cfg, e = _detour_config()
    D = geo.critical_value(cfg, e, (0, 0), (1, 0))
    Ts = geo.passage_time(cfg.replace(e, 1.0), (0, 0), (1, 0)).T
    Tt = geo.passage_time(cfg.replace(e, 2.0), (0, 0), (1, 0)).T
    assert Tt - Ts == min(2 - 1, max(D - 1, 0)) == 1.0


def test_symmetric_diamond_has_empty_geo():
    cfg = geo.constant_config(LatticeWindow((0, 0), (1, 1)))
    assert geo.geodesic_intersection(cfg, (0, 0), (1, 1)) == frozenset()
    assert geo.geodesic_intersection(cfg, (0, 0), (1, 1), method="requery") == frozenset()
    assert geo.max_geodesic_length(cfg, (0, 0), (1, 1)) == 2


def test_bottleneck_diamond():
    win = LatticeWindow((0, 0), (2, 1))
    neck = win.edge_index((0, 0), (1, 0))
    cfg = geo.constant_config(win).replace(win.edge_index((0, 0), (0, 1)), 10.0)
    got = geo.geodesic_intersection(cfg, (0, 0), (2, 1))
    assert got == frozenset({neck})
    assert brute_geodesics(cfg, (0, 0), (2, 1))[1] == got


def test_unique_geodesic_geo_equals_path():
    rng = np.random.default_rng(1)
    cfg = geo.sample_config(dists.uniform(), LatticeWindow((0, 0), (4, 4)), rng)
    rep = geo.geodesic_report(cfg, (0, 0), (4, 3))
    assert rep.geo_set == frozenset(rep.path)
    assert rep.G == len(rep.path)
    assert math.isclose(geo.path_weight(cfg, rep.path), rep.T, rel_tol=1e-12)


def test_line_subgraph_length():
    cfg = geo.constant_config(LatticeWindow((0, 0), (5, 0)))
    assert geo.max_geodesic_length(cfg, (0, 0), (2, 0)) == 2


@pytest.mark.parametrize("name", sorted(DISTS))
@pytest.mark.parametrize("hi", [(1, 1), (2, 1), (2, 2)])
def test_oracle_equivalence(name, hi):
    dist = DISTS[name]
    rng = np.random.default_rng([sorted(DISTS).index(name), *hi])
    win = LatticeWindow((0, 0), hi)
    verts = [win.vertex(i) for i in range(win.n_vertices)]
    for _ in range(50):
        cfg = geo.sample_config(dist, win, rng)
        i, j = rng.choice(len(verts), 2, replace=False)
        u, v = verts[i], verts[j]
        T, gset, G = brute_geodesics(cfg, u, v)
        rep = geo.geodesic_report(cfg, u, v)
        assert rep.T == pytest.approx(T, rel=1e-12)
        assert rep.geo_set == gset
        assert geo.geodesic_intersection(cfg, u, v, method="requery") == gset
        assert rep.G == G and rep.G_exact
        assert rep.geo_set <= set(rep.path)
        assert rep.G >= len(rep.path) >= sum(abs(a - b) for a, b in zip(u, v))


def test_pseudo_metric():
    rng = np.random.default_rng(4)
    win = LatticeWindow((0, 0), (4, 4))
    verts = [win.vertex(i) for i in range(win.n_vertices)]
    for _ in range(30):
        cfg = geo.sample_config(dists.exponential(1.0), win, rng)
        a, b, c = (verts[k] for k in rng.choice(len(verts), 3, replace=False))
        T = lambda p, q: geo.passage_time(cfg, p, q).T  # noqa: E731
        assert T(a, a) == 0.0
        assert T(a, b) == pytest.approx(T(b, a), rel=1e-12)
        assert T(a, c) <= T(a, b) + T(b, c) + 1e-12


def test_distance_field_triangle_inequality():
    rng = np.random.default_rng(8)
    cfg = geo.sample_config(dists.uniform(), LatticeWindow((0, 0), (5, 5)), rng)
    f = geo.distance_field(cfg, (2, 2)).dist
    tail, head = cfg.window.edge_tail, cfg.window.edge_head
    assert np.all(np.abs(f[tail] - f[head]) <= cfg.weights + 1e-12)


def test_monotone_coupling():
    rng = np.random.default_rng(9)
    win = LatticeWindow((0, 0), (4, 4))
    cfg = geo.sample_config(dists.uniform(), win, rng)
    base = geo.passage_time(cfg, (0, 0), (4, 4)).T
    for e in rng.choice(win.n_edges, 20, replace=False):
        w = cfg.weights[e]
        assert geo.passage_time(cfg.replace(e, w + 0.3), (0, 0), (4, 4)).T >= base
        assert geo.passage_time(cfg.replace(e, w * 0.5), (0, 0), (4, 4)).T <= base


def test_critical_value_identity_random():
    rng = np.random.default_rng(10)
    win = LatticeWindow((-1, -1), (3, 2))
    for _ in range(200):
        cfg = geo.sample_config(DISTS[rng.choice(sorted(DISTS))], win, rng)
        e = int(rng.integers(win.n_edges))
        z = (0, 0)
        x = (2, 1)
        D = geo.critical_value(cfg, e, z, x)
        s, t = sorted(rng.uniform(0, 3, 2))
        Ts = geo.passage_time(cfg.replace(e, s), z, x).T
        Tt = geo.passage_time(cfg.replace(e, t), z, x).T
        expect = min(t - s, max(D - s, 0.0))
        assert math.isclose(Tt - Ts, expect, rel_tol=1e-9, abs_tol=1e-12)
        if s < D:
            assert e in geo.geodesic_intersection(cfg.replace(e, s), z, x)


def test_kesten_examples():
    assert geo.kesten_value(10, 4, 1) == 0
    assert geo.kesten_value(2, 4, 1) == 4
    cfg = geo.constant_config(LatticeWindow((-2, -2), (6, 4)))
    for a in (0.25, 0.5, 1.0):
        assert geo.kesten_indicator(cfg, (4, 2), a) == 0
    with pytest.raises(ValueError):
        geo.kesten_indicator(cfg, (4, 2), 0.0)


def test_geodesic_log_weight():
    win = LatticeWindow((0, 0), (1, 1))
    cfg = geo.EdgeConfig(win, np.ones(win.n_edges), dists.uniform())
    assert geo.geodesic_log_weight(cfg, (0, 0), (1, 1)) == 0.0  # symmetric diamond, empty Geo
    line = LatticeWindow((0, 0), (3, 0))
    cfg = geo.EdgeConfig(line, np.ones(3), dists.uniform())
    assert geo.geodesic_log_weight(cfg, (0, 0), (3, 0)) == 3.0
    rng = np.random.default_rng(2)
    cfg = geo.sample_config(dists.uniform(), LatticeWindow((0, 0), (3, 3)), rng)
    gset = geo.geodesic_intersection(cfg, (0, 0), (3, 2))
    expect = sum(1 - math.log(cfg.weights[k]) for k in sorted(gset))
    assert geo.geodesic_log_weight(cfg, (0, 0), (3, 2)) == pytest.approx(expect, rel=1e-12)


def test_boundary_flag_and_extension():
    rng = np.random.default_rng(3)
    small = LatticeWindow((0, 0), (3, 0))
    cfg = geo.sample_config(dists.uniform(), small, rng)
    assert geo.passage_time(cfg, (0, 0), (3, 0)).boundary_touched
    big = small.expanded(2)
    ext = geo.extend_config(cfg, big, rng)
    ids = geo.edge_map(small, big)
    assert np.array_equal(ext.weights[ids], cfg.weights)
    assert np.array_equal(ext.encodings.words[ids], cfg.encodings.words)
    assert geo.passage_time(ext, (0, 0), (3, 0)).T <= geo.passage_time(cfg, (0, 0), (3, 0)).T


def test_encodings_match_weights():
    rng = np.random.default_rng(12)
    cfg = geo.sample_config(dists.exponential(1.0), LatticeWindow((0, 0), (3, 3)), rng, J=16)
    recomputed = cfg.dist.inverse_cdf(cfg.encodings.uniforms())
    assert np.array_equal(recomputed, cfg.weights)


def test_ties_budget_warning(monkeypatch):
    monkeypatch.setattr(geo, "EXACT_G_STEP_BUDGET", 5)
    win = LatticeWindow((0, 0), (3, 3))
    cfg = geo.constant_config(win, 0.0)
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        G = geo.max_geodesic_length(cfg, (0, 0), (3, 3))
    assert any(issubclass(w.category, geo.ApproximationWarning) for w in rec)
    assert G >= 6


def test_zero_weight_cycles_exact():
    # all-zero weights: every self-avoiding path is a geodesic, longest is a Hamiltonian-like path
    win = LatticeWindow((0, 0), (1, 2))
    cfg = geo.constant_config(win, 0.0)
    _, _, G = brute_geodesics(cfg, (0, 0), (1, 2))
    assert geo.max_geodesic_length(cfg, (0, 0), (1, 2)) == G


def test_snapshot_roundtrip(tmp_path):
    rng = np.random.default_rng(6)
    cfg = geo.sample_config(dists.uniform(), LatticeWindow((-1, -2), (3, 2)), rng, seed={"master_seed": 6})
    p = tmp_path / "cfg.bin"
    geo.write_snapshot(cfg, p)
    back = geo.read_snapshot(p)
    assert back.window == cfg.window
    assert np.array_equal(back.weights, cfg.weights)
    assert back.seed == {"master_seed": 6}
    assert back.dist.name == "uniform"


def test_invalid_weights():
    win = LatticeWindow((0, 0), (1, 1))
    with pytest.raises(ValueError):
        geo.EdgeConfig(win, np.array([1.0, -1.0, 1.0, 1.0]))
    with pytest.raises(ValueError):
        geo.EdgeConfig(win, np.ones(3))
