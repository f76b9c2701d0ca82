import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eulerbench.basis import PointKind, gauss_points, lagrange_matrix
from eulerbench.cases import vortex_state
from eulerbench.core import GasModel, conserved
from eulerbench.limiting import (LimiterConfig, SlopeLimiter, apply_slope_limit, compute_averages,
                                 detect_troubled, limited_slopes, minmod)
from eulerbench.mesh import Boundary, build_uniform_mesh
from eulerbench.schemes import SchemeConfig, make_evaluator

GAS = GasModel(1.4)
HIGH = ["cpr", "dg", "ndg", "sd"]


@pytest.mark.parametrize("args, expected", [
    ((0.5, 1.0, 2.0), 0.5),
    ((-1.0, 1.0), 0.0),
    ((-2.0, -1.0, -3.0), -1.0),
    ((0.0, 1.0), 0.0),
])
def test_minmod_examples(args, expected):
    assert minmod(*args) == expected


def test_minmod_needs_two_arguments():
    with pytest.raises(TypeError):
        minmod(1.0)


finite = st.floats(-1e6, 1e6)


@settings(max_examples=200, deadline=None)
@given(finite, finite, finite)
def test_minmod_properties(a, b, c):
    m = minmod(a, b, c)
    assert abs(m) <= min(abs(a), abs(b), abs(c))
    assert m in (a, b, c, 0.0)
    assert minmod(-a, -b, -c) == -m


def test_limiter_epsilon_must_be_positive():
    with pytest.raises(ValueError):
        LimiterConfig(enabled=True, epsilon=0.0)


def _nodes(kind, k):
    pk = PointKind.GAUSS_LOBATTO if kind in ("cpr", "ndg") else PointKind.GAUSS_LEGENDRE
    return gauss_points(pk, k + 1)


@pytest.mark.parametrize("kind", HIGH)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_averages_of_constant_are_exact(kind, k):
    pts = _nodes(kind, k)
    w2 = np.outer(pts.weights, pts.weights).reshape(-1)
    q = np.full((4, 3, w2.size), 0.37)
    assert np.all(compute_averages(q, w2) == 0.37)


def test_average_of_odd_field_is_zero():
    pts = gauss_points(PointKind.GAUSS_LOBATTO, 3)
    w2 = np.outer(pts.weights, pts.weights).reshape(-1)
    x = np.tile(pts.nodes, 3)
    assert abs(compute_averages(x[None, None, :], w2)[0, 0]) < 1e-16


@pytest.mark.parametrize("kind", HIGH)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_averages_match_dense_quadrature(kind, k):
    rng = np.random.default_rng(k)
    pts = _nodes(kind, k)
    w2 = np.outer(pts.weights, pts.weights).reshape(-1)
    nodal = rng.normal(size=(k + 1) ** 2)
    fine = gauss_points(PointKind.GAUSS_LEGENDRE, 10)
    L = lagrange_matrix(pts.nodes, fine.nodes)
    dense = np.kron(L, L) @ nodal
    oracle = dense @ np.outer(fine.weights, fine.weights).reshape(-1) / 4.0
    got = compute_averages(nodal[None, None, :], w2)[0, 0]
    assert got == pytest.approx(oracle, abs=1e-12)


def _line_mesh(n=5):
    return build_uniform_mesh(n, 3, (0.0, float(n), 0.0, 3.0), Boundary.PERIODIC)


def _traces_of_linear(avg, slope_x, nodes, h=1.0):
    n = avg.size
    t = np.empty((n, 4, nodes.size))
    t[:, 0] = (avg - 0.5 * h * slope_x)[:, None]
    t[:, 1] = (avg + 0.5 * h * slope_x)[:, None]
    t[:, 2] = avg[:, None] + 0.5 * h * slope_x[:, None] * nodes
    t[:, 3] = t[:, 2]
    return t


def test_smooth_linear_field_is_not_marked():
    mesh = build_uniform_mesh(6, 6, (0.0, 6.0, 0.0, 6.0), Boundary.TRANSMISSIVE)
    xc = (np.arange(36) % 6) + 0.5
    avg = 1.0 + 0.1 * xc
    nodes = gauss_points(PointKind.GAUSS_LOBATTO, 3).nodes
    traces = _traces_of_linear(avg, np.full(36, 0.1), nodes)
    interior = np.array([m for m in range(36) if 0 < m % 6 < 5])
    pts = gauss_points(PointKind.GAUSS_LOBATTO, 3)
    marks = detect_troubled(traces[interior], avg, mesh.connectivity.neighbors, 1e-3, interior,
                            pts.nodes, pts.weights)
    assert not marks.any()


def test_isolated_jump_marks_both_neighbours():
    mesh = build_uniform_mesh(6, 1 + 1, (0.0, 6.0, 0.0, 2.0), Boundary.TRANSMISSIVE)
    ne = mesh.n_elements
    xc = (np.arange(ne) % 6) + 0.5
    avg = np.where(xc < 3.0, 1.0, 0.125)
    # high-order traces overshoot towards the other side of the jump
    traces = np.repeat(avg[:, None, None], 4, axis=1).repeat(3, axis=2)
    left, right = [m for m in range(ne) if m % 6 == 2], [m for m in range(ne) if m % 6 == 3]
    traces[left, 1] = 0.7
    traces[right, 0] = 0.45
    marks = detect_troubled(traces, avg, mesh.connectivity.neighbors, 1e-3)
    assert set(np.flatnonzero(marks)) == set(left) | set(right)


@pytest.mark.parametrize("eps, expect_any", [(np.inf, False), (1e-300, True)])
def test_detector_threshold_limits(eps, expect_any):
    mesh = build_uniform_mesh(4, 4, (-5.0, 5.0, -5.0, 5.0))
    ev = make_evaluator(SchemeConfig("cpr", 2), mesh, GAS)
    x, y = mesh.point_grid(ev.ops.nodes)
    q = vortex_state(x, y)
    avg = compute_averages(q, ev.ops.weights2d)[0]
    marks = detect_troubled(ev.edge_traces(q[:1])[0], avg, mesh.connectivity.neighbors, eps,
                            nodes=ev.ops.nodes, weights=ev.ops.weights)
    assert marks.any() == expect_any


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-6, 1.0), st.floats(1e-6, 1.0))
def test_detector_is_monotone_in_epsilon(e1, e2):
    lo, hi = min(e1, e2), max(e1, e2)
    rng = np.random.default_rng(0)
    mesh = build_uniform_mesh(5, 5, (0.0, 1.0, 0.0, 1.0))
    avg = rng.uniform(0.5, 1.5, 25)
    traces = avg[:, None, None] + rng.normal(scale=0.1, size=(25, 4, 3))
    nb = mesh.connectivity.neighbors
    strict, loose = detect_troubled(traces, avg, nb, lo), detect_troubled(traces, avg, nb, hi)
    assert np.all(loose <= strict)


def _one_marked(neighbour_avgs, nodes):
    mesh = _line_mesh(3)
    ne = mesh.n_elements
    avg = np.zeros((4, ne))
    for m in range(ne):
        avg[:, m] = neighbour_avgs[m % 3]
    q = np.repeat(avg[:, :, None], nodes.size ** 2, axis=2) + 0.3
    marks = np.zeros(ne, dtype=bool)
    marks[4] = True
    return mesh, avg, q, marks


def test_monotone_data_keeps_common_slope():
    nodes = gauss_points(PointKind.GAUSS_LOBATTO, 3).nodes
    mesh, avg, q, marks = _one_marked((0.0, 1.0, 2.0), nodes)
    sx, sy = limited_slopes(avg, mesh.connectivity.neighbors, 1.0, 1.0, np.array([4]))
    assert sx[0, 0] == 1.0 and sy[0, 0] == 0.0
    apply_slope_limit(q, avg, marks, mesh.connectivity.neighbors, nodes, 1.0, 1.0)
    np.testing.assert_allclose(q[0, 4], 1.0 + 0.5 * np.tile(nodes, 3), atol=1e-15)


def test_extremum_is_flattened():
    nodes = gauss_points(PointKind.GAUSS_LEGENDRE, 3).nodes
    mesh, avg, q, marks = _one_marked((0.0, 1.0, 0.0), nodes)
    apply_slope_limit(q, avg, marks, mesh.connectivity.neighbors, nodes, 1.0, 1.0)
    assert np.all(q[:, 4] == avg[:, 4, None])


def test_unmarked_elements_are_untouched():
    nodes = gauss_points(PointKind.GAUSS_LOBATTO, 3).nodes
    mesh, avg, q, marks = _one_marked((0.0, 1.0, 2.0), nodes)
    before = q.copy()
    apply_slope_limit(q, avg, marks, mesh.connectivity.neighbors, nodes, 1.0, 1.0)
    keep = np.arange(mesh.n_elements) != 4
    assert np.array_equal(q[:, keep], before[:, keep])
    snapshot = q.copy()
    apply_slope_limit(q, avg, np.zeros_like(marks), mesh.connectivity.neighbors, nodes, 1.0, 1.0)
    assert np.array_equal(q, snapshot)


@pytest.mark.parametrize("kind", HIGH)
@pytest.mark.parametrize("k", [1, 2, 3])
def test_limiting_preserves_averages(kind, k):
    mesh = build_uniform_mesh(8, 8, (0.0, 1.0, 0.0, 1.0))
    ev = make_evaluator(SchemeConfig(kind, k), mesh, GAS)
    rng = np.random.default_rng(7)
    q = rng.uniform(0.5, 2.0, (4, mesh.n_elements, ev.n_sp))
    avg = compute_averages(q, ev.ops.weights2d)
    marks = rng.uniform(size=mesh.n_elements) < 0.5
    apply_slope_limit(q, avg, marks, mesh.connectivity.neighbors, ev.ops.nodes, mesh.dx, mesh.dy)
    np.testing.assert_allclose(compute_averages(q, ev.ops.weights2d), avg, rtol=0, atol=1e-13)


def _limited_shock(kind, k):
    mesh = build_uniform_mesh(16, 16, (-1.0, 1.0, -1.0, 1.0), Boundary.TRANSMISSIVE)
    cfg = SchemeConfig(kind, k, LimiterConfig(enabled=True))
    ev = make_evaluator(cfg, mesh, GAS)
    x, y = mesh.point_grid(ev.ops.nodes)
    # smoothed step keeps the unlimited field admissible
    r = np.hypot(x, y)
    w = 0.5 * (1.0 - np.tanh((r - 0.4) / 0.05))
    q = conserved(0.125 + 0.875 * w, 0 * r, 0 * r, 0.1 + 0.9 * w, GAS)
    return ev, SlopeLimiter(cfg.limiter, ev), q


@pytest.mark.parametrize("kind", HIGH)
def test_limiter_conserves_totals_and_is_scheme_agnostic(kind):
    ev, lim, q = _limited_shock(kind, 2)
    before = compute_averages(q, ev.ops.weights2d).sum(axis=1)
    lim(q)
    assert lim.last_marks.any()
    after = compute_averages(q, ev.ops.weights2d).sum(axis=1)
    np.testing.assert_allclose(after, before, rtol=1e-12)
    assert tuple(lim.timings) == ("average", "limit")


def test_limiter_disabled_is_identity():
    ev, _, q = _limited_shock("dg", 2)
    lim = SlopeLimiter(LimiterConfig(enabled=False), ev)
    before = q.copy()
    assert np.array_equal(lim(q), before)


def test_limiter_threads_bitwise_neutral():
    ev, lim, q = _limited_shock("sd", 2)
    cfg = SchemeConfig("sd", 2, LimiterConfig(enabled=True))
    par = make_evaluator(cfg, ev.mesh, GAS, threads=3)
    q2 = q.copy()
    lim(q)
    SlopeLimiter(cfg.limiter, par)(q2)
    par.close()
    assert np.array_equal(q, q2)


@pytest.mark.xfail(strict=True, reason="the trace detector with eps=1e-3 fires on the "
                                       "well-resolved vortex at every tested resolution")
@pytest.mark.parametrize("kind", HIGH)
@pytest.mark.parametrize("k", [1, 2])
def test_limiter_inert_on_smooth_vortex(kind, k):
    mesh = build_uniform_mesh(20, 20, (-5.0, 5.0, -5.0, 5.0))
    cfg = SchemeConfig(kind, k, LimiterConfig(enabled=True))
    ev = make_evaluator(cfg, mesh, GAS)
    x, y = mesh.point_grid(ev.ops.nodes)
    lim = SlopeLimiter(cfg.limiter, ev)
    lim(vortex_state(x, y))
    assert lim.last_marks.sum() == 0
