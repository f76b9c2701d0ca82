"""Shock capturing: minmod, trouble detection and slope limiting.

The high-order pipeline runs as two element-parallel stages, ``average`` and
``limit`` (detect, then rebuild marked elements).  FV limiting happens inside
the MUSCL reconstruction instead.
"""
import time
from dataclasses import dataclass

import numpy as np

from .core import NVAR
from .mesh import EAST, NORTH, SOUTH, WEST


@dataclass(frozen=True)
class LimiterConfig:
    enabled: bool = False
    epsilon: float = 1.0e-3
    # conserved components that are rebuilt once an element is marked
    variables: tuple = (0, 1, 2, 3)
    # component whose edge traces trigger the mark
    detect_component: int = 0
    # limit after every RK stage (True) or only after a full step
    per_stage: bool = True

    def __post_init__(self):
        if not self.epsilon > 0.0:
            raise ValueError(f"limiter epsilon must be positive, got {self.epsilon}")


def minmod(*args):
    """Smallest-magnitude argument when all share a sign, else zero (elementwise)."""
    if len(args) < 2:
        raise TypeError("minmod needs at least two arguments")
    arrays = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in args))
    s = np.sign(arrays[0])
    same = np.ones(arrays[0].shape, dtype=bool)
    mag = np.abs(arrays[0])
    for a in arrays[1:]:
        same &= np.sign(a) == s
        mag = np.minimum(mag, np.abs(a))
    out = np.where(same, s * mag, 0.0)
    return out if out.ndim else float(out)


def compute_averages(q, weights2d):
    """Quadrature-weighted element means, shape (4, n_elements).

    ``q`` is (4, ne, n_sp) and ``weights2d`` the tensor solution-point weights.
    """
    w = np.asarray(weights2d, dtype=float)
    # offsets from the first point keep a constant field's mean exact
    ref = q[:, :, 0]
    acc = np.zeros_like(ref)
    for j in range(1, w.size):
        acc = acc + w[j] * (q[:, :, j] - ref)
    return ref + acc / w.sum()


def _neighbor_averages(avg, neighbors, elements):
    """Averages of the four neighbours of ``elements``; missing ones reuse the element's own."""
    nbr = neighbors[elements]
    idx = np.where(nbr >= 0, nbr, elements[:, None])
    return [avg[..., idx[:, side]] for side in (WEST, EAST, SOUTH, NORTH)]


def _elements(averages, elements):
    if elements is None:
        return np.arange(averages.shape[-1])
    if isinstance(elements, slice):
        return np.arange(averages.shape[-1])[elements]
    return np.asarray(elements)


def detect_troubled(traces, averages, neighbors, epsilon, elements=None, nodes=None,
                    weights=None):
    """Mark elements whose edge traces disagree with a limited linear reconstruction.

    ``averages`` holds one component for every element; ``traces`` is
    (n_sel, 4, n_edge) for the selected ``elements`` (all by default), sampled
    at the 1D reference ``nodes`` along each edge.  On an edge with outward
    sign s (+1 east/north, -1 west/south) the reference value is
    avg + s * minmod(s * (mean trace - avg), d_fwd, d_back) plus the
    minmod-limited tangential slope times the point's offset.  The edge mean
    uses the 1D quadrature ``weights``.  An element is marked when any edge
    point differs from the reference by more than ``epsilon``.  Without
    ``nodes``/``weights`` the edge is treated as a single uniform sample set.
    """
    el = _elements(averages, elements)
    avg = averages[el]
    n_edge = traces.shape[-1]
    nodes = np.zeros(n_edge) if nodes is None else np.asarray(nodes, dtype=float)
    w = np.ones(n_edge) if weights is None else np.asarray(weights, dtype=float)
    w = w / w.sum()
    a_w, a_e, a_s, a_n = _neighbor_averages(averages, neighbors, el)
    d_x = (a_e - avg, avg - a_w)
    d_y = (a_n - avg, avg - a_s)
    # tangential variation along y-edges follows the y slope and vice versa
    tan_x = minmod(*d_x)[:, None] * (0.5 * nodes)
    tan_y = minmod(*d_y)[:, None] * (0.5 * nodes)
    marked = np.zeros(avg.shape, dtype=bool)
    for side, sgn, d, tan in ((WEST, -1.0, d_x, tan_y), (EAST, 1.0, d_x, tan_y),
                              (SOUTH, -1.0, d_y, tan_x), (NORTH, 1.0, d_y, tan_x)):
        t = traces[:, side, :]
        ref = avg + sgn * minmod(sgn * (t @ w - avg), d[0], d[1])
        marked |= np.any(np.abs(t - ref[:, None] - tan) > epsilon, axis=-1)
    return marked


def limited_slopes(averages, neighbors, dx, dy, elements=None):
    """Per-direction minmod slopes for the selected elements."""
    el = _elements(averages, elements)
    avg = averages[..., el]
    a_w, a_e, a_s, a_n = _neighbor_averages(averages, neighbors, el)
    sx = minmod((a_e - avg) / dx, (avg - a_w) / dx)
    sy = minmod((a_n - avg) / dy, (avg - a_s) / dy)
    return sx, sy


def apply_slope_limit(q, averages, marks, neighbors, nodes, dx, dy, variables=(0, 1, 2, 3)):
    """Overwrite marked elements of ``q`` (4, ne, n_sp) with limited linear profiles.

    The new nodal values are avg + (x - x0) s_x + (y - y0) s_y with the
    solution points at x - x0 = xi * dx / 2 on the symmetric 1D ``nodes``.
    Works in place and returns ``q``.
    """
    idx = np.flatnonzero(marks)
    if idx.size == 0:
        return q
    n1 = nodes.size
    sx, sy = limited_slopes(averages, neighbors, dx, dy, idx)
    ox = np.tile(0.5 * dx * nodes, n1)
    oy = np.repeat(0.5 * dy * nodes, n1)
    for c in variables:
        q[c, idx] = (averages[c, idx][:, None]
                     + ox[None, :] * sx[c][:, None]
                     + oy[None, :] * sy[c][:, None])
    return q


class SlopeLimiter:
    """Average -> detect -> limit pipeline bound to one evaluator."""

    stage_names = ("average", "limit")

    def __init__(self, config, evaluator):
        self.config = config
        self.ev = evaluator
        self.weights2d = evaluator.ops.weights2d
        self.timings = {name: 0.0 for name in self.stage_names}
        self.total_marked = 0
        self.last_marks = None

    def reset_timings(self):
        self.timings = {name: 0.0 for name in self.stage_names}

    def __call__(self, q):
        if not self.config.enabled:
            return q
        ev = self.ev
        ne = ev.ne
        q3 = q.reshape(NVAR, ne, ev.n_sp)
        avg = np.empty((NVAR, ne))
        marks = np.zeros(ne, dtype=bool)
        comp = self.config.detect_component
        mesh = ev.mesh

        def average(lo, hi):
            avg[:, lo:hi] = compute_averages(q3[:, lo:hi], self.weights2d)

        def detect(lo, hi):
            traces = ev.edge_traces(q3[comp:comp + 1, lo:hi])[0]
            marks[lo:hi] = detect_troubled(traces, avg[comp], ev.conn.neighbors,
                                           self.config.epsilon, slice(lo, hi),
                                           ev.ops.nodes, ev.ops.weights)

        def limit(lo, hi):
            sub = np.zeros(ne, dtype=bool)
            sub[lo:hi] = marks[lo:hi]
            apply_slope_limit(q3, avg, sub, ev.conn.neighbors, ev.ops.nodes,
                              mesh.dx, mesh.dy, self.config.variables)

        t0 = time.perf_counter()
        ev._map(average, ne, "element")
        t1 = time.perf_counter()
        self.timings["average"] += t1 - t0
        ev._map(detect, ne, "element")
        ev._map(limit, ne, "element")
        self.timings["limit"] += time.perf_counter() - t1
        self.last_marks = marks
        self.total_marked += int(marks.sum())
        return q
