"""Residual evaluators for the FV, CPR, DG, NDG and SD discretizations.

Each evaluator splits its work into stages that are data-parallel maps over
either faces or elements:

* FV:      reconstruct (faces) -> divergence (elements)
* DG:      interpolate (faces) -> couple (faces) -> flux (elements)
* SD:      interpolate (elements) -> couple (faces) -> flux (elements)
* CPR/NDG: one fused flux stage (elements)

A stage reads its inputs and writes disjoint slices of its outputs, so the
work can be cut into chunks and handed to a thread pool.  Reductions along
the small per-element axes are spelled out as fixed-order sums; chunked and
unchunked runs therefore produce bitwise-identical residuals.

Field arrays are shaped (4, n_elements, n_sp).  For the high-order schemes
the solution-point index is ``b * n1 + a`` with ``a`` along x, and
``q.reshape(4, ne, n1, n1)`` exposes the (b, a) axes.
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import basis
from .core import NVAR, flux, flux_jacobian_apply, rusanov_flux
from .errors import NonPhysicalState
from .limiting import LimiterConfig, minmod
from .mesh import EAST, NORTH, SOUTH, WEST

X_NORMAL = (1.0, 0.0)
Y_NORMAL = (0.0, 1.0)


class SchemeKind(str, Enum):
    FV = "fv"
    CPR = "cpr"
    DG = "dg"
    NDG = "ndg"
    SD = "sd"


HIGH_ORDER = (SchemeKind.CPR, SchemeKind.DG, SchemeKind.NDG, SchemeKind.SD)

STAGES = {
    SchemeKind.FV: ("reconstruct", "divergence"),
    SchemeKind.DG: ("interpolate", "couple", "flux"),
    SchemeKind.SD: ("interpolate", "couple", "flux"),
    SchemeKind.CPR: ("flux",),
    SchemeKind.NDG: ("flux",),
}


@dataclass(frozen=True)
class SchemeConfig:
    """Scheme kind and degree.

    For FV, ``k`` selects the MUSCL variant: 1 -> second order, 2 -> third
    order (kappa = 1/3).  For the high-order schemes it is the solution
    polynomial degree.
    """
    kind: SchemeKind
    k: int
    limiter: LimiterConfig = field(default_factory=LimiterConfig)

    def __post_init__(self):
        object.__setattr__(self, "kind", SchemeKind(self.kind))
        object.__setattr__(self, "k", int(self.k))
        if self.kind is SchemeKind.FV and self.k not in (1, 2):
            raise basis.UnsupportedOrder(f"FV supports MUSCL k=1 or 2, got {self.k}")
        if self.kind is not SchemeKind.FV:
            basis._check_order(self.k)

    @property
    def n1(self):
        return 1 if self.kind is SchemeKind.FV else self.k + 1

    @property
    def dofs_per_element(self):
        return self.n1 ** 2


@dataclass(frozen=True)
class SchemeOperators:
    """Precomputed, read-only tables for one (scheme, k)."""
    kind: SchemeKind
    k: int
    nodes: np.ndarray
    weights: np.ndarray
    edge_left: np.ndarray
    edge_right: np.ndarray
    table: object = None

    @property
    def n1(self):
        return self.nodes.size

    @property
    def weights2d(self):
        return np.outer(self.weights, self.weights).reshape(-1)


def build_scheme_operators(kind, k):
    kind = SchemeKind(kind)
    if kind is SchemeKind.FV:
        one = np.ones(1)
        return SchemeOperators(kind, k, np.zeros(1), 2.0 * one, one, one)
    if kind is SchemeKind.CPR:
        table = basis.build_correction_ops(k)
        lag = table.lagrange
    elif kind is SchemeKind.NDG:
        table = basis.build_dg_operators(k, basis.PointKind.GAUSS_LOBATTO)
        lag = table.lagrange
    elif kind is SchemeKind.DG:
        table = basis.build_dg_operators(k, basis.PointKind.GAUSS_LEGENDRE)
        lag = table.lagrange
    else:
        table = basis.build_sd_operators(k)
        lag = table.solution
    return SchemeOperators(kind, k, lag.points.nodes, lag.points.weights,
                           lag.edge_interp_left, lag.edge_interp_right, table)


@dataclass
class FaceBuffer:
    """Left/right traces and the common normal flux at every face point."""
    left: np.ndarray
    right: np.ndarray
    flux: np.ndarray

    @classmethod
    def allocate(cls, n_faces, n_face_points):
        shape = (NVAR, n_faces, n_face_points)
        return cls(np.zeros(shape), np.zeros(shape), np.zeros(shape))


# fixed-order contractions --------------------------------------------------

def contract_last(mat, arr):
    """out[..., i] = sum_l mat[i, l] * arr[..., l], summed in index order."""
    n_out, n_in = mat.shape
    out = np.empty(arr.shape[:-1] + (n_out,))
    for i in range(n_out):
        acc = mat[i, 0] * arr[..., 0]
        for l in range(1, n_in):
            acc = acc + mat[i, l] * arr[..., l]
        out[..., i] = acc
    return out


def contract_second_last(mat, arr):
    """out[..., i, :] = sum_l mat[i, l] * arr[..., l, :]."""
    n_out, n_in = mat.shape
    out = np.empty(arr.shape[:-2] + (n_out, arr.shape[-1]))
    for i in range(n_out):
        acc = mat[i, 0] * arr[..., 0, :]
        for l in range(1, n_in):
            acc = acc + mat[i, l] * arr[..., l, :]
        out[..., i, :] = acc
    return out


def dot_last(vec, arr):
    acc = vec[0] * arr[..., 0]
    for l in range(1, vec.size):
        acc = acc + vec[l] * arr[..., l]
    return acc


def dot_second_last(vec, arr):
    acc = vec[0] * arr[..., 0, :]
    for l in range(1, vec.size):
        acc = acc + vec[l] * arr[..., l, :]
    return acc


def _chunks(n, parts):
    parts = max(1, min(parts, n))
    bounds = np.linspace(0, n, parts + 1).round().astype(int)
    return [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]


class ResidualEvaluator:
    """Common plumbing: stage execution, timing, thread pool, edge traces."""

    def __init__(self, config, mesh, gas, operators=None, threads=1):
        self.config = config
        self.mesh = mesh
        self.gas = gas
        self.ops = operators or build_scheme_operators(config.kind, config.k)
        self.conn = mesh.connectivity
        self.n1 = self.ops.n1
        self.n_sp = self.n1 * self.n1
        self.ne = mesh.n_elements
        self.threads = max(1, int(threads))
        self._pool = None
        self.stage_names = STAGES[config.kind]
        self.timings = {name: 0.0 for name in self.stage_names}
        self.calls = 0
        self.faces = FaceBuffer.allocate(self.conn.n_faces, self.n1)
        # neighbour ids with transmissive ghosts mapped onto the element itself
        nbr = self.conn.neighbors
        self._nbr_or_self = np.where(nbr >= 0, nbr, np.arange(self.ne)[:, None])

    # -- execution ----------------------------------------------------------
    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None

    def __del__(self):
        self.close()

    def _map(self, fn, n, kind):
        if self.threads == 1 or n < 2 * self.threads:
            self._guarded(fn, 0, n, kind)
            return
        if self._pool is None:
            self._pool = ThreadPoolExecutor(max_workers=self.threads)
        futures = [self._pool.submit(self._guarded, fn, lo, hi, kind)
                   for lo, hi in _chunks(n, self.threads)]
        for fut in futures:
            fut.result()

    def _guarded(self, fn, lo, hi, kind):
        try:
            fn(lo, hi)
        except NonPhysicalState as err:
            if err.element is not None:
                if kind == "face":
                    f = lo + err.element
                    l, r = self.conn.left[f], self.conn.right[f]
                    err.element = int(l if l >= 0 else r)
                else:
                    err.element = lo + err.element
                err.args = (err._format(),)
            raise

    def _stage(self, name, fn, n, kind):
        t0 = time.perf_counter()
        self._map(fn, n, kind)
        self.timings[name] += time.perf_counter() - t0

    def reset_timings(self):
        self.timings = {name: 0.0 for name in self.stage_names}
        self.calls = 0

    def residual(self, q, out=None):
        """Return dq/dt = -div F (plus coupling terms) for the field array ``q``."""
        q = np.asarray(q).reshape(NVAR, self.ne, self.n_sp)
        if out is None:
            out = np.empty_like(q)
        self._run(q, out)
        self.calls += 1
        return out

    def _run(self, q, out):
        raise NotImplementedError

    # -- traces -------------------------------------------------------------
    def edge_traces(self, q):
        """Solution traces on the four element edges, shape (4, ne, 4, n1).

        Edge order is WEST, EAST, SOUTH, NORTH; the trailing index runs along
        the edge.
        """
        q = np.asarray(q)
        nc = q.shape[0]
        q4 = q.reshape(nc, -1, self.n1, self.n1)
        out = np.empty((nc, q4.shape[1], 4, self.n1))
        out[:, :, WEST] = dot_last(self.ops.edge_left, q4)
        out[:, :, EAST] = dot_last(self.ops.edge_right, q4)
        out[:, :, SOUTH] = dot_second_last(self.ops.edge_left, q4)
        out[:, :, NORTH] = dot_second_last(self.ops.edge_right, q4)
        return out


class FVEvaluator(ResidualEvaluator):
    """MUSCL finite volume; one cell average per element."""

    def __init__(self, config, mesh, gas, operators=None, threads=1):
        super().__init__(config, mesh, gas, operators, threads)
        conn = self.conn
        nbr = self._nbr_or_self
        left = conn.left.copy()
        right = conn.right.copy()
        left = np.where(left >= 0, left, right)
        right = np.where(right >= 0, right, left)
        is_x = np.arange(conn.n_faces) < conn.n_xfaces
        back = np.where(is_x, WEST, SOUTH)
        fwd = np.where(is_x, EAST, NORTH)
        self._iL, self._iR = left, right
        self._iLL = nbr[left, back]
        self._iRR = nbr[right, fwd]
        self.limited = config.limiter.enabled
        self.kappa = 1.0 / 3.0
        self.compression = (3.0 - self.kappa) / (1.0 - self.kappa)

    def reconstruct(self, q_ll, q_l, q_r, q_rr):
        """Left and right face traces from the four-cell stencil."""
        d_lm = q_l - q_ll
        d_c = q_r - q_l
        d_rp = q_rr - q_r
        if self.config.k == 1:
            if self.limited:
                s_l = minmod(d_lm, d_c)
                s_r = minmod(d_c, d_rp)
            else:
                s_l = 0.5 * (d_lm + d_c)
                s_r = 0.5 * (d_c + d_rp)
            return q_l + 0.5 * s_l, q_r - 0.5 * s_r
        kap, b = self.kappa, self.compression
        if self.limited:
            lm, lp = minmod(d_lm, b * d_c), minmod(d_c, b * d_lm)
            rm, rp = minmod(d_c, b * d_rp), minmod(d_rp, b * d_c)
        else:
            lm, lp, rm, rp = d_lm, d_c, d_c, d_rp
        q_face_l = q_l + 0.25 * ((1.0 - kap) * lm + (1.0 + kap) * lp)
        q_face_r = q_r - 0.25 * ((1.0 - kap) * rp + (1.0 + kap) * rm)
        return q_face_l, q_face_r

    def _run(self, q, out):
        qc = q[:, :, 0]
        nxf = self.conn.n_xfaces
        fb = self.faces

        def reconstruct(lo, hi):
            sl = slice(lo, hi)
            ql, qr = self.reconstruct(qc[:, self._iLL[sl]], qc[:, self._iL[sl]],
                                      qc[:, self._iR[sl]], qc[:, self._iRR[sl]])
            fb.left[:, sl, 0] = ql
            fb.right[:, sl, 0] = qr
            xs, xe = lo, min(hi, nxf)
            if xe > xs:
                fb.flux[:, xs:xe, 0] = rusanov_flux(ql[:, :xe - xs], qr[:, :xe - xs],
                                                    X_NORMAL, self.gas)
            ys = max(lo, nxf)
            if hi > ys:
                fb.flux[:, ys:hi, 0] = rusanov_flux(ql[:, ys - lo:], qr[:, ys - lo:],
                                                    Y_NORMAL, self.gas)

        ef = self.conn.element_faces
        inv_dx, inv_dy = 1.0 / self.mesh.dx, 1.0 / self.mesh.dy

        def divergence(lo, hi):
            f = fb.flux[:, :, 0]
            e = ef[lo:hi]
            out[:, lo:hi, 0] = -((f[:, e[:, EAST]] - f[:, e[:, WEST]]) * inv_dx
                                 + (f[:, e[:, NORTH]] - f[:, e[:, SOUTH]]) * inv_dy)

        self._stage("reconstruct", reconstruct, self.conn.n_faces, "face")
        self._stage("divergence", divergence, self.ne, "element")

    def edge_traces(self, q):
        q = np.asarray(q)
        q = q.reshape(q.shape[0], -1, 1)
        return np.repeat(q[:, :, None, :], 4, axis=2)


class _LobattoFusedEvaluator(ResidualEvaluator):
    """Shared coupling logic of CPR and NDG (solution points on the edges)."""

    def _common_fluxes(self, Q, lo, hi):
        """Common x-fluxes on W/E edges and y-fluxes on S/N edges for elements lo:hi.

        Each face flux is evaluated from the face's own (left, right) pair, so
        the two elements sharing a face see bitwise-identical values.
        """
        nbr = self.conn.neighbors[lo:hi]
        own = Q[:, lo:hi]
        own_w, own_e = own[..., :, 0], own[..., :, -1]
        own_s, own_n = own[..., 0, :], own[..., -1, :]

        def across(idx, getter, fallback):
            safe = np.where(idx >= 0, idx, 0)
            vals = getter(Q[:, safe])
            missing = idx < 0
            if np.any(missing):
                vals[:, missing] = fallback[:, missing]
            return vals

        west_nb = across(nbr[:, WEST], lambda a: a[..., :, -1], own_w)
        east_nb = across(nbr[:, EAST], lambda a: a[..., :, 0], own_e)
        south_nb = across(nbr[:, SOUTH], lambda a: a[..., -1, :], own_s)
        north_nb = across(nbr[:, NORTH], lambda a: a[..., 0, :], own_n)
        gas = self.gas
        fw = rusanov_flux(west_nb, own_w, X_NORMAL, gas)
        fe = rusanov_flux(own_e, east_nb, X_NORMAL, gas)
        gs = rusanov_flux(south_nb, own_s, Y_NORMAL, gas)
        gn = rusanov_flux(own_n, north_nb, Y_NORMAL, gas)
        return (own_w, own_e, own_s, own_n), (fw, fe, gs, gn)


class CPREvaluator(_LobattoFusedEvaluator):
    """Correction procedure via reconstruction with Radau (DG) correction.

    The interior divergence uses the chain rule with analytic flux Jacobians.
    """

    def _run(self, q, out):
        n1, gas = self.n1, self.gas
        Q = q.reshape(NVAR, self.ne, n1, n1)
        O = out.reshape(NVAR, self.ne, n1, n1)
        ops = self.ops.table
        D = ops.lagrange.diff_matrix
        gl, gr = ops.radau_left, ops.radau_right
        mx, my = self.mesh.metric

        def fused(lo, hi):
            qe = Q[:, lo:hi]
            dqx = contract_last(D, qe) * mx
            dqy = contract_second_last(D, qe) * my
            div = flux_jacobian_apply(qe, dqx, dqy, gas)
            (tw, te, ts, tn), (fw, fe, gs, gn) = self._common_fluxes(Q, lo, hi)
            jw = fw - flux(tw, gas)[0]
            je = fe - flux(te, gas)[0]
            js = gs - flux(ts, gas)[1]
            jn = gn - flux(tn, gas)[1]
            corr = mx * (jw[..., :, None] * gl + je[..., :, None] * gr)
            corr = corr + my * (js[..., None, :] * gl[:, None] + jn[..., None, :] * gr[:, None])
            O[:, lo:hi] = -(div + corr)

        self._stage("flux", fused, self.ne, "element")


class NDGEvaluator(_LobattoFusedEvaluator):
    """Strong-form nodal DG on Gauss-Lobatto points with exact mass matrix."""

    def _run(self, q, out):
        n1, gas = self.n1, self.gas
        Q = q.reshape(NVAR, self.ne, n1, n1)
        O = out.reshape(NVAR, self.ne, n1, n1)
        ops = self.ops.table
        D = ops.diff
        lift_l, lift_r = ops.lift[:, 0], ops.lift[:, 1]
        mx, my = self.mesh.metric

        def fused(lo, hi):
            qe = Q[:, lo:hi]
            f, g = flux(qe, gas)
            dfx = contract_last(D, f) * mx
            dgy = contract_second_last(D, g) * my
            (tw, te, ts, tn), (fw, fe, gs, gn) = self._common_fluxes(Q, lo, hi)
            # facial F.n - F_com with outward normals
            pw = fw - f[..., :, 0]
            pe = f[..., :, -1] - fe
            ps = gs - g[..., 0, :]
            pn = g[..., -1, :] - gn
            lift = mx * (pw[..., :, None] * lift_l + pe[..., :, None] * lift_r)
            lift = lift + my * (ps[..., None, :] * lift_l[:, None] + pn[..., None, :] * lift_r[:, None])
            O[:, lo:hi] = -(dfx + dgy) + lift

        self._stage("flux", fused, self.ne, "element")


class _FaceTraceMixin:
    """Face-parallel interpolation of element traces into the face buffer."""

    def _fill_traces(self, Q, lo, hi, left_get, right_get):
        conn = self.conn
        nxf = conn.n_xfaces
        fb = self.faces
        for a, b, getters in ((lo, min(hi, nxf), (left_get[0], right_get[0])),
                              (max(lo, nxf), hi, (left_get[1], right_get[1]))):
            if b <= a:
                continue
            L, R = conn.left[a:b], conn.right[a:b]
            gl, gr = getters
            tl = gl(Q, np.where(L >= 0, L, 0))
            tr = gr(Q, np.where(R >= 0, R, 0))
            ml, mr = L < 0, R < 0
            if np.any(ml):
                tl[:, ml] = tr[:, ml]
            if np.any(mr):
                tr[:, mr] = tl[:, mr]
            fb.left[:, a:b] = tl
            fb.right[:, a:b] = tr

    def _couple(self, lo, hi):
        nxf = self.conn.n_xfaces
        fb = self.faces
        xs, xe = lo, min(hi, nxf)
        if xe > xs:
            fb.flux[:, xs:xe] = rusanov_flux(fb.left[:, xs:xe], fb.right[:, xs:xe], X_NORMAL, self.gas)
        ys = max(lo, nxf)
        if hi > ys:
            fb.flux[:, ys:hi] = rusanov_flux(fb.left[:, ys:hi], fb.right[:, ys:hi], Y_NORMAL, self.gas)


class DGEvaluator(_FaceTraceMixin, ResidualEvaluator):
    """Weak-form DG on Gauss-Legendre points with collocated quadrature."""

    def _run(self, q, out):
        n1, gas = self.n1, self.gas
        Q = q.reshape(NVAR, self.ne, n1, n1)
        O = out.reshape(NVAR, self.ne, n1, n1)
        ops = self.ops.table
        el, er = self.ops.edge_left, self.ops.edge_right
        weak = ops.weak_volume
        lift_l, lift_r = ops.lift[:, 0], ops.lift[:, 1]
        mx, my = self.mesh.metric
        ef = self.conn.element_faces
        fb = self.faces

        east = lambda A, idx: dot_last(er, A[:, idx])
        west = lambda A, idx: dot_last(el, A[:, idx])
        north = lambda A, idx: dot_second_last(er, A[:, idx])
        south = lambda A, idx: dot_second_last(el, A[:, idx])

        def interpolate(lo, hi):
            self._fill_traces(Q, lo, hi, (east, north), (west, south))

        def update(lo, hi):
            qe = Q[:, lo:hi]
            f, g = flux(qe, gas)
            vol = mx * contract_last(weak, f) + my * contract_second_last(weak, g)
            e = ef[lo:hi]
            fw, fe = fb.flux[:, e[:, WEST]], fb.flux[:, e[:, EAST]]
            gs, gn = fb.flux[:, e[:, SOUTH]], fb.flux[:, e[:, NORTH]]
            sur = mx * (fw[..., :, None] * lift_l - fe[..., :, None] * lift_r)
            sur = sur + my * (gs[..., None, :] * lift_l[:, None] - gn[..., None, :] * lift_r[:, None])
            O[:, lo:hi] = vol + sur

        self._stage("interpolate", interpolate, self.conn.n_faces, "face")
        self._stage("couple", self._couple, self.conn.n_faces, "face")
        self._stage("flux", update, self.ne, "element")


class SDEvaluator(ResidualEvaluator):
    """Spectral difference: Gauss-Legendre solution points, Gauss-Lobatto flux points."""

    def __init__(self, config, mesh, gas, operators=None, threads=1):
        super().__init__(config, mesh, gas, operators, threads)
        n1, nf = self.n1, self.n1 + 1
        self.qx = np.zeros((NVAR, self.ne, n1, nf))
        self.fx = np.zeros_like(self.qx)
        self.qy = np.zeros((NVAR, self.ne, nf, n1))
        self.gy = np.zeros_like(self.qy)

    def interpolate(self, Q, lo, hi):
        interp = self.ops.table.sol_to_flux
        qe = Q[:, lo:hi]
        qx = contract_last(interp, qe)
        qy = contract_second_last(interp, qe)
        self.qx[:, lo:hi] = qx
        self.qy[:, lo:hi] = qy
        self.fx[:, lo:hi] = flux(qx, self.gas)[0]
        self.gy[:, lo:hi] = flux(qy, self.gas)[1]

    def couple(self, lo, hi):
        conn, fb = self.conn, self.faces
        nxf = conn.n_xfaces
        for a, b in ((lo, min(hi, nxf)), (max(lo, nxf), hi)):
            if b <= a:
                continue
            L, R = conn.left[a:b], conn.right[a:b]
            Ls, Rs = np.where(L >= 0, L, 0), np.where(R >= 0, R, 0)
            if a < nxf:
                tl, tr = self.qx[..., -1][:, Ls], self.qx[..., 0][:, Rs]
                normal = X_NORMAL
            else:
                tl, tr = self.qy[:, Ls, -1, :], self.qy[:, Rs, 0, :]
                normal = Y_NORMAL
            ml, mr = L < 0, R < 0
            if np.any(ml):
                tl[:, ml] = tr[:, ml]
            if np.any(mr):
                tr[:, mr] = tl[:, mr]
            fc = rusanov_flux(tl, tr, normal, self.gas)
            fb.left[:, a:b], fb.right[:, a:b], fb.flux[:, a:b] = tl, tr, fc
            keep_l, keep_r = ~ml, ~mr
            if a < nxf:
                self.fx[..., -1][:, L[keep_l]] = fc[:, keep_l]
                self.fx[..., 0][:, R[keep_r]] = fc[:, keep_r]
            else:
                self.gy[:, L[keep_l], -1, :] = fc[:, keep_l]
                self.gy[:, R[keep_r], 0, :] = fc[:, keep_r]

    def flux_divergence(self, out4, lo, hi):
        dl = self.ops.table.flux_diff
        mx, my = self.mesh.metric
        out4[:, lo:hi] = -(mx * contract_last(dl, self.fx[:, lo:hi])
                           + my * contract_second_last(dl, self.gy[:, lo:hi]))

    def _run(self, q, out):
        n1 = self.n1
        Q = q.reshape(NVAR, self.ne, n1, n1)
        O = out.reshape(NVAR, self.ne, n1, n1)
        self._stage("interpolate", lambda lo, hi: self.interpolate(Q, lo, hi), self.ne, "element")
        self._stage("couple", self.couple, self.conn.n_faces, "face")
        self._stage("flux", lambda lo, hi: self.flux_divergence(O, lo, hi), self.ne, "element")


_EVALUATORS = {
    SchemeKind.FV: FVEvaluator,
    SchemeKind.CPR: CPREvaluator,
    SchemeKind.NDG: NDGEvaluator,
    SchemeKind.DG: DGEvaluator,
    SchemeKind.SD: SDEvaluator,
}


def make_evaluator(config, mesh, gas, operators=None, threads=1):
    return _EVALUATORS[config.kind](config, mesh, gas, operators, threads)


def residual(config, field, mesh, gas, operators=None, threads=1):
    """One-shot residual of a ConservedField (or raw array)."""
    data = getattr(field, "data", field)
    ev = make_evaluator(config, mesh, gas, operators, threads)
    try:
        return ev.residual(data)
    finally:
        ev.close()
