"""One-dimensional point sets and the precomputed operators of every scheme.

All operators act on one direction of the reference square [-1, 1]^2.  The
2D operators of the tensor-product elements factor into these 1D pieces; the
``tensor2d`` helper assembles the explicit 2D matrices where a test or a
caller needs them.
"""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UnsupportedOrder

MAX_ORDER = 3
MAX_POINTS = 20


class PointKind(str, Enum):
    GAUSS_LEGENDRE = "gauss_legendre"
    GAUSS_LOBATTO = "gauss_lobatto"


def legendre(n, x):
    """P_n(x) and P_n'(x) by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    p0, p1 = np.ones_like(x), x.copy()
    if n == 0:
        return p0, np.zeros_like(x)
    for m in range(2, n + 1):
        p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
    # derivative from n (x P_n - P_{n-1}) / (x^2 - 1), with endpoint values
    with np.errstate(divide="ignore", invalid="ignore"):
        dp = n * (x * p1 - p0) / (x * x - 1.0)
    at_end = np.isclose(np.abs(x), 1.0, rtol=0.0, atol=1e-15)
    if np.any(at_end):
        dp = np.where(at_end, np.sign(x) ** (n + 1) * 0.5 * n * (n + 1), dp)
    return p1, dp


def _newton(fun, x0, tol=1e-15, maxiter=100):
    x = x0.copy()
    for _ in range(maxiter):
        dx = fun(x)
        x -= dx
        if np.max(np.abs(dx)) < tol:
            break
    return x


def _symmetrize(x):
    x = 0.5 * (x - x[::-1])
    if x.size % 2:
        x[x.size // 2] = 0.0
    return x


@dataclass(frozen=True)
class PointSet1D:
    kind: PointKind
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def n(self):
        return self.nodes.size

    @property
    def exactness_degree(self):
        return 2 * self.n - 1 if self.kind is PointKind.GAUSS_LEGENDRE else 2 * self.n - 3


def gauss_points(kind, n):
    """Gauss-Legendre or Gauss-Lobatto nodes and weights on [-1, 1]."""
    kind = PointKind(kind)
    n = int(n)
    if kind is PointKind.GAUSS_LEGENDRE:
        if n < 1:
            raise UnsupportedOrder(f"Gauss-Legendre needs n >= 1, got {n}")
    elif n < 2:
        raise UnsupportedOrder(f"Gauss-Lobatto needs n >= 2, got {n}")
    if n > MAX_POINTS:
        raise UnsupportedOrder(f"at most {MAX_POINTS} points supported, got {n}")

    if kind is PointKind.GAUSS_LEGENDRE:
        guess = -np.cos(np.pi * (np.arange(n) + 0.75) / (n + 0.5))

        def step(x):
            p, dp = legendre(n, x)
            return p / dp

        x = _symmetrize(_newton(step, guess))
        _, dp = legendre(n, x)
        w = 2.0 / ((1.0 - x * x) * dp * dp)
    else:
        N = n - 1
        guess = -np.cos(np.pi * np.arange(n) / N)
        interior = guess[1:-1]

        # roots of P_N' : Newton on q = P_N' with q' = (2x P_N' - N(N+1) P_N) / (1 - x^2)
        def step(x):
            p, dp = legendre(N, x)
            ddp = (2.0 * x * dp - N * (N + 1) * p) / (1.0 - x * x)
            return dp / ddp

        inner = _newton(step, interior) if interior.size else interior
        x = _symmetrize(np.concatenate([[-1.0], inner, [1.0]]))
        p, _ = legendre(N, x)
        w = 2.0 / (N * (N + 1) * p * p)
    return PointSet1D(kind, x, _symmetrize_weights(w))


def _symmetrize_weights(w):
    return 0.5 * (w + w[::-1])


def lagrange_matrix(nodes, x):
    """L[i, j] = l_j(x_i) for the Lagrange basis on ``nodes``."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = nodes.size
    out = np.ones((x.size, n))
    for j in range(n):
        for m in range(n):
            if m != j:
                out[:, j] *= (x - nodes[m]) / (nodes[j] - nodes[m])
    return out


def lagrange_derivative_matrix(nodes, x):
    """D[i, j] = l_j'(x_i).  Rows sum to zero up to rounding."""
    nodes = np.asarray(nodes, dtype=float)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    n = nodes.size
    out = np.zeros((x.size, n))
    for j in range(n):
        for l in range(n):
            if l == j:
                continue
            term = np.full(x.size, 1.0 / (nodes[j] - nodes[l]))
            for m in range(n):
                if m != j and m != l:
                    term *= (x - nodes[m]) / (nodes[j] - nodes[m])
            out[:, j] += term
    return out


def nodal_diff_matrix(nodes):
    """Differentiation matrix at the nodes, diagonal fixed so rows sum to zero."""
    d = lagrange_derivative_matrix(nodes, nodes)
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


@dataclass(frozen=True)
class LagrangeOps:
    points: PointSet1D
    diff_matrix: np.ndarray
    edge_interp_left: np.ndarray
    edge_interp_right: np.ndarray


def build_lagrange_ops(points):
    nodes = points.nodes
    return LagrangeOps(
        points=points,
        diff_matrix=nodal_diff_matrix(nodes),
        edge_interp_left=lagrange_matrix(nodes, [-1.0])[0],
        edge_interp_right=lagrange_matrix(nodes, [1.0])[0],
    )


def _check_order(k):
    if not (1 <= int(k) <= MAX_ORDER):
        raise UnsupportedOrder(f"polynomial degree must be in 1..{MAX_ORDER}, got {k}")
    return int(k)


@dataclass(frozen=True)
class DGOperators:
    """Mass, stiffness, differentiation, face mass and lifting in one direction.

    ``stiffness[i, j] = int l_i l_j'``; ``face_mass_left/right`` are the 1D
    boundary terms l_i(-1) l_j(-1) and l_i(1) l_j(1); ``lift`` has columns
    M^-1 l(-1) and M^-1 l(1).
    """
    lagrange: LagrangeOps
    mass: np.ndarray
    mass_inv: np.ndarray
    stiffness: np.ndarray
    diff: np.ndarray
    face_mass_left: np.ndarray
    face_mass_right: np.ndarray
    lift: np.ndarray
    # weak-form volume operator M^-1 S^T (acts on nodal flux values)
    weak_volume: np.ndarray

    @property
    def nodes(self):
        return self.lagrange.points.nodes

    @property
    def weights(self):
        return self.lagrange.points.weights


def build_dg_operators(k, kind=PointKind.GAUSS_LEGENDRE):
    """Exact-integral DG operators on k+1 nodes of the given kind."""
    k = _check_order(k)
    pts = gauss_points(kind, k + 1)
    lag = build_lagrange_ops(pts)
    quad = gauss_points(PointKind.GAUSS_LEGENDRE, k + 2)
    phi = lagrange_matrix(pts.nodes, quad.nodes)
    dphi = lagrange_derivative_matrix(pts.nodes, quad.nodes)
    mass = (phi * quad.weights[:, None]).T @ phi
    stiff = (phi * quad.weights[:, None]).T @ dphi
    mass_inv = np.linalg.inv(mass)
    l_left, l_right = lag.edge_interp_left, lag.edge_interp_right
    return DGOperators(
        lagrange=lag,
        mass=mass,
        mass_inv=mass_inv,
        stiffness=stiff,
        diff=mass_inv @ stiff,
        face_mass_left=np.outer(l_left, l_left),
        face_mass_right=np.outer(l_right, l_right),
        lift=mass_inv @ np.column_stack([l_left, l_right]),
        weak_volume=mass_inv @ stiff.T,
    )


def radau_derivatives(k, x):
    """Derivatives of the left/right DG correction functions at ``x``.

    g_left is the right Radau polynomial of degree k+1 (1 at -1, 0 at +1),
    g_right its mirror image.
    """
    _, dpk = legendre(k, x)
    _, dpk1 = legendre(k + 1, x)
    d_left = (-1.0) ** (k + 1) * 0.5 * (dpk1 - dpk)
    d_right = 0.5 * (dpk + dpk1)
    return d_left, d_right


@dataclass(frozen=True)
class CorrectionOps:
    """Radau correction coefficients at the Lobatto solution points.

    ``update_table[p]`` lists, for 2D solution point ``p = b*n + a``, the four
    edge-point slots it receives corrections from, as (side, tangential index)
    pairs, and ``update_coeff[p]`` the matching coefficients.
    """
    lagrange: LagrangeOps
    radau_left: np.ndarray
    radau_right: np.ndarray
    update_table: np.ndarray
    update_coeff: np.ndarray

    @property
    def nodes(self):
        return self.lagrange.points.nodes

    @property
    def weights(self):
        return self.lagrange.points.weights


def build_correction_ops(k):
    k = _check_order(k)
    pts = gauss_points(PointKind.GAUSS_LOBATTO, k + 1)
    lag = build_lagrange_ops(pts)
    d_left, d_right = radau_derivatives(k, pts.nodes)
    n = k + 1
    table = np.zeros((n * n, 4, 2), dtype=np.int64)
    coeff = np.zeros((n * n, 4))
    for b in range(n):
        for a in range(n):
            p = b * n + a
            table[p] = [(0, b), (1, b), (2, a), (3, a)]
            coeff[p] = [d_left[a], d_right[a], d_left[b], d_right[b]]
    return CorrectionOps(lag, d_left, d_right, table, coeff)


@dataclass(frozen=True)
class SDOperators:
    solution: LagrangeOps
    flux_points: PointSet1D
    sol_to_flux: np.ndarray
    flux_diff: np.ndarray

    @property
    def nodes(self):
        return self.solution.points.nodes

    @property
    def weights(self):
        return self.solution.points.weights

    @property
    def flux_nodes(self):
        return self.flux_points.nodes


def build_sd_operators(k):
    k = _check_order(k)
    sol = build_lagrange_ops(gauss_points(PointKind.GAUSS_LEGENDRE, k + 1))
    fp = gauss_points(PointKind.GAUSS_LOBATTO, k + 2)
    return SDOperators(
        solution=sol,
        flux_points=fp,
        sol_to_flux=lagrange_matrix(sol.points.nodes, fp.nodes),
        flux_diff=lagrange_derivative_matrix(fp.nodes, sol.points.nodes),
    )


def tensor2d(op_x=None, op_y=None, n=None):
    """Assemble a 2D operator on points p = b*n + a from 1D factors.

    ``op_x`` acts along a (x), ``op_y`` along b (y); a missing factor is the
    identity of size ``n``.
    """
    if op_x is None:
        op_x = np.eye(n)
    if op_y is None:
        op_y = np.eye(n)
    return np.kron(op_y, op_x)
