"""Isentropic vortex and radial shock tube: initial data, exact data, profiles."""
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .basis import PointKind, gauss_points
from .core import GasModel, conserved
from .errors import MalformedReference, NoCenterlineRow

DATA_DIR_ENV = "SOLVER_DATA_DIR"
REFERENCE_FILE = "toro_radial_t025.dat"


@dataclass(frozen=True)
class VortexParams:
    epsilon: float = 5.0
    rho: float = 1.0
    u: float = 1.0
    v: float = 0.0
    p: float = 1.0
    bounds: tuple = (-5.0, 5.0, -5.0, 5.0)
    t_final: float = 1.0
    gamma: float = 1.4


@dataclass(frozen=True)
class ShockTubeParams:
    bounds: tuple = (-1.0, 1.0, -1.0, 1.0)
    radius: float = 0.4
    rho_in: float = 1.0
    p_in: float = 1.0
    rho_out: float = 0.125
    p_out: float = 0.1
    t_final: float = 0.25
    gamma: float = 1.4


def _wrap(x, lo, hi):
    return lo + np.mod(x - lo, hi - lo)


def vortex_primitives(x, y, t=0.0, params=VortexParams()):
    """(rho, u, v, p) of the exact vortex solution at time ``t``."""
    x0, x1, y0, y1 = params.bounds
    xe = _wrap(np.asarray(x, dtype=float) - params.u * t, x0, x1)
    ye = _wrap(np.asarray(y, dtype=float) - params.v * t, y0, y1)
    g = params.gamma
    eps = params.epsilon
    r2 = xe * xe + ye * ye
    amp = eps / (2.0 * np.pi) * np.exp(0.5 * (1.0 - r2))
    du, dv = -ye * amp, xe * amp
    dT = -(g - 1.0) * eps ** 2 / (8.0 * g * np.pi ** 2) * np.exp(1.0 - r2)
    T = params.p / params.rho + dT
    # isentropic: p / rho^gamma stays at its mean value
    s0 = params.p / params.rho ** g
    rho = (T / s0) ** (1.0 / (g - 1.0))
    return rho, params.u + du, params.v + dv, rho * T


def vortex_state(x, y, t=0.0, params=VortexParams()):
    rho, u, v, p = vortex_primitives(x, y, t, params)
    return conserved(rho, u, v, p, GasModel(params.gamma))


def shock_init(x, y, params=ShockTubeParams()):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    inside = x * x + y * y <= params.radius ** 2
    rho = np.where(inside, params.rho_in, params.rho_out)
    p = np.where(inside, params.p_in, params.p_out)
    zero = np.zeros_like(rho)
    return conserved(rho, zero, zero, p, GasModel(params.gamma))


def sample_field(mesh, nodes, fn):
    """Evaluate ``fn(x, y)`` at every solution point; returns (4, ne, n_sp)."""
    x, y = mesh.point_grid(nodes)
    return np.asarray(fn(x, y), dtype=float)


def element_averages(mesh, fn, n_quad):
    """Element means of ``fn(x, y)`` (leading axis = components) by tensor Gauss quadrature."""
    pts = gauss_points(PointKind.GAUSS_LEGENDRE, n_quad)
    x, y = mesh.point_grid(pts.nodes)
    w = np.outer(pts.weights, pts.weights).reshape(-1) / 4.0
    vals = np.asarray(fn(x, y), dtype=float)
    return np.tensordot(vals, w, axes=([-1], [0]))


@dataclass(frozen=True)
class ReferenceProfile:
    x: np.ndarray
    rho: np.ndarray
    header: tuple = ()

    def at(self, x):
        return np.interp(x, self.x, self.rho)


def data_dir():
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    return Path(__file__).resolve().parent / "data"


def load_reference_profile(path=None):
    """Read a two-column ``x rho`` text file; '#' starts a comment line."""
    path = Path(path) if path is not None else data_dir() / REFERENCE_FILE
    try:
        text = path.read_text()
    except OSError as exc:
        raise MalformedReference(f"cannot read reference profile {path}: {exc}") from exc
    header, rows = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            header.append(line[1:].strip())
            continue
        parts = line.split()
        if len(parts) != 2:
            raise MalformedReference(f"{path}:{lineno}: expected 2 columns, got {len(parts)}")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise MalformedReference(f"{path}:{lineno}: {exc}") from exc
    if len(rows) < 2:
        raise MalformedReference(f"{path}: fewer than two samples")
    data = np.array(rows)
    x, rho = data[:, 0], data[:, 1]
    if np.any(np.diff(x) <= 0.0):
        raise MalformedReference(f"{path}: x must be strictly increasing")
    if np.any(rho <= 0.0) or np.any(rho > 1.05):
        raise MalformedReference(f"{path}: density outside (0, 1.05]")
    return ReferenceProfile(x, rho, tuple(header))


def extract_centerline(averages_rho, mesh, axis="x"):
    """Element-average density along the row (or column) nearest the axis.

    With ``axis="x"`` the row whose centres are closest to y = 0 is returned,
    ordered by x; ties pick the lower row.  ``axis="y"`` gives the column
    nearest x = 0 ordered by y.  Returns (coordinates, rho).
    """
    rho = np.asarray(averages_rho).reshape(mesh.ny, mesh.nx)
    if axis == "x":
        yc = mesh.y_min + (np.arange(mesh.ny) + 0.5) * mesh.dy
        if not (mesh.y_min <= 0.0 <= mesh.y_max):
            raise NoCenterlineRow("mesh does not contain y = 0")
        j = int(np.argmin(np.abs(yc)))
        xc = mesh.x_min + (np.arange(mesh.nx) + 0.5) * mesh.dx
        return xc, rho[j].copy()
    if axis == "y":
        xc = mesh.x_min + (np.arange(mesh.nx) + 0.5) * mesh.dx
        if not (mesh.x_min <= 0.0 <= mesh.x_max):
            raise NoCenterlineRow("mesh does not contain x = 0")
        i = int(np.argmin(np.abs(xc)))
        yc = mesh.y_min + (np.arange(mesh.ny) + 0.5) * mesh.dy
        return yc, rho[:, i].copy()
    raise ValueError(f"axis must be 'x' or 'y', got {axis!r}")
