"""Uniform Cartesian quadrilateral meshes with face connectivity.

Element ``m`` at column ``i`` and row ``j`` has id ``m = j * nx + i``.  Faces
are numbered x-faces first (normal (1, 0)), then y-faces (normal (0, 1)),
each block ordered by row then column, so face ids are reproducible.  A face
stores its left element (normal points away from it) and right element;
``-1`` marks the outside of a transmissive boundary.
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidMesh

WEST, EAST, SOUTH, NORTH = 0, 1, 2, 3


class Boundary(str, Enum):
    PERIODIC = "periodic"
    TRANSMISSIVE = "transmissive"


@dataclass(frozen=True)
class FaceConnectivity:
    left: np.ndarray
    right: np.ndarray
    normals: np.ndarray
    n_xfaces: int
    # element -> global face id, columns WEST, EAST, SOUTH, NORTH
    element_faces: np.ndarray
    # element -> neighbouring element id (or -1), same column order
    neighbors: np.ndarray
    # face -> (min, max) of its tangential physical coordinate
    tangential_range: np.ndarray

    @property
    def n_faces(self):
        return self.left.size

    @property
    def boundary_faces(self):
        return np.flatnonzero((self.left < 0) | (self.right < 0))

    @property
    def interior_faces(self):
        return np.flatnonzero((self.left >= 0) & (self.right >= 0))


@dataclass(frozen=True)
class StructuredQuadMesh:
    nx: int
    ny: int
    x_min: float
    x_max: float
    y_min: float
    y_max: float
    boundary: Boundary
    connectivity: FaceConnectivity = field(repr=False, compare=False)

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.nx

    @property
    def dy(self):
        return (self.y_max - self.y_min) / self.ny

    @property
    def n_elements(self):
        return self.nx * self.ny

    @property
    def volume(self):
        return self.dx * self.dy

    @property
    def jacobian(self):
        """Determinant of the reference-to-physical map."""
        return self.dx * self.dy / 4.0

    @property
    def metric(self):
        """(d xi / dx, d eta / dy)."""
        return 2.0 / self.dx, 2.0 / self.dy

    def element_index(self, i, j):
        return j * self.nx + i

    def element_ij(self, m):
        m = np.asarray(m)
        return m % self.nx, m // self.nx

    def centers(self):
        """Element centres as two arrays of length n_elements."""
        i, j = self.element_ij(np.arange(self.n_elements))
        xc = self.x_min + (i + 0.5) * self.dx
        yc = self.y_min + (j + 0.5) * self.dy
        return xc, yc

    def solution_point_coords(self, m, xi, eta):
        """Affine image of reference points (xi, eta) in element(s) ``m``.

        Broadcasting follows numpy rules between ``m`` and the reference points.
        """
        i, j = self.element_ij(m)
        x0 = self.x_min + i * self.dx
        y0 = self.y_min + j * self.dy
        x = x0 + 0.5 * (np.asarray(xi) + 1.0) * self.dx
        y = y0 + 0.5 * (np.asarray(eta) + 1.0) * self.dy
        return x, y

    def reference_coords(self, m, x, y):
        i, j = self.element_ij(m)
        x0 = self.x_min + i * self.dx
        y0 = self.y_min + j * self.dy
        xi = 2.0 * (np.asarray(x) - x0) / self.dx - 1.0
        eta = 2.0 * (np.asarray(y) - y0) / self.dy - 1.0
        return xi, eta

    def point_grid(self, xi1d, eta1d=None):
        """Physical coordinates of a tensor point set in every element.

        Returns arrays of shape (n_elements, len(eta1d) * len(xi1d)) with the
        point index ``b * len(xi1d) + a`` (``a`` runs along x).
        """
        eta1d = xi1d if eta1d is None else eta1d
        xi2, eta2 = np.meshgrid(xi1d, eta1d)
        m = np.arange(self.n_elements)[:, None]
        return self.solution_point_coords(m, xi2.reshape(1, -1), eta2.reshape(1, -1))


def _build_connectivity(nx, ny, x_min, y_min, dx, dy, periodic):
    left, right, normals, trange = [], [], [], []
    ne = nx * ny
    element_faces = np.full((ne, 4), -1, dtype=np.int64)
    neighbors = np.full((ne, 4), -1, dtype=np.int64)

    ncol = nx if periodic else nx + 1
    fid = 0
    for j in range(ny):
        for i in range(ncol):
            if periodic:
                lm, rm = j * nx + (i - 1) % nx, j * nx + i
            else:
                lm = j * nx + i - 1 if i > 0 else -1
                rm = j * nx + i if i < nx else -1
            left.append(lm)
            right.append(rm)
            normals.append((1.0, 0.0))
            trange.append((y_min + j * dy, y_min + (j + 1) * dy))
            if lm >= 0:
                element_faces[lm, EAST] = fid
                neighbors[lm, EAST] = rm
            if rm >= 0:
                element_faces[rm, WEST] = fid
                neighbors[rm, WEST] = lm
            fid += 1
    n_xfaces = fid

    nrow = ny if periodic else ny + 1
    for j in range(nrow):
        for i in range(nx):
            if periodic:
                lm, rm = ((j - 1) % ny) * nx + i, j * nx + i
            else:
                lm = (j - 1) * nx + i if j > 0 else -1
                rm = j * nx + i if j < ny else -1
            left.append(lm)
            right.append(rm)
            normals.append((0.0, 1.0))
            trange.append((x_min + i * dx, x_min + (i + 1) * dx))
            if lm >= 0:
                element_faces[lm, NORTH] = fid
                neighbors[lm, NORTH] = rm
            if rm >= 0:
                element_faces[rm, SOUTH] = fid
                neighbors[rm, SOUTH] = lm
            fid += 1

    return FaceConnectivity(
        left=np.array(left, dtype=np.int64),
        right=np.array(right, dtype=np.int64),
        normals=np.array(normals),
        n_xfaces=n_xfaces,
        element_faces=element_faces,
        neighbors=neighbors,
        tangential_range=np.array(trange),
    )


def build_uniform_mesh(nx, ny, bounds=(0.0, 1.0, 0.0, 1.0), boundary=Boundary.PERIODIC):
    """Build a uniform ``nx`` x ``ny`` mesh over ``bounds = (x_min, x_max, y_min, y_max)``."""
    nx, ny = int(nx), int(ny)
    if nx < 2 or ny < 2:
        raise InvalidMesh(f"need at least 2 elements per direction, got {nx}x{ny}")
    x_min, x_max, y_min, y_max = (float(b) for b in bounds)
    if not (np.isfinite([x_min, x_max, y_min, y_max]).all() and x_max > x_min and y_max > y_min):
        raise InvalidMesh(f"degenerate bounds {bounds}")
    boundary = Boundary(boundary)
    dx, dy = (x_max - x_min) / nx, (y_max - y_min) / ny
    conn = _build_connectivity(nx, ny, x_min, y_min, dx, dy, boundary is Boundary.PERIODIC)
    return StructuredQuadMesh(nx, ny, x_min, x_max, y_min, y_max, boundary, conn)
