"""Euler physics and the structure-of-arrays field container.

Every state-valued argument is an array whose leading axis has length 4 and
holds (rho, rho*u, rho*v, e).  Trailing axes are arbitrary, so the same
functions serve single states, face traces and whole fields.  When a
trailing axis exists, the first one is taken to be the element index for
error reporting.
"""
from dataclasses import dataclass

import numpy as np

from .errors import NonPhysicalState

NVAR = 4


@dataclass(frozen=True)
class GasModel:
    gamma: float = 1.4

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")


def _locate(bad):
    idx = np.unravel_index(int(np.flatnonzero(bad)[0]), bad.shape)
    if len(idx) == 0:
        return None, None
    element = int(idx[0])
    point = tuple(int(i) for i in idx[1:]) or None
    return element, point


def _check(rho, p):
    bad = ~((rho > 0.0) & (p > 0.0))
    if np.any(bad):
        element, point = _locate(np.atleast_1d(bad)) if np.ndim(bad) else (None, None)
        raise NonPhysicalState("non-positive density or pressure",
                               element=element, point=point)


def primitives(q, gas):
    """Return (rho, u, v, p), raising NonPhysicalState on rho <= 0 or p <= 0."""
    rho = q[0]
    if np.any(~(rho > 0.0)):
        bad = ~(np.atleast_1d(rho) > 0.0)
        element, point = _locate(bad) if np.ndim(rho) else (None, None)
        raise NonPhysicalState("non-positive density", element=element, point=point)
    u = q[1] / rho
    v = q[2] / rho
    p = (gas.gamma - 1.0) * (q[3] - 0.5 * rho * (u * u + v * v))
    _check(rho, p)
    return rho, u, v, p


def pressure(q, gas):
    return primitives(q, gas)[3]


def conserved(rho, u, v, p, gas):
    """Build conserved variables from primitives; the result has axis 0 of length 4."""
    rho, u, v, p = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (rho, u, v, p)))
    e = p / (gas.gamma - 1.0) + 0.5 * rho * (u * u + v * v)
    return np.stack([rho, rho * u, rho * v, e])


def _flux_from_prims(q, u, v, p):
    ep = q[3] + p
    f = np.stack([q[1], q[1] * u + p, q[1] * v, u * ep])
    # g mirrors f under the swap (rho*u, u) <-> (rho*v, v) operation for operation,
    # so x/y-symmetric data stays symmetric to the last bit.
    g = np.stack([q[2], q[2] * u, q[2] * v + p, v * ep])
    return f, g


def flux(q, gas):
    """Inviscid flux vectors (f, g)."""
    _, u, v, p = primitives(q, gas)
    return _flux_from_prims(q, u, v, p)


def sound_speed(q, gas):
    rho, _, _, p = primitives(q, gas)
    return np.sqrt(gas.gamma * p / rho)


def max_wave_speed(q, gas):
    """max(|u|, |v|) + c, the speed used in the CFL bound."""
    rho, u, v, p = primitives(q, gas)
    return np.maximum(np.abs(u), np.abs(v)) + np.sqrt(gas.gamma * p / rho)


def normal_flux(q, normal, gas):
    f, g = flux(q, gas)
    return f * normal[0] + g * normal[1]


def rusanov_flux(q_left, q_right, normal, gas):
    """Local Lax-Friedrichs flux across a face with unit ``normal`` (left -> right).

    The dissipation speed is max over the two states of |u.n| + c.
    """
    nx, ny = normal
    rl, ul, vl, pl = primitives(q_left, gas)
    rr, ur, vr, pr = primitives(q_right, gas)
    fl, gl = _flux_from_prims(q_left, ul, vl, pl)
    fr, gr = _flux_from_prims(q_right, ur, vr, pr)
    sl = np.abs(ul * nx + vl * ny) + np.sqrt(gas.gamma * pl / rl)
    sr = np.abs(ur * nx + vr * ny) + np.sqrt(gas.gamma * pr / rr)
    smax = np.maximum(sl, sr)
    fnl = fl * nx + gl * ny
    fnr = fr * nx + gr * ny
    return 0.5 * (fnl + fnr) - 0.5 * smax * (q_right - q_left)


def flux_jacobian_apply(q, dq_dx, dq_dy, gas):
    """A(q) dq/dx + B(q) dq/dy with the analytic Euler flux Jacobians.

    Used by the chain-rule divergence.  Returns an array shaped like ``q``.
    """
    gm1 = gas.gamma - 1.0
    rho, u, v, p = primitives(q, gas)
    ep = q[3] + p
    kin = 0.5 * (u * u + v * v)

    def directional(dq):
        drho, dm, dn, de = dq
        du = (dm - u * drho) / rho
        dv = (dn - v * drho) / rho
        dp = gm1 * (de - (u * dm + v * dn) + kin * drho)
        return du, dv, dp

    du, dv, dp = directional(dq_dx)
    fx = np.stack([
        dq_dx[1],
        u * dq_dx[1] + q[1] * du + dp,
        v * dq_dx[1] + q[1] * dv,
        du * ep + u * (dq_dx[3] + dp),
    ])
    du, dv, dp = directional(dq_dy)
    gy = np.stack([
        dq_dy[2],
        u * dq_dy[2] + q[2] * du,
        v * dq_dy[2] + q[2] * dv + dp,
        dv * ep + v * (dq_dy[3] + dp),
    ])
    return fx + gy


class ConservedField:
    """Conserved variables at every solution point of every element.

    Storage is one contiguous float64 buffer in component-major order:
    component ``c`` of point ``j`` of element ``m`` sits at flat index
    ``c * (n_elements * n_sp) + m * n_sp + j``.
    """

    def __init__(self, n_elements, n_sp, data=None):
        self.n_elements = int(n_elements)
        self.n_sp = int(n_sp)
        shape = (NVAR, self.n_elements, self.n_sp)
        if data is None:
            self.data = np.zeros(shape)
        else:
            data = np.ascontiguousarray(data, dtype=np.float64)
            if data.size != NVAR * self.n_elements * self.n_sp:
                raise ValueError(f"expected {shape} values, got array of shape {data.shape}")
            self.data = data.reshape(shape)

    @property
    def flat(self):
        return self.data.reshape(-1)

    def component(self, c):
        return self.data[c]

    def get_state(self, m, j):
        return self.data[:, m, j].copy()

    def set_state(self, m, j, state):
        self.data[:, m, j] = state

    def copy(self):
        return ConservedField(self.n_elements, self.n_sp, self.data.copy())

    def __repr__(self):
        return f"ConservedField(n_elements={self.n_elements}, n_sp={self.n_sp})"
