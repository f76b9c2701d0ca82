"""Generate the radial shock-tube reference density profile.

Solves the 1D Euler equations in cylindrical symmetry,

    U_t + F(U)_r = -(1/r) (rho u, rho u^2, u (E + p)),

on r in [0, R] with a fine MUSCL/Rusanov finite-volume scheme and SSP-RK3,
then writes the density mirrored onto x in [-1, 1] along y = 0.

Usage: python tools/make_reference.py [out_path] [n_cells]
"""
import sys
from pathlib import Path

import numpy as np

GAMMA = 1.4
R_OUTER = 1.5
T_FINAL = 0.25
RADIUS = 0.4


def primitive(U):
    rho = U[0]
    u = U[1] / rho
    p = (GAMMA - 1.0) * (U[2] - 0.5 * rho * u * u)
    return rho, u, p


def physical_flux(U):
    rho, u, p = primitive(U)
    return np.array([rho * u, rho * u * u + p, u * (U[2] + p)])


def minmod(a, b):
    return np.where(a * b > 0.0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def rhs(U, r, dr):
    # ghosts: reflective at r = 0, transmissive at r = R
    G = np.concatenate([U[:, 1::-1] * np.array([[1.0], [-1.0], [1.0]]), U,
                        U[:, -1:], U[:, -1:]], axis=1)
    d = np.diff(G, axis=1)
    s = minmod(d[:, :-1], d[:, 1:])
    UL = G[:, 1:-2] + 0.5 * s[:, :-1]
    UR = G[:, 2:-1] - 0.5 * s[:, 1:]
    rl, ul, pl = primitive(UL)
    rr, ur, pr = primitive(UR)
    a = np.maximum(np.abs(ul) + np.sqrt(GAMMA * pl / rl), np.abs(ur) + np.sqrt(GAMMA * pr / rr))
    F = 0.5 * (physical_flux(UL) + physical_flux(UR)) - 0.5 * a * (UR - UL)
    rho, u, p = primitive(U)
    src = -np.array([rho * u, rho * u * u, u * (U[2] + p)]) / r
    return -(F[:, 1:] - F[:, :-1]) / dr + src


def solve(n_cells):
    dr = R_OUTER / n_cells
    r = (np.arange(n_cells) + 0.5) * dr
    inside = r <= RADIUS
    rho = np.where(inside, 1.0, 0.125)
    p = np.where(inside, 1.0, 0.1)
    U = np.array([rho, np.zeros_like(r), p / (GAMMA - 1.0)])
    t = 0.0
    while t < T_FINAL:
        rho, u, p = primitive(U)
        dt = 0.4 * dr / np.max(np.abs(u) + np.sqrt(GAMMA * p / rho))
        dt = min(dt, T_FINAL - t)
        U1 = U + dt * rhs(U, r, dr)
        U2 = 0.75 * U + 0.25 * (U1 + dt * rhs(U1, r, dr))
        U = U / 3.0 + 2.0 / 3.0 * (U2 + dt * rhs(U2, r, dr))
        t += dt
    return r, U[0]


def main(argv):
    out = Path(argv[1]) if len(argv) > 1 else (
        Path(__file__).resolve().parents[1] / "src" / "eulerbench" / "data" / "toro_radial_t025.dat")
    n = int(argv[2]) if len(argv) > 2 else 6000
    r, rho = solve(n)
    x = np.linspace(-1.0, 1.0, 801)
    rho_x = np.interp(np.abs(x), r, rho)
    header = [
        "Radially symmetric shock tube, density along y = 0 at t = 0.25",
        "Inside r < 0.4: rho = 1, p = 1; outside: rho = 0.125, p = 0.1; gamma = 1.4",
        f"Computed with tools/make_reference.py: cylindrical 1D Euler, {n} cells on r in [0, {R_OUTER}],",
        "MUSCL-minmod + Rusanov flux + SSP-RK3 at CFL 0.4, mirrored to x in [-1, 1]",
        "columns: x rho",
    ]
    with out.open("w") as fh:
        for line in header:
            fh.write(f"# {line}\n")
        for xi, ri in zip(x, rho_x):
            fh.write(f"{xi:.6f} {ri:.8f}\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main(sys.argv)
