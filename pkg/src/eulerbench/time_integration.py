"""CFL step size and the three-stage SSP Runge-Kutta integrator."""
from dataclasses import dataclass

import numpy as np

from .core import max_wave_speed
from .errors import NonPhysicalState


@dataclass(frozen=True)
class TimeConfig:
    cfl: float
    t_final: float
    # "adaptive": recompute dt every step; "fixed": keep the initial dt
    dt_policy: str = "adaptive"

    def __post_init__(self):
        if not self.cfl > 0.0:
            raise ValueError(f"cfl must be positive, got {self.cfl}")
        if self.dt_policy not in ("adaptive", "fixed"):
            raise ValueError(f"unknown dt policy {self.dt_policy!r}")


def compute_dt(q, mesh, gas, cfl):
    """cfl * min(dx, dy) / max over all points of (max(|u|, |v|) + c)."""
    speed = np.max(max_wave_speed(q, gas))
    return cfl * min(mesh.dx, mesh.dy) / speed


def rk3_step(q, dt, rhs, limiter=None, per_stage=True):
    """One Shu-Osher SSP-RK3 step.

    ``rhs(q)`` returns dq/dt.  ``limiter(q)``, when given, modifies its
    argument in place after every stage (or only after the last one when
    ``per_stage`` is false).
    """
    def post(stage_q, last=False):
        if limiter is not None and (per_stage or last):
            limiter(stage_q)
        return stage_q

    stage = 1
    try:
        q1 = post(q + dt * rhs(q))
        stage = 2
        q2 = post(0.75 * q + 0.25 * (q1 + dt * rhs(q1)))
        stage = 3
        return post(q / 3.0 + 2.0 / 3.0 * (q2 + dt * rhs(q2)), last=True)
    except NonPhysicalState as err:
        raise err.with_context(stage=stage)


@dataclass
class IntegrationResult:
    q: np.ndarray
    t: float
    steps: int
    dts: list


def integrate(q0, rhs, mesh, gas, time_config, limiter=None, per_stage=True,
              step_callback=None, max_steps=10_000_000):
    """March ``q0`` to ``time_config.t_final``; the last step is clipped to land on it.

    A limiter, when given, is also applied once to the initial data.
    """
    q = np.array(q0, dtype=float, copy=True)
    if limiter is not None:
        limiter(q)
    t = 0.0
    t_final = time_config.t_final
    dt_fixed = None
    dts = []
    steps = 0
    while t < t_final * (1.0 - 1e-14) and steps < max_steps:
        try:
            if time_config.dt_policy == "fixed":
                if dt_fixed is None:
                    dt_fixed = compute_dt(q, mesh, gas, time_config.cfl)
                dt = dt_fixed
            else:
                dt = compute_dt(q, mesh, gas, time_config.cfl)
            if not np.isfinite(dt) or dt <= 0.0:
                raise NonPhysicalState("non-finite time step")
            dt = min(dt, t_final - t)
            q = rk3_step(q, dt, rhs, limiter, per_stage)
        except NonPhysicalState as err:
            raise err.with_context(time=t)
        t += dt
        steps += 1
        dts.append(dt)
        if step_callback is not None:
            step_callback(q, t, steps)
    return IntegrationResult(q, t, steps, dts)
