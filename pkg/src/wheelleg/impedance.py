"""Impedance baseline: leg force mapped to a vertical displacement through
a virtual spring-damper-mass model, realized as a time-domain ODE per leg.
"""

from __future__ import annotations

from dataclasses import dataclass

from .terrain import TerrainProfile


@dataclass
class ImpedanceParams:
    m: float  # virtual mass
    c: float  # virtual damping
    k: float  # virtual stiffness

    def __post_init__(self):
        if not (self.m > 0.0 and self.c > 0.0 and self.k > 0.0):
            raise ValueError(
                f"impedance parameters must be positive, got "
                f"m={self.m}, c={self.c}, k={self.k}")


@dataclass
class ImpedanceState:
    u: float = 0.0      # displacement output (m)
    u_dot: float = 0.0  # its rate (m/s)


def impedance_step(params: ImpedanceParams, state: ImpedanceState,
                   force: float, dt: float) -> ImpedanceState:
    """One RK4 step of m*u'' + c*u' + k*u = force, force held over the step."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    m, c, k = params.m, params.c, params.k

    def acc(u, ud):
        return (force - c * ud - k * u) / m

    u, ud = state.u, state.u_dot
    k1u, k1v = ud, acc(u, ud)
    k2u, k2v = ud + 0.5 * dt * k1v, acc(u + 0.5 * dt * k1u, ud + 0.5 * dt * k1v)
    k3u, k3v = ud + 0.5 * dt * k2v, acc(u + 0.5 * dt * k2u, ud + 0.5 * dt * k2v)
    k4u, k4v = ud + dt * k3v, acc(u + dt * k3u, ud + dt * k3v)
    return ImpedanceState(
        u=u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u),
        u_dot=ud + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v),
    )


def preset_foot_trajectory(terrain: TerrainProfile, wheel_x: float,
                           wheel_y: float = 0.0) -> float:
    """Terrain height under the wheel - the idealized planned foot height."""
    return terrain.height(wheel_x, wheel_y)
