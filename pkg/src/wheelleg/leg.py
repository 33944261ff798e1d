"""Per-leg plant: spring-damper force model driven by a force-rate actuator.

State is the spring length variation and its rate; the measured leg force
is k_stiff*x1 + b_damp*x2.  The actuator input enters as a force rate
scaled by k_p.  A constructor state z with dz/dt = -z rides along so the
input-to-state bound can be checked numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


@dataclass
class LegPlantParams:
    """Summed coefficients of the two spring-dampers per leg, plus input gain.

    Defaults are artifact values sized so open-loop settling and force
    scale match a 1000 N funnel; they are not measured hardware values.
    """

    b_damp: float = 1000.0    # N*s/m
    k_stiff: float = 50000.0  # N/m
    k_p: float = 50000.0      # N/s per unit control signal

    def __post_init__(self):
        if not (self.b_damp > 0.0 and self.k_stiff > 0.0 and self.k_p > 0.0):
            raise ValueError(
                f"plant coefficients must be positive, got "
                f"b_damp={self.b_damp}, k_stiff={self.k_stiff}, k_p={self.k_p}")

    @property
    def rho1(self) -> float:
        return -self.k_stiff / self.b_damp

    @property
    def rho2(self) -> float:
        return self.k_p / self.b_damp


@dataclass
class LegPlantState:
    x1: float = 0.0  # spring length variation (m)
    x2: float = 0.0  # its rate (m/s)
    z: float = 0.0   # ISS constructor state


def leg_force(params: LegPlantParams, state: LegPlantState) -> float:
    """Measured leg force (N); identical to the plant output map."""
    return params.k_stiff * state.x1 + params.b_damp * state.x2


def tracking_error(f_ref: float, state: LegPlantState,
                   params: LegPlantParams) -> float:
    return f_ref - leg_force(params, state)


def plant_derivative(params: LegPlantParams, state: LegPlantState,
                     u: float) -> tuple[float, float, float]:
    return (state.x2,
            params.rho2 * u + params.rho1 * state.x2,
            -state.z)


def step(params: LegPlantParams, state: LegPlantState, u: float,
         dt: float) -> LegPlantState:
    """One classical RK4 step with the input held constant over the step."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    rho1 = params.rho1
    rho2u = params.rho2 * u

    x1, x2, z = state.x1, state.x2, state.z
    k1_1, k1_2, k1_3 = x2, rho2u + rho1 * x2, -z
    k2_1 = x2 + 0.5 * dt * k1_2
    k2_2 = rho2u + rho1 * (x2 + 0.5 * dt * k1_2)
    k2_3 = -(z + 0.5 * dt * k1_3)
    k3_1 = x2 + 0.5 * dt * k2_2
    k3_2 = rho2u + rho1 * (x2 + 0.5 * dt * k2_2)
    k3_3 = -(z + 0.5 * dt * k2_3)
    k4_1 = x2 + dt * k3_2
    k4_2 = rho2u + rho1 * (x2 + dt * k3_2)
    k4_3 = -(z + dt * k3_3)
    return LegPlantState(
        x1=x1 + dt / 6.0 * (k1_1 + 2.0 * k2_1 + 2.0 * k3_1 + k4_1),
        x2=x2 + dt / 6.0 * (k1_2 + 2.0 * k2_2 + 2.0 * k3_2 + k4_2),
        z=z + dt / 6.0 * (k1_3 + 2.0 * k2_3 + 2.0 * k3_3 + k4_3),
    )


def iss_envelope(z0: float, t: float, x_sup: float) -> float:
    """Input-to-state bound on |z(t)|: |z0|*exp(-t) + x_sup."""
    if t < 0.0:
        raise ValueError(f"t must be >= 0, got {t}")
    return abs(z0) * math.exp(-t) + x_sup
