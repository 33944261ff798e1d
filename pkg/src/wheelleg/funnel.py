"""Funnel force control with an event-based funnel refresh.

The tracking error of each leg is kept inside a shrinking performance
envelope ("funnel")::

    envelope(elapsed) = a * exp(-b * elapsed) + xi

where ``elapsed`` is the time since the last refresh event.  The control
gain grows without bound as the error approaches the envelope, which is
what forces containment.  A supervisory condition compares the gain
computed on the current funnel segment against the gain computed on a
fresh segment and restarts the funnel clock when they drift apart; the
guaranteed minimum time between restarts excludes Zeno behavior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field


class FunnelViolation(RuntimeError):
    """Tracking error reached or crossed the funnel boundary."""

    def __init__(self, message: str, *, t: float = float("nan"),
                 error: float = float("nan"), envelope: float = float("nan"),
                 leg: int | None = None):
        super().__init__(message)
        self.t = t
        self.error = error
        self.envelope = envelope
        self.leg = leg


@dataclass
class FunnelParams:
    """Exponential funnel: amplitude ``a`` (N), decay ``b`` (1/s), floor ``xi`` (N)."""

    a: float
    b: float
    xi: float

    def __post_init__(self):
        if not (self.a > 0.0 and self.b > 0.0 and self.xi > 0.0):
            raise ValueError(
                f"funnel parameters must be positive, got a={self.a}, b={self.b}, xi={self.xi}")

    @property
    def initial_width(self) -> float:
        return self.a + self.xi


@dataclass
class TriggerParams:
    """Event condition constants.

    rho5   -- relative drift threshold, in (0, 1)
    varrho -- lower-gain fraction, in (0, 1)
    u_hat  -- saturation bound on the control signal, > 0
    """

    rho5: float
    varrho: float
    u_hat: float

    def __post_init__(self):
        if not 0.0 < self.rho5 < 1.0:
            raise ValueError(f"rho5 must lie in (0,1), got {self.rho5}")
        if not 0.0 < self.varrho < 1.0:
            raise ValueError(f"varrho must lie in (0,1), got {self.varrho}")
        if not self.u_hat > 0.0:
            raise ValueError(f"u_hat must be positive, got {self.u_hat}")


@dataclass
class TriggerState:
    """Funnel clock: time of the last refresh event plus the event log."""

    t_k: float = 0.0
    event_times: list[float] = field(default_factory=list)

    def reset(self, t: float) -> None:
        self.t_k = t
        self.event_times.append(t)


@dataclass
class OmegaBound:
    """Drift bound used by the feasibility checks.

    omega = sup|dF*/dt| + |rho6| * b_f + l_psi, with b_f the plant drift
    bound over the reachable set |x| < b_x and l_psi the funnel slope
    bound a*b.  rho6 is kept so the signed reading can be reconstructed.
    """

    omega: float
    b_f: float
    b_x: float
    l_psi: float
    rho6: float


@dataclass
class ConditionCheck:
    name: str
    passed: bool
    slack: float  # positive slack = margin by which the condition holds


@dataclass
class ValidationReport:
    checks: list[ConditionCheck]
    varpi_candidate: float
    omega: OmegaBound

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


def funnel_value(params: FunnelParams, elapsed: float) -> float:
    """Envelope width at ``elapsed`` seconds after the last event."""
    if elapsed < 0.0:
        raise ValueError(f"elapsed must be >= 0, got {elapsed}")
    return params.a * math.exp(-params.b * elapsed) + params.xi


def saturate(v: float, u_hat: float) -> float:
    """Clip ``v`` to [-u_hat, u_hat]; sign(0) taken as 0."""
    if v > u_hat:
        return u_hat
    if v < -u_hat:
        return -u_hat
    return v


def gain_current(e: float, params: FunnelParams, elapsed_since_event: float) -> float:
    """Error-scaled gain on the current funnel segment: e / (envelope - |e|)."""
    width = funnel_value(params, elapsed_since_event)
    margin = width - abs(e)
    if margin <= 0.0:
        raise FunnelViolation(
            f"|e|={abs(e):.6g} N reached funnel width {width:.6g} N "
            f"(elapsed={elapsed_since_event:.6g} s)",
            error=e, envelope=width)
    return e / margin


def gain_reset(e: float, params: FunnelParams) -> float:
    """Gain the controller would have on a freshly restarted funnel."""
    return gain_current(e, params, 0.0)


def u_bar(u_k: float, trig: TriggerParams) -> float:
    """Threshold scale for the event condition.

    The min is applied to |u_k|: a signed reading would make the
    threshold negative for negative errors and fire the trigger always.
    """
    floor = trig.varrho * trig.u_hat
    if abs(u_k) > floor:
        return min(abs(u_k), trig.u_hat)
    return floor


def trigger_evaluate(e: float, t: float, params: FunnelParams,
                     trig: TriggerParams, state: TriggerState) -> bool:
    """Evaluate the event condition at time ``t``; fires on ties (>=).

    On firing, the funnel clock resets (t_k <- t) so the control law's
    envelope returns to its initial width.  Returns True iff fired.
    """
    u_k = gain_current(e, params, t - state.t_k)
    u_s = gain_reset(e, params)
    if abs(u_k - u_s) >= trig.rho5 * u_bar(u_k, trig):
        state.reset(t)
        return True
    return False


def control_law(e: float, t: float, params: FunnelParams,
                trig: TriggerParams, state: TriggerState) -> float:
    """Saturated funnel control signal, -sat(gain); magnitude <= u_hat."""
    return -saturate(gain_current(e, params, t - state.t_k), trig.u_hat)


def omega_bound(f_ref_rate_sup: float, plant, params: FunnelParams,
                ref_sup: float, x0_norm: float) -> OmegaBound:
    """Assemble the drift bound from plant coefficients and the funnel slope.

    The composite gain rho6 = (rho3 + rho4*rho1)/rho1 vanishes identically
    for the spring-damper plant (rho3 = -rho4*rho1) but is computed in
    full.  Magnitudes are used for the rho6 term since rho1 < 0 makes the
    signed product ambiguous.
    """
    if not (plant.b_damp > 0.0 and plant.k_stiff > 0.0 and plant.k_p > 0.0):
        raise ValueError("plant coefficients must be positive")
    rho1 = -plant.k_stiff / plant.b_damp
    rho3 = plant.k_stiff
    rho4 = plant.b_damp
    rho6 = (rho3 + rho4 * rho1) / rho1
    b_x = abs(x0_norm) + abs(ref_sup) + params.initial_width
    b_f = abs(rho1) * b_x
    l_psi = params.a * params.b  # global Lipschitz constant of the envelope
    omega = abs(f_ref_rate_sup) + abs(rho6) * b_f + l_psi
    return OmegaBound(omega=omega, b_f=b_f, b_x=b_x, l_psi=l_psi, rho6=rho6)


def validate_parameters(params: FunnelParams, trig: TriggerParams,
                        omega: OmegaBound, e0: float) -> ValidationReport:
    """Check the containment-theorem hypotheses; never raises.

    Conditions: u_hat > omega, |e(0)| < envelope(0), rho5 < 1 - omega/u_hat,
    varrho*u_hat < 1.  Slack is the margin by which each holds (negative
    when violated).  Also reports the containment-margin candidate
    min{xi/2, (1-rho5)*xi/(2*omega), envelope(0) - |e(0)|}.
    """
    psi0 = params.initial_width
    checks = [
        ConditionCheck("u_hat > omega", trig.u_hat > omega.omega,
                       trig.u_hat - omega.omega),
        ConditionCheck("|e0| < psi(0)", abs(e0) < psi0, psi0 - abs(e0)),
        ConditionCheck("rho5 < 1 - omega/u_hat",
                       trig.rho5 < 1.0 - omega.omega / trig.u_hat,
                       (1.0 - omega.omega / trig.u_hat) - trig.rho5),
        ConditionCheck("varrho*u_hat < 1", trig.varrho * trig.u_hat < 1.0,
                       1.0 - trig.varrho * trig.u_hat),
    ]
    if omega.omega > 0.0:
        mid = (1.0 - trig.rho5) * params.xi / (2.0 * omega.omega)
    else:
        mid = math.inf
    varpi = min(params.xi / 2.0, mid, psi0 - abs(e0))
    return ValidationReport(checks=checks, varpi_candidate=varpi, omega=omega)


def min_inter_event_time(params: FunnelParams, trig: TriggerParams,
                         varpi: float) -> float:
    """Guaranteed lower bound on the gap between consecutive events."""
    psi0 = params.initial_width
    if not 0.0 < varpi < psi0:
        raise ValueError(
            f"containment margin must lie in (0, {psi0}), got {varpi}")
    return (trig.rho5 * trig.varrho * trig.u_hat * varpi * varpi
            / (psi0 * (psi0 - varpi)))
