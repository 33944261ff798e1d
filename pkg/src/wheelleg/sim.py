"""Closed-loop scenario engine, sensor emulation, and metric extraction.

Tick pipeline (posture mode), one fixed step per tick:

1. terrain contact update: the kinematic mismatch between body height
   over each contact and the leg extension is injected into the leg
   spring state (exogenous excitation path);
2. posture feedback (truth or 20 Hz sampled-and-held);
3. shaped reference -> desired wrench -> leg-force allocation;
4. per-leg controller (funnel trigger + law, or impedance baseline);
5. per-leg plant steps (independent, barrier before the body stage);
6. body step under the wrench actually produced by the legs.

Everything is deterministic given the configuration; identical configs
produce bit-identical logs.

The funnel control law outputs u = -sat(gain); the actuator drive fed to
the plant is -u so that positive force error raises the leg force (the
plant's force rate is +k_p times its input).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import body as bd
from . import leg as lg
from .funnel import (FunnelParams, FunnelViolation, TriggerParams,
                     TriggerState, control_law, funnel_value,
                     min_inter_event_time, omega_bound, trigger_evaluate,
                     validate_parameters)
from .impedance import ImpedanceState, impedance_step
from .scenario import ConfigError, ScenarioConfig

CSV_COLUMNS = ["t", "leg", "f_ref", "y", "e", "psi", "u", "event",
               "roll_deg", "pitch_deg", "margin", "z_iss", "limit_hit"]


class PostureSensor:
    """Posture feedback source: pass-through truth or 20 Hz zero-order hold
    with first-difference derivative estimates."""

    def __init__(self, mode: str = "truth", period: float = 0.05):
        if mode not in ("truth", "sampled-20hz"):
            raise ValueError(f"unknown sensor mode {mode!r}")
        self.mode = mode
        self.period = period
        self._next_t = 0.0
        self._held_q: np.ndarray | None = None
        self._held_qdot = np.zeros(6)
        self._held_qddot = np.zeros(6)

    def sample(self, t: float, q: np.ndarray, qdot: np.ndarray,
               qddot: np.ndarray) -> bd.Posture:
        if self.mode == "truth":
            return bd.Posture(q.copy(), qdot.copy(), qddot.copy())
        if t >= self._next_t - 1e-12:
            if self._held_q is None:
                qdot_est = np.zeros(6)
            else:
                qdot_est = (q - self._held_q) / self.period
            self._held_qddot = (qdot_est - self._held_qdot) / self.period \
                if self._held_q is not None else np.zeros(6)
            self._held_qdot = qdot_est
            self._held_q = q.copy()
            self._next_t += self.period
        return bd.Posture(self._held_q.copy(), self._held_qdot.copy(),
                          self._held_qddot.copy())


def sensor_sample(q_true: bd.Posture, mode: str,
                  sensor: PostureSensor | None = None,
                  t: float = 0.0) -> bd.Posture:
    """Single-shot form of the sensor path; truth mode is the identity."""
    if mode == "truth":
        return bd.Posture(q_true.q.copy(), q_true.qdot.copy(),
                          q_true.qddot.copy())
    if sensor is None:
        sensor = PostureSensor(mode)
    return sensor.sample(t, q_true.q, q_true.qdot, q_true.qddot)


@dataclass
class SimTrajectory:
    """Time-indexed record of one run, the surface all tests poke at."""

    t: np.ndarray
    f_ref: np.ndarray      # (n, legs)
    y: np.ndarray
    e: np.ndarray
    psi: np.ndarray
    u: np.ndarray
    event: np.ndarray      # bool
    margin: np.ndarray     # psi - |e| on the active funnel segment
    z_iss: np.ndarray
    limit_hit: np.ndarray  # bool
    q: np.ndarray          # (n, 6) body pose
    event_times: list[list[float]]
    mode: str
    controller: str
    funnel_params: FunnelParams | None
    trigger_params: TriggerParams | None
    meta: dict = field(default_factory=dict)

    @property
    def n_legs(self) -> int:
        return self.f_ref.shape[1]

    def roll_deg(self) -> np.ndarray:
        return np.degrees(self.q[:, 3])

    def pitch_deg(self) -> np.ndarray:
        return np.degrees(self.q[:, 4])

    def write_csv(self, path: str | Path) -> None:
        roll = self.roll_deg()
        pitch = self.pitch_deg()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_COLUMNS)
            for k in range(len(self.t)):
                for i in range(self.n_legs):
                    w.writerow([
                        repr(float(self.t[k])), i + 1,
                        repr(float(self.f_ref[k, i])),
                        repr(float(self.y[k, i])),
                        repr(float(self.e[k, i])),
                        repr(float(self.psi[k, i])),
                        repr(float(self.u[k, i])),
                        int(self.event[k, i]),
                        repr(float(roll[k])),
                        repr(float(pitch[k])),
                        repr(float(self.margin[k, i])),
                        repr(float(self.z_iss[k, i])),
                        int(self.limit_hit[k, i]),
                    ])


@dataclass
class Metrics:
    """Per-run summary mirroring the experiment tables."""

    e_min: np.ndarray
    e_max: np.ndarray
    e_range: np.ndarray
    roll_min: float
    roll_max: float
    pitch_min: float
    pitch_max: float
    angle_min: float     # over roll and pitch together, degrees
    angle_max: float
    angle_range: float
    event_count: int
    events_per_leg: list[int]
    min_event_gap: float                 # min consecutive gap over all legs
    varpi_measured: float                # min containment margin over run
    varpi_per_leg: np.ndarray
    delta_bound_per_leg: list[float]     # dwell bound from each leg's margin
    dwell_violations: int
    f_ref_rate_max: float
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "e_force": {
                f"leg{i + 1}": {"min": float(self.e_min[i]),
                                "max": float(self.e_max[i]),
                                "range": float(self.e_range[i])}
                for i in range(len(self.e_min))
            },
            "e_range_max": float(np.max(self.e_range)),
            "angle": {"roll_min": self.roll_min, "roll_max": self.roll_max,
                      "pitch_min": self.pitch_min, "pitch_max": self.pitch_max,
                      "min": self.angle_min, "max": self.angle_max,
                      "range": self.angle_range},
            "events": {"total": self.event_count,
                       "per_leg": self.events_per_leg,
                       "min_gap": self.min_event_gap,
                       "dwell_violations": self.dwell_violations,
                       "delta_bound_per_leg": self.delta_bound_per_leg},
            "varpi_measured": self.varpi_measured,
            "varpi_per_leg": [float(v) for v in self.varpi_per_leg],
            "f_ref_rate_max": self.f_ref_rate_max,
            "meta": self.meta,
        }


def extract_metrics(traj: SimTrajectory) -> Metrics:
    if len(traj.t) == 0:
        raise ValueError("cannot extract metrics from an empty trajectory")
    n_legs = traj.n_legs
    e_min = traj.e.min(axis=0)
    e_max = traj.e.max(axis=0)
    roll = traj.roll_deg()
    pitch = traj.pitch_deg()
    angle_min = float(min(roll.min(), pitch.min()))
    angle_max = float(max(roll.max(), pitch.max()))

    events_per_leg = [len(ev) for ev in traj.event_times]
    gaps = []
    for ev in traj.event_times:
        if len(ev) >= 2:
            gaps.extend(np.diff(ev))
    min_gap = float(min(gaps)) if gaps else math.inf

    varpi_per_leg = traj.margin.min(axis=0)
    deltas: list[float] = []
    violations = 0
    if traj.funnel_params is not None and traj.trigger_params is not None:
        for i in range(n_legs):
            varpi = float(varpi_per_leg[i])
            if 0.0 < varpi < traj.funnel_params.initial_width:
                delta = min_inter_event_time(traj.funnel_params,
                                             traj.trigger_params, varpi)
            else:
                delta = 0.0
            deltas.append(delta)
            ev = traj.event_times[i]
            if len(ev) >= 2:
                violations += int(np.sum(np.diff(ev) < delta - 1e-12))

    return Metrics(
        e_min=e_min, e_max=e_max, e_range=e_max - e_min,
        roll_min=float(roll.min()), roll_max=float(roll.max()),
        pitch_min=float(pitch.min()), pitch_max=float(pitch.max()),
        angle_min=angle_min, angle_max=angle_max,
        angle_range=angle_max - angle_min,
        event_count=sum(events_per_leg), events_per_leg=events_per_leg,
        min_event_gap=min_gap,
        varpi_measured=float(varpi_per_leg.min()),
        varpi_per_leg=varpi_per_leg,
        delta_bound_per_leg=deltas, dwell_violations=violations,
        f_ref_rate_max=float(traj.meta.get("f_ref_rate_max", 0.0)),
        meta=dict(traj.meta),
    )


def validate_scenario(cfg: ScenarioConfig):
    """Theorem-hypothesis validation for the scenario's funnel controller."""
    omega = omega_bound(cfg.rate_estimate(), cfg.plant, cfg.funnel,
                        cfg.reference_sup(), 0.0)
    return validate_parameters(cfg.funnel, cfg.trigger, omega,
                               cfg.initial_error())


def run_scenario(cfg: ScenarioConfig) -> SimTrajectory:
    cfg.validate()
    if cfg.mode == "force_tracking":
        return _run_force_tracking(cfg)
    return _run_posture(cfg)


def force_tracking_test(cfg: ScenarioConfig) -> Metrics:
    return extract_metrics(run_scenario(cfg))


class _Recorder:
    def __init__(self, n_steps: int, n_legs: int):
        self.t = np.zeros(n_steps)
        shape = (n_steps, n_legs)
        self.f_ref = np.zeros(shape)
        self.y = np.zeros(shape)
        self.e = np.zeros(shape)
        self.psi = np.zeros(shape)
        self.u = np.zeros(shape)
        self.event = np.zeros(shape, dtype=bool)
        self.margin = np.zeros(shape)
        self.z_iss = np.zeros(shape)
        self.limit_hit = np.zeros(shape, dtype=bool)
        self.q = np.zeros((n_steps, 6))


def _gate_funnel_run(cfg: ScenarioConfig) -> None:
    report = validate_scenario(cfg)
    if not report.ok:
        raise ConfigError(
            f"scenario {cfg.name!r} fails containment-theorem hypotheses: "
            + ", ".join(report.failed()))


def _run_force_tracking(cfg: ScenarioConfig) -> SimTrajectory:
    _gate_funnel_run(cfg)
    dt = cfg.run.dt
    n_steps = int(round(cfg.run.duration / dt))
    plant = cfg.plant
    profile = cfg.force_profile

    state = lg.LegPlantState()
    trig_state = TriggerState()
    rec = _Recorder(n_steps, 1)
    prev_c = profile.vibration.displacement(0.0)
    prev_cdot = 0.0
    prev_f_star = profile.reference(0.0)
    rate_max = 0.0

    for k in range(n_steps):
        t = k * dt
        # mechanical surface excitation enters the spring state directly
        c = profile.vibration.displacement(t)
        if k > 0:
            dc = c - prev_c
            cdot = dc / dt
            state.x1 += dc
            state.x2 += cdot - prev_cdot
            prev_c, prev_cdot = c, cdot

        f_star = profile.reference(t)
        rate_max = max(rate_max, abs(f_star - prev_f_star) / dt) if k else 0.0
        prev_f_star = f_star
        y = lg.leg_force(plant, state)
        e = f_star - y
        try:
            fired = trigger_evaluate(e, t, cfg.funnel, cfg.trigger, trig_state)
            u = control_law(e, t, cfg.funnel, cfg.trigger, trig_state)
        except FunnelViolation as exc:
            raise FunnelViolation(
                f"run {cfg.name!r} aborted at t={t:.4f}s: {exc}",
                t=t, error=e, envelope=exc.envelope, leg=1) from exc
        psi = funnel_value(cfg.funnel, t - trig_state.t_k)

        rec.t[k] = t
        rec.f_ref[k, 0] = f_star
        rec.y[k, 0] = y
        rec.e[k, 0] = e
        rec.psi[k, 0] = psi
        rec.u[k, 0] = u
        rec.event[k, 0] = fired
        rec.margin[k, 0] = psi - abs(e)
        rec.z_iss[k, 0] = state.z

        state = lg.step(plant, state, -u, dt)

    return SimTrajectory(
        t=rec.t, f_ref=rec.f_ref, y=rec.y, e=rec.e, psi=rec.psi, u=rec.u,
        event=rec.event, margin=rec.margin, z_iss=rec.z_iss,
        limit_hit=rec.limit_hit, q=rec.q,
        event_times=[list(trig_state.event_times)],
        mode=cfg.mode, controller="FC",
        funnel_params=cfg.funnel, trigger_params=cfg.trigger,
        meta={"name": cfg.name, "config_hash": cfg.config_hash,
              "f_ref_rate_max": rate_max,
              "f_ref_rate_estimate": cfg.rate_estimate(),
              "dt": dt, "duration": cfg.run.duration},
    )


def _run_posture(cfg: ScenarioConfig) -> SimTrajectory:
    use_fc = cfg.controller == "FC"
    if use_fc:
        _gate_funnel_run(cfg)

    dt = cfg.run.dt
    n_steps = int(round(cfg.run.duration / dt))
    plant = cfg.plant
    geom = cfg.geometry()
    inertia = cfg.inertia()
    terrain = cfg.terrain()
    attach = geom.attach
    z0 = cfg.geometry_leg_drop
    static_share = inertia.mass * inertia.gravity / 6.0
    speed = cfg.run.speed

    q = np.zeros(6)
    q[2] = z0
    qdot = np.zeros(6)
    qdot[0] = speed
    qddot_prev = np.zeros(6)
    # the robot starts standing: springs preloaded to the static share so
    # the run begins at force equilibrium (e(0) = 0)
    x1_init = static_share / plant.k_stiff
    legs = [lg.LegPlantState(x1=x1_init) for _ in range(6)]
    trig_states = [TriggerState() for _ in range(6)]
    imp_states = [ImpedanceState() for _ in range(6)]
    sensor = PostureSensor(cfg.run.sensor_mode)
    rec = _Recorder(n_steps, 6)

    # exogenous-path bookkeeping: c_i = terrain height minus body height at
    # the attachment; increments of c_i are injected into the spring state
    prev_c = np.zeros(6)
    prev_cdot = np.zeros(6)
    cum_kin = np.zeros(6)     # accumulated kinematic injection, for the
    # workspace accounting of the force-controlled actuator
    R0 = bd.rotation_matrix(q[3], q[4], q[5])
    for i in range(6):
        p_nav = q[:3] + R0 @ attach[i]
        prev_c[i] = terrain.height(p_nav[0], p_nav[1]) - p_nav[2]

    # impedance baseline bookkeeping; the preset trajectory is planned from
    # vision-grade terrain knowledge: sampled at pft_sample_hz and lagged by
    # pft_latency (the funnel controller never touches terrain knowledge)
    pft_period = 1.0 / cfg.pft_sample_hz
    next_pft_t = 0.0
    pft_held = np.zeros(6)
    pft_lag = cfg.pft_latency * speed  # longitudinal offset of the plan
    prev_cmd = np.zeros(6)
    prev_cmd_rate = np.zeros(6)

    prev_f_star = np.full(6, static_share)
    rate_max = 0.0
    residual_max = 0.0
    clamp_count = 0

    for k in range(n_steps):
        t = k * dt
        # stage 1: prescribed drive + terrain contact -> spring excitation
        q[0] = speed * t
        R = bd.rotation_matrix(q[3], q[4], q[5])
        contact = np.zeros((6, 3))
        h = np.zeros(6)
        wheel_xy = np.zeros((6, 2))
        for i in range(6):
            p_nav = q[:3] + R @ attach[i]
            wheel_xy[i] = p_nav[:2]
            h[i] = terrain.height(p_nav[0], p_nav[1])
            c_i = h[i] - p_nav[2]
            if k > 0:
                dc = c_i - prev_c[i]
                cdot = dc / dt
                legs[i].x1 += dc
                legs[i].x2 += cdot - prev_cdot[i]
                cum_kin[i] += dc
                prev_c[i], prev_cdot[i] = c_i, cdot
            contact[i] = attach[i] - R.T @ np.array([0.0, 0.0, p_nav[2] - h[i]])
        geom.contact = contact

        # stage 2: posture feedback and shaped reference acceleration
        fb = sensor.sample(t, q, qdot, qddot_prev)
        rz, rzd, rzdd = cfg.body_raise.z_offset(t)
        q_ref = np.array([speed * t, 0.0, z0 + rz, 0.0, 0.0, 0.0])
        qd_ref = np.array([speed, 0.0, rzd, 0.0, 0.0, 0.0])
        qdd_ref = np.array([0.0, 0.0, rzdd, 0.0, 0.0, 0.0])
        qdd_shaped = (qdd_ref + cfg.servo.kp * (q_ref - fb.q)
                      + cfg.servo.kd * (qd_ref - fb.qdot))
        ref = bd.Posture(q_ref, qd_ref, qdd_shaped)

        # stage 3: desired wrench -> per-leg force plan.  Horizontal force
        # and yaw moment ride on the wheel-drive path (out of scope), so
        # only the posture axes are demanded of the legs.
        J = bd.jacobian(geom)
        tau = bd.desired_wrench(ref, fb, inertia)
        tau_alloc = tau.copy()
        tau_alloc[0] = tau_alloc[1] = tau_alloc[5] = 0.0
        alloc = bd.allocate_leg_forces(J, tau_alloc, cfg.allocation_damping,
                                       cfg.allocation_residual_tol)
        f_star = alloc.f
        residual_max = max(residual_max, alloc.residual)
        clamp_count += int(alloc.clamped)
        if k > 0:
            rate_max = max(rate_max,
                           float(np.max(np.abs(f_star - prev_f_star))) / dt)
        prev_f_star = f_star.copy()

        # stage 4+5: per-leg control and plant steps
        if not use_fc and t >= next_pft_t - 1e-12:
            pft_held = np.array([terrain.height(wheel_xy[i, 0] - pft_lag,
                                                wheel_xy[i, 1])
                                 for i in range(6)])
            next_pft_t += pft_period
        for i in range(6):
            y_i = lg.leg_force(plant, legs[i])
            e_i = f_star[i] - y_i
            fired = False
            u_i = 0.0
            psi_i = 0.0
            margin_i = 0.0
            limit = False
            if use_fc:
                try:
                    fired = trigger_evaluate(e_i, t, cfg.funnel, cfg.trigger,
                                             trig_states[i])
                    u_i = control_law(e_i, t, cfg.funnel, cfg.trigger,
                                      trig_states[i])
                except FunnelViolation as exc:
                    raise FunnelViolation(
                        f"run {cfg.name!r} aborted at t={t:.4f}s, leg {i + 1}: "
                        f"{exc}", t=t, error=e_i, envelope=exc.envelope,
                        leg=i + 1) from exc
                psi_i = funnel_value(cfg.funnel, t - trig_states[i].t_k)
                margin_i = psi_i - abs(e_i)
                drive = -u_i
                # workspace guard on the actuator displacement (relative to
                # the standing preload)
                disp = legs[i].x1 - x1_init - cum_kin[i]
                if abs(disp) > cfg.workspace_limit:
                    legs[i].x1 = x1_init + cum_kin[i] + math.copysign(
                        cfg.workspace_limit, disp)
                    limit = True
            else:
                # impedance yield under the measured force; the virtual-model
                # constants put the displacement output in millimeters
                imp_states[i] = impedance_step(cfg.impedance, imp_states[i],
                                               y_i, dt)
                cmd = rz - pft_held[i] - cfg.ic_displacement_scale * imp_states[i].u
                if abs(cmd) > cfg.workspace_limit:
                    cmd = math.copysign(cfg.workspace_limit, cmd)
                    limit = True
                d_cmd = cmd - prev_cmd[i]
                cmd_rate = d_cmd / dt if k > 0 else 0.0
                legs[i].x1 += d_cmd
                legs[i].x2 += cmd_rate - prev_cmd_rate[i]
                prev_cmd[i] = cmd
                prev_cmd_rate[i] = cmd_rate
                drive = 0.0

            rec.f_ref[k, i] = f_star[i]
            rec.y[k, i] = y_i
            rec.e[k, i] = e_i
            rec.psi[k, i] = psi_i
            rec.u[k, i] = u_i
            rec.event[k, i] = fired
            rec.margin[k, i] = margin_i
            rec.z_iss[k, i] = legs[i].z
            rec.limit_hit[k, i] = limit
            legs[i] = lg.step(plant, legs[i], drive, dt)

        rec.t[k] = t
        rec.q[k] = q

        # stage 6: body responds to the wrench the legs actually produce
        f_actual = np.array([lg.leg_force(plant, legs[i]) for i in range(6)])
        tau_a = J @ f_actual
        q, qdot = bd.rigid_body_step(q, qdot, tau_a, inertia, dt)
        qddot_prev = bd.body_acceleration(q, qdot, tau_a, inertia)
        # wheel drive path is out of scope: x, y, yaw follow the commanded
        # track exactly
        q[0] = speed * (k + 1) * dt
        q[1] = 0.0
        q[5] = 0.0
        qdot[0] = speed
        qdot[1] = 0.0
        qdot[5] = 0.0

    meta = {"name": cfg.name, "config_hash": cfg.config_hash,
            "controller": cfg.controller, "terrain": cfg.terrain_preset,
            "f_ref_rate_max": rate_max, "residual_max": residual_max,
            "clamp_count": clamp_count, "dt": dt,
            "duration": cfg.run.duration}
    if use_fc:
        meta["f_ref_rate_estimate"] = cfg.rate_estimate()

    return SimTrajectory(
        t=rec.t, f_ref=rec.f_ref, y=rec.y, e=rec.e, psi=rec.psi, u=rec.u,
        event=rec.event, margin=rec.margin, z_iss=rec.z_iss,
        limit_hit=rec.limit_hit, q=rec.q,
        event_times=[list(s.event_times) for s in trig_states],
        mode=cfg.mode, controller=cfg.controller,
        funnel_params=cfg.funnel if use_fc else None,
        trigger_params=cfg.trigger if use_fc else None,
        meta=meta,
    )


def write_metrics_json(metrics: Metrics, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(metrics.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
