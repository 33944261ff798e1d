"""Body-level force planning: wrench construction, leg-force allocation,
and the rigid-body posture response.

Frames: navigation frame has z up; body frame origin at the COG with x
forward, y to the left.  Pose q = [x, y, z, roll, pitch, yaw], small
roll/pitch regime (Euler rates treated as body rates).

Sign convention: a positive leg force is compression and pushes the body
away from the contact, so each Jacobian column carries the unit vector
from contact point to attachment point.  The gravity wrench is
[0, 0, m*g, 0, 0, 0] - the wrench the legs must supply to hold the body.
The moment columns may be taken about either the contact or the
attachment point because the force line of action passes through both.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

GRAVITY = 9.81  # m/s^2

# Damping for the least-squares allocation; vertical-leg geometry makes
# the Jacobian rank-deficient, so a plain solve is not available.
ALLOCATION_DAMPING = 1e-6


@dataclass
class Posture:
    """6-DOF pose of the body frame in the navigation frame plus derivatives."""

    q: np.ndarray
    qdot: np.ndarray
    qddot: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float).reshape(6)
        self.qdot = np.asarray(self.qdot, dtype=float).reshape(6)
        self.qddot = np.asarray(self.qddot, dtype=float).reshape(6)
        if not (abs(self.q[3]) < math.pi / 2 and abs(self.q[4]) < math.pi / 2):
            raise ValueError(
                f"roll/pitch outside the small-angle regime: {self.q[3:5]}")

    @staticmethod
    def rest(z: float = 0.0) -> "Posture":
        q = np.zeros(6)
        q[2] = z
        return Posture(q, np.zeros(6), np.zeros(6))


@dataclass
class RobotGeometry:
    """Hexagonal attachment layout plus current ground contact points.

    Attachment points ``attach`` and contact points ``contact`` are both
    expressed in the body frame, one column triple per leg, legs numbered
    clockwise around the hexagon.
    """

    edge_length: float
    attach: np.ndarray   # (6, 3)
    contact: np.ndarray  # (6, 3)

    def __post_init__(self):
        self.attach = np.asarray(self.attach, dtype=float).reshape(6, 3)
        self.contact = np.asarray(self.contact, dtype=float).reshape(6, 3)

    @staticmethod
    def regular_hexagon(edge_length: float, leg_drop: float) -> "RobotGeometry":
        """Legs at the vertices of a regular hexagon, contacts straight below.

        Vertex i sits at angle 90 - 60*i degrees so no leg lies on the
        centerline: tracks run at |y| = edge_length/2 and edge_length.
        """
        if edge_length <= 0.0 or leg_drop <= 0.0:
            raise ValueError("edge_length and leg_drop must be positive")
        attach = np.zeros((6, 3))
        for i in range(6):
            theta = math.radians(90.0 - 60.0 * i)
            attach[i, 0] = edge_length * math.cos(theta)
            attach[i, 1] = edge_length * math.sin(theta)
        contact = attach.copy()
        contact[:, 2] -= leg_drop
        return RobotGeometry(edge_length, attach, contact)


@dataclass
class BodyInertia:
    mass: float
    inertia: np.ndarray  # 3x3 about the COG, body frame
    gravity: float = GRAVITY

    def __post_init__(self):
        self.inertia = np.asarray(self.inertia, dtype=float).reshape(3, 3)
        if self.mass <= 0.0:
            raise ValueError(f"mass must be positive, got {self.mass}")
        if not np.allclose(self.inertia, self.inertia.T):
            raise ValueError("inertia must be symmetric")
        if np.any(np.linalg.eigvalsh(self.inertia) <= 0.0):
            raise ValueError("inertia must be positive definite")


@dataclass
class LegForceVector:
    """Allocated per-leg force magnitudes plus the allocation residual."""

    f: np.ndarray
    residual: float = 0.0
    clamped: bool = False

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float).reshape(6)


def rotation_matrix(roll: float, pitch: float, yaw: float) -> np.ndarray:
    cr, sr = math.cos(roll), math.sin(roll)
    cp, sp = math.cos(pitch), math.sin(pitch)
    cy, sy = math.cos(yaw), math.sin(yaw)
    return np.array([
        [cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr],
        [sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr],
        [-sp, cp * sr, cp * cr],
    ])


def _skew(v: np.ndarray) -> np.ndarray:
    return np.array([
        [0.0, -v[2], v[1]],
        [v[2], 0.0, -v[0]],
        [-v[1], v[0], 0.0],
    ])


def jacobian(geom: RobotGeometry) -> np.ndarray:
    """6x6 map from leg force magnitudes to the body wrench.

    Column i is [u_i; contact_i x u_i] with u_i the unit push direction
    (contact toward attachment).
    """
    J = np.zeros((6, 6))
    for i in range(6):
        d = geom.attach[i] - geom.contact[i]
        n = float(np.linalg.norm(d))
        if n < 1e-9:
            raise ValueError(f"degenerate leg direction for leg {i}: |d|={n}")
        u = d / n
        J[:3, i] = u
        J[3:, i] = np.cross(geom.contact[i], u)
    return J


def mass_matrix(q: np.ndarray, inertia: BodyInertia) -> np.ndarray:
    M = np.zeros((6, 6))
    M[:3, :3] = inertia.mass * np.eye(3)
    R = rotation_matrix(q[3], q[4], q[5])
    M[3:, 3:] = R @ inertia.inertia @ R.T
    return M


def coriolis_matrix(q: np.ndarray, qdot: np.ndarray,
                    inertia: BodyInertia) -> np.ndarray:
    """Angular-velocity cross terms; zero translational block."""
    C = np.zeros((6, 6))
    R = rotation_matrix(q[3], q[4], q[5])
    iw = R @ inertia.inertia @ R.T
    C[3:, 3:] = _skew(qdot[3:]) @ iw
    return C


def gravity_wrench(inertia: BodyInertia) -> np.ndarray:
    g = np.zeros(6)
    g[2] = inertia.mass * inertia.gravity
    return g


def desired_wrench(ref: Posture, fb: Posture, inertia: BodyInertia) -> np.ndarray:
    """Wrench the legs should produce for the given reference and feedback."""
    M = mass_matrix(fb.q, inertia)
    C = coriolis_matrix(fb.q, fb.qdot, inertia)
    return (M @ (ref.qddot - fb.qddot)
            + C @ (ref.qdot - fb.qdot)
            + gravity_wrench(inertia))


def allocate_leg_forces(J: np.ndarray, tau: np.ndarray,
                        damping: float = ALLOCATION_DAMPING,
                        residual_tol: float = 1.0) -> LegForceVector:
    """Damped least-squares solve of J*f = tau.

    Negative components (legs cannot pull) are clamped to zero with a
    warning; the residual is computed on the returned, possibly clamped,
    forces.
    """
    J = np.asarray(J, dtype=float).reshape(6, 6)
    tau = np.asarray(tau, dtype=float).reshape(6)
    if not np.all(np.isfinite(J)):
        raise ValueError("Jacobian contains non-finite entries")
    A = J.T @ J + damping * np.eye(6)
    f = np.linalg.solve(A, J.T @ tau)
    clamped = bool(np.any(f < 0.0))
    if clamped:
        log.warning("allocation clamped tension demand to zero: f=%s", f)
        f = np.maximum(f, 0.0)
    residual = float(np.linalg.norm(J @ f - tau))
    if residual > residual_tol:
        log.warning("allocation infeasible: residual %.3g exceeds %.3g",
                    residual, residual_tol)
    return LegForceVector(f=f, residual=residual, clamped=clamped)


def body_acceleration(q: np.ndarray, qdot: np.ndarray,
                      applied_wrench: np.ndarray,
                      inertia: BodyInertia) -> np.ndarray:
    M = mass_matrix(q, inertia)
    C = coriolis_matrix(q, qdot, inertia)
    return np.linalg.solve(M, applied_wrench - C @ qdot - gravity_wrench(inertia))


def rigid_body_step(q: np.ndarray, qdot: np.ndarray,
                    applied_wrench: np.ndarray, inertia: BodyInertia,
                    dt: float) -> tuple[np.ndarray, np.ndarray]:
    """One RK4 step of the posture dynamics under the applied wrench."""
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    q = np.asarray(q, dtype=float).reshape(6)
    qdot = np.asarray(qdot, dtype=float).reshape(6)
    tau = np.asarray(applied_wrench, dtype=float).reshape(6)

    def f(y_q, y_qd):
        return y_qd, body_acceleration(y_q, y_qd, tau, inertia)

    k1q, k1v = f(q, qdot)
    k2q, k2v = f(q + 0.5 * dt * k1q, qdot + 0.5 * dt * k1v)
    k3q, k3v = f(q + 0.5 * dt * k2q, qdot + 0.5 * dt * k2v)
    k4q, k4v = f(q + dt * k3q, qdot + dt * k3v)
    q_new = q + dt / 6.0 * (k1q + 2 * k2q + 2 * k3q + k4q)
    qdot_new = qdot + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    if not (np.all(np.isfinite(q_new)) and np.all(np.isfinite(qdot_new))):
        raise FloatingPointError("body state became non-finite")
    return q_new, qdot_new
