"""Robot parameters, serial 3-DOF leg kinematics, and joint-level commands.

Legs are indexed 0=FL, 1=FR, 2=RL, 3=RR (F/R = front/rear, L/R = left/right;
left legs sit at +y in the body frame). Each leg is a serial chain rooted at
the hip offset: abduction-adduction about the body x axis, a lateral roll
offset, hip swing about y, the thigh, knee flexion about y, the shank.
Joint angles q = (abduction, hip swing, knee), radians.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .rotations import rot_x, rot_y

# +1 for left legs (+y side), -1 for right legs
LEG_SIDE_SIGN = np.array([1.0, -1.0, 1.0, -1.0])

_DEFAULT_HIP_OFFSETS = [
    [0.15, 0.10, 0.0],
    [0.15, -0.10, 0.0],
    [-0.15, 0.10, 0.0],
    [-0.15, -0.10, 0.0],
]

# thrusters point inboard: -y on left legs, +y on right legs
_DEFAULT_THRUST_DIRS = [
    [0.0, -1.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, -1.0, 0.0],
    [0.0, 1.0, 0.0],
]

_DEFAULT_JOINT_LIMITS = [[-0.8, 0.8], [-2.0, 2.0], [-2.6, 2.6]]


class NoConvergence(Exception):
    """Inverse kinematics failed to reach the target within max iterations."""

    def __init__(self, residual: float, iterations: int):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"IK did not converge after {iterations} iterations "
            f"(residual {residual:.3e} m); target unreachable or near-singular"
        )


@dataclass
class LinkLengths:
    hip_roll_offset: float = 0.0  # m, lateral offset from abduction axis to thigh plane
    thigh: float = 0.17  # m
    shank: float = 0.17  # m


@dataclass
class RobotParams:
    """Physical parameters. Defaults: 6.625 kg platform, 26 N thrusters at the knees."""

    mass: float = 6.625  # kg
    inertia_body: np.ndarray = field(
        default_factory=lambda: np.diag([0.05, 0.10, 0.12])
    )  # kg m^2, body frame
    hip_offsets: np.ndarray = field(
        default_factory=lambda: np.array(_DEFAULT_HIP_OFFSETS)
    )  # m, body frame
    link_lengths: LinkLengths = field(default_factory=LinkLengths)
    thruster_knee_offset: float = 0.0  # m, outboard of the knee joint
    thrust_dirs: np.ndarray = field(
        default_factory=lambda: np.array(_DEFAULT_THRUST_DIRS)
    )  # body-frame unit vectors
    u_t_max: float = 26.0  # N, per thruster (physical limit)
    mu_s: float = 0.5  # friction coefficient
    gravity: float = 9.81  # m/s^2
    joint_limits: np.ndarray = field(
        default_factory=lambda: np.array(_DEFAULT_JOINT_LIMITS)
    )  # rad, (3, 2) low/high

    def __post_init__(self):
        self.inertia_body = np.asarray(self.inertia_body, dtype=float)
        self.hip_offsets = np.asarray(self.hip_offsets, dtype=float)
        self.thrust_dirs = np.asarray(self.thrust_dirs, dtype=float)
        self.joint_limits = np.asarray(self.joint_limits, dtype=float)

    def validate(self):
        if self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.inertia_body.shape != (3, 3) or not np.allclose(
            self.inertia_body, self.inertia_body.T, atol=1e-12
        ):
            raise ValueError("inertia_body must be a symmetric 3x3 matrix")
        if np.any(np.linalg.eigvalsh(self.inertia_body) <= 0):
            raise ValueError("inertia_body must be positive definite")
        if self.hip_offsets.shape != (4, 3):
            raise ValueError("hip_offsets must be 4x3")
        norms = np.linalg.norm(self.thrust_dirs, axis=1)
        if self.thrust_dirs.shape != (4, 3) or np.any(np.abs(norms - 1.0) > 1e-9):
            raise ValueError("thrust_dirs must be four unit vectors")
        if self.u_t_max <= 0:
            raise ValueError("u_t_max must be positive")
        if self.mu_s <= 0:
            raise ValueError("mu_s must be positive")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "RobotParams":
        kwargs = dict(d)
        if "link_lengths" in kwargs:
            kwargs["link_lengths"] = LinkLengths(**kwargs["link_lengths"])
        return cls(**kwargs).validate()

    @classmethod
    def from_json(cls, path) -> "RobotParams":
        with open(path) as f:
            return cls.from_dict(json.load(f))

    def leg_reach(self) -> float:
        return self.link_lengths.thigh + self.link_lengths.shank


def leg_forward_kinematics(params: RobotParams, leg_index: int, q: np.ndarray):
    """Body-frame foot and knee positions for one leg.

    The knee position is the thruster application point (before any mount
    offset and COM-relative conversion).
    """
    ll = params.link_lengths
    s = LEG_SIDE_SIGN[leg_index]
    hip = params.hip_offsets[leg_index]

    r1 = rot_x(q[0])
    thigh_root = hip + r1 @ np.array([0.0, s * ll.hip_roll_offset, 0.0])
    r12 = r1 @ rot_y(q[1])
    knee = thigh_root + r12 @ np.array([0.0, 0.0, -ll.thigh])
    r123 = r12 @ rot_y(q[2])
    foot = knee + r123 @ np.array([0.0, 0.0, -ll.shank])
    return foot, knee


def thruster_point(params: RobotParams, leg_index: int, q: np.ndarray) -> np.ndarray:
    """Body-frame thruster position: the knee, pushed outboard by the mount offset."""
    _, knee = leg_forward_kinematics(params, leg_index, q)
    s = LEG_SIDE_SIGN[leg_index]
    mount = rot_x(q[0]) @ np.array([0.0, s * params.thruster_knee_offset, 0.0])
    return knee + mount


def leg_jacobian(params: RobotParams, leg_index: int, q: np.ndarray) -> np.ndarray:
    """Analytic 3x3 Jacobian of the foot position w.r.t. q, body frame."""
    ll = params.link_lengths
    s = LEG_SIDE_SIGN[leg_index]
    hip = params.hip_offsets[leg_index]

    r1 = rot_x(q[0])
    thigh_root = hip + r1 @ np.array([0.0, s * ll.hip_roll_offset, 0.0])
    r12 = r1 @ rot_y(q[1])
    knee = thigh_root + r12 @ np.array([0.0, 0.0, -ll.thigh])
    foot = knee + r12 @ rot_y(q[2]) @ np.array([0.0, 0.0, -ll.shank])

    axis1 = np.array([1.0, 0.0, 0.0])
    axis23 = r1 @ np.array([0.0, 1.0, 0.0])  # hip swing and knee share this axis

    J = np.empty((3, 3))
    J[:, 0] = np.cross(axis1, foot - hip)
    J[:, 1] = np.cross(axis23, foot - thigh_root)
    J[:, 2] = np.cross(axis23, foot - knee)
    return J


def leg_inverse_kinematics(
    params: RobotParams,
    leg_index: int,
    target_foot_pos: np.ndarray,
    q_init: np.ndarray,
    tol: float = 1e-6,
    max_iters: int = 100,
    damping: float = 1e-3,
    step_clamp: float = 0.3,
) -> np.ndarray:
    """Damped-least-squares IK for the body-frame foot target.

    Retries from canonical elbow poses if the first descent stalls (wrong
    elbow basin). Raises NoConvergence when the residual stays above tol,
    which covers out-of-workspace targets and near-singular approaches.
    """
    lim = params.joint_limits
    lam2 = damping * damping
    starts = [
        np.asarray(q_init, dtype=float).copy(),
        np.array([0.0, 0.6, -1.6]),
        np.array([0.0, -0.6, 1.6]),
    ]
    best_residual = np.inf
    for q0 in starts:
        q = np.clip(q0, lim[:, 0], lim[:, 1])
        if abs(q[2]) < 1e-3:
            q[2] = -0.05  # straight knee is a stationary point of the radial error
        for _ in range(max_iters):
            foot, _ = leg_forward_kinematics(params, leg_index, q)
            err = target_foot_pos - foot
            if np.linalg.norm(err) < tol:
                return q
            J = leg_jacobian(params, leg_index, q)
            dq = J.T @ np.linalg.solve(J @ J.T + lam2 * np.eye(3), err)
            dq = np.clip(dq, -step_clamp, step_clamp)
            q = np.clip(q + dq, lim[:, 0], lim[:, 1])
        foot, _ = leg_forward_kinematics(params, leg_index, q)
        residual = float(np.linalg.norm(target_foot_pos - foot))
        if residual < 1e-4:
            return q
        best_residual = min(best_residual, residual)
    raise NoConvergence(best_residual, max_iters)


def stance_torques(J: np.ndarray, u_g: np.ndarray) -> np.ndarray:
    """Joint torques that realize the ground reaction force: tau = J^T u_g."""
    return J.T @ u_g


def joint_command(q_d, q, qd_d, qd, tau_ff, kp, kd) -> np.ndarray:
    """PD tracking with feedforward: tau = Kp (q_d - q) + Kd (qd_d - qd) + tau_ff."""
    q_d = np.asarray(q_d, dtype=float)
    q = np.asarray(q, dtype=float)
    return kp * (q_d - q) + kd * (np.asarray(qd_d) - np.asarray(qd)) + np.asarray(tau_ff)
