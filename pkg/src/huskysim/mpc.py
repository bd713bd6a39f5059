"""Receding-horizon force controller: condensed dense QP over the input sequence.

Per control tick the horizon dynamics x_{k+1} = A x_k + B u_k (gravity inside
the augmented state) are condensed into X = T x0 + S U, giving

    P = S' Qbar S + Rbar,   q = S' Qbar (T x0 - X_ref)

over the stacked inputs U (16 per step). Inequalities per step: friction
pyramid and unilateral normal force for stance legs, both-sided zero pinning
for swing legs, and [0, u_t_max] bounds per thruster. U = 0 is always
feasible, so the QP cannot be infeasible by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import qp
from .dynamics import NU, NX, ControlInput, LinearModel, RobotState

_DEFAULT_Q_DIAG = [400.0, 400.0, 100.0, 100.0, 400.0, 800.0, 1.0, 1.0, 1.0, 10.0, 40.0, 20.0, 0.0]
_DEFAULT_R_DIAG = [1e-4] * 12 + [1e-3] * 4


class SolverFailure(Exception):
    def __init__(self, step_index: int, cause: Exception):
        self.step_index = step_index
        self.cause = cause
        super().__init__(f"QP solve failed at control step {step_index}: {cause}")


class DimensionMismatch(ValueError):
    pass


@dataclass
class MpcConfig:
    horizon: int = 5
    dt: float = 0.03  # s, prediction step
    rate_hz: float = 100.0
    q_diag: np.ndarray = field(default_factory=lambda: np.array(_DEFAULT_Q_DIAG))
    r_diag: np.ndarray = field(default_factory=lambda: np.array(_DEFAULT_R_DIAG))
    mu: float = 0.5
    u_t_max: float = 20.0  # N, controller-side thrust cap
    thrusters_enabled: bool = True

    def __post_init__(self):
        self.q_diag = np.asarray(self.q_diag, dtype=float)
        self.r_diag = np.asarray(self.r_diag, dtype=float)

    def validate(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.q_diag.shape != (NX,) or np.any(self.q_diag < 0):
            raise ValueError(f"q_diag must be {NX} non-negative weights")
        if self.r_diag.shape != (NU,) or np.any(self.r_diag <= 0):
            raise ValueError(f"r_diag must be {NU} positive weights")
        return self

    @classmethod
    def from_dict(cls, d: dict) -> "MpcConfig":
        cfg = cls()
        cfg.horizon = int(d.get("horizon", cfg.horizon))
        cfg.dt = float(d.get("dt_s", cfg.dt))
        cfg.rate_hz = float(d.get("rate_hz", cfg.rate_hz))
        if "q_diag" in d:
            cfg.q_diag = np.asarray(d["q_diag"], dtype=float)
        if "r_diag" in d:
            cfg.r_diag = np.asarray(d["r_diag"], dtype=float)
        cfg.mu = float(d.get("mu", cfg.mu))
        cfg.u_t_max = float(d.get("u_t_max_n", cfg.u_t_max))
        cfg.thrusters_enabled = bool(d.get("thrusters_enabled", cfg.thrusters_enabled))
        return cfg.validate()


@dataclass
class Command:
    v_d: np.ndarray = field(default_factory=lambda: np.zeros(3))  # m/s, world
    yaw_rate: float = 0.0  # rad/s
    height: float = 0.25  # m above the support surface

    @classmethod
    def from_dict(cls, d: dict) -> "Command":
        return cls(
            v_d=np.asarray(d.get("v_d_mps", [0.0, 0.0, 0.0]), dtype=float),
            yaw_rate=float(d.get("yaw_rate_rps", 0.0)),
            height=float(d.get("height_m", 0.25)),
        )


def build_reference(
    state: RobotState, command: Command, config: MpcConfig, support_z: float = 0.0
) -> np.ndarray:
    """Reference states over the horizon, (horizon, 13).

    Positions integrate the velocity command from the current position;
    roll/pitch are zero, yaw integrates the rate command, height is held.
    """
    n_h = config.horizon
    ref = np.zeros((n_h, NX))
    for k in range(1, n_h + 1):
        dt_k = k * config.dt
        row = ref[k - 1]
        row[2] = state.theta[2] + command.yaw_rate * dt_k
        row[3:5] = state.p[:2] + command.v_d[:2] * dt_k
        row[5] = support_z + command.height
        row[8] = command.yaw_rate
        row[9:12] = command.v_d
        row[12] = 1.0
    return ref


def condense(models: list[LinearModel]):
    """Stack the horizon dynamics into X = T x0 + S U."""
    n_h = len(models)
    T = np.zeros((n_h * NX, NX))
    S = np.zeros((n_h * NX, n_h * NU))
    prod = np.eye(NX)
    for k in range(n_h):
        Ak, Bk = models[k].A_k, models[k].B_k
        prod = Ak @ prod
        T[k * NX : (k + 1) * NX] = prod
        S[k * NX : (k + 1) * NX, k * NU : (k + 1) * NU] = Bk
        for i in range(k):
            S[k * NX : (k + 1) * NX, i * NU : (i + 1) * NU] = (
                Ak @ S[(k - 1) * NX : k * NX, i * NU : (i + 1) * NU]
            )
    return T, S


def input_constraints(stance_seq: list[np.ndarray], config: MpcConfig):
    """Stacked inequality rows G U <= h for the whole horizon.

    Per stance leg: -u_z <= 0 plus four friction-pyramid rows. Per swing
    leg: six rows pinning the force to zero. Per thruster: upper and lower
    bound (cap 0 when thrusters are disabled). U = 0 satisfies every row.
    """
    n_h = len(stance_seq)
    rows = []
    rhs = []
    mu = config.mu
    cap = config.u_t_max if config.thrusters_enabled else 0.0
    for k in range(n_h):
        base = k * NU
        stance = stance_seq[k]
        for i in range(4):
            ix, iy, iz = base + 3 * i, base + 3 * i + 1, base + 3 * i + 2
            if stance[i]:
                for coeffs in (
                    {iz: -1.0},
                    {ix: 1.0, iz: -mu},
                    {ix: -1.0, iz: -mu},
                    {iy: 1.0, iz: -mu},
                    {iy: -1.0, iz: -mu},
                ):
                    row = np.zeros(n_h * NU)
                    for idx, val in coeffs.items():
                        row[idx] = val
                    rows.append(row)
                    rhs.append(0.0)
            else:
                for idx in (ix, iy, iz):
                    for sign in (1.0, -1.0):
                        row = np.zeros(n_h * NU)
                        row[idx] = sign
                        rows.append(row)
                        rhs.append(0.0)
        for i in range(4):
            it = base + 12 + i
            row = np.zeros(n_h * NU)
            row[it] = 1.0
            rows.append(row)
            rhs.append(cap)
            row = np.zeros(n_h * NU)
            row[it] = -1.0
            rows.append(row)
            rhs.append(0.0)
    return np.array(rows), np.array(rhs)


def assemble_qp(
    state: RobotState,
    stance_seq: list[np.ndarray],
    models: list[LinearModel],
    ref: np.ndarray,
    config: MpcConfig,
) -> qp.QpProblem:
    """Condensed QP over the stacked input vector."""
    n_h = config.horizon
    if len(models) != n_h or len(stance_seq) != n_h or ref.shape != (n_h, NX):
        raise DimensionMismatch(
            f"horizon mismatch: {len(models)} models, {len(stance_seq)} stance rows, "
            f"ref shape {ref.shape}, expected horizon {n_h}"
        )
    x0 = state.as_vector()
    T, S = condense(models)
    qbar = np.tile(config.q_diag, n_h)
    rbar = np.tile(config.r_diag, n_h)

    P = S.T @ (qbar[:, None] * S) + np.diag(rbar)
    P = 0.5 * (P + P.T)
    err = T @ x0 - ref.reshape(-1)
    q_vec = S.T @ (qbar * err)
    G, h = input_constraints(stance_seq, config)
    return qp.QpProblem(P=P, q=q_vec, G=G, h=h)


class MpcController:
    """Single-owner receding-horizon controller; carries the QP warm start."""

    def __init__(self, config: MpcConfig):
        self.config = config.validate()
        self._warm_active = None
        self._step_index = 0
        self.last_solution = None

    def step(
        self,
        state: RobotState,
        stance_seq: list[np.ndarray],
        models: list[LinearModel],
        ref: np.ndarray,
    ) -> ControlInput:
        problem = assemble_qp(state, stance_seq, models, ref, self.config)
        try:
            sol = qp.solve(problem, warm_active=self._warm_active)
        except qp.QpError as exc:
            raise SolverFailure(self._step_index, exc) from exc
        self._warm_active = sol.active_set
        self._step_index += 1
        self.last_solution = sol

        u = ControlInput.from_vector(sol.x_star[:NU])
        u.grf[~np.asarray(stance_seq[0], dtype=bool)] = 0.0  # pinned rows, re-zeroed exactly
        if not self.config.thrusters_enabled:
            u.thrust[:] = 0.0
        return u


def mpc_step(
    state: RobotState,
    stance_seq: list[np.ndarray],
    d: np.ndarray,
    r: np.ndarray,
    ref: np.ndarray,
    config: MpcConfig,
    params,
) -> ControlInput:
    """One cold-started solve with models frozen at the current d, r snapshot.

    Use MpcController for warm-started receding-horizon operation.
    """
    from .dynamics import build_continuous_model, discretize

    models = []
    for flags in stance_seq:
        A, B = build_continuous_model(state, d, r, flags, params)
        models.append(discretize(A, B, config.dt))
    return MpcController(config).step(state, stance_seq, models, ref)
