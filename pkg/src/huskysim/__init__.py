"""Thruster-assisted quadruped locomotion stack: centroidal MPC over a dense
QP, trot gait planning, and a deterministic rigid-body scenario simulator."""

from .dynamics import ControlInput, LinearModel, RobotState
from .gait import GaitConfig, GaitState, SwingCurve
from .mpc import Command, MpcConfig, MpcController
from .qp import QpProblem, QpSolution
from .robot import RobotParams
from .sim import FailureEvent, Scenario, SimLog, Terrain

__all__ = [
    "Command",
    "ControlInput",
    "FailureEvent",
    "GaitConfig",
    "GaitState",
    "LinearModel",
    "MpcConfig",
    "MpcController",
    "QpProblem",
    "QpSolution",
    "RobotParams",
    "RobotState",
    "Scenario",
    "SimLog",
    "SwingCurve",
    "Terrain",
]
