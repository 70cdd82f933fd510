"""Environment API: tasks, references, reset/step with constraint info."""

from .env import EnvConfig, EnvState, ResetInfo, SafeControlEnv, StepResult, make_env
from .task import RewardKind, TaskKind, TaskSpec, make_task, quadratic_cost
from .trajectory import Shape, generate_trajectory, planar_point

__all__ = [
    "EnvConfig",
    "EnvState",
    "ResetInfo",
    "RewardKind",
    "SafeControlEnv",
    "Shape",
    "StepResult",
    "TaskKind",
    "TaskSpec",
    "generate_trajectory",
    "make_env",
    "make_task",
    "planar_point",
    "quadratic_cost",
]
