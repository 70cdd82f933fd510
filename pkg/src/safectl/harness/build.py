"""Construct models, environments, controllers and filters from an ``ExperimentConfig``."""

from __future__ import annotations

import numpy as np

from ..constraints import ConstraintSet, bound, linear, quadratic
from ..controllers import (
    IlqrController,
    LqrController,
    MpcConfig,
    MpcController,
    MpcMode,
    PidController,
    PidGains,
    ZeroController,
)
from ..disturbances import DisturbanceKind, DisturbanceSpec, DisturbanceTarget, Distribution, RandomizationSpec
from ..dynamics import make_model
from ..envs import make_env, make_task
from ..safefilters import CbfFilter, GpMpcController, MpscFilter
from .config import ExperimentConfig


def build_model(cfg: ExperimentConfig):
    return make_model(cfg.system["name"], **cfg.system.get("params", {}))


def build_task(cfg: ExperimentConfig, model=None):
    model = model or build_model(cfg)
    t = cfg.task
    return make_task(
        model,
        kind=t["kind"],
        L=t["L"],
        dt=1.0 / cfg.rates["control_hz"],
        Q=t.get("Q"),
        R=t.get("R"),
        goal=t.get("goal"),
        trajectory=t.get("trajectory"),
        theta_max=t["theta_max"],
        reward=t["reward"],
    )


def build_constraints(cfg: ExperimentConfig, model) -> ConstraintSet:
    specs = []
    for c in cfg.constraints:
        form, target, sel, name = c["form"], c["target"], c["selector"], c.get("name", "")
        if form == "bound":
            specs.append(bound(target, sel, c.get("lower"), c.get("upper"), name=name))
        elif form == "linear":
            specs.append(linear(target, sel, np.array(c["A"]), np.array(c["b"]), name=name))
        else:
            specs.append(quadratic(target, sel, np.array(c["P"]), c["r"], name=name))
    return ConstraintSet(tuple(specs), model.n_x, model.n_u)


def build_disturbances(cfg: ExperimentConfig) -> tuple:
    out = []
    for d in cfg.disturbances:
        ch = d.get("channels")
        out.append(
            DisturbanceSpec(
                DisturbanceTarget(d["target"]),
                DisturbanceKind(d["kind"]),
                std=tuple(d["std"]),
                magnitude=tuple(d["magnitude"]),
                step=d["step"],
                channels=None if ch is None else tuple(ch),
            )
        )
    return tuple(out)


def build_randomization(cfg: ExperimentConfig) -> RandomizationSpec:
    r = cfg.randomization
    return RandomizationSpec(
        x0_dist={int(k): Distribution.from_dict(v) for k, v in r["x0"].items()},
        param_dist={k: Distribution.from_dict(v) for k, v in r["params"].items()},
        param_values=dict(r["param_values"]),
        prior_scaling=r["prior_scaling"],
    )


def build_env(cfg: ExperimentConfig):
    model = build_model(cfg)
    task = build_task(cfg, model)
    return make_env(
        model,
        task,
        x0=cfg.x0,
        constraints=build_constraints(cfg, model),
        disturbances=build_disturbances(cfg),
        randomization=build_randomization(cfg),
        physics_hz=cfg.rates["physics_hz"],
        control_hz=cfg.rates["control_hz"],
    )


def _mpc_config(c: dict, mode: MpcMode) -> MpcConfig:
    keys = ("horizon", "sqp_iters", "step_damping", "warm_start", "slack_penalty", "state_backoff",
            "use_constraints", "qp_eps", "qp_max_iter")
    return MpcConfig(mode=mode, **{k: c[k] for k in keys if k in c})


def build_controller(cfg: ExperimentConfig):
    c = cfg.controller
    name = c["name"]
    if name == "none":
        return ZeroController()
    if name == "pid":
        return PidController(PidGains(**c.get("gains", {})))
    if name == "lqr":
        return LqrController(c.get("mode", "discrete"))
    if name == "ilqr":
        return IlqrController(c.get("max_iter", 50))
    if name in ("lmpc", "nmpc"):
        return MpcController(_mpc_config(c, MpcMode.LINEAR if name == "lmpc" else MpcMode.NONLINEAR))
    kw = {k: c[k] for k in ("z_score", "control_hz") if k in c}
    return GpMpcController(_mpc_config(c, MpcMode.NONLINEAR), **kw)


def training_settings(cfg: ExperimentConfig) -> dict:
    """GP data-collection settings with defaults filled in."""
    t = dict(cfg.controller.get("train", {}))
    t.setdefault("seconds", 60.0)
    t.setdefault("excitation", 0.05)
    t.setdefault("policy", "pid")
    t.setdefault("seed", 1)
    t.setdefault("save_csv", False)
    return t


def build_training_policy(name: str):
    return PidController() if name == "pid" else LqrController()


def build_filter(cfg: ExperimentConfig):
    f = cfg.filter
    if f["name"] == "none":
        return None
    if f["name"] == "cbf":
        return CbfFilter(gamma=f.get("gamma", 5.0))
    kw = {k: f[k] for k in ("horizon", "terminal_half_width", "state_margin") if k in f}
    return MpscFilter(**kw)
