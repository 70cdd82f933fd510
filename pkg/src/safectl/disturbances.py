"""Seeded, order-independent perturbation plans.

Every random draw is a pure function of ``(master seed, episode, step,
target)``: a Philox generator is keyed by a hash of ``(master, episode,
target)`` and its counter is positioned at the step index, so realizations do
not depend on evaluation order or on how episodes are spread over workers.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, fields, replace
from functools import lru_cache

import numpy as np

from .errors import DegenerateDistribution


class DisturbanceTarget(str, enum.Enum):
    ACTION = "action"
    OBSERVATION = "observation"
    DYNAMICS = "dynamics"


class DisturbanceKind(str, enum.Enum):
    WHITE_NOISE = "white_noise"
    STEP = "step"
    IMPULSE = "impulse"


# Stream identifiers; disturbance specs get 16 slots per target.
_STREAM_INIT_STATE = 1
_STREAM_PARAMS = 2
_STREAM_BASE = {DisturbanceTarget.ACTION: 16, DisturbanceTarget.OBSERVATION: 32, DisturbanceTarget.DYNAMICS: 48}


@lru_cache(maxsize=4096)
def _philox_key(master: int, episode: int, stream: int):
    seq = np.random.SeedSequence(int(master), spawn_key=(int(episode), int(stream)))
    return tuple(int(k) for k in seq.generate_state(2, np.uint64))


@dataclass(frozen=True)
class SeedPlan:
    """Stateless derivation of random streams from a master seed."""

    master: int

    def generator(self, episode: int, step: int, stream: int) -> np.random.Generator:
        key = np.array(_philox_key(self.master, episode, stream), dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key, counter=[0, int(step), 0, 0]))


@dataclass(frozen=True)
class Distribution:
    """Additive perturbation around a nominal value: none, uniform or gaussian."""

    kind: str = "none"
    low: float = 0.0
    high: float = 0.0
    mean: float = 0.0
    std: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "uniform", "gaussian"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "uniform" and self.low > self.high:
            raise ValueError("uniform distribution needs low <= high")
        if self.kind == "gaussian" and self.std < 0:
            raise ValueError("gaussian std must be non-negative")

    def offset(self, uniform: float, normal: float) -> float:
        if self.kind == "uniform":
            return self.low + (self.high - self.low) * uniform
        if self.kind == "gaussian":
            return self.mean + self.std * normal
        return 0.0

    @classmethod
    def from_dict(cls, d) -> "Distribution":
        if d is None:
            return cls()
        return cls(**d)


@dataclass(frozen=True)
class DisturbanceSpec:
    target: DisturbanceTarget
    kind: DisturbanceKind
    std: tuple = (0.0,)
    magnitude: tuple = (0.0,)
    step: int = 0
    channels: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "target", DisturbanceTarget(self.target))
        object.__setattr__(self, "kind", DisturbanceKind(self.kind))
        object.__setattr__(self, "std", tuple(np.atleast_1d(np.asarray(self.std, dtype=float)).tolist()))
        object.__setattr__(self, "magnitude", tuple(np.atleast_1d(np.asarray(self.magnitude, dtype=float)).tolist()))
        if self.channels is not None:
            object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if any(s < 0 for s in self.std):
            raise ValueError("white-noise std must be non-negative")
        if self.step < 0:
            raise ValueError("onset/impulse step must be non-negative")


@dataclass(frozen=True)
class RandomizationSpec:
    """Initial-state and inertial-parameter randomization plus prior scaling.

    ``x0_dist`` maps state index to a distribution; ``param_dist`` maps an
    inertial parameter name to a distribution. ``param_values`` pins
    parameters to exact values (used by deterministic sweeps).
    """

    x0_dist: dict = field(default_factory=dict)
    param_dist: dict = field(default_factory=dict)
    param_values: dict = field(default_factory=dict)
    prior_scaling: float = 1.0

    def __post_init__(self):
        if not self.prior_scaling > 0:
            raise ValueError("prior_scaling must be positive")


def sample_initial_state(spec: RandomizationSpec, nominal_x0, seed: int, episode: int) -> np.ndarray:
    x0 = np.asarray(nominal_x0, dtype=float).copy()
    if not spec.x0_dist:
        return x0
    gen = SeedPlan(seed).generator(episode, 0, _STREAM_INIT_STATE)
    n = x0.size
    uni = gen.random(n)
    nor = gen.standard_normal(n)
    for idx, dist in spec.x0_dist.items():
        i = int(idx)
        x0[i] += dist.offset(uni[i], nor[i])
    return x0


def sample_params(spec: RandomizationSpec, nominal_params, seed: int, episode: int, max_tries: int = 100):
    """Randomized copy of a parameter dataclass; pinned values applied last."""
    names = [f.name for f in fields(nominal_params)]
    for name in list(spec.param_dist) + list(spec.param_values):
        if name not in names:
            raise ValueError(f"unknown parameter {name!r} for {type(nominal_params).__name__}")
    values = {}
    plan = SeedPlan(seed)
    for name in names:
        dist = spec.param_dist.get(name)
        base = getattr(nominal_params, name)
        if dist is None or dist.kind == "none":
            continue
        stream_step = names.index(name) * max_tries
        for attempt in range(max_tries):
            gen = plan.generator(episode, stream_step + attempt, _STREAM_PARAMS)
            u, z = gen.random(), gen.standard_normal()
            val = base + dist.offset(u, z)
            if val > 0:
                values[name] = val
                break
        else:
            raise DegenerateDistribution(f"could not draw a positive value for {name} in {max_tries} tries")
    values.update({k: float(v) for k, v in spec.param_values.items()})
    return replace(nominal_params, **values) if values else nominal_params


def disturbance_draw(spec: DisturbanceSpec, dim: int, plan: SeedPlan, episode: int, step: int, index: int = 0):
    """The additive perturbation vector for one step (zeros where inactive)."""
    channels = range(dim) if spec.channels is None else spec.channels
    out = np.zeros(dim)
    chans = np.asarray(list(channels), dtype=int)
    if chans.size == 0:
        return out
    if spec.kind is DisturbanceKind.WHITE_NOISE:
        std = np.broadcast_to(np.asarray(spec.std), (chans.size,))
        gen = plan.generator(episode, step, _STREAM_BASE[spec.target] + index)
        out[chans] = std * gen.standard_normal(chans.size)
    elif spec.kind is DisturbanceKind.STEP:
        if step >= spec.step:
            out[chans] = np.broadcast_to(np.asarray(spec.magnitude), (chans.size,))
    elif step == spec.step:
        out[chans] = np.broadcast_to(np.asarray(spec.magnitude), (chans.size,))
    return out


def apply_disturbance(spec: DisturbanceSpec, value, plan: SeedPlan, episode: int, step: int, index: int = 0):
    value = np.asarray(value, dtype=float)
    return value + disturbance_draw(spec, value.size, plan, episode, step, index)


def param_grid(nominal_params, name: str, fractions) -> list:
    """Deterministic parameter sweep: ``nominal * fraction`` for each fraction."""
    base = getattr(nominal_params, name)
    return [replace(nominal_params, **{name: base * float(f)}) for f in fractions]
