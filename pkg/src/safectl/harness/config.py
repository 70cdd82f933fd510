"""YAML experiment configuration: schema validation, defaults and canonical form."""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, fields
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema
import yaml

from ..errors import ParseError, SchemaError

STATE_DIM = {"cartpole": 4, "quadrotor_1d": 2, "quadrotor_2d": 6}
INPUT_DIM = {"cartpole": 1, "quadrotor_1d": 1, "quadrotor_2d": 2}
FORCE_DIM = {"cartpole": 2, "quadrotor_1d": 1, "quadrotor_2d": 3}

_MPC_KEYS = {
    "horizon", "sqp_iters", "step_damping", "warm_start", "slack_penalty", "state_backoff", "use_constraints",
    "qp_eps", "qp_max_iter",
}
CONTROLLER_KEYS = {
    "none": set(),
    "pid": {"gains"},
    "lqr": {"mode"},
    "ilqr": {"max_iter"},
    "lmpc": _MPC_KEYS,
    "nmpc": _MPC_KEYS,
    "gp_mpc": _MPC_KEYS | {"z_score", "control_hz", "train"},
}
FILTER_KEYS = {"none": set(), "cbf": {"gamma"}, "mpsc": {"horizon", "terminal_half_width", "state_margin"}}
SYSTEM_PARAMS = {"cartpole": {"m_c", "m_p", "l", "g"}, "quadrotor_1d": {"m", "g"}, "quadrotor_2d": {"m", "I_yy", "l_arm", "g"}}


@lru_cache(maxsize=1)
def load_schema() -> dict:
    text = resources.files("safectl.harness").joinpath("schema.json").read_text(encoding="utf-8")
    return json.loads(text)


@dataclass(frozen=True)
class ExperimentConfig:
    """Canonical configuration; plain containers only, so ``==`` is semantic equality."""

    name: str
    system: dict
    task: dict
    controller: dict
    filter: dict
    constraints: list
    disturbances: list
    randomization: dict
    seeds: list
    episodes: int
    rates: dict
    output: dict
    x0: list | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["x0"] is None:
            del d["x0"]
        return d

    @property
    def system_name(self) -> str:
        return self.system["name"]


def _resolve(schema, root):
    while "$ref" in schema:
        ref = schema["$ref"]
        node = root
        for part in ref.lstrip("#/").split("/"):
            node = node[part]
        extra = {k: v for k, v in schema.items() if k != "$ref"}
        schema = {**node, **extra}
    return schema


def _fill_defaults(value, schema, root):
    schema = _resolve(schema, root)
    if isinstance(value, dict) and schema.get("type") == "object":
        props = schema.get("properties", {})
        for key, sub in props.items():
            sub_r = _resolve(sub, root)
            if key not in value and "default" in sub_r:
                value[key] = copy.deepcopy(sub_r["default"])
        for key in list(value):
            if key in props:
                value[key] = _fill_defaults(value[key], props[key], root)
            elif isinstance(schema.get("additionalProperties"), dict):
                value[key] = _fill_defaults(value[key], schema["additionalProperties"], root)
    elif isinstance(value, list) and isinstance(schema.get("items"), dict):
        return [_fill_defaults(v, schema["items"], root) for v in value]
    return value


def _coerce(value, schema, root):
    """Numbers to float and integers to int, following the schema, so 1 and 1.0 compare equal."""
    schema = _resolve(schema, root)
    if "oneOf" in schema:
        for option in schema["oneOf"]:
            try:
                jsonschema.validate(value, {**_resolve(option, root), "definitions": root.get("definitions", {})})
            except jsonschema.ValidationError:
                continue
            return _coerce(value, option, root)
        return value
    kind = schema.get("type")
    if kind == "number" and not isinstance(value, bool):
        return float(value)
    if kind == "integer" and not isinstance(value, bool):
        return int(value)
    if isinstance(value, dict):
        props = schema.get("properties", {})
        extra = schema.get("additionalProperties")
        out = {}
        for key in sorted(value):
            sub = props.get(key, extra if isinstance(extra, dict) else {})
            out[key] = _coerce(value[key], sub, root)
        return out
    if isinstance(value, list) and isinstance(schema.get("items"), dict):
        return [_coerce(v, schema["items"], root) for v in value]
    return value


def _validate(instance, schema):
    validator = jsonschema.Draft7Validator(schema)
    errors = sorted(validator.iter_errors(instance), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        raise SchemaError(err.message, err.absolute_path)


def _check_semantics(d: dict) -> None:
    sysname = d["system"]["name"]
    n_x, n_u = STATE_DIM[sysname], INPUT_DIM[sysname]
    for key in d["system"].get("params", {}):
        if key not in SYSTEM_PARAMS[sysname]:
            raise SchemaError(f"parameter {key!r} does not apply to {sysname}", ("system", "params", key))
    ctrl = d["controller"]
    for key in ctrl:
        if key != "name" and key not in CONTROLLER_KEYS[ctrl["name"]]:
            raise SchemaError(f"key {key!r} does not apply to controller {ctrl['name']}", ("controller", key))
    if ctrl["name"] == "pid" and sysname == "cartpole":
        raise SchemaError("pid is defined for the quadrotors only", ("controller", "name"))
    filt = d["filter"]
    for key in filt:
        if key != "name" and key not in FILTER_KEYS[filt["name"]]:
            raise SchemaError(f"key {key!r} does not apply to filter {filt['name']}", ("filter", key))
    if d.get("x0") is not None and len(d["x0"]) != n_x:
        raise SchemaError(f"x0 needs {n_x} entries", ("x0",))
    task = d["task"]
    if "goal" in task and len(task["goal"]) != n_x:
        raise SchemaError(f"goal needs {n_x} entries", ("task", "goal"))
    for key, n in (("Q", n_x), ("R", n_u)):
        if key in task:
            w = task[key]
            ok = len(w) == n and all((not isinstance(r, list)) or len(r) == n for r in w)
            if not ok:
                raise SchemaError(f"{key} must be a length-{n} diagonal or {n}x{n} matrix", ("task", key))
    for i, c in enumerate(d["constraints"]):
        dim = n_x if c["target"] == "state" else n_u
        if any(s >= dim for s in c["selector"]):
            raise SchemaError(f"selector index out of range for {c['target']} of size {dim}", ("constraints", i))
        need = {"bound": (), "linear": ("A", "b"), "quadratic": ("P", "r")}[c["form"]]
        for key in need:
            if key not in c:
                raise SchemaError(f"{c['form']} constraint needs {key!r}", ("constraints", i))
        if c["form"] == "bound" and "lower" not in c and "upper" not in c:
            raise SchemaError("bound constraint needs lower or upper", ("constraints", i))
    for i, dist in enumerate(d["disturbances"]):
        dim = {"action": n_u, "observation": n_x, "dynamics": FORCE_DIM[sysname]}[dist["target"]]
        if any(ch >= dim for ch in dist.get("channels", ())):
            raise SchemaError("channel index out of range", ("disturbances", i))
    for idx in d["randomization"]["x0"]:
        if int(idx) >= n_x:
            raise SchemaError("state index out of range", ("randomization", "x0", idx))
    for group in ("params", "param_values"):
        for key in d["randomization"][group]:
            if key not in SYSTEM_PARAMS[sysname]:
                raise SchemaError(f"unknown parameter {key!r} for {sysname}", ("randomization", group, key))
    rates = d["rates"]
    if rates["physics_hz"] % rates["control_hz"]:
        raise SchemaError("physics_hz must be a multiple of control_hz", ("rates",))


def config_from_dict(raw) -> ExperimentConfig:
    """Validate, apply defaults and canonicalize a parsed document."""
    if not isinstance(raw, dict):
        raise SchemaError("configuration must be a mapping")
    schema = load_schema()
    _validate(raw, schema)
    d = _fill_defaults(copy.deepcopy(raw), schema, schema)
    d = _coerce(d, schema, schema)
    _validate(d, schema)
    _check_semantics(d)
    names = {f.name for f in fields(ExperimentConfig)}
    return ExperimentConfig(**{k: v for k, v in d.items() if k in names})


def loads_config(text: str) -> ExperimentConfig:
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ParseError(f"invalid YAML: {exc}") from exc
    return config_from_dict(raw)


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from exc
    return loads_config(text)


def dump_config(cfg: ExperimentConfig) -> str:
    return yaml.safe_dump(cfg.to_dict(), sort_keys=True, default_flow_style=None, width=100)


def parse_override(text: str):
    """``"a.b.c=value"`` to ``(["a", "b", "c"], parsed value)``; the value is read as YAML."""
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise SchemaError(f"override {text!r} must look like key.path=value")
    try:
        parsed = yaml.safe_load(value)
    except yaml.YAMLError as exc:
        raise ParseError(f"override {text!r}: {exc}") from exc
    return key.strip().split("."), parsed


def apply_overrides(cfg: ExperimentConfig, overrides) -> ExperimentConfig:
    d = cfg.to_dict()
    for item in overrides:
        path, value = parse_override(item) if isinstance(item, str) else item
        node = d
        for i, part in enumerate(path[:-1]):
            if isinstance(node, list):
                try:
                    node = node[int(part)]
                except (ValueError, IndexError) as exc:
                    raise SchemaError(f"no list element {part!r}", path[: i + 1]) from exc
                continue
            node = node.setdefault(part, {})
            if not isinstance(node, (dict, list)):
                raise SchemaError("cannot descend into a scalar", path[: i + 1])
        last = path[-1]
        if isinstance(node, list):
            try:
                node[int(last)] = value
            except (ValueError, IndexError) as exc:
                raise SchemaError(f"no list element {last!r}", path) from exc
        else:
            node[last] = value
    return config_from_dict(d)
