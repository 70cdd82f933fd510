"""Result files: per-episode trace CSV, aggregate JSON report and a config copy.

Trace CSV (format ``safectl_trace_v1``): the first header cell is the format
tag and its column holds the step index. Row ``k`` describes the state after
``k`` steps; input, reward and constraint columns hold the step that led to
it and are empty on row 0. Columns, in order::

    safectl_trace_v1, time,
    x.<state>...        true state
    obs.<i>...          observation handed to the controller
    ref.<state>...      reference state
    u_ctrl.<input>...   controller output
    u_filt.<input>...   input after the safety filter (equals u_ctrl without one)
    u_app.<input>...    input acting on the plant after noise and saturation
    w_act.<input>...    action disturbance draw
    w_dyn.<i>...        external force draw
    reward, c.<i>... (constraint values, <= 0 is satisfied), violation, filter_modified, done

Floats are written with ``repr`` (shortest round-trip form).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from pathlib import Path

from .. import __version__
from ..dynamics.models import INPUT_LABELS, STATE_LABELS, SystemId
from .config import ExperimentConfig, dump_config
from .metrics import aggregate

TRACE_FORMAT = "safectl_trace_v1"
REPORT_FORMAT = "safectl_report_v1"
RESULTS_ENV = "SAFECTL_RESULTS_DIR"


def trace_columns(trace) -> list:
    sid = SystemId(trace.system)
    xs, us = STATE_LABELS[sid], INPUT_LABELS[sid]
    cols = [TRACE_FORMAT, "time"]
    cols += [f"x.{s}" for s in xs]
    cols += [f"obs.{i}" for i in range(trace.obs.shape[1])]
    cols += [f"ref.{s}" for s in xs]
    for prefix in ("u_ctrl", "u_filt", "u_app", "w_act"):
        cols += [f"{prefix}.{u}" for u in us]
    cols += [f"w_dyn.{i}" for i in range(trace.forces.shape[1])]
    cols += ["reward"] + [f"c.{i}" for i in range(trace.constraint_values.shape[1])]
    cols += ["violation", "filter_modified", "done"]
    return cols


def _f(v) -> str:
    return repr(float(v))


def trace_rows(trace):
    dt = trace.dt
    n = trace.steps
    n_u = trace.u_ctrl.shape[1]
    n_f = trace.forces.shape[1]
    n_c = trace.constraint_values.shape[1]
    for k in range(n + 1):
        row = [str(k), _f(k * dt)]
        row += [_f(v) for v in trace.states[k]]
        row += [_f(v) for v in trace.obs[k]]
        row += [_f(v) for v in trace.refs[k]]
        if k == 0:
            row += [""] * (4 * n_u + n_f + 1 + n_c + 2)
            row.append("1" if n == 0 else "0")
        else:
            j = k - 1
            for arr in (trace.u_ctrl, trace.u_filtered, trace.u_applied, trace.action_noise):
                row += [_f(v) for v in arr[j]]
            row += [_f(v) for v in trace.forces[j]]
            row.append(_f(trace.rewards[j]))
            row += [_f(v) for v in trace.constraint_values[j]]
            row.append("1" if trace.violations[j] else "0")
            row.append("1" if trace.filter_modified[j] else "0")
            row.append("1" if k == n else "0")
        yield row


def trace_csv(trace) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(trace_columns(trace))
    w.writerows(trace_rows(trace))
    return buf.getvalue()


def trace_filename(trace) -> str:
    return f"trace_seed{trace.seed}_ep{trace.episode}.csv"


def _clean(obj):
    """JSON-safe copy: non-finite floats become null, numpy scalars become Python numbers."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if hasattr(obj, "item") and not isinstance(obj, (str, bytes)):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def build_report(cfg: ExperimentConfig | None, traces, reports, extra: dict | None = None) -> dict:
    episodes = []
    for tr, rep in zip(traces, reports):
        entry = {"seed": tr.seed, "episode": tr.episode, "csv": trace_filename(tr), **rep.to_dict()}
        entry.update({"terminated": tr.terminated, "failed": tr.failed, "error": tr.error})
        if tr.train_seconds is not None:
            entry["gp_training_seconds"] = tr.train_seconds
        episodes.append(entry)
    report = {
        "format": REPORT_FORMAT,
        "name": cfg.name if cfg else None,
        "system": cfg.system_name if cfg else None,
        "controller": cfg.controller["name"] if cfg else None,
        "filter": cfg.filter["name"] if cfg else None,
        "episodes": episodes,
        "aggregate": aggregate(reports),
        "metadata": {
            "created": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "safectl_version": __version__,
            "wall_time": [tr.wall_time for tr in traces],
        },
    }
    if extra:
        report.update(extra)
    return _clean(report)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8", newline="")
    os.replace(tmp, path)


def export_results(traces, reports, out_dir, cfg: ExperimentConfig | None = None) -> list:
    """Write traces, ``report.json`` and ``config.yaml``; returns the written paths.

    Existing trace files in ``out_dir/traces`` are removed first so a rerun
    leaves exactly the files of this run.
    """
    out = Path(out_dir)
    tdir = out / "traces"
    out.mkdir(parents=True, exist_ok=True)
    if tdir.exists():
        for old in tdir.glob("*.csv"):
            old.unlink()
    written = []
    for tr in traces:
        p = tdir / trace_filename(tr)
        _write(p, trace_csv(tr))
        written.append(p)
        gp = getattr(tr, "gp_data", None)
        if gp is not None:
            p = tdir / f"gp_training_seed{tr.seed}_ep{tr.episode}.csv"
            _write(p, gp_data_csv(*gp))
            written.append(p)
    p = out / "report.json"
    _write(p, json.dumps(build_report(cfg, traces, reports), indent=2, sort_keys=True) + "\n")
    written.append(p)
    if cfg is not None:
        p = out / "config.yaml"
        _write(p, dump_config(cfg))
        written.append(p)
    return written


def gp_data_csv(Z, Y) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"z.{i}" for i in range(Z.shape[1])] + [f"y.{i}" for i in range(Y.shape[1])])
    for z, y in zip(Z, Y):
        w.writerow([_f(v) for v in z] + [_f(v) for v in y])
    return buf.getvalue()


def results_root(cfg: ExperimentConfig, override=None) -> Path:
    """Output root: explicit argument, then ``$SAFECTL_RESULTS_DIR``, then the config's ``output.dir``."""
    if override:
        return Path(override)
    env = os.environ.get(RESULTS_ENV)
    if env:
        return Path(env)
    return Path(cfg.output["dir"])


def violation_fraction_from_csv(text: str) -> float:
    """Recompute the violation fraction from an exported trace."""
    rows = list(csv.DictReader(io.StringIO(text)))[1:]
    if not rows:
        return 0.0
    return sum(r["violation"] == "1" for r in rows) / len(rows)
