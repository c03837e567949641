"""Command-line driver: ``mslab <command> --config run.json [--seed N] [--workers N] [--out DIR]``.

Every command writes ``results.csv`` and ``summary.json`` into the output
directory and renders ``figure.png`` unless ``--no-render`` is given;
``--emit-plot`` adds a standalone ``plot.py`` that redraws the figure from
the CSV.  Exit codes: 0 success, 2 configuration or usage error, 3 numerical
failure, 4 assumption-check failure.
"""

from __future__ import annotations

import csv
import functools
import json
import platform
import sys
import time
from importlib import metadata
from pathlib import Path

import click
import numpy as np

from . import plotting
from .config import ConfigError, load_config
from .errors import NumericalError, StateError, UsageError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_ASSUMPTION = 0, 2, 3, 4


class AssumptionFailure(Exception):
    def __init__(self, report):
        super().__init__("mollifier family fails the structural assumptions")
        self.report = report


def _versions():
    import scipy

    try:
        own = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        own = "unknown"
    return {"mslab": own, "python": platform.python_version(), "numpy": np.__version__, "scipy": scipy.__version__}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_csv(path, columns, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


# -- command pipelines: each returns (columns, rows, results) -----------------------


def run_avr(cfg, workers):
    from .asymptotics import check_basepoint_independence, estimate_avr

    space = cfg.space()
    opts = cfg.options
    N = opts.get("N")
    radii = opts.get("radii")
    bps = opts.get("basepoints", [])
    x0 = bps[0] if bps else None
    est = estimate_avr(space, x0, N, radii)
    results = est.to_dict()
    if len(bps) == 2:
        chk = check_basepoint_independence(space, bps[0], bps[1], N, radii, "avr", opts.get("rtol"))
        results["basepoint_check"] = chk.to_dict()
    rows = [{"radius": r, "ratio": q} for r, q in zip(est.radii, est.ratios)]
    return ["radius", "ratio"], rows, results


def run_entropy(cfg, workers):
    from .asymptotics import check_basepoint_independence, estimate_entropy

    space = cfg.space()
    opts = cfg.options
    radii = opts.get("radii")
    bps = opts.get("basepoints", [])
    est = estimate_entropy(space, bps[0] if bps else None, radii)
    results = est.to_dict()
    if len(bps) == 2:
        chk = check_basepoint_independence(space, bps[0], bps[1], None, radii, "entropy", opts.get("rtol"))
        results["basepoint_check"] = chk.to_dict()
    rows = [{"radius": r, "quotient": q} for r, q in zip(est.radii, est.quotients)]
    return ["radius", "quotient"], rows, results


def _check_family(cfg, family, space=None):
    from .mollifiers import check_assumptions

    opts = cfg.options
    kwargs = {}
    if "deltas" in opts:
        kwargs["deltas"] = tuple(opts["deltas"])
    return check_assumptions(family, opts.get("r_grid"), opts.get("index_pairs"), space, **kwargs)


def run_check_mollifier(cfg, workers):
    space = cfg.space()
    family = cfg.family(space)
    report = _check_family(cfg, family, space)
    rows = []
    for row in report.tail_table:
        for a, v in zip(row["params"], row["values"]):
            rows.append({"delta": row["delta"], "parameter": a, "value": v})
    results = report.to_dict()
    if not report.overall:
        raise AssumptionFailure(results)
    return ["delta", "parameter", "value"], rows, results


def _require_family(cfg, family, space):
    if cfg.options.get("check_family", True):
        report = _check_family(cfg, family, space)
        if not report.overall:
            raise AssumptionFailure(report.to_dict())


def run_seminorm(cfg, workers):
    from .quadrature import seminorm

    space = cfg.space()
    family = cfg.family(space)
    u = cfg.test_function(space)
    param = cfg.options.get("parameter", float(family.schedule[0]))
    est = seminorm(space, u, family.with_param(param), cfg.plan(), p=family.p, workers=workers)
    results = {"parameter": param, **est.to_dict()}
    cols = ["shell_lo", "shell_hi", "contribution", "stderr", "samples"]
    return cols, est.breakdown, results


def _study(cfg, workers):
    from .asymptotics import limit_study

    space = cfg.space()
    family = cfg.family(space)
    _require_family(cfg, family, space)
    u = cfg.test_function(space)
    sched = cfg.schedule()
    study = limit_study(space, u, family, cfg.plan(), sched, workers=workers, tau=cfg.options.get("tau", 0.1))
    return space, study


def run_limit_study(cfg, workers):
    _, study = _study(cfg, workers)
    return ["parameter", "estimate", "stderr", "samples"], study.rows(), study.to_dict()


def run_sharpness(cfg, workers):
    from .asymptotics import sharpness_check

    desc = cfg.options.get("sharpness")
    if desc is None:
        raise ConfigError("sharpness needs options.sharpness {kind, N}")
    space, study = _study(cfg, workers)
    rep = sharpness_check(desc["kind"], space, study, desc["N"], study.p, desc.get("tolerance"))
    results = {**study.to_dict(), "sharpness": rep.to_dict()}
    return ["parameter", "estimate", "stderr", "samples"], study.rows(), results


def run_decompose(cfg, workers):
    from .asymptotics import decomposition_diagnostic

    space = cfg.space()
    family = cfg.family(space)
    _require_family(cfg, family, space)
    u = cfg.test_function(space)
    diag = decomposition_diagnostic(
        space, u, family, cfg.plan(), cfg.schedule(), cfg.options.get("R_values", (4.0, 16.0, 64.0)), workers=workers
    )
    rows = [r.to_dict() for r in diag.rows]
    cols = ["R", "parameter", "I", "I_stderr", "II", "II_stderr", "III", "III_stderr", "total", "total_stderr"]
    results = {"L": diag.L, "lp_norm": diag.lp_norm, **diag.verdicts}
    return cols, rows, results


PIPELINES = {
    "avr": run_avr,
    "entropy": run_entropy,
    "check-mollifier": run_check_mollifier,
    "seminorm": run_seminorm,
    "limit-study": run_limit_study,
    "decompose": run_decompose,
    "sharpness": run_sharpness,
}


def execute(command, config_path, seed=None, workers=None, out=None, overrides=(), emit_plot=False, render=True):
    """Run one pipeline and write its files; returns ``(exit_code, summary)``."""
    t0 = time.perf_counter()
    overrides = list(overrides)
    if seed is not None:
        overrides.append(f"seed={int(seed)}")
    summary = {"command": command, "versions": _versions()}
    outdir = None
    try:
        cfg = load_config(config_path, overrides)
        summary["config"] = cfg.echo()
        outdir = Path(out or cfg.data.get("output") or "mslab-out")
        outdir.mkdir(parents=True, exist_ok=True)
        columns, rows, results = PIPELINES[command](cfg, workers)
        code = EXIT_OK
    except AssumptionFailure as exc:
        columns, rows, results, code = None, [], exc.report, EXIT_ASSUMPTION
        summary["error"] = str(exc)
    except (ConfigError, UsageError, StateError) as exc:
        columns, rows, results, code = None, [], {}, EXIT_CONFIG
        summary["error"] = str(exc)
    except NumericalError as exc:
        columns, rows, results, code = None, [], {}, EXIT_NUMERIC
        summary["error"] = str(exc)
        summary["diagnostics"] = _jsonable(exc.payload)
    summary["results"] = _jsonable(results)
    summary["exit_code"] = code
    summary["wall_time_s"] = time.perf_counter() - t0
    if outdir is None:
        return code, summary
    if columns is not None:
        write_csv(outdir / "results.csv", columns, rows)
        if render:
            plotting.render(command, outdir / "results.csv", summary, outdir / "figure.png")
        if emit_plot:
            (outdir / "plot.py").write_text(plotting.plot_script(command), encoding="utf-8")
    (outdir / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return code, summary


def _common(fn):
    @click.option("--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Experiment JSON.")
    @click.option("--seed", type=int, default=None, help="Override the config seed.")
    @click.option("--workers", type=int, default=None, help="Worker threads (default: $MSLAB_WORKERS or 1).")
    @click.option("--out", type=click.Path(file_okay=False), default=None, help="Output directory.")
    @click.option("--set", "overrides", multiple=True, help="Config override key.path=value (JSON value).")
    @click.option("--emit-plot", is_flag=True, help="Also write plot.py that redraws the figure.")
    @click.option("--render/--no-render", default=True, help="Render figure.png (default on).")
    @functools.wraps(fn)
    def wrapper(**kw):
        return fn(**kw)

    return wrapper


@click.group()
def main():
    """Seminorm limits on metric measure spaces."""


HELP = {
    "avr": "Asymptotic volume ratio of the space.",
    "entropy": "Volume entropy of the space.",
    "check-mollifier": "Check the structural assumptions on a mollifier family.",
    "seminorm": "Nonlocal seminorm of u for one kernel parameter.",
    "limit-study": "Seminorms along the schedule and their extrapolated limit.",
    "decompose": "Near, mixed and far-field split of the seminorm.",
    "sharpness": "Compare a limit study with its rigidity bound.",
}


def _make(name):
    @main.command(name, help=HELP[name])
    @_common
    def cmd(config_path, seed, workers, out, overrides, emit_plot, render):
        code, summary = execute(name, config_path, seed, workers, out, overrides, emit_plot, render)
        if code != EXIT_OK:
            click.echo(f"error ({code}): {summary.get('error', '')}", err=True)
        else:
            res = summary["results"]
            keys = [k for k in ("value", "extrapolated", "predicted", "relative_error", "overall", "II_ratio", "partition_identity") if k in res]
            click.echo(" ".join(f"{k}={res[k]}" for k in keys) or "done")
        sys.exit(code)

    return cmd


for _name in PIPELINES:
    _make(_name)


if __name__ == "__main__":
    main()
