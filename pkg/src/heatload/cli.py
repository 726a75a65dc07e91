"""Command-line interface: generate | analyze | train | forecast | evaluate | compare.

Every command writes into ``--out`` and refuses to replace existing files
unless ``--force`` is given. Settings come from flags, then from an optional
``--config`` file of ``key = value`` lines, then from built-in defaults; the
effective settings are saved as ``effective_config_<command>.json`` next
to the outputs, and ``manifest_<command>.json`` lists the files written.
Numeric results are also printed to stdout as JSON lines.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import analysis, datagen
from .ksvr import SvrModel
from .pipeline import (
    MODES,
    PipelineError,
    TuneConfig,
    WindowSpec,
    comparison_table,
    forecast_window,
    make_windows,
    markdown_table,
    mean_std,
    month_of,
    run_baselines,
    tune_and_train,
)
from .pso import PsoConfig
from .series import HOUR, RawSeries, SeriesError, differentiate_shift, format_timestamp, read_csv, resample, Unit

METHODS = ("pso_ksvr", "arima", "seasonal_naive")


class CliError(Exception):
    """Runtime failure reported with exit code 1."""


class UsageError(Exception):
    """Bad flag or config value, exit code 2."""


# -- option tables ----------------------------------------------------------

@dataclass(frozen=True)
class Opt:
    flag: str
    type: type
    default: object
    help: str
    choices: tuple | None = None

    @property
    def dest(self) -> str:
        return self.flag.lstrip("-").replace("-", "_")


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    low = str(text).strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


COMMON = [
    Opt("--seed", int, 0, "random seed"),
    Opt("--out", str, ".", "output directory"),
    Opt("--workers", int, 1, "parallel worker processes for per-window work"),
]

DATA = [
    Opt("--data", str, None, "directory with consumption.csv and temperature.csv"),
    Opt("--consumption", str, None, "accumulated consumption CSV (overrides --data)"),
    Opt("--temperature", str, None, "temperature CSV (overrides --data)"),
]

WINDOWING = [
    Opt("--window-days", int, 16, "days per window"),
    Opt("--split", str, "14:1:1", "train:validation:test days"),
    Opt("--windows", str, "all", "comma-separated window indices or 'all'"),
]

TUNING = [
    Opt("--particles", int, 20, "PSO swarm size"),
    Opt("--iterations", int, 50, "PSO iterations"),
    Opt("--svr-tol", float, 1e-3, "SMO stopping tolerance (standardized units)"),
    Opt("--tune-passes", int, 10000, "SMO update cap per fitness evaluation"),
    Opt("--final-passes", int, 0, "SMO update cap for the final refit (0: 10 m^2)"),
]

FORECASTING = [
    Opt("--mode", str, "recursive", "forecast mode", MODES),
    Opt("--tau", int, -1, "time-shift steps (-1: 0 for recursive, 1 for open_loop)"),
    Opt("--zero-policy", str, "dynamic_range_offset", "MAPE handling of non-positive truth",
        ("error", "dynamic_range_offset")),
]

COMMANDS = {
    "generate": [
        Opt("--preset", str, "default", "generator preset", tuple(sorted(datagen.PRESETS))),
        Opt("--days", int, None, "number of days"),
        Opt("--base-load", float, None, "mean load in kWh per hour"),
        Opt("--noise-stddev", float, None, "load noise in kWh per hour"),
        Opt("--jitter-stddev", float, None, "timestamp jitter in seconds"),
        Opt("--dropout-prob", float, None, "probability of dropping a reading"),
        Opt("--temp-coupling", float, None, "kWh per hour per degree below reference"),
    ],
    "analyze": DATA + [
        Opt("--window-days", int, 16, "days per window"),
        Opt("--window", int, 0, "window to analyze"),
        Opt("--max-lag", int, 48, "largest lag of the correlograms"),
        Opt("--period", int, 24, "seasonal period in steps"),
    ],
    "train": DATA + WINDOWING + TUNING + [
        Opt("--trace", _bool, False, "also write the per-iteration tuning trace"),
    ],
    "forecast": DATA + WINDOWING + FORECASTING + [
        Opt("--models", str, None, "directory holding model_w<i>.json files (default: --out)"),
    ],
    "evaluate": [
        Opt("--reports", str, None, "directory holding report_w<i>.json files (default: --out)"),
    ],
    "compare": DATA + WINDOWING + TUNING + FORECASTING + [
        Opt("--preset", str, None, "generate this preset in memory instead of reading --data",
            tuple(sorted(datagen.PRESETS))),
        Opt("--max-p", int, 3, "largest ARIMA AR order"),
        Opt("--max-q", int, 3, "largest ARIMA MA order"),
    ],
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="heatload", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name, opts in COMMANDS.items():
        p = sub.add_parser(name, help=f"{name} command")
        for opt in COMMON + opts:
            flags = [opt.flag] + (["-o"] if opt.flag == "--out" else [])
            kw = {"dest": opt.dest, "default": None, "help": f"{opt.help} (default: {opt.default})"}
            if opt.type is _bool:
                kw.update(nargs="?", const=True, type=_bool)
            else:
                kw.update(type=opt.type)
            if opt.choices:
                kw["choices"] = opt.choices
            p.add_argument(*flags, **kw)
        p.add_argument("--force", action="store_true", help="overwrite existing outputs")
        p.add_argument("--config", default=None, help="file of 'key = value' lines")
    return parser


def read_config(path) -> dict:
    """``key = value`` per line; '#' starts a comment; dashes in keys act as underscores."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def resolve(args: argparse.Namespace) -> dict:
    """Flags over config file over defaults."""
    opts = {o.dest: o for o in COMMON + COMMANDS[args.command]}
    fromfile = read_config(args.config) if args.config else {}
    unknown = sorted(set(fromfile) - set(opts))
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    cfg = {}
    for dest, opt in opts.items():
        value = getattr(args, dest)
        if value is None and dest in fromfile:
            try:
                value = opt.type(fromfile[dest])
            except ValueError:
                raise UsageError(f"bad value for {dest}: {fromfile[dest]!r}") from None
            if opt.choices and value not in opt.choices:
                raise UsageError(f"{dest} must be one of {opt.choices}")
        cfg[dest] = opt.default if value is None else value
    cfg["force"] = bool(args.force)
    return cfg


# -- output helpers -----------------------------------------------------------

def dumps(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True, allow_nan=False) + "\n"


def emit(record: dict) -> None:
    print(json.dumps(record, sort_keys=True, allow_nan=False), flush=True)


class Output:
    """Atomic writes into one directory plus a manifest of what was written."""

    def __init__(self, directory, force: bool):
        self.dir = Path(directory)
        self.force = force
        self.written: list[str] = []
        self.dir.mkdir(parents=True, exist_ok=True)

    def check(self, names) -> None:
        if self.force:
            return
        clash = sorted(n for n in names if (self.dir / n).exists())
        if clash:
            raise CliError(f"refusing to overwrite {', '.join(clash)} in {self.dir} (use --force)")

    def write(self, name: str, text: str) -> Path:
        self.check([name])
        target = self.dir / name
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="\n") as fh:
                fh.write(text)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        self.written.append(name)
        return target

    def write_json(self, name: str, obj) -> Path:
        return self.write(name, dumps(obj))

    def finish(self, command: str, complete: bool) -> None:
        manifest = {"command": command, "complete": complete, "files": sorted(self.written)}
        # rewritten on every run: it describes the latest one
        target = self.dir / f"manifest_{command}.json"
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=".manifest.", suffix=".tmp")
        with os.fdopen(fd, "w") as fh:
            fh.write(dumps(manifest))
        os.replace(tmp, target)


# -- data loading -------------------------------------------------------------

def _paths(cfg) -> tuple[Path, Path]:
    base = Path(cfg["data"]) if cfg["data"] else None
    cons = Path(cfg["consumption"]) if cfg["consumption"] else (base / "consumption.csv" if base else None)
    temp = Path(cfg["temperature"]) if cfg["temperature"] else (base / "temperature.csv" if base else None)
    if cons is None or temp is None:
        raise UsageError("give --data or both --consumption and --temperature")
    for p in (cons, temp):
        if not p.is_file():
            raise CliError(f"input file not found: {p}")
    return cons, temp


def align(raw_cons: RawSeries, raw_temp: RawSeries, step: int = HOUR):
    """Resample both raw series onto the common step-aligned grid."""
    lo = max(int(raw_cons.times[0]), int(raw_temp.times[0]))
    hi = min(int(raw_cons.times[-1]), int(raw_temp.times[-1]))
    first = -(-lo // step) * step
    last = (hi // step) * step
    if last < first + step:
        raise CliError("consumption and temperature do not overlap by two steps")
    n = (last - first) // step + 1
    return resample(raw_cons, first, step, n), resample(raw_temp, first, step, n)


def load_data(cfg):
    cons, temp = _paths(cfg)
    return align(read_csv(cons, Unit.KWH_ACCUMULATED), read_csv(temp, Unit.DEG_C))


def window_spec(cfg) -> WindowSpec:
    try:
        split = tuple(int(s) for s in str(cfg["split"]).split(":"))
    except ValueError:
        raise UsageError(f"bad --split {cfg['split']!r}") from None
    try:
        return WindowSpec(window_days=cfg["window_days"], split=split)
    except PipelineError as exc:
        raise UsageError(str(exc)) from None


def select_windows(cfg, windows):
    if not windows:
        raise CliError("data too short for a single window")
    if cfg["windows"] == "all":
        return windows
    try:
        idx = [int(s) for s in str(cfg["windows"]).split(",")]
    except ValueError:
        raise UsageError(f"bad --windows {cfg['windows']!r}") from None
    bad = [i for i in idx if not 0 <= i < len(windows)]
    if bad:
        raise UsageError(f"window indices {bad} out of range 0..{len(windows) - 1}")
    return [windows[i] for i in idx]


def tune_config(cfg, window_index: int) -> TuneConfig:
    if cfg["particles"] < 1 or cfg["iterations"] < 1 or cfg["tune_passes"] < 1 or cfg["svr_tol"] <= 0:
        raise UsageError("particles, iterations, tune-passes and svr-tol must be positive")
    pso = PsoConfig(n_particles=cfg["particles"], n_iterations=cfg["iterations"],
                    rng_seed=cfg["seed"] + window_index)
    return TuneConfig(pso=pso, svr_tol=cfg["svr_tol"], tune_passes=cfg["tune_passes"],
                      final_passes=cfg["final_passes"] or None)


def run_pool(fn, jobs, workers: int):
    """Ordered map, in worker processes when ``workers > 1``."""
    if workers < 1:
        raise UsageError("--workers must be >= 1")
    if workers == 1 or len(jobs) < 2:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _tau(cfg):
    return None if cfg["tau"] < 0 else cfg["tau"]


# -- commands -----------------------------------------------------------------

def cmd_generate(cfg, out: Output) -> None:
    overrides = {"rng_seed": cfg["seed"]}
    for key in ("days", "base_load", "noise_stddev", "jitter_stddev", "dropout_prob", "temp_coupling"):
        if cfg[key] is not None:
            overrides[key] = cfg[key]
    try:
        config = datagen.preset(cfg["preset"], **overrides)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    names = ["consumption.csv", "temperature.csv", "true_load.csv", "config.json"]
    out.check(names)
    gen = datagen.generate(config)
    # write via the generator's CSV layout, then move each file atomically
    with tempfile.TemporaryDirectory(dir=out.dir) as tmp:
        datagen.write_dataset(gen, config, tmp)
        for name in names:
            out.write(name, (Path(tmp) / name).read_text())
    emit({"command": "generate", "preset": cfg["preset"], "days": config.days,
          "raw_consumption_points": len(gen.raw_consumption),
          "raw_temperature_points": len(gen.raw_temperature)})


def cmd_analyze(cfg, out: Output) -> None:
    if cfg["max_lag"] < 1:
        raise UsageError("--max-lag must be >= 1")
    if cfg["period"] < 2:
        raise UsageError("--period must be >= 2")
    cons, temp = load_data(cfg)
    spec = WindowSpec(window_days=cfg["window_days"], split=(cfg["window_days"] - 2, 1, 1))
    windows = make_windows(cons, temp, spec)
    if not 0 <= cfg["window"] < len(windows):
        raise UsageError(f"--window must be in 0..{len(windows) - 1}")
    w = windows[cfg["window"]]
    names = ["correlograms.json", "correlograms.dat", "decomposition.dat", "rolling.json"]
    out.check(names)
    load = differentiate_shift(w.accumulated, 0)
    temperature = w.temperature.slice(1, len(w.temperature))
    lag = cfg["max_lag"]
    try:
        series = {"accumulated": w.accumulated.slice(1, len(w.accumulated)), "load": load,
                  "temperature": temperature}
        result = {name: {"acf": analysis.acf(s, lag).as_dict(), "parcor": analysis.parcor(s, lag).as_dict()}
                  for name, s in series.items()}
        result["cross_correlation"] = {
            "load_vs_temperature": analysis.cross_correlation(load, temperature, lag).as_dict(),
            "accumulated_vs_temperature": analysis.cross_correlation(series["accumulated"], temperature, lag).as_dict(),
        }
        dec = analysis.decompose(load, cfg["period"])
    except (analysis.AnalysisError, SeriesError) as exc:
        raise CliError(str(exc)) from None
    result["window"] = w.index
    result["start"] = format_timestamp(w.accumulated.start)
    out.write_json("correlograms.json", result)

    cols = [("acf_" + n, result[n]["acf"]["coefficients"]) for n in series]
    cols += [("parcor_" + n, result[n]["parcor"]["coefficients"]) for n in series]
    cols += [("xcorr_" + k, v["coefficients"]) for k, v in result["cross_correlation"].items()]
    lines = ["# lag " + " ".join(c for c, _ in cols)]
    for k in range(lag + 1):
        lines.append(f"{k} " + " ".join(repr(v[k]) for _, v in cols))
    out.write("correlograms.dat", "\n".join(lines) + "\n")

    lines = ["# timestamp load trend seasonal residual"]
    for t, x, a, b, c in zip(load.times, load.values, dec.trend.values, dec.seasonal.values, dec.residual.values):
        lines.append(f"{format_timestamp(t)} {float(x)!r} {float(a)!r} {float(b)!r} {float(c)!r}")
    out.write("decomposition.dat", "\n".join(lines) + "\n")
    out.write_json("rolling.json", analysis.rolling_stats(load, cfg["period"]))

    parcor = result["load"]["parcor"]["coefficients"]
    emit({"command": "analyze", "window": w.index, "band": result["load"]["parcor"]["band"],
          "parcor_load_lag1": parcor[1],
          "parcor_accumulated_lag1": result["accumulated"]["parcor"]["coefficients"][1],
          "xcorr_load_temperature_min_lag": int(np.argmin(result["cross_correlation"]["load_vs_temperature"]["coefficients"]))})


def _train_one(window, tcfg):
    model, result = tune_and_train(window.train, window.val, tcfg)
    return model, result


def cmd_train(cfg, out: Output) -> None:
    cons, temp = load_data(cfg)
    windows = select_windows(cfg, make_windows(cons, temp, window_spec(cfg)))
    names = [f"model_w{w.index}.json" for w in windows]
    if cfg["trace"]:
        names += [f"trace_w{w.index}.json" for w in windows]
    out.check(names)
    jobs = [(w, tune_config(cfg, w.index)) for w in windows]
    for w, (model, result) in zip(windows, run_pool(_train_one, jobs, cfg["workers"])):
        out.write_json(f"model_w{w.index}.json", model.to_dict())
        if cfg["trace"]:
            out.write_json(f"trace_w{w.index}.json", {
                "window": w.index, "history": result.history, "trace": result.trace,
                "n_evaluations": result.n_evaluations})
        emit({"command": "train", "window": w.index, "best_fitness": result.best_fitness,
              "hyper": model.hyper.as_dict(), "converged": model.converged, "n_iter": model.n_iter})


def cmd_forecast(cfg, out: Output) -> None:
    cons, temp = load_data(cfg)
    windows = select_windows(cfg, make_windows(cons, temp, window_spec(cfg)))
    models = Path(cfg["models"]) if cfg["models"] else out.dir
    loaded = []
    for w in windows:
        path = models / f"model_w{w.index}.json"
        if not path.is_file():
            raise CliError(f"model file not found: {path}")
        loaded.append(SvrModel.load(path))
    out.check([f"{p}_w{w.index}.{e}" for w in windows for p, e in (("report", "json"), ("forecast", "dat"))])
    for w, model in zip(windows, loaded):
        try:
            rep = forecast_window(model, w, cfg["mode"], _tau(cfg), cfg["zero_policy"])
        except PipelineError as exc:
            raise CliError(str(exc)) from None
        out.write_json(f"report_w{w.index}.json", rep.as_dict())
        out.write(f"forecast_w{w.index}.dat", rep.plot_data())
        emit({"command": "forecast", "window": w.index, "mode": rep.mode, "tau": rep.tau,
              "rmse": rep.rmse, "mape_percent": rep.mape_percent, "mape_offset_used": rep.mape_offset_used})


def cmd_evaluate(cfg, out: Output) -> None:
    src = Path(cfg["reports"]) if cfg["reports"] else out.dir
    paths = sorted(src.glob("report_w*.json"), key=lambda p: int(p.stem.split("_w")[1]))
    if not paths:
        raise CliError(f"no report_w*.json files in {src}")
    reports = [json.loads(p.read_text()) for p in paths]
    summary = {
        "n_windows": len(reports),
        "windows": [{"window": r["window"], "rmse": r["rmse"], "mape_percent": r["mape_percent"]} for r in reports],
        "rmse": mean_std([r["rmse"] for r in reports]),
        "mape_percent": mean_std([r["mape_percent"] for r in reports]),
    }
    out.write_json("evaluation.json", summary)
    emit({"command": "evaluate", "n_windows": len(reports), "rmse": summary["rmse"],
          "mape_percent": summary["mape_percent"]})


def _compare_one(window, tcfg, mode, tau, zero_policy, max_p, max_q):
    model, result = tune_and_train(window.train, window.val, tcfg)
    rep = forecast_window(model, window, mode, tau, zero_policy)
    rows = [{"method": "pso_ksvr", "rmse": rep.rmse, "mape_percent": rep.mape_percent,
             "detail": {"hyper": model.hyper.as_dict(), "converged": model.converged,
                        "best_fitness": result.best_fitness}}]
    for b in run_baselines(window, max_p, max_q, zero_policy):
        rows.append({"method": b.method, "rmse": b.rmse, "mape_percent": b.mape_percent, "detail": b.detail})
    month = month_of(window.test_start)
    for r in rows:
        r.update(window=window.index, month=month)
    return rows


def cmd_compare(cfg, out: Output) -> None:
    if cfg["preset"]:
        config = datagen.preset(cfg["preset"], rng_seed=cfg["seed"])
        gen = datagen.generate(config)
        cons, temp = align(gen.raw_consumption, gen.raw_temperature)
    else:
        cons, temp = load_data(cfg)
    windows = select_windows(cfg, make_windows(cons, temp, window_spec(cfg)))
    out.check(["comparison.json", "comparison.md"])
    jobs = [(w, tune_config(cfg, w.index), cfg["mode"], _tau(cfg), cfg["zero_policy"], cfg["max_p"], cfg["max_q"])
            for w in windows]
    rows = [r for chunk in run_pool(_compare_one, jobs, cfg["workers"]) for r in chunk]
    table = comparison_table(rows, METHODS)
    overall = {m: {"mape_percent": mean_std([r["mape_percent"] for r in rows if r["method"] == m]),
                   "rmse": mean_std([r["rmse"] for r in rows if r["method"] == m])} for m in METHODS}
    monthly_mean = {m: mean_std([row[m]["mape_percent"]["mean"] for row in table]) for m in METHODS}
    wins = {m: sum(row["winner"] == m for row in table) for m in METHODS}
    head_to_head = sum(row["pso_ksvr"]["mape_percent"]["mean"] < row["arima"]["mape_percent"]["mean"] for row in table)
    doc = {"methods": list(METHODS), "months": table, "windows": rows, "overall": overall,
           "monthly_mean_mape": monthly_mean, "wins": wins,
           "pso_ksvr_beats_arima_months": head_to_head, "n_months": len(table)}
    out.write_json("comparison.json", doc)
    out.write("comparison.md", markdown_table(table, METHODS))
    for row in table:
        emit({"command": "compare", "month": row["month"], "winner": row["winner"],
              **{f"{m}_mape_percent": row[m]["mape_percent"]["mean"] for m in METHODS}})
    emit({"command": "compare", "monthly_mean_mape": {m: v["mean"] for m, v in monthly_mean.items()},
          "pso_ksvr_beats_arima_months": head_to_head, "n_months": len(table)})


HANDLERS = {
    "generate": cmd_generate,
    "analyze": cmd_analyze,
    "train": cmd_train,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "compare": cmd_compare,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve(args)
        if args.command == "generate" and cfg["days"] is not None and cfg["days"] < 1:
            raise UsageError("--days must be >= 1")
    except UsageError as exc:
        parser.error(str(exc))
    out = Output(cfg["out"], cfg["force"])
    try:
        out.write_json(f"effective_config_{args.command}.json", {"command": args.command, **cfg})
        HANDLERS[args.command](cfg, out)
    except UsageError as exc:
        out.finish(args.command, False)
        parser.error(str(exc))
    except (CliError, SeriesError, PipelineError, OSError, ValueError) as exc:
        out.finish(args.command, False)
        print(f"heatload {args.command}: error: {exc}", file=sys.stderr)
        return 1
    out.finish(args.command, True)
    return 0


if __name__ == "__main__":
    sys.exit(main())
