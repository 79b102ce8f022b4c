"""Command-line entry point: ``pdcbo-tune run|sweep|validate-config|gen-weather``.

Exit codes: 0 success, 1 runtime or I/O failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema

from .building import ComfortProfile, RoomModel
from .domain import ControllerParams
from .errors import ConfigError, PdcboError
from .gp import SeKernelHyper
from .harness import (
    ALGORITHMS,
    FORMULATIONS,
    ExperimentConfig,
    GpSettings,
    budget_rescale_factor,
    run_experiment,
    summarize,
)
from .weather import synth_weather, write_weather_csv

log = logging.getLogger("pdcbo_tune")

CSV_COLUMNS = (
    "day", "ambient_c", "irradiation_wm2", "init_temp_c", "kp", "ki", "day_setpoint_c",
    "heat_start_min", "energy_kwh", "discomfort_kh", "lambda", "threshold",
    "avg_energy_kwh", "avg_discomfort_kh",
)
JOBS_ENV = "PDCBO_TUNE_JOBS"

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_PAIR = {"type": "array", "items": _NUM, "minItems": 2, "maxItems": 2}
_GP = {
    "type": "object",
    "properties": {
        "signal_variance": _POS,
        "lengthscales": {"type": "array", "items": _POS, "minItems": 7, "maxItems": 7},
        "noise_variance": {"type": "number", "minimum": 0},
        "prior_mean": _NUM,
    },
    "required": ["signal_variance", "lengthscales"],
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "type": "object",
    "properties": {
        "algorithm": {"enum": list(ALGORITHMS)},
        "formulation": {"enum": list(FORMULATIONS)},
        "n_days": {"type": "integer", "minimum": 1},
        "threshold_schedule": {"type": "array", "minItems": 1, "items": _PAIR},
        "seed": {"type": "integer"},
        "weather_seed": {"type": "integer"},
        "weather_path": {"type": "string"},
        "noise_std": {"type": "array", "items": {"type": "number", "minimum": 0}, "minItems": 2, "maxItems": 2},
        "eta": _POS,
        "epsilon": {"type": "number", "minimum": 0},
        "beta_sqrt": _POS,
        "grid_levels": {"type": "integer", "minimum": 1},
        "kp_bounds": _PAIR,
        "ki_bounds": _PAIR,
        "fit_after": {"type": "integer", "minimum": 5},
        "initial_temp": _NUM,
        "budget_rescale": {"oneOf": [_POS, {"const": "auto"}]},
        "room": {
            "type": "object",
            "properties": {k: _POS for k in ("thermal_capacitance", "envelope_conductance", "solar_gain_coeff",
                                             "max_heat_power", "timestep", "integral_clamp")}
            | {"diurnal_ambient_amplitude": {"type": "number", "minimum": 0},
               "diurnal_solar": {"type": "boolean"}},
            "additionalProperties": False,
        },
        "comfort": {
            "type": "object",
            "properties": {k: _NUM for k in ("night_lo", "night_hi", "day_lo", "day_hi", "day_begin", "day_end")},
            "additionalProperties": False,
        },
        "energy_gp": _GP,
        "discomfort_gp": _GP,
        "fixed_params": {
            "type": "object",
            "properties": {k: _NUM for k in ("kp", "ki", "day_setpoint", "heat_start")},
            "required": ["kp", "ki", "day_setpoint", "heat_start"],
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}


class UsageError(Exception):
    pass


def load_config_dict(path) -> dict:
    """Read and schema-check a JSON config. OSError propagates for I/O failures."""
    text = Path(path).read_text(encoding="utf-8")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    try:
        jsonschema.validate(data, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {where}: {exc.message}") from None
    return data


def _gp_settings(d: dict) -> GpSettings:
    return GpSettings(SeKernelHyper(float(d["signal_variance"]), tuple(d["lengthscales"])),
                      d.get("noise_variance"), d.get("prior_mean"))


def config_from_dict(data: dict) -> ExperimentConfig:
    kw = {k: v for k, v in data.items() if k not in ("room", "comfort", "energy_gp", "discomfort_gp",
                                                     "fixed_params", "budget_rescale")}
    for key in ("kp_bounds", "ki_bounds", "noise_std"):
        if key in kw:
            kw[key] = tuple(kw[key])
    try:
        if "room" in data:
            kw["room"] = RoomModel(**data["room"])
        if "comfort" in data:
            kw["comfort"] = ComfortProfile(**data["comfort"])
        for key in ("energy_gp", "discomfort_gp"):
            if key in data:
                kw[key] = _gp_settings(data[key])
        if "fixed_params" in data:
            kw["fixed_params"] = ControllerParams(**data["fixed_params"]).validate()
        rescale = data.get("budget_rescale", 1.0)
        if rescale != "auto":
            kw["budget_rescale"] = float(rescale)
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _fmt(v) -> str:
    return repr(float(v)) if not isinstance(v, int) else str(v)


def write_records_csv(records, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in records:
            z, p = r.context, r.params
            w.writerow([r.day] + [_fmt(v) for v in (
                z.ambient_temp, z.irradiation, z.init_temp, p.kp, p.ki, p.day_setpoint, p.heat_start,
                r.energy, r.discomfort, r.lam, r.active_threshold, r.running_avg_energy,
                r.running_avg_discomfort)])


def run_one(config: ExperimentConfig, out_dir, figures: bool = False, title: str | None = None) -> dict:
    """Run one experiment and write its outputs into ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = run_experiment(config)
    write_records_csv(records, out_dir / "records.csv")
    summary = summarize(records, config.formulation)
    summary.update(algorithm=config.algorithm, seed=config.seed,
                   threshold_schedule=[list(s) for s in config.threshold_schedule],
                   budget_rescale_factor=config.budget_rescale)
    with (out_dir / "summary.json").open("w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if figures:
        from .plotting import plot_run
        plot_run(records, out_dir / "running_averages.png", config.formulation, title)
    return summary


def _sweep_cell(args):
    config, out_dir, figures, title = args
    return run_one(config, out_dir, figures, title)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdcbo-tune", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def common(p):
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--formulation", choices=FORMULATIONS)
        p.add_argument("--days", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--weather", help="weather CSV (day,ambient_c,irradiation_wm2)")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        p.add_argument("--figures", action="store_true", help="also render PNG figures")

    run = sub.add_parser("run", help="run one experiment")
    common(run)
    run.add_argument("--algo", choices=ALGORITHMS)
    run.add_argument("--threshold", type=float, help="constant threshold for all days")

    sweep = sub.add_parser("sweep", help="run algorithm x threshold grid")
    common(sweep)
    sweep.add_argument("--algos", default="pdcbo,safeopt,cei", help="comma-separated algorithms")
    sweep.add_argument("--thresholds", default="5,10,15", help="comma-separated thresholds")
    sweep.add_argument("--jobs", type=int, default=int(os.environ.get(JOBS_ENV, "1")),
                       help=f"parallel cells (default: ${JOBS_ENV} or 1)")

    val = sub.add_parser("validate-config", help="schema-check a config file")
    val.add_argument("config")

    gen = sub.add_parser("gen-weather", help="write a synthetic weather CSV")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--days", type=int, default=300)
    gen.add_argument("--out", required=True, help="output CSV path")
    return parser


def _config_from_args(args, has_threshold: bool) -> dict:
    data = load_config_dict(args.config) if args.config else {}
    if has_threshold and "threshold_schedule" in data:
        raise UsageError("--threshold conflicts with threshold_schedule in the config file")
    overrides = {"formulation": args.formulation, "n_days": args.days, "seed": args.seed,
                 "weather_path": args.weather}
    if getattr(args, "algo", None):
        overrides["algorithm"] = args.algo
    data.update({k: v for k, v in overrides.items() if v is not None})
    return data


def _resolve_rescale(data: dict, budgets) -> dict:
    """Replace ``budget_rescale: "auto"`` with the computed factor."""
    if data.get("budget_rescale") != "auto":
        return data
    probe = config_from_dict({**data, "budget_rescale": 1.0})
    factor = 1.0
    if probe.formulation == "energy_constrained":
        factor = budget_rescale_factor(probe, budgets)
        log.info("energy budgets rescaled by %.6g", factor)
    return {**data, "budget_rescale": factor}


def _cmd_run(args) -> int:
    data = _config_from_args(args, args.threshold is not None)
    if args.threshold is not None:
        data["threshold_schedule"] = [[0, args.threshold]]
    budgets = [t for _, t in data.get("threshold_schedule", [[0, 10.0]])]
    config = config_from_dict(_resolve_rescale(data, budgets))
    summary = run_one(config, args.out, args.figures, f"{config.algorithm}")
    final = summary["final"]
    print(f"{config.algorithm}: avg energy {final['avg_energy_kwh']:.3f} kWh, "
          f"avg discomfort {final['avg_discomfort_kh']:.3f} K h, "
          f"violation {final['violation_pct']:.1f}% -> {args.out}")
    return 0


def _parse_list(text: str, cast, name: str):
    try:
        items = [cast(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"--{name}: cannot parse {text!r}") from None
    if not items:
        raise UsageError(f"--{name}: empty list")
    return items


def _cmd_sweep(args) -> int:
    algos = _parse_list(args.algos, str.strip, "algos")
    bad = [a for a in algos if a not in ALGORITHMS]
    if bad:
        raise UsageError(f"--algos: unknown {', '.join(bad)}; choose from {', '.join(ALGORITHMS)}")
    thresholds = _parse_list(args.thresholds, float, "thresholds")
    if args.jobs < 1:
        raise UsageError("--jobs must be >= 1")
    data = _config_from_args(args, True)
    data = _resolve_rescale(data, thresholds)
    out = Path(args.out)
    cells = []
    for algo in algos:
        for thr in thresholds:
            cfg = config_from_dict({**data, "algorithm": algo, "threshold_schedule": [[0, thr]]})
            cells.append((cfg, out / f"{algo}_thr{thr:g}", args.figures, f"{algo}, threshold {thr:g}"))
    if args.jobs == 1:
        summaries = [_sweep_cell(c) for c in cells]
    else:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            summaries = list(pool.map(_sweep_cell, cells))
    for (cfg, path, _, _), s in zip(cells, summaries):
        f = s["final"]
        print(f"{path.name}: avg energy {f['avg_energy_kwh']:.3f} kWh, "
              f"avg discomfort {f['avg_discomfort_kh']:.3f} K h, violation {f['violation_pct']:.1f}%")
    if args.figures:
        from .plotting import plot_sweep
        plot_sweep([(c[0].algorithm, c[0].threshold_schedule[0][1], s) for c, s in zip(cells, summaries)],
                   out / "sweep.png", cells[0][0].formulation)
    return 0


def _cmd_validate(args) -> int:
    config_from_dict(load_config_dict(args.config))
    print(f"{args.config}: ok")
    return 0


def _cmd_gen_weather(args) -> int:
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_weather_csv(synth_weather(args.seed, args.days), out)
    print(f"wrote {args.days} days to {out}")
    return 0


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "validate-config": _cmd_validate,
            "gen-weather": _cmd_gen_weather}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return 2
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"pdcbo-tune: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        where = exc.filename or ""
        print(f"pdcbo-tune: I/O error: {where}: {exc.strerror or exc}", file=sys.stderr)
        return 1
    except PdcboError as exc:
        print(f"pdcbo-tune: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
