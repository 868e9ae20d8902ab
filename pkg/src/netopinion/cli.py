"""Command line front end: config ingestion, subcommand dispatch, file output.

Subcommands
-----------
simulate     run one coupled network/opinion experiment, emit trajectory
             CSV/JSON plus requested graph snapshots.
degree-dist  validate the degree-distribution machinery: Monte Carlo
             ensemble histograms, the integrated distribution at matched
             times, both closed-form stationary shapes, and a summary of
             total-variation distances and the log-log slope.
sweep        rerun the simulate experiment across degree thresholds with
             common random numbers, emit the threshold table and per-run
             control traces.

Exit codes: 0 success, 2 configuration problem, 3 simulation failure,
4 output I/O failure.  Every emitted file is listed in manifest.json,
which is written before and finalized after the data files.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import time
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .control import ControlConfig
from .degree_master import (DegreeDistribution, integrate_master,
                            loglog_slope, power_law_raw, restrict,
                            stable_step, stationary_poisson,
                            stationary_power_law, total_variation)
from .graph import UNIFORM_DEGREE, UNIFORM_RANDOM, RewireParams
from .opinion import KernelParams
from .sim import (DEFAULT_SEED, SimConfig, SimulationError,
                  ensemble_degree_marginals, run_simulation, sweep_c_star,
                  trajectory_to_dict, write_trajectory_csv)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIMULATION = 3
EXIT_IO = 4

_SYMBOLS = {
    "network.n": "N",
    "network.gamma": "γ",
    "network.alpha": "α",
    "network.d_rate": "D",
    "opinion.lambda": "λ",
    "opinion.beta": "β",
    "opinion.delta": "Δ",
    "control.target": "w_d",
    "control.nu": "ν",
    "control.nu_p": "ν_p",
    "control.kappa": "κ",
    "control.c_star": "c*",
    "control.horizon": "p",
    "time.t0": "t_0",
    "time.tf": "t_f",
    "time.dt": "Δt",
}


class ConfigError(Exception):
    """Configuration file missing, unparsable, or invalid."""


# ---------------------------------------------------------------------------
# config parsing and canonical serialization


def parse_config_text(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc


def load_config(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"))


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        if math.isnan(value):
            return "nan"
        text = format(value, ".17g")
        if not any(ch in text for ch in ".eE"):
            text += ".0"
        return text
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise ConfigError(f"cannot serialize config value of type {type(value)}")


def serialize_config(config: dict) -> str:
    """Canonical text form: sorted sections and keys, 17-digit floats."""
    lines = []
    top = {k: v for k, v in config.items() if not isinstance(v, dict)}
    for key in sorted(top):
        lines.append(f"{key} = {_toml_scalar(top[key])}")
    for section in sorted(k for k, v in config.items() if isinstance(v, dict)):
        if lines:
            lines.append("")
        lines.append(f"[{section}]")
        for key in sorted(config[section]):
            lines.append(f"{key} = {_toml_scalar(config[section][key])}")
    return "\n".join(lines) + "\n"


def config_hash(config: dict) -> str:
    return hashlib.sha256(serialize_config(config).encode("utf-8")).hexdigest()


def _flatten(config: dict, prefix: str = "") -> dict:
    flat = {}
    for key, value in config.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(_flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def _get(config: dict, section: str, key: str, kinds, default=...,
         positive=False):
    table = config.get(section, {})
    if key not in table:
        if default is ...:
            raise ConfigError(f"missing required key {section}.{key}")
        return default
    value = table[key]
    if isinstance(value, bool) and bool not in (
            kinds if isinstance(kinds, tuple) else (kinds,)):
        raise ConfigError(f"{section}.{key} must not be a boolean")
    if not isinstance(value, kinds):
        raise ConfigError(
            f"{section}.{key} has type {type(value).__name__}, "
            f"expected {kinds}")
    if positive and not value > 0:
        raise ConfigError(f"{section}.{key} must be positive, got {value}")
    return value


def _number(config, section, key, default=..., positive=False) -> float:
    return float(_get(config, section, key, (int, float), default, positive))


def build_sim_config(config: dict, seed_override=None) -> SimConfig:
    """Translate a parsed config file into a SimConfig, naming bad fields."""
    n = _get(config, "network", "n", int, positive=True)
    gamma = _number(config, "network", "gamma", positive=True)
    alpha = _number(config, "network", "alpha", positive=True)
    d_rate = _number(config, "network", "d_rate", positive=True)
    init_graph = _get(config, "network", "init", str, UNIFORM_RANDOM)
    if init_graph not in (UNIFORM_RANDOM, UNIFORM_DEGREE):
        raise ConfigError(f"network.init must be {UNIFORM_RANDOM!r} or "
                          f"{UNIFORM_DEGREE!r}, got {init_graph!r}")

    kernel = KernelParams(
        lam=_number(config, "opinion", "lambda"),
        beta=_number(config, "opinion", "beta"),
        delta=_number(config, "opinion", "delta"))
    scheme = _get(config, "opinion", "scheme", str, "euler")
    init_opinion = _get(config, "opinion", "init", (str, list), "uniform")

    t0 = _number(config, "time", "t0")
    tf = _number(config, "time", "tf")
    dt = _number(config, "time", "dt", positive=True)
    if tf <= t0:
        raise ConfigError(f"time.tf must exceed time.t0 (tf={tf}, t0={t0})")
    snapshots = _get(config, "time", "snapshots", list, [])

    control = None
    if "control" in config and _get(config, "control", "enabled", bool, True):
        nu_p = config.get("control", {}).get("nu_p")
        control = ControlConfig(
            target=_number(config, "control", "target"),
            nu=_number(config, "control", "nu"),
            kappa=_number(config, "control", "kappa", positive=True),
            c_star=_get(config, "control", "c_star", int),
            dt=dt,
            horizon=_get(config, "control", "horizon", int, 1),
            nu_p=float(nu_p) if nu_p is not None else None)

    seed = seed_override if seed_override is not None else _get(
        config, "run", "seed", int, DEFAULT_SEED)

    try:
        return SimConfig(
            n=n, gamma=gamma, alpha=alpha, d_rate=d_rate,
            t0=t0, tf=tf, dt=dt, kernel=kernel, control=control,
            scheme=scheme,
            init_opinion=init_opinion if isinstance(init_opinion, str)
            else np.asarray(init_opinion, dtype=float),
            init_graph=init_graph, seed=int(seed),
            snapshot_times=tuple(float(t) for t in snapshots),
            reference_opinion=_number(config, "opinion", "reference", 0.0))
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------
# manifest and file helpers


class _Manifest:
    """Two-phase manifest: declared before data lands, finalized after."""

    def __init__(self, out_dir: Path, command: str, config: dict, seed: int):
        self.path = out_dir / "manifest.json"
        self.started = time.perf_counter()
        flat = _flatten(config)
        self.body = {
            "command": command,
            "config_hash": config_hash(config),
            "seed": seed,
            "parameters": {
                name: {"symbol": _SYMBOLS.get(name, ""), "value": value}
                for name, value in sorted(flat.items())},
            "outputs": [],
            "status": "running",
            "duration_seconds": None,
        }

    def declare(self, *names: str) -> None:
        for name in names:
            if name not in self.body["outputs"]:
                self.body["outputs"].append(name)
        self._write()

    def finalize(self) -> None:
        self.body["status"] = "complete"
        self.body["duration_seconds"] = time.perf_counter() - self.started
        self._write()

    def _write(self) -> None:
        text = json.dumps(self.body, ensure_ascii=False, indent=2,
                          sort_keys=True)
        self.path.write_text(text + "\n", encoding="utf-8", newline="\n")


def _write_text(path: Path, lines) -> None:
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=2,
                               sort_keys=True) + "\n", encoding="utf-8",
                    newline="\n")


def _fmt(x) -> str:
    return repr(float(x))


def _prepare_out(out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(config_path, out_dir, seed=None) -> int:
    config = load_config(config_path)
    sim_cfg = build_sim_config(config, seed_override=seed)
    out = _prepare_out(out_dir)
    manifest = _Manifest(out, "simulate", config, sim_cfg.seed)
    snapshot_names = [f"snapshot_{i:03d}.json"
                      for i in range(len(sim_cfg.snapshot_times))]
    manifest.declare("trajectory.csv", "trajectory.json", *snapshot_names)

    record = run_simulation(sim_cfg)
    write_trajectory_csv(record, out / "trajectory.csv")
    _write_json(out / "trajectory.json", trajectory_to_dict(record))
    for name, snap in zip(snapshot_names, record.snapshots):
        _write_json(out / name, snap)
    manifest.finalize()
    return EXIT_OK


def _degree_dist_settings(config: dict):
    n = _get(config, "network", "n", int, positive=True)
    gamma = _number(config, "network", "gamma", positive=True)
    alpha = _number(config, "network", "alpha", positive=True)
    d_rate = _number(config, "network", "d_rate", positive=True)
    init_graph = _get(config, "network", "init", str, UNIFORM_RANDOM)
    e_float = n * gamma / 2.0
    n_edges = int(round(e_float))
    if abs(e_float - n_edges) > 1e-9 or n_edges < 1:
        raise ConfigError(f"network.n * network.gamma / 2 = {e_float} "
                          "must be a positive integer")
    graphs = _get(config, "ensemble", "graphs", int, positive=True)
    t_end = _number(config, "ensemble", "t_end", positive=True)
    snapshots = sorted(float(t) for t in
                       _get(config, "ensemble", "snapshots", list, []))
    if any(t <= 0 or t > t_end for t in snapshots):
        raise ConfigError("ensemble.snapshots must lie in (0, t_end]")
    n_samples = _get(config, "ensemble", "stationary_samples", int, 40)
    spacing = _number(config, "ensemble", "sample_spacing",
                      n_edges / d_rate, positive=True)
    master_dt = _number(config, "master", "dt", stable_step(d_rate, n_edges),
                        positive=True)
    slope_win = _get(config, "analysis", "slope_window", list, [2, 40])
    shape_win = _get(config, "analysis", "shape_window", list, [1, 50])
    return (n, gamma, alpha, d_rate, init_graph, n_edges, graphs, t_end,
            snapshots, n_samples, spacing, master_dt,
            (int(slope_win[0]), int(slope_win[1])),
            (int(shape_win[0]), int(shape_win[1])))


def cmd_degree_dist(config_path, out_dir, seed=None) -> int:
    config = load_config(config_path)
    (n, gamma, alpha, d_rate, init_graph, n_edges, graphs, t_end, snapshots,
     n_samples, spacing, master_dt, slope_win, shape_win) = \
        _degree_dist_settings(config)
    run_seed = seed if seed is not None else _get(
        config, "run", "seed", int, DEFAULT_SEED)

    out = _prepare_out(out_dir)
    manifest = _Manifest(out, "degree-dist", config, run_seed)
    manifest.declare("mc_histogram.csv", "master_solution.csv",
                     "power_law_shape.csv", "poisson_shape.csv",
                     "summary.csv")

    stationary_times = [t_end + k * spacing for k in range(n_samples)]
    all_times = [0.0] + sorted(set(snapshots) | set(stationary_times))
    params = RewireParams(alpha, d_rate)
    marginals = ensemble_degree_marginals(
        n, gamma, init_graph, params, all_times, graphs, run_seed)
    by_time = dict(zip(all_times, marginals))

    mc_stationary = None
    if n_samples:
        stack = np.stack([by_time[t].probs for t in stationary_times])
        mc_stationary = DegreeDistribution(stack.mean(axis=0))

    # integrate from the ensemble's exact initial histogram
    master_at = {}
    current = by_time[0.0]
    previous = 0.0
    for t_snap in snapshots:
        current = integrate_master(current, d_rate, n_edges, n, alpha,
                                   t_snap - previous, master_dt)
        master_at[t_snap] = current
        previous = t_snap

    power = stationary_power_law(alpha, gamma, n_edges)
    poisson = stationary_poisson(gamma, n_edges)

    mc_lines = ["series,time,c,p"]
    for t_snap in snapshots:
        for c, p in enumerate(by_time[t_snap].probs):
            mc_lines.append(f"snapshot,{_fmt(t_snap)},{c},{_fmt(p)}")
    if mc_stationary is not None:
        for c, p in enumerate(mc_stationary.probs):
            mc_lines.append(f"stationary,{_fmt(t_end)},{c},{_fmt(p)}")
    _write_text(out / "mc_histogram.csv", mc_lines)

    master_lines = ["series,time,c,p"]
    for t_snap in snapshots:
        for c, p in enumerate(master_at[t_snap].probs):
            master_lines.append(f"snapshot,{_fmt(t_snap)},{c},{_fmt(p)}")
    _write_text(out / "master_solution.csv", master_lines)

    power_lines = ["c,raw,normalized"]
    for c in range(1, n_edges + 1):
        power_lines.append(
            f"{c},{_fmt(power_law_raw(alpha, gamma, c))},{_fmt(power.probs[c])}")
    _write_text(out / "power_law_shape.csv", power_lines)

    poisson_lines = ["c,p"]
    for c, p in enumerate(poisson.probs):
        poisson_lines.append(f"{c},{_fmt(p)}")
    _write_text(out / "poisson_shape.csv", poisson_lines)

    summary = ["metric,value"]
    for t_snap in snapshots:
        tv = total_variation(by_time[t_snap], master_at[t_snap])
        summary.append(f"tv_mc_master@t={_fmt(t_snap)},{_fmt(tv)}")
    if mc_stationary is not None:
        lo, hi = shape_win
        tv_power = total_variation(restrict(mc_stationary, lo, hi),
                                   restrict(power, lo, hi))
        summary.append(f"tv_mc_power_law[{lo}:{hi}],{_fmt(tv_power)}")
        summary.append(
            f"tv_mc_poisson,{_fmt(total_variation(mc_stationary, poisson))}")
        try:
            slope = loglog_slope(mc_stationary, slope_win[0], slope_win[1])
            summary.append(
                f"loglog_slope[{slope_win[0]}:{slope_win[1]}],{_fmt(slope)}")
        except ValueError:
            summary.append(f"loglog_slope[{slope_win[0]}:{slope_win[1]}],nan")
    _write_text(out / "summary.csv", summary)
    manifest.finalize()
    return EXIT_OK


def cmd_sweep(config_path, out_dir, c_star_list=None, seed=None) -> int:
    config = load_config(config_path)
    sim_cfg = build_sim_config(config, seed_override=seed)
    if sim_cfg.control is None:
        raise ConfigError("sweep requires an enabled [control] section")
    if c_star_list is None:
        c_star_list = _get(config, "sweep", "c_star_values", list)
    values = [int(c) for c in c_star_list]
    if not values:
        raise ConfigError("sweep needs at least one c_star value")

    out = _prepare_out(out_dir)
    manifest = _Manifest(out, "sweep", config, sim_cfg.seed)
    trace_names = [f"control_trace_c{c}.csv" for c in values]
    manifest.declare("sweep.csv", *trace_names)

    rows = sweep_c_star(sim_cfg, values)
    table = ["c_star,final_V,final_controlled_fraction"]
    for row in rows:
        table.append(f"{row.c_star},{_fmt(row.final_consensus)},"
                     f"{_fmt(row.final_controlled_fraction)}")
    _write_text(out / "sweep.csv", table)
    for name, row in zip(trace_names, rows):
        lines = ["t,u"]
        for t, u in zip(row.record.times, row.record.control):
            lines.append(f"{_fmt(t)},{_fmt(u)}")
        _write_text(out / name, lines)
    manifest.finalize()
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _parse_c_star(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigError(f"--c-star must be a comma-separated integer "
                          f"list, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netopinion",
        description="Opinion dynamics on a rewiring preferential-attachment "
                    "network with degree-selective control")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (("simulate", "run one coupled experiment"),
                           ("degree-dist", "degree-distribution validation"),
                           ("sweep", "threshold sweep with shared randomness")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="TOML config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="override the config seed")
        if name == "sweep":
            p.add_argument("--c-star", default=None,
                           help="comma-separated degree thresholds")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return cmd_simulate(args.config, args.out, seed=args.seed)
        if args.command == "degree-dist":
            return cmd_degree_dist(args.config, args.out, seed=args.seed)
        c_stars = _parse_c_star(args.c_star) if args.c_star else None
        return cmd_sweep(args.config, args.out, c_star_list=c_stars,
                         seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}")
        return EXIT_CONFIG
    except (SimulationError, ValueError, RuntimeError) as exc:
        print(f"simulation error: {exc}")
        return EXIT_SIMULATION
    except OSError as exc:
        print(f"i/o error: {exc}")
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
