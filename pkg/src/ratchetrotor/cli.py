"""Command-line front end.

Subcommands: classical, quantum, analyze (power-law | gogolin | peak |
asymmetry | front), gogolin.  Runs are configured by a YAML file (or a
named built-in preset), write CSV data plus a manifest.json, and are fully
deterministic: a fixed seed gives byte-identical data files for any
--threads value, because work is partitioned by fixed-size batches and
reduced in index order.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import analysis, classical, quantum, runio
from .distribution import symmetric_grid
from .errors import ConfigError, NumericsError
from .model import SimParams, params_from_mapping

PRESETS = ("fig1", "fig2", "fig3")

_TOP_KEYS = {"params", "run", "classical", "quantum", "grid"}
_RUN_KEYS = {"n_kicks", "record_at"}
_CLASSICAL_KEYS = {"n_points", "portrait_bins"}
_QUANTUM_KEYS = {"n_samples", "start_horizon"}
_GRID_KEYS = {"p_max", "bin_width"}


def _check_keys(section: dict, allowed: set, where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown {where} key(s): {', '.join(sorted(unknown))}")


def load_config(source: str) -> dict:
    """Read a YAML config from a path or a named preset; validate keys."""
    path = Path(source)
    if not path.exists():
        if source in PRESETS:
            path = resources.files("ratchetrotor") / "presets" / f"{source}.yaml"
        else:
            raise ConfigError(f"config not found: {source} (not a file, not one of {PRESETS})")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{source}: invalid YAML: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{source}: config must be a mapping of sections")
    _check_keys(raw, _TOP_KEYS, "config section")
    if "params" not in raw or "run" not in raw:
        raise ConfigError(f"{source}: sections 'params' and 'run' are required")
    for name, allowed in (
        ("run", _RUN_KEYS),
        ("classical", _CLASSICAL_KEYS),
        ("quantum", _QUANTUM_KEYS),
        ("grid", _GRID_KEYS),
    ):
        if name in raw:
            if not isinstance(raw[name], dict):
                raise ConfigError(f"{source}: section '{name}' must be a mapping")
            _check_keys(raw[name], allowed, f"{name}")
    return raw


def _resolve(raw: dict, args) -> tuple[SimParams, dict]:
    """Apply CLI overrides and expand defaults into a flat run description."""
    params_map = dict(raw["params"])
    if getattr(args, "seed_override", None) is not None:
        params_map["seed"] = args.seed_override
    params = params_from_mapping(params_map)

    run = dict(raw["run"])
    if "n_kicks" not in run:
        raise ConfigError("run.n_kicks is required")
    n_kicks = int(run["n_kicks"])
    if n_kicks < 0:
        raise ConfigError(f"run.n_kicks must be >= 0, got {n_kicks}")
    record_at = run.get("record_at", [n_kicks])
    if getattr(args, "record", None):
        try:
            record_at = [int(tok) for tok in args.record.split(",")]
        except ValueError:
            raise ConfigError(f"--record must be a comma list of integers, got {args.record!r}")
    record_at = sorted(set(int(n) for n in record_at))
    if any(not (0 <= n <= n_kicks) for n in record_at):
        raise ConfigError(f"record times outside [0, {n_kicks}]: {record_at}")

    sigma = params.sigma_resolved
    grid_cfg = raw.get("grid", {})
    p_max = float(grid_cfg.get("p_max", 2 * math.pi * n_kicks / 3 + 10 * sigma + 16 * params.hbar_eff))
    bin_width = float(grid_cfg.get("bin_width", params.hbar_eff / 2))
    if p_max <= 0 or bin_width <= 0:
        raise ConfigError("grid.p_max and grid.bin_width must be positive")

    resolved = {
        "params": {
            "kick_strength": params.kick_strength,
            "hbar_eff": params.hbar_eff,
            "phases": list(params.phases),
            "sigma": sigma,
            "seed": params.seed,
        },
        "run": {"n_kicks": n_kicks, "record_at": record_at},
        "grid": {"p_max": p_max, "bin_width": bin_width},
    }
    return params, resolved


def _series(kicks, values) -> analysis.TimeSeries:
    return analysis.TimeSeries(kicks=np.asarray(kicks), values=np.asarray(values))


def cmd_classical(args) -> int:
    raw = load_config(args.config)
    if "classical" not in raw or "n_points" not in raw["classical"]:
        raise ConfigError("classical runs require a 'classical' section with n_points")
    params, resolved = _resolve(raw, args)
    n_points = int(raw["classical"]["n_points"])
    portrait_bins = int(raw["classical"].get("portrait_bins", 128))
    resolved["engine"] = "classical"
    resolved["classical"] = {"n_points": n_points, "portrait_bins": portrait_bins}
    digest = runio.config_digest(resolved)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = symmetric_grid(resolved["grid"]["p_max"], resolved["grid"]["bin_width"])
    t0 = time.monotonic()
    result = classical.run_classical(
        params,
        n_points=n_points,
        n_kicks=resolved["run"]["n_kicks"],
        record_at=resolved["run"]["record_at"],
        grid=grid,
        threads=args.threads,
    )
    wall = time.monotonic() - t0

    files = []
    for n in resolved["run"]["record_at"]:
        name = f"dist_n{n}.csv"
        runio.write_distribution_csv(out / name, result.distributions[n], digest)
        files.append(name)
    for name, values in (
        ("p_mean.csv", result.p_mean),
        ("p2.csv", result.p2),
        ("p2_right.csv", result.p2_right),
    ):
        runio.write_series_csv(out / name, _series(result.kicks, values), digest, name[:-4])
        files.append(name)
    portrait = classical.folded_phase_portrait(result.final, portrait_bins, portrait_bins)
    runio.write_portrait_csv(out / "portrait.csv", portrait, digest)
    files.append("portrait.csv")

    runio.write_manifest(out, {
        "digest": digest,
        "engine": "classical",
        "seed": params.seed,
        "params": resolved["params"],
        "run": resolved["run"],
        "classical": resolved["classical"],
        "grid": {**resolved["grid"], "points": int(grid.size)},
        "threads": args.threads,
        "reproducible_reduction": True,
        "wall_time_s": wall,
        "files": files,
    })
    print(f"classical run complete: {len(files)} data files in {out} (digest {digest[:12]})")
    return 0


def cmd_quantum(args) -> int:
    raw = load_config(args.config)
    if "quantum" not in raw or "n_samples" not in raw["quantum"]:
        raise ConfigError("quantum runs require a 'quantum' section with n_samples")
    params, resolved = _resolve(raw, args)
    n_samples = int(raw["quantum"]["n_samples"])
    start_horizon = int(raw["quantum"].get("start_horizon", quantum.START_HORIZON))
    resolved["engine"] = "quantum"
    resolved["quantum"] = {"n_samples": n_samples, "start_horizon": start_horizon}
    digest = runio.config_digest(resolved)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    grid = symmetric_grid(resolved["grid"]["p_max"], resolved["grid"]["bin_width"])
    t0 = time.monotonic()
    result = quantum.run_monte_carlo(
        params,
        n_samples=n_samples,
        n_kicks=resolved["run"]["n_kicks"],
        record_at=resolved["run"]["record_at"],
        grid=grid,
        threads=args.threads,
        start_horizon=start_horizon,
    )
    wall = time.monotonic() - t0

    files = []
    for n in resolved["run"]["record_at"]:
        name = f"dist_n{n}.csv"
        runio.write_distribution_csv(out / name, result.distributions[n], digest)
        files.append(name)
    for name, values in (
        ("p_mean.csv", result.p_mean),
        ("p2.csv", result.p2),
        ("p2_right.csv", result.p2_right),
    ):
        runio.write_series_csv(out / name, _series(result.kicks, values), digest, name[:-4])
        files.append(name)
    asym = [analysis.asymmetry(result.distributions[n]) for n in resolved["run"]["record_at"]]
    runio.write_series_csv(
        out / "asymmetry.csv",
        _series(resolved["run"]["record_at"], asym),
        digest,
        "asymmetry",
    )
    files.append("asymmetry.csv")

    runio.write_manifest(out, {
        "digest": digest,
        "engine": "quantum",
        "seed": params.seed,
        "params": resolved["params"],
        "run": resolved["run"],
        "quantum": resolved["quantum"],
        "grid": {
            **resolved["grid"],
            "points": int(grid.size),
            "initial_m": result.initial_m,
            "final_m": result.final_m,
            "growth_events": result.growth_events,
        },
        "norm_error": result.norm_error,
        "threads": args.threads,
        "reproducible_reduction": True,
        "wall_time_s": wall,
        "files": files,
    })
    print(
        f"quantum run complete: {len(files)} data files in {out} "
        f"(digest {digest[:12]}, lattice {result.initial_m}->{result.final_m})"
    )
    return 0


def _write_report(out_path: str, payload: dict) -> None:
    Path(out_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _fit_payload(kind: str, fit: analysis.FitResult, inputs: dict, extra: dict | None = None) -> dict:
    payload = {
        "analysis": kind,
        "estimate": fit.estimate,
        "std_error": fit.std_error,
        "window": list(fit.window),
        "residual_norm": fit.residual_norm,
        "inputs": inputs,
    }
    if extra:
        payload.update(extra)
    return payload


def cmd_analyze(args) -> int:
    kind = args.kind
    if kind == "power-law":
        series = runio.read_series_csv(args.series)
        fit = analysis.fit_power_law(series, args.n_min, args.n_max)
        payload = _fit_payload(
            kind, fit, {Path(args.series).name: runio.file_digest(args.series)}
        )
        line = f"power-law exponent = {fit.estimate:.6g} +- {fit.std_error:.2g}"
    elif kind == "gogolin":
        dist = runio.read_distribution_csv(args.dist)
        fit = analysis.fit_gogolin(dist, p_window=args.p_window, p_min=args.p_min)
        payload = _fit_payload(kind, fit, {Path(args.dist).name: runio.file_digest(args.dist)})
        line = f"localization length = {fit.estimate:.6g} +- {fit.std_error:.2g}"
    elif kind == "peak":
        dist = runio.read_distribution_csv(args.dist)
        peak = analysis.track_peak(dist, n_kicks=args.kicks, half_width=args.half_width)
        payload = {
            "analysis": kind,
            "location": peak.location,
            "population": peak.population,
            "half_width": peak.half_width,
            "inputs": {Path(args.dist).name: runio.file_digest(args.dist)},
        }
        line = f"peak at p = {peak.location:.6g} holding {100 * peak.population:.3g}% of the mass"
    elif kind == "asymmetry":
        dist = runio.read_distribution_csv(args.dist)
        value = analysis.asymmetry(dist)
        payload = {
            "analysis": kind,
            "value": value,
            "inputs": {Path(args.dist).name: runio.file_digest(args.dist)},
        }
        line = f"asymmetry = {value:.6g}"
    elif kind == "front":
        dists = [runio.read_distribution_csv(p) for p in args.dist]
        fit = analysis.front_exponent_check(dists)
        payload = _fit_payload(
            kind, fit, {Path(p).name: runio.file_digest(p) for p in args.dist}
        )
        line = f"front exponent = {fit.estimate:.6g} +- {fit.std_error:.2g}"
    else:  # pragma: no cover - argparse restricts choices
        raise ConfigError(f"unknown analysis kind {kind!r}")
    if args.out:
        _write_report(args.out, payload)
    print(line)
    return 0


def cmd_gogolin(args) -> int:
    if args.xi <= 0:
        raise ConfigError(f"--xi must be > 0, got {args.xi}")
    grid = symmetric_grid(args.p_max, args.bin_width)
    density = analysis.gogolin_density(grid, args.xi)
    digest = runio.config_digest({"gogolin": {"xi": args.xi, "p_max": args.p_max, "bin_width": args.bin_width}})
    lines = [f"# manifest: {digest}", f"# xi: {args.xi}", "p,density"]
    lines += [f"{format(p, '.17g')},{format(d, '.17g')}" for p, d in zip(grid, density)]
    Path(args.out).write_text("\n".join(lines) + "\n")
    print(f"tabulated localized profile (xi={args.xi}) to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ratchetrotor",
        description="Kicked-rotor ratchet simulator: classical and quantum engines with analysis",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_run_flags(p):
        p.add_argument("--config", required=True, help=f"YAML config path or preset {PRESETS}")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed-override", type=int, default=None)
        p.add_argument("--record", default=None, help="comma list of kick counts to snapshot")
        p.add_argument(
            "--reproducible-reduction",
            action="store_true",
            help="accepted for compatibility; reductions are always deterministic",
        )

    add_run_flags(sub.add_parser("classical", help="evolve a classical ensemble"))
    add_run_flags(sub.add_parser("quantum", help="Monte Carlo quantum propagation"))

    pa = sub.add_parser("analyze", help="fit and measure observables from run CSVs")
    suba = pa.add_subparsers(dest="kind", required=True)
    pl = suba.add_parser("power-law")
    pl.add_argument("--series", required=True)
    pl.add_argument("--n-min", type=float, default=5.0)
    pl.add_argument("--n-max", type=float, default=50.0)
    pl.add_argument("--out", default=None)
    gg = suba.add_parser("gogolin")
    gg.add_argument("--dist", required=True)
    gg.add_argument("--p-window", type=float, required=True)
    gg.add_argument("--p-min", type=float, default=5.0)
    gg.add_argument("--out", default=None)
    pk = suba.add_parser("peak")
    pk.add_argument("--dist", required=True)
    pk.add_argument("--kicks", type=int, default=None)
    pk.add_argument("--half-width", type=float, default=math.pi / 3)
    pk.add_argument("--out", default=None)
    asym = suba.add_parser("asymmetry")
    asym.add_argument("--dist", required=True)
    asym.add_argument("--out", default=None)
    fr = suba.add_parser("front")
    fr.add_argument("--dist", action="append", required=True, help="repeat per recorded time")
    fr.add_argument("--out", default=None)

    gog = sub.add_parser("gogolin", help="tabulate the localized momentum profile")
    gog.add_argument("--xi", type=float, required=True)
    gog.add_argument("--p-max", type=float, default=300.0)
    gog.add_argument("--bin-width", type=float, default=0.5)
    gog.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "classical": cmd_classical,
        "quantum": cmd_quantum,
        "analyze": cmd_analyze,
        "gogolin": cmd_gogolin,
    }
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
