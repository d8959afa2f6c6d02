"""Command-line front end.

Every command reads one JSON config (``--config``) and writes its artifacts
to the configured output directory, each next to a ``.provenance.json``
sidecar.  ``ATLASIM_SEED`` and ``ATLASIM_OUTPUT_DIR`` override the config.

Exit codes: 0 success, 2 usage or config error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._rng import derive_rng
from .analysis import Ball, Predicate, RegionSpec, dyadic_times
from .exceptions import ConfigError, NumericalError
from .experiments import (
    atlas_transition_stats,
    compare_simulators,
    direct_transition_stats,
    self_compare,
)
from .learn import AtlasModel, AtlasParams, ChartLearningError, learn_atlas
from .simulate import AtlasState, lift, run, sample_qhat
from .systems import SYSTEMS, WELLS, SdeSystem, make_system

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3

DEFAULTS = {
    "system": {"key": "double-well", "params": {}},
    "atlas": {"delta": 0.1, "d": 1},
    "seed": 0,
    "output_dir": "atlasim-out",
    "threads": 1,
    "compare": {"n_ics": 10, "n_paths": 10_000, "horizon": 64.0, "t_min": 1.0,
                "delta_c": None},
    "transitions": {"n_runs": 12, "n_steps": 1_000_000, "direct_runs": 12,
                    "direct_horizon": 1000.0, "record_dt": None, "start": None},
    "regions": None,
}


# ---------------------------------------------------------------------------
# config


def load_config(path):
    """Read a JSON config, fill defaults and apply environment overrides."""
    if path is None:
        raw = {}
    else:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = json.loads(json.dumps(DEFAULTS))
    for key, val in raw.items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config section {key!r}")
        if isinstance(cfg[key], dict) and isinstance(val, dict):
            cfg[key].update(val)
        else:
            cfg[key] = val
    if "ATLASIM_SEED" in os.environ:
        try:
            cfg["seed"] = int(os.environ["ATLASIM_SEED"])
        except ValueError:
            raise ConfigError("ATLASIM_SEED must be an integer") from None
    if "ATLASIM_OUTPUT_DIR" in os.environ:
        cfg["output_dir"] = os.environ["ATLASIM_OUTPUT_DIR"]
    if cfg["system"].get("key") not in SYSTEMS:
        raise ConfigError(f"system.key must be one of {sorted(SYSTEMS)}")
    if not isinstance(cfg["seed"], int):
        raise ConfigError(f"seed must be an integer, got {cfg['seed']!r}")
    delta = cfg["atlas"].get("delta")
    if not isinstance(delta, (int, float)) or not delta > 0:
        raise ConfigError(f"atlas.delta must be > 0, got {delta!r}")
    return cfg


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def atlas_params(cfg):
    try:
        return AtlasParams(**cfg["atlas"])
    except TypeError as exc:
        raise ConfigError(f"bad atlas parameters: {exc}") from None
    except ConfigError as exc:
        raise ConfigError(f"atlas: {exc}") from None


def build_space(cfg):
    return make_system(cfg["system"]["key"], **cfg["system"].get("params", {}))


def default_regions(key, space):
    """Metastable regions used by ``transition-times`` when none are configured."""
    if key in ("double-well", "double-well-rough"):
        return RegionSpec.balls([[0.0], [1.0]], 0.25)
    if key in ("three-well", "three-well-rough"):
        return RegionSpec.balls(WELLS, 0.25)
    if key.startswith("image-"):
        emb = space.params["embedding"]
        return RegionSpec.balls(emb.embed(WELLS), 0.25, distance=emb.distance)
    if key == "string":
        sysm = space.params["system"]
        return RegionSpec.balls([sysm.f0, -sysm.f0], 0.25, distance=sysm.distance)
    if key == "lorenz96":
        radius = lambda v: np.linalg.norm(np.asarray(v)[:, :2], axis=1)  # noqa: E731
        return RegionSpec((Predicate(lambda v: radius(v) < 1.0),
                           Predicate(lambda v: radius(v) > 1.75)))
    raise ConfigError(f"no default regions for system {key!r}; set 'regions' in the config")


def regions_from_config(cfg, space):
    spec = cfg.get("regions")
    if spec is None:
        return default_regions(cfg["system"]["key"], space)
    try:
        centers = [np.asarray(r["center"], dtype=float) for r in spec]
        radii = {float(r["radius"]) for r in spec}
    except (KeyError, TypeError, ValueError):
        raise ConfigError("regions must be a list of {center, radius} objects") from None
    if len(radii) != 1:
        return RegionSpec(tuple(Ball(c, float(r["radius"])) for c, r in zip(centers, spec)),
                          space.distance)
    return RegionSpec.balls(centers, radii.pop(), distance=space.distance)


# ---------------------------------------------------------------------------
# artifacts


class Run:
    """Output directory plus the provenance shared by a command's artifacts."""

    def __init__(self, cfg, command, seed=None):
        self.cfg = cfg
        self.command = command
        self.seed = cfg["seed"] if seed is None else seed
        self.hash = config_hash(cfg)
        self.out = Path(cfg["output_dir"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.t_start = time.perf_counter()

    def path(self, name):
        return self.out / name

    def provenance(self, artifact, **extra):
        record = {
            "artifact": Path(artifact).name,
            "command": self.command,
            "config_hash": self.hash,
            "seed": self.seed,
            "wall_clock_s": time.perf_counter() - self.t_start,
            "version": __version__,
            **extra,
        }
        side = Path(str(artifact) + ".provenance.json")
        side.write_text(json.dumps(record, indent=1, sort_keys=True, default=str) + "\n")
        return side


def load_model(path):
    if path is None:
        raise ConfigError("--model is required")
    try:
        return AtlasModel.from_json(path)
    except FileNotFoundError:
        raise ConfigError(f"model file not found: {path}") from None


def _start(model, args):
    chart = 0 if args.chart is None else args.chart
    if not 0 <= chart < model.n_charts:
        raise ConfigError(f"chart must be in [0, {model.n_charts}), got {chart}")
    return AtlasState(np.zeros(model.d), chart)


# ---------------------------------------------------------------------------
# commands


def cmd_learn(args):
    cfg = load_config(args.config)
    params = atlas_params(cfg)
    threads = args.threads or cfg["threads"]
    space = build_space(cfg)
    r = Run(cfg, "learn")
    model = learn_atlas(space, params, seed=r.seed, n_jobs=threads)
    target = Path(args.out) if args.out else r.path("model.json")
    model.to_json(target)
    r.provenance(target, n_charts=model.n_charts, system=cfg["system"]["key"],
                 threads=threads)
    print(f"learned {model.n_charts} charts -> {target}")


def cmd_simulate(args):
    cfg = load_config(args.config)
    model = load_model(args.model)
    if args.n_steps < 0:
        raise ConfigError("--n-steps must be >= 0")
    seed = cfg["seed"] if args.seed is None else args.seed
    r = Run(cfg, "simulate", seed)
    traj = run(model, _start(model, args), args.n_steps, derive_rng(seed, "simulate"))
    target = Path(args.out) if args.out else r.path("trajectory.csv")
    traj.to_csv(target, ambient=lift(model, traj.charts) if args.lift else None)
    r.provenance(target, n_charts=model.n_charts, model=str(args.model),
                 n_steps=args.n_steps)
    print(f"{args.n_steps} steps -> {target}")


def cmd_sample_stationary(args):
    cfg = load_config(args.config)
    model = load_model(args.model)
    if args.n_samples < 1 or args.burn_in < 0:
        raise ConfigError("need --n-samples >= 1 and --burn-in >= 0")
    seed = cfg["seed"] if args.seed is None else args.seed
    r = Run(cfg, "sample-stationary", seed)
    s0 = _start(model, args)
    X0 = np.tile(s0.x, (args.n_samples, 1))
    I0 = np.full(args.n_samples, s0.i)
    X, I = sample_qhat(model, (X0, I0), args.burn_in, derive_rng(seed, "qhat"))
    target = Path(args.out) if args.out else r.path("stationary.csv")
    header = ["chart_index"] + [f"x_{a + 1}" for a in range(model.d)]
    with open(target, "w") as fh:
        fh.write(",".join(header) + "\n")
        for x, i in zip(X, I):
            fh.write(",".join([str(int(i))] + [repr(float(v)) for v in x]) + "\n")
    r.provenance(target, n_charts=model.n_charts, model=str(args.model),
                 burn_in_steps=args.burn_in, n_samples=args.n_samples)
    print(f"{args.n_samples} samples -> {target}")


def cmd_compare(args):
    cfg = load_config(args.config)
    model = load_model(args.model)
    space = build_space(cfg)
    c = cfg["compare"]
    times = c.get("times") or dyadic_times(c["t_min"], c["horizon"])
    r = Run(cfg, "compare")
    t0 = time.perf_counter()
    report = compare_simulators(model, space, times, n_ics=c["n_ics"], n_paths=c["n_paths"],
                                delta_c=c["delta_c"], seed=r.seed)
    ratio = model.dt / space.micro_dt
    report.meta.update(dt_ratio=ratio, atlas_dt=model.dt, micro_dt=space.micro_dt,
                       wall_clock_s=time.perf_counter() - t0)
    files = [r.path("compare.json"), r.path("compare.csv"), r.path("compare_hist.csv")]
    report.to_json(files[0])
    report.to_csv(files[1])
    report.histograms_to_csv(files[2])
    if args.noise_floor:
        floor = self_compare(space, model.net, times, n_ics=c["n_ics"], n_paths=c["n_paths"],
                             delta_c=c["delta_c"], seed=r.seed,
                             initial_charts=report.meta["initial_charts"])
        files.append(r.path("compare_self.json"))
        floor.to_json(files[-1])
        print("noise floor mean L1 per slice: " + " ".join(f"{v:.4f}" for v in floor.mean))
    for f in files:
        r.provenance(f, n_charts=model.n_charts, model=str(args.model), dt_ratio=ratio)
    print(f"dt ratio {ratio:g}; mean L1 per slice: "
          + " ".join(f"{v:.4f}" for v in report.mean))


def cmd_transition_times(args):
    cfg = load_config(args.config)
    model = load_model(args.model)
    space = build_space(cfg)
    regions = regions_from_config(cfg, space)
    tcfg = cfg["transitions"]
    r = Run(cfg, "transition-times")
    start = tcfg["start"] if tcfg["start"] is not None else 0
    if not 0 <= start < model.n_charts:
        raise ConfigError(f"transitions.start must be a chart index in [0, {model.n_charts})")
    summary = {"regions": len(regions.regions), "atlas_dt": model.dt}
    outputs = []
    t0 = time.perf_counter()
    atlas = atlas_transition_stats(model, start, regions, tcfg["n_runs"], tcfg["n_steps"],
                                   r.seed)
    summary["atlas_wall_clock_s"] = time.perf_counter() - t0
    atlas.to_csv(r.path("transitions_atlas.csv"))
    outputs.append(r.path("transitions_atlas.csv"))
    summary["atlas"] = atlas.table()
    if isinstance(space.params.get("system"), SdeSystem) and tcfg["direct_runs"]:
        t0 = time.perf_counter()
        direct = direct_transition_stats(space, model.net.points[start], regions,
                                         tcfg["direct_runs"], tcfg["direct_horizon"], r.seed,
                                         tcfg["record_dt"])
        summary["direct_wall_clock_s"] = time.perf_counter() - t0
        direct.to_csv(r.path("transitions_direct.csv"))
        outputs.append(r.path("transitions_direct.csv"))
        summary["direct"] = direct.table()
        summary["dt_ratio"] = model.dt / space.micro_dt
    target = r.path("transitions.json")
    target.write_text(json.dumps(summary, indent=1) + "\n")
    outputs.append(target)
    for f in outputs:
        r.provenance(f, n_charts=model.n_charts, model=str(args.model))
    for row in summary["atlas"]:
        print(f"atlas tau[{row['from']},{row['to']}] = {row['mean_time']:.4g} "
              f"({row['count']} samples)")


def cmd_list_systems(args):
    for key in SYSTEMS:
        print(key)


# ---------------------------------------------------------------------------
# entry point


def build_parser():
    p = argparse.ArgumentParser(prog="atlasim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, model=False, start=False, seed=False):
        sp = sub.add_parser(name)
        sp.set_defaults(fn=fn)
        sp.add_argument("--config", help="JSON run configuration")
        if model:
            sp.add_argument("--model", required=True, help="model JSON from 'learn'")
        if start:
            sp.add_argument("--chart", type=int, help="starting chart (origin of its coordinates)")
        if seed:
            sp.add_argument("--seed", type=int, help="overrides the config seed")
        return sp

    sp = add("learn", cmd_learn)
    sp.add_argument("--threads", type=int, help="worker threads for chart learning")
    sp.add_argument("--out", help="model path (default: <output_dir>/model.json)")

    sp = add("simulate", cmd_simulate, model=True, start=True, seed=True)
    sp.add_argument("--n-steps", type=int, required=True)
    sp.add_argument("--lift", action="store_true", help="append the lifted net point")
    sp.add_argument("--out")

    sp = add("sample-stationary", cmd_sample_stationary, model=True, start=True, seed=True)
    sp.add_argument("--n-samples", type=int, default=10_000)
    sp.add_argument("--burn-in", type=int, default=10_000, help="full steps before sampling")
    sp.add_argument("--out")

    sp = add("compare", cmd_compare, model=True)
    sp.add_argument("--noise-floor", action="store_true",
                    help="also compare the microscale simulator with itself")
    add("transition-times", cmd_transition_times, model=True)
    sub.add_parser("list-systems").set_defaults(fn=cmd_list_systems)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.fn(args)
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"atlasim: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ChartLearningError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"atlasim: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
