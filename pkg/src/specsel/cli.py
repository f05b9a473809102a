"""Command-line interface: simulate, spectrum, select, and study.

Every command reads a JSON config (``--config``), validates it strictly
(unknown keys are errors), and writes its outputs atomically under
``--out``.  A master seed is mandatory — either in the config or via
``--seed`` — so every published run is reproducible byte for byte.

Exit codes: 0 success, 2 config error, 3 runtime/numerical error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .classify import FeatureConfig
from .graphs import EdgeListError, format_edgelist, read_edgelist
from .harness import StudyConfig, emit_outputs, resolve_threads, run_study
from .models import sample, spec_from_json
from .pipeline import report_to_json, select_model
from .rng import child_seed, make_rng
from .spectra import spectrum, write_spectrum_csv


class ConfigError(ValueError):
    pass


def _load_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from None


def _check_keys(obj: dict, allowed: set[str], required: set[str],
                context: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown {context} key(s): {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"missing {context} key(s): {sorted(missing)}")


def _require_seed(config: dict, override: int | None) -> int:
    if override is not None:
        return override
    if "seed" not in config:
        raise ConfigError("a master seed is required: set 'seed' in the "
                          "config or pass --seed")
    seed = config["seed"]
    if not isinstance(seed, int) or seed < 0:
        raise ConfigError("'seed' must be a non-negative integer")
    return seed


def _features_from(config: dict) -> FeatureConfig:
    if "features" not in config:
        return FeatureConfig()
    try:
        return FeatureConfig.from_json(config["features"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _atomic_write(path: str, text: str) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------

def cmd_simulate(config: dict, out_dir: str, seed_override: int | None) -> int:
    _check_keys(config, {"model", "count", "seed", "prefix"},
                {"model", "count"}, "simulate config")
    seed = _require_seed(config, seed_override)
    count = config["count"]
    if not isinstance(count, int) or count < 1:
        raise ConfigError("'count' must be a positive integer")
    prefix = config.get("prefix", "sim")
    try:
        spec = spec_from_json(config["model"])
    except ValueError as exc:
        raise ConfigError(f"bad model spec: {exc}") from None

    os.makedirs(out_dir, exist_ok=True)
    manifest = {"seed": seed, "count": count, "model": config["model"],
                "files": []}
    for k in range(count):
        kseed = child_seed(seed, k)
        g = sample(spec, make_rng(kseed))
        name = f"{prefix}_{k:04d}.txt"
        _atomic_write(os.path.join(out_dir, name), format_edgelist(g))
        manifest["files"].append({"file": name, "seed": kseed})
    _atomic_write(os.path.join(out_dir, "manifest.json"),
                  json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {count} edge lists and manifest.json to {out_dir}")
    return 0


def cmd_spectrum(config: dict, out_dir: str) -> int:
    _check_keys(config, {"inputs", "labels", "output", "seed"}, {"inputs"},
                "spectrum config")
    inputs = config["inputs"]
    if not isinstance(inputs, list) or not inputs:
        raise ConfigError("'inputs' must be a non-empty list of edge-list paths")
    labels = config.get("labels")
    if labels is not None and len(labels) != len(inputs):
        raise ConfigError("'labels' must match 'inputs' in length")
    rows = []
    for idx, path in enumerate(inputs):
        g = read_edgelist(path)
        label = labels[idx] if labels else os.path.splitext(os.path.basename(path))[0]
        rows.append((str(label), idx, spectrum(g).values))
    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, config.get("output", "spectra.csv"))
    write_spectrum_csv(out_path, rows)
    print(f"wrote {len(rows)} spectra to {out_path}")
    return 0


def cmd_select(config: dict, out_dir: str, seed_override: int | None) -> int:
    _check_keys(config,
                {"observed", "candidates", "K", "seed", "classifier",
                 "features", "output"},
                {"observed", "candidates"}, "select config")
    seed = _require_seed(config, seed_override)
    observed = read_edgelist(config["observed"])
    raw = config["candidates"]
    if not isinstance(raw, list) or len(raw) < 2:
        raise ConfigError("'candidates' must list at least 2 models")
    names, specs = [], []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ConfigError(f"candidate {i} must be an object")
        _check_keys(entry, {"name", "model"}, {"model"}, f"candidate {i}")
        try:
            spec = spec_from_json(entry["model"])
        except ValueError as exc:
            raise ConfigError(f"candidate {i}: {exc}") from None
        specs.append(spec)
        names.append(str(entry.get("name", f"M{i + 1}")))
    if len(set(names)) != len(names):
        raise ConfigError("candidate names must be unique")
    K = config.get("K", 100)
    if not isinstance(K, int) or K < 2:
        raise ConfigError("'K' must be an integer >= 2")
    algo = config.get("classifier", "random_forest")
    cfg = _features_from(config)

    report = select_model(observed, specs, K=K, cfg=cfg, algo=algo,
                          seed=seed, model_names=names)

    os.makedirs(out_dir, exist_ok=True)
    out_path = os.path.join(out_dir, config.get("output", "selection.json"))
    _atomic_write(out_path, report_to_json(report))

    order = np.argsort(-report.scores.s, kind="stable")
    print(f"predicted model: {report.predicted_name}")
    print(f"{'model':<28} {'propensity':>12} {'normalized':>12}")
    for i in order:
        print(f"{report.model_names[i]:<28} {report.scores.s[i]:>12.4f} "
              f"{report.scores.s_norm[i]:>12.4f}")
    print(f"report written to {out_path}")
    return 0


def cmd_study(config: dict, out_dir: str, seed_override: int | None,
              threads: int | None) -> int:
    _check_keys(config,
                {"study", "grid", "sizes", "dims", "R", "K", "seed",
                 "classifier", "classifiers", "features", "stem"},
                {"study"}, "study config")
    seed = _require_seed(config, seed_override)
    study = config["study"]
    if not isinstance(study, int) or not 1 <= study <= 5:
        raise ConfigError("'study' must be an integer in 1..5")
    try:
        cfg = StudyConfig(
            study=study,
            seed=seed,
            grid=tuple(config.get("grid", ())),
            sizes=tuple(config.get("sizes", ())),
            dims=tuple(config.get("dims", ())),
            R=config.get("R"),
            K=config.get("K"),
            classifier=config.get("classifier", "random_forest"),
            classifiers=tuple(config.get("classifiers", ())),
            features=_features_from(config),
            threads=threads,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    rows = run_study(cfg)
    csv_path, svg_path = emit_outputs(rows, out_dir, config.get("stem"))
    print(f"wrote {csv_path} and {svg_path} ({len(rows)} rate estimates)")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specsel",
        description="Network model selection from graph-Laplacian spectra")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
            ("simulate", "draw K networks from a model spec as edge lists"),
            ("spectrum", "compute Laplacian spectra of edge-list files"),
            ("select", "pick the best-fitting model for an observed network"),
            ("study", "run one of the five simulation studies")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON config path")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (overrides the config)")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: SPECSEL_THREADS or 1)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args.config)
        threads = resolve_threads(args.threads)
        if args.command == "simulate":
            return cmd_simulate(config, args.out, args.seed)
        if args.command == "spectrum":
            return cmd_spectrum(config, args.out)
        if args.command == "select":
            return cmd_select(config, args.out, args.seed)
        return cmd_study(config, args.out, args.seed, threads)
    except (ConfigError, EdgeListError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
