"""Experiment harness CLI.

Subcommands: synth, detect-events, occupancy, disaggregate, features,
classify, report. JSON is the single machine-readable result format; CSV and
SVG outputs are derived views. Every JSON artifact embeds the tool version,
the seed and a hash of the resolved configuration, and contains no
timestamps, so identical configs reproduce identical bytes.

Config precedence: CLI flags > --config file > defaults. The default seed
comes from the DISAGG_SEED environment variable when set.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from pathlib import Path

from . import __version__
from .classify import RandomForestConfig, characteristics_experiment
from .disagg import fhmm_disaggregate, hart_disaggregate, nilm_metrics, train_hmm
from .errors import DegenerateModelError
from .events import (DetectorConfig, detect_events, pair_events)
from .features import (FEATURE_SOURCES, build_feature_table, write_feature_csv)
from .occupancy import occupancy_experiment
from .series import load_manifest, load_power_csv, write_power_csv
from .synth import gen_corpus
from .report import render_classification_report, render_occupancy_report


def _default_seed() -> int:
    return int(os.environ.get("DISAGG_SEED", "7"))


def _resolved_config(args, keys) -> dict:
    """Merge defaults, --config file values and explicit CLI flags."""
    cfg = {k: getattr(args, k) for k in keys}
    given = getattr(args, "_argv", ())
    if getattr(args, "config", None):
        with open(args.config) as f:
            file_cfg = json.load(f)
        for k, v in file_cfg.items():
            if k in cfg and f"--{k.replace('_', '-')}" not in given:
                cfg[k] = v
    return cfg


def _config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _envelope(cfg: dict, payload: dict) -> dict:
    return {"tool_version": __version__, "seed": cfg.get("seed"),
            "config": cfg, "config_hash": _config_hash(cfg), **payload}


def _write_json(path, obj) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as f:
        json.dump(obj, f, indent=2, sort_keys=True, default=str)
        f.write("\n")


def _detector(args) -> DetectorConfig:
    return DetectorConfig(steady_tol_w=args.steady_tol,
                          min_event_w=args.min_event)


def cmd_synth(args) -> int:
    cfg = _resolved_config(args, ["homes", "days", "seed", "period", "out"])
    gen_corpus(n=cfg["homes"], seed=cfg["seed"], days=cfg["days"],
               period_s=cfg["period"], out_dir=cfg["out"])
    _write_json(Path(cfg["out"]) / "run_meta.json",
                _envelope(cfg, {"subcommand": "synth"}))
    print(f"wrote corpus of {cfg['homes']} homes to {cfg['out']}")
    return 0


def cmd_detect_events(args) -> int:
    cfg = _resolved_config(args, ["manifest", "out", "seed", "steady_tol",
                                  "min_event"])
    manifest = load_manifest(cfg["manifest"])
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    det = _detector(args)
    counts = {}
    for entry in sorted(manifest.homes, key=lambda e: e.home_id):
        series = load_power_csv(manifest.resolve(entry.aggregate_path),
                                timezone=entry.timezone)
        events = detect_events(series, det.steady_tol_w, det.min_event_w)
        pairs = pair_events(events, det.match_tol_frac, det.max_duration_s)
        with open(out / f"events_{entry.home_id}.csv", "w") as f:
            f.write("time,delta_w\n")
            for e in events:
                f.write(f"{e.time},{e.delta_w!r}\n")
        with open(out / f"pairs_{entry.home_id}.csv", "w") as f:
            f.write("on_time,off_time,magnitude_w\n")
            for p in pairs:
                f.write(f"{p.on_time},{p.off_time},{p.magnitude_w!r}\n")
        counts[entry.home_id] = {"events": len(events), "pairs": len(pairs)}
    _write_json(out / "run_meta.json",
                _envelope(cfg, {"subcommand": "detect-events",
                                "counts": counts}))
    print(f"wrote event/pair CSVs for {len(counts)} homes to {out}")
    return 0


def cmd_occupancy(args) -> int:
    cfg = _resolved_config(args, ["manifest", "algo", "protocol", "out",
                                  "seed", "jobs", "steady_tol", "min_event"])
    manifest = load_manifest(cfg["manifest"])
    algorithms = tuple(cfg["algo"].split(","))
    results = occupancy_experiment(
        manifest, protocol=cfg["protocol"], algorithms=algorithms,
        det=_detector(args),
        rf_cfg=RandomForestConfig(seed=cfg["seed"]), jobs=cfg["jobs"])
    _write_json(cfg["out"], _envelope(cfg, results))
    print(f"wrote occupancy results for {len(results['per_home'])} rows "
          f"to {cfg['out']}")
    return 0


def cmd_disaggregate(args) -> int:
    cfg = _resolved_config(args, ["manifest", "algo", "train_split", "out",
                                  "seed", "steady_tol", "min_event",
                                  "on_threshold"])
    manifest = load_manifest(cfg["manifest"])
    out = Path(cfg["out"])
    det = _detector(args)
    all_metrics = {}
    for entry in sorted(manifest.homes, key=lambda e: e.home_id):
        aggregate = load_power_csv(manifest.resolve(entry.aggregate_path),
                                   timezone=entry.timezone)
        cut = max(1, int(len(aggregate) * cfg["train_split"]))
        test = aggregate.slice(cut, len(aggregate))
        if cfg["algo"] == "hart":
            result = hart_disaggregate(test, det)
        elif cfg["algo"] == "fhmm":
            models = []
            for name, rel in sorted(entry.appliance_paths.items()):
                trace = load_power_csv(manifest.resolve(rel),
                                       timezone=entry.timezone)
                train = trace.slice(0, cut)
                n_states = 3 if name == "hvac" else 2
                for k in (n_states, 2):
                    try:
                        models.append(train_hmm(train, k, name=name,
                                                seed=cfg["seed"]))
                        break
                    except DegenerateModelError:
                        if k == 2:
                            pass
            if not models:
                raise DegenerateModelError(
                    f"home {entry.home_id}: no trainable appliances")
            result = fhmm_disaggregate(test, models)
        else:
            raise ValueError(f"unknown disaggregation algorithm {cfg['algo']!r}")

        home_dir = out / entry.home_id
        home_dir.mkdir(parents=True, exist_ok=True)
        home_metrics = {}
        for name, trace in sorted(result.appliances.items()):
            write_power_csv(trace, home_dir / f"{name}.csv")
            if name in entry.appliance_paths:
                truth = load_power_csv(
                    manifest.resolve(entry.appliance_paths[name]),
                    timezone=entry.timezone).slice(cut, len(aggregate))
                home_metrics[name] = nilm_metrics(
                    trace, truth, cfg["on_threshold"]).as_dict()
        all_metrics[entry.home_id] = home_metrics
    _write_json(out / "metrics.json",
                _envelope(cfg, {"subcommand": "disaggregate",
                                "algo": cfg["algo"], "metrics": all_metrics}))
    print(f"wrote {cfg['algo']} traces for {len(all_metrics)} homes to {out}")
    return 0


def cmd_features(args) -> int:
    cfg = _resolved_config(args, ["manifest", "source", "out", "seed",
                                  "steady_tol", "min_event"])
    manifest = load_manifest(cfg["manifest"])
    table = build_feature_table(manifest, (cfg["source"],), det=_detector(args))
    Path(cfg["out"]).parent.mkdir(parents=True, exist_ok=True)
    write_feature_csv(table, cfg["source"], cfg["out"])
    _write_json(Path(cfg["out"]).with_suffix(".meta.json"),
                _envelope(cfg, {"subcommand": "features",
                                "n_homes": len(table.home_ids)}))
    print(f"wrote {cfg['source']} features for {len(table.home_ids)} homes "
          f"to {cfg['out']}")
    return 0


def cmd_classify(args) -> int:
    cfg = _resolved_config(args, ["manifest", "source", "classifier", "out",
                                  "seed", "folds", "steady_tol", "min_event"])
    manifest = load_manifest(cfg["manifest"])
    rows = characteristics_experiment(
        manifest, feature_sources=tuple(cfg["source"].split(",")),
        classifier=cfg["classifier"], folds=cfg["folds"], seed=cfg["seed"],
        rf_cfg=RandomForestConfig(seed=cfg["seed"]), det=_detector(args))
    _write_json(cfg["out"], _envelope(cfg, {"rows": rows}))
    print(f"wrote {len(rows)} classification rows to {cfg['out']}")
    return 0


def cmd_report(args) -> int:
    cfg = _resolved_config(args, ["results", "out", "seed"])
    with open(cfg["results"]) as f:
        payload = json.load(f)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    if "per_home" in payload:
        charts = render_occupancy_report(payload)
    elif "rows" in payload:
        charts = render_classification_report(payload["rows"])
    else:
        raise ValueError("unrecognized results payload; expected occupancy "
                         "or classification output")
    for name, svg in sorted(charts.items()):
        with open(out / name, "w") as f:
            f.write(svg)
    _write_json(out / "run_meta.json",
                _envelope(cfg, {"subcommand": "report",
                                "charts": sorted(charts)}))
    print(f"wrote {len(charts)} chart(s) to {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nilminfer",
        description="Energy-disaggregation experiments: occupancy and "
                    "household-characteristic inference from smart-meter data")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=_default_seed())
        p.add_argument("--config", help="JSON config file (flags win)")
        p.add_argument("--steady-tol", dest="steady_tol", type=float, default=15.0)
        p.add_argument("--min-event", dest="min_event", type=float, default=70.0)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("--homes", type=int, default=20)
    p.add_argument("--days", type=int, default=14)
    p.add_argument("--period", type=int, default=30)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect-events", help="export event/pair CSVs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_detect_events)

    p = sub.add_parser("occupancy", help="occupancy prediction experiment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--algo", default="ours,chen",
                   help="comma list: ours,ours-optimised,chen,chen-median,knn,rf")
    p.add_argument("--protocol", choices=("split-half", "loho"),
                   default="split-half")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_occupancy)

    p = sub.add_parser("disaggregate", help="appliance disaggregation")
    p.add_argument("--manifest", required=True)
    p.add_argument("--algo", choices=("fhmm", "hart"), default="fhmm")
    p.add_argument("--train-split", dest="train_split", type=float, default=0.5)
    p.add_argument("--on-threshold", dest="on_threshold", type=float, default=50.0)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_disaggregate)

    p = sub.add_parser("features", help="export a feature matrix CSV")
    p.add_argument("--manifest", required=True)
    p.add_argument("--source", choices=FEATURE_SOURCES, default="both")
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("classify", help="household-characteristic experiment")
    p.add_argument("--manifest", required=True)
    p.add_argument("--source", default="both",
                   help=f"comma list from {FEATURE_SOURCES}")
    p.add_argument("--classifier", choices=("knn", "rf"), default="knn")
    p.add_argument("--folds", type=int, default=2)
    p.add_argument("--out", required=True)
    common(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("report", help="render SVG charts from results JSON")
    p.add_argument("--results", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--config", help="JSON config file (flags win)")
    p.set_defaults(func=cmd_report)
    return parser


def run(argv) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    args._argv = tuple(argv)
    try:
        return args.func(args)
    except Exception as exc:  # structured failure record on stderr
        record = {"error": type(exc).__name__, "message": str(exc),
                  "subcommand": getattr(args, "subcommand", None)}
        print(json.dumps(record, sort_keys=True), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
