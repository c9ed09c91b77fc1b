"""Command-line front end: run, sweep, compare and validate."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .config import ConfigFile, loads_config
from .sim import (PLANT_MODELS, ConfigError, ScenarioConfig, run_with_metrics, sweep_runs)
from .validation import run_checks

DEFAULT_OUT = "hpdob-out"
SWEEP_COLUMNS = ("value", "rms_tracking", "rms_est_error", "max_est_error", "diverged", "settle_fraction")


def _fail(message: str, code: int = 2) -> int:
    print(f"hpdob: error: {message}", file=sys.stderr)
    return code


def _load(path) -> ConfigFile:
    if path is None:
        return ConfigFile(ScenarioConfig())
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    if not text.strip():
        return ConfigFile(ScenarioConfig())
    return loads_config(text, str(path))


def _apply_overrides(cf: ConfigFile, args) -> ScenarioConfig:
    cfg = cf.scenario
    changes = {}
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    if getattr(args, "plant_model", None) is not None:
        changes["plant_model"] = args.plant_model
    return dataclasses.replace(cfg, **changes) if changes else cfg


def _out_dir(args, cf: ConfigFile | None) -> Path:
    out = args.out or (cf.output_dir if cf else None) or DEFAULT_OUT
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def cmd_run(args) -> int:
    try:
        cf = _load(args.config)
        cfg = _apply_overrides(cf, args)
    except ConfigError as exc:
        return _fail(str(exc))
    try:
        out = _out_dir(args, cf)
        trace, metrics = run_with_metrics(cfg)
        trace.to_csv(out / "trace.csv")
        metrics.to_json(out / "metrics.json")
    except OSError as exc:
        return _fail(f"cannot write outputs: {exc}", 1)
    status = "diverged" if metrics.diverged else "ok"
    print(f"{status}: {len(trace)} samples, rms_est_error={metrics.rms_est_error:.6g}, "
          f"rms_tracking={metrics.rms_tracking:.6g} -> {out}")
    return 0


def _parse_values(tokens) -> list[float]:
    values = []
    for token in tokens or []:
        for part in token.split(","):
            part = part.strip()
            if part:
                values.append(float(part))
    return values


def cmd_sweep(args) -> int:
    try:
        cf = _load(args.config)
        cfg = _apply_overrides(cf, args)
        values = _parse_values(args.values)
    except (ConfigError, ValueError) as exc:
        return _fail(str(exc))
    if not values:
        return _fail("sweep needs at least one value (--values)")
    try:
        runs = sweep_runs(cfg, args.param, values, max_workers=args.workers)
    except ConfigError as exc:
        return _fail(str(exc))
    try:
        out = _out_dir(args, cf)
        with open(out / "sweep.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(SWEEP_COLUMNS)
            for i, (value, trace, metrics) in enumerate(runs):
                m = metrics.to_dict()
                writer.writerow([repr(value)] + [repr(m[c]) if isinstance(m[c], float) else str(m[c]).lower()
                                                 for c in SWEEP_COLUMNS[1:]])
                trace.to_csv(out / f"trace_{i:03d}.csv")
    except OSError as exc:
        return _fail(f"cannot write outputs: {exc}", 1)
    for value, _, metrics in runs:
        flag = " (diverged)" if metrics.diverged else ""
        print(f"{args.param}={value!r}: rms_est_error={metrics.rms_est_error:.6g}{flag}")
    return 0


def _labels(paths) -> list[str]:
    labels, seen = [], {}
    for p in paths:
        stem = Path(p).stem
        seen[stem] = seen.get(stem, 0) + 1
        labels.append(stem if seen[stem] == 1 else f"{stem}#{seen[stem]}")
    return labels


def _rank(labels, metrics, key):
    order = sorted(range(len(labels)), key=lambda i: (metrics[i].diverged, getattr(metrics[i], key)))
    return [labels[i] for i in order]


def cmd_compare(args) -> int:
    paths = args.config or []
    if len(paths) < 2:
        return _fail("compare needs at least two configs")
    try:
        files = [_load(p) for p in paths]
        configs = [_apply_overrides(cf, args) for cf in files]
    except ConfigError as exc:
        return _fail(str(exc))
    first = configs[0]
    for path, cfg in zip(paths, configs):
        if cfg.Ts != first.Ts or cfg.n_steps != first.n_steps:
            return _fail(f"time grid of {path} (Ts={cfg.Ts}, duration={cfg.duration}) does not match "
                         f"{paths[0]} (Ts={first.Ts}, duration={first.duration})")
    if args.workers and args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            results = list(pool.map(run_with_metrics, configs))
    else:
        results = [run_with_metrics(c) for c in configs]
    labels = _labels(paths)
    traces = [r[0] for r in results]
    metrics = [r[1] for r in results]
    n_rows = first.n_steps + 1
    try:
        out = _out_dir(args, None)
        with open(out / "comparison.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            header = ["t"]
            for label in labels:
                header += [f"{label}:tau_hat", f"{label}:est_error"]
            writer.writerow(header)
            for k in range(n_rows):
                row = [repr(k * first.Ts)]
                for tr in traces:
                    if k < len(tr):
                        row += [repr(float(tr.tau_hat[k])), repr(float(tr.est_error[k]))]
                    else:
                        row += ["", ""]
                writer.writerow(row)
        ranking = {
            "by_rms_est_error": _rank(labels, metrics, "rms_est_error"),
            "by_rms_tracking": _rank(labels, metrics, "rms_tracking"),
            "metrics": {label: m.to_dict() for label, m in zip(labels, metrics)},
        }
        with open(out / "ranking.json", "w") as fh:
            json.dump(ranking, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        return _fail(f"cannot write outputs: {exc}", 1)
    for i, label in enumerate(ranking["by_rms_est_error"], 1):
        m = metrics[labels.index(label)]
        print(f"{i}. {label}: rms_est_error={m.rms_est_error:.6g} rms_tracking={m.rms_tracking:.6g}")
    return 0


def cmd_validate(args) -> int:
    results = run_checks(perturb_ad=args.perturb_ad)
    for r in results:
        print(r.line())
    failed = [r for r in results if not r.informational and not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks ok")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hpdob", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, multi=False):
        if multi:
            p.add_argument("--config", nargs="+", required=True, help="scenario config files (JSON)")
        else:
            p.add_argument("--config", help="scenario config file (JSON); omitted = baseline scenario")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="override the noise seed")
        p.add_argument("--plant-model", choices=PLANT_MODELS, help="override the plant model")

    p = sub.add_parser("run", help="run one scenario, write trace.csv and metrics.json")
    common(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a scenario once per parameter value")
    common(p)
    p.add_argument("--param", required=True, help="dotted config path, e.g. mode.g or pd.Kp")
    p.add_argument("--values", nargs="+", help="values, comma and/or space separated")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("compare", help="run several scenarios on one time grid and rank them")
    common(p, multi=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="run the oracle checks")
    p.add_argument("--perturb-ad", type=float, default=0.0, help=argparse.SUPPRESS)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
