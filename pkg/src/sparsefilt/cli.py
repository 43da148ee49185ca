"""Command-line front end.

Exit codes: 0 ok, 1 divergence (with ``--fail-on-divergence``) or failed
verification, 2 scenario/schema error, 3 I/O error, 4 theory precondition
(step size outside 0 < mu < 2).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np

from . import harness
from .filters import Algorithm
from .scenario import ScenarioError, apply_overrides, load_scenario, preset_names, scenario_to_config
from .theory import StabilityError, predict_report
from .verify import SUITES, run_suite

log = logging.getLogger("sparsefilt")

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_IO, EXIT_THEORY = 0, 1, 2, 3, 4


def _scenario(args) -> dict:
    data = load_scenario(args.scenario)
    overrides = list(args.override or [])
    if getattr(args, "stride", None) is not None:
        overrides.append(f"stride={args.stride}")
    if getattr(args, "seed", None) is not None:
        overrides.append(f"seed={args.seed}")
    return apply_overrides(data, overrides) if overrides else data


def _report_taps(data: dict, cfg) -> Optional[List[int]]:
    taps = data.get("report_taps")
    if taps is None:
        return None
    bad = [t for t in taps if t >= cfg.system.length]
    if bad:
        raise ScenarioError(f"report_taps {bad} out of range for L={cfg.system.length}")
    return list(taps)


def _write_outputs(result, out: Path, taps, fmt: str = "csv") -> None:
    out.mkdir(parents=True, exist_ok=True)
    harness.export_result(result, out / "result.json", "json")
    if fmt == "csv":
        harness.export_result(result, out / "curves.csv", "csv", taps=taps)
        harness.export_metrics(result, out / "metrics.csv")
        harness.export_bias(result, out / "bias.csv")


def cmd_run(args) -> int:
    data = _scenario(args)
    cfg = scenario_to_config(data)
    taps = _report_taps(data, cfg)
    log.info("running %d algorithm(s), L=%d, N=%d, T=%d",
             len(cfg.filters), cfg.system.length, cfg.iterations, cfg.trials)
    result = harness.run_experiment(cfg)
    out = Path(args.out)
    _write_outputs(result, out, taps)
    show = taps if taps is not None else list(cfg.system.active_indices[:4])
    diverged = False
    for name, run in result.runs.items():
        mean = run.steady_mean
        cells = ", ".join(f"w[{i}]={mean[i]:+.5f}" for i in show)
        emse = harness.tail_emse(run, cfg.noise_variance, cfg.window)
        print(f"{name}: steady mean {cells}; tail EMSE {emse:.3e}; diverged trials {int(run.diverged.sum())}")
        diverged |= run.any_diverged
    print(f"wrote {out}")
    if diverged and args.fail_on_divergence:
        print("error: divergence detected", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def _predict_target(data: dict, cfg):
    for name, f in cfg.filters.items():
        if f.algorithm is Algorithm.ZA_PNLMS:
            return name, f
    name, f = next(iter(cfg.filters.items()))
    return name, f


def cmd_predict(args) -> int:
    data = _scenario(args)
    cfg = scenario_to_config(data)
    name, f = _predict_target(data, cfg)
    rho = f.rho if f.algorithm is Algorithm.ZA_PNLMS else 0.0
    model = None if cfg.input.kind == "white" else cfg.input.covariance(cfg.system.length)
    report = predict_report(cfg.system, f.gain_params, rho, f.mu, model)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.save(out / "prediction.json")
    with open(out / "prediction.csv", "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(("alg", "tap", "w_opt", "predicted_mean", "predicted_bias"))
        for i, w in enumerate(cfg.system.weights):
            wr.writerow((name, i, f"{w:.17g}", f"{report.predicted_mean[i]:.17g}",
                         f"{report.predicted_bias[i]:.17g}"))
    path = "white-input" if model is None else "general-correlation"
    print(f"{name}: {path} prediction, max |bias| {np.max(np.abs(report.predicted_bias)):.3e}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    names = sorted(SUITES) if args.suite == "all" else [args.suite]
    ok = True
    for name in names:
        for check in run_suite(name):
            print(f"{name}: {check.line()}")
            ok &= check.passed
    return EXIT_OK if ok else EXIT_FAIL


def cmd_export(args) -> int:
    result = harness.import_result(args.result)
    out = Path(args.out)
    taps = [int(t) for t in args.taps.split(",")] if args.taps else None
    _write_outputs(result, out, taps, args.format)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sparsefilt", description="Sparse system identification with zero-attracting PNLMS filters.")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    def scenario_args(sp):
        sp.add_argument("scenario", help=f"scenario JSON path or preset ({', '.join(preset_names())})")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--override", action="append", metavar="K=V", help="override a scenario key (repeatable)")
        sp.add_argument("--seed", type=int)

    sp = sub.add_parser("run", help="run a Monte-Carlo experiment")
    scenario_args(sp)
    sp.add_argument("--stride", type=int, help="weight snapshot stride")
    sp.add_argument("--fail-on-divergence", action="store_true", help="exit 1 if any trial diverged")
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("predict", help="steady-state mean/bias prediction")
    scenario_args(sp)
    sp.set_defaults(func=cmd_predict)

    sp = sub.add_parser("verify", help="run a fixed-seed property suite")
    sp.add_argument("suite", choices=sorted(SUITES) + ["all"])
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("export", help="re-export a saved result.json")
    sp.add_argument("result")
    sp.add_argument("--out", default="out")
    sp.add_argument("--format", choices=["csv", "json"], default="csv")
    sp.add_argument("--taps", help="comma-separated taps for the curve CSV")
    sp.set_defaults(func=cmd_export)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_THEORY
    except (ScenarioError, json.JSONDecodeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except OSError as exc:
        print(f"error: {exc.strerror or exc}: {getattr(exc, 'filename', '')}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
