"""Monte-Carlo experiments: averaged learning curves, MSD/EMSE, bias, export."""

from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .filters import Algorithm, FilterConfig, simulate
from .signals import (
    SignalBuffer,
    SparseSystem,
    derive_seed,
    gen_ar1,
    gen_white_gaussian,
    system_output,
)
from .theory import CovarianceModel, predict_report

log = logging.getLogger(__name__)

# Stream ids for derive_seed(base, trial, stream).
INPUT_STREAM = 0
NOISE_STREAM = 1

CURVE_HEADER = ("n", "alg", "tap", "value")
METRIC_HEADER = ("n", "alg", "metric", "value")
BIAS_HEADER = ("alg", "tap", "w_opt", "bias", "predicted_bias")


def _fmt(v: float) -> str:
    return f"{v:.17g}"


@dataclass(frozen=True)
class InputModel:
    """White Gaussian input, or a stationary AR(1) with marginal ``variance``."""

    kind: str = "white"
    variance: float = 1.0
    pole: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("white", "ar1"):
            raise ValueError(f"unknown input model {self.kind!r}")
        if self.variance < 0:
            raise ValueError("input variance must be non-negative")
        if self.kind == "ar1" and not abs(self.pole) < 1:
            raise ValueError("AR(1) pole must satisfy |pole| < 1")

    def generate(self, n: int, seed: int) -> SignalBuffer:
        if self.kind == "white":
            return gen_white_gaussian(n, self.variance, seed)
        return gen_ar1(n, self.pole, self.variance * (1.0 - self.pole**2), seed)

    def covariance(self, length: int) -> CovarianceModel:
        if self.kind == "white":
            return CovarianceModel.white(length, self.variance)
        return CovarianceModel.ar1(length, self.pole, self.variance)


@dataclass(frozen=True)
class ExperimentConfig:
    system: SparseSystem
    filters: Dict[str, FilterConfig]
    input: InputModel = InputModel()
    noise_variance: float = 1e-3
    iterations: int = 25_000
    trials: int = 30
    seed: int = 0
    stride: int = 10
    window: float = 0.1

    def __post_init__(self) -> None:
        if self.iterations < 1 or self.trials < 1:
            raise ValueError("iterations and trials must be >= 1")
        if not 0 < self.window <= 1:
            raise ValueError("steady-state window must lie in (0, 1]")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")
        if self.noise_variance < 0:
            raise ValueError("noise variance must be non-negative")
        if not self.filters:
            raise ValueError("at least one filter configuration is required")

    @property
    def window_start(self) -> int:
        """First iteration index of the steady-state window."""
        return self.iterations - max(1, int(round(self.window * self.iterations)))


@dataclass
class AlgorithmResult:
    """Trial-averaged output of one filter configuration.

    ``mean_weights[k]`` estimates ``E[w(times[k])]``; ``mse[n]`` is the
    trial mean of ``e(n)^2``.  ``mean_gain`` and ``mean_sign`` are the gain
    diagonal and ``sgn(w)`` averaged over the steady-state window.
    """

    name: str
    algorithm: Algorithm
    w_opt: np.ndarray
    times: np.ndarray
    mean_weights: np.ndarray
    msd: np.ndarray
    mse: np.ndarray
    mean_gain: np.ndarray
    diverged_at: np.ndarray
    window: float = 0.1
    mean_sign: Optional[np.ndarray] = None

    @property
    def diverged(self) -> np.ndarray:
        return self.diverged_at >= 0

    @property
    def any_diverged(self) -> bool:
        return bool(np.any(self.diverged_at >= 0))

    @property
    def steady_mean(self) -> np.ndarray:
        return steady_window_mean(self, self.window)

    @property
    def bias(self) -> np.ndarray:
        return extract_bias(self, self.window)


@dataclass
class ExperimentResult:
    config: Optional[ExperimentConfig]
    runs: Dict[str, AlgorithmResult] = field(default_factory=dict)

    def __getitem__(self, name: str) -> AlgorithmResult:
        return self.runs[name]


def _trial_data(cfg: ExperimentConfig):
    X = np.empty((cfg.trials, cfg.iterations))
    D = np.empty_like(X)
    for t in range(cfg.trials):
        x = cfg.input.generate(cfg.iterations, derive_seed(cfg.seed, t, INPUT_STREAM))
        v = gen_white_gaussian(cfg.iterations, cfg.noise_variance, derive_seed(cfg.seed, t, NOISE_STREAM))
        X[t] = x.samples
        D[t] = system_output(cfg.system, x, v).samples
    return X, D


def _max_workers() -> int:
    env = os.environ.get("SPARSEFILT_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer SPARSEFILT_THREADS=%r", env)
    return os.cpu_count() or 1


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Run every configured filter over ``cfg.trials`` seeded realisations.

    Trial ``t`` draws its input and noise from seeds derived from
    ``(cfg.seed, t)`` only, so all filters in one experiment see the same
    realisations.  Diverged trials are flagged and left out of the means.
    """
    X, D = _trial_data(cfg)
    L = cfg.system.length
    start = cfg.window_start

    def one(item):
        name, fcfg = item
        br = simulate(
            fcfg, X, D, L,
            record=cfg.stride, w_opt=cfg.system.weights, gain_tail_start=start,
        )
        if br.diverged.any():
            log.warning("%s: %d of %d trials diverged", name, int(br.diverged.sum()), cfg.trials)
        with np.errstate(invalid="ignore"):
            mse = np.nanmean(br.errors**2, axis=0) if not br.diverged.all() else np.full(cfg.iterations, np.nan)
        return name, AlgorithmResult(
            name=name,
            algorithm=fcfg.algorithm,
            w_opt=cfg.system.weights,
            times=br.times,
            mean_weights=br.mean_weights,
            msd=br.msd,
            mse=mse,
            mean_gain=br.mean_gain,
            diverged_at=br.diverged_at,
            window=cfg.window,
            mean_sign=br.mean_sign,
        )

    items = list(cfg.filters.items())
    workers = min(_max_workers(), len(items))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            done = list(pool.map(one, items))
    else:
        done = [one(it) for it in items]
    return ExperimentResult(cfg, dict(done))


def _window_mask(run: AlgorithmResult, window: float) -> np.ndarray:
    if not 0 < window <= 1:
        raise ValueError("window must lie in (0, 1]")
    n_end = run.times[-1] if run.times.size else 0
    start = n_end - max(1, int(round(window * n_end)))
    mask = run.times >= start
    if not mask.any():
        raise ValueError("steady-state window contains no recorded iterations")
    return mask


def steady_window_mean(run: AlgorithmResult, window: float = 0.1) -> np.ndarray:
    return run.mean_weights[_window_mask(run, window)].mean(axis=0)


def extract_bias(run: AlgorithmResult, window: float = 0.1) -> np.ndarray:
    """``w_opt - mean(E[w(n)])`` over the final ``window`` fraction of the run."""
    return run.w_opt - steady_window_mean(run, window)


def msd_curve(run: AlgorithmResult, system: Optional[SparseSystem] = None) -> np.ndarray:
    """``E||w_opt - w(n)||^2`` at the recorded iterations."""
    if system is not None and not np.array_equal(system.weights, run.w_opt):
        raise ValueError("MSD was accumulated against a different system")
    if run.msd is None:
        raise ValueError("run has no MSD data")
    return run.msd


def emse_curve(run: AlgorithmResult, noise_variance: float) -> np.ndarray:
    """Trial mean of ``e(n)^2`` minus the noise variance, floored at zero."""
    if run.mse is None or run.mse.size == 0:
        raise ValueError("run has no per-sample error data")
    return np.maximum(run.mse - noise_variance, 0.0)


def tail_emse(run: AlgorithmResult, noise_variance: float, window: float = 0.1) -> float:
    e = emse_curve(run, noise_variance)
    n = max(1, int(round(window * e.size)))
    return float(np.mean(e[-n:]))


# ---------------------------------------------------------------------------
# persistence


def bias_rows(result: ExperimentResult, taps: Optional[Iterable[int]] = None) -> List[tuple]:
    """Measured vs predicted per-tap bias, one row per (algorithm, tap).

    ZA-PNLMS rows carry the steady-state prediction; PNLMS and NLMS have no
    attractor and are predicted unbiased; RZA-PNLMS has no prediction (NaN).
    """
    rows = []
    cfg = result.config
    for name, run in result.runs.items():
        measured = run.bias
        if run.algorithm is Algorithm.ZA_PNLMS and cfg is not None:
            fcfg = cfg.filters[name]
            model = None if cfg.input.kind == "white" else cfg.input.covariance(cfg.system.length)
            predicted = predict_report(cfg.system, fcfg.gain_params, fcfg.rho, fcfg.mu, model).predicted_bias
        elif run.algorithm is Algorithm.RZA_PNLMS:
            predicted = np.full(run.w_opt.size, np.nan)
        else:
            predicted = np.zeros(run.w_opt.size)
        for i in range(run.w_opt.size) if taps is None else taps:
            rows.append((name, int(i), float(run.w_opt[i]), float(measured[i]), float(predicted[i])))
    return rows


def _write(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([_fmt(v) if isinstance(v, float) else v for v in r])


def export_curves(result: ExperimentResult, path, taps: Optional[Sequence[int]] = None) -> None:
    def rows():
        for name, run in result.runs.items():
            cols = range(run.w_opt.size) if taps is None else taps
            for k, n in enumerate(run.times):
                for i in cols:
                    yield int(n), name, int(i), float(run.mean_weights[k, i])

    _write(path, CURVE_HEADER, rows())


def export_metrics(result: ExperimentResult, path) -> None:
    noise = result.config.noise_variance if result.config else 0.0

    def rows():
        for name, run in result.runs.items():
            for n, v in zip(run.times, run.msd):
                yield int(n), name, "msd", float(v)
            for n, v in enumerate(emse_curve(run, noise)):
                yield n, name, "emse", float(v)

    _write(path, METRIC_HEADER, rows())


def export_bias(result: ExperimentResult, path, taps: Optional[Iterable[int]] = None) -> None:
    _write(path, BIAS_HEADER, bias_rows(result, taps))


def _arr(a) -> list:
    return None if a is None else np.asarray(a).tolist()


def result_to_dict(result: ExperimentResult) -> dict:
    from .scenario import config_to_scenario

    return {
        "config": config_to_scenario(result.config) if result.config else None,
        "runs": {
            name: {
                "algorithm": run.algorithm.value,
                "w_opt": _arr(run.w_opt),
                "times": _arr(run.times),
                "mean_weights": _arr(run.mean_weights),
                "msd": _arr(run.msd),
                "mse": _arr(run.mse),
                "mean_gain": _arr(run.mean_gain),
                "diverged_at": _arr(run.diverged_at),
                "window": run.window,
                "mean_sign": _arr(run.mean_sign),
            }
            for name, run in result.runs.items()
        },
    }


def result_from_dict(data: dict) -> ExperimentResult:
    from .scenario import scenario_to_config

    cfg = scenario_to_config(data["config"]) if data.get("config") else None
    runs = {}
    for name, r in data["runs"].items():
        L = len(r["w_opt"])
        runs[name] = AlgorithmResult(
            name=name,
            algorithm=Algorithm.parse(r["algorithm"]),
            w_opt=np.array(r["w_opt"], dtype=float),
            times=np.array(r["times"], dtype=int),
            mean_weights=np.array(r["mean_weights"], dtype=float).reshape(-1, L),
            msd=np.array(r["msd"], dtype=float),
            mse=np.array(r["mse"], dtype=float),
            mean_gain=None if r["mean_gain"] is None else np.array(r["mean_gain"], dtype=float),
            diverged_at=np.array(r["diverged_at"], dtype=int),
            window=float(r["window"]),
            mean_sign=None if r.get("mean_sign") is None else np.array(r["mean_sign"], dtype=float),
        )
    return ExperimentResult(cfg, runs)


def export_result(result: ExperimentResult, path, format: str = "json", taps=None) -> None:
    """Write ``result`` as JSON (everything) or CSV (weight curves)."""
    if format == "json":
        Path(path).write_text(json.dumps(result_to_dict(result)) + "\n")
    elif format == "csv":
        export_curves(result, path, taps)
    else:
        raise ValueError(f"unknown export format {format!r}")


def import_result(path) -> ExperimentResult:
    return result_from_dict(json.loads(Path(path).read_text()))


def import_curves(path) -> Dict[str, Dict[int, Dict[int, float]]]:
    """Read a curve CSV back as ``{alg: {tap: {n: value}}}``."""
    out: Dict[str, Dict[int, Dict[int, float]]] = {}
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        header = tuple(next(rd))
        if header != CURVE_HEADER:
            raise ValueError(f"unexpected curve header {header}")
        for n, alg, tap, value in rd:
            out.setdefault(alg, {}).setdefault(int(tap), {})[int(n)] = float(value)
    return out
