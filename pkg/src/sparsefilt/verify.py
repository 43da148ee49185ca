"""Fixed-seed property suites behind ``sparsefilt verify``.

Each suite returns a list of :class:`Check` records; a suite passes when
every check does.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from .filters import Algorithm, FilterConfig, FilterState, nlms_step, pnlms_step, run_filter
from .signals import SignalBuffer, derive_seed, rng_from_seed
from .theory import (
    CovarianceModel,
    angular_discretize_sample,
    estimate_B,
    projection_residual,
    steady_S,
    transform_step_check,
)


@dataclass
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"


def _random_run(length: int, n: int, seed: int):
    rng = rng_from_seed(seed)
    w_opt = np.where(rng.random(length) < 0.25, rng.standard_normal(length), 0.0)
    x = rng.standard_normal(n)
    d = np.convolve(x, w_opt)[:n] + 0.03 * rng.standard_normal(n)
    return SignalBuffer(x, 1.0), SignalBuffer(d)


def reductions(seed: int = 1, steps: int = 1000, lengths=(4, 64)) -> List[Check]:
    """ZA(rho=0) == PNLMS, RZA(eps=0) == ZA and uniform-gain PNLMS == NLMS(L*delta_p),
    each bit-exact over a randomized run."""
    checks = []
    for L in lengths:
        x, d = _random_run(L, steps, derive_seed(seed, L))
        base = FilterConfig(Algorithm.PNLMS, mu=0.6, delta_p=0.01, rho=3e-3, epsilon=7.0)
        pn = run_filter(base, L, x, d)
        za0 = run_filter(base.with_(algorithm=Algorithm.ZA_PNLMS, rho=0.0), L, x, d)
        same = np.array_equal(pn.weights, za0.weights) and np.array_equal(pn.errors, za0.errors)
        checks.append(Check(f"ZA-PNLMS(rho=0) == PNLMS, L={L}", same, f"{steps} steps bit-exact={same}"))

        za = run_filter(base.with_(algorithm=Algorithm.ZA_PNLMS), L, x, d)
        rza0 = run_filter(base.with_(algorithm=Algorithm.RZA_PNLMS, epsilon=0.0), L, x, d)
        same = np.array_equal(za.weights, rza0.weights) and np.array_equal(za.errors, rza0.errors)
        checks.append(Check(f"RZA-PNLMS(eps=0) == ZA-PNLMS, L={L}", same, f"{steps} steps bit-exact={same}"))

        if L & (L - 1) == 0:
            # 1/L is exact only for powers of two.
            uniform = np.full(L, 1.0 / L)
            cn = FilterConfig(Algorithm.NLMS, mu=0.6, delta_p=0.01 * L)
            sp = FilterState.zeros(L)
            sn = FilterState.zeros(L)
            regs = np.lib.stride_tricks.sliding_window_view(
                np.concatenate([np.zeros(L - 1), x.samples]), L)[:, ::-1]
            same = True
            for n in range(steps):
                sp = pnlms_step(sp, regs[n], d.samples[n], base, gain=uniform)
                sn = nlms_step(sn, regs[n], d.samples[n], cn)
                if not np.array_equal(sp.w, sn.w):
                    same = False
                    break
            checks.append(Check(f"uniform-gain PNLMS == NLMS(L*delta_p), L={L}", same,
                                f"{steps} steps bit-exact={same}"))
    return checks


def _random_transform_instance(rng: np.random.Generator, L: int):
    w = rng.standard_normal(L) * (rng.random(L) < 0.5)
    x = rng.standard_normal(L)
    d = float(rng.standard_normal())
    cfg = FilterConfig(
        Algorithm.ZA_PNLMS,
        mu=float(rng.uniform(0.05, 1.95)),
        delta_p=float(rng.choice([0.0, 0.01, 1.0])),
        rho=float(rng.choice([0.0, 1e-4, 1e-2])),
    )
    return w, x, d, cfg


def transform(seed: int = 2, instances: int = 10_000, lengths=(2, 8, 64), tol: float = 1e-12) -> List[Check]:
    rng = rng_from_seed(seed)
    worst = 0.0
    for i in range(instances):
        w, x, d, cfg = _random_transform_instance(rng, lengths[i % len(lengths)])
        worst = max(worst, transform_step_check(w, x, d, cfg))
    return [Check("transform-domain update matches direct update", worst <= tol,
                  f"max relative discrepancy {worst:.3e} over {instances} instances (tol {tol:g})")]


def discretization(seed: int = 3, draws: int = 1_000_000, length: int = 8) -> List[Check]:
    checks = []
    models = {"white": CovarianceModel.white(length), "ar1(0.9)": CovarianceModel.ar1(length, 0.9)}
    for k, (label, model) in enumerate(models.items()):
        X = angular_discretize_sample(model, seed=derive_seed(seed, k), size=draws)
        m = X.mean(axis=0)
        band = 4.0 * np.sqrt(np.diag(model.R) / draws)
        checks.append(Check(f"sampler mean ~ 0 [{label}]", bool(np.all(np.abs(m) <= band)),
                            f"max |mean|/band {np.max(np.abs(m) / band):.3f}"))
        R_hat = X.T @ X / draws
        rel = np.linalg.norm(R_hat - model.R) / np.linalg.norm(model.R)
        checks.append(Check(f"sampler E[xx^T] ~ R [{label}]", rel <= 0.02, f"relative Frobenius error {rel:.4f}"))
        # B identity with G = I, so S = R.
        S = steady_S(model, np.ones(length))
        err = np.max(np.abs(estimate_B(X) - S / np.trace(S)))
        checks.append(Check(f"estimate_B ~ S/Tr(S) [{label}]", err <= 0.003, f"max entry error {err:.4f}"))
    G = rng_from_seed(derive_seed(seed, 99)).standard_normal((draws, length))
    err = np.max(np.abs(estimate_B(G) - np.eye(length) / length))
    checks.append(Check("estimate_B(white Gaussian) ~ I/L", err <= 0.003, f"max entry error {err:.4f}"))
    return checks


def projection(seed: int = 4, draws: int = 10_000, length: int = 512) -> List[Check]:
    rng = rng_from_seed(seed)
    g = np.full(length, 1.0 / length)
    w = np.where(rng.random(length) < 0.5, 1.0, -1.0)
    vals = [projection_residual(rng.standard_normal(length), g, w) for _ in range(draws)]
    mean = float(np.mean(vals))
    one = projection_residual(np.array([rng.standard_normal()]), np.array([1.0]), np.array([0.3]))
    return [
        Check(f"mean projection residual at L={length}", mean <= 0.15, f"{mean:.4f} (bound 0.15)"),
        Check("projection residual at L=1", one == 1.0, f"{one!r}"),
    ]


def gain_simplex(seed: int = 5, length: int = 64, steps: int = 25_000, tol: float = 1e-12) -> List[Check]:
    x, d = _random_run(length, steps, seed)
    run = run_filter(FilterConfig(Algorithm.ZA_PNLMS), length, x, d, record="final", track_gain=True)
    dev = float(run.gain_sum_dev.max())
    gmin = float(run.gain_min.min())
    return [Check(f"gain on simplex every step, L={length}", dev <= tol and gmin > 0,
                  f"max |sum g - 1| {dev:.2e}, min g {gmin:.3e}")]


SUITES: Dict[str, Callable[[], List[Check]]] = {
    "reductions": reductions,
    "transform": transform,
    "discretization": discretization,
    "projection": projection,
    "gain": gain_simplex,
}


def run_suite(name: str) -> List[Check]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name]()
