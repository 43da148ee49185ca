"""NLMS, PNLMS, ZA-PNLMS and RZA-PNLMS weight updates and a run driver.

The per-sample updates share one code path, :func:`_advance`, which works on
a single weight vector ``(L,)`` or a batch of independent filters
``(T, L)``.  Batching is how the Monte-Carlo harness runs trials side by
side; :func:`run_filter` is the same engine with a batch of one, so a
single run and a one-trial experiment are bit-identical.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Optional, Union

import numpy as np

from .gain import GainParams, compute_gain
from .signals import SignalBuffer, regressor_matrix

log = logging.getLogger(__name__)

DIVERGENCE_LIMIT = 1e12

Record = Union[int, str]


class Algorithm(str, Enum):
    NLMS = "nlms"
    PNLMS = "pnlms"
    ZA_PNLMS = "za_pnlms"
    RZA_PNLMS = "rza_pnlms"

    @classmethod
    def parse(cls, name: Union[str, "Algorithm"]) -> "Algorithm":
        if isinstance(name, cls):
            return name
        key = str(name).strip().lower().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown algorithm {name!r}") from None

    @property
    def label(self) -> str:
        return {"nlms": "NLMS", "pnlms": "PNLMS", "za_pnlms": "ZA-PNLMS", "rza_pnlms": "RZA-PNLMS"}[self.value]


@dataclass(frozen=True)
class FilterConfig:
    """Algorithm choice and its parameters.

    ``rho`` is the zero-attraction strength (ZA/RZA only) and ``epsilon``
    the reweighting constant of RZA-PNLMS.  ``clamp_crossing`` sets a tap to
    zero instead of letting the attractor push it through zero.
    """

    algorithm: Algorithm = Algorithm.ZA_PNLMS
    mu: float = 0.7
    delta_p: float = 0.01
    gain_params: GainParams = field(default_factory=GainParams)
    rho: float = 1e-4
    epsilon: float = 10.0
    clamp_crossing: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "algorithm", Algorithm.parse(self.algorithm))
        if not self.mu > 0:
            raise ValueError(f"step size mu must be positive, got {self.mu}")
        if self.delta_p < 0:
            raise ValueError("delta_p must be non-negative")
        if self.rho < 0:
            raise ValueError("rho must be non-negative")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")

    def with_(self, **changes) -> "FilterConfig":
        return replace(self, **changes)

    @property
    def proportionate(self) -> bool:
        return self.algorithm is not Algorithm.NLMS


@dataclass(frozen=True)
class FilterState:
    w: np.ndarray
    n: int = 0
    last_error: float = 0.0

    @classmethod
    def zeros(cls, length: int) -> "FilterState":
        return cls(np.zeros(length))


def _sign(w: np.ndarray) -> np.ndarray:
    # np.sign maps 0 -> 0, which is the convention the attractors need.
    return np.sign(w)


def _attractor(w: np.ndarray, cfg: FilterConfig) -> Optional[np.ndarray]:
    if cfg.algorithm is Algorithm.ZA_PNLMS:
        return cfg.rho * _sign(w)
    if cfg.algorithm is Algorithm.RZA_PNLMS:
        return cfg.rho * _sign(w) / (1.0 + cfg.epsilon * np.abs(w))
    return None


def _advance(w, x, d, cfg: FilterConfig, gain=None):
    """One update of ``w`` (shape ``(..., L)``); returns ``(w_next, e, g)``.

    ``e`` uses the pre-update weights.  ``gain`` overrides the gain
    diagonal of the proportionate algorithms.
    """
    e = d - np.sum(w * x, axis=-1)
    if cfg.proportionate:
        g = compute_gain(w, cfg.gain_params) if gain is None else gain
        xg = g * x
    else:
        g = None
        xg = x
    denom = np.sum(xg * x, axis=-1) + cfg.delta_p
    coef = cfg.mu * e / denom
    w_data = w + xg * np.expand_dims(coef, -1)
    attr = _attractor(w, cfg)
    if attr is None:
        return w_data, e, g
    w_next = w_data - attr
    if cfg.clamp_crossing:
        crossed = (np.sign(w_next) * np.sign(w_data)) < 0
        w_next = np.where(crossed, 0.0, w_next)
    return w_next, e, g


def _check_inputs(state: FilterState, x, d):
    x = np.asarray(x, dtype=float)
    if x.shape != state.w.shape:
        raise ValueError(f"regressor shape {x.shape} != weight shape {state.w.shape}")
    if not (np.all(np.isfinite(x)) and np.isfinite(d)):
        raise ValueError("non-finite input sample")
    return x, float(d)


def _step(expected: Algorithm, state: FilterState, x, d, cfg: FilterConfig, gain=None) -> FilterState:
    if cfg.algorithm is not expected:
        raise ValueError(f"{expected.label} step called with a {cfg.algorithm.label} config")
    x, d = _check_inputs(state, x, d)
    w, e, _ = _advance(state.w, x, d, cfg, gain)
    return FilterState(w, state.n + 1, float(e))


def nlms_step(state: FilterState, x, d: float, cfg: FilterConfig) -> FilterState:
    """``w + mu*x*e / (x^T x + delta_p)``."""
    return _step(Algorithm.NLMS, state, x, d, cfg)


def pnlms_step(state: FilterState, x, d: float, cfg: FilterConfig, gain=None) -> FilterState:
    """``w + mu*G*x*e / (x^T G x + delta_p)`` with ``G`` from the current weights.

    Passing ``gain`` forces the diagonal instead of computing it.
    """
    return _step(Algorithm.PNLMS, state, x, d, cfg, gain)


def zapnlms_step(state: FilterState, x, d: float, cfg: FilterConfig) -> FilterState:
    """PNLMS update minus the zero attractor ``rho*sgn(w)``."""
    return _step(Algorithm.ZA_PNLMS, state, x, d, cfg)


def rzapnlms_step(state: FilterState, x, d: float, cfg: FilterConfig) -> FilterState:
    """PNLMS update minus ``rho*sgn(w_i) / (1 + epsilon*|w_i|)`` per tap."""
    return _step(Algorithm.RZA_PNLMS, state, x, d, cfg)


def step(state: FilterState, x, d: float, cfg: FilterConfig) -> FilterState:
    return _step(cfg.algorithm, state, x, d, cfg)


def record_mask(n_iter: int, record: Record) -> np.ndarray:
    """Boolean mask over ``n = 0..N`` of the iterations that are snapshotted.

    ``record`` is ``"all"``, ``"final"`` or a positive stride.
    """
    mask = np.zeros(n_iter + 1, dtype=bool)
    if record == "final":
        mask[-1] = True
    elif record == "all":
        mask[:] = True
    else:
        stride = int(record)
        if stride < 1:
            raise ValueError("record stride must be >= 1")
        mask[::stride] = True
    return mask


@dataclass
class BatchRun:
    """Accumulated output of :func:`simulate` over a batch of trials.

    ``mean_weights[k]`` and ``msd[k]`` are averages over the trials still
    alive at iteration ``times[k]``.  ``errors`` is per trial and holds NaN
    after a trial diverged.  ``mean_gain`` and ``mean_sign`` are tail averages
    of ``g(n)`` and ``sgn(w(n))`` from ``gain_tail_start`` on.
    """

    times: np.ndarray
    mean_weights: np.ndarray
    alive: np.ndarray
    errors: np.ndarray
    diverged_at: np.ndarray
    msd: Optional[np.ndarray] = None
    mean_gain: Optional[np.ndarray] = None
    mean_sign: Optional[np.ndarray] = None
    gain_sum_dev: Optional[np.ndarray] = None
    gain_min: Optional[np.ndarray] = None
    final_weights: Optional[np.ndarray] = None

    @property
    def diverged(self) -> np.ndarray:
        return self.diverged_at >= 0


def simulate(
    cfg: FilterConfig,
    inputs: np.ndarray,
    desired: np.ndarray,
    length: int,
    *,
    record: Record = 1,
    w_opt: Optional[np.ndarray] = None,
    gain_tail_start: Optional[int] = None,
    track_gain: bool = False,
) -> BatchRun:
    """Run ``T`` independent filters over ``(T, N)`` input/desired buffers.

    All filters start from zero weights.  A trial whose weights become
    non-finite or exceed ``DIVERGENCE_LIMIT`` in magnitude is flagged,
    dropped from the averages and stops contributing.
    """
    X = np.atleast_2d(np.asarray(inputs, dtype=float))
    D = np.atleast_2d(np.asarray(desired, dtype=float))
    if X.shape != D.shape:
        raise ValueError(f"input shape {X.shape} != desired shape {D.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(D))):
        raise ValueError("non-finite input sample")
    T, N = X.shape
    regs = regressor_matrix(X, length)
    mask = record_mask(N, record)
    times = np.flatnonzero(mask)
    K = times.size

    W = np.zeros((T, length))
    alive = np.ones(T, dtype=bool)
    all_alive = True
    diverged_at = np.full(T, -1)
    errors = np.full((T, N), np.nan)
    sum_w = np.zeros((K, length))
    n_alive = np.zeros(K, dtype=int)
    msd = np.zeros(K) if w_opt is not None else None
    tail = gain_tail_start is not None and cfg.proportionate
    sum_g = np.zeros(length) if tail else None
    g_count = 0
    sum_sign = np.zeros(length) if gain_tail_start is not None else None
    s_count = 0
    g_dev = np.zeros(N) if track_gain else None
    g_min = np.zeros(N) if track_gain else None

    def snapshot(k: int) -> None:
        rows = W if all_alive else W[alive]
        if rows.shape[0] == 0:
            return
        sum_w[k] = rows.sum(axis=0)
        n_alive[k] = rows.shape[0]
        if msd is not None:
            msd[k] = np.sum((w_opt - rows) ** 2)

    k = 0
    for n in range(N):
        if mask[n]:
            snapshot(k)
            k += 1
        W_next, e, g = _advance(W, regs[:, n, :], D[:, n], cfg)
        errors[:, n] = e
        if g is not None:
            if track_gain:
                rows = g if all_alive else g[alive]
                g_dev[n] = np.max(np.abs(rows.sum(axis=-1) - 1.0))
                g_min[n] = rows.min()
            if tail and n >= gain_tail_start:
                rows = g if all_alive else g[alive]
                sum_g += rows.sum(axis=0)
                g_count += rows.shape[0]
        if sum_sign is not None and n >= gain_tail_start:
            rows = W if all_alive else W[alive]
            sum_sign += np.sign(rows).sum(axis=0)
            s_count += rows.shape[0]
        W = W_next
        bad = ~np.all(np.abs(W) <= DIVERGENCE_LIMIT, axis=-1)
        if bad.any():
            newly = bad & alive
            if newly.any():
                for t in np.flatnonzero(newly):
                    log.warning("trial %d diverged at iteration %d", t, n)
                diverged_at[newly] = n
                alive &= ~newly
                all_alive = False
            W[bad] = 0.0
            if not alive.any():
                break
    else:
        if mask[N]:
            snapshot(k)

    if not all_alive:
        for t in np.flatnonzero(diverged_at >= 0):
            errors[t, diverged_at[t] + 1:] = np.nan

    with np.errstate(invalid="ignore", divide="ignore"):
        mean_w = sum_w / n_alive[:, None]
        if msd is not None:
            msd = msd / n_alive
    mean_g = None
    if tail:
        mean_g = sum_g / g_count if g_count else np.full(length, np.nan)
    elif gain_tail_start is not None:
        mean_g = np.full(length, 1.0 / length)
    mean_sign = None
    if sum_sign is not None:
        mean_sign = sum_sign / s_count if s_count else np.full(length, np.nan)
    return BatchRun(
        times=times,
        mean_weights=mean_w,
        alive=n_alive,
        errors=errors,
        diverged_at=diverged_at,
        msd=msd,
        mean_gain=mean_g,
        mean_sign=mean_sign,
        gain_sum_dev=g_dev,
        gain_min=g_min,
        final_weights=W,
    )


@dataclass
class FilterRun:
    """Trajectory of one adaptive filter run."""

    times: np.ndarray
    weights: np.ndarray
    errors: np.ndarray
    final: FilterState
    diverged: bool = False
    diverged_at: Optional[int] = None
    gain_sum_dev: Optional[np.ndarray] = None
    gain_min: Optional[np.ndarray] = None


def run_filter(
    cfg: FilterConfig,
    length: int,
    input: SignalBuffer,
    desired: SignalBuffer,
    record: Record = "all",
    track_gain: bool = False,
) -> FilterRun:
    """Adapt a zero-initialised filter over ``input``/``desired``.

    Returns ``e(n)`` for every processed sample and the weight snapshots
    selected by ``record``.  On divergence the run stops and is flagged;
    the error sequence then ends at the diverging sample.
    """
    if len(input) != len(desired):
        raise ValueError(f"input length {len(input)} != desired length {len(desired)}")
    if len(input) == 0:
        w0 = np.zeros(length)
        return FilterRun(np.array([0]), w0[None, :].copy(), np.zeros(0), FilterState(w0))
    br = simulate(
        cfg, input.samples[None, :], desired.samples[None, :], length,
        record=record, track_gain=track_gain,
    )
    ok = br.alive > 0
    errors = br.errors[0]
    if br.diverged[0]:
        at = int(br.diverged_at[0])
        errors = errors[: at + 1]
        final = FilterState(np.full(length, np.nan), at + 1, float(errors[-1]))
        gdev = br.gain_sum_dev[: at + 1] if track_gain else None
        gmin = br.gain_min[: at + 1] if track_gain else None
        return FilterRun(br.times[ok], br.mean_weights[ok], errors, final, True, at, gdev, gmin)
    n = errors.size
    final = FilterState(br.final_weights[0].copy(), n, float(errors[-1]))
    return FilterRun(br.times, br.mean_weights, errors, final, False, None, br.gain_sum_dev, br.gain_min)
