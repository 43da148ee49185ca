"""Mean-convergence analysis of ZA-PNLMS.

Covers the transform-domain reformulation of the update, the angular
discretisation of a random regressor, the normalised-regressor correlation
``B = E[s s^T / s^T s]``, steady-state mean/bias predictions and the step
size bound ``0 < mu < 2``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .filters import Algorithm, FilterConfig, _advance
from .gain import GainParams, compute_gain, gain_inv_sqrt, gain_sqrt
from .signals import SparseSystem, rng_from_seed


class Stability(str, Enum):
    STABLE = "stable"
    OUTSIDE_BOUND = "outside_bound"


class StabilityError(ValueError):
    """Raised when a prediction is requested for a step size outside (0, 2)."""


def check_mu_stability(mu: float) -> Stability:
    return Stability.STABLE if 0 < mu < 2 else Stability.OUTSIDE_BOUND


def _require_stable(mu: float) -> None:
    if check_mu_stability(mu) is not Stability.STABLE:
        raise StabilityError(
            f"step size mu={mu} is outside the mean-stability bound 0 < mu < 2; "
            "steady-state prediction is not defined"
        )


@dataclass(frozen=True)
class CovarianceModel:
    """Input correlation matrix with its eigendecomposition.

    ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``.
    """

    R: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_matrix(cls, R) -> "CovarianceModel":
        R = np.asarray(R, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError("correlation matrix must be square")
        if not np.allclose(R, R.T, atol=1e-12):
            raise ValueError("correlation matrix must be symmetric")
        lam, E = np.linalg.eigh(R)
        if lam.min() < -1e-10 * max(1.0, abs(lam.max())):
            raise ValueError("correlation matrix must be positive semi-definite")
        return cls(R, np.clip(lam, 0.0, None), E)

    @classmethod
    def white(cls, length: int, variance: float = 1.0) -> "CovarianceModel":
        return cls.from_matrix(variance * np.eye(length))

    @classmethod
    def ar1(cls, length: int, pole: float, variance: float = 1.0) -> "CovarianceModel":
        """Correlation of ``length`` consecutive samples of a stationary AR(1)
        process with marginal ``variance``."""
        k = np.arange(length)
        return cls.from_matrix(variance * pole ** np.abs(k[:, None] - k[None, :]))

    @property
    def length(self) -> int:
        return self.R.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.R))

    @property
    def direction_probs(self) -> np.ndarray:
        tr = self.eigenvalues.sum()
        if not tr > 0:
            raise ValueError("all-zero correlation matrix has no directions")
        return self.eigenvalues / tr

    def reconstruct(self) -> np.ndarray:
        E, lam = self.eigenvectors, self.eigenvalues
        return (E * lam) @ E.T


def transform_step_check(w, x, d: float, cfg: FilterConfig) -> float:
    """Largest relative gap between the direct ZA-PNLMS update and its
    transform-domain form.

    The transform path uses ``s = G^{1/2} x``, ``w_N = G^{-1/2} w``,
    updates ``w_N`` with an NLMS-style step plus ``rho*G^{-1/2} sgn(w_N)``
    and maps back through ``G^{1/2}``.  Each tap's gap is scaled by the
    magnitudes of the quantities that form that tap (including the terms of
    the output error), so cancellation cannot inflate it.
    """
    if cfg.algorithm not in (Algorithm.ZA_PNLMS, Algorithm.PNLMS):
        raise ValueError("transform check applies to ZA-PNLMS (or PNLMS) configs")
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    rho = cfg.rho if cfg.algorithm is Algorithm.ZA_PNLMS else 0.0
    direct, _, _ = _advance(w, x, d, cfg)

    g = compute_gain(w, cfg.gain_params)
    if np.any(g <= 0):
        raise ValueError("zero gain element")
    half, inv_half = gain_sqrt(g), gain_inv_sqrt(g)
    s = half * x
    w_n = inv_half * w
    e = d - np.dot(w_n, s)
    data = cfg.mu * e * s / (np.dot(s, s) + cfg.delta_p)
    attract = rho * inv_half * np.sign(w_n)
    w_n_next = w_n + data - attract
    via_transform = half * w_n_next

    # e = d - w^T x may cancel; its rounding is relative to |d| + sum|w x|.
    e_mag = abs(d) + np.sum(np.abs(w * x))
    data_mag = cfg.mu * e_mag * g * np.abs(x) / (np.dot(s, s) + cfg.delta_p)
    scale = np.abs(w) + data_mag + np.abs(half * attract)
    gap = np.abs(direct - via_transform)
    rel = np.divide(gap, scale, out=np.zeros_like(gap), where=scale > 0)
    return float(rel.max())


def gaussian_norm_sampler(model: CovarianceModel):
    """Sampler of ``||x||`` for ``x ~ N(0, R)``: ``sqrt(sum lam_i z_i^2)``."""
    lam = model.eigenvalues

    def draw(rng: np.random.Generator, size: int) -> np.ndarray:
        z = rng.standard_normal((size, lam.size))
        return np.sqrt((z * z) @ lam)

    return draw


def angular_discretize_sample(
    model: CovarianceModel,
    norm_source: Union[str, Sequence[float], np.ndarray] = "gaussian",
    seed: int = 0,
    size: Optional[int] = None,
) -> np.ndarray:
    """Draw ``x = s * r * v`` from the angular-discretisation model.

    ``s`` is a fair random sign, ``v`` is eigenvector ``e_i`` with
    probability ``lam_i / Tr(R)`` and ``r`` comes from ``norm_source``:
    ``"gaussian"`` draws ``||x||`` for ``x ~ N(0, R)``; an array of recorded
    norms is resampled with replacement.  Returns one vector, or a
    ``(size, L)`` array when ``size`` is given.
    """
    p = model.direction_probs
    rng = rng_from_seed(seed)
    n = 1 if size is None else int(size)
    signs = rng.choice(np.array([-1.0, 1.0]), size=n)
    dirs = rng.choice(p.size, size=n, p=p)
    if isinstance(norm_source, str):
        if norm_source != "gaussian":
            raise ValueError(f"unknown norm source {norm_source!r}")
        r = gaussian_norm_sampler(model)(rng, n)
    else:
        pool = np.asarray(norm_source, dtype=float)
        if pool.size == 0:
            raise ValueError("empty norm pool")
        r = rng.choice(pool, size=n)
    out = (signs * r)[:, None] * model.eigenvectors[:, dirs].T
    return out[0] if size is None else out


def estimate_B(samples) -> np.ndarray:
    """Empirical ``E[s s^T / s^T s]``; all-zero samples are skipped."""
    S = np.atleast_2d(np.asarray(samples, dtype=float))
    sq = np.einsum("ij,ij->i", S, S)
    keep = sq > 0
    if not keep.any():
        raise ValueError("all samples are zero")
    U = S[keep] / np.sqrt(sq[keep])[:, None]
    B = U.T @ U / U.shape[0]
    return 0.5 * (B + B.T)


def steady_S(model: CovarianceModel, gain: np.ndarray) -> np.ndarray:
    """``S = E(G^{1/2} R G^{1/2})`` with the gain treated as a constant."""
    h = np.sqrt(np.asarray(gain, dtype=float))
    return h[:, None] * model.R * h[None, :]


def predict_steady_gain(system: SparseSystem, p: GainParams, samples=None) -> np.ndarray:
    """Steady-state mean gain diagonal.

    Without ``samples`` this is the gain evaluated at ``w_opt`` (treats the
    steady-state weights as sitting at the optimum).  With ``samples``, an
    ``(L,)`` tail average or ``(K, L)`` array of gain vectors observed in
    steady state, their mean is returned instead.
    """
    if samples is None:
        return compute_gain(system.weights, p)
    g = np.asarray(samples, dtype=float)
    if g.ndim == 2:
        g = g.mean(axis=0)
    if g.shape != (system.length,):
        raise ValueError("gain samples do not match the system length")
    return g


@dataclass
class SteadyStateReport:
    predicted_mean: np.ndarray
    predicted_bias: np.ndarray
    steady_gain: np.ndarray
    s_matrix: np.ndarray

    def to_dict(self) -> dict:
        return {
            "predicted_mean": self.predicted_mean.tolist(),
            "predicted_bias": self.predicted_bias.tolist(),
            "steady_gain": self.steady_gain.tolist(),
            "s_matrix": self.s_matrix.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SteadyStateReport":
        return cls(
            np.array(data["predicted_mean"], dtype=float),
            np.array(data["predicted_bias"], dtype=float),
            np.array(data["steady_gain"], dtype=float),
            np.array(data["s_matrix"], dtype=float),
        )

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SteadyStateReport":
        return cls.from_dict(json.loads(Path(path).read_text()))


def predict_bias(
    system: SparseSystem,
    p: GainParams,
    rho: float,
    mu: float,
    *,
    gain=None,
    sigma_x2: float = 1.0,
) -> SteadyStateReport:
    """White-input steady-state prediction for ZA-PNLMS.

    Active taps settle at ``w_opt,i - (rho/mu) * sgn(w_opt,i) / g_i`` where
    ``g_i`` is the steady mean gain; inactive taps are predicted unbiased.
    ``gain`` defaults to :func:`predict_steady_gain` at ``w_opt``.
    """
    _require_stable(mu)
    if rho < 0:
        raise ValueError("rho must be non-negative")
    g = predict_steady_gain(system, p) if gain is None else np.asarray(gain, dtype=float)
    w_opt = system.weights
    bias = (rho / mu) * np.sign(w_opt) / g
    return SteadyStateReport(
        predicted_mean=w_opt - bias,
        predicted_bias=bias,
        steady_gain=g,
        s_matrix=sigma_x2 * np.diag(g),
    )


def predict_mean_general(
    system: SparseSystem,
    S_inf,
    gain_expectations,
    rho: float,
    mu: float,
    sign_expectation=None,
) -> np.ndarray:
    """Steady-state mean weights for an arbitrary input correlation.

    ``w_opt - (rho/mu) Tr(S) E(G^{1/2}) S^{-1} E(G^{-1/2}) E(sgn w)``, with
    ``E(G^{+-1/2})`` taken as elementwise powers of the mean gain.
    ``sign_expectation`` defaults to ``sgn(w_opt)`` (zero on inactive taps).
    """
    _require_stable(mu)
    S = np.asarray(S_inf, dtype=float)
    g = np.asarray(gain_expectations, dtype=float)
    sgn = np.sign(system.weights) if sign_expectation is None else np.asarray(sign_expectation, float)
    if rho == 0:
        return system.weights.copy()
    try:
        y = np.linalg.solve(S, gain_inv_sqrt(g) * sgn)
    except np.linalg.LinAlgError as exc:
        raise ValueError("steady-state S matrix is singular") from exc
    return system.weights - (rho / mu) * np.trace(S) * gain_sqrt(g) * y


def predict_report(
    system: SparseSystem,
    p: GainParams,
    rho: float,
    mu: float,
    model: Optional[CovarianceModel] = None,
    *,
    gain=None,
) -> SteadyStateReport:
    """White input (``model`` absent or ``sigma^2 I``) goes through
    :func:`predict_bias`; anything else through :func:`predict_mean_general`."""
    if model is None:
        return predict_bias(system, p, rho, mu, gain=gain)
    R = model.R
    sigma2 = R[0, 0]
    if np.allclose(R, sigma2 * np.eye(model.length), rtol=0, atol=1e-14):
        return predict_bias(system, p, rho, mu, gain=gain, sigma_x2=sigma2)
    _require_stable(mu)
    g = predict_steady_gain(system, p) if gain is None else np.asarray(gain, dtype=float)
    S = steady_S(model, g)
    mean = predict_mean_general(system, S, g, rho, mu)
    return SteadyStateReport(mean, system.weights - mean, g, S)


def projection_residual(x, g, w) -> float:
    """Relative size of the projection term dropped from the exact ZA update,
    ``||x x^T G sgn(w) / (x^T G x)|| / ||sgn(w)||`` (0 when ``w`` is zero)."""
    x = np.asarray(x, dtype=float)
    g = np.asarray(g, dtype=float)
    sg = np.sign(np.asarray(w, dtype=float))
    if not np.any(x):
        raise ValueError("projection residual is undefined for a zero regressor")
    ns = np.linalg.norm(sg)
    if ns == 0:
        return 0.0
    xg = g * x
    term = x * (np.dot(xg, sg) / np.dot(xg, x))
    return float(np.linalg.norm(term) / ns)
