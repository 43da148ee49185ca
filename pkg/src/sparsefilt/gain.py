"""Proportionate gain diagonal of the PNLMS family.

Every function accepts either a single weight vector of shape ``(L,)`` or a
batch of shape ``(..., L)``; the gain is computed along the last axis.  The
gain is always evaluated from the current iterate, so callers recompute it
every sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class GainParams:
    """``rho_g`` is the proportionality floor, ``delta`` the start-up floor."""

    rho_g: float = 0.01
    delta: float = 0.001

    def __post_init__(self) -> None:
        if not 0 < self.rho_g <= 1:
            raise ValueError(f"rho_g must lie in (0, 1], got {self.rho_g}")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")


def compute_gamma(w: np.ndarray, p: GainParams) -> np.ndarray:
    """Unnormalised per-tap gains.

    ``gamma_l = max(rho_g * max(delta, |w_0|, ..., |w_{L-1}|), |w_l|)``
    """
    a = np.abs(np.asarray(w, dtype=float))
    floor = p.rho_g * np.maximum(p.delta, a.max(axis=-1, keepdims=True))
    return np.maximum(floor, a)


def compute_gain(w: np.ndarray, p: GainParams) -> np.ndarray:
    """Gain diagonal ``g_l = gamma_l / sum(gamma)``; positive, sums to one."""
    gamma = compute_gamma(w, p)
    return gamma / gamma.sum(axis=-1, keepdims=True)


def _check_positive(g: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=float)
    if not np.all(g > 0):
        raise ValueError("gain elements must be strictly positive")
    return g


def gain_sqrt(g: np.ndarray) -> np.ndarray:
    return np.sqrt(_check_positive(g))


def gain_inv_sqrt(g: np.ndarray) -> np.ndarray:
    return 1.0 / np.sqrt(_check_positive(g))
