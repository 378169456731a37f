"""Censored samples and product-limit estimation of the censoring survival."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .psi import PsiSpec

__all__ = [
    "CensoredSample",
    "StepSurvival",
    "fit_censoring_survival",
    "eval_survival",
    "empirical_z_survival",
    "ipcw_response",
]


@dataclass(frozen=True)
class CensoredSample:
    """Observed triples ``(z_i, delta_i, x_i)``.

    ``z`` is ``min(Y, C)``, ``delta`` is ``1{Y <= C}`` and ``x`` has shape
    ``(n, d)``.
    """

    z: np.ndarray
    delta: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        z = np.asarray(self.z, dtype=float).ravel()
        delta = np.asarray(self.delta)
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if z.size < 1:
            raise ValueError("empty sample")
        if x.ndim != 2 or x.shape[0] != z.size or delta.size != z.size:
            raise ValueError("z, delta and x must describe the same number of rows")
        if not np.all(np.isfinite(z)) or np.any(z < 0):
            raise ValueError("z must be finite and non-negative")
        if not np.all(np.isfinite(x)):
            raise ValueError("covariates must be finite")
        if not np.all((delta == 0) | (delta == 1)):
            raise ValueError("delta must be 0 or 1")
        for name, arr in (("z", z), ("delta", delta.astype(np.int8).ravel()), ("x", x)):
            arr = np.array(arr, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return self.z.size

    @property
    def d(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class StepSurvival:
    """Right-continuous non-increasing step function starting at 1.

    ``values[j]`` holds on ``[jump_times[j], jump_times[j+1])``.
    """

    jump_times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.jump_times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("jump_times and values must be 1-d and of equal length")
        if np.any(np.diff(t) <= 0):
            raise ValueError("jump_times must be strictly increasing")
        if np.any((v < 0) | (v > 1)) or np.any(np.diff(v) > 0):
            raise ValueError("values must be non-increasing within [0, 1]")
        t.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "jump_times", t)
        object.__setattr__(self, "values", v)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        idx = np.searchsorted(self.jump_times, y, side="right")
        padded = np.concatenate(([1.0], self.values))
        return padded[idx]

    def to_dict(self) -> dict:
        return {"jump_times": self.jump_times.tolist(), "values": self.values.tolist()}


def _at_risk(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    zs = np.sort(z)
    return z.size - np.searchsorted(zs, y, side="left")


def _collapse_ties(times: np.ndarray, values: np.ndarray) -> StepSurvival:
    # keep the last cumulative value at each distinct time
    if times.size == 0:
        return StepSurvival(times, values)
    last = np.r_[times[1:] != times[:-1], True]
    return StepSurvival(times[last], values[last])


def fit_censoring_survival(sample: CensoredSample) -> StepSurvival:
    """Kaplan-Meier estimator of the censoring survival ``G(y) = P(C > y)``.

    Each censored observation ``Z_i`` contributes the factor
    ``(N(Z_i) - 1) / N(Z_i)`` with ``N(y) = #{j : Z_j >= y}``; tied censored
    times each contribute their own factor.  The last observation, when
    censored, drives the estimate to zero.
    """
    z = sample.z
    cens = np.sort(z[sample.delta == 0], kind="stable")
    if cens.size == 0:
        return StepSurvival(np.empty(0), np.empty(0))
    risk = _at_risk(z, cens).astype(float)
    factors = (risk - 1.0) / risk
    return _collapse_ties(cens, np.cumprod(factors))


def eval_survival(s: Union[StepSurvival, Callable], y):
    return s(y)


def empirical_z_survival(sample: CensoredSample) -> StepSurvival:
    """Empirical ``P(Z > t)``."""
    zs = np.sort(sample.z)
    times = np.unique(zs)
    above = sample.n - np.searchsorted(zs, times, side="right")
    return StepSurvival(times, above / sample.n)


def ipcw_response(sample: CensoredSample, g, psi: PsiSpec, power: int = 1) -> np.ndarray:
    """Synthetic responses ``delta_i psi(Z_i)^p / G(Z_i)^p`` with ``0/0 = 0``.

    ``g`` is a fitted :class:`StepSurvival` or any callable survival function.
    """
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    num = sample.delta * psi(sample.z) ** power
    den = np.asarray(g(sample.z), dtype=float) ** power
    bad = (num != 0) & (den <= 0)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(
            f"censoring survival is zero at uncensored observation {i} (z={sample.z[i]}); "
            "inconsistent censoring model"
        )
    out = np.zeros(sample.n)
    keep = num != 0
    out[keep] = num[keep] / den[keep]
    return out
