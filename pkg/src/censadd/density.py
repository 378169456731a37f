"""Kernel density estimation of the covariate density."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kernels import Kernel1D, ProductKernel, as_product

__all__ = [
    "DensityModel",
    "bandwidth_h1",
    "fit_kde",
    "marginal_kde",
    "floored_eval",
    "kernel_sums",
]

DEFAULT_FLOOR = 1e-12
_CHUNK = 256


def bandwidth_h1(n: int, c_prime: float, k_prime: int, d: int) -> float:
    """``c' (log n / n)^(1 / (2k' + d))``."""
    if n < 2:
        raise ValueError("bandwidth rule needs n >= 2")
    if c_prime <= 0:
        raise ValueError("c' must be positive")
    return float(c_prime * (np.log(n) / n) ** (1.0 / (2 * k_prime + d)))


def as_points(x, d: int):
    """Coerce ``x`` to an ``(m, d)`` array; also report whether it was a single point."""
    x = np.asarray(x, dtype=float)
    if d == 1:
        return x.reshape(-1, 1), x.ndim == 0
    if x.ndim == 1:
        if x.size != d:
            raise ValueError(f"expected a point of dimension {d}, got {x.size}")
        return x.reshape(1, d), True
    if x.ndim != 2 or x.shape[1] != d:
        raise ValueError(f"expected points of shape (m, {d}), got {x.shape}")
    return x, False


class _SortedData:
    """Data sorted along the first axis, for compact-support pruning."""

    def __init__(self, x: np.ndarray):
        self.order = np.argsort(x[:, 0], kind="stable")
        self.x = np.ascontiguousarray(x[self.order])
        self.x.setflags(write=False)
        self.first = self.x[:, 0]


def kernel_sums(queries, data: _SortedData, kernel: ProductKernel, bandwidths, coef) -> np.ndarray:
    """``sum_i coef_i prod_l K_l((q_l - X_il) / h_l) / h_l`` for every query row.

    ``coef`` is indexed in the data's sorted order.  Only data whose first
    coordinate lies within the kernel support of a query chunk are visited.
    """
    q = np.atleast_2d(np.asarray(queries, dtype=float))
    h = np.asarray(bandwidths, dtype=float)
    d = kernel.d
    if q.shape[1] != d:
        raise ValueError(f"query dimension {q.shape[1]} does not match {d}")
    out = np.zeros(q.shape[0])
    if q.shape[0] == 0:
        return out
    qorder = np.argsort(q[:, 0], kind="stable")
    reach = kernel.factors[0].support_radius * h[0]
    for start in range(0, q.shape[0], _CHUNK):
        rows = qorder[start : start + _CHUNK]
        block = q[rows]
        lo = np.searchsorted(data.first, block[:, 0].min() - reach, side="left")
        hi = np.searchsorted(data.first, block[:, 0].max() + reach, side="right")
        if hi <= lo:
            continue
        xs = data.x[lo:hi]
        w = kernel.factors[0]((block[:, None, 0] - xs[None, :, 0]) / h[0]) / h[0]
        for ell in range(1, d):
            w = w * (kernel.factors[ell]((block[:, None, ell] - xs[None, :, ell]) / h[ell]) / h[ell])
        out[rows] = np.sum(w * coef[None, lo:hi], axis=1)
    return out


@dataclass(frozen=True, eq=False)
class DensityModel:
    """``f_n(x) = (1 / (n h^d)) sum_j K((x - X_j) / h)`` with a common bandwidth."""

    sample_x: np.ndarray
    kernel: ProductKernel
    bandwidth: float
    floor: float = DEFAULT_FLOOR
    _data: _SortedData = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.sample_x, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if self.bandwidth <= 0:
            raise ValueError("bandwidth must be positive")
        if self.floor < 0:
            raise ValueError("floor must be non-negative")
        if x.shape[1] != self.kernel.d:
            raise ValueError(f"kernel dimension {self.kernel.d} does not match data dimension {x.shape[1]}")
        object.__setattr__(self, "sample_x", x)
        object.__setattr__(self, "_data", _SortedData(x))

    @property
    def n(self) -> int:
        return self.sample_x.shape[0]

    @property
    def d(self) -> int:
        return self.sample_x.shape[1]

    def __call__(self, x) -> np.ndarray:
        pts, single = as_points(x, self.d)
        coef = np.full(self.n, 1.0 / self.n)
        h = np.full(self.d, self.bandwidth)
        vals = kernel_sums(pts, self._data, self.kernel, h, coef)
        return float(vals[0]) if single else vals

    def floored(self, x):
        """Evaluate with the floor applied; also return how many values were floored."""
        raw = np.atleast_1d(self(x))
        if self.floor <= 0:
            return raw, 0
        hit = raw < self.floor
        return np.where(hit, self.floor, raw), int(hit.sum())


def fit_kde(x, kernel: ProductKernel | Kernel1D, h: float, floor: float = DEFAULT_FLOOR) -> DensityModel:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    return DensityModel(x, as_product(kernel, x.shape[1]), float(h), floor)


def marginal_kde(x_col, kernel: Kernel1D, h: float, floor: float = DEFAULT_FLOOR) -> DensityModel:
    x_col = np.asarray(x_col, dtype=float).reshape(-1, 1)
    return DensityModel(x_col, ProductKernel((kernel,)), float(h), floor)


def floored_eval(model: DensityModel, x):
    """``max(f_n(x), floor)`` when the floor is positive, raw value otherwise."""
    vals, _ = model.floored(x)
    _, single = as_points(x, model.d)
    return float(vals[0]) if single else vals
