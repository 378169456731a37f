"""Compactly supported smoothing kernels.

Every built-in kernel is a polynomial restricted to ``[-1, 1]``.  Higher
order kernels are obtained by multiplying a symmetric base kernel by an even
polynomial chosen so that the low-order moments vanish.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from ._quadrature import gauss_legendre

__all__ = [
    "Kernel1D",
    "ProductKernel",
    "epanechnikov",
    "uniform",
    "eval_kernel",
    "kernel_moment",
    "kernel_roughness",
    "construct_higher_order",
    "kernel_from_config",
]

# 8 panels x 16 nodes on [-1, 1]
_MOMENT_NODES = 16
_MOMENT_PANELS = 8


@dataclass(frozen=True)
class Kernel1D:
    """Polynomial kernel on ``[-radius, radius]``.

    ``coefficients`` are in ascending powers of ``u``.
    """

    family: str
    order: int
    coefficients: tuple[float, ...]
    support_radius: float = 1.0

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("kernel order must be a positive integer")
        if self.support_radius <= 0:
            raise ValueError("support radius must be positive")
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        inside = np.abs(u) <= self.support_radius
        return np.where(inside, P.polyval(u, self.coefficients), 0.0)

    @property
    def is_symmetric(self) -> bool:
        return all(c == 0.0 for c in self.coefficients[1::2])

    def sup_norm(self) -> float:
        r = self.support_radius
        crit = P.polyroots(P.polyder(self.coefficients)) if len(self.coefficients) > 1 else []
        cand = [-r, r] + [c.real for c in np.atleast_1d(crit) if abs(c.imag) < 1e-12 and abs(c.real) <= r]
        return float(np.max(np.abs(P.polyval(np.asarray(cand), self.coefficients))))


def epanechnikov() -> Kernel1D:
    return Kernel1D("epanechnikov", 2, (0.75, 0.0, -0.75))


def uniform() -> Kernel1D:
    return Kernel1D("uniform", 2, (0.5,))


def eval_kernel(kernel: Kernel1D, u):
    """K(u); zero outside the support."""
    return kernel(u)


def _integrate_poly(kernel: Kernel1D, coeffs) -> float:
    r = kernel.support_radius
    x, w = gauss_legendre(-r, r, _MOMENT_NODES, _MOMENT_PANELS)
    return float(np.sum(w * P.polyval(x, coeffs)))


def kernel_moment(kernel: Kernel1D, j: int) -> float:
    """``int u^j K(u) du`` over the support."""
    if j < 0:
        raise ValueError("moment index must be non-negative")
    shift = np.zeros(j + 1)
    shift[j] = 1.0
    return _integrate_poly(kernel, P.polymul(shift, kernel.coefficients))


def kernel_roughness(kernel: Kernel1D) -> float:
    """``int K(u)^2 du``."""
    return _integrate_poly(kernel, P.polymul(kernel.coefficients, kernel.coefficients))


def construct_higher_order(base: Kernel1D, target_order: int) -> Kernel1D:
    """Return ``base(u) * p(u)`` with ``p`` even and moments ``1..target_order-1`` zero.

    The coefficients of ``p`` solve the Hankel system
    ``sum_r a_r mu_{2j+2r} = [j == 0]`` for ``j = 0..target_order/2 - 1``.
    """
    if target_order % 2 or target_order < 2:
        raise ValueError("target order must be an even integer >= 2")
    if target_order < base.order:
        raise ValueError(f"target order {target_order} below base order {base.order}")
    if target_order == base.order:
        return base
    if not base.is_symmetric:
        raise ValueError("base kernel must be symmetric")

    s = target_order // 2
    mu = [kernel_moment(base, m) for m in range(0, 4 * s - 1)]
    hankel = np.array([[mu[2 * j + 2 * r] for r in range(s)] for j in range(s)])
    rhs = np.zeros(s)
    rhs[0] = 1.0
    if np.linalg.cond(hankel) > 1e14:
        raise np.linalg.LinAlgError("singular moment system; degenerate base kernel")
    a = np.linalg.solve(hankel, rhs)
    even = np.zeros(2 * s - 1)
    even[::2] = a
    coeffs = P.polymul(base.coefficients, even)
    return Kernel1D("polynomial", target_order, tuple(coeffs), base.support_radius)


_BASES = {"epanechnikov": epanechnikov, "uniform": uniform}


def kernel_from_config(spec: dict) -> Kernel1D:
    """Build a kernel from ``{"family": ..., "order": N}``.

    ``polynomial`` is an Epanechnikov-based higher-order kernel.
    """
    family = spec.get("family", "epanechnikov")
    order = int(spec.get("order", 2))
    if family == "polynomial":
        return construct_higher_order(epanechnikov(), order)
    if family not in _BASES:
        raise ValueError(f"unknown kernel family {family!r}")
    return construct_higher_order(_BASES[family](), order)


@dataclass(frozen=True)
class ProductKernel:
    """Tensor product of one-dimensional kernels, one per axis."""

    factors: tuple[Kernel1D, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if len(self.factors) < 1:
            raise ValueError("product kernel needs at least one factor")

    @classmethod
    def repeat(cls, kernel: Kernel1D, d: int) -> "ProductKernel":
        return cls((kernel,) * d)

    @property
    def d(self) -> int:
        return len(self.factors)

    @property
    def order(self) -> int:
        return min(k.order for k in self.factors)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if u.shape[-1] != self.d:
            raise ValueError(f"expected last axis of length {self.d}, got {u.shape[-1]}")
        out = self.factors[0](u[..., 0])
        for ell in range(1, self.d):
            out = out * self.factors[ell](u[..., ell])
        return out

    @property
    def support_radius(self) -> float:
        return max(k.support_radius for k in self.factors)


def as_product(kernels: Kernel1D | ProductKernel | Sequence[Kernel1D], d: int) -> ProductKernel:
    if isinstance(kernels, ProductKernel):
        pk = kernels
    elif isinstance(kernels, Kernel1D):
        pk = ProductKernel.repeat(kernels, d)
    else:
        pk = ProductKernel(tuple(kernels))
    if pk.d != d:
        raise ValueError(f"kernel dimension {pk.d} does not match data dimension {d}")
    return pk
