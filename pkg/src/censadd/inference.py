"""Bias, variance and normal confidence intervals for additive components.

With bandwidths ``h_l = c n^(-1/(2k+1))`` the estimated component satisfies

    (n^(k/(2k+1)) (eta_hat - eta) - b) / sigma  ->  N(0, 1)

where ``b`` depends on the ``k``-th derivative of the true component and
``sigma^2 = int K^2 / (c f_l(x_l)) * int H(x) q_{-l}^2 / f(x_{-l} | x_l) dx_{-l}``
with ``H(x) = E[psi(Y)^2 / G(Y) | X = x]``.
"""

from __future__ import annotations

import math
import warnings
from typing import Callable, Sequence

import numpy as np

from ._quadrature import gauss_legendre
from .additive import IntegrationDensity, QuadratureSpec
from .kernels import Kernel1D, kernel_moment, kernel_roughness
from .regression import RegressionSurface
from .survival import ipcw_response

__all__ = [
    "bias_oracle",
    "h_plugin",
    "sigma_plugin",
    "undersmoothed_bandwidth",
    "effective_constant",
    "rate",
    "normal_ci",
    "standardized_stat",
    "mse_expansion",
    "Z95",
]

Z95 = 1.96


def rate(n: int, k: int) -> float:
    """``n^(k / (2k + 1))``."""
    return float(n ** (k / (2 * k + 1)))


def effective_constant(h: float, n: int, k: int) -> float:
    """The constant ``c`` for which ``h = c n^(-1/(2k+1))``."""
    return float(h * n ** (1.0 / (2 * k + 1)))


def bias_oracle(
    m_deriv_k: Callable,
    m: Callable,
    q: IntegrationDensity,
    kernel: Kernel1D,
    c: float,
    k: int,
    nodes: int = 32,
    panels: int = 16,
) -> Callable:
    """Asymptotic bias ``b_l(x)`` of the rescaled component estimate.

    ``b(x) = c^k / k! * int u^k K * ((-1)^k m^(k)(x) - int m q^(k))``.

    When ``q`` is smooth enough the last integral uses ``q^(k)`` directly.
    Otherwise (e.g. a uniform ``q``) it is read in the distributional sense,
    ``int m q^(k) = (-1)^k int m^(k) q``, which only needs ``m^(k)``.
    """
    if k != kernel.order:
        raise ValueError(f"k = {k} does not match the kernel order {kernel.order}")
    t, w = gauss_legendre(*q.support, nodes, panels)
    by_parts = q.smoothness < k
    if by_parts:
        dk = np.asarray(m_deriv_k(t), dtype=float)
        inner = float((-1) ** k * np.sum(w * dk * q(t)))
    else:
        inner = float(np.sum(w * m(t) * q.derivative(t, k)))
    scale = c**k / math.factorial(k) * kernel_moment(kernel, k)
    sign = (-1) ** k

    def b(x):
        return scale * (sign * np.asarray(m_deriv_k(np.asarray(x, dtype=float)), dtype=float) - inner)

    b.inner_integral = inner
    b.by_parts = by_parts
    return b


def h_plugin(surface: RegressionSurface) -> RegressionSurface:
    """Weighted estimate of ``H(x)`` from the responses ``delta psi^2 / G^2``."""
    if surface.sample is None or surface.psi is None or surface.g_model is None:
        raise ValueError("surface does not carry its sample, psi and censoring model")
    return surface.with_numerators(ipcw_response(surface.sample, surface.g_model, surface.psi, power=2))


def sigma_plugin(
    h_fn: Callable,
    qs: Sequence[IntegrationDensity],
    ell: int,
    kernel: Kernel1D,
    c: float,
    f_joint: Callable,
    f_marginal: Callable,
    grid,
    quad: QuadratureSpec = QuadratureSpec(),
    floor: float = 1e-12,
) -> np.ndarray:
    """``sigma_l`` on ``grid`` with ``H``, ``f`` and ``f_l`` supplied as functions.

    ``h_fn`` and ``f_joint`` take ``(m, d)`` arrays; ``f_marginal`` takes a
    1-d array.  Estimated or exact pieces can be mixed freely.  The
    conditional density ``f(x) / f_l(x_l)`` is floored where it is used as a
    divisor.
    """
    d = len(qs)
    grid = np.asarray(grid, dtype=float).ravel()
    fl = np.atleast_1d(np.asarray(f_marginal(grid), dtype=float))
    if np.any(fl <= floor):
        warnings.warn(f"marginal density below floor at {int(np.sum(fl <= floor))} grid points", stacklevel=2)
        fl = np.maximum(fl, floor)

    other = [j for j in range(d) if j != ell]
    if other:
        rules = []
        for j in other:
            t, w = gauss_legendre(*qs[j].support, quad.nodes, quad.panels)
            rules.append((t, w * qs[j](t) ** 2))
        sub = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1).reshape(-1, d - 1)
        sub_w = np.ones(1)
        for _, w in rules:
            sub_w = np.multiply.outer(sub_w, w).ravel()
    else:
        sub, sub_w = np.zeros((1, 0)), np.ones(1)

    m = sub.shape[0]
    pts = np.empty((grid.size * m, d))
    pts[:, ell] = np.repeat(grid, m)
    if other:
        pts[:, other] = np.tile(sub, (grid.size, 1))
    hv = np.asarray(h_fn(pts), dtype=float).reshape(grid.size, m)
    cond = np.asarray(f_joint(pts), dtype=float).reshape(grid.size, m) / fl[:, None]
    low = cond < floor
    if np.any(low):
        warnings.warn(f"conditional density floored at {int(low.sum())} of {low.size} quadrature nodes", stacklevel=2)
        cond = np.where(low, floor, cond)
    inner = np.sum(sub_w[None, :] * hv / cond, axis=1)
    var = kernel_roughness(kernel) / (c * fl) * inner
    return np.sqrt(np.maximum(var, 0.0))


def undersmoothed_bandwidth(n: int, c: float, k: int) -> float:
    """``c n^(-1/(2k+1)) (log n)^(-1/2)``, shrinking slightly faster than the MSE-optimal rate."""
    if n < 3:
        raise ValueError("undersmoothing rule needs n >= 3")
    return float(c * n ** (-1.0 / (2 * k + 1)) / math.sqrt(math.log(n)))


def normal_ci(eta_hat, sigma_hat, n: int, k: int, z: float = Z95, undersmoothed: bool = True):
    """Pointwise interval ``eta_hat -/+ z sigma_hat n^(-k/(2k+1))``."""
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if np.any(sigma_hat < 0):
        raise ValueError("sigma must be non-negative")
    if not undersmoothed:
        warnings.warn("bandwidth is not undersmoothed: the intervals ignore a non-vanishing bias", stacklevel=2)
    eta_hat = np.asarray(eta_hat, dtype=float)
    half = z * sigma_hat / rate(n, k)
    return eta_hat - half, eta_hat + half


def standardized_stat(eta_hat, eta_true, b, sigma, n: int, k: int):
    """``(n^(k/(2k+1)) (eta_hat - eta) - b) / sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0):
        raise ValueError("sigma must be positive")
    return (rate(n, k) * (np.asarray(eta_hat) - np.asarray(eta_true)) - np.asarray(b)) / sigma


def mse_expansion(b, sigma):
    """Leading term ``b^2 + sigma^2`` of the rescaled mean squared error."""
    return np.asarray(b) ** 2 + np.asarray(sigma) ** 2
