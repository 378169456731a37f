"""Inverse-probability-of-censoring weighted kernel regression.

The estimator of ``E[psi(Y) | X = x]`` is

    m(x) = sum_i W_i(x) delta_i psi(Z_i) / G(Z_i),
    W_i(x) = prod_l K_l((x_l - X_il) / h_l) / h_l / (n f(X_i)),

where ``G`` is the Kaplan-Meier estimate of the censoring survival (or a
known survival function) and ``f`` a kernel estimate of the covariate density
evaluated at the data points (or a known density).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .density import DEFAULT_FLOOR, DensityModel, _SortedData, as_points, fit_kde, kernel_sums
from .kernels import Kernel1D, ProductKernel, as_product
from .psi import PsiSpec
from .survival import CensoredSample, StepSurvival, fit_censoring_survival, ipcw_response

__all__ = [
    "PsiSpec",
    "RegressionSurface",
    "bandwidth_h2",
    "fit_surface",
    "eval_surface",
    "weighted_estimator",
]


def bandwidth_h2(n: int, c: float, k: int) -> float:
    """``c n^(-1 / (2k + 1))``."""
    if n < 1:
        raise ValueError("n must be positive")
    if c <= 0:
        raise ValueError("c must be positive")
    return float(c * n ** (-1.0 / (2 * k + 1)))


@dataclass(frozen=True, eq=False)
class RegressionSurface:
    """A fitted weighted kernel regression surface.

    ``numerators`` are the per-row responses (synthetic IPCW responses for a
    fitted surface) and ``denominators`` are ``n f(X_i)``; both are stored in
    the original row order.
    """

    x: np.ndarray
    kernel: ProductKernel
    bandwidths: np.ndarray
    numerators: np.ndarray
    denominators: np.ndarray
    psi: Optional[PsiSpec] = None
    g_model: Union[StepSurvival, Callable, None] = None
    f_model: Union[DensityModel, Callable, None] = None
    sample: Optional[CensoredSample] = None
    diagnostics: dict = field(default_factory=dict)
    _data: _SortedData = field(init=False, repr=False)
    _coef: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        h = np.asarray(self.bandwidths, dtype=float).ravel()
        if h.size != self.kernel.d or np.any(h <= 0):
            raise ValueError("need one positive bandwidth per axis")
        object.__setattr__(self, "bandwidths", h)
        data = _SortedData(np.asarray(self.x, dtype=float))
        object.__setattr__(self, "_data", data)
        coef = np.zeros(self.x.shape[0])
        num = np.asarray(self.numerators, dtype=float)
        den = np.asarray(self.denominators, dtype=float)
        keep = num != 0
        if np.any(den[keep] == 0):
            raise ZeroDivisionError("density is zero at a data point with a non-zero response; use a positive floor")
        coef[keep] = num[keep] / den[keep]
        object.__setattr__(self, "_coef", coef)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def coef(self) -> np.ndarray:
        """Per-row weight ``numerator_i / (n f(X_i))`` in original row order."""
        return self._coef

    def __call__(self, x):
        pts, single = as_points(x, self.d)
        vals = kernel_sums(pts, self._data, self.kernel, self.bandwidths, self._coef[self._data.order])
        return float(vals[0]) if single else vals

    def axis_factors(self, ell: int, points) -> np.ndarray:
        """Matrix ``K_l((p - X_il) / h_l) / h_l`` of shape ``(len(points), n)``."""
        p = np.asarray(points, dtype=float).ravel()
        h = self.bandwidths[ell]
        return self.kernel.factors[ell]((p[:, None] - self.x[None, :, ell]) / h) / h

    def with_numerators(self, numerators) -> "RegressionSurface":
        """Same weights, different per-row responses."""
        return replace(self, numerators=np.asarray(numerators, dtype=float), diagnostics=dict(self.diagnostics))


def eval_surface(surface: RegressionSurface, x):
    return surface(x)


def weighted_estimator(x, data_x, responses, kernel: ProductKernel, bandwidths, denominators):
    """Plain weighted kernel estimator ``sum_i prod K / h * r_i / denom_i``."""
    surf = RegressionSurface(
        np.asarray(data_x, dtype=float),
        kernel,
        np.asarray(bandwidths, dtype=float),
        np.asarray(responses, dtype=float),
        np.asarray(denominators, dtype=float),
    )
    return surf(x)


def _assumption_notes(kernel: ProductKernel, density_kernel: Optional[ProductKernel], d: int) -> list[str]:
    notes = []
    if density_kernel is not None:
        k, kp = kernel.order, density_kernel.order
        if not kp > k * d:
            notes.append(
                f"density kernel order {kp} does not exceed k*d = {k * d}; "
                "the smoothness/order requirement on the density estimate is violated"
            )
    return notes


def fit_surface(
    sample: CensoredSample,
    kernels: Union[Kernel1D, ProductKernel, Sequence[Kernel1D]],
    bandwidths,
    psi: PsiSpec,
    g_source: Union[str, Callable] = "kaplan_meier",
    f_source: Union[str, Callable] = "kde",
    density_kernel: Union[Kernel1D, ProductKernel, None] = None,
    density_bandwidth: Optional[float] = None,
    density_floor: float = DEFAULT_FLOOR,
) -> RegressionSurface:
    """Fit the IPCW regression surface.

    Parameters
    ----------
    sample : CensoredSample
    kernels : Kernel1D, ProductKernel or sequence of Kernel1D
        Regression kernels ``K_l``; a single kernel is used on every axis.
    bandwidths : float or sequence of float
        ``h_l`` per axis.
    psi : PsiSpec
    g_source : "kaplan_meier" or callable
        Censoring survival: Kaplan-Meier on the sample, or a known function.
    f_source : "kde" or callable
        Covariate density at the data points: a kernel estimate, or a known
        density taking ``(m, d)`` arrays.
    density_kernel, density_bandwidth : optional
        Kernel and common bandwidth of the density estimate. Default to the
        regression kernels and the largest regression bandwidth.
    density_floor : float
        Lower bound applied to ``f(X_i)`` where it is used as a divisor.
    """
    d = sample.d
    pk = as_product(kernels, d)
    h = np.broadcast_to(np.asarray(bandwidths, dtype=float), (d,)).copy()

    if isinstance(g_source, str):
        if g_source != "kaplan_meier":
            raise ValueError(f"unknown g_source {g_source!r}")
        g_model = fit_censoring_survival(sample)
    else:
        g_model = g_source
    synthetic = ipcw_response(sample, g_model, psi, power=1)

    dk = None
    if isinstance(f_source, str):
        if f_source != "kde":
            raise ValueError(f"unknown f_source {f_source!r}")
        dk = as_product(density_kernel if density_kernel is not None else pk, d)
        hn = float(density_bandwidth) if density_bandwidth is not None else float(h.max())
        f_model = fit_kde(sample.x, dk, hn, floor=density_floor)
        f_at_x, floored = f_model.floored(sample.x)
    else:
        f_model = f_source
        raw = np.asarray(f_source(sample.x), dtype=float)
        hit = raw < density_floor if density_floor > 0 else np.zeros(raw.shape, bool)
        f_at_x, floored = np.where(hit, density_floor, raw), int(hit.sum())

    notes = _assumption_notes(pk, dk, d)
    alerts = []
    diagnostics = {
        "n": sample.n,
        "d": d,
        "censoring_rate": float(1.0 - sample.delta.mean()),
        "uncensored_fraction": float(sample.delta.mean()),
        "floored_density_count": floored,
        "max_synthetic_response": float(np.max(np.abs(synthetic))),
        "tau0": float(psi.tau0) if np.isfinite(psi.tau0) else None,
        "tau0_below_max_z": bool(psi.tau0 < sample.z.max()) if np.isfinite(psi.tau0) else None,
        "bandwidths": h.tolist(),
        "density_bandwidth": f_model.bandwidth if isinstance(f_model, DensityModel) else None,
        "warnings": notes,
    }
    if np.isfinite(psi.tau0) and not psi.tau0 < sample.z.max():
        alerts.append(f"tau0 = {psi.tau0} is not below the largest observed time {sample.z.max()}")
    if not np.any(sample.delta):
        alerts.append("fully censored sample: the surface is identically zero")
    for note in alerts:
        warnings.warn(note, stacklevel=2)
    notes.extend(alerts)

    return RegressionSurface(
        x=sample.x,
        kernel=pk,
        bandwidths=h,
        numerators=synthetic,
        denominators=sample.n * f_at_x,
        psi=psi,
        g_model=g_model,
        f_model=f_model,
        sample=sample,
        diagnostics=diagnostics,
    )
