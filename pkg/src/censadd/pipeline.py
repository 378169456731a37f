"""End-to-end fit: censored sample to additive components with normal bands."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .additive import (
    AdditiveFit,
    EvaluationDomain,
    IntegrationDensity,
    QuadratureSpec,
    default_domain,
    fit_components,
    uniform_density,
)
from .density import DEFAULT_FLOOR, DensityModel, bandwidth_h1, marginal_kde
from .inference import Z95, effective_constant, h_plugin, normal_ci, sigma_plugin, undersmoothed_bandwidth
from .kernels import Kernel1D, epanechnikov
from .psi import PsiSpec
from .regression import RegressionSurface, bandwidth_h2, fit_surface
from .survival import CensoredSample

__all__ = ["FitSettings", "resolve_bandwidths", "fit_additive", "sigma_hat_on"]


@dataclass
class FitSettings:
    """Everything needed to turn a censored sample into bands.

    Bandwidths: explicit ``h`` wins; otherwise ``c n^(-1/(2k+1))``, divided by
    ``sqrt(log n)`` when ``undersmooth`` is set.  The density bandwidth is
    explicit ``density_h``, else ``c' (log n / n)^(1/(2k'+d))`` when
    ``c_prime`` is given, else the largest regression bandwidth.
    """

    psi: PsiSpec
    kernel: Kernel1D = field(default_factory=epanechnikov)
    density_kernel: Optional[Kernel1D] = None
    c: Optional[float] = None
    h: Optional[Sequence[float]] = None
    undersmooth: bool = False
    c_prime: Optional[float] = None
    density_h: Optional[float] = None
    qs: Optional[Sequence[IntegrationDensity]] = None
    grids: Optional[Sequence[Sequence[float]]] = None
    grid_points: int = 81
    grid_fraction: float = 0.9
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)
    z: float = Z95
    density_floor: float = DEFAULT_FLOOR
    with_sigma: bool = True

    @property
    def k(self) -> int:
        return self.kernel.order

    def resolved_density_kernel(self) -> Kernel1D:
        return self.density_kernel if self.density_kernel is not None else self.kernel


def resolve_bandwidths(settings: FitSettings, n: int, d: int):
    """Regression bandwidths per axis and the density bandwidth."""
    k = settings.k
    if settings.h is not None:
        h = np.broadcast_to(np.asarray(settings.h, dtype=float), (d,)).copy()
    elif settings.c is not None:
        rule = undersmoothed_bandwidth if settings.undersmooth else bandwidth_h2
        h = np.full(d, rule(n, settings.c, k))
    else:
        raise ValueError("give either explicit bandwidths h or a constant c")
    if settings.density_h is not None:
        hn = float(settings.density_h)
    elif settings.c_prime is not None:
        hn = bandwidth_h1(n, settings.c_prime, settings.resolved_density_kernel().order, d)
    else:
        hn = float(h.max())
    return h, hn


def sigma_hat_on(surface: RegressionSurface, qs, ell: int, grid, quad: QuadratureSpec) -> np.ndarray:
    """Plug-in standard deviation with the estimated ``H``, ``f`` and ``f_l``."""
    if not isinstance(surface.f_model, DensityModel):
        raise ValueError("plug-in sigma needs a kernel density estimate on the surface")
    f_hat = surface.f_model
    f_ell = marginal_kde(f_hat.sample_x[:, ell], f_hat.kernel.factors[ell], f_hat.bandwidth, f_hat.floor)
    n = surface.n
    k = surface.kernel.factors[ell].order
    c_eff = effective_constant(surface.bandwidths[ell], n, k)
    return sigma_plugin(
        h_plugin(surface),
        qs,
        ell,
        surface.kernel.factors[ell],
        c_eff,
        f_hat,
        f_ell,
        grid,
        quad=quad,
        floor=max(f_hat.floor, 1e-12),
    )


def fit_additive(sample: CensoredSample, settings: FitSettings, g_source="kaplan_meier", f_source="kde"):
    """Fit the surface, its additive components and (optionally) the bands.

    Returns ``(fit, surface)``.
    """
    d = sample.d
    qs = list(settings.qs) if settings.qs is not None else [uniform_density(-1.0, 1.0)] * d
    if len(qs) != d:
        raise ValueError(f"config gives {len(qs)} integration densities for d = {d}")
    h, hn = resolve_bandwidths(settings, sample.n, d)
    surface = fit_surface(
        sample,
        settings.kernel,
        h,
        settings.psi,
        g_source=g_source,
        f_source=f_source,
        density_kernel=settings.resolved_density_kernel(),
        density_bandwidth=hn,
        density_floor=settings.density_floor,
    )
    if settings.grids is not None:
        if len(settings.grids) != d:
            raise ValueError(f"config gives {len(settings.grids)} grids for d = {d}")
        domain = EvaluationDomain(tuple(q.support for q in qs), tuple(np.asarray(g, float) for g in settings.grids))
    else:
        domain = default_domain(qs, settings.grid_points, settings.grid_fraction)
    fit = fit_components(surface, qs, domain, settings.quad)
    k = settings.k
    fit.metadata.update(
        {
            "undersmoothed": bool(settings.undersmooth),
            "c": settings.c,
            "c_effective": [effective_constant(hl, sample.n, k) for hl in h],
            "k": k,
            "k_prime": settings.resolved_density_kernel().order,
            "z": settings.z,
            "bandwidths": h.tolist(),
            "density_bandwidth": hn,
            "psi": settings.psi.to_dict(),
        }
    )
    if not settings.with_sigma:
        return fit, surface
    if not settings.undersmooth:
        fit.diagnostics["warnings"].append("bandwidth is not undersmoothed: the intervals ignore a non-vanishing bias")
    fit.sigma, fit.ci_lo, fit.ci_hi = [], [], []
    for ell in range(d):
        if np.any(sample.delta):
            s = sigma_hat_on(surface, qs, ell, domain.grids[ell], settings.quad)
        else:
            s = np.zeros_like(fit.grids[ell])
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            lo, hi = normal_ci(fit.eta[ell], s, sample.n, k, settings.z, undersmoothed=settings.undersmooth)
        fit.sigma.append(s)
        fit.ci_lo.append(lo)
        fit.ci_hi.append(hi)
    return fit, surface
