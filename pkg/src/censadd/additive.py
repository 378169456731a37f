"""Marginal integration of a regression surface into additive components.

For integrating densities ``q_1, ..., q_d`` the component along axis ``l`` is

    eta_l(x_l) = int m(x) q_{-l}(x_{-l}) dx_{-l} - int m(x) q(x) dx

and the additive predictor is ``sum_l eta_l(x_l) + int m q``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from ._quadrature import gauss_legendre
from .regression import RegressionSurface

__all__ = [
    "IntegrationDensity",
    "uniform_density",
    "bump_density",
    "density_from_config",
    "EvaluationDomain",
    "default_domain",
    "QuadratureSpec",
    "quad_integrate",
    "components_on",
    "marginal_component",
    "fit_components",
    "AdditiveFit",
    "additive_predict",
    "true_component_oracle",
]


@dataclass(frozen=True)
class IntegrationDensity:
    """Polynomial density on a compact interval, zero outside.

    ``smoothness`` is the number of derivatives that are continuous on the
    whole real line (zero for a uniform density).
    """

    support: tuple[float, float]
    coefficients: tuple[float, ...]
    smoothness: int
    name: str = "polynomial"

    def __post_init__(self):
        a, b = map(float, self.support)
        if not b > a:
            raise ValueError("empty support")
        object.__setattr__(self, "support", (a, b))
        object.__setattr__(self, "coefficients", tuple(float(c) for c in self.coefficients))
        if abs(self.total_mass() - 1.0) > 1e-10:
            raise ValueError(f"density integrates to {self.total_mass()}, not 1")

    @property
    def poly(self) -> Polynomial:
        return Polynomial(self.coefficients)

    def total_mass(self) -> float:
        anti = self.poly.integ()
        a, b = self.support
        return float(anti(b) - anti(a))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        a, b = self.support
        return np.where((x >= a) & (x <= b), self.poly(x), 0.0)

    def derivative(self, x, order: int):
        """``q^(order)(x)``; only defined when that derivative is continuous."""
        if order > self.smoothness:
            raise ValueError(
                f"{self.name} density has only {self.smoothness} continuous derivatives; "
                f"derivative of order {order} unavailable"
            )
        x = np.asarray(x, dtype=float)
        a, b = self.support
        return np.where((x >= a) & (x <= b), self.poly.deriv(order)(x), 0.0)

    def rule(self, nodes: int, panels: int = 1):
        """Quadrature nodes on the support and weights ``w_t q(t)`` summing to one."""
        t, w = gauss_legendre(*self.support, nodes, panels)
        wq = w * self(t)
        return t, wq / wq.sum()

    def to_dict(self) -> dict:
        return {"name": self.name, "support": list(self.support), "smoothness": self.smoothness}


def uniform_density(a: float = -1.0, b: float = 1.0) -> IntegrationDensity:
    return IntegrationDensity((a, b), (1.0 / (b - a),), 0, "uniform")


def bump_density(a: float = -1.0, b: float = 1.0, power: int = 4) -> IntegrationDensity:
    """Density proportional to ``(1 - t^2)^power`` with ``t`` mapping ``[a, b]`` onto ``[-1, 1]``.

    It has ``power - 1`` continuous derivatives on the real line.
    """
    mid, rad = 0.5 * (a + b), 0.5 * (b - a)
    t = Polynomial([-mid / rad, 1.0 / rad])
    p = (1 - t * t) ** power
    anti = p.integ()
    p = p / (anti(b) - anti(a))
    return IntegrationDensity((a, b), tuple(p.coef), power - 1, f"bump{power}")


def density_from_config(spec: dict) -> IntegrationDensity:
    family = spec.get("family", "uniform")
    a, b = spec.get("support", [-1.0, 1.0])
    if family == "uniform":
        return uniform_density(a, b)
    if family == "bump":
        return bump_density(a, b, int(spec.get("power", 4)))
    raise ValueError(f"unknown integration density family {family!r}")


@dataclass(frozen=True)
class EvaluationDomain:
    """Per-axis compact intervals and evaluation grids inside them."""

    intervals: tuple[tuple[float, float], ...]
    grids: tuple[np.ndarray, ...]

    def __post_init__(self):
        if len(self.intervals) != len(self.grids):
            raise ValueError("one grid per interval")
        grids = []
        for (a, b), g in zip(self.intervals, self.grids):
            g = np.asarray(g, dtype=float).ravel()
            if g.size == 0 or np.any(np.diff(g) <= 0):
                raise ValueError("grids must be non-empty and strictly increasing")
            if g[0] < a or g[-1] > b:
                raise ValueError(f"grid leaves its interval [{a}, {b}]")
            g.setflags(write=False)
            grids.append(g)
        object.__setattr__(self, "grids", tuple(grids))
        object.__setattr__(self, "intervals", tuple(tuple(map(float, iv)) for iv in self.intervals))

    @property
    def d(self) -> int:
        return len(self.grids)


def default_domain(qs: Sequence[IntegrationDensity], points: int = 81, fraction: float = 0.9) -> EvaluationDomain:
    """Equispaced grids over the middle ``fraction`` of each density's support."""
    intervals, grids = [], []
    for q in qs:
        a, b = q.support
        mid, half = 0.5 * (a + b), 0.5 * (b - a) * fraction
        intervals.append((a, b))
        grids.append(np.linspace(mid - half, mid + half, points))
    return EvaluationDomain(tuple(intervals), tuple(grids))


@dataclass(frozen=True)
class QuadratureSpec:
    """Composite Gauss-Legendre resolution used on every integration axis.

    With ``aligned`` set, integrals of a kernel surface against ``q`` are
    taken per observation over the intersection of the kernel support with
    the support of ``q``, where the integrand is a single smooth piece; the
    fixed tensor rule is used otherwise.
    """

    nodes: int = 48
    panels: int = 1
    aligned: bool = True

    def __post_init__(self):
        if self.nodes < 2 or self.panels < 1:
            raise ValueError("need at least 2 nodes and 1 panel per axis")


def quad_integrate(fn: Callable, axes, panels: int = 1) -> float:
    """Tensor-product Gauss-Legendre integral of ``fn`` over a box.

    ``axes`` is a list of ``((a, b), nodes)``; ``fn`` maps an ``(m, d)`` array
    of points to ``m`` values.
    """
    rules = []
    for (a, b), nodes in axes:
        if nodes < 2:
            raise ValueError("need at least 2 nodes per axis")
        rules.append(gauss_legendre(a, b, nodes, panels))
    pts = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1).reshape(-1, len(rules))
    wts = np.ones(1)
    for _, w in rules:
        wts = np.multiply.outer(wts, w).ravel()
    return float(np.sum(wts * np.asarray(fn(pts), dtype=float)))


def _aligned_part(surface: RegressionSurface, j: int, q: IntegrationDensity, quad: QuadratureSpec) -> np.ndarray:
    x = surface.x[:, j]
    reach = surface.kernel.factors[j].support_radius * surface.bandwidths[j]
    a, b = q.support
    lo, hi = np.maximum(x - reach, a), np.minimum(x + reach, b)
    width = np.maximum(hi - lo, 0.0)
    u, w = gauss_legendre(-1.0, 1.0, quad.nodes, quad.panels)
    t = 0.5 * (lo + hi)[:, None] + 0.5 * width[:, None] * u[None, :]
    h = surface.bandwidths[j]
    vals = surface.kernel.factors[j]((t - x[:, None]) / h) / h * q(t)
    return 0.5 * width * np.sum(w[None, :] * vals, axis=1)


def _separable_parts(surface: RegressionSurface, qs, quad: QuadratureSpec):
    """Per-axis q-weighted integrals ``I_j[i] = int K_h(t - X_ij) q_j(t) dt``."""
    parts = []
    for j, q in enumerate(qs):
        if quad.aligned:
            parts.append(_aligned_part(surface, j, q, quad))
            continue
        t, wq = q.rule(quad.nodes, quad.panels)
        parts.append(np.sum(wq[:, None] * surface.axis_factors(j, t), axis=0))
    return parts


def _others(parts, ell):
    out = np.ones_like(parts[0])
    for j, p in enumerate(parts):
        if j != ell:
            out = out * p
    return out


def _generic_marginal(fn, qs, ell, grid, quad):
    rules = [q.rule(quad.nodes, quad.panels) for q in qs]
    d = len(qs)
    full_pts = np.stack(np.meshgrid(*[r[0] for r in rules], indexing="ij"), axis=-1).reshape(-1, d)
    full_w = np.ones(1)
    for _, w in rules:
        full_w = np.multiply.outer(full_w, w).ravel()
    constant = float(np.sum(full_w * fn(full_pts)))
    other = [r for j, r in enumerate(rules) if j != ell]
    if other:
        sub = np.stack(np.meshgrid(*[r[0] for r in other], indexing="ij"), axis=-1).reshape(-1, d - 1)
        sub_w = np.ones(1)
        for _, w in other:
            sub_w = np.multiply.outer(sub_w, w).ravel()
    else:
        sub, sub_w = np.zeros((1, 0)), np.ones(1)
    vals = np.empty(len(grid))
    for g, xl in enumerate(grid):
        pts = np.insert(sub, ell, xl, axis=1)
        vals[g] = np.sum(sub_w * fn(pts))
    return vals - constant, constant


def components_on(surface, qs: Sequence[IntegrationDensity], grids, quad: QuadratureSpec = QuadratureSpec()):
    """Components on per-axis point sets, and the shared constant ``int m q``.

    A :class:`RegressionSurface` is integrated through its product-kernel
    structure, which gives the same tensor quadrature as evaluating the
    surface on every node; any other callable surface is evaluated on the
    tensor grid of nodes directly.  Empty point sets are allowed.
    """
    d = len(qs)
    grids = [np.asarray(g, dtype=float).ravel() for g in grids]
    if len(grids) != d:
        raise ValueError("one point set per axis")
    if isinstance(surface, RegressionSurface):
        if surface.d != d:
            raise ValueError("surface and integration densities disagree on d")
        parts = _separable_parts(surface, qs, quad)
        constant = float(np.sum(surface.coef * _others(parts, -1)))
        eta = []
        for ell in range(d):
            if grids[ell].size == 0:
                eta.append(np.empty(0))
                continue
            a = surface.axis_factors(ell, grids[ell])
            eta.append(np.sum(a * (surface.coef * _others(parts, ell))[None, :], axis=1) - constant)
        return eta, constant
    eta, constant = [], None
    for ell in range(d):
        vals, constant = _generic_marginal(surface, qs, ell, grids[ell], quad)
        eta.append(vals)
    return eta, constant


def marginal_component(surface, qs: Sequence[IntegrationDensity], ell: int, grid, quad: QuadratureSpec = QuadratureSpec()):
    """Estimated component ``eta_l`` on ``grid`` (0-based axis ``ell``)."""
    if not 0 <= ell < len(qs):
        raise ValueError(f"axis {ell} out of range for d = {len(qs)}")
    grids = [np.empty(0)] * len(qs)
    grids[ell] = grid
    eta, _ = components_on(surface, qs, grids, quad)
    return eta[ell]


@dataclass
class AdditiveFit:
    """Estimated additive components on per-axis grids."""

    grids: list
    eta: list
    constant: float
    sigma: Optional[list] = None
    ci_lo: Optional[list] = None
    ci_hi: Optional[list] = None
    eta_true: Optional[list] = None
    diagnostics: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return len(self.grids)

    COLUMNS = ("axis", "x", "eta_hat", "sigma_hat", "ci_lo", "ci_hi", "eta_true_if_known")

    def rows(self):
        for ell in range(self.d):
            for g, x in enumerate(self.grids[ell]):
                yield (
                    ell + 1,
                    float(x),
                    float(self.eta[ell][g]),
                    None if self.sigma is None else float(self.sigma[ell][g]),
                    None if self.ci_lo is None else float(self.ci_lo[ell][g]),
                    None if self.ci_hi is None else float(self.ci_hi[ell][g]),
                    None if self.eta_true is None else float(self.eta_true[ell][g]),
                )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.COLUMNS)
        for row in self.rows():
            writer.writerow([row[0]] + ["" if v is None else f"{v:.17g}" for v in row[1:]])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "AdditiveFit":
        reader = csv.DictReader(io.StringIO(text))
        cols: dict = {}
        for rec in reader:
            cols.setdefault(int(rec["axis"]), []).append(rec)

        def column(name):
            if any(r[name] == "" for recs in cols.values() for r in recs):
                return None
            return [np.array([float(r[name]) for r in cols[a]]) for a in sorted(cols)]

        return cls(
            grids=column("x"),
            eta=column("eta_hat"),
            constant=float("nan"),
            sigma=column("sigma_hat"),
            ci_lo=column("ci_lo"),
            ci_hi=column("ci_hi"),
            eta_true=column("eta_true_if_known"),
        )

    def to_dict(self) -> dict:
        def lists(v):
            return None if v is None else [np.asarray(a).tolist() for a in v]

        return {
            "constant": self.constant,
            "grids": lists(self.grids),
            "eta_hat": lists(self.eta),
            "sigma_hat": lists(self.sigma),
            "ci_lo": lists(self.ci_lo),
            "ci_hi": lists(self.ci_hi),
            "eta_true": lists(self.eta_true),
            "diagnostics": self.diagnostics,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def fit_components(
    surface,
    qs: Sequence[IntegrationDensity],
    domain: EvaluationDomain,
    quad: QuadratureSpec = QuadratureSpec(),
) -> AdditiveFit:
    """All components on the domain grids plus the constant ``int m q``.

    The shared d-dimensional integral is computed once.
    """
    d = len(qs)
    if domain.d != d:
        raise ValueError("domain and integration densities disagree on d")
    notes = [
        f"integration density on axis {ell + 1} ({q.name}) has {q.smoothness} continuous derivatives"
        for ell, q in enumerate(qs)
        if q.smoothness < 3
    ]
    eta, constant = components_on(surface, qs, domain.grids, quad)
    diagnostics = dict(getattr(surface, "diagnostics", {}))
    diagnostics["warnings"] = list(diagnostics.get("warnings", [])) + notes
    return AdditiveFit(
        grids=[np.array(g) for g in domain.grids],
        eta=eta,
        constant=constant,
        diagnostics=diagnostics,
        metadata={"quadrature": {"nodes": quad.nodes, "panels": quad.panels, "aligned": quad.aligned}, "q": [q.to_dict() for q in qs]},
    )


def additive_predict(fit: AdditiveFit, x) -> float:
    """``sum_l eta_l(x_l) + constant`` with linear interpolation between grid nodes."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != fit.d:
        raise ValueError(f"expected a point of dimension {fit.d}")
    total = fit.constant
    for ell in range(fit.d):
        g = fit.grids[ell]
        if not g[0] <= x[ell] <= g[-1]:
            raise ValueError(f"x[{ell}] = {x[ell]} outside the grid range [{g[0]}, {g[-1]}]")
        total += float(np.interp(x[ell], g, fit.eta[ell]))
    return total


def true_component_oracle(m_ell: Callable, q: IntegrationDensity, nodes: int = 64, panels: int = 8) -> Callable:
    """``x -> m_l(x) - int m_l q_l`` for a known component."""
    t, wq = q.rule(nodes, panels)
    centre = float(np.sum(wq * m_ell(t)))

    def eta(x):
        return m_ell(np.asarray(x, dtype=float)) - centre

    eta.centre = centre
    return eta
