"""Composite Gauss-Legendre rules shared by the kernel and integration code."""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _leggauss(nodes: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(nodes)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(a: float, b: float, nodes: int, panels: int = 1):
    """Nodes and weights of a composite Gauss-Legendre rule on ``[a, b]``.

    The interval is split into ``panels`` equal pieces, each integrated with
    a ``nodes``-point rule.
    """
    if nodes < 1 or panels < 1:
        raise ValueError("nodes and panels must be positive")
    if not b > a:
        raise ValueError(f"empty interval [{a}, {b}]")
    x, w = _leggauss(int(nodes))
    edges = np.linspace(a, b, int(panels) + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    pts = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    wts = (half[:, None] * w[None, :]).ravel()
    return pts, wts
