"""Transformations ``psi`` of the response whose conditional mean is estimated."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

__all__ = ["PsiSpec", "psi_from_config"]

KINDS = ("indicator_leq_tau0", "identity_truncated_tau0", "custom_bounded")


@dataclass(frozen=True)
class PsiSpec:
    """A bounded response transform.

    ``indicator_leq_tau0`` is ``1{y <= tau0}``; ``identity_truncated_tau0`` is
    ``y 1{y <= tau0}``; ``custom_bounded`` wraps ``func`` and checks
    ``|func| <= bound`` on every evaluation.
    """

    kind: str
    tau0: float = np.inf
    bound: Optional[float] = None
    func: Optional[Callable] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown psi kind {self.kind!r}")
        if self.kind == "custom_bounded":
            if self.func is None or self.bound is None:
                raise ValueError("custom_bounded psi needs func and bound")
        elif not np.isfinite(self.tau0):
            raise ValueError(f"{self.kind} needs a finite tau0")
        if self.bound is None:
            bound = 1.0 if self.kind == "indicator_leq_tau0" else abs(float(self.tau0))
            object.__setattr__(self, "bound", bound)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "indicator_leq_tau0":
            return (y <= self.tau0).astype(float)
        if self.kind == "identity_truncated_tau0":
            return np.where(y <= self.tau0, y, 0.0)
        out = np.asarray(self.func(y), dtype=float)
        if np.any(np.abs(out) > self.bound):
            raise ValueError(f"psi exceeds its declared bound {self.bound}")
        return out

    @property
    def vanishes_beyond_tau0(self) -> bool:
        return self.kind != "custom_bounded" or np.isfinite(self.tau0)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "bound": self.bound}
        if np.isfinite(self.tau0):
            out["tau0"] = self.tau0
        return out


def psi_from_config(spec: dict) -> PsiSpec:
    kind = spec["kind"]
    if kind == "custom_bounded":
        raise ValueError("custom_bounded psi is library-only; it cannot be given in JSON")
    return PsiSpec(kind, tau0=float(spec["tau0"]), bound=spec.get("bound"))
