"""Compactly supported kernels on [-1, 1] and their product weights."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.special import beta as beta_fn

_KINDS = ("epanechnikov", "tricube", "smooth")


@dataclass(frozen=True)
class KernelSpec:
    """A univariate kernel.

    ``smooth`` with order ``p`` is ``c_p (1 - u^2)^(p+1)`` on [-1, 1], which
    has ``p`` continuous derivatives, all vanishing at the endpoints.
    """

    kind: str = "epanechnikov"
    order: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown kernel {self.kind!r}; choose from {', '.join(_KINDS)}")
        if self.kind == "smooth" and self.order < 0:
            raise ValueError("smooth kernel order must be nonnegative")

    @classmethod
    def parse(cls, name: str) -> "KernelSpec":
        """Parse ``"epanechnikov"``, ``"tricube"`` or ``"smooth:p"``."""
        name = name.strip().lower()
        if name.startswith("smooth"):
            _, _, p = name.partition(":")
            if not p:
                raise ValueError("smooth kernel needs an order, e.g. 'smooth:3'")
            return cls("smooth", int(p))
        return cls(name)

    @property
    def name(self) -> str:
        return f"smooth:{self.order}" if self.kind == "smooth" else self.kind

    @cached_property
    def constant(self) -> float:
        if self.kind == "epanechnikov":
            return 0.75
        if self.kind == "tricube":
            return 70.0 / 81.0
        # int_{-1}^{1} (1-u^2)^q du = B(1/2, q+1)
        return 1.0 / beta_fn(0.5, self.order + 2)

    def __call__(self, u):
        return eval_kernel(self, u)


def _ipow(x, k: int):
    out = x
    for _ in range(k - 1):
        out = out * x
    return out


def eval_kernel(spec: KernelSpec, u):
    """Evaluate ``spec`` at ``u`` (scalar or array); zero outside [-1, 1]."""
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    if spec.kind == "tricube":
        core = np.maximum(1.0 - a * a * a, 0.0)
        core = core * core * core
    else:
        core = np.maximum(1.0 - a * a, 0.0)
        if spec.kind == "smooth":
            core = _ipow(core, spec.order + 1)
    out = spec.constant * core
    return float(out) if out.ndim == 0 else out


def product_weight(specs, u) -> np.ndarray | float:
    """Product kernel ``w(u) = w_1(u_1) ... w_m(u_m)``.

    ``u`` has trailing dimension m; leading dimensions are broadcast.
    """
    u = np.asarray(u, dtype=float)
    specs = list(specs)
    if u.shape[-1] != len(specs):
        raise ValueError(f"expected {len(specs)} coordinates, got {u.shape[-1]}")
    w = eval_kernel(specs[0], u[..., 0])
    for k in range(1, len(specs)):
        w = w * eval_kernel(specs[k], u[..., k])
    return w


def default_kernel(m: int) -> KernelSpec:
    """Smooth enough for the asymptotic theory: m+2 continuous derivatives."""
    return KernelSpec("smooth", m + 2)
