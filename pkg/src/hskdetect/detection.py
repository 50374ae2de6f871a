"""Detection functions and the standardised weights they induce."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import Dataset
from .locpoly import SmootherConfig, scale_estimate


class DegenerateDetectionError(ValueError):
    """The detection function is (numerically) constant over the sample."""


def _omega1_ex2(X):
    return 0.5 + 5 * X[:, 0] ** 2 + 5 * X[:, 1] ** 2


def _omega2_ex2(X):
    return 1 + np.cos(np.pi / 2 * (X[:, 0] + X[:, 1]))


def _remark1(X):
    return 1 + np.cos(2 * np.pi * X[:, 0])


BUILTINS: dict[str, tuple[int, Callable[[np.ndarray], np.ndarray]]] = {
    "omega1_ex2": (2, _omega1_ex2),
    "omega2_ex2": (2, _omega2_ex2),
    "remark1": (1, _remark1),
}


@dataclass(frozen=True, eq=False)
class DetectionFunction:
    """Where the detection values come from.

    ``kind`` is ``"builtin"`` (``name`` from :data:`BUILTINS`, evaluated on
    the original covariate scale), ``"user"`` (``values`` given per row of
    the full dataset) or ``"estimated"`` (the local polynomial scale
    estimate).
    """

    kind: str = "estimated"
    name: str | None = None
    values: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == "builtin":
            if self.name not in BUILTINS:
                raise ValueError(f"unknown builtin detection function {self.name!r}")
        elif self.kind == "user":
            if self.values is None:
                raise ValueError("user detection function needs per-row values")
            vals = np.asarray(self.values, dtype=float).ravel()
            if not np.all(np.isfinite(vals)):
                raise ValueError("user detection values must be finite")
            object.__setattr__(self, "values", vals)
        elif self.kind != "estimated":
            raise ValueError(f"unknown detection kind {self.kind!r}")

    @classmethod
    def builtin(cls, name: str) -> "DetectionFunction":
        return cls("builtin", name)

    @classmethod
    def user(cls, values, name: str | None = None) -> "DetectionFunction":
        return cls("user", name, np.asarray(values, dtype=float))

    @classmethod
    def estimated(cls) -> "DetectionFunction":
        return cls("estimated")

    def describe(self) -> str:
        if self.kind == "estimated":
            return "estimated"
        if self.kind == "builtin":
            return f"builtin:{self.name}"
        return f"user:{self.name}" if self.name else "user"

    def evaluate(self, X_original: np.ndarray) -> np.ndarray:
        """Builtin values at covariates given on their original scale."""
        if self.kind != "builtin":
            raise ValueError("only builtin detection functions can be evaluated at arbitrary points")
        dim, func = BUILTINS[self.name]
        X_original = np.asarray(X_original, dtype=float).reshape(len(X_original), -1)
        if X_original.shape[1] != dim:
            raise ValueError(f"{self.name} needs {dim} covariates, got {X_original.shape[1]}")
        return func(X_original)


@dataclass(frozen=True, eq=False)
class WeightVector:
    values: np.ndarray
    provenance: str


def standardize_weights(omega_values, provenance: str = "user") -> WeightVector:
    """Centre ``omega_values`` and scale them to unit mean square."""
    w = np.asarray(omega_values, dtype=float).ravel()
    if w.size < 2:
        raise ValueError("need at least two detection values")
    if not np.all(np.isfinite(w)):
        raise ValueError("detection values must be finite")
    mean = w.mean()
    centred = w - mean
    var = np.mean(centred**2)
    if var < 1e-14 * (1.0 + mean**2):
        raise DegenerateDetectionError("degenerate detection function: values are constant")
    return WeightVector(centred / np.sqrt(var), provenance)


def estimated_weights(dataset: Dataset, config: SmootherConfig | None = None) -> WeightVector:
    """Weights from the estimated scale function at the observed rows."""
    sigma = scale_estimate(dataset, config)
    return standardize_weights(sigma[dataset.observed], "estimated")
