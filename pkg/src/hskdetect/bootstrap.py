"""Smooth residual bootstrap for small-sample critical values.

Bootstrap responses follow the homoskedastic null: the fitted regression
plus resampled centred residuals, jittered by a small normal perturbation.
By default the bandwidths of the original fit are reused, which makes each
replication a pair of matrix products against the stored smoother
matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import empirical
from .data import Dataset
from .detection import DegenerateDetectionError
from .empirical import Prepared, TestConfig, sup_weighted_ecdf_many
from .locpoly import SCALE_FLOOR
from .streams import stream


class BootstrapError(RuntimeError):
    pass


@dataclass(frozen=True)
class BootstrapConfig:
    """``smoothing`` is ``"auto"`` (residual sd times n^(-1/4)) or a fixed scale."""

    B: int = 500
    seed: int = 0
    smoothing: float | str = "auto"
    recv: bool = False

    def __post_init__(self):
        if self.B < 100:
            raise ValueError("bootstrap needs B >= 100 replications")
        if self.smoothing != "auto" and not (isinstance(self.smoothing, (int, float)) and self.smoothing > 0):
            raise ValueError("smoothing must be 'auto' or a positive number")

    def perturbation_scale(self, residuals: np.ndarray) -> float:
        if self.smoothing == "auto":
            n = residuals.size
            return float(np.std(residuals, ddof=1) * n ** -0.25)
        return float(self.smoothing)


def order_statistic_critical_value(stats: np.ndarray, alpha: float) -> float:
    """The ceil((1 - alpha)(B + 1))-th smallest of the B bootstrap statistics."""
    B = len(stats)
    k = min(B, math.ceil((1.0 - alpha) * (B + 1) - 1e-9))
    return float(np.sort(stats)[k - 1])


def bootstrap_pvalue(stats: np.ndarray, observed: float) -> float:
    return (1.0 + np.count_nonzero(stats >= observed)) / (len(stats) + 1.0)


def _draw(seed: int, b: int, attempt: int, pool: np.ndarray, a_n: float) -> np.ndarray:
    rng = stream(seed, b, attempt)
    n = pool.size
    idx = rng.integers(0, n, size=n)
    return pool[idx] + a_n * rng.standard_normal(n)


def _smooth_columns(L: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return np.stack([L @ Y[:, b] for b in range(Y.shape[1])], axis=1)


def _batch_statistics(prep: Prepared, errors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Statistics for columns of bootstrap errors; second value flags usable columns."""
    fitted = prep.mean_fit.fitted
    L = prep.mean_fit.operator
    Ystar = fitted[:, None] + errors
    # one product per column: a blocked matrix product would make column b
    # depend (in the last bits) on how many columns share the batch
    mean_star = _smooth_columns(L, Ystar)
    resid = Ystar - mean_star
    resid[np.abs(resid) <= empirical.RESIDUAL_TIE_TOL * np.abs(Ystar).max(axis=0)] = 0.0
    if prep.square_fit is None:
        return sup_weighted_ecdf_many(prep.weights.values, resid), np.ones(errors.shape[1], dtype=bool)
    second = _smooth_columns(prep.square_fit.operator, Ystar**2)
    sigma = np.sqrt(np.maximum(second - mean_star**2, SCALE_FLOOR))
    centred = sigma - sigma.mean(axis=0)
    var = np.mean(centred**2, axis=0)
    usable = var >= 1e-14 * (1.0 + sigma.mean(axis=0) ** 2)
    weights = centred / np.sqrt(np.where(usable, var, 1.0))
    return sup_weighted_ecdf_many(weights, resid), usable


def _recv_statistic(prep: Prepared, config: TestConfig, eps: np.ndarray) -> float:
    ystar = prep.mean_fit.fitted + eps
    try:
        return empirical.prepare(Dataset(prep.X_original, ystar), config).statistic
    except (DegenerateDetectionError, RuntimeError):
        return math.nan


def bootstrap_statistics(prep: Prepared, config: TestConfig, boot: BootstrapConfig) -> np.ndarray:
    """The B bootstrap statistics, replication b drawn from stream (seed, b, attempt)."""
    pool = prep.residuals - prep.residuals.mean()
    a_n = boot.perturbation_scale(prep.residuals)
    stats = np.full(boot.B, np.nan)
    attempts = np.zeros(boot.B, dtype=int)
    pending = np.arange(boot.B)
    total = 0
    while pending.size:
        total += pending.size
        if total > 5 * boot.B:
            raise BootstrapError(f"bootstrap failed: more than {5 * boot.B} attempts needed")
        errors = np.stack([_draw(boot.seed, b, attempts[b], pool, a_n) for b in pending], axis=1)
        if boot.recv:
            values = np.array([_recv_statistic(prep, config, errors[:, i]) for i in range(pending.size)])
            usable = np.isfinite(values)
        else:
            values, usable = _batch_statistics(prep, errors)
        stats[pending[usable]] = values[usable]
        attempts[pending[~usable]] += 1
        pending = pending[~usable]
    return stats


def bootstrap_from_prepared(prep: Prepared, config: TestConfig, boot: BootstrapConfig) -> tuple[float, float, dict]:
    stats = bootstrap_statistics(prep, config, boot)
    crit = order_statistic_critical_value(stats, config.alpha)
    diag = {
        "B": boot.B,
        "seed": boot.seed,
        "smoothing": boot.perturbation_scale(prep.residuals),
        "recv": boot.recv,
    }
    return crit, bootstrap_pvalue(stats, prep.statistic), diag


def bootstrap_critical_value(
    dataset: Dataset, test_config: TestConfig, boot: BootstrapConfig | None = None
) -> tuple[float, float]:
    """Bootstrap critical value and p-value for ``dataset`` under ``test_config``."""
    boot = boot or BootstrapConfig()
    prep = empirical.prepare(dataset, test_config)
    crit, pval, _ = bootstrap_from_prepared(prep, test_config, boot)
    return crit, pval
