"""The weighted residual empirical process statistic and the end-to-end test."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import TYPE_CHECKING

import numpy as np

from . import locpoly
from .data import Dataset, DataError, RescaleMap, complete_cases, rescale_to_unit_cube
from .detection import DetectionFunction, WeightVector, standardize_weights
from .locpoly import SmootherConfig, SmootherFit
from .nulldist import pvalue_sup_bridge, quantile_sup_bridge

if TYPE_CHECKING:
    from .bootstrap import BootstrapConfig

MAR_MODES = ("auto", "full", "complete_case")
# residuals this small relative to max|Y| are rounding noise and become exact ties at 0
RESIDUAL_TIE_TOL = 1e-10


def sup_weighted_ecdf(weights, residuals) -> float:
    """``sup_t |n^(-1/2) sum_j W_j 1[e_j <= t]|``, evaluated exactly.

    Exactly tied residuals form one jump of the step process.
    """
    w = np.asarray(weights.values if isinstance(weights, WeightVector) else weights, dtype=float)
    e = np.asarray(residuals, dtype=float)
    if w.shape != e.shape or w.ndim != 1:
        raise ValueError("weights and residuals must be vectors of equal length")
    if w.size < 2:
        raise ValueError("need at least two observations")
    if np.isnan(w).any() or np.isnan(e).any():
        raise ValueError("NaN in weights or residuals")
    order = np.argsort(e, kind="stable")
    es = e[order]
    partial = np.cumsum(w[order])
    group_end = np.append(es[1:] != es[:-1], True)
    return float(np.abs(partial[group_end]).max() / math.sqrt(w.size))


def sup_weighted_ecdf_many(weights: np.ndarray, residuals: np.ndarray) -> np.ndarray:
    """Column-wise :func:`sup_weighted_ecdf` for (n, B) residuals.

    ``weights`` is either one n-vector shared by all columns or (n, B).
    """
    e = np.asarray(residuals, dtype=float)
    w = np.asarray(weights, dtype=float)
    if w.ndim == 1:
        w = np.broadcast_to(w[:, None], e.shape)
    order = np.argsort(e, axis=0, kind="stable")
    es = np.take_along_axis(e, order, axis=0)
    partial = np.cumsum(np.take_along_axis(w, order, axis=0), axis=0)
    group_end = np.ones(e.shape, dtype=bool)
    group_end[:-1] = es[1:] != es[:-1]
    return np.where(group_end, np.abs(partial), 0.0).max(axis=0) / math.sqrt(e.shape[0])


@dataclass(frozen=True)
class TestConfig:
    """Everything that defines one run of the test.

    ``quantile_source`` is ``"asymptotic"`` (upper ``alpha`` quantile of
    sup|B0|), ``"fixed"`` (use ``critical_value`` as given) or a
    :class:`~hskdetect.bootstrap.BootstrapConfig`.
    """

    __test__ = False

    smoother: SmootherConfig = field(default_factory=SmootherConfig)
    detection: DetectionFunction = field(default_factory=DetectionFunction.estimated)
    alpha: float = 0.05
    quantile_source: "str | BootstrapConfig" = "asymptotic"
    mar_mode: str = "auto"
    critical_value: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.mar_mode not in MAR_MODES:
            raise ValueError(f"mar_mode must be one of {MAR_MODES}")
        if isinstance(self.quantile_source, str):
            if self.quantile_source not in ("asymptotic", "fixed"):
                raise ValueError("quantile_source must be 'asymptotic', 'fixed' or a BootstrapConfig")
            if self.quantile_source == "fixed" and not (self.critical_value or 0) > 0:
                raise ValueError("a fixed quantile source needs a positive critical_value")


@dataclass(frozen=True)
class TestOutcome:
    __test__ = False

    statistic: float
    critical_value: float
    p_value: float
    reject: bool
    n_used: int
    diagnostics: dict

    def to_dict(self) -> dict:
        return {"schema_version": 1, **asdict(self)}

    @classmethod
    def from_dict(cls, payload: dict) -> "TestOutcome":
        payload = {k: v for k, v in payload.items() if k != "schema_version"}
        return cls(**payload)


@dataclass(frozen=True, eq=False)
class Prepared:
    """Intermediate quantities of one test run (on the sample actually used)."""

    sample: Dataset
    X_original: np.ndarray
    rescale: RescaleMap
    path: str
    mean_fit: SmootherFit
    square_fit: SmootherFit | None
    residuals: np.ndarray
    weights: WeightVector
    statistic: float
    n_total: int

    @property
    def n(self) -> int:
        return self.sample.n

    def bandwidths(self) -> dict:
        out = {"mean": {"constant": self.mean_fit.constant, "bandwidth": self.mean_fit.bandwidth}}
        if self.square_fit is not None:
            out["second_moment"] = {
                "constant": self.square_fit.constant,
                "bandwidth": self.square_fit.bandwidth,
            }
        return out

    def constants(self) -> tuple[float, float]:
        sq = self.square_fit.constant if self.square_fit is not None else self.mean_fit.constant
        return self.mean_fit.constant, sq


def _select_path(dataset: Dataset, mode: str) -> tuple[Dataset, np.ndarray | None, str]:
    """Return the sample to analyse, the kept-row mask and the path name."""
    if mode == "full" and dataset.has_missing:
        raise DataError("mar_mode='full' needs every response observed")
    if mode == "complete_case" or (mode == "auto" and dataset.has_missing):
        if dataset.delta is None:
            return dataset, None, "complete_case"
        return complete_cases(dataset), dataset.delta == 1, "complete_case"
    if dataset.delta is not None:
        # all observed: drop the indicator so both paths share one sample
        return complete_cases(dataset), None, "full"
    return dataset, None, "full"


def prepare(
    dataset: Dataset,
    config: TestConfig,
    constants: tuple[float, float] | None = None,
) -> Prepared:
    """Run the pipeline up to the statistic.

    ``constants`` fixes the bandwidth constants (mean, second moment) and
    skips cross-validation.
    """
    sample_raw, kept, path = _select_path(dataset, config.mar_mode)
    basis = len(locpoly.multi_index_set(config.smoother.degree, dataset.m))
    if sample_raw.n < basis + 2:
        raise DataError(
            f"sample too small: {sample_raw.n} observed rows, need at least {basis + 2} "
            f"for degree {config.smoother.degree} in {dataset.m} dimensions"
        )
    sample, rmap = rescale_to_unit_cube(sample_raw)
    det = config.detection
    smoother = config.smoother

    if det.kind == "estimated":
        mean_fit, square_fit = locpoly.fit_moments(sample, smoother, constants)
        omega = locpoly.scale_from_fits(mean_fit, square_fit)
    else:
        c = None if constants is None else constants[0]
        mean_fit = locpoly.fit(sample, "response", smoother, constant=c)
        square_fit = None
        if det.kind == "builtin":
            omega = det.evaluate(sample_raw.X)
        else:
            if det.values.shape[0] != dataset.n:
                raise DataError(f"detection values have {det.values.shape[0]} rows, dataset has {dataset.n}")
            omega = det.values if kept is None else det.values[kept]
    weights = standardize_weights(omega, det.describe())
    y = np.asarray(sample.Y)
    resid = y - mean_fit.fitted
    resid[np.abs(resid) <= RESIDUAL_TIE_TOL * np.abs(y).max()] = 0.0
    stat = sup_weighted_ecdf(weights, resid)
    return Prepared(
        sample=sample,
        X_original=np.asarray(sample_raw.X),
        rescale=rmap,
        path=path,
        mean_fit=mean_fit,
        square_fit=square_fit,
        residuals=resid,
        weights=weights,
        statistic=stat,
        n_total=dataset.n,
    )


def run_test(
    dataset: Dataset,
    config: TestConfig | None = None,
    constants: tuple[float, float] | None = None,
) -> TestOutcome:
    """Test the null of homoskedastic errors.

    Rows with a missing response are dropped before anything else, and the
    same quantiles are used on the remaining complete cases.
    """
    config = config or TestConfig()
    prep = prepare(dataset, config, constants)
    stat = prep.statistic
    diagnostics = {
        "path": prep.path,
        "n_total": prep.n_total,
        "degree": config.smoother.degree,
        "kernel": config.smoother.kernels(dataset.m)[0].name,
        "bandwidths": prep.bandwidths(),
        "weights": prep.weights.provenance,
        "rescale": prep.rescale.to_dict(),
        "alpha": config.alpha,
    }
    source = config.quantile_source
    if source == "asymptotic":
        crit = quantile_sup_bridge(config.alpha)
        pval = pvalue_sup_bridge(stat)
        diagnostics["quantile_source"] = "asymptotic"
    elif source == "fixed":
        crit = float(config.critical_value)
        pval = pvalue_sup_bridge(stat)
        diagnostics["quantile_source"] = "fixed"
    else:
        from .bootstrap import bootstrap_from_prepared

        crit, pval, boot_diag = bootstrap_from_prepared(prep, config, source)
        diagnostics["quantile_source"] = "bootstrap"
        diagnostics["bootstrap"] = boot_diag
        diagnostics["asymptotic_p_value"] = pvalue_sup_bridge(stat)
    return TestOutcome(
        statistic=stat,
        critical_value=float(crit),
        p_value=float(pval),
        reject=bool(stat > crit),
        n_used=prep.n,
        diagnostics=diagnostics,
    )
