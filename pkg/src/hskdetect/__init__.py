"""Tests for heteroskedasticity in nonparametric regression.

The statistic is the supremum of a weighted empirical process of
local polynomial residuals; responses may be missing at random.
"""

from .bootstrap import BootstrapConfig, bootstrap_critical_value
from .data import CsvSchema, DataError, Dataset, complete_cases, ingest_csv, rescale_to_unit_cube
from .detection import DegenerateDetectionError, DetectionFunction, WeightVector, standardize_weights
from .empirical import TestConfig, TestOutcome, run_test, sup_weighted_ecdf
from .kernels import KernelSpec
from .locpoly import SmootherConfig, SmootherError, cv_bandwidth, fit
from .nulldist import cdf_sup_bridge, oracle_cdf_kolmogorov, pvalue_sup_bridge, quantile_sup_bridge
from .simulate import RejectionReport, ScenarioSpec, monte_carlo, reproduce_tables

__version__ = "0.1.0"

__all__ = [
    "BootstrapConfig",
    "CsvSchema",
    "DataError",
    "Dataset",
    "DegenerateDetectionError",
    "DetectionFunction",
    "KernelSpec",
    "RejectionReport",
    "ScenarioSpec",
    "SmootherConfig",
    "SmootherError",
    "TestConfig",
    "TestOutcome",
    "WeightVector",
    "bootstrap_critical_value",
    "cdf_sup_bridge",
    "complete_cases",
    "cv_bandwidth",
    "fit",
    "ingest_csv",
    "monte_carlo",
    "oracle_cdf_kolmogorov",
    "pvalue_sup_bridge",
    "quantile_sup_bridge",
    "rescale_to_unit_cube",
    "reproduce_tables",
    "run_test",
    "standardize_weights",
    "sup_weighted_ecdf",
]
