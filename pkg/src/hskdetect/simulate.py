"""Data generators and the Monte Carlo harness for the simulation tables."""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .bootstrap import BootstrapConfig
from .data import Dataset, DataError
from .detection import DegenerateDetectionError, DetectionFunction
from .empirical import TestConfig, run_test
from .kernels import KernelSpec
from .locpoly import SmootherConfig, SmootherError
from .streams import derive_seed, stream

SIZES = (50, 100, 200, 300)
RETRIES = 3

# -- Example 1: one covariate ---------------------------------------------------


def regression_ex1(x):
    return 2 * x + 3 * np.cos(np.pi * x)


def scale_ex1(scale_id: int, x, n: int):
    x = np.asarray(x, dtype=float)
    if scale_id == 0:
        return np.ones_like(x)
    if scale_id == 1:
        return 0.4 + 4 * x**2
    if scale_id == 2:
        return 2 * np.exp(x) - 0.5
    if scale_id == 3:
        return 1 + 15 / math.sqrt(n) * x**2
    raise ValueError(f"example 1 has scale functions 0..3, not {scale_id}")


def response_probability(x):
    """Logistic distribution function (location 0, scale 1)."""
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=float)))


def gen_example1(
    scale_id: int,
    n: int,
    missing: bool = False,
    rng: np.random.Generator | None = None,
    missing_rng: np.random.Generator | None = None,
) -> Dataset:
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = rng if rng is not None else np.random.default_rng()
    x = rng.uniform(-1.0, 1.0, n)
    e = rng.standard_normal(n)
    y = regression_ex1(x) + scale_ex1(scale_id, x, n) * e
    delta = None
    if missing:
        mrng = missing_rng if missing_rng is not None else rng
        delta = (mrng.uniform(size=n) < response_probability(x)).astype(np.int8)
    return Dataset(x[:, None], y, delta)


# -- Example 2: two correlated covariates ---------------------------------------


def regression_ex2(X):
    return 2 * X[:, 0] - X[:, 1] + 3 * np.exp(X[:, 0] + X[:, 1])


def scale_ex2(scale_id: int, X):
    if scale_id == 0:
        return np.ones(len(X))
    if scale_id == 1:
        return 0.5 + 5 * X[:, 0] ** 2 + 5 * X[:, 1] ** 2
    if scale_id == 2:
        return 4 + 3.5 * np.sin(np.pi / 2 * (X[:, 0] + X[:, 1]))
    raise ValueError(f"example 2 has scale functions 0..2, not {scale_id}")


EX2_COV = np.array([[1.0, 0.5], [0.5, 1.0]])


def truncated_covariates(n: int, rng: np.random.Generator) -> np.ndarray:
    """Bivariate normal (unit variances, correlation 1/2) restricted to [-1, 1]^2."""
    chol = np.linalg.cholesky(EX2_COV)
    kept = []
    have = 0
    while have < n:
        # roughly 47% of draws land in the square
        z = rng.standard_normal((max(16, 3 * (n - have)), 2)) @ chol.T
        z = z[np.all(np.abs(z) <= 1.0, axis=1)]
        kept.append(z)
        have += len(z)
    return np.concatenate(kept)[:n]


def gen_example2(scale_id: int, n: int, rng: np.random.Generator | None = None) -> Dataset:
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = rng if rng is not None else np.random.default_rng()
    X = truncated_covariates(n, rng)
    e = rng.standard_normal(n)
    return Dataset(X, regression_ex2(X) + scale_ex2(scale_id, X) * e)


# -- Remark 1: a detection function with no power --------------------------------


def scale_remark1(x):
    return 1.0 / (1.0 + np.sin(2 * np.pi * np.asarray(x, dtype=float)))


def gen_remark1(n: int, rng: np.random.Generator | None = None) -> Dataset:
    """X ~ U(0,1), Y = sigma(X) e with e ~ U(0,1) and a zero regression function."""
    if n < 2:
        raise ValueError("n must be at least 2")
    rng = rng if rng is not None else np.random.default_rng()
    x = rng.uniform(size=n)
    e = rng.uniform(size=n)
    return Dataset(x[:, None], scale_remark1(x) * e)


# -- Monte Carlo harness ----------------------------------------------------------

EXAMPLES = {"ex1": (4, 1), "ex2": (3, 3), "remark1": (1, 1)}  # (number of scales, degree)


@dataclass(frozen=True)
class ScenarioSpec:
    """One simulation cell.

    ``quantile`` is ``"asymptotic"``, ``"bootstrap"`` or ``"paper"`` (the
    published 5% critical value 1.1779).  ``fast`` cross-validates on the
    first replication only and reuses those bandwidth constants.
    """

    example: str
    scale_id: int = 0
    detection: str = "estimated"
    n: int = 100
    runs: int = 1000
    missing: bool = False
    seed: int = 0
    quantile: str = "asymptotic"
    B: int = 500
    fast: bool = False
    kernel: str | None = None
    test_config: TestConfig | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.example not in EXAMPLES:
            raise ValueError(f"unknown example {self.example!r}")
        scales, _ = EXAMPLES[self.example]
        if not 0 <= self.scale_id < scales:
            raise ValueError(f"{self.example} has scale ids 0..{scales - 1}")
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if self.missing and self.example != "ex1":
            raise ValueError("missing responses are only simulated for example 1")
        if self.quantile not in ("asymptotic", "bootstrap", "paper"):
            raise ValueError("quantile must be 'asymptotic', 'bootstrap' or 'paper'")
        if self.detection != "estimated":
            DetectionFunction.builtin(self.detection)

    @property
    def label(self) -> str:
        miss = ",missing" if self.missing else ""
        return f"{self.example}:sigma{self.scale_id}:{self.detection}:n={self.n}:{self.quantile}{miss}"

    def config(self) -> TestConfig:
        if self.test_config is not None:
            return self.test_config
        _, degree = EXAMPLES[self.example]
        kernel = KernelSpec.parse(self.kernel) if self.kernel else None
        detection = (
            DetectionFunction.estimated() if self.detection == "estimated" else DetectionFunction.builtin(self.detection)
        )
        smoother = SmootherConfig(degree=degree, kernel=kernel)
        if self.quantile == "bootstrap":
            return TestConfig(smoother, detection, quantile_source=BootstrapConfig(B=self.B))
        if self.quantile == "paper":
            return TestConfig(smoother, detection, quantile_source="fixed", critical_value=PAPER_CRITICAL_VALUE)
        return TestConfig(smoother, detection)

    def generate(self, replication: int, attempt: int = 0) -> Dataset:
        rng = stream(self.seed, replication, "data", attempt)
        if self.example == "ex1":
            return gen_example1(self.scale_id, self.n, self.missing, rng, stream(self.seed, replication, "missing", attempt))
        if self.example == "ex2":
            return gen_example2(self.scale_id, self.n, rng)
        return gen_remark1(self.n, rng)


PAPER_CRITICAL_VALUE = 1.1779


@dataclass(frozen=True)
class RejectionReport:
    label: str
    runs: int
    rejections: int
    frequency: float
    se: float
    mean_statistic: float
    runtime: float = field(default=0.0, compare=False)
    statistics: tuple = field(default=(), compare=False, repr=False)

    def to_dict(self, runtime: bool = False) -> dict:
        out = asdict(self)
        out.pop("statistics")
        if not runtime:
            out.pop("runtime")
        return out

    def frequency_above(self, critical_value: float) -> float:
        """Rejection frequency the same replications give at another critical value."""
        return float(np.mean(np.asarray(self.statistics) > critical_value))


class ReplicationError(RuntimeError):
    def __init__(self, replication: int, cause: Exception):
        super().__init__(f"replication {replication} failed after {RETRIES} retries: {cause}")
        self.replication = replication


def _replicate(spec: ScenarioSpec, r: int, constants=None) -> tuple[bool, float, tuple | None]:
    config = spec.config()
    last = None
    for attempt in range(RETRIES + 1):
        data = spec.generate(r, attempt)
        if isinstance(config.quantile_source, BootstrapConfig):
            boot = replace(config.quantile_source, seed=derive_seed(spec.seed, r, "bootstrap", attempt))
            cfg = replace(config, quantile_source=boot)
        else:
            cfg = config
        try:
            out = run_test(data, cfg, constants)
        except (SmootherError, DataError, DegenerateDetectionError) as exc:
            last = exc
            continue
        bw = out.diagnostics["bandwidths"]
        used = (bw["mean"]["constant"], bw.get("second_moment", bw["mean"])["constant"])
        return out.reject, out.statistic, used
    raise ReplicationError(r, last)


def _replicate_many(args):
    spec, indices, constants = args
    return [(r,) + _replicate(spec, r, constants)[:2] for r in indices]


def worker_count() -> int:
    raw = os.environ.get("HSK_THREADS", "0")
    try:
        k = int(raw)
    except ValueError:
        k = 0
    return k if k > 0 else (os.cpu_count() or 1)


def monte_carlo(spec: ScenarioSpec, workers: int | None = None) -> RejectionReport:
    """Run ``spec.runs`` independent replications of generator -> test."""
    start = time.perf_counter()
    workers = worker_count() if workers is None else max(1, workers)
    results = {}
    constants = None
    todo = list(range(spec.runs))
    if spec.fast:
        reject, stat, constants = _replicate(spec, 0)
        results[0] = (reject, stat)
        todo = todo[1:]
    if workers == 1 or len(todo) < 2 * workers:
        for r, reject, stat in _replicate_many((spec, todo, constants)):
            results[r] = (reject, stat)
    else:
        chunks = [todo[i::workers] for i in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for batch in pool.map(_replicate_many, [(spec, c, constants) for c in chunks]):
                for r, reject, stat in batch:
                    results[r] = (reject, stat)
    rejects = sum(results[r][0] for r in range(spec.runs))
    stats = [results[r][1] for r in range(spec.runs)]
    freq = rejects / spec.runs
    return RejectionReport(
        label=spec.label,
        runs=spec.runs,
        rejections=int(rejects),
        frequency=freq,
        se=math.sqrt(freq * (1 - freq) / spec.runs),
        mean_statistic=float(np.mean(stats)),
        runtime=time.perf_counter() - start,
        statistics=tuple(stats),
    )


# -- published figures --------------------------------------------------------------
# rows: scale id; columns: n = 50, 100, 200, 300; None where not reported

PAPER_TABLES = {
    1: {
        "example": "ex1", "missing": False, "detection": "estimated",
        "asymptotic": {0: (0.016, 0.019, 0.033, 0.039), 1: (0.426, 0.939, 1.000, 1.000),
                       2: (0.487, 0.971, 1.000, 1.000), 3: (0.127, 0.299, 0.500, 0.668)},
        "bootstrap": {0: (0.058, 0.056, 0.039, None), 1: (0.477, 0.945, 1.000, None),
                      2: (0.631, 0.957, 0.996, None), 3: (0.176, 0.387, 0.576, None)},
    },
    2: {
        "example": "ex1", "missing": True, "detection": "estimated",
        "asymptotic": {0: (0.009, 0.015, 0.029, 0.037), 1: (0.097, 0.482, 0.957, 0.998),
                       2: (0.112, 0.443, 0.945, 1.000), 3: (0.032, 0.097, 0.197, 0.304)},
        "bootstrap": {0: (0.054, 0.051, 0.048, None), 1: (0.173, 0.573, 0.953, None),
                      2: (0.223, 0.550, 0.913, None), 3: (0.080, 0.148, 0.283, None)},
    },
    3: {
        "example": "ex2", "missing": False, "detection": "omega1_ex2",
        "asymptotic": {0: (0.017, 0.015, 0.016, 0.019), 1: (0.153, 0.749, 0.996, 1.000),
                       2: (0.027, 0.023, 0.025, 0.026)},
    },
    4: {
        "example": "ex2", "missing": False, "detection": "omega2_ex2",
        "asymptotic": {0: (0.003, 0.010, 0.018, 0.019), 1: (0.085, 0.415, 0.904, 0.989),
                       2: (0.015, 0.037, 0.118, 0.208)},
    },
    5: {
        "example": "ex2", "missing": False, "detection": "estimated",
        "asymptotic": {0: (0.063, 0.049, 0.060, 0.069), 1: (0.186, 0.617, 0.971, 1.000),
                       2: (0.477, 0.934, 1.000, 1.000)},
    },
}


def cell_tolerance(paper: float, runs: int) -> float:
    return 3 * math.sqrt(paper * (1 - paper) / runs) + 0.01


def reproduce_tables(
    which=(1, 2, 3, 4, 5),
    runs: int = 1000,
    seed: int = 0,
    sizes=SIZES,
    bootstrap: bool = False,
    fast: bool = False,
    quantile: str = "paper",
    B: int = 500,
    workers: int | None = None,
) -> dict:
    """Simulate the selected table cells next to the published figures.

    ``quantile`` picks the critical value for the unparenthesised cells;
    ``bootstrap=True`` also runs the parenthesised bootstrap cells.
    """
    cells = []
    for t in which:
        table = PAPER_TABLES[t]
        kinds = [("asymptotic", quantile)]
        if bootstrap and "bootstrap" in table:
            kinds.append(("bootstrap", "bootstrap"))
        for kind, q in kinds:
            for scale_id, figures in table[kind].items():
                for col, n in enumerate(SIZES):
                    paper = figures[col]
                    if paper is None or n not in sizes:
                        continue
                    spec = ScenarioSpec(
                        example=table["example"], scale_id=scale_id, detection=table["detection"],
                        n=n, runs=runs, missing=table["missing"], seed=seed, quantile=q, B=B, fast=fast,
                    )
                    rep = monte_carlo(spec, workers)
                    tol = cell_tolerance(paper, runs)
                    cells.append({
                        "table": t, "scale": f"sigma{scale_id}", "n": n, "quantile": q,
                        "paper": paper, "ours": rep.frequency, "se": rep.se,
                        "tolerance": tol, "within": abs(rep.frequency - paper) <= tol,
                        "mean_statistic": rep.mean_statistic,
                    })
    return {"schema_version": 1, "runs": runs, "seed": seed, "cells": cells}
