"""Multivariate local polynomial smoothing.

The smoother is linear in the responses, so every fit is carried around as
its smoother matrix ``L`` (rows = evaluation points, columns = sample rows):
the fitted value at a point is ``L @ y``.  Leave-one-out residuals then come
for free from the diagonal of ``L`` at the design points, and resampled
responses can be smoothed in bulk without refitting.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .data import Dataset
from .kernels import KernelSpec, default_kernel, product_weight

RCOND = 1e-10  # smallest accepted eigenvalue ratio of a local Gram matrix
LOO_TOL = 1e-10  # 1 - L_jj below this means the leave-one-out fit is singular
MAX_DOUBLINGS = 3
SCALE_FLOOR = 1e-10
DEFAULT_CV_GRID = tuple(float(c) for c in np.geomspace(0.2, 5.0, 10))

# status codes per evaluation point
FAILED, OK, RIDGED = -1, 0, 1  # >= 2: bandwidth doubled (status - 1) times


class SmootherError(RuntimeError):
    """The local design is singular and cannot be stabilised."""


@dataclass(frozen=True)
class MultiIndexSet:
    d: int
    m: int
    indices: tuple[tuple[int, ...], ...]

    def __len__(self):
        return len(self.indices)

    def as_array(self) -> np.ndarray:
        return np.array(self.indices, dtype=int).reshape(len(self.indices), self.m)


@lru_cache(maxsize=None)
def multi_index_set(d: int, m: int) -> MultiIndexSet:
    """All m-tuples with total degree <= d, graded then reverse-lexicographic."""
    if d < 0 or m < 1:
        raise ValueError("need d >= 0 and m >= 1")
    indices = []
    for total in range(d + 1):
        level = [i for i in itertools.product(range(total + 1), repeat=m) if sum(i) == total]
        indices.extend(sorted(level, reverse=True))
    return MultiIndexSet(d, m, tuple(indices))


def basis_eval(i: Sequence[int], x: Sequence[float]) -> float:
    """``prod_k x_k^{i_k} / i_k!``."""
    if len(i) != len(x):
        raise ValueError("multi-index and point dimensions differ")
    value = 1.0
    for ik, xk in zip(i, x):
        value *= xk**ik / math.factorial(ik)
    return value


def basis_matrix(index_set: MultiIndexSet, U: np.ndarray) -> np.ndarray:
    """Evaluate every basis function at ``U`` (..., m) -> (..., p)."""
    # scaled powers u_k^j / j!, built by repeated multiplication
    powers = [[np.ones(U.shape[:-1])] for _ in range(index_set.m)]
    for k in range(index_set.m):
        for j in range(1, index_set.d + 1):
            powers[k].append(powers[k][-1] * U[..., k] / j)
    out = np.empty(U.shape[:-1] + (len(index_set),))
    for col, i in enumerate(index_set.indices):
        term = powers[0][i[0]]
        for k in range(1, index_set.m):
            term = term * powers[k][i[k]]
        out[..., col] = term
    return out


def bandwidth_rule(c: float, n: int, degree: int, gamma: float = 1.0) -> float:
    """``c * (n log n)^(-1/(2s))`` with smoothness ``s = degree + gamma``."""
    if c <= 0:
        raise ValueError("bandwidth constant must be positive")
    s = degree + gamma
    nlogn = n * math.log(n) if n > 1 else 1.0
    return c * nlogn ** (-1.0 / (2.0 * s))


@dataclass(frozen=True)
class SmootherConfig:
    """Settings for the local polynomial smoother.

    ``bandwidth`` is either a proportionality constant ``c`` for the rule
    :func:`bandwidth_rule` or ``"cv"`` to pick ``c`` from ``cv_grid`` by
    leave-one-out cross-validation.  ``kernel=None`` means the smooth kernel
    of order m+2.
    """

    degree: int = 1
    bandwidth: float | str = "cv"
    cv_grid: tuple[float, ...] = DEFAULT_CV_GRID
    kernel: KernelSpec | None = None
    ridge: float = 0.0
    holder_gamma: float = 1.0

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be nonnegative")
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "cv":
                raise ValueError("bandwidth must be a positive number or 'cv'")
        elif not self.bandwidth > 0:
            raise ValueError("bandwidth constant must be positive")
        if not self.cv_grid or any(c <= 0 for c in self.cv_grid):
            raise ValueError("cv grid must be a nonempty list of positive constants")
        if self.ridge < 0:
            raise ValueError("ridge must be nonnegative")
        if not 0 < self.holder_gamma <= 1:
            raise ValueError("holder_gamma must lie in (0, 1]")
        object.__setattr__(self, "cv_grid", tuple(float(c) for c in self.cv_grid))

    def kernels(self, m: int) -> tuple[KernelSpec, ...]:
        return (self.kernel or default_kernel(m),) * m

    def absolute_bandwidth(self, c: float, n: int) -> float:
        return bandwidth_rule(c, n, self.degree, self.holder_gamma)


def _well_conditioned(G):
    evals = np.linalg.eigvalsh(G)
    top = evals[:, -1]
    return np.isfinite(top) & (top > 0) & (evals[:, 0] > RCOND * top)


def _solve_rows(W, Psi, G):
    e0 = np.zeros(G.shape[:2])
    e0[:, 0] = 1.0
    a = np.linalg.solve(G, e0[..., None])
    return W * np.matmul(Psi, a)[..., 0]


def _rows_once(X, mask, points, h, index_set, kernels, ridge, allow_ridge):
    """One pass at fixed bandwidths; status OK, RIDGED or FAILED per point."""
    p = len(index_set)
    U = (X[None, :, :] - points[:, None, :]) / h[:, None, None]
    W = product_weight(kernels, U)
    if mask is not None:
        W = W * mask
    Psi = basis_matrix(index_set, U)
    G = np.matmul((Psi * W[..., None]).transpose(0, 2, 1), Psi)
    if ridge > 0:
        G = G + ridge * np.eye(p)
    rows = np.zeros(W.shape)
    status = np.full(W.shape[0], FAILED)
    good = _well_conditioned(G)
    if good.any():
        rows[good] = _solve_rows(W[good], Psi[good], G[good])
        status[good] = OK
    bad = np.flatnonzero(~good)
    if allow_ridge and bad.size:
        trace = np.trace(G[bad], axis1=1, axis2=2)
        Gr = G[bad] + (1e-8 * trace / p)[:, None, None] * np.eye(p)
        fixed = _well_conditioned(Gr) & (trace > 0)
        if fixed.any():
            rows[bad[fixed]] = _solve_rows(W[bad[fixed]], Psi[bad[fixed]], Gr[fixed])
            status[bad[fixed]] = RIDGED
    return rows, status


def smoother_rows(
    X: np.ndarray,
    points: np.ndarray,
    h: float | np.ndarray,
    degree: int,
    kernels: Sequence[KernelSpec],
    mask: np.ndarray | None = None,
    ridge: float = 0.0,
    fallback: bool = True,
    chunk: int = 2_000_000,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Smoother-matrix rows at ``points``.

    Returns ``(rows, status, h_used)``.  With ``fallback`` a singular local
    Gram matrix first gets a ridge of ``1e-8 * trace / p``; if that does not
    help (empty window) the bandwidth at that point is doubled, at most
    three times.  Without ``fallback`` singular points keep status
    ``FAILED`` and zero rows.
    """
    X = np.asarray(X, dtype=float)
    points = np.atleast_2d(np.asarray(points, dtype=float))
    q, n = points.shape[0], X.shape[0]
    index_set = multi_index_set(degree, X.shape[1])
    h = np.broadcast_to(np.asarray(h, dtype=float), (q,)).copy()
    if np.any(~(h > 0)):
        raise ValueError("bandwidth must be positive")

    rows = np.zeros((q, n))
    status = np.zeros(q, dtype=int)
    step = max(1, chunk // max(1, n * len(index_set) * X.shape[1]))
    for lo in range(0, q, step):
        sl = slice(lo, min(q, lo + step))
        rows[sl], status[sl] = _rows_once(X, mask, points[sl], h[sl], index_set, kernels, ridge, fallback)
    if not fallback:
        return rows, status, h
    for k in np.flatnonzero(status == FAILED):
        for attempt in range(1, MAX_DOUBLINGS + 1):
            h[k] *= 2.0
            r, s = _rows_once(X, mask, points[k : k + 1], h[k : k + 1], index_set, kernels, ridge, True)
            if s[0] != FAILED:
                rows[k], status[k] = r[0], 1 + attempt
                break
        else:
            raise SmootherError(
                f"singular local design at x={points[k].tolist()} even after "
                f"{MAX_DOUBLINGS} bandwidth doublings"
            )
    return rows, status, h


@dataclass(frozen=True, eq=False)
class SmootherFit:
    """A fitted local polynomial smoother.

    ``operator`` is the smoother matrix at the n design points, ``fitted``
    equals ``operator @ y``.
    """

    config: SmootherConfig
    constant: float | None
    bandwidth: float
    fitted: np.ndarray
    operator: np.ndarray
    status: np.ndarray
    _X: np.ndarray = field(repr=False)
    _y: np.ndarray = field(repr=False)
    _mask: np.ndarray | None = field(repr=False)

    def evaluate(self, x) -> np.ndarray:
        """Fitted regression at arbitrary points in [0, 1]^m."""
        pts = np.asarray(x, dtype=float).reshape(-1, self._X.shape[1])
        rows, _, _ = smoother_rows(
            self._X, pts, self.bandwidth, self.config.degree,
            self.config.kernels(self._X.shape[1]), self._mask, self.config.ridge,
        )
        return _apply(rows, self._y)

    def __call__(self, x):
        return self.evaluate(x)


def _apply(rows: np.ndarray, y: np.ndarray) -> np.ndarray:
    return (rows * y).sum(axis=1)


def _target(dataset: Dataset, target: str) -> np.ndarray:
    if target == "response":
        return np.asarray(dataset.Y)
    if target == "response_squared":
        return np.asarray(dataset.Y) ** 2
    raise ValueError(f"unknown target {target!r}")


def _mask(dataset: Dataset) -> np.ndarray | None:
    return None if dataset.delta is None else dataset.delta.astype(float)


def _n_obs(dataset: Dataset) -> int:
    return int(dataset.observed.sum())


def design_rows(dataset: Dataset, config: SmootherConfig, h: float, fallback: bool = True):
    """Smoother rows evaluated at every design point of ``dataset``."""
    return smoother_rows(
        dataset.X, dataset.X, h, config.degree, config.kernels(dataset.m),
        _mask(dataset), config.ridge, fallback=fallback,
    )


def cv_scores(dataset: Dataset, config: SmootherConfig, grid: Sequence[float], targets: np.ndarray) -> np.ndarray:
    """Leave-one-out mean squared prediction error per (grid value, target).

    Infeasible grid values (a singular leave-one-out fit at some observed
    row) score ``inf``.
    """
    targets = np.asarray(targets, dtype=float)
    if targets.ndim == 1:
        targets = targets[:, None]
    obs = np.flatnonzero(dataset.observed)
    n_obs = obs.size
    scores = np.full((len(grid), targets.shape[1]), np.inf)
    for g, c in enumerate(grid):
        h = config.absolute_bandwidth(c, n_obs)
        rows, status, _ = smoother_rows(
            dataset.X, dataset.X[obs], h, config.degree, config.kernels(dataset.m),
            _mask(dataset), config.ridge, fallback=False,
        )
        if np.any(status != OK):
            continue
        lev = 1.0 - rows[np.arange(n_obs), obs]
        if np.any(lev < LOO_TOL):
            continue
        fitted = np.stack([_apply(rows, t) for t in targets.T], axis=1)
        loo = (targets[obs] - fitted) / lev[:, None]
        scores[g] = np.mean(loo**2, axis=0)
    return scores


def _pick(grid: Sequence[float], scores: np.ndarray, scale: float) -> float:
    finite = np.isfinite(scores)
    if not finite.any():
        raise SmootherError("every bandwidth in the cross-validation grid gives a singular fit")
    best = scores[finite].min()
    tol = 1e-10 * max(scale, np.finfo(float).tiny)
    order = np.argsort(grid, kind="stable")
    for g in order:
        if finite[g] and scores[g] <= best + tol:
            return float(grid[g])
    raise AssertionError("unreachable")


def cv_bandwidth(
    dataset: Dataset,
    config: SmootherConfig,
    grid: Sequence[float] | None = None,
    target: str = "response",
) -> float:
    """Grid constant ``c`` minimising the leave-one-out prediction error.

    Ties (within 1e-10 of the response variance) go to the smaller ``c``.
    """
    grid = tuple(config.cv_grid if grid is None else grid)
    if not grid:
        raise ValueError("empty cross-validation grid")
    if len(grid) == 1:
        return float(grid[0])
    y = _target(dataset, target)
    scores = cv_scores(dataset, config, grid, y)[:, 0]
    return _pick(grid, scores, float(np.var(y[dataset.observed])))


def cv_bandwidths(dataset: Dataset, config: SmootherConfig, grid: Sequence[float] | None = None) -> tuple[float, float]:
    """CV constants for the response and its square, sharing the smoother rows."""
    grid = tuple(config.cv_grid if grid is None else grid)
    if len(grid) == 1:
        return float(grid[0]), float(grid[0])
    y = np.asarray(dataset.Y)
    targets = np.stack([y, y**2], axis=1)
    scores = cv_scores(dataset, config, grid, targets)
    obs = dataset.observed
    return (
        _pick(grid, scores[:, 0], float(np.var(y[obs]))),
        _pick(grid, scores[:, 1], float(np.var(y[obs] ** 2))),
    )


def fit(
    dataset: Dataset,
    target: str = "response",
    config: SmootherConfig | None = None,
    *,
    constant: float | None = None,
    bandwidth: float | None = None,
) -> SmootherFit:
    """Fit the local polynomial smoother to ``Y`` or ``Y**2``.

    The bandwidth is, in order of precedence: the absolute ``bandwidth``
    argument, the rule applied to ``constant``, the rule applied to
    ``config.bandwidth``, or the cross-validated constant.  Rows with
    ``delta == 0`` receive zero weight.
    """
    config = config or SmootherConfig()
    n_obs = _n_obs(dataset)
    if bandwidth is None:
        if constant is None:
            if config.bandwidth == "cv":
                constant = cv_bandwidth(dataset, config, target=target)
            else:
                constant = float(config.bandwidth)
        bandwidth = config.absolute_bandwidth(constant, n_obs)
    elif not bandwidth > 0:
        raise ValueError("bandwidth must be positive")
    y = _target(dataset, target)
    rows, status, _ = design_rows(dataset, config, bandwidth)
    return SmootherFit(
        config=config,
        constant=constant,
        bandwidth=float(bandwidth),
        fitted=_apply(rows, y),
        operator=rows,
        status=status,
        _X=np.asarray(dataset.X),
        _y=y,
        _mask=_mask(dataset),
    )


def residuals(dataset: Dataset, config: SmootherConfig | None = None, **kwargs) -> np.ndarray:
    """``Y_j - r(X_j)`` for the observed rows, in row order."""
    f = fit(dataset, "response", config, **kwargs)
    obs = dataset.observed
    return np.asarray(dataset.Y)[obs] - f.fitted[obs]


def scale_from_fits(mean_fit: SmootherFit, square_fit: SmootherFit) -> np.ndarray:
    return np.sqrt(np.maximum(square_fit.fitted - mean_fit.fitted**2, SCALE_FLOOR))


def fit_moments(
    dataset: Dataset,
    config: SmootherConfig | None = None,
    constants: tuple[float, float] | None = None,
) -> tuple[SmootherFit, SmootherFit]:
    """Fits of the first two conditional moments, each with its own bandwidth."""
    config = config or SmootherConfig()
    if constants is None:
        if config.bandwidth == "cv":
            constants = cv_bandwidths(dataset, config)
        else:
            constants = (float(config.bandwidth),) * 2
    return (
        fit(dataset, "response", config, constant=constants[0]),
        fit(dataset, "response_squared", config, constant=constants[1]),
    )


def scale_estimate(dataset: Dataset, config: SmootherConfig | None = None) -> np.ndarray:
    """``sigma_hat(X_j) = sqrt(max(r2_hat - r_hat^2, 1e-10))`` at every row."""
    return scale_from_fits(*fit_moments(dataset, config))

