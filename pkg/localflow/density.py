"""Conditional densities from a sigmoid conditional CDF centered on a local-model prediction.

The conditional CDF of the next value `y` given a state `x` is taken as a sigmoid of `f(x) - y`, where `f` is the
local model. Its derivative in `y` is the logistic density with location `f(x)` and scale `1 / r`, so `r` plays the
role of an inverse noise level: `r -> infinity` is the deterministic (Heaviside) limit.
"""

from dataclasses import dataclass
from enum import Enum
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import expit

from .localmodel import ModelOrder, predict, predict_at_point
from .neighbors import NeighborIndex, query_knn
from .series import StateSeries

FloatOrArray = float | NDArray[np.float64]


class RMode(Enum):
    """How the sigmoid steepness `r` is derived from the residual spread `sigma` of a local model."""

    MATCHED = "matched"
    """r = pi / (sigma * sqrt(3)): the logistic density has standard deviation sigma."""
    INVERSE = "inverse"
    """r = c / sigma."""
    FIXED = "fixed"
    """r = c, independent of sigma."""
    SCALED = "scaled"
    """r = c * sigma."""


@dataclass(frozen=True)
class RPolicy:
    """A rule for choosing `r`, with its coefficient `c` (unused by `matched`)."""

    mode: RMode = RMode.MATCHED
    c: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", RMode(self.mode))
        if not (math.isfinite(self.c) and self.c > 0):
            raise ValueError(f"r-policy coefficient must be positive and finite, got c={self.c}")


@dataclass(frozen=True)
class CpdModel:
    """A logistic conditional density with location `center` (the local prediction) and scale `1 / r`."""

    center: float
    r: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"sigmoid steepness r must be positive and finite, got r={self.r}")
        if not math.isfinite(self.center):
            raise ValueError(f"density center must be finite, got {self.center}")

    def ccdf(self, y: ArrayLike) -> FloatOrArray:
        return ccdf(self, y)

    def cpd(self, y: ArrayLike) -> FloatOrArray:
        return cpd(self, y)

    def log_cpd(self, y: ArrayLike) -> FloatOrArray:
        return log_cpd(self, y)


def _as_result(value: NDArray[np.float64]) -> FloatOrArray:
    return float(value) if value.ndim == 0 else value


def ccdf(model: CpdModel, y: ArrayLike) -> FloatOrArray:
    """Return the sigmoid `S(r * (center - y))`.

    >>> ccdf(CpdModel(center=0.0, r=2.0), 1.0)
    0.11920292202211755

    :param model: The conditional density model
    :param y: The value(s) of the next state
    :returns: A value in [0, 1] per `y`
    """
    u = model.r * (model.center - np.asarray(y, dtype=np.float64))
    return _as_result(expit(u))


def cpd(model: CpdModel, y: ArrayLike) -> FloatOrArray:
    """Return the logistic density `r e^{-u} / (1 + e^{-u})^2`, `u = r (center - y)`, i.e. `|d ccdf / dy|`.

    The maximum, at `y = center`, is `r / 4`.

    :param model: The conditional density model
    :param y: The value(s) of the next state
    :returns: A non-negative density per `y`
    """
    u = model.r * (model.center - np.asarray(y, dtype=np.float64))
    return _as_result(model.r * expit(u) * expit(-u))


def log_cpd(model: CpdModel, y: ArrayLike) -> FloatOrArray:
    """Return the natural logarithm of :py:func:`cpd`, without underflow far from the center."""
    return _as_result(logistic_log_density(model.center, model.r, y))


def logistic_log_density(centers: ArrayLike, r: float, y: ArrayLike) -> NDArray[np.float64]:
    """Vectorized log-density of logistic distributions with locations `centers` and common scale `1 / r`."""
    u = r * (np.asarray(centers, dtype=np.float64) - np.asarray(y, dtype=np.float64))
    return np.asarray(math.log(r) - np.logaddexp(0.0, u) - np.logaddexp(0.0, -u), dtype=np.float64)


def resolve_r(policy: RPolicy, sigma: float) -> float:
    """Turn a residual standard deviation into a sigmoid steepness according to `policy`.

    >>> round(resolve_r(RPolicy(), 1.0), 4)
    1.8138

    :param policy: The r-policy
    :param sigma: Residual standard deviation, already floored
    :returns: The steepness `r`
    :raises ValueError: If the result is not positive and finite
    """
    if policy.mode is RMode.FIXED:
        r = policy.c
    elif sigma <= 0 or not math.isfinite(sigma):
        raise ValueError(f"r-policy {policy.mode.value!r} needs a positive residual sigma, got {sigma}")
    elif policy.mode is RMode.MATCHED:
        r = math.pi / (sigma * math.sqrt(3.0))
    elif policy.mode is RMode.INVERSE:
        r = policy.c / sigma
    else:
        r = policy.c * sigma

    if not (math.isfinite(r) and r > 0):
        raise ValueError(f"r-policy {policy.mode.value!r} with c={policy.c}, sigma={sigma} gives invalid r={r}")
    return r


def conditional_density_at_sample(
    states: StateSeries,
    index: NeighborIndex,
    query_index: int,
    r: float,
    order: ModelOrder = ModelOrder.ZERO,
    *,
    m: int | None = None,
    window: int = 0,
    k: int = 1,
) -> float:
    """Evaluate the conditional density of the observed successor of state `query_index`.

    The density is centered on the local-model prediction at `query_index`.

    :raises InsufficientNeighborsError: If the local model cannot be evaluated at `query_index`
    """
    prediction = predict(states, index, query_index, order, m=m, window=window, k=k)
    return float(cpd(CpdModel(prediction.predicted, r), states.successors[query_index]))


def conditional_profile(
    states: StateSeries,
    index: NeighborIndex,
    point: ArrayLike,
    grid: ArrayLike,
    r: float,
    order: ModelOrder = ModelOrder.ZERO,
    *,
    m: int | None = None,
    k: int = 1,
) -> NDArray[np.float64]:
    """Evaluate the conditional density over a grid of next values, given an arbitrary conditioning point.

    The point need not be a sample: its local prediction is built from the nearest indexed states.
    """
    prediction = predict_at_point(states, index, point, order, m, k=k)
    return np.atleast_1d(np.asarray(cpd(CpdModel(prediction.predicted, r), grid), dtype=np.float64))


def marginal_knn(
    states: StateSeries, index: NeighborIndex, query_index: int, k: int = 1, window: int = 0
) -> float:
    """Return the k-th nearest neighbor density estimate `k / (N * ||x - x_k||)` at state `query_index`.

    No volume factor is applied; `N` is the number of states.

    :raises ValueError: If the k-th neighbor coincides with the query (duplicate states)
    """
    neighbors = query_knn(index, query_index, k, window)
    kth = float(neighbors.distances[-1])
    if kth == 0.0:
        duplicates = neighbors.neighbor_indices[neighbors.distances == 0.0].tolist()
        raise ValueError(
            f"state {query_index} coincides with states {duplicates}; the k-NN marginal is undefined for k={k}"
        )
    return k / (len(states) * kth)


def marginal_profile(states: StateSeries, index: NeighborIndex, k: int = 1, window: int = 0) -> NDArray[np.float64]:
    """Return :py:func:`marginal_knn` at every state."""
    return np.array([marginal_knn(states, index, i, k, window) for i in range(len(states))])
