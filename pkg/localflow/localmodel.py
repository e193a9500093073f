from dataclasses import dataclass
from enum import IntEnum
import logging
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .neighbors import build_index, InsufficientNeighborsError, NeighborIndex, query_knn, query_point
from .series import StateSeries

logger = logging.getLogger(__name__)

# relative to the successor range; keeps r finite on perfectly predictable data
SIGMA_FLOOR = 1e-12


class ModelOrder(IntEnum):
    """The order of the local Taylor expansion of the dynamical rule."""

    ZERO = 0
    FIRST = 1


class LocalPrediction(NamedTuple):
    """A one-step-ahead prediction and the nearest neighbor it was built around."""

    predicted: float
    neighbor_used: int
    fallback: bool = False


class ResidualStats(NamedTuple):
    """Spread of the leave-self-out prediction errors of a local model."""

    sigma: float
    count: int
    skipped: int = 0


@dataclass(frozen=True, eq=False)
class LocalModelFit:
    """Predictions of a local model at every state of a series.

    States without enough admissible neighbors are not evaluated; their prediction is NaN.
    """

    predicted: NDArray[np.float64]
    evaluated: NDArray[np.bool_]
    errors: NDArray[np.float64]
    stats: ResidualStats
    order: ModelOrder
    fallbacks: int = 0

    @property
    def residuals(self) -> NDArray[np.float64]:
        """Prediction errors (successor - predicted) of the evaluated states, in state order."""
        return self.errors[self.evaluated]


def default_m(d: int) -> int:
    """Default neighborhood size for first-order fits: twice the number of affine parameters."""
    return 2 * (d + 1)


def floor_sigma(sigma: float, successors: ArrayLike) -> float:
    """Apply the residual floor `max(sigma, 1e-12 * range)`; an absolute 1e-12 is used for constant data."""
    scale = float(np.ptp(np.asarray(successors, dtype=np.float64)))
    return max(sigma, SIGMA_FLOOR * scale if scale > 0 else SIGMA_FLOOR)


def _drop_duplicate_columns(design: NDArray[np.float64]) -> NDArray[np.float64]:
    # duplicated conditioning coordinates add no slope information
    keep: list[int] = []
    for j in range(design.shape[1]):
        if not any(np.array_equal(design[:, j], design[:, i]) for i in keep):
            keep.append(j)
    return design[:, keep]


def _affine_prediction(states: StateSeries, neighbors: NDArray[np.intp], point: NDArray[np.float64]) -> float | None:
    """Least-squares affine fit of successor on state over `neighbors`, evaluated at `point`.

    Returns None when the design is rank deficient.
    """
    offsets = states.states[neighbors] - point
    design = _drop_duplicate_columns(np.column_stack([np.ones(neighbors.size), offsets]))
    if np.linalg.matrix_rank(design) < design.shape[1]:
        return None

    coef, *_ = np.linalg.lstsq(design, states.successors[neighbors], rcond=None)
    # centered at the query point, so the intercept is the prediction
    return float(coef[0])


def _resolve_m(m: int | None, d: int) -> int:
    m = default_m(d) if m is None else m
    if m < d + 1:
        raise ValueError(f"a first-order fit in dimension d={d} needs m >= {d + 1} neighbors, got m={m}")
    return m


def predict_zero_order(
    states: StateSeries, index: NeighborIndex, query_index: int, window: int = 0, *, k: int = 1
) -> LocalPrediction:
    """Predict the successor of state `query_index` by the successor of its nearest admissible neighbor.

    With `k > 1` the successors of the `k` nearest neighbors are averaged.

    :param states: The state series the index was built on
    :param index: Neighbor index over `states`
    :param query_index: The state to predict from
    :param window: Temporal exclusion window
    :param k: Number of neighbors to average
    :returns: The prediction
    :raises InsufficientNeighborsError: If no admissible neighbor exists
    """
    neighbors = query_knn(index, query_index, k, window).neighbor_indices
    if k == 1:
        predicted = float(states.successors[neighbors[0]])
    else:
        predicted = float(np.mean(states.successors[neighbors]))
    return LocalPrediction(predicted, int(neighbors[0]))


def predict_first_order(
    states: StateSeries, index: NeighborIndex, query_index: int, m: int | None = None, window: int = 0
) -> LocalPrediction:
    """Predict the successor of state `query_index` with an affine map fitted over its `m` nearest neighbors.

    Rank-deficient neighborhoods fall back to the zero-order prediction.

    :param states: The state series the index was built on
    :param index: Neighbor index over `states`
    :param query_index: The state to predict from
    :param m: Neighborhood size, at least `d + 1` (default `2 * (d + 1)`)
    :param window: Temporal exclusion window
    :returns: The prediction
    :raises ValueError: If `m < d + 1`
    :raises InsufficientNeighborsError: If fewer than `m` admissible neighbors exist
    """
    m = _resolve_m(m, states.d)
    neighbors = query_knn(index, query_index, m, window).neighbor_indices
    predicted = _affine_prediction(states, neighbors, states.states[query_index])

    if predicted is None:
        return LocalPrediction(float(states.successors[neighbors[0]]), int(neighbors[0]), fallback=True)
    return LocalPrediction(predicted, int(neighbors[0]))


def predict_at_point(
    states: StateSeries,
    index: NeighborIndex,
    point: ArrayLike,
    order: ModelOrder = ModelOrder.ZERO,
    m: int | None = None,
    *,
    k: int = 1,
) -> LocalPrediction:
    """Predict the successor of an arbitrary point (not necessarily a sample) from the indexed states."""
    p = np.atleast_1d(np.asarray(point, dtype=np.float64))
    order = ModelOrder(order)
    if order is ModelOrder.ZERO:
        neighbors = query_point(index, p, k).neighbor_indices
        return LocalPrediction(float(np.mean(states.successors[neighbors])), int(neighbors[0]))

    neighbors = query_point(index, p, _resolve_m(m, states.d)).neighbor_indices
    predicted = _affine_prediction(states, neighbors, p)
    if predicted is None:
        return LocalPrediction(float(states.successors[neighbors[0]]), int(neighbors[0]), fallback=True)
    return LocalPrediction(predicted, int(neighbors[0]))


def predict(
    states: StateSeries,
    index: NeighborIndex,
    query_index: int,
    order: ModelOrder = ModelOrder.ZERO,
    *,
    m: int | None = None,
    window: int = 0,
    k: int = 1,
) -> LocalPrediction:
    """Dispatch to the zero- or first-order predictor."""
    if ModelOrder(order) is ModelOrder.ZERO:
        return predict_zero_order(states, index, query_index, window, k=k)
    return predict_first_order(states, index, query_index, m, window)


def fit_local_model(
    states: StateSeries,
    order: ModelOrder = ModelOrder.ZERO,
    m: int | None = None,
    window: int = 0,
    *,
    k: int = 1,
    index: NeighborIndex | None = None,
) -> LocalModelFit:
    """Evaluate a local model at every state, leaving each state out of its own neighborhood.

    :param states: The state series
    :param order: Zero or first order
    :param m: First-order neighborhood size
    :param window: Temporal exclusion window
    :param k: Zero-order neighbor count
    :param index: A prebuilt index over `states`, if available
    :returns: Predictions, evaluation mask and residual statistics
    :raises ValueError: If no state can be evaluated
    """
    order = ModelOrder(order)
    if order is ModelOrder.FIRST:
        m = _resolve_m(m, states.d)
    if index is None:
        index = build_index(states)

    n = len(states)
    predicted = np.full(n, np.nan)
    evaluated = np.zeros(n, dtype=np.bool_)
    fallbacks = 0

    for i in range(n):
        try:
            prediction = predict(states, index, i, order, m=m, window=window, k=k)
        except InsufficientNeighborsError:
            continue
        predicted[i] = prediction.predicted
        evaluated[i] = True
        fallbacks += prediction.fallback

    count = int(np.count_nonzero(evaluated))
    if count == 0:
        raise ValueError(
            f"no state of {states.name or 'the series'} can be evaluated with order={order.value}, "
            f"m={m}, k={k}, window={window} ({n} states)"
        )
    if fallbacks:
        logger.debug("%s: %d of %d first-order fits fell back to zero order", states.name, fallbacks, count)

    errors = np.where(evaluated, states.successors - predicted, np.nan)
    sigma = float(np.std(errors[evaluated]))
    stats = ResidualStats(sigma, count, n - count)
    return LocalModelFit(predicted, evaluated, errors, stats, order, fallbacks)


def residual_sigma(
    states: StateSeries,
    order: ModelOrder = ModelOrder.ZERO,
    m: int | None = None,
    window: int = 0,
    *,
    k: int = 1,
    index: NeighborIndex | None = None,
) -> ResidualStats:
    """Return the population standard deviation of the leave-self-out prediction errors of a local model.

    States without enough admissible neighbors are skipped and counted in `ResidualStats.skipped`.
    """
    return fit_local_model(states, order, m, window, k=k, index=index).stats
