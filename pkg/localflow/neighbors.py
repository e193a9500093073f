from enum import auto, Enum
from typing import NamedTuple

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from .series import StateSeries

# above this dimension a k-d tree prunes too little to beat a linear scan
MAX_TREE_DIMENSION = 16

# candidates within this relative slack of the k-th tree distance are re-ranked exactly
_RADIUS_SLACK = 1e-9


class InsufficientNeighborsError(ValueError):
    """Raised when fewer admissible neighbors exist than were requested."""


class SearchBackend(Enum):
    """An enumeration of exact nearest-neighbor search structures."""

    KD_TREE = auto()
    BRUTE_FORCE = auto()


class NeighborSet(NamedTuple):
    """The nearest neighbors of one query, sorted by distance with ties broken by lower index."""

    query_index: int | None
    neighbor_indices: NDArray[np.intp]
    distances: NDArray[np.float64]


class NeighborIndex:
    """An exact Euclidean k-NN index over the rows of a state matrix.

    Distances are accumulated block by block (one block per embedded channel, see
    :py:attr:`StateSeries.blocks`) and neighbors are ranked on the exact squared distance, so both
    backends return identical results and duplicating a block never reorders neighbors.
    """

    def __init__(self, states: StateSeries, *, backend: SearchBackend | None = None) -> None:
        if len(states) < 2:
            raise ValueError(f"a neighbor index needs at least 2 states, got {len(states)}")

        if backend is None:
            backend = SearchBackend.KD_TREE if states.d <= MAX_TREE_DIMENSION else SearchBackend.BRUTE_FORCE

        self.points = states.states
        self.blocks = states.blocks
        self.backend = backend
        self._tree = cKDTree(self.points) if backend is SearchBackend.KD_TREE else None

    def __len__(self) -> int:
        return int(self.points.shape[0])

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(n={len(self)}, d={self.points.shape[1]}, backend={self.backend.name})"

    def squared_distances(
        self, point: NDArray[np.float64], candidates: NDArray[np.intp] | None = None
    ) -> NDArray[np.float64]:
        """Return exact squared distances from `point` to the given rows (all rows by default)."""
        rows = self.points if candidates is None else self.points[candidates]
        diff = rows - point
        sq = diff * diff

        total = np.zeros(rows.shape[0])
        start = 0
        for width in self.blocks:
            total = total + sq[:, start : start + width].sum(axis=1)
            start += width
        return total

    def _candidates(self, point: NDArray[np.float64], k: int, lo: int, hi: int) -> NDArray[np.intp]:
        """Return a superset of the k nearest rows outside the excluded range [lo, hi]."""
        n = len(self)
        if self._tree is None:
            return np.arange(n, dtype=np.intp)

        n_excluded = max(0, hi - lo + 1)
        kq = min(n, k + n_excluded + 1)
        while True:
            dist, idx = self._tree.query(point, k=kq)
            dist = np.atleast_1d(dist)
            idx = np.atleast_1d(idx).astype(np.intp)
            admissible = (idx < lo) | (idx > hi)

            if kq == n:
                return idx

            if np.count_nonzero(admissible) >= k:
                radius = dist[admissible][k - 1] * (1.0 + _RADIUS_SLACK) + np.finfo(np.float64).tiny
                if dist[-1] > radius:
                    return idx[dist <= radius]

            kq = min(n, 2 * kq)

    def _select(
        self, point: NDArray[np.float64], k: int, lo: int, hi: int
    ) -> tuple[NDArray[np.intp], NDArray[np.float64]]:
        candidates = self._candidates(point, k, lo, hi)
        candidates = candidates[(candidates < lo) | (candidates > hi)]
        if candidates.size < k:
            raise InsufficientNeighborsError(f"requested {k} neighbors but only {candidates.size} are admissible")

        sq = self.squared_distances(point, candidates)
        order = np.lexsort((candidates, sq))[:k]
        return candidates[order], np.sqrt(sq[order])


def build_index(states: StateSeries, *, backend: SearchBackend | None = None) -> NeighborIndex:
    """Build an exact nearest-neighbor index over the rows of `states`.

    :param states: The states to index; at least 2 are required
    :param backend: Force a search structure; by default a k-d tree for d <= 16, brute force otherwise
    :returns: The index
    :raises ValueError: If fewer than 2 states are given
    """
    return NeighborIndex(states, backend=backend)


def query_knn(index: NeighborIndex, query_index: int, k: int, exclusion_window: int = 0) -> NeighborSet:
    """Return the `k` admissible states nearest to state `query_index`.

    A state `j` is admissible when `|j - query_index| > exclusion_window`; the query itself is never returned.

    :param index: The neighbor index
    :param query_index: Row of the query state
    :param k: Number of neighbors
    :param exclusion_window: Temporal exclusion half-width (0 excludes only the query itself)
    :returns: The neighbors, ascending by distance, ties broken by lower index
    :raises InsufficientNeighborsError: If fewer than `k` admissible states exist
    """
    n = len(index)
    if not 0 <= query_index < n:
        raise IndexError(f"query index {query_index} out of range for {n} states")
    if k < 1:
        raise ValueError(f"k must be positive, got {k}")
    if exclusion_window < 0:
        raise ValueError(f"exclusion window must be non-negative, got {exclusion_window}")

    lo = max(0, query_index - exclusion_window)
    hi = min(n - 1, query_index + exclusion_window)
    admissible = n - (hi - lo + 1)
    if k > admissible:
        raise InsufficientNeighborsError(
            f"state {query_index}: requested {k} neighbors but only {admissible} of {n} states lie outside "
            f"the exclusion window of {exclusion_window}"
        )

    indices, distances = index._select(index.points[query_index], k, lo, hi)
    return NeighborSet(query_index, indices, distances)


def query_point(index: NeighborIndex, point: ArrayLike, k: int) -> NeighborSet:
    """Return the `k` states nearest to an arbitrary point; no state is excluded.

    :param index: The neighbor index
    :param point: The query point, of the index's dimension
    :param k: Number of neighbors
    :returns: The neighbors, ascending by distance, ties broken by lower index
    """
    p = np.atleast_1d(np.asarray(point, dtype=np.float64))
    if p.shape != (index.points.shape[1],):
        raise ValueError(f"query point has shape {p.shape}, expected ({index.points.shape[1]},)")
    if not 1 <= k <= len(index):
        raise InsufficientNeighborsError(f"requested {k} neighbors from an index of {len(index)} states")

    indices, distances = index._select(p, k, 0, -1)
    return NeighborSet(None, indices, distances)


def knn_table(
    index: NeighborIndex, k: int, exclusion_window: int = 0
) -> tuple[NDArray[np.intp], NDArray[np.float64]]:
    """Return the `k` nearest admissible neighbors of every state, as (N, k) index and distance matrices."""
    n = len(index)
    indices = np.empty((n, k), dtype=np.intp)
    distances = np.empty((n, k))
    for i in range(n):
        result = query_knn(index, i, k, exclusion_window)
        indices[i] = result.neighbor_indices
        distances[i] = result.distances
    return indices, distances
