from collections.abc import Callable, Sequence
import pathlib

import numpy as np
import pytest

from localflow.series import Dataset, StateSeries, TimeSeries
from localflow.systems import CouplingParams, iterate_coupled, iterate_tent, TentParams

MakeStates = Callable[..., StateSeries]
WriteCsv = Callable[[str], pathlib.Path]
Points = Sequence[Sequence[float]] | Sequence[float]


@pytest.fixture(scope="function")
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def tent_orbit() -> TimeSeries:
    return iterate_tent(TentParams(0.65), n=500)


@pytest.fixture(scope="session")
def driven_maps() -> Dataset:
    """Coupled tent maps where x drives y (eps = 0, mu = 0.4)."""
    return iterate_coupled(CouplingParams(eps=0.0, mu=0.4), n=500)


@pytest.fixture(scope="function")
def make_states() -> MakeStates:
    """Build a StateSeries directly from state rows, with optional successors."""

    def build(points: Points, successors: Sequence[float] | None = None) -> StateSeries:
        rows = np.asarray(points, dtype=np.float64)
        if rows.ndim == 1:
            rows = rows[:, np.newaxis]
        succ = np.zeros(rows.shape[0]) if successors is None else np.asarray(successors, dtype=np.float64)
        return StateSeries(rows, succ, np.arange(rows.shape[0]), rows.shape[1], 1)

    return build


@pytest.fixture(scope="function")
def write_csv(tmp_path: pathlib.Path) -> WriteCsv:
    """Write text to a fresh CSV file under tmp_path and return its path."""
    counter = iter(range(1_000_000))

    def write(text: str) -> pathlib.Path:
        path = tmp_path / f"input-{next(counter)}.csv"
        path.write_text(text, encoding="utf-8")
        return path

    return write
