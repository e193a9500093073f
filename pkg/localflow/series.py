from collections.abc import Iterator, Mapping
import csv
from dataclasses import dataclass, field
import io
import logging
import math
import sys

import numpy as np
from numpy.typing import ArrayLike, NDArray

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

from .files import access_error_handler, PathArg, write_text_atomic

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
IntArray = NDArray[np.intp]


def _frozen_array(values: ArrayLike, *, dtype: type = np.float64) -> NDArray[np.generic]:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """A named scalar channel sampled at uniform intervals.

    :param name: The channel label
    :param values: The samples; must be finite and at least two long
    :param dt: The sampling interval in seconds
    """

    name: str
    values: FloatArray
    dt: float = 1.0

    def __post_init__(self) -> None:
        values = _frozen_array(self.values)
        if values.ndim != 1:
            raise ValueError(f"channel {self.name!r}: values must be one-dimensional, got shape {values.shape}")
        if values.size < 2:
            raise ValueError(f"channel {self.name!r}: at least 2 samples are required, got {values.size}")
        if not np.all(np.isfinite(values)):
            bad = int(np.flatnonzero(~np.isfinite(values))[0])
            raise ValueError(f"channel {self.name!r}: non-finite value at sample {bad}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"channel {self.name!r}: dt must be positive and finite, got {self.dt}")

        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.name!r}, n={len(self)}, dt={self.dt})"

    def with_values(self, values: ArrayLike) -> Self:
        """Return a copy of this channel with its samples replaced."""
        return type(self)(self.name, np.asarray(values, dtype=np.float64), self.dt)


def standardize(series: TimeSeries) -> TimeSeries:
    """Return the z-scored version of a channel (zero mean, unit population standard deviation).

    :param series: The channel to rescale
    :returns: The rescaled channel, with the same name and dt
    :raises ValueError: If the channel is constant
    """
    std = float(np.std(series.values))
    if std == 0.0:
        raise ValueError(f"channel {series.name!r} is constant and cannot be standardized")
    return series.with_values((series.values - np.mean(series.values)) / std)


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered collection of equally long, uniquely named channels."""

    channels: tuple[TimeSeries, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        channels = tuple(self.channels)
        names = [c.name for c in channels]
        if len(set(names)) != len(names):
            duplicated = sorted({n for n in names if names.count(n) > 1})
            raise ValueError(f"channel names must be unique, duplicated: {', '.join(duplicated)}")

        lengths = {len(c) for c in channels}
        if len(lengths) > 1:
            raise ValueError(f"all channels must share the same length, got lengths {sorted(lengths)}")

        object.__setattr__(self, "channels", channels)

    @classmethod
    def from_columns(cls, columns: Mapping[str, ArrayLike], *, dt: float = 1.0) -> Self:
        """Build a dataset from a mapping of channel name to samples, in mapping order.

        >>> Dataset.from_columns({"x": [0.1, 0.3], "y": [0.2, 0.4]}).names
        ('x', 'y')
        """
        return cls(tuple(TimeSeries(name, np.asarray(v, dtype=np.float64), dt) for name, v in columns.items()))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.channels)

    @property
    def length(self) -> int:
        """The number of samples per channel (0 for an empty dataset)."""
        return len(self.channels[0]) if self.channels else 0

    def __len__(self) -> int:
        return len(self.channels)

    def __iter__(self) -> Iterator[TimeSeries]:
        return iter(self.channels)

    def __getitem__(self, name: str) -> TimeSeries:
        for channel in self.channels:
            if channel.name == name:
                return channel
        raise KeyError(f"unknown channel {name!r}; available channels: {', '.join(self.names) or '(none)'}")

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}(names={self.names}, length={self.length})"

    def standardized(self) -> Self:
        """Return a copy with every channel z-scored."""
        return type(self)(tuple(standardize(c) for c in self.channels))

    def as_matrix(self) -> FloatArray:
        """Return the samples as a (length, channels) matrix."""
        return np.column_stack([c.values for c in self.channels])


@dataclass(frozen=True, eq=False)
class StateSeries:
    """Delay-embedded states aligned with the scalar value that follows each of them.

    `blocks` records the widths of the channel blocks that were concatenated into each state: a plain
    delay embedding has a single block of width `d`, a joint embedding one block per conditioning channel.

    :param states: (N, d) matrix of embedded states
    :param successors: length-N successor values, taken one sample after the last coordinate of each state
    :param source_indices: original time index of the last coordinate of each state
    :param d: embedding dimension (total width of all blocks)
    :param tau: embedding delay in samples
    """

    states: FloatArray
    successors: FloatArray
    source_indices: IntArray
    d: int
    tau: int
    blocks: tuple[int, ...] = ()
    name: str = ""

    def __post_init__(self) -> None:
        states = _frozen_array(self.states)
        if states.ndim != 2:
            raise ValueError(f"states must be a 2-D matrix, got shape {states.shape}")
        successors = _frozen_array(self.successors)
        source_indices = _frozen_array(self.source_indices, dtype=np.intp)

        if states.shape[0] != successors.size or successors.size != source_indices.size:
            raise ValueError(
                f"states ({states.shape[0]} rows), successors ({successors.size}) and source indices "
                f"({source_indices.size}) must have equal length"
            )
        if states.shape[1] != self.d:
            raise ValueError(f"states have {states.shape[1]} columns but d={self.d}")
        if source_indices.size > 1 and not np.all(np.diff(source_indices) > 0):
            raise ValueError("source indices must be strictly increasing")

        blocks = self.blocks or (self.d,)
        if sum(blocks) != self.d:
            raise ValueError(f"block widths {blocks} do not add up to d={self.d}")

        object.__setattr__(self, "states", states)
        object.__setattr__(self, "successors", successors)
        object.__setattr__(self, "source_indices", source_indices)
        object.__setattr__(self, "blocks", tuple(blocks))

    def __len__(self) -> int:
        return int(self.states.shape[0])

    def __repr__(self) -> str:
        return f"{self.__class__.__name__}({self.name!r}, n={len(self)}, d={self.d}, tau={self.tau})"

    def with_states(self, states: ArrayLike) -> Self:
        """Return a copy whose state rows are replaced, keeping successors and alignment."""
        return type(self)(
            np.asarray(states, dtype=np.float64),
            self.successors,
            self.source_indices,
            self.d,
            self.tau,
            self.blocks,
            self.name,
        )


def delay_embed(series: TimeSeries, d: int, tau: int) -> StateSeries:
    """Reconstruct states from a scalar channel by delay embedding.

    State `i` is `(v[i], v[i + tau], ..., v[i + (d - 1) * tau])` and its successor is `v[i + (d - 1) * tau + 1]`.

    >>> s = delay_embed(TimeSeries("x", [1.0, 2.0, 3.0, 4.0, 5.0]), d=2, tau=1)
    >>> s.states.tolist(), s.successors.tolist()
    ([[1.0, 2.0], [2.0, 3.0], [3.0, 4.0]], [3.0, 4.0, 5.0])

    :param series: The channel to embed
    :param d: The embedding dimension
    :param tau: The embedding delay, in samples
    :returns: The embedded states with their successors
    :raises ValueError: If `d` or `tau` is not positive, or the channel is too short
    """
    if d < 1 or tau < 1:
        raise ValueError(f"embedding dimension and delay must be positive, got d={d}, tau={tau}")

    span = (d - 1) * tau
    n_states = len(series) - span - 1
    if n_states < 1:
        raise ValueError(
            f"channel {series.name!r} has {len(series)} samples; d={d}, tau={tau} requires at least {span + 2}"
        )

    v = series.values
    states = np.column_stack([v[j * tau : j * tau + n_states] for j in range(d)])
    successors = v[span + 1 : span + 1 + n_states]
    source_indices = np.arange(span, span + n_states, dtype=np.intp)

    logger.debug("embedded %r: %d states, d=%d, tau=%d", series.name, n_states, d, tau)
    return StateSeries(states, successors, source_indices, d, tau, (d,), series.name)


def joint_embed(cond_a: StateSeries, cond_b: StateSeries) -> StateSeries:
    """Concatenate two aligned state series row by row; successors are taken from `cond_a`.

    :param cond_a: The states whose successors are to be predicted
    :param cond_b: The additional conditioning states
    :returns: States of dimension `d_a + d_b`
    :raises ValueError: If the two series are not aligned sample for sample
    """
    if len(cond_a) != len(cond_b) or not np.array_equal(cond_a.source_indices, cond_b.source_indices):
        raise ValueError(
            f"cannot join misaligned state series {cond_a.name!r} ({len(cond_a)} states) and "
            f"{cond_b.name!r} ({len(cond_b)} states): source indices differ"
        )
    if cond_a.tau != cond_b.tau:
        raise ValueError(f"cannot join state series with different delays ({cond_a.tau} and {cond_b.tau})")

    return StateSeries(
        np.hstack([cond_a.states, cond_b.states]),
        cond_a.successors,
        cond_a.source_indices,
        cond_a.d + cond_b.d,
        cond_a.tau,
        cond_a.blocks + cond_b.blocks,
        f"{cond_a.name}|{cond_b.name}",
    )


def _parse_cell(cell: str, row: int, column: int) -> float:
    try:
        value = float(cell)
    except ValueError:
        raise ValueError(f"non-numeric value {cell!r} at row {row}, column {column}") from None
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {cell!r} at row {row}, column {column}")
    return value


@access_error_handler
def load_csv(path: PathArg, delimiter: str = ",", *, dt: float = 1.0) -> Dataset:
    """Read a dataset from a CSV file whose first row names the channels.

    Rows and columns in error messages are 1-based file positions: the header is row 1 and blank lines count.

    :param path: The file to read
    :param delimiter: The column separator
    :param dt: The sampling interval to attach to every channel
    :returns: One channel per column, in column order
    :raises FileNotFoundError: If the file does not exist
    :raises ValueError: On ragged rows, non-numeric or non-finite cells, or fewer than 2 data rows
    """
    with open(path, mode="rt", encoding="utf-8", newline="") as f:
        rows = [
            (number, row)
            for number, row in enumerate(csv.reader(f, delimiter=delimiter), start=1)
            if any(cell.strip() for cell in row)
        ]

    if not rows:
        raise ValueError(f"{path}: file is empty; expected a header row of channel names")

    header = [name.strip() for name in rows[0][1]]
    if any(not name for name in header):
        raise ValueError(f"{path}: header contains an empty channel name")

    data_rows = rows[1:]
    if len(data_rows) < 2:
        raise ValueError(f"{path}: at least 2 data rows are required, got {len(data_rows)}")

    columns: list[list[float]] = [[] for _ in header]
    for row_number, row in data_rows:
        if len(row) != len(header):
            raise ValueError(f"{path}: row {row_number} has {len(row)} columns, expected {len(header)}")
        for column_number, cell in enumerate(row, start=1):
            columns[column_number - 1].append(_parse_cell(cell.strip(), row_number, column_number))

    dataset = Dataset(tuple(TimeSeries(name, np.array(col), dt) for name, col in zip(header, columns)))
    logger.debug("loaded %s: %d channels x %d samples", path, len(dataset), dataset.length)
    return dataset


def render_csv(dataset: Dataset, *, delimiter: str = ",") -> str:
    """Render a dataset as CSV text; floats use their shortest round-tripping representation."""
    if len(dataset) == 0:
        raise ValueError("cannot write an empty dataset")

    buffer = io.StringIO()
    writer = csv.writer(buffer, delimiter=delimiter, lineterminator="\n")
    writer.writerow(dataset.names)
    writer.writerows([repr(float(v)) for v in row] for row in dataset.as_matrix())
    return buffer.getvalue()


@access_error_handler
def save_csv(dataset: Dataset, path: PathArg, *, delimiter: str = ",") -> None:
    """Write a dataset as CSV (header + one row per sample), atomically.

    :param dataset: The dataset to write; must have at least one channel
    :param path: The destination file
    :param delimiter: The column separator
    :raises ValueError: If the dataset is empty
    :raises OSError: If the path cannot be written
    """
    write_text_atomic(path, render_csv(dataset, delimiter=delimiter))
