from collections.abc import Callable, Sequence
from dataclasses import dataclass
import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .series import Dataset, TimeSeries

logger = logging.getLogger(__name__)

MAP_TRANSIENT = 1000
CHUA_TRANSIENT = 10_000
DEFAULT_SEEDS = (0.345678, 0.789012)
CHUA_INITIAL_STATE = (0.1, 0.0, 0.0)

# coupled arguments this far outside [0, 1] are rounding and get clipped; anything further is an error
_ESCAPE_TOLERANCE = 1e-12

# a = 1/2 makes both branches exact binary shifts, so double-precision orbits collapse onto 0 within ~60 steps;
# the iterators lower that apex by this amount
DYADIC_APEX_SHIFT = 2.0**-40

# a state this large means the integration has left the attractor
_DIVERGENCE_BOUND = 1e6

Vector = NDArray[np.float64]


@dataclass(frozen=True)
class TentParams:
    """Parameter of the skew tent map, the position `a` of its apex."""

    a: float = 0.65

    def __post_init__(self) -> None:
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"tent map parameter must satisfy 0 < a < 1, got a={self.a}")


@dataclass(frozen=True)
class CouplingParams:
    """Two skew tent maps coupled through their arguments with strengths `eps` (y into x) and `mu` (x into y)."""

    eps: float
    mu: float
    a: float = 0.5

    def __post_init__(self) -> None:
        for name, value in (("eps", self.eps), ("mu", self.mu)):
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"coupling strength must satisfy 0 <= {name} <= 1, got {name}={value}")
        TentParams(self.a)


@dataclass(frozen=True)
class ChuaParams:
    """Dimensionless Chua system with a piecewise-linear diode of inner slope `m0` and outer slope `m1`.

    The defaults are the usual double-scroll set. Samples are recorded every `stride` RK4 steps of size `dt`.
    """

    alpha: float = 9.0
    beta: float = 100.0 / 7.0
    m0: float = -8.0 / 7.0
    m1: float = -5.0 / 7.0
    dt: float = 0.01
    stride: int = 10

    def __post_init__(self) -> None:
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(f"Chua parameters must satisfy alpha > 0 and beta > 0, got {self.alpha}, {self.beta}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ValueError(f"integration step must be positive, got dt={self.dt}")
        if self.stride < 1:
            raise ValueError(f"sampling stride must be a positive number of steps, got stride={self.stride}")


def _check_unit(x: float, what: str) -> None:
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"{what} must lie in [0, 1], got {x}")


def tent_step(params: TentParams, x: float) -> float:
    """Apply the skew tent map once: `x / a` on `[0, a]`, `(1 - x) / (1 - a)` on `(a, 1]`.

    >>> tent_step(TentParams(0.65), 0.65)
    1.0

    :raises ValueError: If `x` lies outside [0, 1]
    """
    _check_unit(x, "tent map argument")
    a = params.a
    return x / a if x <= a else (1.0 - x) / (1.0 - a)


def _iteration_params(params: TentParams) -> TentParams:
    if params.a == 0.5:
        return TentParams(0.5 - DYADIC_APEX_SHIFT)
    return params


def _clip_coupled(value: float, label: str, step: int) -> float:
    if 0.0 <= value <= 1.0:
        return value
    if -_ESCAPE_TOLERANCE <= value <= 1.0 + _ESCAPE_TOLERANCE:
        return min(max(value, 0.0), 1.0)
    raise ValueError(f"coupled argument of {label} left [0, 1] at step {step}: {value!r}")


def iterate_tent(
    params: TentParams, x0: float = DEFAULT_SEEDS[0], n: int = 500, transient: int = MAP_TRANSIENT
) -> TimeSeries:
    """Iterate a single skew tent map, discarding `transient` iterates and returning the next `n` as channel `x`."""
    _check_unit(x0, "initial value x0")
    if n < 2 or transient < 0:
        raise ValueError(f"need n >= 2 and transient >= 0, got n={n}, transient={transient}")

    stepping = _iteration_params(params)
    x = x0
    values = np.empty(n)
    for step in range(transient + n):
        x = tent_step(stepping, x)
        if step >= transient:
            values[step - transient] = x
    return TimeSeries("x", values)


def iterate_coupled(
    params: CouplingParams,
    x0: float = DEFAULT_SEEDS[0],
    y0: float = DEFAULT_SEEDS[1],
    n: int = 500,
    transient: int = MAP_TRANSIENT,
) -> Dataset:
    """Iterate two coupled skew tent maps.

    `x[n+1] = f(x[n] + eps (y[n] - x[n]))` and `y[n+1] = f(y[n] + mu (x[n] - y[n]))`.

    :param params: Coupling strengths and tent parameter
    :param x0: Initial value of x, in [0, 1]
    :param y0: Initial value of y, in [0, 1]
    :param n: Number of recorded iterates
    :param transient: Number of discarded iterates
    :returns: Channels `x` and `y`
    :raises ValueError: If a coupled argument escapes [0, 1] beyond rounding
    """
    _check_unit(x0, "initial value x0")
    _check_unit(y0, "initial value y0")
    if n < 2 or transient < 0:
        raise ValueError(f"need n >= 2 and transient >= 0, got n={n}, transient={transient}")

    stepping = _iteration_params(TentParams(params.a))
    eps, mu = params.eps, params.mu
    x, y = x0, y0
    xs = np.empty(n)
    ys = np.empty(n)
    for step in range(transient + n):
        ax = _clip_coupled(x + eps * (y - x), "x", step)
        ay = _clip_coupled(y + mu * (x - y), "y", step)
        x, y = tent_step(stepping, ax), tent_step(stepping, ay)
        if step >= transient:
            xs[step - transient] = x
            ys[step - transient] = y

    return Dataset((TimeSeries("x", xs), TimeSeries("y", ys)))


def chua_diode(params: ChuaParams, x: float) -> float:
    """The piecewise-linear Chua diode `g(x) = m1 x + (m0 - m1) (|x + 1| - |x - 1|) / 2`."""
    return params.m1 * x + 0.5 * (params.m0 - params.m1) * (abs(x + 1.0) - abs(x - 1.0))


def chua_rhs(params: ChuaParams, state: ArrayLike) -> Vector:
    """Return the time derivative `(alpha (y - x - g(x)), x - y + z, -beta y)` of the dimensionless Chua system."""
    x, y, z = (float(v) for v in np.asarray(state, dtype=np.float64))
    return np.array([params.alpha * (y - x - chua_diode(params, x)), x - y + z, -params.beta * y])


def rk4_step(rhs: Callable[[Vector], Vector], state: Vector, dt: float) -> Vector:
    """Advance `state` by one classical fourth-order Runge-Kutta step."""
    k1 = rhs(state)
    k2 = rhs(state + 0.5 * dt * k1)
    k3 = rhs(state + 0.5 * dt * k2)
    k4 = rhs(state + dt * k3)
    return np.asarray(state + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4), dtype=np.float64)


def rk4_trajectory(rhs: Callable[[Vector], Vector], state0: ArrayLike, dt: float, n_steps: int) -> Vector:
    """Integrate `rhs` with RK4 and return all `n_steps + 1` states, the initial one included."""
    state = np.atleast_1d(np.asarray(state0, dtype=np.float64))
    out = np.empty((n_steps + 1, state.size))
    out[0] = state
    for i in range(1, n_steps + 1):
        state = rk4_step(rhs, state, dt)
        out[i] = state
    return out


def integrate_rk4(
    params: ChuaParams,
    state0: Sequence[float] = CHUA_INITIAL_STATE,
    n_samples: int = 1024,
    transient: int = CHUA_TRANSIENT,
    *,
    rhs: Callable[[Vector], Vector] | None = None,
) -> Dataset:
    """Integrate the Chua system with RK4 and sample it.

    The first sample is the state after `transient` steps; subsequent samples follow every `stride` steps.

    :param params: System parameters, step size and sampling stride
    :param state0: Initial state `(v1, v2, il)`
    :param n_samples: Number of recorded samples
    :param transient: Number of discarded RK4 steps
    :param rhs: Replacement right-hand side (for testing the integrator)
    :returns: Channels `v1`, `v2` and `il`, with `dt = params.dt * params.stride`
    :raises FloatingPointError: If the trajectory diverges
    """
    if n_samples < 2 or transient < 0:
        raise ValueError(f"need n_samples >= 2 and transient >= 0, got {n_samples}, {transient}")

    def chua(state: Vector) -> Vector:
        return chua_rhs(params, state)

    field = rhs if rhs is not None else chua
    state = np.asarray(state0, dtype=np.float64)
    if state.shape != (3,):
        raise ValueError(f"initial state must have 3 components (v1, v2, il), got shape {state.shape}")

    samples = np.empty((n_samples, 3))
    total_steps = transient + (n_samples - 1) * params.stride
    sample = 0
    for step in range(total_steps + 1):
        if step >= transient and (step - transient) % params.stride == 0:
            samples[sample] = state
            sample += 1
        if step == total_steps:
            break
        state = rk4_step(field, state, params.dt)
        if not np.all(np.isfinite(state)) or np.max(np.abs(state)) > _DIVERGENCE_BOUND:
            raise FloatingPointError(f"Chua trajectory diverged at step {step + 1}: state {state.tolist()}")

    sample_dt = params.dt * params.stride
    logger.debug("integrated Chua system: %d steps, %d samples at dt=%g", total_steps, n_samples, sample_dt)
    return Dataset(
        (
            TimeSeries("v1", samples[:, 0], sample_dt),
            TimeSeries("v2", samples[:, 1], sample_dt),
            TimeSeries("il", samples[:, 2], sample_dt),
        )
    )


def sync_error(dataset: Dataset) -> float:
    """Return `|x_N - y_N|`, the distance between the final samples of a two-channel dataset.

    :raises ValueError: If the dataset does not have exactly 2 channels
    """
    if len(dataset) != 2:
        raise ValueError(f"synchronization error needs exactly 2 channels, got {len(dataset)}")
    first, second = dataset.channels
    return abs(float(first.values[-1]) - float(second.values[-1]))


def add_measurement_noise(dataset: Dataset, level: float, seed: int = 0) -> Dataset:
    """Add independent Gaussian noise to every channel, with standard deviation `level` times the channel's own.

    :param dataset: The clean dataset
    :param level: Relative noise level, e.g. 0.01 for 1 %
    :param seed: Seed of the noise generator
    :returns: A noisy copy
    """
    if level < 0 or not math.isfinite(level):
        raise ValueError(f"noise level must be non-negative, got {level}")
    if level == 0:
        return dataset

    rng = np.random.default_rng(seed)
    noisy = []
    for channel in dataset:
        scale = level * float(np.std(channel.values))
        noisy.append(channel.with_values(channel.values + rng.normal(0.0, scale, size=len(channel))))
    return Dataset(tuple(noisy))
