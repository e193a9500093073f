import math

import numpy as np
import pytest

from localflow.series import Dataset
from localflow.systems import (
    add_measurement_noise,
    chua_diode,
    chua_rhs,
    ChuaParams,
    CouplingParams,
    integrate_rk4,
    iterate_coupled,
    iterate_tent,
    rk4_trajectory,
    sync_error,
    tent_step,
    TentParams,
)


@pytest.mark.parametrize(
    "a, x, expected",
    [(0.65, 0.65, 1.0), (0.65, 1.0, 0.0), (0.5, 0.25, 0.5), (0.65, 0.0, 0.0)],
)
def test_tent_step(a: float, x: float, expected: float) -> None:
    assert tent_step(TentParams(a), x) == pytest.approx(expected)


def test_tent_step_apex_is_exactly_one() -> None:
    assert tent_step(TentParams(0.65), 0.65) == 1.0


@pytest.mark.parametrize("x", [-0.1, 1.0001])
def test_tent_step_rejects_outside_unit_interval(x: float) -> None:
    with pytest.raises(ValueError, match=r"must lie in \[0, 1\]"):
        tent_step(TentParams(0.65), x)


@pytest.mark.parametrize("a", [0.0, 1.0, 1.2, -0.3])
def test_tent_params_validate(a: float) -> None:
    with pytest.raises(ValueError, match="0 < a < 1"):
        TentParams(a)


def test_tent_maps_unit_interval_onto_itself() -> None:
    params = TentParams(0.65)
    images = np.array([tent_step(params, x) for x in np.linspace(0.0, 1.0, 1001)])
    assert images.min() >= 0.0 and images.max() <= 1.0


def test_dyadic_tent_orbit_does_not_collapse() -> None:
    orbit = iterate_tent(TentParams(0.5), n=500)
    assert np.std(orbit.values) > 0.1
    assert np.count_nonzero(orbit.values == 0.0) == 0


def test_uncoupled_maps_match_solo_orbits() -> None:
    coupled = iterate_coupled(CouplingParams(eps=0.0, mu=0.0), x0=0.345678, y0=0.789012, n=300)
    solo_x = iterate_tent(TentParams(0.5), x0=0.345678, n=300)
    solo_y = iterate_tent(TentParams(0.5), x0=0.789012, n=300)
    assert np.array_equal(coupled["x"].values, solo_x.values)
    assert np.array_equal(coupled["y"].values, solo_y.values)


def test_symmetric_identical_seeds_stay_synchronized() -> None:
    maps = iterate_coupled(CouplingParams(eps=0.5, mu=0.5), x0=0.3, y0=0.3, n=200, transient=0)
    assert np.array_equal(maps["x"].values, maps["y"].values)


def test_strong_symmetric_coupling_synchronizes() -> None:
    maps = iterate_coupled(CouplingParams(eps=0.45, mu=0.45), n=500)
    assert sync_error(maps) < 1e-6


def test_coupled_channels_stay_in_unit_interval() -> None:
    maps = iterate_coupled(CouplingParams(eps=0.3, mu=0.1), n=500)
    matrix = maps.as_matrix()
    assert maps.names == ("x", "y")
    assert matrix.shape == (500, 2)
    assert matrix.min() >= 0.0 and matrix.max() <= 1.0


def test_coupling_params_validate() -> None:
    with pytest.raises(ValueError, match="0 <= mu <= 1"):
        CouplingParams(eps=0.2, mu=1.5)
    with pytest.raises(ValueError, match="0 < a < 1"):
        CouplingParams(eps=0.2, mu=0.2, a=1.0)


def test_iterate_coupled_rejects_bad_seed() -> None:
    with pytest.raises(ValueError, match="initial value y0"):
        iterate_coupled(CouplingParams(0.1, 0.1), y0=1.5)


def test_sync_error() -> None:
    assert sync_error(Dataset.from_columns({"x": [0.1, 0.7], "y": [0.4, 0.2]})) == pytest.approx(0.5)
    assert sync_error(Dataset.from_columns({"x": [0.1, 0.7], "y": [0.1, 0.7]})) == 0.0


def test_sync_error_needs_two_channels() -> None:
    with pytest.raises(ValueError, match="exactly 2 channels"):
        sync_error(Dataset.from_columns({"x": [0.1, 0.7]}))


def test_chua_origin_is_equilibrium() -> None:
    assert chua_rhs(ChuaParams(), [0.0, 0.0, 0.0]).tolist() == [0.0, 0.0, 0.0]


def test_chua_diode_breakpoints() -> None:
    params = ChuaParams()
    assert chua_diode(params, 1.0) == pytest.approx(-8.0 / 7.0)
    assert chua_diode(params, -1.0) == pytest.approx(8.0 / 7.0)
    assert chua_diode(params, 3.0) == pytest.approx(-8.0 / 7.0 - 2.0 * 5.0 / 7.0)


def test_chua_params_validate() -> None:
    with pytest.raises(ValueError, match="alpha > 0"):
        ChuaParams(alpha=-1.0)
    with pytest.raises(ValueError, match="stride"):
        ChuaParams(stride=0)


def test_rk4_exponential_decay() -> None:
    trajectory = rk4_trajectory(lambda s: -s, [2.0], 0.01, 100)
    assert trajectory.shape == (101, 1)
    assert trajectory[-1, 0] == pytest.approx(2.0 * math.exp(-1.0), abs=1e-8)


def test_rk4_is_fourth_order() -> None:
    def error(dt: float) -> float:
        steps = round(1.0 / dt)
        return abs(rk4_trajectory(lambda s: -s, [1.0], dt, steps)[-1, 0] - math.exp(-1.0))

    assert 12.0 <= error(0.1) / error(0.05) <= 20.0


def test_integrate_rk4_sampling_with_test_hook() -> None:
    params = ChuaParams(dt=0.01, stride=10)
    data = integrate_rk4(params, (1.0, 2.0, -1.0), n_samples=11, transient=0, rhs=lambda s: -s)

    assert data.names == ("v1", "v2", "il")
    assert data["v1"].dt == pytest.approx(0.1)
    assert data["v1"].values[0] == 1.0
    final = data.as_matrix()[-1]
    assert np.allclose(final, np.array([1.0, 2.0, -1.0]) * math.exp(-1.0), atol=1e-8)


def test_integrate_rk4_equilibrium() -> None:
    data = integrate_rk4(ChuaParams(), (0.0, 0.0, 0.0), n_samples=20, transient=100)
    assert np.all(data.as_matrix() == 0.0)


def test_chua_double_scroll() -> None:
    data = integrate_rk4(ChuaParams(), n_samples=2000)
    matrix = data.as_matrix()
    assert np.max(np.abs(matrix)) < 50.0
    v1 = data["v1"].values
    assert np.any(v1 > 0.5) and np.any(v1 < -0.5)
    assert len(np.unique(matrix.round(6), axis=0)) == len(matrix)


def test_integrate_rk4_divergence() -> None:
    with pytest.raises(FloatingPointError, match="diverged"):
        integrate_rk4(ChuaParams(), (1.0, 1.0, 1.0), n_samples=10, transient=1000, rhs=lambda s: 100.0 * s)


def test_integrate_rk4_state_shape() -> None:
    with pytest.raises(ValueError, match="3 components"):
        integrate_rk4(ChuaParams(), (0.1, 0.0), n_samples=10, transient=0)


def test_measurement_noise(rng: np.random.Generator) -> None:
    clean = Dataset.from_columns({"a": rng.normal(size=4000), "b": 5.0 * rng.normal(size=4000)})

    assert add_measurement_noise(clean, 0.0) is clean
    noisy = add_measurement_noise(clean, 0.05, seed=3)
    again = add_measurement_noise(clean, 0.05, seed=3)
    assert np.array_equal(noisy.as_matrix(), again.as_matrix())

    for name in ("a", "b"):
        residual = noisy[name].values - clean[name].values
        assert np.std(residual) == pytest.approx(0.05 * np.std(clean[name].values), rel=0.1)


def test_measurement_noise_rejects_negative_level(rng: np.random.Generator) -> None:
    with pytest.raises(ValueError, match="non-negative"):
        add_measurement_noise(Dataset.from_columns({"a": rng.normal(size=10)}), -0.1)
