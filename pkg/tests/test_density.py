from collections.abc import Callable
import math

import numpy as np
import pytest
from scipy.integrate import quad

from localflow.density import (
    ccdf,
    conditional_density_at_sample,
    conditional_profile,
    cpd,
    CpdModel,
    log_cpd,
    marginal_knn,
    marginal_profile,
    resolve_r,
    RMode,
    RPolicy,
)
from localflow.localmodel import ModelOrder
from localflow.neighbors import build_index
from localflow.series import delay_embed, StateSeries, TimeSeries

MakeStates = Callable[..., StateSeries]


def test_ccdf_at_center() -> None:
    assert ccdf(CpdModel(center=0.3, r=5.0), 0.3) == 0.5


def test_ccdf_heaviside_limit() -> None:
    assert 1.0 - ccdf(CpdModel(center=0.0, r=1000.0), -0.1) <= math.exp(-100.0)


def test_ccdf_direct_value() -> None:
    assert ccdf(CpdModel(center=0.0, r=2.0), 1.0) == pytest.approx(1.0 / (1.0 + math.e**2))


def test_ccdf_vectorized() -> None:
    values = ccdf(CpdModel(center=0.0, r=1.0), np.array([-1.0, 0.0, 1.0]))
    assert isinstance(values, np.ndarray)
    assert values[1] == 0.5


def test_cpd_mode() -> None:
    assert cpd(CpdModel(center=-2.0, r=8.0), -2.0) == 2.0


@pytest.mark.parametrize("delta", [0.01, 0.3, 2.0, 17.0])
def test_cpd_symmetric(delta: float) -> None:
    model = CpdModel(center=0.7, r=1.5)
    assert cpd(model, 0.7 + delta) == pytest.approx(cpd(model, 0.7 - delta), rel=1e-12)


@pytest.mark.parametrize("r", [0.1, 1.0, 10.0, 1000.0])
def test_cpd_integrates_to_one(r: float) -> None:
    model = CpdModel(center=0.25, r=r)
    total, _ = quad(lambda y: float(cpd(model, y)), 0.25 - 50.0 / r, 0.25 + 50.0 / r, points=[0.25], limit=200)
    assert total == pytest.approx(1.0, abs=1e-6)


@pytest.mark.parametrize("r", [0.1, 1.0, 10.0])
def test_cpd_is_derivative_of_ccdf(r: float) -> None:
    model = CpdModel(center=0.0, r=r)
    h = 1e-5
    grid = np.linspace(-10.0 / r, 10.0 / r, 201)
    numeric = -(np.asarray(ccdf(model, grid + h)) - np.asarray(ccdf(model, grid - h))) / (2 * h)
    assert np.max(np.abs(numeric - np.asarray(cpd(model, grid)))) < 1e-6


def test_ccdf_sigmoid_symmetry() -> None:
    model = CpdModel(center=1.2, r=3.0)
    for delta in np.linspace(0.0, 5.0, 11):
        assert ccdf(model, 1.2 - delta) == pytest.approx(1.0 - ccdf(model, 1.2 + delta), abs=1e-15)


def test_heaviside_bound() -> None:
    r = 1e4
    model = CpdModel(center=0.0, r=r)
    for y in (-0.5, -0.05, -0.01, 0.01, 0.05, 0.5):
        step = 1.0 if y < 0 else 0.0
        assert abs(ccdf(model, y) - step) <= math.exp(-r * abs(y)) * (1.0 + 1e-12)


def test_log_cpd_matches_log_of_cpd() -> None:
    model = CpdModel(center=0.4, r=3.0)
    y = np.linspace(-2.0, 2.0, 41)
    assert np.allclose(log_cpd(model, y), np.log(cpd(model, y)), rtol=1e-12, atol=1e-12)


def test_log_cpd_far_tail_is_finite() -> None:
    model = CpdModel(center=0.0, r=10.0)
    assert cpd(model, 1000.0) == 0.0
    assert log_cpd(model, 1000.0) == pytest.approx(math.log(10.0) - 10_000.0)


def test_cpd_model_validates() -> None:
    with pytest.raises(ValueError, match="r must be positive"):
        CpdModel(center=0.0, r=0.0)
    with pytest.raises(ValueError, match="center must be finite"):
        CpdModel(center=math.nan, r=1.0)


@pytest.mark.parametrize(
    "policy, sigma, expected",
    [
        (RPolicy(), 1.0, math.pi / math.sqrt(3.0)),
        (RPolicy(RMode.INVERSE, 1.0), 0.5, 2.0),
        (RPolicy(RMode.FIXED, 7.0), 0.3, 7.0),
        (RPolicy(RMode.SCALED, 2.0), 0.5, 1.0),
    ],
)
def test_resolve_r(policy: RPolicy, sigma: float, expected: float) -> None:
    assert resolve_r(policy, sigma) == pytest.approx(expected)


def test_resolve_r_matched_value() -> None:
    assert resolve_r(RPolicy(), 1.0) == pytest.approx(1.8138, abs=1e-4)


def test_resolve_r_fixed_ignores_sigma() -> None:
    assert resolve_r(RPolicy("fixed", 3.0), 0.0) == 3.0  # type: ignore[arg-type]


def test_resolve_r_rejects_zero_sigma() -> None:
    with pytest.raises(ValueError, match="positive residual sigma"):
        resolve_r(RPolicy(RMode.INVERSE), 0.0)


def test_r_policy_validates_coefficient() -> None:
    with pytest.raises(ValueError, match="coefficient must be positive"):
        RPolicy(RMode.INVERSE, -1.0)


def test_density_at_sample_predictable_orbit() -> None:
    states = delay_embed(TimeSeries("p", np.tile([0.2, 0.8], 15)), 1, 1)
    index = build_index(states)
    for i in range(len(states)):
        assert conditional_density_at_sample(states, index, i, r=12.0) == 3.0


def test_density_at_sample_noise_large_r(rng: np.random.Generator) -> None:
    states = delay_embed(TimeSeries("noise", rng.uniform(size=201)), 1, 1)
    index = build_index(states)
    values = np.array([conditional_density_at_sample(states, index, i, r=1e4) for i in range(len(states))])
    assert np.mean(values < 1e-3) >= 0.9


def test_density_at_sample_first_order(make_states: MakeStates, rng: np.random.Generator) -> None:
    x = rng.uniform(size=40)
    states = make_states(x, 3.0 * x - 1.0)
    value = conditional_density_at_sample(states, build_index(states), 7, r=4.0, order=ModelOrder.FIRST)
    assert value == pytest.approx(1.0)


def test_conditional_profile_peaks_at_image(tent_orbit: TimeSeries) -> None:
    states = delay_embed(tent_orbit, 1, 1)
    grid = np.linspace(0.0, 1.0, 1001)
    profile = conditional_profile(states, build_index(states), [0.2], grid, r=100.0)
    assert profile.shape == grid.shape
    assert abs(grid[np.argmax(profile)] - 0.2 / 0.65) < 0.01


def test_marginal_knn_example(make_states: MakeStates) -> None:
    states = make_states([0.0, 0.5, 1.0, 0.4])
    assert marginal_knn(states, build_index(states), 3, k=1) == pytest.approx(2.5)


def test_marginal_knn_duplicates(make_states: MakeStates) -> None:
    states = make_states([0.0, 0.5, 0.5])
    with pytest.raises(ValueError, match=r"coincides with states \[1\]"):
        marginal_knn(states, build_index(states), 2, k=1)


def test_marginal_profile_tent_orbit(tent_orbit: TimeSeries) -> None:
    states = delay_embed(tent_orbit, 1, 1)
    profile = marginal_profile(states, build_index(states))
    assert profile.shape == (len(states),)
    assert np.all(np.isfinite(profile)) and np.all(profile > 0)
    # uniform invariant measure: median of 1 / (N d_1) is about 2 / ln 2
    assert 1.5 < float(np.median(profile)) < 5.0


def test_marginal_knn_halves_when_samples_double(rng: np.random.Generator, make_states: MakeStates) -> None:
    n = 200
    ratios = []
    for _ in range(100):
        x = rng.uniform(size=n)
        doubled = make_states(np.concatenate([x, x + 10.0 + rng.normal(scale=1e-7, size=n)]))
        single = make_states(x)
        ratios.append(marginal_knn(doubled, build_index(doubled), n) / marginal_knn(single, build_index(single), 0))
    band = 3.0 * float(np.std(ratios)) / math.sqrt(len(ratios))
    assert abs(float(np.mean(ratios)) - 0.5) <= band + 1e-12
