import os

import numpy as np
import pandas as pd
import pytest

from hvfwi.experiments import phantom_experiment
from hvfwi.inversion import (
    InversionConfig,
    ProjectedLBFGS,
    add_noise,
    fwi_invert,
    gaussian_smooth,
    measured_snr_db,
)
from hvfwi.metrics import L2
from hvfwi.physics import PMLSpec, forward_data, line_geometry
from hvfwi.utils.errors import ConfigError, LineSearchFailure
from hvfwi.utils.logger import Logger


def bounded_quadratic(target):
    def fun(x):
        return 0.5 * float(np.sum((x - target) ** 2)), x - target

    return fun


def test_lbfgs_finds_the_projected_minimum():
    target = np.array([3.0, -2.0, 0.5])
    steps = []
    optimizer = ProjectedLBFGS(max_iters_per_freq=50, initial_step=1.0)
    result = optimizer.minimize(
        bounded_quadratic(target), np.zeros(3), (-1.0, 1.0), callback=lambda i, *args: steps.append(i)
    )
    np.testing.assert_allclose(result.x, [1.0, -1.0, 0.5], atol=1e-5)
    assert result.flag is None
    assert np.all(np.diff(result.values) < 0)
    assert steps == list(range(1, result.iterations + 1))


def test_lbfgs_keeps_the_model_shape():
    target = np.full((2, 3), 0.25)
    result = ProjectedLBFGS(initial_step=1.0).minimize(bounded_quadratic(target), np.zeros((2, 3)), (0.0, 1.0))
    assert result.x.shape == (2, 3)
    np.testing.assert_allclose(result.x, 0.25, atol=1e-5)


def test_lbfgs_without_iterations_returns_the_start():
    x0 = np.arange(4.0)
    result = ProjectedLBFGS(max_iters_per_freq=0).minimize(bounded_quadratic(x0), x0, (0.0, 10.0))
    assert result.value is None
    assert result.iterations == 0
    np.testing.assert_array_equal(result.x, x0)
    assert result.x is not x0


def test_lbfgs_flags_line_search_failure():
    # The reported gradient points uphill, so no step can satisfy the Armijo condition.
    def fun(x):
        return float(np.sum(x)), -np.ones_like(x)

    result = ProjectedLBFGS(max_iters_per_freq=5).minimize(fun, np.zeros(3), (-100.0, 100.0))
    assert result.flag == "line_search_failure"
    assert result.iterations == 0


def test_lbfgs_options_are_validated():
    with pytest.raises(ValueError):
        ProjectedLBFGS(memory=0)
    with pytest.raises(ValueError):
        ProjectedLBFGS(armijo_c=1.0)
    with pytest.raises(ValueError):
        ProjectedLBFGS(max_iters_per_freq=-1)


def test_noise_has_the_requested_snr(rng):
    clean = rng.normal(size=200) + 1j * rng.normal(size=200)
    for snr_db in (0.0, 10.0, 30.0):
        noisy = add_noise(clean, snr_db, seed=7)
        assert measured_snr_db(clean, noisy) == pytest.approx(snr_db, abs=1e-9)


def test_noise_is_seeded(rng):
    clean = rng.normal(size=64)
    np.testing.assert_array_equal(add_noise(clean, 5.0, seed=1), add_noise(clean, 5.0, seed=1))
    assert not np.array_equal(add_noise(clean, 5.0, seed=1), add_noise(clean, 5.0, seed=2))
    np.testing.assert_array_equal(add_noise(clean, float("inf")), clean)
    assert np.isrealobj(add_noise(clean, 5.0))


def test_noise_on_gathers_treats_them_as_one_dataset(small_model):
    geometry = line_geometry(small_model, n_sources=2, n_receivers=16, depth=20.0)
    clean = forward_data(small_model, geometry, [10.0], PMLSpec(width_cells=6))
    noisy = add_noise(clean, 20.0, seed=3)
    assert [(g.source_index, g.freq_hz) for g in noisy] == [(g.source_index, g.freq_hz) for g in clean]
    stacked_clean = np.concatenate([g.values for g in clean])
    stacked_noisy = np.concatenate([g.values for g in noisy])
    assert measured_snr_db(stacked_clean, stacked_noisy) == pytest.approx(20.0, abs=1e-9)


def test_noise_on_an_empty_dataset():
    assert add_noise([], 10.0, seed=1) == []


def test_gaussian_smooth(small_model):
    unchanged = gaussian_smooth(small_model, 0.0)
    np.testing.assert_array_equal(unchanged.c, small_model.c)
    assert unchanged.c is not small_model.c
    smoothed = gaussian_smooth(small_model, 2.0)
    assert np.std(smoothed.c) < np.std(small_model.c)
    assert np.mean(smoothed.c) == pytest.approx(np.mean(small_model.c), rel=1e-3)
    with pytest.raises(ValueError):
        gaussian_smooth(small_model, -1.0)


def test_gaussian_smooth_keeps_a_constant_model(small_model):
    constant = small_model.with_velocity(np.full(small_model.shape, 1800.0))
    np.testing.assert_allclose(gaussian_smooth(constant, 3.0).c, 1800.0, rtol=1e-12)


def test_inversion_config_validation():
    with pytest.raises(ConfigError):
        InversionConfig(frequency_schedule=[])
    with pytest.raises(ConfigError):
        InversionConfig(frequency_schedule=[5.0, -1.0])
    with pytest.raises(ConfigError):
        InversionConfig(frequency_schedule=[10.0, 8.0])
    with pytest.raises(ConfigError):
        InversionConfig(frequency_schedule=[8.0, 8.0, 10.0])
    with pytest.raises(ConfigError):
        InversionConfig(frequency_schedule=[5.0], rounds=0)
    with pytest.raises(ConfigError):
        InversionConfig(frequency_schedule=[5.0], velocity_bounds=(2000.0, 1500.0))


def _setup(small_model, freqs):
    pml = PMLSpec(width_cells=10).resolve(small_model)
    geometry = line_geometry(small_model, n_sources=2, n_receivers=32, depth=20.0)
    observed = forward_data(small_model, geometry, freqs, pml)
    initial = small_model.with_velocity(np.full(small_model.shape, 1500.0))
    return pml, geometry, observed, initial


def test_inversion_without_iterations_is_identity(small_model):
    pml, geometry, observed, initial = _setup(small_model, [10.0])
    config = InversionConfig(frequency_schedule=[10.0], optimizer=ProjectedLBFGS(max_iters_per_freq=0), pml=pml)
    report = fwi_invert(initial, observed, geometry, L2(), config)
    np.testing.assert_array_equal(report.final_model.c, initial.c)
    assert report.history == []
    assert report.flags == []


def test_inversion_rejects_initial_model_outside_bounds(small_model):
    pml, geometry, observed, initial = _setup(small_model, [10.0])
    config = InversionConfig(frequency_schedule=[10.0], velocity_bounds=(1600.0, 2000.0), pml=pml)
    with pytest.raises(ConfigError):
        fwi_invert(initial, observed, geometry, L2(), config)


def test_small_inversion_reduces_the_misfit(small_model, tmp_path):
    freqs = [8.0, 10.0]
    pml, geometry, observed, initial = _setup(small_model, freqs)
    config = InversionConfig(
        frequency_schedule=freqs,
        velocity_bounds=(1400.0, 1700.0),
        optimizer=ProjectedLBFGS(max_iters_per_freq=3),
        pml=pml,
    )
    logger = Logger(str(tmp_path))
    report = fwi_invert(initial, observed, geometry, L2(), config, logger=logger)
    logger.close()

    first_stage = [r["misfit"] for r in report.history if r["freq_hz"] == 8.0]
    assert first_stage[0] == report.history[0]["misfit"]
    assert first_stage[-1] < first_stage[0]
    assert np.all(report.final_model.c >= 1400.0) and np.all(report.final_model.c <= 1700.0)
    assert len(report.snapshots) == 2
    assert set(report.stage_seconds) == {"round0/8Hz", "round0/10Hz"}

    log = pd.read_csv(os.path.join(str(tmp_path), "log.csv"))
    assert {"step", "misfit", "freq_hz", "grad_norm"} <= set(log.columns)
    assert len(log) == len([r for r in report.history if r["iteration"] > 0])


def test_rounds_repeat_the_schedule(small_model):
    pml, geometry, observed, initial = _setup(small_model, [10.0])
    config = InversionConfig(
        frequency_schedule=[10.0],
        rounds=2,
        smoothing_sigma=1.0,
        velocity_bounds=(1400.0, 1700.0),
        optimizer=ProjectedLBFGS(max_iters_per_freq=1),
        pml=pml,
    )
    report = fwi_invert(initial, observed, geometry, L2(), config)
    assert [s[0] for s in report.snapshots] == [0, 1]
    assert {r["round"] for r in report.history} == {0, 1}


def test_inversion_is_deterministic(small_model):
    pml, geometry, observed, initial = _setup(small_model, [10.0])
    config = InversionConfig(
        frequency_schedule=[10.0],
        velocity_bounds=(1400.0, 1700.0),
        optimizer=ProjectedLBFGS(max_iters_per_freq=2),
        pml=pml,
    )
    first = fwi_invert(initial, observed, geometry, L2(), config)
    second = fwi_invert(initial, observed, geometry, L2(), config)
    np.testing.assert_array_equal(first.final_model.c, second.final_model.c)
    assert first.history == second.history
    assert first.flags == second.flags


@pytest.mark.slow
def test_phantom_inversion_halves_the_error():
    outcome = phantom_experiment(geometry_mode="ring", seed=0)["hv"]
    assert outcome.rmse_ratio <= 0.5


@pytest.mark.slow
def test_noisy_phantom_inversion():
    outcome = phantom_experiment(geometry_mode="ring", snr_db=10.0, seed=0)["hv"]
    assert outcome.rmse_ratio <= 0.7


def test_strict_lbfgs_raises_on_line_search_failure():
    def fun(x):
        return float(np.sum(x)), -np.ones_like(x)

    with pytest.raises(LineSearchFailure):
        ProjectedLBFGS(max_iters_per_freq=5, strict=True).minimize(fun, np.zeros(3), (-100.0, 100.0))
