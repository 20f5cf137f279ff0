import os

import numpy as np
import pytest

from hvfwi.experiments import (
    ScanResult,
    count_spurious_extrema,
    count_strict_local_extrema,
    count_strict_local_maxima,
    count_strict_local_minima,
    phantom_experiment,
    phantom_geometry,
    ricker_pair,
    ricker_shift_scan,
    scan_constant_velocity,
    score,
)
from hvfwi.inversion import InversionConfig, ProjectedLBFGS
from hvfwi.metrics import HV, L2, W2
from hvfwi.physics import PMLSpec, gaussian_inclusion_model
from hvfwi.utils.errors import ConfigError, MismatchedGeometry

SMALL_LINE_MODEL = dict(n_z=11, n_x=41, spacing=40.0)
SMALL_LINE_GEOMETRY = dict(n_sources=2, n_receivers=21, depth=100.0)


def test_score(small_model):
    exact = score(small_model, small_model)
    assert exact.rmse == 0.0
    assert exact.psnr == float("inf")
    assert not exact.degenerate_reference

    shifted = score(small_model.c + 5.0, small_model)
    assert shifted.rmse == pytest.approx(5.0)
    peak = np.max(small_model.c) - np.min(small_model.c)
    assert shifted.psnr == pytest.approx(20 * np.log10(peak / 5.0))
    assert set(shifted.to_dict()) == {"rmse", "psnr", "degenerate_reference"}


def test_score_edge_cases(small_model):
    with pytest.raises(MismatchedGeometry):
        score(small_model, small_model.c[:-1])
    constant = np.full(small_model.shape, 1500.0)
    degenerate = score(small_model, constant)
    assert degenerate.degenerate_reference
    assert degenerate.psnr == float("inf")
    assert degenerate.rmse > 0


def test_extremum_counters():
    values = np.array([3.0, 1.0, 2.0, 0.0, 4.0])
    assert count_strict_local_minima(values) == 2
    assert count_strict_local_maxima(values) == 1
    assert count_strict_local_extrema(values) == 3
    assert count_spurious_extrema(values) == 2
    assert count_spurious_extrema(np.array([4.0, 2.0, 1.0, 2.0, 5.0])) == 0
    # Plateaus and end points never count.
    assert count_strict_local_extrema(np.array([1.0, 0.0, 0.0, 1.0])) == 0
    assert count_strict_local_extrema(np.array([0.0, 1.0, 2.0])) == 0


def test_scan_result_validation():
    with pytest.raises(ValueError):
        ScanResult("c", np.arange(3.0), {"l2": np.arange(4.0)})
    with pytest.raises(ValueError):
        ScanResult("c", np.arange(3.0), {"l2": np.array([0.0, np.inf, 1.0])})
    scan = ScanResult("c", np.array([1.0, 2.0, 3.0]), {"l2": np.array([2.0, -4.0, 1.0])})
    assert scan.argmin("l2") == 2.0
    np.testing.assert_allclose(scan.normalized().curves["l2"], [0.5, -1.0, 0.25])
    frame = scan.to_frame()
    assert list(frame.columns) == ["c", "l2"]


def test_ricker_pair():
    f, g = ricker_pair(0.25)
    assert f.axis[0] == -1.0 and f.axis[-1] == pytest.approx(1.0)
    assert np.argmax(g.values) - np.argmax(f.values) == pytest.approx(0.25 / f.step, abs=1)


def test_ricker_scan_vanishes_without_shift():
    params = dict(kappa=1.0, lam=1.0, epsilon=1e-3, max_iters=30)
    scan = ricker_shift_scan([-0.2, 0.0, 0.2], [params], normalize=False)
    assert scan.parameter == "s"
    assert list(scan.curves) == ["l2", "hv(kappa=1,lam=1,epsilon=0.001)"]
    for values in scan.curves.values():
        assert values[1] == 0.0
        assert values[0] > 0 and values[2] > 0
    normalized = ricker_shift_scan([-0.2, 0.0, 0.2], [params])
    for values in normalized.curves.values():
        assert np.max(np.abs(values)) == pytest.approx(1.0)
    with pytest.raises(ConfigError):
        ricker_shift_scan([0.0, 1.0], [params])


def test_velocity_scan_is_minimal_at_the_reference():
    c_values = [1400.0, 1450.0, 1500.0, 1550.0, 1600.0]
    scan = scan_constant_velocity(
        c_values,
        1500.0,
        geometry_spec=SMALL_LINE_GEOMETRY,
        metrics=dict(l2=L2(), w2=W2(), hv=HV()),
        model_spec=SMALL_LINE_MODEL,
        pml=PMLSpec(width_cells=10),
    )
    assert list(scan.to_frame().columns) == ["c", "l2", "w2", "hv"]
    for label, values in scan.curves.items():
        assert scan.argmin(label) == 1500.0
        assert values[2] == 0.0
        assert np.all(np.delete(values, 2) > 0)


def test_velocity_scan_validation():
    with pytest.raises(ConfigError):
        scan_constant_velocity([1400.0, 1500.0, 1600.0], 1700.0)
    with pytest.raises(ConfigError):
        scan_constant_velocity([1400.0, 1500.0], 1500.0)


def test_phantom_geometry():
    model = gaussian_inclusion_model(n=24)
    line = phantom_geometry(model, "line")
    assert line.n_receivers == 24
    np.testing.assert_allclose(line.receivers[:, 1], 0.1 * model.extent[1])
    ring = phantom_geometry(model, "ring", dict(n_transducers=8))
    assert ring.n_sources == ring.n_receivers == 8
    with pytest.raises(ConfigError):
        phantom_geometry(model, "circle")


def test_phantom_experiment_is_deterministic(tmp_path):
    config = InversionConfig(
        frequency_schedule=[100e3],
        velocity_bounds=(1400.0, 1700.0),
        optimizer=ProjectedLBFGS(max_iters_per_freq=1),
        pml=PMLSpec(width_cells=8),
    )

    def run(log_path=None):
        return phantom_experiment(
            phantom_spec=dict(n=24),
            metrics=dict(l2=L2()),
            snr_db=20.0,
            seed=1,
            config=config,
            geometry_kwargs=dict(n_transducers=8),
            log_path=log_path,
        )["l2"]

    first, second = run(str(tmp_path)), run()
    np.testing.assert_array_equal(first.report.final_model.c, second.report.final_model.c)
    assert first.score.rmse == second.score.rmse
    assert first.initial_score.rmse > 0
    assert os.path.isdir(os.path.join(str(tmp_path), "l2"))


@pytest.mark.slow
def test_velocity_landscapes():
    hv_metrics = {"hv_eps{:g}".format(eps): HV(epsilon=eps) for eps in (1e-5, 1e-6, 1e-7)}
    hv_scan = scan_constant_velocity(np.linspace(1350.0, 1650.0, 31), 1500.0, metrics=hv_metrics)
    for label in hv_metrics:
        assert count_spurious_extrema(hv_scan.curves[label]) == 0

    l2_scan = scan_constant_velocity(np.linspace(1300.0, 1700.0, 41), 1500.0, metrics=dict(l2=L2()))
    assert count_spurious_extrema(l2_scan.curves["l2"]) >= 1


@pytest.mark.slow
def test_shift_landscapes():
    shifts = np.linspace(-0.5, 0.5, 101)
    stiff = dict(kappa=10.0, lam=10.0, epsilon=10.0)
    soft = dict(kappa=1e-5, lam=1e-5, epsilon=1e-3)
    scan = ricker_shift_scan(shifts, [stiff, soft])
    assert count_strict_local_minima(scan.curves["hv(kappa=10,lam=10,epsilon=10)"]) >= 3
    assert count_strict_local_minima(scan.curves["hv(kappa=1e-05,lam=1e-05,epsilon=0.001)"]) == 1


@pytest.mark.slow
def test_hv_velocity_landscape_is_ordered_below_the_reference():
    scan = scan_constant_velocity([1400.0, 1450.0, 1500.0], 1500.0, metrics=dict(hv=HV()))
    far, near, exact = scan.curves["hv"]
    assert exact < near < far


def _basin_width(values: np.ndarray, center: int, level: float = 0.5) -> int:
    low = values <= level
    left, right = center, center
    while left > 0 and low[left - 1]:
        left -= 1
    while right < len(values) - 1 and low[right + 1]:
        right += 1
    return right - left + 1


@pytest.mark.slow
def test_soft_hv_has_a_wide_basin():
    shifts = np.linspace(-0.5, 0.5, 101)
    soft = dict(kappa=1e-5, lam=1e-5, epsilon=1e-3)
    scan = ricker_shift_scan(shifts, [soft])
    center = int(np.argmin(np.abs(shifts)))
    hv = scan.curves["hv(kappa=1e-05,lam=1e-05,epsilon=0.001)"]
    assert count_strict_local_minima(hv) == 1
    assert _basin_width(hv, center) > _basin_width(scan.curves["l2"], center)
