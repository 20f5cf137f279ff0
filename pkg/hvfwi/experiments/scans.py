"""Misfit landscapes: constant-velocity scans through the wave solver and shift scans of a pulse."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from tqdm import tqdm

from hvfwi.metrics import HV, L2, Misfit
from hvfwi.metrics.baselines import l2_misfit_complex
from hvfwi.metrics.hv import GridSignal, HVParams, hv_distance
from hvfwi.physics.acquisition import constant_model, line_geometry, ricker_wavelet
from hvfwi.physics.helmholtz import PMLSpec, forward_data
from hvfwi.utils.errors import ConfigError
from hvfwi.utils.utils import get_num_threads

# Seismic line analogue: 6 km x 1 km at 40 m.
DEFAULT_LINE_MODEL = dict(n_z=26, n_x=151, spacing=40.0)
DEFAULT_LINE_GEOMETRY = dict(n_sources=3, n_receivers=101, depth=100.0)

RICKER_PEAK = 3.0
RICKER_SAMPLES = 257


@dataclass
class ScanResult:
    parameter: str
    grid: np.ndarray
    curves: Dict[str, np.ndarray]
    warnings: List[str] = field(default_factory=list)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=np.float64)
        for label, values in self.curves.items():
            values = np.asarray(values, dtype=np.float64)
            if values.shape != self.grid.shape:
                raise ValueError("Curve {} does not match the scan grid".format(label))
            if not np.all(np.isfinite(values)):
                raise ValueError("Curve {} holds non-finite values".format(label))
            self.curves[label] = values

    def normalized(self) -> "ScanResult":
        curves = {}
        for label, values in self.curves.items():
            peak = np.max(np.abs(values))
            curves[label] = values / peak if peak > 0 else values.copy()
        return ScanResult(self.parameter, self.grid.copy(), curves, list(self.warnings))

    def argmin(self, label: str) -> float:
        return float(self.grid[np.argmin(self.curves[label])])

    def to_frame(self) -> pd.DataFrame:
        df = pd.DataFrame({self.parameter: self.grid})
        for label, values in self.curves.items():
            df[label] = values
        return df


def _strict_interior(values: np.ndarray, compare: Callable) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    middle = values[1:-1]
    return np.flatnonzero(compare(middle, values[:-2]) & compare(middle, values[2:])) + 1


def count_strict_local_minima(values: np.ndarray) -> int:
    return len(_strict_interior(values, np.less))


def count_strict_local_maxima(values: np.ndarray) -> int:
    return len(_strict_interior(values, np.greater))


def count_strict_local_extrema(values: np.ndarray) -> int:
    return count_strict_local_minima(values) + count_strict_local_maxima(values)


def count_spurious_extrema(values: np.ndarray) -> int:
    """Strict interior extrema other than the global minimum."""
    minima = _strict_interior(values, np.less)
    count = len(minima) + count_strict_local_maxima(values)
    if np.argmin(values) in minima:
        count -= 1
    return count


def _parallel_map(fn: Callable, items: Sequence, desc: str) -> List:
    # Results come back in input order.
    with ThreadPoolExecutor(max_workers=min(get_num_threads(), len(items))) as pool:
        return list(tqdm(pool.map(fn, items), total=len(items), desc=desc, leave=False))


def scan_constant_velocity(
    c_values: Sequence[float],
    c_star: float,
    geometry_spec: Optional[Mapping] = None,
    freq_hz: float = 1.0,
    metrics: Optional[Mapping[str, Misfit]] = None,
    model_spec: Optional[Mapping] = None,
    pml: Optional[PMLSpec] = None,
) -> ScanResult:
    """Misfit between data simulated at c and at c_star on homogeneous models, summed over sources."""
    c_values = np.asarray(c_values, dtype=np.float64)
    if len(c_values) < 3:
        raise ConfigError("A velocity scan needs at least 3 values")
    if not np.min(c_values) <= c_star <= np.max(c_values):
        raise ConfigError("c_star = {} lies outside the scanned range".format(c_star))
    metrics = dict(l2=L2(), hv=HV()) if metrics is None else dict(metrics)
    model_spec = dict(DEFAULT_LINE_MODEL, **(model_spec or {}))
    geometry_spec = dict(DEFAULT_LINE_GEOMETRY, **(geometry_spec or {}))

    reference_model = constant_model(velocity=c_star, **model_spec)
    geometry = line_geometry(reference_model, **geometry_spec)
    # One damping profile for every scan point.
    pml = (PMLSpec() if pml is None else pml).resolve(constant_model(velocity=np.max(c_values), **model_spec))
    reference = forward_data(reference_model, geometry, [freq_hz], pml)

    def evaluate(c: float) -> Dict[str, tuple]:
        model = reference_model.with_velocity(np.full(reference_model.shape, c))
        synthetic = forward_data(model, geometry, [freq_hz], pml)
        values = {}
        for label, misfit in metrics.items():
            evals = [misfit(syn.values, ref.values) for syn, ref in zip(synthetic, reference)]
            values[label] = (sum(e.value for e in evals), all(e.converged for e in evals))
        return values

    points = _parallel_map(evaluate, list(c_values), "velocity scan")
    curves = {label: np.array([p[label][0] for p in points]) for label in metrics}
    warnings = [
        "{} not converged at c = {:g}".format(label, c)
        for c, p in zip(c_values, points)
        for label in metrics
        if not p[label][1]
    ]
    return ScanResult(parameter="c", grid=c_values, curves=curves, warnings=warnings)


def hv_label(params: HVParams) -> str:
    return "hv(kappa={:g},lam={:g},epsilon={:g})".format(params.kappa, params.lam, params.epsilon)


def ricker_pair(shift: float, peak_frequency: float = RICKER_PEAK, n_samples: int = RICKER_SAMPLES):
    """A Ricker pulse centred on [-1, 1] and the same pulse delayed by shift."""
    t = np.linspace(-1.0, 1.0, n_samples)
    step = t[1] - t[0]
    f = GridSignal(ricker_wavelet(t, peak_frequency), start=-1.0, step=step)
    g = GridSignal(ricker_wavelet(t, peak_frequency, t0=shift), start=-1.0, step=step)
    return f, g


def ricker_shift_scan(
    shift_values: Sequence[float],
    hv_param_sets: Sequence[Union[HVParams, Mapping]],
    peak_frequency: float = RICKER_PEAK,
    n_samples: int = RICKER_SAMPLES,
    normalize: bool = True,
) -> ScanResult:
    """L2 and HV losses between a Ricker pulse and its shifted copy, one curve per parameter set."""
    shift_values = np.asarray(shift_values, dtype=np.float64)
    if np.max(np.abs(shift_values)) >= 1.0:
        raise ConfigError("Shifts must stay within the support of the pulse")
    param_sets = [p if isinstance(p, HVParams) else HVParams(**p) for p in hv_param_sets]

    def evaluate(shift: float) -> Dict[str, tuple]:
        f, g = ricker_pair(shift, peak_frequency, n_samples)
        values = dict(l2=(l2_misfit_complex(f.values, g.values)[0], True))
        for params in param_sets:
            result = hv_distance(f, g, params)
            values[hv_label(params)] = (result.distance, result.converged)
        return values

    points = _parallel_map(evaluate, list(shift_values), "shift scan")
    labels = ["l2"] + [hv_label(p) for p in param_sets]
    curves = {label: np.array([p[label][0] for p in points]) for label in labels}
    warnings = [
        "{} not converged at s = {:g}".format(label, s)
        for s, p in zip(shift_values, points)
        for label in labels
        if not p[label][1]
    ]
    result = ScanResult(parameter="s", grid=shift_values, curves=curves, warnings=warnings)
    return result.normalized() if normalize else result
