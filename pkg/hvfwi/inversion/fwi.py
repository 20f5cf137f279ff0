import sys
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from hvfwi.metrics import Misfit
from hvfwi.physics.helmholtz import AcquisitionGeometry, FrequencyGather, PMLSpec, VelocityModel2D
from hvfwi.utils.errors import ConfigError, MismatchedGeometry
from hvfwi.utils.logger import Logger

from .adjoint import evaluate_objective
from .optim import ProjectedLBFGS
from .processing import gaussian_smooth


@dataclass
class InversionConfig:
    frequency_schedule: Sequence[float]
    rounds: int = 1
    smoothing_sigma: float = 0.0  # cells, applied between rounds
    velocity_bounds: Tuple[float, float] = (1000.0, 5000.0)
    optimizer: ProjectedLBFGS = field(default_factory=ProjectedLBFGS)
    pml: PMLSpec = field(default_factory=PMLSpec)

    def __post_init__(self):
        self.frequency_schedule = [float(f) for f in self.frequency_schedule]
        if len(self.frequency_schedule) == 0 or min(self.frequency_schedule) <= 0:
            raise ConfigError("frequency_schedule must hold positive frequencies")
        if np.any(np.diff(self.frequency_schedule) <= 0):
            raise ConfigError("frequency_schedule must be strictly ascending")
        if self.rounds < 1:
            raise ConfigError("rounds must be at least 1")
        if self.smoothing_sigma < 0:
            raise ConfigError("smoothing_sigma must be nonnegative")
        lower, upper = self.velocity_bounds
        if not 0 < lower < upper:
            raise ConfigError("velocity_bounds must satisfy 0 < lower < upper")
        self.velocity_bounds = (float(lower), float(upper))


@dataclass
class InversionReport:
    final_model: VelocityModel2D
    history: List[Dict] = field(default_factory=list)  # one record per accepted iterate
    snapshots: List[Tuple[int, float, VelocityModel2D]] = field(default_factory=list)
    stage_seconds: Dict[str, float] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)
    warnings: List[str] = field(default_factory=list)

    @property
    def misfits(self) -> List[float]:
        return [record["misfit"] for record in self.history]


def select_frequency(observed: Sequence[FrequencyGather], freq_hz: float) -> List[FrequencyGather]:
    gathers = [g for g in observed if np.isclose(g.freq_hz, freq_hz)]
    if len(gathers) == 0:
        raise MismatchedGeometry("No observed data at {} Hz".format(freq_hz))
    return gathers


def fwi_invert(
    initial_model: VelocityModel2D,
    observed: Sequence[FrequencyGather],
    geometry: AcquisitionGeometry,
    misfit: Misfit,
    config: InversionConfig,
    logger: Optional[Logger] = None,
) -> InversionReport:
    """Frequency-marching inversion: L-BFGS at each frequency, low to high, repeated for every round."""
    lower, upper = config.velocity_bounds
    if np.min(initial_model.c) < lower or np.max(initial_model.c) > upper:
        raise ConfigError("Initial model lies outside velocity_bounds {}".format(config.velocity_bounds))
    # Damping is frozen so the objective depends on c only through the wave equation.
    pml = config.pml.resolve(initial_model)
    report = InversionReport(final_model=initial_model)
    model = initial_model
    step = 0

    for round_index in range(config.rounds):
        accepted = 0
        for freq in config.frequency_schedule:
            stage = "round{}/{:g}Hz".format(round_index, freq)
            gathers = select_frequency(observed, freq)
            unconverged = []
            records = []

            def objective(c: np.ndarray):
                result = evaluate_objective(model.with_velocity(c), geometry, gathers, freq, misfit, pml)
                if not result.converged:
                    unconverged.append(True)
                return result.value, result.gradient

            def callback(iteration, c, value, gradient, alpha):
                nonlocal step
                step += 1
                records.append(dict(round=round_index, freq_hz=freq, iteration=iteration, misfit=value))
                if logger is not None:
                    logger.record_dict(records[-1])
                    logger.record("step_length", alpha)
                    logger.record("grad_norm", float(np.linalg.norm(gradient)))
                    logger.dump(step)

            start = time.time()
            result = config.optimizer.minimize(objective, model.c, config.velocity_bounds, callback=callback)
            report.stage_seconds[stage] = time.time() - start
            if result.value is not None:
                report.history.append(dict(round=round_index, freq_hz=freq, iteration=0, misfit=result.values[0]))
            report.history.extend(records)
            if result.flag is not None:
                report.flags.append("{}@{}".format(result.flag, stage))
                print("[hvfwi] Warning:", result.flag, "at", stage, file=sys.stderr)
            if len(unconverged) > 0:
                report.warnings.append("misfit solver not converged {} times at {}".format(len(unconverged), stage))

            accepted += result.iterations
            model = model.with_velocity(result.x)
            report.snapshots.append((round_index, freq, model))
            if result.value is not None:
                print(
                    "[hvfwi] {}: misfit {:.6g} -> {:.6g} in {} iterations ({:.1f}s)".format(
                        stage, result.values[0], result.value, result.iterations, report.stage_seconds[stage]
                    ),
                    file=sys.stderr,
                )

        if round_index < config.rounds - 1 and accepted > 0 and config.smoothing_sigma > 0:
            model = gaussian_smooth(model, config.smoothing_sigma)

    report.final_model = model
    return report
