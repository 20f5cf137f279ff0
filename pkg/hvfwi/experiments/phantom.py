import os
import sys
import time
from dataclasses import dataclass, replace
from typing import Dict, Mapping, Optional

import numpy as np
from tqdm import tqdm

from hvfwi.inversion import InversionConfig, InversionReport, add_noise, fwi_invert
from hvfwi.metrics import HV, Misfit
from hvfwi.physics.acquisition import gaussian_inclusion_model, line_geometry, ring_geometry
from hvfwi.physics.helmholtz import forward_data
from hvfwi.utils.errors import ConfigError
from hvfwi.utils.logger import Logger

from .scoring import QualityScore, score

# Frequencies below 300 kHz keep at least 8 points per wavelength on the default phantom grid.
DEFAULT_SCHEDULE = (100e3, 200e3)


@dataclass
class PhantomOutcome:
    report: InversionReport
    score: QualityScore
    initial_score: QualityScore
    seconds: float

    @property
    def rmse_ratio(self) -> float:
        return self.score.rmse / self.initial_score.rmse if self.initial_score.rmse > 0 else 0.0


def phantom_geometry(model, geometry_mode: str, geometry_kwargs: Optional[Mapping] = None):
    geometry_kwargs = dict(geometry_kwargs or {})
    if geometry_mode == "ring":
        return ring_geometry(model, **geometry_kwargs)
    elif geometry_mode == "line":
        # Sources and receivers just inside the top edge of the phantom.
        geometry_kwargs.setdefault("depth", 0.1 * model.extent[1])
        geometry_kwargs.setdefault("n_receivers", model.shape[1])
        return line_geometry(model, **geometry_kwargs)
    else:
        raise ConfigError("geometry_mode must be 'line' or 'ring', got " + repr(geometry_mode))


def phantom_experiment(
    phantom_spec: Optional[Mapping] = None,
    geometry_mode: str = "ring",
    metrics: Optional[Mapping[str, Misfit]] = None,
    snr_db: Optional[float] = None,
    seed: int = 0,
    config: Optional[InversionConfig] = None,
    geometry_kwargs: Optional[Mapping] = None,
    log_path: Optional[str] = None,
) -> Dict[str, PhantomOutcome]:
    """Simulates data on a Gaussian-inclusion phantom and inverts it from the water background per metric."""
    phantom_spec = dict(phantom_spec or {})
    true_model = gaussian_inclusion_model(**phantom_spec)
    geometry = phantom_geometry(true_model, geometry_mode, geometry_kwargs)
    config = InversionConfig(frequency_schedule=DEFAULT_SCHEDULE) if config is None else config
    metrics = dict(hv=HV()) if metrics is None else dict(metrics)

    # Observed and synthetic data share one damping profile.
    config = replace(config, pml=config.pml.resolve(true_model))
    observed = forward_data(true_model, geometry, config.frequency_schedule, config.pml)
    if snr_db is not None:
        observed = add_noise(observed, snr_db, seed=seed)

    background = phantom_spec.get("background", 1500.0)
    initial_model = true_model.with_velocity(np.full(true_model.shape, float(background)))
    initial_score = score(initial_model, true_model)

    outcomes = {}
    for label, misfit in tqdm(metrics.items(), desc="phantom", leave=False):
        logger = None if log_path is None else Logger(os.path.join(log_path, label))
        start = time.time()
        report = fwi_invert(initial_model, observed, geometry, misfit, config, logger=logger)
        outcome = PhantomOutcome(
            report=report,
            score=score(report.final_model, true_model),
            initial_score=initial_score,
            seconds=time.time() - start,
        )
        print(
            "[hvfwi] {}: rmse {:.4g} -> {:.4g} m/s, psnr {:.2f} dB ({:.1f}s)".format(
                label, initial_score.rmse, outcome.score.rmse, outcome.score.psnr, outcome.seconds
            ),
            file=sys.stderr,
        )
        if logger is not None:
            logger.close()
        outcomes[label] = outcome
    return outcomes
