from dataclasses import replace
from typing import List, Sequence, Union

import numpy as np
import scipy.ndimage

from hvfwi.physics.helmholtz import FrequencyGather, VelocityModel2D

Data = Union[np.ndarray, Sequence[FrequencyGather]]


def add_noise(data: Data, snr_db: float, seed: int = 0) -> Data:
    """Adds white Gaussian noise scaled so the whole dataset has exactly the requested SNR.

    Complex data gets circular complex noise. Gather lists are treated as one dataset.
    """
    is_gathers = not isinstance(data, np.ndarray)
    if is_gathers and len(data) == 0:
        return []
    values = np.concatenate([g.values for g in data]) if is_gathers else np.asarray(data)
    if np.isinf(snr_db) and snr_db > 0:
        noisy = values.copy()
    else:
        rng = np.random.default_rng(seed)
        noise = rng.standard_normal(values.shape)
        if np.iscomplexobj(values):
            noise = noise + 1j * rng.standard_normal(values.shape)
        signal_power = float(np.sum(np.abs(values) ** 2))
        noise_power = float(np.sum(np.abs(noise) ** 2))
        if signal_power == 0 or noise_power == 0:
            noisy = values.copy()
        else:
            scale = np.sqrt(signal_power / (noise_power * 10 ** (snr_db / 10.0)))
            noisy = values + scale * noise
    if not is_gathers:
        return noisy
    noisy_gathers: List[FrequencyGather] = []
    offset = 0
    for gather in data:
        n = len(gather.values)
        noisy_gathers.append(replace(gather, values=noisy[offset : offset + n]))
        offset += n
    return noisy_gathers


def measured_snr_db(clean: np.ndarray, noisy: np.ndarray) -> float:
    clean, noisy = np.asarray(clean), np.asarray(noisy)
    return 10 * np.log10(np.sum(np.abs(clean) ** 2) / np.sum(np.abs(noisy - clean) ** 2))


def gaussian_smooth(model: VelocityModel2D, sigma_cells: float) -> VelocityModel2D:
    """Isotropic Gaussian filter in grid cells with edge replication."""
    if sigma_cells < 0:
        raise ValueError("sigma_cells must be nonnegative")
    if sigma_cells == 0:
        return model.with_velocity(model.c.copy())
    return model.with_velocity(scipy.ndimage.gaussian_filter(model.c, sigma=sigma_cells, mode="nearest"))
