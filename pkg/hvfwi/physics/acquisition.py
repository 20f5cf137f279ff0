"""Model and acquisition builders. Names are looked up from configs, so keep signatures keyword friendly."""
from typing import Optional, Sequence

import numpy as np
import scipy.ndimage

from .helmholtz import AcquisitionGeometry, VelocityModel2D


def ricker_wavelet(t: np.ndarray, peak_frequency: float, t0: float = 0.0) -> np.ndarray:
    arg = (np.pi * peak_frequency * (np.asarray(t, dtype=np.float64) - t0)) ** 2
    return (1.0 - 2.0 * arg) * np.exp(-arg)


def constant_model(n_z: int = 64, n_x: int = 64, spacing: float = 10.0, velocity: float = 1500.0) -> VelocityModel2D:
    return VelocityModel2D(c=np.full((n_z, n_x), float(velocity)), dx=spacing, dz=spacing)


def layered_model(
    n_z: int = 51,
    n_x: int = 151,
    spacing: float = 20.0,
    velocities: Sequence[float] = (1500.0, 1800.0, 2200.0, 2600.0),
    dip: float = 0.05,
    smoothing_cells: float = 0.0,
) -> VelocityModel2D:
    """Dipping layers of increasing speed, a small stand-in for a marine section.

    A positive smoothing_cells blurs the interfaces, which gives a smoothed-true starting model.
    """
    z = np.arange(n_z)[:, None] / max(n_z - 1, 1)
    x = np.arange(n_x)[None, :] / max(n_x - 1, 1)
    depth = z - dip * (x - 0.5)
    layer = np.clip((depth * len(velocities)).astype(int), 0, len(velocities) - 1)
    c = np.asarray(velocities, dtype=np.float64)[layer]
    if smoothing_cells < 0:
        raise ValueError("smoothing_cells must be nonnegative")
    if smoothing_cells > 0:
        c = scipy.ndimage.gaussian_filter(c, smoothing_cells, mode="nearest")
    return VelocityModel2D(c=c, dx=spacing, dz=spacing)


def linear_gradient_model(
    n_z: int = 51, n_x: int = 151, spacing: float = 20.0, top: float = 1500.0, bottom: float = 2600.0
) -> VelocityModel2D:
    """Speed increasing linearly with depth and constant along x."""
    column = np.linspace(top, bottom, n_z)
    return VelocityModel2D(c=np.repeat(column[:, None], n_x, axis=1), dx=spacing, dz=spacing)


def gaussian_inclusion_model(
    n: int = 64,
    spacing: float = 0.625e-3,
    background: float = 1500.0,
    contrast: float = 0.05,
    radius_fraction: float = 0.12,
    center_fraction: Sequence[float] = (0.5, 0.5),
) -> VelocityModel2D:
    """Water background with a smooth inclusion, contrast relative to the background."""
    coords = np.arange(n) / (n - 1)
    zz, xx = np.meshgrid(coords, coords, indexing="ij")
    r2 = (xx - center_fraction[0]) ** 2 + (zz - center_fraction[1]) ** 2
    c = background * (1.0 + contrast * np.exp(-r2 / (2 * radius_fraction**2)))
    return VelocityModel2D(c=c, dx=spacing, dz=spacing)


def line_geometry(
    model: VelocityModel2D,
    n_sources: int = 3,
    n_receivers: int = 101,
    depth: float = 100.0,
    margin_fraction: float = 0.1,
    peak_frequency_hz: Optional[float] = None,
) -> AcquisitionGeometry:
    """Sources and receivers along a horizontal line, sources kept away from the edges."""
    width, _ = model.extent
    source_x = np.linspace(margin_fraction * width, (1 - margin_fraction) * width, n_sources)
    receiver_x = np.linspace(0.0, width, n_receivers)
    sources = np.stack([source_x, np.full(n_sources, depth)], axis=1)
    receivers = np.stack([receiver_x, np.full(n_receivers, depth)], axis=1)
    return AcquisitionGeometry(sources=sources, receivers=receivers, peak_frequency_hz=peak_frequency_hz)


def ring_geometry(
    model: VelocityModel2D,
    n_transducers: int = 32,
    radius_fraction: float = 0.42,
    peak_frequency_hz: Optional[float] = None,
) -> AcquisitionGeometry:
    """Transducers on a circle around the model centre; each one emits and all of them record."""
    width, depth = model.extent
    radius = radius_fraction * min(width, depth)
    angles = 2 * np.pi * np.arange(n_transducers) / n_transducers
    ring = np.stack([0.5 * width + radius * np.cos(angles), 0.5 * depth + radius * np.sin(angles)], axis=1)
    return AcquisitionGeometry(sources=ring, receivers=ring.copy(), peak_frequency_hz=peak_frequency_hz)
