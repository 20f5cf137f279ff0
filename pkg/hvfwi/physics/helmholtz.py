"""Frequency-domain acoustic wave equation on a 2D grid.

Solves (nabla^2 + omega^2 / c^2) u = -s with a five point stencil. The physical grid is
padded on every side by an absorbing layer in which the coordinates are stretched by
s = 1 + i sigma / omega (outgoing waves behave like exp(+i k r)). The stretched operator is
assembled in its symmetric form

    d_x (s_z / s_x d_x u) + d_z (s_x / s_z d_z u) + s_x s_z omega^2 / c^2 u,

so the system matrix is complex symmetric and source-receiver reciprocity is exact.
Positions are (x, z) in meters, measured from the first physical grid node.
"""
import sys
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from hvfwi.utils.errors import FactorizationFailure, MismatchedGeometry

MIN_POINTS_PER_WAVELENGTH = 8


@dataclass
class VelocityModel2D:
    c: np.ndarray  # (n_z, n_x) in m/s
    dx: float
    dz: float

    def __post_init__(self):
        c = np.array(self.c, dtype=np.float64)
        if c.ndim != 2 or min(c.shape) < 2:
            raise ValueError("Velocity model must be a 2D array with at least 2 nodes per axis")
        if not np.all(np.isfinite(c)) or np.any(c <= 0):
            raise ValueError("Velocities must be finite and positive")
        if not (self.dx > 0 and self.dz > 0):
            raise ValueError("Grid spacing must be positive")
        self.c = c

    @property
    def shape(self) -> Tuple[int, int]:
        return self.c.shape

    @property
    def extent(self) -> Tuple[float, float]:
        """Physical (width, depth) covered by the nodes."""
        return (self.c.shape[1] - 1) * self.dx, (self.c.shape[0] - 1) * self.dz

    def with_velocity(self, c: np.ndarray) -> "VelocityModel2D":
        return replace(self, c=c)


def ricker_spectrum(freq_hz: float, peak_frequency_hz: float) -> complex:
    """Amplitude spectrum of a zero-phase Ricker wavelet."""
    ratio = freq_hz / peak_frequency_hz
    return complex(2.0 / np.sqrt(np.pi) * ratio**2 / peak_frequency_hz * np.exp(-(ratio**2)))


def _positions(values) -> np.ndarray:
    positions = np.array(values, dtype=np.float64)
    if positions.size == 0:
        return positions.reshape(0, 2)
    return np.atleast_2d(positions)


@dataclass
class AcquisitionGeometry:
    sources: np.ndarray  # (n_sources, 2) as (x, z)
    receivers: np.ndarray  # (n_receivers, 2)
    peak_frequency_hz: Optional[float] = None  # Ricker spectrum when set, flat otherwise

    def __post_init__(self):
        self.sources = _positions(self.sources)
        self.receivers = _positions(self.receivers)
        if self.sources.shape[1] != 2 or self.receivers.shape[1] != 2:
            raise ValueError("Positions must be given as (x, z) pairs")
        if len(self.receivers) < 5:
            raise ValueError("At least 5 receivers are needed to form a gather")

    @property
    def n_sources(self) -> int:
        return len(self.sources)

    @property
    def n_receivers(self) -> int:
        return len(self.receivers)

    def source_amplitude(self, freq_hz: float) -> complex:
        if self.peak_frequency_hz is None:
            return 1.0 + 0.0j
        return ricker_spectrum(freq_hz, self.peak_frequency_hz)


@dataclass
class PMLSpec:
    width_cells: int = 20
    max_damping: Optional[float] = None  # 1/s; derived from the model when None
    profile_power: float = 2.0
    reflection: float = 1e-4  # target reflection used to derive max_damping

    def __post_init__(self):
        if self.width_cells < 0:
            raise ValueError("PML width must be nonnegative")
        if self.max_damping is not None and self.max_damping < 0:
            raise ValueError("PML damping must be nonnegative")
        if not 0 < self.reflection < 1:
            raise ValueError("PML reflection must lie in (0, 1)")

    def resolve(self, model: VelocityModel2D) -> "PMLSpec":
        """Fixes max_damping from the fastest velocity so it no longer depends on the model."""
        if self.max_damping is not None:
            return self
        thickness = self.width_cells * max(model.dx, model.dz)
        if thickness == 0:
            return replace(self, max_damping=0.0)
        damping = (self.profile_power + 1) * float(np.max(model.c)) * np.log(1.0 / self.reflection) / (2 * thickness)
        return replace(self, max_damping=damping)


@dataclass
class Wavefield:
    padded: np.ndarray  # includes the absorbing layer
    omega: float
    pml_width: int

    @property
    def u(self) -> np.ndarray:
        w = self.pml_width
        return self.padded[w : self.padded.shape[0] - w, w : self.padded.shape[1] - w]


@dataclass
class FrequencyGather:
    source_index: int
    freq_hz: float
    values: np.ndarray  # complex, one sample per receiver


def _stretch(n: int, pml: PMLSpec, omega: float) -> Tuple[np.ndarray, np.ndarray]:
    """Stretch factors at the padded nodes and at the half points around them."""
    width = pml.width_cells
    nodes = np.arange(n + 2 * width, dtype=np.float64)
    halves = np.arange(n + 2 * width + 1, dtype=np.float64) - 0.5

    def profile(p):
        if width == 0:
            return np.zeros_like(p)
        depth = np.maximum(np.maximum(width - p, p - (width + n - 1)), 0.0) / width
        return pml.max_damping * depth**pml.profile_power

    return 1.0 + 1j * profile(nodes) / omega, 1.0 + 1j * profile(halves) / omega


def stretch_factors(model: VelocityModel2D, omega: float, pml: PMLSpec):
    """Returns (s_x nodes, s_x halves, s_z nodes, s_z halves) on the padded grid."""
    pml = pml.resolve(model)
    n_z, n_x = model.shape
    sx, sx_half = _stretch(n_x, pml, omega)
    sz, sz_half = _stretch(n_z, pml, omega)
    return sx, sx_half, sz, sz_half


class HelmholtzSystem(object):
    """Assembled and factorized operator for one model and one frequency."""

    def __init__(self, model: VelocityModel2D, omega: float, pml: PMLSpec, matrix, factor):
        self.model = model
        self.omega = omega
        self.pml = pml
        self.matrix = matrix
        self.factor = factor
        n_z, n_x = model.shape
        self.padded_shape = (n_z + 2 * pml.width_cells, n_x + 2 * pml.width_cells)

    def node_indices(self, positions: np.ndarray) -> np.ndarray:
        """Flat padded-grid indices of the nodes nearest to each (x, z) position."""
        positions = np.atleast_2d(np.asarray(positions, dtype=np.float64))
        n_z, n_x = self.model.shape
        col = np.rint(positions[:, 0] / self.model.dx).astype(int)
        row = np.rint(positions[:, 1] / self.model.dz).astype(int)
        if np.any(col < 0) or np.any(col >= n_x) or np.any(row < 0) or np.any(row >= n_z):
            raise MismatchedGeometry("Source or receiver position lies outside the physical grid")
        w = self.pml.width_cells
        return (row + w) * self.padded_shape[1] + (col + w)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solves for one right-hand side (flat) or several (columns)."""
        solution = self.factor.solve(np.ascontiguousarray(rhs, dtype=np.complex128))
        if not np.all(np.isfinite(solution)):
            raise FactorizationFailure("Helmholtz solve produced non-finite values")
        return solution

    def to_wavefield(self, flat: np.ndarray) -> Wavefield:
        return Wavefield(padded=flat.reshape(self.padded_shape), omega=self.omega, pml_width=self.pml.width_cells)


def assemble_operator(model: VelocityModel2D, omega: float, pml: Optional[PMLSpec] = None):
    pml = (PMLSpec() if pml is None else pml).resolve(model)
    sx, sx_half, sz, sz_half = stretch_factors(model, omega, pml)
    w = pml.width_cells
    c = np.pad(model.c, w, mode="edge")
    n_z, n_x = c.shape

    ax = sz[:, None] / sx_half[None, :] / model.dx**2  # (n_z, n_x + 1), column j is half point j - 1/2
    az = sx[None, :] / sz_half[:, None] / model.dz**2  # (n_z + 1, n_x)
    mass = sz[:, None] * sx[None, :] * omega**2 / c**2
    diag = mass - (ax[:, :-1] + ax[:, 1:]) - (az[:-1, :] + az[1:, :])

    index = np.arange(n_z * n_x).reshape(n_z, n_x)
    east_rows, east_cols, east = index[:, :-1].ravel(), index[:, 1:].ravel(), ax[:, 1:-1].ravel()
    south_rows, south_cols, south = index[:-1, :].ravel(), index[1:, :].ravel(), az[1:-1, :].ravel()
    rows = np.concatenate([index.ravel(), east_rows, east_cols, south_rows, south_cols])
    cols = np.concatenate([index.ravel(), east_cols, east_rows, south_cols, south_rows])
    vals = np.concatenate([diag.ravel(), east, east, south, south])
    matrix = scipy.sparse.csc_matrix((vals, (rows, cols)), shape=(n_z * n_x, n_z * n_x))
    return matrix, pml


def assemble_system(model: VelocityModel2D, omega: float, pml: Optional[PMLSpec] = None) -> HelmholtzSystem:
    if not (np.isfinite(omega) and omega > 0):
        raise FactorizationFailure("Angular frequency must be positive, got " + str(omega))
    wavelength = float(np.min(model.c)) / (omega / (2 * np.pi))
    points = wavelength / max(model.dx, model.dz)
    if points < MIN_POINTS_PER_WAVELENGTH:
        print(
            "[hvfwi] Warning: {:.1f} points per wavelength at {:.3g} Hz, below {}.".format(
                points, omega / (2 * np.pi), MIN_POINTS_PER_WAVELENGTH
            ),
            file=sys.stderr,
        )
    matrix, pml = assemble_operator(model, omega, pml)
    try:
        factor = scipy.sparse.linalg.splu(matrix)
    except RuntimeError as e:
        raise FactorizationFailure("Helmholtz factorization failed: " + str(e))
    return HelmholtzSystem(model, omega, pml, matrix, factor)


def point_source_rhs(system: HelmholtzSystem, positions: np.ndarray, amplitudes: Sequence[complex]) -> np.ndarray:
    """One column per source: -amplitude / (dx dz) at the nearest node."""
    nodes = system.node_indices(positions)
    rhs = np.zeros((system.matrix.shape[0], len(nodes)), dtype=np.complex128)
    cell = system.model.dx * system.model.dz
    rhs[nodes, np.arange(len(nodes))] = -np.asarray(amplitudes, dtype=np.complex128) / cell
    return rhs


def solve_point_source(system: HelmholtzSystem, source_position, amplitude: complex = 1.0) -> Wavefield:
    rhs = point_source_rhs(system, np.atleast_2d(source_position), [amplitude])
    return system.to_wavefield(system.solve(rhs)[:, 0])


def solve_point_sources(
    system: HelmholtzSystem, source_positions: np.ndarray, amplitude: complex = 1.0
) -> List[Wavefield]:
    """All sources share the factorization and are solved as one block right-hand side."""
    positions = np.atleast_2d(source_positions)
    rhs = point_source_rhs(system, positions, [amplitude] * len(positions))
    solution = system.solve(rhs)
    return [system.to_wavefield(solution[:, k]) for k in range(solution.shape[1])]


def sample_receivers(system: HelmholtzSystem, field: Wavefield, receiver_positions: np.ndarray) -> np.ndarray:
    return field.padded.ravel()[system.node_indices(receiver_positions)]


def forward_data(
    model: VelocityModel2D,
    geometry: AcquisitionGeometry,
    freqs_hz: Sequence[float],
    pml: Optional[PMLSpec] = None,
) -> List[FrequencyGather]:
    """Synthetic gathers ordered by source, then by frequency."""
    if geometry.n_sources == 0:
        return []
    pml = (PMLSpec() if pml is None else pml).resolve(model)
    gathers = {}
    for freq in freqs_hz:
        system = assemble_system(model, 2 * np.pi * freq, pml)
        fields = solve_point_sources(system, geometry.sources, geometry.source_amplitude(freq))
        for k, field in enumerate(fields):
            values = sample_receivers(system, field, geometry.receivers)
            gathers[(k, freq)] = FrequencyGather(source_index=k, freq_hz=float(freq), values=values)
    return [gathers[(k, freq)] for k in range(geometry.n_sources) for freq in freqs_hz]
