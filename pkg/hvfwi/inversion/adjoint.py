"""Misfit adjoint sources, adjoint wavefields and the velocity gradient for one frequency."""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from hvfwi.metrics import Misfit, MisfitEval
from hvfwi.physics.helmholtz import (
    AcquisitionGeometry,
    FrequencyGather,
    HelmholtzSystem,
    PMLSpec,
    VelocityModel2D,
    Wavefield,
    assemble_system,
    sample_receivers,
    solve_point_sources,
    stretch_factors,
)
from hvfwi.utils.errors import MismatchedGeometry
from hvfwi.utils.utils import get_num_threads


def misfit_and_adjoint(gather_syn: FrequencyGather, gather_obs: FrequencyGather, choice: Misfit) -> MisfitEval:
    if gather_syn.source_index != gather_obs.source_index or not np.isclose(gather_syn.freq_hz, gather_obs.freq_hz):
        raise MismatchedGeometry(
            "Cannot compare source {} at {} Hz with source {} at {} Hz".format(
                gather_syn.source_index, gather_syn.freq_hz, gather_obs.source_index, gather_obs.freq_hz
            )
        )
    return choice(gather_syn.values, gather_obs.values)


def _adjoint_rhs(system: HelmholtzSystem, adjoint_sources: Sequence[np.ndarray], receivers: np.ndarray) -> np.ndarray:
    nodes = system.node_indices(receivers)
    rhs = np.zeros((system.matrix.shape[0], len(adjoint_sources)), dtype=np.complex128)
    cell = system.model.dx * system.model.dz
    for k, sources in enumerate(adjoint_sources):
        if len(sources) != len(nodes):
            raise MismatchedGeometry("Adjoint sources do not match the receiver count")
        # Conjugated injection; the solution is conjugated back below.
        np.add.at(rhs[:, k], nodes, np.conj(sources) / cell)
    return rhs


def solve_adjoint(system: HelmholtzSystem, adjoint_sources: np.ndarray, receiver_positions: np.ndarray) -> Wavefield:
    """Solves the conjugate-transposed system with the adjoint sources at the receivers."""
    return solve_adjoints(system, [adjoint_sources], receiver_positions)[0]


def solve_adjoints(
    system: HelmholtzSystem, adjoint_sources: Sequence[np.ndarray], receiver_positions: np.ndarray
) -> List[Wavefield]:
    solution = np.conj(system.solve(_adjoint_rhs(system, adjoint_sources, receiver_positions)))
    return [system.to_wavefield(solution[:, k]) for k in range(solution.shape[1])]


def _unpad(grad_padded: np.ndarray, shape, width: int) -> np.ndarray:
    """Adjoint of edge padding: every padded cell adds into the physical cell it copies."""
    n_z, n_x = shape
    rows = np.clip(np.arange(grad_padded.shape[0]) - width, 0, n_z - 1)
    cols = np.clip(np.arange(grad_padded.shape[1]) - width, 0, n_x - 1)
    grad = np.zeros(shape)
    np.add.at(grad, (rows[:, None], cols[None, :]), grad_padded)
    return grad


def assemble_gradient(
    forward_fields: Sequence[Wavefield],
    adjoint_fields: Sequence[Wavefield],
    model: VelocityModel2D,
    omega: float,
    pml: Optional[PMLSpec] = None,
) -> np.ndarray:
    """dJ/dc = 2 omega^2 dx dz Re(conj(adjoint) s_x s_z u) / c^3, summed over sources."""
    if len(forward_fields) != len(adjoint_fields):
        raise MismatchedGeometry("Need one adjoint field per forward field")
    pml = (PMLSpec() if pml is None else pml).resolve(model)
    sx, _, sz, _ = stretch_factors(model, omega, pml)
    stretch = sz[:, None] * sx[None, :]
    c = np.pad(model.c, pml.width_cells, mode="edge")
    correlation = np.zeros(c.shape)
    for u, adjoint in zip(forward_fields, adjoint_fields):
        correlation += np.real(np.conj(adjoint.padded) * stretch * u.padded)
    grad_padded = 2 * omega**2 * model.dx * model.dz * correlation / c**3
    return _unpad(grad_padded, model.shape, pml.width_cells)


@dataclass
class ObjectiveEval:
    value: float
    gradient: Optional[np.ndarray]
    per_source: List[float] = field(default_factory=list)
    converged: bool = True


def evaluate_objective(
    model: VelocityModel2D,
    geometry: AcquisitionGeometry,
    observed: Sequence[FrequencyGather],
    freq_hz: float,
    misfit: Misfit,
    pml: Optional[PMLSpec] = None,
    with_gradient: bool = True,
) -> ObjectiveEval:
    """Misfit summed over sources at one frequency, with its gradient with respect to c."""
    observed = sorted(observed, key=lambda g: g.source_index)
    if [g.source_index for g in observed] != list(range(geometry.n_sources)):
        raise MismatchedGeometry("Observed data must hold exactly one gather per source at {} Hz".format(freq_hz))
    omega = 2 * np.pi * freq_hz
    system = assemble_system(model, omega, pml)
    fields = solve_point_sources(system, geometry.sources, geometry.source_amplitude(freq_hz))
    synthetic = [
        FrequencyGather(source_index=k, freq_hz=freq_hz, values=sample_receivers(system, u, geometry.receivers))
        for k, u in enumerate(fields)
    ]
    with ThreadPoolExecutor(max_workers=min(get_num_threads(), len(synthetic))) as pool:
        evals = list(pool.map(lambda pair: misfit_and_adjoint(pair[0], pair[1], misfit), zip(synthetic, observed)))

    per_source = [e.value for e in evals]
    gradient = None
    if with_gradient:
        adjoint = solve_adjoints(system, [e.adjoint_sources for e in evals], geometry.receivers)
        gradient = assemble_gradient(fields, adjoint, model, omega, system.pml)
    return ObjectiveEval(
        value=float(sum(per_source)),
        gradient=gradient,
        per_source=per_source,
        converged=all(e.converged for e in evals),
    )
