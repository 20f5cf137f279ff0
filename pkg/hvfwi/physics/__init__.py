# Register models and acquisition geometries here.
from .acquisition import (
    constant_model,
    gaussian_inclusion_model,
    layered_model,
    line_geometry,
    linear_gradient_model,
    ricker_wavelet,
    ring_geometry,
)
from .helmholtz import (
    AcquisitionGeometry,
    FrequencyGather,
    HelmholtzSystem,
    PMLSpec,
    VelocityModel2D,
    Wavefield,
    assemble_system,
    forward_data,
    ricker_spectrum,
    sample_receivers,
    solve_point_source,
    solve_point_sources,
)
