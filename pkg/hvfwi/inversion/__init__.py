# Register optimizers here.
from .adjoint import (
    ObjectiveEval,
    assemble_gradient,
    evaluate_objective,
    misfit_and_adjoint,
    solve_adjoint,
    solve_adjoints,
)
from .fwi import InversionConfig, InversionReport, fwi_invert, select_frequency
from .optim import OptimizationResult, ProjectedLBFGS
from .processing import add_noise, gaussian_smooth, measured_snr_db
