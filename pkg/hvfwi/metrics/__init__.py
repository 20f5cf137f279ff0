# Register misfits here.
from .misfits import HV, L2, W2, Misfit, MisfitEval
