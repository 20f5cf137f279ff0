# Register experiments here.
from .phantom import PhantomOutcome, phantom_experiment, phantom_geometry
from .scans import (
    ScanResult,
    count_spurious_extrema,
    count_strict_local_extrema,
    count_strict_local_maxima,
    count_strict_local_minima,
    ricker_pair,
    ricker_shift_scan,
    scan_constant_velocity,
)
from .scoring import QualityScore, score
