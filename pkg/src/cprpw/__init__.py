"""Conjugate phase retrieval for finite vectors and bandlimited signals."""
from .finite import (
    CprMatrix,
    certify_cpr,
    cpr_distance,
    det2_criterion,
    det3_criterion,
    example_matrix,
    magnitude_measurements,
)
from .gs import GsConfig, build_pinv, gs_multistart, gs_solve, gs_step, project_magnitudes
from .pipeline import PipelineConfig, relative_error, run_algorithm1, run_algorithm2
from .signal import BandlimitedSignal, ShiftScheme, evaluate, sharp

__version__ = "0.1.0"
