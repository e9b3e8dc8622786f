"""Deformed-band projectors and interband transition bounds for 1D Bloch
electrons in slowly time-dependent homogeneous electric fields.

The package builds, order by order, projectors onto field-dressed (deformed)
bands that are almost invariant under the driven dynamics, propagates the
rescaled Schrodinger equation with a unitary integrator, and verifies the
structural identities and scaling laws of the construction by direct
computation and fitted exponents.
"""

from .linalg import (
    Contour,
    SpectralWindow,
    contour_nodes,
    enclosing_contour,
    inv_sqrt_spd,
    operator_norm,
    resolvent,
    riesz_projector,
)
from .model import (
    ConstantDrive,
    CosineDrive,
    FiberFamily,
    PeriodicPotential,
    PlaneWaveTruncation,
    SmoothRampDrive,
    TabulatedDrive,
    band_interval,
    band_table,
    drive_primitive,
    driven_fiber_family,
    fiber_hamiltonian,
    gap_certificate,
    uniform_k_grid,
)
from .expansion import (
    AdiabaticExpansion,
    SGrid,
    build_expansion,
    differentiate_grid,
    recurrence_residuals,
    truncated_sum,
    truncation_defects,
)
from .projector import (
    DeformedBandProjector,
    deformed_projector,
    invariance_defect,
)
from .propagate import PropagationResult, evolve, unitarity_defect
from .transitions import (
    GrowthReport,
    ScalingFit,
    TransitionReport,
    duhamel_bound,
    gamma_lab_frame,
    gamma_profile,
    interband_amplitude,
    loglog_fit,
    polynomial_fit,
    resolvent_derivative_growth,
    scaling_sweep,
)
from .config import RunConfig, load_config

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
