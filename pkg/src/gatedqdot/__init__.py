"""Spectral simulation and controllability certification for a gated 2-D quantum device."""

__version__ = "0.1.0"

from .chains import (
    ChainCertificate,
    CouplingGraph,
    build_graph,
    certify,
    certify_nonresonant_chain,
    check_connected,
    coupling_path,
    spanning_chain,
)
from .config import ConfigValidationError, RunConfig, load_config, validate_config
from .coupling import (
    CouplingMatrix,
    QuadratureConfig,
    assemble_coupling_matrix,
    coupling_quadrature,
    coupling_x1_closed,
    coupling_x2_closed,
    eigenvalue_slope,
)
from .dynamics import (
    ControlSignal,
    NonlinearConfig,
    WaveState,
    alpha_scaling_study,
    galerkin_mode_state,
    grid_mode_state,
    propagate_bilinear,
    propagate_nonlinear,
    synthesize_chain_transfer,
    transfer_fidelity,
)
from .errors import (
    DegenerateEigenvalueError,
    DurationCapError,
    InstabilityError,
    NumericalError,
    QuadraturePrecisionError,
    SolverFailureError,
)
from .poisson import (
    GateProfile,
    GateSegment,
    GridField,
    SpectralField,
    StaggeredGrid,
    gate_convergence_sweep,
    solve_full_gate,
    solve_full_gate_mode,
    solve_full_gate_series,
    solve_hartree,
    solve_partial_gate_fd,
)
from .spectral import (
    BoundaryDisplacement,
    EigenPair,
    ModeIndex,
    ShiftedSpectrum,
    Spectrum,
    check_simplicity,
    check_weak_nonresonance,
    enumerate_modes,
    eigenvalue_shape_derivative,
    shifted_spectrum,
)

__all__ = [name for name in dir() if not name.startswith("_")]
