"""Trotter digitization in dynamical-invariant bases, with Fubini-Study error bounds."""
from .counterdiabatic import CDSystem, adiabatic_state, build_cd
from .errorbounds import (
    ErrorReport,
    dominant_error_A,
    dominant_error_B,
    infidelity_bound,
    overlap_bound,
    step_angles,
)
from .evolution import ReferencePropagator, Trajectory, digitized_evolve, exact_propagate, trotter_step
from .experiments import ScalingResult, SweepConfig, compare_splits, fit_slope, run_sweep
from .invariant import (
    InvariantFrame,
    LRPhaseTable,
    lr_phase,
    lr_state,
    smooth_gauge,
    split_diag_offdiag,
    von_neumann_residual,
)
from .kernels import BACKEND
from .linalg import fubini_study_angle, herm_eig, unitary_exp
from .schedules import HamiltonianSchedule, SplitSchedule, landau_zener, rotating_spin, split_by_terms, tfim_chain

__version__ = "0.1.0"
