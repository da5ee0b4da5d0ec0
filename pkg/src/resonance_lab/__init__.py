"""Harmonic balance tools for forced responses and phase resonance nonlinear modes.

Public entry points
-------------------
load_model, build_duffing, build_two_dof
    Polynomial mechanical systems.
trace_nfrc
    Nonlinear frequency response curves by arclength continuation.
continue_prnm, ResonanceSpec
    Phase resonance nonlinear modes for ``k:nu`` resonances.
seed_isola, verify_point
    Time-integration oracle for seeding and verification.
"""
from .model import (SystemModel, PolynomialTerm, InvalidModelError, build_duffing,
                    build_two_dof, load_model, linear_modes, linear_natural_frequencies)
from .hbm import HarmonicGrid, HarmonicVector, harmonic_amplitude_phase, hbm_residual_forced
from .continuation import (ContinuationSettings, ContinuationError, NoConvergenceError,
                           EventSpec, Branch, BranchPoint, trace_nfrc, multistart_seed)
from .prnm import (ResonanceSpec, DegenerateSeedError, continue_prnm, init_from_nfrc_point,
                   retrieve_phase_lag, companion_solution, forcing_frame)
from .oracle import seed_isola, find_attractors, verify_point, rectangular_ic_grid
from .kernels import DEFAULT_BACKEND, available_backends

__version__ = "0.1.0"

__all__ = [
    "SystemModel", "PolynomialTerm", "InvalidModelError", "build_duffing", "build_two_dof",
    "load_model", "linear_modes", "linear_natural_frequencies",
    "HarmonicGrid", "HarmonicVector", "harmonic_amplitude_phase", "hbm_residual_forced",
    "ContinuationSettings", "ContinuationError", "NoConvergenceError", "EventSpec", "Branch",
    "BranchPoint", "trace_nfrc", "multistart_seed",
    "ResonanceSpec", "DegenerateSeedError", "continue_prnm", "init_from_nfrc_point",
    "retrieve_phase_lag", "companion_solution", "forcing_frame",
    "seed_isola", "find_attractors", "verify_point", "rectangular_ic_grid", "DEFAULT_BACKEND",
    "available_backends",
]
