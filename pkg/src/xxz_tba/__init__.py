"""Finite-temperature XXZ chain at Delta = cos(pi/p0): TBA/NLIE solvers and
finite-Trotter Bethe-ansatz checks."""

from .errors import (BranchError, ConfigError, DegeneracyError, DomainError, IncompleteSearchError, PoleError,
                     SequenceValidationError, SolverError, TruncationError, XXZError)
from .excited import correlation_length, inverse_correlation_length, solve_excited
from .free_fermion import FreeFermionParams, ff_free_energy, ff_verify_identities, ff_xi2, ff_xi3
from .ground import ModelParams, free_energy, solve_finite_N_y1, solve_ground_nlie
from .numerics import Grid, KernelSet
from .qtm import BetheState, FusionEvaluator, TrotterParams, locate_zeros, solve_bae, t_eigenvalue
from .rational_ts import RationalP0, TSSequences, sequences_for, validate_sequences
from .report import CheckReport

__version__ = "0.1.0"

__all__ = [
    "BranchError",
    "ConfigError",
    "DegeneracyError",
    "DomainError",
    "IncompleteSearchError",
    "PoleError",
    "SequenceValidationError",
    "SolverError",
    "TruncationError",
    "XXZError",
    "correlation_length",
    "inverse_correlation_length",
    "solve_excited",
    "FreeFermionParams",
    "ff_free_energy",
    "ff_verify_identities",
    "ff_xi2",
    "ff_xi3",
    "ModelParams",
    "free_energy",
    "solve_finite_N_y1",
    "solve_ground_nlie",
    "Grid",
    "KernelSet",
    "BetheState",
    "FusionEvaluator",
    "TrotterParams",
    "locate_zeros",
    "solve_bae",
    "t_eigenvalue",
    "RationalP0",
    "TSSequences",
    "sequences_for",
    "validate_sequences",
    "CheckReport",
]
