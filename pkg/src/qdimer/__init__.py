"""Exact diagonalization of a quartic two-site oscillator dimer."""

from .errors import (
    BasisMismatchError,
    ConfigError,
    DiagonalizationError,
    DimensionError,
    NumericalError,
    QDimerError,
    SymmetryError,
    TrackingError,
    TruncationWarning,
)
from .fockspace import BasisSpec, ModelParams, OperatorMatrix, build_hamiltonian
from .spectral import EigenSystem, convergence_scan, diagonalize, solve
from .states import StateRecipe, StateVector, product_initial_state, spectrum

__version__ = "0.1.0"
