"""Exact two-excitation dynamics of a ladder atom in a photonic band gap reservoir."""

__version__ = "0.1.0"

from .discretize import (
    DiscretizedReservoir,
    build_quadratic_grid,
    build_recurrence_grid,
    build_uniform_grid,
    compute_shift,
)
from .dos import GeneralizedLorentzian, IsotropicBandEdge, density, in_gap, spectral_response
from .dynamics import AmplitudeState, LadderConfig, TimeSeries, initial_state, norm, propagate, rhs

__all__ = [
    "AmplitudeState",
    "DiscretizedReservoir",
    "GeneralizedLorentzian",
    "IsotropicBandEdge",
    "LadderConfig",
    "TimeSeries",
    "build_quadratic_grid",
    "build_recurrence_grid",
    "build_uniform_grid",
    "compute_shift",
    "density",
    "in_gap",
    "initial_state",
    "norm",
    "propagate",
    "rhs",
    "spectral_response",
]
