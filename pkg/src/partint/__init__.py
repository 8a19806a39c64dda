"""Numerical verification of particular integrals for symplectic, cosymplectic,
contact and cocontact Hamiltonian systems, with slice reduction and a
scenario-driven command line."""

from .expr import Expression, parse
from .geometry import Formalism, HamiltonianSystem, Kind
from .analysis import CandidateIntegral, SamplePlan, candidate
from .dynamics import IntegratorConfig, Trajectory, integrate

__version__ = "0.1.0"

__all__ = [
    "Expression", "parse", "Formalism", "HamiltonianSystem", "Kind", "CandidateIntegral",
    "SamplePlan", "candidate", "IntegratorConfig", "Trajectory", "integrate",
]
