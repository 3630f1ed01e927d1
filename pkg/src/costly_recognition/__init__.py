"""Equilibria of bargaining games where agents compete for the proposer role."""

from .model import (
    AgentSpec,
    Equilibrium,
    GameSpec,
    Kinked,
    Linear,
    ObjectiveSpec,
    Power,
)
from .solver import SolverConfig, solve, verify_equilibrium

__all__ = [
    "AgentSpec",
    "Equilibrium",
    "GameSpec",
    "Kinked",
    "Linear",
    "ObjectiveSpec",
    "Power",
    "SolverConfig",
    "solve",
    "verify_equilibrium",
]
