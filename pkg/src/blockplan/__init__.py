"""Solver and planner toolkit for capacity-bounded neighbourhood games.

Locations with concave piecewise-linear utilities of their own load, a
continuum population choosing where to live, best-response dynamics to
Nash equilibria, welfare optimisation, and synthesis of minimal targeted
utility improvements with certified cost and equilibrium-welfare bounds.
"""

from ._kernels import BACKEND
from .model import Allocation, CityInstance, InvestmentPlan, Neighbourhood, PlanEntry
from .pwl import PwlFunction

__all__ = [
    "Allocation",
    "BACKEND",
    "CityInstance",
    "InvestmentPlan",
    "Neighbourhood",
    "PlanEntry",
    "PwlFunction",
]

__version__ = "0.1.0"
