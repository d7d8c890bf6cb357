"""Numerical toolkit for Reeb dynamics on the tight 3-sphere, modeled as
Hamiltonian dynamics on star-shaped energy levels in R^4.

Subpackages cover the contact-geometric core (forms, Reeb field, frames),
flow integration with variational equations, periodic-orbit search,
Conley-Zehnder indices by two independent routes, linking and self-linking
numbers, spanning-disk analysis (characteristic foliations, return maps,
area forms), and the binding-condition checker built on top of all of it.
"""

__version__ = "0.1.0"

from .contact import StarForm, XiFrame, reeb_vector, xi_frame, xi_project
from .errors import ReebAtlasError
from .flow import FlowResult, integrate_flow, monodromy_xi
from .orbits import (OrbitDatabase, ReebOrbit, find_orbits, period_gaps,
                     refine_orbit)

__all__ = [
    "__version__",
    "StarForm",
    "XiFrame",
    "reeb_vector",
    "xi_frame",
    "xi_project",
    "ReebAtlasError",
    "FlowResult",
    "integrate_flow",
    "monodromy_xi",
    "ReebOrbit",
    "OrbitDatabase",
    "find_orbits",
    "refine_orbit",
    "period_gaps",
]
