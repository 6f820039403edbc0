"""Geodesic particle dynamics with jet-augmented landmarks.

Particles on R^d carry, besides a position, an optional local jet: a
linear frame (order 1) and a symmetric second-derivative tensor (order 2).
Their canonical dynamics under a reproducing-kernel energy produce
velocity fields spanned by a gaussian kernel and its derivatives, so the
particles translate, rotate, scale and bend the space around them. The
package integrates those dynamics, verifies the conserved internal and
translational momenta along trajectories, and solves shooting-based
registration between particle configurations.

Submodules: kernels, jet_algebra, phase, dynamics, conservation,
matching, cli, backend.
"""

from . import conservation, matching
from .backend import ACTIVE_BACKEND
from .conservation import InvariantEntry, InvariantReport, audit, noether_gl, noether_s12
from .dynamics import (
    HamiltonianGradient,
    Trajectory,
    flow_points,
    grad_hamiltonian,
    hamiltonian,
    integrate,
    velocity_jet,
    velocity_jet_batch,
)
from .errors import (
    ConfigError,
    DivergenceError,
    InvalidInputError,
    JetflowError,
    SingularJetError,
    UnsupportedOrderError,
)
from .jet_algebra import (
    Jet1Element,
    Jet2Element,
    act_left,
    act_right,
    compose,
    invert,
    jet_of_flow,
    sym_lower,
)
from .kernels import Kernel
from .matching import RegistrationProblem, RegistrationResult, fd_gradient, objective
from .phase import (
    ParticleState,
    SpatialMomenta,
    SystemState,
    act_right_state,
    pairing,
    spatial_momenta,
)

__version__ = "0.1.0"

solve_registration = matching.solve

__all__ = [
    "ACTIVE_BACKEND",
    "ConfigError",
    "DivergenceError",
    "HamiltonianGradient",
    "InvalidInputError",
    "InvariantEntry",
    "InvariantReport",
    "Jet1Element",
    "Jet2Element",
    "JetflowError",
    "Kernel",
    "ParticleState",
    "RegistrationProblem",
    "RegistrationResult",
    "SingularJetError",
    "SpatialMomenta",
    "SystemState",
    "Trajectory",
    "UnsupportedOrderError",
    "act_left",
    "act_right",
    "act_right_state",
    "audit",
    "compose",
    "fd_gradient",
    "flow_points",
    "grad_hamiltonian",
    "hamiltonian",
    "integrate",
    "invert",
    "jet_of_flow",
    "noether_gl",
    "noether_s12",
    "objective",
    "pairing",
    "solve_registration",
    "spatial_momenta",
    "sym_lower",
    "velocity_jet",
    "velocity_jet_batch",
    "__version__",
]
