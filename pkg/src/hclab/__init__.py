"""Numerical laboratory for heteroclinic surfaces of generalized
Lotka-Volterra systems x_i' = x_i (sigma_i - sum_j rho_ij x_j)."""

__version__ = "0.1.0"

from .conditions import ConditionReport, canonical_p5, check_all, sample_params
from .errors import (
    ChannelViolationError,
    DegenerateSaddleError,
    DivergenceError,
    HclabError,
    IntegratorFailure,
    InvalidInputError,
    InvalidMeshError,
    MeshConsistencyError,
    NumericalError,
    PassageFailure,
    PreconditionError,
    TraceFailure,
    UnsupportedCycleError,
)
from .integrator import (
    EventKind,
    IntegrationOptions,
    LogFlow,
    SaddleNeighborhood,
    Trajectory,
    integrate,
    neighborhoods,
    passage_map,
)
from .io import load_params, save_params
from .model import SystemParams, eigenvalues_at, jacobian, spectrum_at, vector_field
from .manifold import GammaMesh, build_gamma, classify_combinatorial, classify_topology, trace_fan
from .stability import (
    contraction_experiment,
    distance_to_gamma,
    extract_itinerary,
    stability_experiment,
)
