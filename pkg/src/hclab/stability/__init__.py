"""Distances to Gamma, passage contraction and stability experiments."""

from .distance import TriangleIndex, distance_brute, distance_to_gamma, point_triangle_distance
from .experiment import (
    ContractionFit,
    Itinerary,
    PassageRecord,
    StabilityReport,
    TrialResult,
    contraction_experiment,
    extract_itinerary,
    mesh_floor,
    perturbed_start,
    run_trial,
    stability_experiment,
    transition_labels,
    trial_rng,
)

__all__ = [
    "ContractionFit",
    "Itinerary",
    "PassageRecord",
    "StabilityReport",
    "TriangleIndex",
    "TrialResult",
    "contraction_experiment",
    "distance_brute",
    "distance_to_gamma",
    "extract_itinerary",
    "mesh_floor",
    "perturbed_start",
    "point_triangle_distance",
    "run_trial",
    "stability_experiment",
    "transition_labels",
    "trial_rng",
]
