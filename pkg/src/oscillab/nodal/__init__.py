"""Quasimode windows and nodal measures of spherical-harmonic combinations."""

from .harmonics import SphericalCombo, normalized_legendre, random_combo, sph_eval
from .measure import NodalSample, icosphere, mixed_frequency_bound_check, nodal_measure
from .quasimodes import (
    LimitNodal,
    QuasimodeWindow,
    dominant_frequency,
    finite_radius_convergence,
    limit_nodal_measure,
    quasimode_window,
    radial_tail,
)

__all__ = [
    "LimitNodal",
    "QuasimodeWindow",
    "dominant_frequency",
    "finite_radius_convergence",
    "limit_nodal_measure",
    "quasimode_window",
    "radial_tail",
    "NodalSample",
    "SphericalCombo",
    "icosphere",
    "mixed_frequency_bound_check",
    "nodal_measure",
    "normalized_legendre",
    "random_combo",
    "sph_eval",
]
