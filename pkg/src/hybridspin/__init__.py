"""Hybrid NV / boron-vacancy spin toolkit.

Spin eigenstructure and mixing, ODMR synthesis, cross-relaxation T1
fitting, layered dipolar density estimation and DEER Monte Carlo.
"""

__version__ = "0.1.0"

from .dipolar import (  # noqa: E402
    LayeredProfile,
    brms_squared,
    coupling_from_profile,
    dipolar_constant,
    estimate_density,
    load_depth_profile,
)
from .relaxometry import RelaxModel, RelaxometryPoint, fit_relaxometry, linear_regression, relaxation_rate  # noqa: E402
from .spin import FieldConfig, Manifold, SpinSpecies, load_species, mixing_overlaps, mixing_scan, transition_frequencies  # noqa: E402

__all__ = [
    "FieldConfig",
    "LayeredProfile",
    "Manifold",
    "RelaxModel",
    "RelaxometryPoint",
    "SpinSpecies",
    "brms_squared",
    "coupling_from_profile",
    "dipolar_constant",
    "estimate_density",
    "fit_relaxometry",
    "linear_regression",
    "load_depth_profile",
    "load_species",
    "mixing_overlaps",
    "mixing_scan",
    "relaxation_rate",
    "transition_frequencies",
]
