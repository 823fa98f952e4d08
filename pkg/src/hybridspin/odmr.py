"""CW ODMR spectra with mixing-limited contrast."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .spin import FieldConfig, Manifold, SpinSpecies, _zero_branch, mixing_overlaps, transition_frequencies


@dataclass(frozen=True)
class OdmrLine:
    center: float
    linewidth_fwhm: float
    contrast: float

    def __post_init__(self):
        if not self.linewidth_fwhm > 0:
            raise ValueError("linewidth_fwhm must be positive")
        if not 0.0 <= self.contrast <= 1.0:
            raise ValueError("contrast must lie in [0, 1]")


@dataclass(frozen=True)
class OdmrSpectrum:
    frequency_grid: np.ndarray
    signal: np.ndarray


def branch_purity(species: SpinSpecies, field: FieldConfig, manifold: Manifold | str) -> float:
    """|0>_z weight of the ms = 0 branch in one manifold.

    Raises AmbiguousLabeling when two levels tie for that weight.
    """
    ov = mixing_overlaps(species, field, manifold)
    return float(ov[_zero_branch(ov), 0])


def product_purity_model(species: SpinSpecies, field: FieldConfig) -> float:
    return branch_purity(species, field, Manifold.GS) * branch_purity(species, field, Manifold.ES)


def contrast_factor(
    species: SpinSpecies,
    field: FieldConfig,
    base_contrast: float,
    model: Callable[[SpinSpecies, FieldConfig], float] = product_purity_model,
) -> float:
    """Contrast after spin mixing: ``base_contrast * P_gs * P_es``.

    ``P`` is the |0>_z purity of the ms = 0 branch in the ground and
    excited manifolds. This is a heuristic; pass ``model`` to swap in another
    attenuation rule with the same signature.
    """
    if not 0.0 < base_contrast <= 1.0:
        raise ValueError("base_contrast must lie in (0, 1]")
    return base_contrast * model(species, field)


def lorentzian(f: np.ndarray, center: float, fwhm: float) -> np.ndarray:
    """Unit-peak Lorentzian."""
    hw = 0.5 * fwhm
    return hw * hw / ((np.asarray(f, dtype=float) - center) ** 2 + hw * hw)


def synthesize_spectrum(lines: Sequence[OdmrLine], grid: Sequence[float]) -> OdmrSpectrum:
    f = np.asarray(grid, dtype=float)
    if np.any(np.diff(f) < 0):
        raise ValueError("frequency grid must be ascending")
    signal = np.ones_like(f)
    for line in lines:
        signal -= line.contrast * lorentzian(f, line.center, line.linewidth_fwhm)
    return OdmrSpectrum(f, signal)


def species_lines(
    species: SpinSpecies,
    field: FieldConfig,
    base_contrast: float,
    linewidth_fwhm: float,
) -> list[OdmrLine]:
    """Both ground-state transitions of one species as ODMR dips."""
    f_minus, f_plus = transition_frequencies(species, field, Manifold.GS)
    c = contrast_factor(species, field, base_contrast)
    return [OdmrLine(abs(f_minus), linewidth_fwhm, c), OdmrLine(abs(f_plus), linewidth_fwhm, c)]
