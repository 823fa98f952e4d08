"""Fluctuating dipolar field of layered 2D spin ensembles.

A stack of infinite, uniform, unpolarized spin sheets at standoffs ``d_i``
with areal densities ``rho_i`` produces a mean-square transverse field at
the probe

    B_rms^2 = sum_i C^2 rho_i / d_i^4,   C^2 = mu0^2 hbar^2 gamma_e^2 / (12 pi)

and the probe-bath coupling is ``b / 2pi = gamma_e * B_rms``. Units: nm,
nm^-2, mT; couplings in kHz (cyclic).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

import numpy as np
from scipy.optimize import brentq

from .errors import NegativeDensity, NonMonotoneDepth, ParseError, ZeroShape

# CODATA 2018
MU0 = 1.25663706212e-6  # T m / A
HBAR = 1.054571817e-34  # J s
GAMMA_E = 1.76085963023e11  # rad / (s T)
GAMMA_E_MHZ_PER_MT = GAMMA_E / (2.0 * math.pi) * 1e-9


def dipolar_constant() -> float:
    """sqrt(mu0^2 hbar^2 gamma_e^2 / 12 pi) in mT nm^3 (about 3.80)."""
    c_si = math.sqrt(MU0**2 * HBAR**2 * GAMMA_E**2 / (12.0 * math.pi))  # T m^3
    return c_si * 1e3 * 1e27


@dataclass(frozen=True)
class LayeredProfile:
    depths: np.ndarray
    densities: np.ndarray

    def __post_init__(self):
        d = np.array(self.depths, dtype=float).reshape(-1)
        rho = np.array(self.densities, dtype=float).reshape(-1)
        if d.shape != rho.shape:
            raise ValueError("depths and densities must have the same length")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(rho))):
            raise ValueError("profile contains non-finite values")
        if np.any(d <= 0):
            raise ValueError("layer standoffs must be positive")
        if np.any(np.diff(d) <= 0):
            raise NonMonotoneDepth("layer depths must be strictly increasing")
        if np.any(rho < 0):
            raise NegativeDensity("areal densities must be non-negative")
        d.setflags(write=False)
        rho.setflags(write=False)
        object.__setattr__(self, "depths", d)
        object.__setattr__(self, "densities", rho)

    @classmethod
    def single(cls, depth: float, density: float) -> "LayeredProfile":
        return cls(np.array([depth]), np.array([density]))

    @property
    def total_density(self) -> float:
        return float(self.densities.sum())

    @property
    def layers(self) -> list[tuple[float, float]]:
        return list(zip(self.depths.tolist(), self.densities.tolist()))

    def scaled(self, k: float) -> "LayeredProfile":
        if k < 0:
            raise ValueError("scale factor must be non-negative")
        return LayeredProfile(self.depths, self.densities * k)

    def shifted(self, offset: float) -> "LayeredProfile":
        return LayeredProfile(self.depths + offset, self.densities)

    def normalized(self) -> "LayeredProfile":
        total = self.total_density
        if total <= 0:
            raise ZeroShape("cannot normalize a profile with zero total density")
        return self.scaled(1.0 / total)


class Source(str, Enum):
    FORWARD = "forward"
    INVERSE = "inverse"


@dataclass(frozen=True)
class CouplingEstimate:
    b: float  # kHz, b / 2pi
    b_sigma: float
    b_rms: float  # mT
    source: Source = Source.FORWARD
    gamma_e: float = field(default=GAMMA_E_MHZ_PER_MT)


def brms_squared(profile: LayeredProfile) -> float:
    """Mean-square field (mT^2) at the probe from all layers."""
    c = dipolar_constant()
    return float(np.sum(c * c * profile.densities / profile.depths**4))


def coupling_from_profile(profile: LayeredProfile, gamma_e: float = GAMMA_E_MHZ_PER_MT) -> CouplingEstimate:
    b_rms = math.sqrt(brms_squared(profile))
    return CouplingEstimate(b=gamma_e * b_rms * 1e3, b_sigma=0.0, b_rms=b_rms, source=Source.FORWARD, gamma_e=gamma_e)


def _unit_response(shape: LayeredProfile, nv_standoff: float) -> float:
    """B_rms^2 per unit total density for the shape shifted by the standoff."""
    if nv_standoff <= 0:
        raise ValueError("nv_standoff must be positive")
    c = dipolar_constant()
    d = shape.depths + nv_standoff
    return float(np.sum(c * c * shape.densities / d**4))


def estimate_density(
    b_measured: float,
    b_sigma: float,
    shape: LayeredProfile,
    nv_standoff: float,
    gamma_e: float = GAMMA_E_MHZ_PER_MT,
) -> tuple[float, float]:
    """Total areal density (nm^-2) and its 1-sigma error from a coupling.

    ``shape`` holds the relative layer weights (total 1); its depths are
    measured from the diamond surface and ``nv_standoff`` (the NV depth) is
    added to each. Error propagation is first order:
    ``rho_sigma / rho = 2 b_sigma / b``.
    """
    if not b_measured > 0:
        raise ValueError("b_measured must be positive")
    if abs(shape.total_density - 1.0) > 1e-9:
        raise ValueError(f"shape must be normalized to unit density, got {shape.total_density!r}")
    denom = _unit_response(shape, nv_standoff)
    if denom == 0:
        raise ZeroShape("shape produces no field at the probe")
    b_rms = b_measured * 1e-3 / gamma_e
    rho = b_rms**2 / denom
    return float(rho), float(rho * 2.0 * b_sigma / b_measured)


def calibrate_standoff(
    shape: LayeredProfile,
    rho_total: float,
    b_target: float,
    gamma_e: float = GAMMA_E_MHZ_PER_MT,
    bracket: tuple[float, float] = (1e-3, 1e3),
) -> float:
    """NV standoff (nm) at which ``rho_total`` spread as ``shape`` yields a
    coupling of ``b_target`` kHz."""

    def gap(standoff):
        prof = shape.scaled(rho_total).shifted(standoff)
        return coupling_from_profile(prof, gamma_e).b - b_target

    return float(brentq(gap, *bracket, xtol=1e-14, rtol=1e-15, maxiter=500))


def _parse_rows(lines: Iterable[str]) -> tuple[list[float], list[float]]:
    depths: list[float] = []
    dens: list[float] = []
    seen_header = False
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if not seen_header and not depths and parts[:2] == ["depth_nm", "density_nm2"]:
            seen_header = True
            continue
        if len(parts) != 2:
            raise ParseError(lineno, f"expected 2 comma-separated columns, got {len(parts)}")
        try:
            d, rho = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(lineno, f"non-numeric value in {line!r}") from None
        if not (math.isfinite(d) and math.isfinite(rho)):
            raise ParseError(lineno, "non-finite value")
        if d <= 0:
            raise ParseError(lineno, f"depth must be positive, got {d}")
        if rho < 0:
            raise NegativeDensity(f"line {lineno}: negative density {rho}")
        if depths and d <= depths[-1]:
            raise NonMonotoneDepth(f"line {lineno}: depth {d} does not exceed previous {depths[-1]}")
        depths.append(d)
        dens.append(rho)
    return depths, dens


def load_depth_profile(text: str) -> LayeredProfile:
    """Parse a depth profile: '#' comments, optional ``depth_nm,density_nm2``
    header, then rows of depth (nm) and areal density (nm^-2)."""
    depths, dens = _parse_rows(text.splitlines())
    if not depths:
        raise ParseError(0, "no data rows")
    return LayeredProfile(np.array(depths), np.array(dens))


def read_depth_profile(path: str | Path) -> LayeredProfile:
    return load_depth_profile(Path(path).read_text())
