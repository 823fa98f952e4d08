"""Spin-1 Hamiltonians for NV and boron-vacancy defects.

Everything here works in MHz and mT. The Hamiltonian of one manifold
(ground or excited state) is

    H = D Sz^2 + E (Sx^2 - Sy^2) + gamma_e (Bx Sx + By Sy + Bz Sz)

written in the defect frame (z along the symmetry axis) and expressed in the
ordered basis ``(|0>, |-1>, |+1>)``. Eigenstates are returned as rows of
amplitudes ``(alpha, beta, gamma)`` over that basis.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .eigen3 import eigh3
from .errors import AmbiguousLabeling, ConfigError

UNIT_TOL = 1e-12
LABEL_TOL = 1e-6
CONFIG_DIR_ENV = "HYBRIDSPIN_CONFIG_DIR"


class Manifold(str, Enum):
    GS = "GS"
    ES = "ES"


_S2 = 1.0 / np.sqrt(2.0)
# basis order (|0>, |-1>, |+1>)
SZ = np.diag([0.0, -1.0, 1.0]).astype(complex)
_SPLUS = np.zeros((3, 3), dtype=complex)
_SPLUS[0, 1] = np.sqrt(2.0)  # |-1> -> |0>
_SPLUS[2, 0] = np.sqrt(2.0)  # |0> -> |+1>
SX = 0.5 * (_SPLUS + _SPLUS.conj().T)
SY = -0.5j * (_SPLUS - _SPLUS.conj().T)


def _as_unit(v, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=float).reshape(3)
    if abs(np.linalg.norm(v) - 1.0) > UNIT_TOL:
        raise ValueError(f"{what} must have unit length, got norm {np.linalg.norm(v)!r}")
    return v


def defect_frame(axis) -> np.ndarray:
    """Rows are the defect-frame unit vectors (x, y, z) in lab coordinates.

    z is the symmetry axis; x is the lab x axis (lab y if the axis lies
    close to x) projected perpendicular to it.
    """
    z = np.asarray(axis, dtype=float)
    ref = np.array([1.0, 0.0, 0.0]) if abs(z[0]) < 0.9 else np.array([0.0, 1.0, 0.0])
    x = ref - (ref @ z) * z
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.vstack([x, y, z])


@dataclass(frozen=True)
class SpinSpecies:
    name: str
    d_gs: float
    d_es: float
    gamma_e: float
    axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    e_strain: float = 0.0

    def __post_init__(self):
        if not (self.d_gs > 0 and self.d_es > 0):
            raise ValueError("zero-field splittings must be positive")
        if self.e_strain < 0:
            raise ValueError("e_strain must be non-negative")
        if self.gamma_e <= 0:
            raise ValueError("gamma_e must be positive")
        axis = _as_unit(self.axis, "axis")
        axis.setflags(write=False)
        object.__setattr__(self, "axis", axis)

    def splitting(self, manifold: Manifold | str) -> float:
        return self.d_gs if Manifold(manifold) is Manifold.GS else self.d_es

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "d_gs_mhz": self.d_gs,
            "d_es_mhz": self.d_es,
            "e_strain_mhz": self.e_strain,
            "gamma_e_mhz_per_mt": self.gamma_e,
            "axis": [float(c) for c in self.axis],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SpinSpecies":
        try:
            axis = np.asarray(d["axis"], dtype=float)
            norm = np.linalg.norm(axis)
            if norm == 0:
                raise ValueError("axis must be nonzero")
            return cls(
                name=str(d["name"]),
                d_gs=float(d["d_gs_mhz"]),
                d_es=float(d["d_es_mhz"]),
                e_strain=float(d.get("e_strain_mhz", 0.0)),
                gamma_e=float(d["gamma_e_mhz_per_mt"]),
                axis=axis / norm,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid species config: {exc}") from exc


def load_species(name_or_path: str | os.PathLike) -> SpinSpecies:
    """Resolve a species config.

    Lookup order: an existing file path, then ``<name>.json`` in the
    directory named by ``$HYBRIDSPIN_CONFIG_DIR``, then the shipped defaults
    (``nv``, ``vb``).
    """
    path = Path(name_or_path)
    if path.is_file():
        text = path.read_text()
    else:
        env_dir = os.environ.get(CONFIG_DIR_ENV)
        candidate = Path(env_dir) / f"{name_or_path}.json" if env_dir else None
        if candidate is not None and candidate.is_file():
            text = candidate.read_text()
        else:
            res = resources.files("hybridspin") / "data" / "species" / f"{name_or_path}.json"
            if not res.is_file():
                raise ConfigError(f"unknown species {str(name_or_path)!r}")
            text = res.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"species config is not valid JSON: {exc}") from exc
    return SpinSpecies.from_dict(data)


@dataclass(frozen=True)
class FieldConfig:
    """Static field: magnitude in mT and a lab-frame unit direction."""

    magnitude: float
    direction: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))

    def __post_init__(self):
        if self.magnitude < 0:
            raise ValueError("field magnitude must be non-negative")
        d = _as_unit(self.direction, "direction")
        d.setflags(write=False)
        object.__setattr__(self, "direction", d)

    @classmethod
    def at_angle(cls, magnitude: float, angle_deg: float, axis) -> "FieldConfig":
        """Field tilted by ``angle_deg`` from ``axis`` towards the defect-frame x."""
        fx, _, fz = defect_frame(_as_unit(axis, "axis"))
        t = np.radians(angle_deg)
        d = np.cos(t) * fz + np.sin(t) * fx
        return cls(magnitude, d / np.linalg.norm(d))

    @property
    def vector(self) -> np.ndarray:
        return self.magnitude * self.direction


@dataclass(frozen=True)
class EigenDecomposition:
    energies: np.ndarray
    amplitudes: np.ndarray
    manifold: Manifold

    @property
    def overlaps(self) -> np.ndarray:
        """|amplitude|^2; row i = (|alpha|^2, |beta|^2, |gamma|^2) of state i."""
        return np.abs(self.amplitudes) ** 2

    def reconstruct(self) -> np.ndarray:
        v = self.amplitudes
        return v.T @ np.diag(self.energies) @ v.conj()


def build_hamiltonian(species: SpinSpecies, field: FieldConfig, manifold: Manifold | str = Manifold.GS) -> np.ndarray:
    d = species.splitting(manifold)
    local = defect_frame(species.axis) @ field.vector
    # projection rounding would otherwise leave ~1e-17 mT of transverse field
    local[np.abs(local) < 1e-14 * field.magnitude] = 0.0
    bx, by, bz = local
    g = species.gamma_e
    h = d * (SZ @ SZ) + species.e_strain * (SX @ SX - SY @ SY) + g * (bx * SX + by * SY + bz * SZ)
    return 0.5 * (h + h.conj().T)


def diagonalize(h: np.ndarray, manifold: Manifold | str = Manifold.GS) -> EigenDecomposition:
    energies, vecs = eigh3(h)
    return EigenDecomposition(energies, vecs, Manifold(manifold))


def eigensystem(species: SpinSpecies, field: FieldConfig, manifold: Manifold | str = Manifold.GS) -> EigenDecomposition:
    return diagonalize(build_hamiltonian(species, field, manifold), manifold)


def _zero_branch(ov: np.ndarray) -> int:
    alpha = ov[:, 0]
    order = np.argsort(alpha)[::-1]
    if alpha[order[0]] - alpha[order[1]] < LABEL_TOL:
        raise AmbiguousLabeling(
            f"two eigenstates share |0>_z weight {alpha[order[0]]:.6f}; labels undefined here"
        )
    return int(order[0])


def transition_frequencies(species: SpinSpecies, field: FieldConfig, manifold: Manifold | str = Manifold.GS) -> tuple[float, float]:
    """(f_minus, f_plus) in MHz, measured from the ms = 0 branch.

    The ms = 0 branch is the eigenstate of largest |0>_z weight. Of the other
    two, the one with the larger ``|beta|^2 - |gamma|^2`` is ms = -1 (lower
    energy on an exact tie). Values are signed energy differences, so
    ``f_minus`` turns negative past the ground-state level anti-crossing.
    """
    eig = eigensystem(species, field, manifold)
    ov = eig.overlaps
    zero = _zero_branch(ov)
    rest = [i for i in range(3) if i != zero]
    bias = [ov[i, 1] - ov[i, 2] for i in rest]
    if abs(bias[0] - bias[1]) < LABEL_TOL:
        minus, plus = rest
    elif bias[0] > bias[1]:
        minus, plus = rest
    else:
        plus, minus = rest
    e = eig.energies
    return float(e[minus] - e[zero]), float(e[plus] - e[zero])


def mixing_overlaps(species: SpinSpecies, field: FieldConfig, manifold: Manifold | str = Manifold.GS) -> np.ndarray:
    """3x3 array; row i holds (|alpha|^2, |beta|^2, |gamma|^2) of eigenstate i
    (ascending energy)."""
    return eigensystem(species, field, manifold).overlaps


def zero_state_purity(species: SpinSpecies, field: FieldConfig, manifold: Manifold | str = Manifold.GS) -> float:
    """Largest |0>_z weight over the three eigenstates."""
    return float(mixing_overlaps(species, field, manifold)[:, 0].max())


@dataclass(frozen=True)
class MixingTable:
    b_mt: np.ndarray
    overlaps: np.ndarray  # (n, 3, 3)
    angle_deg: float
    manifold: Manifold

    @property
    def alpha2(self) -> np.ndarray:
        """|alpha|^2 of each level, shape (n, 3)."""
        return self.overlaps[:, :, 0]

    def first_field_below(self, threshold: float) -> float | None:
        """Smallest grid field at which the ms = 0 branch purity drops below
        ``threshold``; ``None`` if it never does."""
        purity = self.alpha2.max(axis=1)
        idx = np.flatnonzero(purity < threshold)
        return float(self.b_mt[idx[0]]) if idx.size else None


def mixing_scan(species: SpinSpecies, angle_deg: float, b_grid: Sequence[float], manifold: Manifold | str = Manifold.GS) -> MixingTable:
    b = np.asarray(b_grid, dtype=float)
    if b.ndim != 1 or b.size == 0:
        raise ValueError("b_grid must be a nonempty 1-D sequence")
    if np.any(np.diff(b) < 0):
        raise ValueError("b_grid must be ascending")
    rows = [mixing_overlaps(species, FieldConfig.at_angle(bi, angle_deg, species.axis), manifold) for bi in b]
    return MixingTable(b, np.array(rows), float(angle_deg), Manifold(manifold))
