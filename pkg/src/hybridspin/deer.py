"""Monte Carlo DEER / Hahn-echo signals of an NV probe under a 2D spin bath.

Model
-----
Bath spins are static during one echo. Spin j couples to the probe with a
secular term ``a_j = kappa (1 - 3 cos^2 theta_j) / r_j^3`` (kHz, cyclic),
theta_j measured from the common quantization axis. Across the Hahn echo a
static coupling is refocused; a bath spin flipped together with the probe's
pi pulse instead accumulates ``a_j s_j tau`` in each half with the same sign,
i.e. ``a_j s_j T`` over the total free evolution ``T = 2 tau``. One Monte
Carlo sample draws every spin state ``s_j = +-1`` (P(+1) = (1 + p) / 2) and
flip outcome (probability eta), and the signal is

    C(T) = < cos(2 pi T sum_flipped a_j s_j) > * exp(-(T / T2)^n).

``tau_grid`` values and every time in this module are the total free
evolution T in microseconds.

The amplitude ``kappa`` is normalized so the bath's mean-square coupling
equals ``(gamma_e B_rms)^2`` of :func:`hybridspin.dipolar.brms_squared`;
:func:`coupling_prefactor` documents the conversion from the bare point
dipole value.

Random numbers
--------------
Philox4x64-10 (``numpy.random.Philox``) keyed by
``numpy.random.SeedSequence([seed, stream, layer, block])``; only
``Generator.random`` doubles are consumed and transformed by hand so the
streams do not depend on numpy's distribution algorithms. Bath positions
are laid out by a radial Poisson process (cumulative exponential areas), so
the spins inside a smaller cutoff are exactly the prefix of those inside a
larger one. Spin-state draws are grouped in fixed blocks of samples, each
with its own key; blocks are reduced in order, which makes results
bit-identical for any worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from typing import Sequence

import numpy as np

from . import dipolar
from .dipolar import LayeredProfile
from .errors import GridMismatch, NoDecay

RNG_ALGORITHM = "Philox4x64-10/SeedSequence"
BLOCK = 256
_CHUNK = 4096
_STREAM_POSITIONS = 1
_STREAM_STATES = 2
CUTOFF_FACTOR = 20.0
HAHN_FLOOR = 1e-12


class PulseSequence(str, Enum):
    DEER = "DEER"
    HAHN = "HAHN"


def _rng(*key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def bare_dipolar_prefactor() -> float:
    """mu0 gamma_e^2 hbar / 4 pi as a cyclic frequency, kHz nm^3 (about 52 040)."""
    g = dipolar.GAMMA_E
    si = dipolar.MU0 / (4.0 * math.pi) * g * g * dipolar.HBAR / (2.0 * math.pi)  # Hz m^3
    return si * 1e27 * 1e-3


def geometry_factor(tilt_deg: float) -> float:
    """(d^4 / pi) * integral over a sheet of (1 - 3 cos^2 theta)^2 / r^6.

    ``tilt_deg`` is the angle between the quantization axis and the sheet
    normal: 3/4 along the normal, 3/8 at the magic angle, 9/32 in-plane.
    """
    c2 = math.cos(math.radians(tilt_deg)) ** 2
    return (9.0 + 6.0 * c2 + 9.0 * c2 * c2) / 32.0


def coupling_prefactor(tilt_deg: float = 0.0, gamma_e: float = dipolar.GAMMA_E_MHZ_PER_MT) -> float:
    """Coupling amplitude kappa (kHz nm^3) matched to the sheet formula.

    Chosen so that ``rho * kappa^2 * pi * geometry_factor / d^4`` equals
    ``(gamma_e * C)^2 rho / d^4``. For a normal quantization axis this is
    4/3 of :func:`bare_dipolar_prefactor`.
    """
    gc = gamma_e * dipolar.dipolar_constant() * 1e3
    return gc / math.sqrt(math.pi * geometry_factor(tilt_deg))


@dataclass(frozen=True)
class BathSpec:
    profile: LayeredProfile
    polarization: float = 0.0
    drive_efficiency: float = 1.0
    nv_standoff: float = 0.0
    lateral_cutoff: float | None = None
    tilt_deg: float = 0.0

    def __post_init__(self):
        if abs(self.polarization) > 1:
            raise ValueError("|polarization| must not exceed 1")
        if not 0.0 <= self.drive_efficiency <= 1.0:
            raise ValueError("drive_efficiency must lie in [0, 1]")
        if self.nv_standoff < 0:
            raise ValueError("nv_standoff must be non-negative")
        need = CUTOFF_FACTOR * self.max_height
        if self.lateral_cutoff is None:
            object.__setattr__(self, "lateral_cutoff", need)
        elif self.lateral_cutoff < need * (1 - 1e-12):
            raise ValueError(f"lateral_cutoff {self.lateral_cutoff} nm is below {CUTOFF_FACTOR:g} x max standoff ({need:g} nm)")

    @property
    def heights(self) -> np.ndarray:
        return self.profile.depths + self.nv_standoff

    @property
    def max_height(self) -> float:
        return float(self.heights.max())


@dataclass(frozen=True)
class DeerConfig:
    tau_grid: np.ndarray
    t2: float
    stretch_n: float = 1.0
    n_samples: int = 1000
    seed: int = 0
    sequence: PulseSequence = PulseSequence.DEER

    def __post_init__(self):
        t = np.array(self.tau_grid, dtype=float).reshape(-1)
        if t.size == 0 or np.any(t < 0) or np.any(np.diff(t) < 0):
            raise ValueError("tau_grid must be nonempty, nonnegative and ascending")
        t.setflags(write=False)
        object.__setattr__(self, "tau_grid", t)
        object.__setattr__(self, "sequence", PulseSequence(self.sequence))
        if not self.t2 > 0:
            raise ValueError("t2 must be positive")
        if not 1.0 <= self.stretch_n <= 3.0:
            raise ValueError("stretch_n must lie in [1, 3]")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        if self.seed < 0:
            raise ValueError("seed must be a non-negative integer")


@dataclass(frozen=True)
class DeerSignal:
    tau_grid: np.ndarray
    coherence: np.ndarray
    stderr: np.ndarray
    quadrature: np.ndarray | None = None
    valid: np.ndarray | None = None


@dataclass(frozen=True)
class Bath:
    positions: np.ndarray  # (N, 3) nm, probe at the origin
    couplings: np.ndarray  # (N,) kHz
    layer: np.ndarray  # (N,) layer index

    def __len__(self) -> int:
        return self.couplings.size


def _radial_layer(rho: float, radius: float, height: float, rng: np.random.Generator) -> np.ndarray:
    """Poisson points of density ``rho`` on a disk, in order of radius."""
    if rho <= 0:
        return np.empty((0, 3))
    area_max = math.pi * radius * radius
    areas: list[np.ndarray] = []
    angles: list[np.ndarray] = []
    # uniforms are consumed pairwise in stream order, so the chunk size
    # does not change the points drawn
    mean = rho * area_max
    chunk = min(_CHUNK, int(mean + 6.0 * math.sqrt(mean)) + 16)
    last = 0.0
    while True:
        u = rng.random((chunk, 2))
        cum = last + np.cumsum(-np.log1p(-u[:, 0]) / rho)
        keep = cum <= area_max
        areas.append(cum[keep])
        angles.append(2.0 * math.pi * u[keep, 1])
        if not keep[-1]:
            break
        last = float(cum[-1])
    a = np.concatenate(areas)
    phi = np.concatenate(angles)
    s = np.sqrt(a / math.pi)
    return np.column_stack([s * np.cos(phi), s * np.sin(phi), np.full(s.size, height)])


def secular_couplings(positions: np.ndarray, tilt_deg: float = 0.0) -> np.ndarray:
    """kappa (1 - 3 cos^2 theta) / r^3 in kHz for positions in nm."""
    t = math.radians(tilt_deg)
    axis = np.array([math.sin(t), 0.0, math.cos(t)])
    r = np.linalg.norm(positions, axis=1)
    cos = positions @ axis / r
    return coupling_prefactor(tilt_deg) * (1.0 - 3.0 * cos * cos) / r**3


def sample_bath(spec: BathSpec, seed: int) -> Bath:
    pos, lay = [], []
    for i, (rho, h) in enumerate(zip(spec.profile.densities, spec.heights)):
        p = _radial_layer(float(rho), float(spec.lateral_cutoff), float(h), _rng(seed, _STREAM_POSITIONS, i))
        pos.append(p)
        lay.append(np.full(len(p), i, dtype=int))
    positions = np.concatenate(pos) if pos else np.empty((0, 3))
    layer = np.concatenate(lay) if lay else np.empty(0, dtype=int)
    couplings = secular_couplings(positions, spec.tilt_deg) if len(positions) else np.empty(0)
    return Bath(positions, couplings, layer)


def hahn_envelope(t: np.ndarray, t2: float, stretch_n: float = 1.0) -> np.ndarray:
    return np.exp(-((np.asarray(t, dtype=float) / t2) ** stretch_n))


def _block_sums(bath: Bath, n_layers: int, p: float, eta: float, seed: int, block: int, size: int, t: np.ndarray):
    field = np.zeros(size)
    for i in range(n_layers):
        a = bath.couplings[bath.layer == i]
        if a.size == 0:
            continue
        # spin-major layout: row j holds spin j's draws for this block
        u = _rng(seed, _STREAM_STATES, i, block).random((a.size, 2, size))
        s = np.where(u[:, 0, :] < 0.5 * (1.0 + p), 1.0, -1.0)
        flipped = u[:, 1, :] < eta
        field += a @ (s * flipped)
    phase = (2.0 * math.pi * 1e-3) * np.outer(field, t)
    c = np.cos(phase)
    return c.sum(axis=0), (c * c).sum(axis=0), np.sin(phase).sum(axis=0)


def deer_signal(spec: BathSpec, config: DeerConfig, *, workers: int = 1, bath: Bath | None = None) -> DeerSignal:
    t = config.tau_grid
    env = hahn_envelope(t, config.t2, config.stretch_n)
    eta = 0.0 if config.sequence is PulseSequence.HAHN else spec.drive_efficiency
    if bath is None:
        bath = sample_bath(spec, config.seed)
    if eta == 0.0 or len(bath) == 0:
        return DeerSignal(t.copy(), env, np.zeros_like(t), np.zeros_like(t))

    n = config.n_samples
    sizes = [min(BLOCK, n - k * BLOCK) for k in range(math.ceil(n / BLOCK))]
    n_layers = len(spec.profile.depths)

    def run(k):
        return _block_sums(bath, n_layers, spec.polarization, eta, config.seed, k, sizes[k], t)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]

    sum_c = np.zeros_like(t)
    sum_c2 = np.zeros_like(t)
    sum_s = np.zeros_like(t)
    for c, c2, s in parts:
        sum_c += c
        sum_c2 += c2
        sum_s += s
    mean = sum_c / n
    if n > 1:
        var = np.maximum(sum_c2 - n * mean * mean, 0.0) / (n - 1)
        err = np.sqrt(var / n)
    else:
        err = np.zeros_like(t)
    return DeerSignal(t.copy(), mean * env, err * env, (sum_s / n) * env)


def hahn_signal(spec: BathSpec, config: DeerConfig) -> DeerSignal:
    return deer_signal(spec, replace(config, sequence=PulseSequence.HAHN))


def deer_decay_rate(signal: DeerSignal) -> float:
    """Inverse of the first time the coherence falls to 1/e (1/us)."""
    t = signal.tau_grid
    c = signal.coherence
    ok = np.ones(t.size, dtype=bool) if signal.valid is None else np.asarray(signal.valid, dtype=bool)
    t, c = t[ok], c[ok]
    target = math.exp(-1.0)
    below = np.flatnonzero(c <= target)
    if below.size == 0:
        raise NoDecay("signal never falls to 1/e on this grid")
    i = int(below[0])
    if i == 0:
        t_e = t[0]
    else:
        t0, t1, c0, c1 = t[i - 1], t[i], c[i - 1], c[i]
        t_e = t0 + (c0 - target) * (t1 - t0) / (c0 - c1)
    if t_e <= 0:
        raise NoDecay("signal starts below 1/e")
    return float(1.0 / t_e)


def subtract_reference(deer: DeerSignal, hahn: DeerSignal) -> DeerSignal:
    """Divide out the Hahn-echo decay; points with an unresolved reference
    (hahn below 10 standard errors) are flagged invalid and set to NaN."""
    if deer.tau_grid.shape != hahn.tau_grid.shape or not np.array_equal(deer.tau_grid, hahn.tau_grid):
        raise GridMismatch("DEER and Hahn signals use different tau grids")
    h = hahn.coherence
    valid = (h > 10.0 * hahn.stderr) & (h > HAHN_FLOOR)
    if deer.valid is not None:
        valid &= np.asarray(deer.valid, dtype=bool)
    hs = np.where(valid, h, 1.0)
    ratio = np.where(valid, deer.coherence / hs, np.nan)
    err = np.where(valid, np.hypot(deer.stderr / hs, deer.coherence * hahn.stderr / hs**2), np.nan)
    quad = None
    if deer.quadrature is not None:
        quad = np.where(valid, deer.quadrature / hs, np.nan)
    return DeerSignal(deer.tau_grid.copy(), ratio, err, quad, valid)


def oscillation_frequency(signal: DeerSignal, min_amplitude: float = 0.05, n_sigma: float = 5.0) -> float:
    """Precession frequency (MHz) of the complex coherence about the bath's
    static field, from the phase slope over the resolved early-time window.

    Returns 0 when fewer than two points are resolved.
    """
    if signal.quadrature is None:
        raise ValueError("signal carries no quadrature component")
    z = signal.coherence + 1j * signal.quadrature
    amp = np.abs(z)
    ok = (amp > min_amplitude) & (amp > n_sigma * signal.stderr) & np.isfinite(amp)
    if signal.valid is not None:
        ok &= np.asarray(signal.valid, dtype=bool)
    # keep the contiguous window starting at the first point
    stop = np.flatnonzero(~ok)
    n = int(stop[0]) if stop.size else ok.size
    if n < 2:
        return 0.0
    t = signal.tau_grid[:n]
    phase = np.unwrap(np.angle(z[:n]))
    phase -= phase[0] if t[0] == 0 else 0.0
    slope = float(t @ phase / (t @ t))
    return abs(slope) / (2.0 * math.pi)


class SweepAxis(str, Enum):
    DEPTH = "depth"
    POLARIZATION = "polarization"
    T2 = "t2"


@dataclass(frozen=True)
class SweepRow:
    value: float
    seed: int
    signal: DeerSignal
    reference: DeerSignal
    rate: float  # from the reference-subtracted signal; NaN if no decay


def _apply(axis: SweepAxis, value: float, spec: BathSpec, config: DeerConfig, seed: int):
    if axis is SweepAxis.DEPTH:
        cutoff = spec.lateral_cutoff
        need = CUTOFF_FACTOR * (float(spec.profile.depths.max()) + value)
        spec = replace(spec, nv_standoff=value, lateral_cutoff=max(cutoff, need))
    elif axis is SweepAxis.POLARIZATION:
        spec = replace(spec, polarization=value)
    else:
        config = replace(config, t2=value)
    return spec, replace(config, seed=seed)


def sweep(axis: SweepAxis | str, values: Sequence[float], spec: BathSpec, config: DeerConfig, *, workers: int = 1) -> list[SweepRow]:
    """Independent runs over one parameter; run ``i`` uses seed ``seed ^ i``."""
    axis = SweepAxis(axis)
    values = list(values)
    if not values:
        raise ValueError("sweep needs at least one value")
    rows = []
    for i, v in enumerate(values):
        s, c = _apply(axis, float(v), spec, config, config.seed ^ i)
        sig = deer_signal(s, c, workers=workers)
        ref = hahn_signal(s, c)
        try:
            rate = deer_decay_rate(subtract_reference(sig, ref))
        except NoDecay:
            rate = float("nan")
        rows.append(SweepRow(float(v), c.seed, sig, ref, rate))
    return rows
