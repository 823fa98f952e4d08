import math

import numpy as np
import pytest

from hybridspin.deer import (
    BLOCK,
    BathSpec,
    DeerConfig,
    DeerSignal,
    PulseSequence,
    bare_dipolar_prefactor,
    coupling_prefactor,
    deer_decay_rate,
    deer_signal,
    geometry_factor,
    hahn_envelope,
    hahn_signal,
    oscillation_frequency,
    sample_bath,
    secular_couplings,
    subtract_reference,
    sweep,
)
from hybridspin.dipolar import GAMMA_E_MHZ_PER_MT, LayeredProfile, brms_squared
from hybridspin.errors import GridMismatch, NoDecay

from oracles import sheet_mean_square

SHEET = LayeredProfile.single(0.34, 0.01)


def _spec(**kw):
    kw.setdefault("nv_standoff", 10.0)
    return BathSpec(kw.pop("profile", SHEET), **kw)


def _config(**kw):
    kw.setdefault("tau_grid", np.linspace(0, 10, 51))
    kw.setdefault("t2", 2.6)
    kw.setdefault("n_samples", 512)
    return DeerConfig(**kw)


def test_prefactors():
    assert bare_dipolar_prefactor() == pytest.approx(52040, rel=1e-3)
    assert coupling_prefactor(0.0) == pytest.approx(4 / 3 * bare_dipolar_prefactor(), rel=1e-3)
    assert geometry_factor(0.0) == pytest.approx(3 / 4)
    assert geometry_factor(90.0) == pytest.approx(9 / 32)
    assert geometry_factor(math.degrees(math.acos(1 / math.sqrt(3)))) == pytest.approx(3 / 8)


@pytest.mark.parametrize("tilt", [0.0, 30.0, 54.7356, 90.0])
def test_sheet_normalization_matches_layer_formula(tilt):
    # rho * integral of a^2 over an effectively infinite tilted-axis sheet
    h, rho = 7.0, 0.02
    # an even azimuth grid averages the low-order trig polynomial in phi exactly
    s = np.linspace(0.0, 60 * h, 60001)[1:]
    phi = np.linspace(0, 2 * math.pi, 16, endpoint=False)
    pos = np.stack(np.broadcast_arrays(s[:, None] * np.cos(phi), s[:, None] * np.sin(phi), h), axis=-1).reshape(-1, 3)
    a2 = secular_couplings(pos, tilt) ** 2
    integral = float(np.sum(a2.reshape(s.size, -1).mean(axis=1) * 2 * math.pi * s * (s[1] - s[0])))
    expected = (GAMMA_E_MHZ_PER_MT * 1e3) ** 2 * brms_squared(LayeredProfile.single(h, rho))
    assert rho * integral == pytest.approx(expected, rel=2e-2)
    if tilt == 0.0:
        assert sheet_mean_square(coupling_prefactor(0.0), rho, h, 200 * h) == pytest.approx(expected, rel=1e-6)


def test_on_axis_spin_coupling():
    r = 4.0
    a = secular_couplings(np.array([[0.0, 0.0, r]]))
    assert a[0] == pytest.approx(-2 * coupling_prefactor(0.0) / r**3, rel=1e-14)
    assert secular_couplings(np.array([[r, 0.0, 0.0]]))[0] == pytest.approx(coupling_prefactor(0.0) / r**3)


def test_empty_bath():
    spec = _spec(profile=LayeredProfile.single(0.34, 0.0))
    assert len(sample_bath(spec, 1)) == 0
    cfg = _config()
    np.testing.assert_array_equal(deer_signal(spec, cfg).coherence, hahn_envelope(cfg.tau_grid, cfg.t2))


def test_bath_geometry():
    spec = _spec(profile=LayeredProfile(np.array([0.34, 1.0]), np.array([0.01, 0.02])))
    bath = sample_bath(spec, 3)
    r = np.hypot(bath.positions[:, 0], bath.positions[:, 1])
    assert r.max() <= spec.lateral_cutoff
    np.testing.assert_allclose(np.unique(bath.positions[:, 2]), spec.heights)
    for i, (_, rho) in enumerate(spec.profile.layers):
        n = np.sum(bath.layer == i)
        mean = rho * math.pi * spec.lateral_cutoff**2
        assert abs(n - mean) < 5 * math.sqrt(mean)


def test_bath_count_is_poisson():
    spec = _spec(lateral_cutoff=300.0)
    counts = np.array([len(sample_bath(spec, s)) for s in range(400)])
    mean = 0.01 * math.pi * 300.0**2
    assert counts.mean() == pytest.approx(mean, rel=0.01)
    assert counts.var() == pytest.approx(mean, rel=0.2)


def test_mean_square_coupling_matches_layer_formula():
    # dense enough that the draw-to-draw spread of sum a^2 stays near 1 %
    spec = _spec(profile=LayeredProfile(np.array([0.34, 0.67, 1.0]), np.array([0.04, 0.03, 0.03])), nv_standoff=8.0)
    total = np.mean([np.sum(sample_bath(spec, s).couplings ** 2) for s in range(1000)])
    expected = (GAMMA_E_MHZ_PER_MT * 1e3) ** 2 * brms_squared(spec.profile.shifted(8.0))
    assert total == pytest.approx(expected, rel=0.05)


def test_echo_identity_without_drive():
    cfg = _config()
    for spec in (_spec(drive_efficiency=0.0), _spec(polarization=0.7, drive_efficiency=0.0)):
        sig = deer_signal(spec, cfg)
        np.testing.assert_array_equal(sig.coherence, hahn_envelope(cfg.tau_grid, cfg.t2))
        assert np.all(sig.stderr == 0)
    hahn = hahn_signal(_spec(), cfg)
    np.testing.assert_array_equal(hahn.coherence, hahn_envelope(cfg.tau_grid, cfg.t2))


def test_stretched_envelope():
    cfg = _config(sequence=PulseSequence.HAHN, stretch_n=2.0)
    sig = deer_signal(_spec(), cfg)
    np.testing.assert_allclose(sig.coherence, np.exp(-((cfg.tau_grid / 2.6) ** 2)), rtol=1e-15)


def test_signal_invariants():
    sig = deer_signal(_spec(), _config())
    assert sig.coherence[0] == pytest.approx(1.0, abs=1e-15)
    assert np.all(np.abs(sig.coherence) <= 1 + 3 * sig.stderr + 1e-15)


def test_determinism_and_worker_independence():
    spec, cfg = _spec(polarization=0.3), _config(n_samples=3 * BLOCK + 17, seed=99)
    a = deer_signal(spec, cfg)
    b = deer_signal(spec, cfg)
    c = deer_signal(spec, cfg, workers=4)
    for other in (b, c):
        np.testing.assert_array_equal(a.coherence, other.coherence)
        np.testing.assert_array_equal(a.stderr, other.stderr)
        np.testing.assert_array_equal(a.quadrature, other.quadrature)


def test_different_seeds_differ():
    a = deer_signal(_spec(), _config(seed=1)).coherence
    b = deer_signal(_spec(), _config(seed=2)).coherence
    assert not np.array_equal(a, b)


def test_polarization_sign_symmetry():
    cfg = _config(n_samples=4096)
    bath = sample_bath(_spec(), cfg.seed)
    up = deer_signal(_spec(polarization=0.6), cfg, bath=bath)
    dn = deer_signal(_spec(polarization=-0.6), cfg, bath=bath)
    err = np.hypot(up.stderr, dn.stderr)
    assert np.all(np.abs(up.coherence - dn.coherence) <= 4 * err + 1e-12)
    # the precession changes sense, not rate
    assert np.all(np.abs(up.quadrature + dn.quadrature) <= 4 * err + 0.02)


def test_short_time_expansion():
    spec = _spec(drive_efficiency=0.8)
    cfg = _config(tau_grid=np.array([0.0, 0.05]), n_samples=8192, t2=50.0)
    bath = sample_bath(spec, cfg.seed)
    sig = deer_signal(spec, cfg, bath=bath)
    t = cfg.tau_grid[1]
    var = spec.drive_efficiency * np.sum(bath.couplings**2)  # <(sum flipped a s)^2> at p = 0
    bath_term = (2 * math.pi * 1e-3 * t) ** 2 * var / 2
    predicted = 1 - (1 - bath_term) * hahn_envelope(t, cfg.t2)
    assert 1 - sig.coherence[1] == pytest.approx(predicted, rel=0.1)


def test_unpolarized_deer_decays_faster_than_hahn():
    spec, cfg = _spec(), _config()
    d = deer_signal(spec, cfg)
    h = hahn_signal(spec, cfg)
    assert np.all(d.coherence[1:] < h.coherence[1:])
    assert deer_decay_rate(d) > deer_decay_rate(h)


def test_cutoff_convergence():
    base = _spec(nv_standoff=10.0)
    wide = _spec(nv_standoff=10.0, lateral_cutoff=2 * base.lateral_cutoff)
    cfg = _config(t2=1e6, tau_grid=np.linspace(0, 20, 201), n_samples=1024)
    r1 = deer_decay_rate(deer_signal(base, cfg))
    r2 = deer_decay_rate(deer_signal(wide, cfg))
    assert abs(r2 - r1) / r1 < 0.01
    inner = sample_bath(base, 0)
    outer = sample_bath(wide, 0)
    np.testing.assert_array_equal(outer.positions[: len(inner)], inner.positions)


def test_decay_rate_examples():
    t = np.linspace(0, 30, 3001)
    sig = DeerSignal(t, np.exp(-t / 5), np.zeros_like(t))
    assert deer_decay_rate(sig) == pytest.approx(0.2, rel=1e-4)
    with pytest.raises(NoDecay):
        deer_decay_rate(DeerSignal(t, np.ones_like(t), np.zeros_like(t)))


def test_subtract_reference():
    t = np.linspace(0, 10, 101)
    hahn = DeerSignal(t, np.exp(-t / 2.6), np.full_like(t, 5e-3))
    same = subtract_reference(hahn, hahn)
    ok = same.valid
    np.testing.assert_allclose(same.coherence[ok], 1.0)
    deer = DeerSignal(t, hahn.coherence * np.exp(-t / 4.0), np.full_like(t, 5e-3))
    ratio = subtract_reference(deer, hahn)
    ok = ratio.valid
    assert ok[0] and not ok[-1]
    assert np.all(np.abs(ratio.coherence[ok] - np.exp(-t[ok] / 4.0)) <= 3 * ratio.stderr[ok] + 1e-12)
    assert np.all(np.isnan(ratio.coherence[~ok]))
    assert not np.any(np.isinf(ratio.coherence))
    with pytest.raises(GridMismatch):
        subtract_reference(deer, DeerSignal(t[:-1], hahn.coherence[:-1], hahn.stderr[:-1]))


def test_undriven_subtracted_signal_never_decays():
    spec, cfg = _spec(drive_efficiency=0.0), _config()
    with pytest.raises(NoDecay):
        deer_decay_rate(subtract_reference(deer_signal(spec, cfg), hahn_signal(spec, cfg)))


def test_oscillation_frequency_of_pure_precession():
    t = np.linspace(0, 5, 101)
    f = 0.4
    env = np.exp(-t / 20)
    sig = DeerSignal(t, env * np.cos(2 * math.pi * f * t), np.full_like(t, 1e-4), env * np.sin(2 * math.pi * f * t))
    assert oscillation_frequency(sig) == pytest.approx(f, rel=1e-9)
    with pytest.raises(ValueError):
        oscillation_frequency(DeerSignal(t, env, env))


def test_polarized_bath_precesses_faster():
    cfg = _config(t2=12.0, tau_grid=np.linspace(0, 30, 121), n_samples=1024)
    bath = sample_bath(_spec(), cfg.seed)
    f0 = oscillation_frequency(deer_signal(_spec(polarization=0.0), cfg, bath=bath))
    f1 = oscillation_frequency(deer_signal(_spec(polarization=1.0), cfg, bath=bath))
    assert f1 > f0


def test_sweep_single_value_equals_direct_call():
    spec, cfg = _spec(), _config(seed=5)
    (row,) = sweep("polarization", [0.5], spec, cfg)
    direct = deer_signal(BathSpec(SHEET, polarization=0.5, nv_standoff=10.0), cfg)
    np.testing.assert_array_equal(row.signal.coherence, direct.coherence)
    assert row.seed == 5


def test_sweep_seeds_and_axes():
    spec, cfg = _spec(), _config(seed=6, n_samples=256)
    rows = sweep("t2", [1.0, 2.0, 3.0], spec, cfg)
    assert [r.seed for r in rows] == [6 ^ 0, 6 ^ 1, 6 ^ 2]
    np.testing.assert_array_equal(rows[2].reference.coherence, hahn_envelope(cfg.tau_grid, 3.0))
    with pytest.raises(ValueError):
        sweep("depth", [], spec, cfg)
    with pytest.raises(ValueError):
        sweep("bogus", [1.0], spec, cfg)


def test_depth_doubling_scales_coupling_and_rate():
    dense = LayeredProfile.single(0.34, 0.1)
    near, far = 10.0, 20.0
    h = (near + 0.34, far + 0.34)
    ms = []
    for d in (near, far):
        spec = BathSpec(dense, nv_standoff=d)
        ms.append(np.mean([np.sum(sample_bath(spec, s).couplings ** 2) for s in range(100)]))
    assert ms[0] / ms[1] == pytest.approx((h[1] / h[0]) ** 4, rel=0.05)

    cfg = _config(t2=1e6, tau_grid=np.linspace(0, 40, 401), n_samples=256)
    rows = sweep("depth", [near, far], BathSpec(dense, nv_standoff=near), cfg)
    rates = [r.rate for r in rows]
    assert rates[0] / rates[1] == pytest.approx((h[1] / h[0]) ** 2, rel=0.15)


def test_config_and_spec_validation():
    with pytest.raises(ValueError):
        BathSpec(SHEET, polarization=1.5)
    with pytest.raises(ValueError):
        BathSpec(SHEET, drive_efficiency=-0.1)
    with pytest.raises(ValueError):
        BathSpec(SHEET, nv_standoff=10.0, lateral_cutoff=50.0)
    with pytest.raises(ValueError):
        DeerConfig(np.array([1.0, 0.5]), 2.6)
    with pytest.raises(ValueError):
        DeerConfig(np.array([0.0, 1.0]), 0.0)
    with pytest.raises(ValueError):
        DeerConfig(np.array([0.0, 1.0]), 2.6, stretch_n=4.0)
    with pytest.raises(ValueError):
        DeerConfig(np.array([0.0, 1.0]), 2.6, n_samples=0)
