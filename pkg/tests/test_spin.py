import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from hybridspin.errors import AmbiguousLabeling, ConfigError, NotHermitian
from hybridspin.spin import (
    FieldConfig,
    Manifold,
    SpinSpecies,
    build_hamiltonian,
    defect_frame,
    diagonalize,
    eigensystem,
    load_species,
    mixing_overlaps,
    mixing_scan,
    transition_frequencies,
)

from oracles import spin1_hamiltonian

GAMMA = 28.024
NV_LIKE = SpinSpecies("nv-like", d_gs=2870.0, d_es=1420.0, gamma_e=GAMMA)

# frozen from oracles.spin1_hamiltonian + numpy.linalg.eigvalsh
# (D = 2870 MHz, gamma = 28.0249514 MHz/mT, 50 mT at 54.7 deg)
NV_50MT_ENERGIES = [-422.75372301364627, 2296.4239746146754, 3866.32974839897]
NV_50MT_FREQS = (2719.1776976283218, 4289.083471412616)


@pytest.fixture(scope="module")
def nv():
    return load_species("nv")


@pytest.fixture(scope="module")
def vb():
    return load_species("vb")


def test_zero_field_energies():
    e = eigensystem(NV_LIKE, FieldConfig(0.0)).energies
    np.testing.assert_allclose(e, [0, 2870, 2870], atol=1e-9)


def test_axial_zeeman_shift():
    e = eigensystem(NV_LIKE, FieldConfig(10.0, NV_LIKE.axis)).energies
    np.testing.assert_allclose(e, [0, 2870 - 280.24, 2870 + 280.24], atol=1e-9)
    assert transition_frequencies(NV_LIKE, FieldConfig(10.0)) == pytest.approx((2870 - 280.24, 2870 + 280.24), abs=1e-9)


def test_zero_field_transitions():
    assert transition_frequencies(NV_LIKE, FieldConfig(0.0)) == pytest.approx((2870.0, 2870.0), abs=1e-9)


def test_off_axis_matches_frozen_oracle(nv):
    field = FieldConfig.at_angle(50.0, 54.7, nv.axis)
    np.testing.assert_allclose(eigensystem(nv, field).energies, NV_50MT_ENERGIES, rtol=1e-10)
    assert transition_frequencies(nv, field) == pytest.approx(NV_50MT_FREQS, rel=1e-10)


def test_hamiltonian_matches_hand_written_matrix(nv):
    field = FieldConfig.at_angle(37.0, 20.0, nv.axis)
    local = defect_frame(nv.axis) @ field.vector
    ref = spin1_hamiltonian(nv.d_gs, 0.0, nv.gamma_e, local)
    np.testing.assert_allclose(build_hamiltonian(nv, field), ref, atol=1e-10)


def test_excited_manifold_uses_d_es():
    e = eigensystem(NV_LIKE, FieldConfig(0.0), Manifold.ES).energies
    np.testing.assert_allclose(e, [0, 1420, 1420], atol=1e-9)


def test_strain_splits_zero_field_doublet():
    sp = SpinSpecies("strained", 2870.0, 1420.0, GAMMA, e_strain=5.0)
    np.testing.assert_allclose(eigensystem(sp, FieldConfig(0.0)).energies, [0, 2865, 2875], atol=1e-9)


def test_diagonalize_rejects_non_hermitian():
    h = np.diag([1.0, 2.0, 3.0]).astype(complex)
    h[0, 2] = 1j
    with pytest.raises(NotHermitian):
        diagonalize(h)


def test_diagonalize_identity():
    d = diagonalize(np.eye(3, dtype=complex))
    np.testing.assert_allclose(d.energies, 1.0)
    np.testing.assert_allclose(d.amplitudes, np.eye(3))


def test_on_axis_overlaps_are_unmixed(nv, vb):
    for sp in (nv, vb):
        for b in (0.0, 20.0, 93.0, 150.0):
            for m in Manifold:
                ov = mixing_overlaps(sp, FieldConfig(b, sp.axis), m)
                assert set(np.round(ov[:, 0], 12)) <= {0.0, 1.0}
                np.testing.assert_allclose(np.sort(ov, axis=1), np.tile([0, 0, 1], (3, 1)), atol=1e-12)


def test_ambiguous_labeling_near_equal_zero_weight():
    sp = SpinSpecies("weak", 0.1, 0.1, GAMMA)
    with pytest.raises(AmbiguousLabeling):
        transition_frequencies(sp, FieldConfig(1e4, np.array([1.0, 0.0, 0.0])))


def test_f_minus_changes_sign_past_level_crossing(vb):
    # beyond D / gamma the ms=-1 level drops below ms=0 for an axial field
    b = 1.5 * vb.d_gs / vb.gamma_e
    f_minus, f_plus = transition_frequencies(vb, FieldConfig(b, vb.axis))
    assert f_minus < 0
    assert f_plus - f_minus == pytest.approx(2 * vb.gamma_e * b, rel=1e-12)


def test_mixing_scan_single_point_equals_overlaps(nv):
    t = mixing_scan(nv, 54.7, [42.0])
    assert t.overlaps.shape == (1, 3, 3)
    np.testing.assert_array_equal(t.overlaps[0], mixing_overlaps(nv, FieldConfig.at_angle(42.0, 54.7, nv.axis)))


def test_mixing_scan_zero_field_unmixed(nv):
    np.testing.assert_allclose(np.sort(mixing_scan(nv, 54.7, [0.0]).overlaps[0], axis=1), np.tile([0, 0, 1], (3, 1)), atol=1e-12)


def test_mixing_scan_validates_grid(nv):
    with pytest.raises(ValueError):
        mixing_scan(nv, 54.7, [])
    with pytest.raises(ValueError):
        mixing_scan(nv, 54.7, [2.0, 1.0])


def test_nv_mixes_at_lower_field_than_vb(nv, vb):
    grid = np.arange(0.0, 150.5, 0.5)
    for m in Manifold:
        b_nv = mixing_scan(nv, 54.7, grid, m).first_field_below(0.9)
        b_vb = mixing_scan(vb, 54.7, grid, m).first_field_below(0.9)
        assert b_nv is not None and b_vb is not None
        assert b_nv < b_vb
        # the minimum-purity fields differ as well
        pur_nv = mixing_scan(nv, 54.7, grid, m).alpha2.max(axis=1)
        pur_vb = mixing_scan(vb, 54.7, grid, m).alpha2.max(axis=1)
        assert not np.allclose(pur_nv, pur_vb)


def test_species_defaults(nv, vb):
    assert (nv.d_gs, nv.d_es) == (2870.0, 1420.0)
    assert (vb.d_gs, vb.d_es) == (3470.0, 2100.0)
    assert math.degrees(math.acos(nv.axis @ vb.axis)) == pytest.approx(54.7356, abs=1e-3)


def test_species_roundtrip_and_env_dir(tmp_path, monkeypatch, nv):
    custom = dict(nv.to_dict(), name="custom", d_gs_mhz=2880.0)
    (tmp_path / "custom.json").write_text(json.dumps(custom))
    monkeypatch.setenv("HYBRIDSPIN_CONFIG_DIR", str(tmp_path))
    sp = load_species("custom")
    assert sp.d_gs == 2880.0
    assert SpinSpecies.from_dict(sp.to_dict()).to_dict() == sp.to_dict()
    assert load_species(tmp_path / "custom.json").d_gs == 2880.0


def test_species_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_species("no-such-species")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_species(bad)
    bad.write_text(json.dumps({"name": "x", "d_gs_mhz": -1, "d_es_mhz": 1, "gamma_e_mhz_per_mt": 28, "axis": [0, 0, 1]}))
    with pytest.raises(ConfigError):
        load_species(bad)


def test_type_invariants():
    with pytest.raises(ValueError):
        SpinSpecies("x", 0.0, 1.0, GAMMA)
    with pytest.raises(ValueError):
        SpinSpecies("x", 1.0, 1.0, GAMMA, e_strain=-1.0)
    with pytest.raises(ValueError):
        SpinSpecies("x", 1.0, 1.0, GAMMA, axis=np.array([0.0, 0.0, 2.0]))
    with pytest.raises(ValueError):
        FieldConfig(-1.0)
    with pytest.raises(ValueError):
        FieldConfig(1.0, np.array([1.0, 1.0, 0.0]))


# -- properties -------------------------------------------------------------------

fields = st.floats(0.0, 200.0, allow_nan=False)
angles = st.floats(0.0, 180.0, allow_nan=False)
ds = st.floats(100.0, 5000.0)
strains = st.floats(0.0, 50.0)


@settings(max_examples=200, deadline=None)
@given(ds, strains, fields, angles, st.sampled_from(list(Manifold)))
def test_decomposition_invariants(d, e, b, ang, manifold):
    sp = SpinSpecies("h", d, d / 2, GAMMA, e_strain=e)
    field = FieldConfig.at_angle(b, ang, sp.axis)
    h = build_hamiltonian(sp, field, manifold)
    np.testing.assert_allclose(h, h.conj().T, atol=1e-12)
    eig = diagonalize(h, manifold)
    v = eig.amplitudes
    np.testing.assert_allclose(v @ v.conj().T, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(eig.overlaps.sum(axis=1), 1.0, atol=1e-10)
    scale = np.abs(h).max()
    np.testing.assert_allclose(eig.reconstruct(), h, atol=1e-8 * scale)
    assert abs(eig.energies.sum() - np.trace(h).real) <= 1e-8 * scale


@settings(max_examples=200, deadline=None)
@given(ds, st.floats(0.0, 500.0))
def test_zeeman_linearity_on_axis(d, b):
    sp = SpinSpecies("h", d, d, GAMMA)
    f_minus, f_plus = transition_frequencies(sp, FieldConfig(b, sp.axis))
    assert f_plus - f_minus == pytest.approx(2 * GAMMA * b, rel=1e-8, abs=1e-8)


@settings(max_examples=100, deadline=None)
@given(fields, angles, st.integers(0, 2**32 - 1))
def test_common_rotation_leaves_energies_invariant(b, ang, seed):
    # with E = 0 the Hamiltonian is symmetric about the axis, so the choice
    # of in-plane reference in the defect frame cannot matter
    sp = SpinSpecies("h", 2870.0, 1420.0, GAMMA, axis=np.array([1.0, 1.0, 1.0]) / math.sqrt(3))
    field = FieldConfig.at_angle(b, ang, sp.axis)
    rot = Rotation.random(random_state=seed).as_matrix()
    axis_r = rot @ sp.axis
    sp_r = SpinSpecies("h", 2870.0, 1420.0, GAMMA, axis=axis_r / np.linalg.norm(axis_r))
    dir_r = rot @ field.direction
    field_r = FieldConfig(b, dir_r / np.linalg.norm(dir_r))
    np.testing.assert_allclose(eigensystem(sp_r, field_r).energies, eigensystem(sp, field).energies, atol=1e-8 * 5000)
