import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhssh.model import (ModelParams, build_bloch, build_real_space, reduce_momentum,
                         symmetry_residuals)
from nhssh.spectrum import batch_energies, matching_distance

from conftest import random_params

hop = st.floats(0.05, 2.0)
gain = st.floats(-1.5, 1.5)
kk = st.floats(-10.0, 10.0)


def test_pt_sym_entries_at_gamma_point(pt_sym):
    h = build_bloch(pt_sym, 0.0, 0.0)
    np.testing.assert_allclose(np.diag(h), [0.77j, -0.77j, -0.77j, 0.77j], atol=1e-15)
    assert h[0, 1] == pytest.approx(2.0)
    assert h[0, 3] == pytest.approx(1.5)


def test_entries_match_definition(rng):
    p = ModelParams(0.9, 0.4, 0.7, 0.3, mu=0.2, a=1.3, gains=(0.1, -0.2, 0.3, -0.4))
    for kx, ky in rng.uniform(-3, 3, size=(20, 2)):
        ex, ey = np.exp(1j * 1.3 * kx), np.exp(1j * 1.3 * ky)
        ref = np.zeros((4, 4), complex)
        ref[0, 1], ref[1, 0] = 0.9 + 0.4 * ex, 0.9 + 0.4 / ex
        ref[0, 3], ref[3, 0] = 0.3 + 0.7 / ey, 0.3 + 0.7 * ey
        ref[1, 2], ref[2, 1] = 0.7 + 0.3 * ey, 0.7 + 0.3 / ey
        ref[2, 3], ref[3, 2] = 0.4 + 0.9 * ex, 0.4 + 0.9 / ex
        ref += np.diag([0.1j - 0.2, -0.2j - 0.2, 0.3j - 0.2, -0.4j - 0.2])
        np.testing.assert_allclose(build_bloch(p, kx, ky), ref, atol=1e-14)


def test_zone_corner_vanishes():
    p = ModelParams.uniform(0.8, 0.8, 0.6, 0.6)
    np.testing.assert_allclose(build_bloch(p, np.pi, np.pi), 0, atol=1e-15)


def test_forbidden_entries_zero(rng):
    h = build_bloch(random_params(rng), rng.uniform(-3, 3, 50), rng.uniform(-3, 3, 50))
    for i, j in [(0, 2), (2, 0), (1, 3), (3, 1)]:
        assert np.all(h[..., i, j] == 0)


@given(hop, hop, hop, hop, kk, kk)
def test_hermitian_without_gains(u, t1, v, t2, kx, ky):
    h = build_bloch(ModelParams.uniform(u, t1, v, t2), kx, ky)
    assert np.max(np.abs(h - h.conj().T)) < 1e-14


@given(hop, hop, hop, hop, gain, kk, kk)
def test_periodicity(u, t1, v, t2, g, kx, ky):
    p = ModelParams.uniform(u, t1, v, t2, gamma=g, a=1.0)
    h = build_bloch(p, kx, ky)
    np.testing.assert_allclose(build_bloch(p, kx + 2 * np.pi, ky), h, atol=1e-12)
    np.testing.assert_allclose(build_bloch(p, kx, ky + 2 * np.pi), h, atol=1e-12)


@given(st.floats(-50, 50), st.floats(0.5, 3.0))
def test_reduce_momentum_idempotent(k, a):
    r = reduce_momentum(k, a)
    assert -np.pi / a < r <= np.pi / a + 1e-12
    assert reduce_momentum(r, a) == pytest.approx(r, abs=1e-12)


@pytest.mark.parametrize("mode", ["uniform", "prime"])
def test_phs_residual_both_gain_modes(rng, mode):
    for _ in range(200):
        p = random_params(rng, mode)
        kx, ky = rng.uniform(-np.pi, np.pi, 2)
        assert symmetry_residuals(p, kx, ky).residuals["PHS"] <= 1e-12


def test_phs_broken_by_mu(pt_sym):
    rep = symmetry_residuals(pt_sym.with_(mu=0.3), 0.4, -0.2)
    assert rep.residuals["PHS"] > 0.1


def test_chiral_broken_generically(pt_sym, broken_pt):
    assert symmetry_residuals(pt_sym, 0.3, 0.7).residuals["chiral"] > 0
    assert symmetry_residuals(broken_pt.with_(gamma=0.0), 0.3, 0.7).residuals["chiral"] > 0


def test_chiral_mirror_needs_matched_hoppings(pt_sym, broken_pt, rng):
    for kx, ky in rng.uniform(-3, 3, size=(20, 2)):
        assert symmetry_residuals(pt_sym, kx, ky).holds("chiral-mirror", 1e-12)
    assert not symmetry_residuals(broken_pt, 0.3, 0.7).holds("chiral-mirror", 1e-6)
    prime = ModelParams.prime(1, 1, 0.75, 0.75, gamma1=0.3, gamma2=0.7)
    assert not symmetry_residuals(prime, 0.3, 0.7).holds("chiral-mirror", 1e-6)


def test_spinless_time_reversal_at_zero_gain(rng):
    for _ in range(50):
        p = random_params(rng).with_(gamma=0.0)
        rep = symmetry_residuals(p, *rng.uniform(-3, 3, 2))
        assert rep.holds("TRS-spinless", 1e-13)
    assert not symmetry_residuals(random_params(rng).with_(gamma=0.4), 0.3, 0.2).holds(
        "TRS-spinless", 1e-6)


def test_residuals_nonnegative(rng):
    rep = symmetry_residuals(random_params(rng, "prime", mu=0.2), 0.1, 0.9)
    assert all(v >= 0 for v in {**rep.residuals, **rep.alternatives}.values())


def test_spectral_phs_multiset(rng):
    for _ in range(200):
        p = random_params(rng, rng.choice(["uniform", "prime"]))
        kx, ky = rng.uniform(-np.pi, np.pi, 2)
        e = batch_energies(p, kx, ky)
        em = batch_energies(p, -kx, -ky)
        assert matching_distance(em, -e.conj())[0] < 1e-9


def test_params_validation():
    with pytest.raises(ValueError):
        ModelParams(a=0.0)
    with pytest.raises(ValueError):
        ModelParams(u=float("nan"))
    with pytest.raises(ValueError):
        ModelParams.prime(gamma1=0.1, gamma2=0.2).gamma


def test_params_dict_round_trip():
    p = ModelParams.prime(0.9, 0.8, 0.7, 0.6, gamma1=0.2, gamma2=-0.1, mu=0.05, a=2.0)
    assert ModelParams.from_dict(p.to_dict()) == p
    assert ModelParams.from_dict({"gamma": 0.5}).gains == (0.5, -0.5, -0.5, 0.5)


def test_single_cell_pbc_equals_bloch_at_zero(pt_sym):
    rs = build_real_space(pt_sym, 1, 1, "PBC")
    np.testing.assert_allclose(rs.matrix, build_bloch(pt_sym, 0.0, 0.0), atol=1e-15)


def test_real_space_dimension_and_sparsity(pt_sym):
    rs = build_real_space(pt_sym, 3, 2)
    assert rs.dim == 24
    assert np.max(np.count_nonzero(rs.matrix, axis=1)) <= 5
    assert rs.index(2, 1, "C") == 4 * (2 + 3 * 1) + 2


def test_obc_is_pbc_without_wrap_bonds(pt_sym):
    pbc = build_real_space(pt_sym, 4, 3, "PBC").matrix
    obc = build_real_space(pt_sym, 4, 3, "OBC").matrix
    mask = obc != 0
    np.testing.assert_array_equal(obc[mask], pbc[mask])
    assert np.count_nonzero(pbc) > np.count_nonzero(obc)


def test_real_space_rejects_bad_input(pt_sym):
    with pytest.raises(ValueError):
        build_real_space(pt_sym, 0, 2)
    with pytest.raises(ValueError):
        build_real_space(pt_sym, 2, 2, "twisted")
