import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhssh.circuit import (CircuitParams, circuit_laplacian, circuit_spectrum_closed,
                           crossing_k_sensitivity, laplacian_eigenvalues, resonance_frequency,
                           tbr_sweep, two_point_admittance)
from nhssh.validation import check_circuit

L, C = 1e-4, 1e-8


def base(R=1.0, **kw):
    return CircuitParams(L, L, C, R, resonance_frequency(L, L, C), **kw)


def test_resonance_values():
    assert resonance_frequency(1e-2, 1e-2, 1e-8) == pytest.approx(1e5, rel=1e-12)
    assert resonance_frequency(1e-4, 1e-4, 1e-8) == pytest.approx(1e6, rel=1e-12)
    w = resonance_frequency(2e-3, 5e-3, 3e-9)
    assert resonance_frequency(2e-3, 5e-3, 12e-9) == pytest.approx(w / 2, rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-6, 1e-1), st.floats(1e-6, 1e-1), st.floats(1e-12, 1e-5), st.floats(0.1, 10))
def test_resonance_scaling_invariance(L1, L2, Cv, s):
    w = resonance_frequency(L1, L2, Cv)
    assert resonance_frequency(s * L1, s * L2, Cv / s) == pytest.approx(w, rel=1e-12)


@pytest.mark.xfail(strict=True, reason="with a_i = 1/(omega^2 L_i) the leading term is -3C at omega*")
def test_resonance_cancels_leading_term():
    c = base()
    assert abs(c.C - 2 * c.a1 - 2 * c.a2) < 1e-12 * c.C


def test_laplacian_at_gamma():
    c = base()
    j = circuit_laplacian(c, 0.0, 0.0)
    np.testing.assert_allclose(np.diag(j), [c.b] * 4)
    for i, k in ((0, 1), (1, 2), (2, 3), (0, 3)):
        assert j[i, k] == pytest.approx(c.a1 + c.a2)
    assert j[0, 2] == 0 and j[1, 3] == 0


def test_laplacian_transpose_same_spectrum(rng):
    for kx, ky in rng.uniform(-np.pi, np.pi, (10, 2)):
        a = np.sort_complex(laplacian_eigenvalues(base(), kx, ky))
        b = np.sort_complex(laplacian_eigenvalues(base(transpose=True), kx, ky))
        np.testing.assert_allclose(a, b, atol=1e-9 * np.max(np.abs(a)))


def test_lossless_laplacian_hermitian_part():
    c = base(R=1e30)
    j = circuit_laplacian(c, 0.4, -1.1)
    np.testing.assert_allclose(j - j.conj().T, np.zeros((4, 4)), atol=1e-20)


def test_tbr_pattern():
    sweeps = tbr_sweep(base(), [1, 26, 50], (5e3, 2e5), 512)
    r1, r26, r50 = sweeps
    assert r1.tbr_compliant
    e2 = [w for b, w, _ in r1.crossings if b == 2]
    assert e2 and abs(e2[0] - 3e4) <= 0.2 * 3e4
    for s in (r26, r50):
        assert not s.branch_crosses(1) and not s.branch_crosses(2)
        assert not s.tbr_compliant


def test_k_sensitivity_reports_spread():
    rows, spread = crossing_k_sensitivity(base(), 1, samples=128,
                                          k_grid=[(0.0, 0.0), (1.0, 1.0)])
    assert len(rows) == 2
    assert np.isfinite(spread) and spread >= 0


def test_closed_form_mismatch_logged():
    errs = check_circuit(base(), [3e4, 1e5], [(0.0, 0.0), (0.5, 0.5)])
    assert errs
    assert all(e.check == "circuit" and e.deviation > e.tolerance for e in errs)


def test_admittance_reciprocity():
    for beta, bp, r in ((1, 2, (0, 0)), (1, 3, (1, 0)), (2, 4, (1, -2))):
        y1 = two_point_admittance(base(), beta, bp, r, n=16).value
        y2 = two_point_admittance(base(), bp, beta, (-r[0], -r[1]), n=16).value
        assert abs(y1 - y2) <= 1e-10 * abs(y1)


def test_admittance_grid_convergence():
    c = base().at(3e5)
    y = [two_point_admittance(c, 1, 2, (0, 0), n=n).value for n in (16, 32)]
    assert abs(y[1] - y[0]) / abs(y[1]) < 0.01


def test_admittance_rejects_same_node():
    with pytest.raises(ValueError):
        two_point_admittance(base(), 2, 2, (0, 0))
    with pytest.raises(ValueError):
        two_point_admittance(base(), 0, 2)


def test_invalid_circuit_inputs():
    with pytest.raises(ValueError):
        CircuitParams(-1e-4, L, C, 1.0, 1e5)
    with pytest.raises(ValueError):
        CircuitParams(L, L, C, 0.0, 1e5)
    with pytest.raises(ValueError):
        tbr_sweep(base(), [1], samples=32)
    with pytest.raises(ValueError):
        tbr_sweep(base(), [1], (2e5, 5e3))


def test_closed_form_flags_complex_branches():
    s = circuit_spectrum_closed(base().at(3e4), 0.3, 0.2)
    assert s.values.shape == (4,)
    assert s.flags.dtype == bool
