import numpy as np
import pytest

from nhssh.circuit import CircuitParams, resonance_frequency
from nhssh.model import ModelParams
from nhssh.validation import check_discriminant, run_validation, sample_momenta


def test_matched_family_has_no_spectral_errata():
    p = ModelParams.uniform(1.0, 1.0, 0.0, 0.0)
    log = run_validation([p], n_samples=40,
                         checks=("discriminant", "energies", "discriminant-roots"))
    assert log.entries == []
    assert log.samples["discriminant"] == 40
    # the printed vector pieces miss even here
    vec = run_validation([p], n_samples=10, checks=("eigenvectors",))
    assert vec.counts["eigenvectors"] == vec.samples["eigenvectors"]


def test_pt_sym_discriminant_logged(pt_sym):
    ks = sample_momenta(30, seed=3)
    errs = check_discriminant(pt_sym, ks)
    assert errs
    log = run_validation([pt_sym], checks=("discriminant",), n_samples=30, seed=3)
    assert len(log.entries) == len(errs)
    assert log.covers("discriminant", errs[0].k)
    assert not log.covers("energies", errs[0].k)
    assert len(log.table()) == len(errs)


def test_every_logged_deviation_exceeds_tolerance(pt_sym):
    L = 1e-4
    circ = CircuitParams(L, L, 1e-8, 1.0, resonance_frequency(L, L, 1e-8))
    log = run_validation([pt_sym, ModelParams.uniform(1, 1, 0.23, 0.5)], [circ], n_samples=20)
    assert log.entries
    assert all(e.deviation > e.tolerance for e in log.entries)
    assert sum(log.counts.values()) == len(log.entries)
    assert log.summary()["total_mismatches"] == len(log.entries)


def test_unknown_check_rejected():
    with pytest.raises(ValueError):
        run_validation([], checks=("bogus",))


def test_sample_momenta_in_zone():
    ks = sample_momenta(100, seed=1, a=2.0)
    assert ks.shape == (100, 2)
    assert np.all(np.abs(ks) <= np.pi / 2)
