"""Lattice Hamiltonian assembly and propagator unitarity."""

import numpy as np
import pytest

from monfermi.errors import ParameterError
from monfermi.model import (
    DisorderRealization,
    ModelSpec,
    build_hamiltonian,
    make_propagator,
    sample_disorder,
)


def test_spec_validation():
    with pytest.raises(ParameterError):
        ModelSpec(L=0)
    with pytest.raises(ParameterError):
        ModelSpec(L=8, W=-0.1)
    with pytest.raises(ParameterError):
        ModelSpec(L=8, gamma=-1.0)
    with pytest.raises(ParameterError):
        ModelSpec(L=8, dt=0.0)
    with pytest.raises(ParameterError):
        ModelSpec(L=8, boundary="twisted")
    with pytest.raises(ParameterError):
        ModelSpec(L=7)  # default half filling needs even L
    assert ModelSpec(L=7, filling=3).n_particles == 3
    assert ModelSpec(L=8).n_particles == 4


def test_disorder_reproducible_and_bounded():
    a = sample_disorder(2.0, 64, seed=123)
    b = sample_disorder(2.0, 64, seed=123)
    c = sample_disorder(2.0, 64, seed=124)
    np.testing.assert_array_equal(a.h, b.h)
    assert not np.array_equal(a.h, c.h)
    assert np.all(np.abs(a.h) <= 2.0)
    assert sample_disorder(0.0, 16, seed=5).h.tolist() == [0.0] * 16


def test_hamiltonian_periodic_vs_open():
    spec_p = ModelSpec(L=6, boundary="periodic")
    spec_o = ModelSpec(L=6, boundary="open")
    dis = DisorderRealization(h=np.zeros(6))
    hp = build_hamiltonian(spec_p, dis)
    ho = build_hamiltonian(spec_o, dis)
    assert hp[0, 5] == 1.0 and hp[5, 0] == 1.0
    assert ho[0, 5] == 0.0
    # both carry the same bulk bonds
    for i in range(5):
        assert hp[i, i + 1] == 1.0 and ho[i, i + 1] == 1.0
    np.testing.assert_array_equal(hp, hp.T)


def test_hamiltonian_nnn_and_diagonal():
    spec = ModelSpec(L=8, nnn=True)
    h = np.arange(8.0)
    mat = build_hamiltonian(spec, DisorderRealization(h=h))
    np.testing.assert_array_equal(np.diag(mat), h)
    assert mat[0, 2] == 1.0 and mat[1, 3] == 1.0
    assert mat[0, 6] == 1.0  # next-nearest wrap bond
    assert mat[0, 3] == 0.0


def test_propagator_unitary_and_hermitian_guard():
    spec = ModelSpec(L=10, W=1.5)
    dis = sample_disorder(1.5, 10, seed=3)
    h_mat = build_hamiltonian(spec, dis)
    prop = make_propagator(h_mat, 0.05)
    np.testing.assert_allclose(prop @ prop.conj().T, np.eye(10), atol=1e-12)
    with pytest.raises(ParameterError):
        make_propagator(np.array([[0.0, 1.0], [0.0, 0.0]]), 0.05)


def test_propagator_matches_series_expansion():
    dis = sample_disorder(1.0, 6, seed=11)
    h_mat = build_hamiltonian(ModelSpec(L=6, W=1.0), dis)
    dt = 1e-3
    prop = make_propagator(h_mat, dt)
    approx = np.eye(6) - 1j * dt * h_mat - 0.5 * dt**2 * (h_mat @ h_mat)
    np.testing.assert_allclose(prop, approx, atol=1e-8)
