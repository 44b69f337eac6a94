import math
import warnings

import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, strategies as st

from dissipative_chaos.hilbert import (HilbertSpec, TruncationWarning, boson_operators, coherent_ensemble,
                                       composite_operators, photon_coherent_state, product_state,
                                       spin_coherent_state, spin_operators, spin_xyz, tensor)

spins = st.sampled_from([0.5, 1, 1.5, 2, 2.5, 3, 5])


def test_spec_dimensions():
    spec = HilbertSpec(5, 20)
    assert (spec.d_spin, spec.d_photon, spec.d_total) == (11, 21, 231)
    assert spec.index(0, 0) == 0 and spec.index(1, 0) == 11 and spec.index(2, 3) == 25


@pytest.mark.parametrize("bad", [0, -0.5, 0.3, 1.25])
def test_invalid_spin(bad):
    with pytest.raises(ValueError):
        spin_operators(bad)
    with pytest.raises(ValueError):
        HilbertSpec(bad, 4)


def test_invalid_cutoff():
    with pytest.raises(ValueError):
        boson_operators(0)
    with pytest.raises(ValueError):
        HilbertSpec(1, 0)


def test_spin_half_matrices():
    sz, splus, sminus = spin_operators(0.5)
    assert np.allclose(sz, np.diag([0.5, -0.5]))
    assert np.count_nonzero(splus) == 1 and splus[0, 1] == 1.0


def test_spin_five_spectrum():
    sz, _, _ = spin_operators(5)
    assert sz.shape == (11, 11)
    assert np.allclose(np.sort(np.diag(sz)), np.arange(-5, 6))
    assert np.allclose(np.diag(sz), np.arange(5, -6, -1))


@given(spins)
def test_spin_algebra(s):
    sz, splus, sminus = spin_operators(s)
    assert np.array_equal(splus, sminus.conj().T)
    assert np.max(np.abs(sz @ splus - splus @ sz - splus)) < 1e-14
    assert np.max(np.abs(sz @ sminus - sminus @ sz + sminus)) < 1e-14
    sx, sy, sz2 = spin_xyz(s)
    casimir = sx @ sx + sy @ sy + sz2 @ sz2
    assert np.allclose(casimir, s * (s + 1) * np.eye(sz.shape[0]))


def test_sparse_matches_dense():
    for a, b in zip(spin_operators(2, sparse=True), spin_operators(2)):
        assert sp.issparse(a) and np.array_equal(a.toarray(), b)


def test_boson_ladder():
    a, adag = boson_operators(6)
    fock0 = np.eye(7)[0]
    fock3 = np.eye(7)[3]
    assert np.allclose(a @ fock0, 0)
    assert np.allclose(a @ fock3, math.sqrt(3) * np.eye(7)[2])
    assert np.array_equal(adag, a.conj().T)


@given(st.integers(1, 30))
def test_truncated_commutator(n_max):
    a, adag = boson_operators(n_max)
    comm = a @ adag - adag @ a
    expected = np.eye(n_max + 1)
    expected[-1, -1] = -n_max
    assert np.allclose(comm, expected)
    assert comm[0, 0] == 1


def test_tensor_examples(rng):
    assert np.array_equal(tensor(np.eye(2), np.eye(3)), np.eye(6))
    assert tensor(np.ones((3, 3)), np.ones((4, 4))).shape == (12, 12)
    a, b, c, d = (rng.standard_normal((3, 3)) for _ in range(4))
    assert np.allclose(tensor(a, b) @ tensor(c, d), tensor(a @ c, b @ d))
    with pytest.raises(ValueError):
        tensor(np.ones((2, 3)), np.eye(2))


def test_tensor_index_formula(rng):
    a = rng.standard_normal((3, 3))
    b = rng.standard_normal((2, 2))
    c = rng.standard_normal((2, 2))
    ab = tensor(a, b)
    for i in range(3):
        for j in range(2):
            for k in range(3):
                for l in range(2):
                    assert ab[i * 2 + j, k * 2 + l] == a[i, k] * b[j, l]
    assert np.allclose(tensor(tensor(a, b), c), tensor(a, tensor(b, c)))
    assert np.allclose(tensor(a, 2 * b + c), 2 * tensor(a, b) + tensor(a, c))


def test_composite_ordering():
    spec = HilbertSpec(1, 3)
    o = composite_operators(spec, sparse=False)
    # Fock index major: basis k = n * d_spin + i with m ordered S..-S
    assert np.allclose(np.diag(o["n"]), np.repeat(np.arange(4), 3))
    assert np.allclose(np.diag(o["sz"]), np.tile([1, 0, -1], 4))
    assert np.allclose(o["a"] @ o["adag"] - o["adag"] @ o["a"],
                       np.kron(np.diag([1, 1, 1, -3]), np.eye(3)))


def test_spin_coherent_poles():
    s = 2.5
    north = spin_coherent_state(0.0, 0.3, s)
    assert abs(abs(north[0]) - 1) < 1e-14
    south = spin_coherent_state(math.pi, 0.0, s)
    assert abs(abs(south[-1]) - 1) < 1e-12
    sz = spin_operators(s)[0]
    assert np.isclose(np.real(north.conj() @ sz @ north), s)


def test_spin_coherent_rotation_oracle():
    s = 5
    sx, sy, sz = spin_xyz(s)
    top = np.zeros(11, complex)
    top[0] = 1
    for theta, phi in [(math.pi / 2, 0.0), (0.7, 1.9), (2.4, -0.6)]:
        ref = sla.expm(-1j * phi * sz) @ sla.expm(-1j * theta * sy) @ top
        psi = spin_coherent_state(theta, phi, s)
        assert abs(abs(np.vdot(ref, psi)) - 1) < 1e-12
    psi = spin_coherent_state(math.pi / 2, 0.0, s)
    assert abs(np.real(psi.conj() @ sx @ psi) - 5) < 1e-12


@given(spins, st.floats(0, math.pi), st.floats(-math.pi, math.pi))
def test_spin_coherent_expectations(s, theta, phi):
    psi = spin_coherent_state(theta, phi, s)
    sx, sy, sz = spin_xyz(s)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    ev = [np.real(psi.conj() @ m @ psi) for m in (sx, sy, sz)]
    expected = s * np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    assert np.allclose(ev, expected, atol=1e-10)


def test_spin_coherent_bad_theta():
    with pytest.raises(ValueError):
        spin_coherent_state(-0.1, 0, 1)


def test_photon_coherent_examples():
    assert np.array_equal(photon_coherent_state(0, 5), np.eye(6)[0])
    psi = photon_coherent_state(1.0, 30)
    assert abs(np.sum(np.arange(31) * np.abs(psi) ** 2) - 1) < 1e-10
    psi = photon_coherent_state(2.0, 40)
    assert abs(np.linalg.norm(psi) - 1) < 1e-12
    a, _ = boson_operators(40)
    assert abs(psi.conj() @ a @ psi - 2.0) < 1e-10


def test_photon_coherent_truncation_warning():
    with pytest.warns(TruncationWarning):
        psi, lost = photon_coherent_state(3.0, 5, return_info=True)
    assert lost > 1e-8 and abs(np.linalg.norm(psi) - 1) < 1e-12
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        photon_coherent_state(0.5, 30)


def test_product_state_and_ensemble():
    spec = HilbertSpec(1, 2)
    ph = photon_coherent_state(0, 2)
    sp_ = spin_coherent_state(0.0, 0.0, 1)
    psi = product_state(ph, sp_)
    assert psi[spec.index(0, 0)] == 1
    ens = coherent_ensemble(spec, [0.0, math.pi], [0.0, 0.0])
    assert len(ens) == 2 and all(v.shape == (spec.d_total,) for v in ens)
