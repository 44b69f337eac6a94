"""Standalone invariant suite: ``pytest tests/test_properties.py``."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dissipative_chaos.classical import AdmParams, ClassicalState, eom_rhs, integrate, jacobian
from dissipative_chaos.observables import partial_trace
from dissipative_chaos.rmt import ToyModelConfig, sample_realization, with_regular_state, zero_mode_moduli

pytestmark = pytest.mark.properties


def random_states(n, rng, photon_scale=2.0):
    theta = np.arccos(rng.uniform(-1, 1, n))
    phi = rng.uniform(0, 2 * math.pi, n)
    alpha = photon_scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
    return np.array([ClassicalState.from_angles(t, p, a).as_array() for t, p, a in zip(theta, phi, alpha)])


def random_params(n, rng):
    """Per-member parameters for a batch of ``n``; scalars when ``n`` is None."""
    return AdmParams(omega=rng.uniform(0.5, 1.5, n), omega0=rng.uniform(0.5, 1.5, n),
                     lambda_minus=rng.uniform(0, 3, n), lambda_plus=rng.uniform(0, 3.5, n),
                     kappa=rng.uniform(0, 2, n))


def test_bloch_norm_conserved_on_random_batch():
    rng = np.random.default_rng(101)
    x0 = random_states(100, rng)
    traj = integrate(x0, random_params(100, rng), dt=1e-3, t_final=20.0, record_every=100)
    s = traj.states[..., 2:]
    assert np.max(np.abs(np.sum(s * s, axis=-1) - 1)) < 1e-8


@settings(max_examples=10)
@given(st.integers(0, 2 ** 32 - 1))
def test_bloch_norm_conserved_property(seed):
    rng = np.random.default_rng(seed)
    traj = integrate(random_states(1, rng)[0], random_params(None, rng), dt=1e-3, t_final=5.0, record_every=50)
    assert traj.max_norm_drift < 1e-8


def test_jacobian_finite_differences_on_100_states():
    rng = np.random.default_rng(202)
    x = random_states(100, rng)
    p = random_params(100, rng)
    J = jacobian(x, p)
    h = 1e-6
    worst = 0.0
    for j in range(5):
        e = np.zeros(5)
        e[j] = h
        fd = (eom_rhs(x + e, p) - eom_rhs(x - e, p)) / (2 * h)
        worst = max(worst, float(np.max(np.abs(fd - J[..., :, j]) / np.maximum(np.abs(J[..., :, j]), 1.0))))
    assert worst < 1e-5


@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 4), st.integers(1, 4))
def test_partial_trace_oracle(seed, d_a, d_b):
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((d_a * d_b,) * 2) + 1j * rng.standard_normal((d_a * d_b,) * 2)
    rho = g @ g.conj().T
    rho /= np.trace(rho)
    red_a = np.array([[sum(rho[i * d_b + k, j * d_b + k] for k in range(d_b)) for j in range(d_a)]
                      for i in range(d_a)])
    red_b = np.array([[sum(rho[k * d_b + i, k * d_b + j] for k in range(d_a)) for j in range(d_b)]
                      for i in range(d_b)])
    assert np.max(np.abs(partial_trace(rho, (d_a, d_b), 0) - red_a)) < 1e-13
    assert np.max(np.abs(partial_trace(rho, (d_a, d_b), 1) - red_b)) < 1e-13


@pytest.mark.parametrize("index", range(5))
def test_projector_is_idempotent_at_full_deformation(index):
    real = with_regular_state(sample_realization(ToyModelConfig(seed=31), index))
    p = real.projector(1.0)
    assert np.max(np.abs(p @ p - p)) < 1e-12
    assert np.max(np.abs(p - p.conj().T)) < 1e-12


@pytest.mark.parametrize("chi", [0.1, 0.5, 0.9])
def test_projector_square_formula(chi):
    real = with_regular_state(sample_realization(ToyModelConfig(seed=32), 0))
    q = np.outer(real.u1, real.u1.conj()) + np.outer(real.u2, real.u2.conj())
    p = real.projector(chi)
    assert np.max(np.abs(p @ p - (np.eye(real.n) - (2 * chi - chi ** 2) * q))) < 1e-12


def test_liouvillian_zero_mode_unique_for_50_seeds():
    cfg = ToyModelConfig(n_total=49, mu=1.0, chi=0.0, gamma=1.0, seed=0)
    gaps = []
    for k in range(50):
        mods = zero_mode_moduli(cfg, k)
        assert mods[0] < 1e-10, f"realization {k}: no zero mode ({mods[0]:.2e})"
        gaps.append(mods[1] - mods[0])
    assert min(gaps) > 1e-8
