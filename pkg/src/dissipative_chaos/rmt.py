"""Random-matrix toy Liouvillian interpolating between regular and chaotic dissipation.

The Hamiltonian is ``H_TD + (mu / sqrt(N)) P H_GOE P`` with a random
tridiagonal ``H_TD``, a GOE matrix ``H_GOE`` and the deformation
``P = I - chi (|u1><u1| + |u2><u2|)`` built from the two dominant eigenvectors
of the ``mu = 0`` steady state. A single jump operator lives on the first
subdiagonal. The ``N = M^2`` levels are read as two ``M``-level subsystems via
``k = i M + j``.

Realization ``k`` of an ensemble with root seed ``s`` draws from
``np.random.SeedSequence([s, k])``, so members do not depend on the ensemble
size or on the order in which they are computed.
"""

from dataclasses import dataclass, replace
import math

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .lindblad import DENSE_GUARD, DimensionGuardError, LindbladGenerator, steady_state
from .observables import partial_trace, von_neumann_entropy, _slope, _tail_mean
from .spectra import ComplexSpectrum


@dataclass(frozen=True)
class ToyModelConfig:
    n_total: int = 49
    mu: float = 1.0
    chi: float = 0.0
    gamma: float = 1.0
    seed: int = 0
    ensemble_size: int = 50

    def __post_init__(self):
        m = math.isqrt(int(self.n_total))
        if m * m != self.n_total or m < 2:
            raise ValueError(f"n_total must be a perfect square >= 4, got {self.n_total}")
        if not 0 <= self.mu <= 1:
            raise ValueError(f"mu must lie in [0, 1], got {self.mu}")
        if not 0 <= self.chi <= 1:
            raise ValueError(f"chi must lie in [0, 1], got {self.chi}")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be positive")

    @property
    def m(self):
        return math.isqrt(self.n_total)


@dataclass(frozen=True)
class ToyRealization:
    h_td: np.ndarray
    h_goe: np.ndarray
    jump: np.ndarray
    seed: tuple = ()
    u1: np.ndarray = None
    u2: np.ndarray = None
    eta: np.ndarray = None

    @property
    def n(self):
        return self.h_td.shape[0]

    def projector(self, chi):
        p = np.eye(self.n, dtype=complex)
        if chi == 0:
            return p
        if self.u1 is None or self.u2 is None:
            raise ValueError("projector needs u1, u2; call regular_steady_state first")
        return p - chi * (np.outer(self.u1, self.u1.conj()) + np.outer(self.u2, self.u2.conj()))


def realization_seed(root, index):
    return np.random.SeedSequence([int(root), int(index)])


def sample_realization(config, index=0):
    """Draw ``H_TD``, ``H_GOE`` and the jump operator for ensemble member ``index``."""
    n = config.n_total
    rng = np.random.default_rng(realization_seed(config.seed, index))
    diag = rng.standard_normal(n)
    off = rng.standard_normal(n - 1)
    h_td = np.diag(diag) + np.diag(off, 1) + np.diag(off, -1)
    a = rng.standard_normal((n, n))
    h_goe = (a + a.T) / np.sqrt(2.0)
    jump = np.diag(rng.standard_normal(n - 1), -1)
    return ToyRealization(h_td, h_goe, jump, (config.seed, index))


def build_liouvillian(h, jump, gamma, sparse=False, max_dim=DENSE_GUARD):
    """``-i(H kron I - I kron H*) + gamma(2 L kron L* - L^dag L kron I - I kron L^T L*)``."""
    n = h.shape[0]
    if n > max_dim:
        raise DimensionGuardError(f"Liouvillian of dim {n} exceeds the guard {max_dim}")
    kron = sp.kron if sparse else np.kron
    eye = sp.identity(n, format="csr") if sparse else np.eye(n)
    h = sp.csr_matrix(h) if sparse else np.asarray(h)
    l = sp.csr_matrix(jump) if sparse else np.asarray(jump)
    ldl = l.conj().T @ l
    out = (-1j * (kron(h, eye) - kron(eye, h.conj()))
           + gamma * (2 * kron(l, l.conj()) - kron(ldl, eye) - kron(eye, ldl.T)))
    return sp.csr_matrix(out) if sparse else np.asarray(out, dtype=complex)


def regular_steady_state(realization, gamma=1.0):
    """Steady state of the ``mu = 0`` model.

    Returns ``(rho_R, u1, u2, eta)`` with ``eta`` in descending order.
    """
    m = build_liouvillian(realization.h_td, realization.jump, gamma, sparse=True)
    rho = steady_state(m)
    eta, vecs = np.linalg.eigh(rho)
    eta, vecs = eta[::-1], vecs[:, ::-1]
    return rho, vecs[:, 0], vecs[:, 1], eta


def with_regular_state(realization, gamma=1.0):
    """Copy of ``realization`` carrying ``u1``, ``u2`` and ``eta``."""
    _, u1, u2, eta = regular_steady_state(realization, gamma)
    return replace(realization, u1=u1, u2=u2, eta=eta)


def build_hamiltonian(realization, mu, chi):
    if mu == 0:
        return np.array(realization.h_td, dtype=complex)
    p = realization.projector(chi)
    h = realization.h_td + (mu / np.sqrt(realization.n)) * (p @ realization.h_goe @ p)
    return 0.5 * (h + h.conj().T)


def prepared_realization(config, index):
    real = sample_realization(config, index)
    if config.chi > 0:
        real = with_regular_state(real, config.gamma)
    return real


def toy_generator(config, realization):
    h = build_hamiltonian(realization, config.mu, config.chi)
    return LindbladGenerator(h, ((realization.jump, config.gamma),))


def initial_state(realization, m):
    """Product of the lowest eigenvectors of the first two diagonal ``M x M`` blocks of ``H_TD``."""
    h = realization.h_td
    va = np.linalg.eigh(h[:m, :m])[1][:, 0]
    vb = np.linalg.eigh(h[m:2 * m, m:2 * m])[1][:, 0]
    psi = np.kron(va, vb).astype(complex)
    return np.outer(psi, psi.conj())


def _batched_rhs(rho, h, l, gamma):
    hr = h @ rho
    out = -1j * (hr - hr.conj().transpose(0, 2, 1))
    # L has entries only at (k+1, k)
    diss = np.zeros_like(rho)
    diss[:, 1:, 1:] = 2 * l[:, :, None] * rho[:, :-1, :-1] * l[:, None, :]
    ll = np.zeros(rho.shape[:2])
    ll[:, :-1] = l ** 2
    diss -= ll[:, :, None] * rho + rho * ll[:, None, :]
    return out + gamma * diss


def _subsystem_entropies(rho, m):
    red = np.einsum("sijkj->sik", rho.reshape(-1, m, m, m, m))
    return np.array([von_neumann_entropy(0.5 * (r + r.conj().T)) for r in red])


@dataclass
class ToyEntropySeries:
    """Ensemble-mean entropy of one ``M``-level subsystem.

    ``s_tail`` averages the final 20% of the run, ``s_sat`` is the mean
    entropy of the exact steady states (the ``t -> infinity`` limit of every
    member), and ``s_slope`` the least-squares slope on ``slope_window``.
    """

    times: np.ndarray
    s_vn: np.ndarray
    mu: float
    chi: float
    slope_window: tuple = (0.0, 0.5)
    s_slope: float = np.nan
    s_tail: float = np.nan
    s_sat: float = np.nan
    s_max: float = np.nan
    n_members: int = 0
    members: np.ndarray = None
    steady_members: np.ndarray = None

    def rows(self):
        return [(float(t), float(s), self.mu, self.chi) for t, s in zip(self.times, self.s_vn)]


def toy_vne_dynamics(config, t_final=20.0, dt=0.05, record_every=2, slope_window=(0.0, 0.5),
                     steady=True):
    """Batched RK4 evolution of the ensemble with subsystem entropies.

    All members are propagated together; with ``steady=True`` the entropy of
    each member's unique steady state is also computed.
    """
    m = config.m
    reals = [prepared_realization(config, k) for k in range(config.ensemble_size)]
    gens = [toy_generator(config, r) for r in reals]
    h = np.array([g.hamiltonian for g in gens], dtype=complex)
    l = np.array([np.diag(r.jump, -1) for r in reals])
    rho = np.array([initial_state(r, m) for r in reals])
    n_steps = int(round(t_final / dt))
    f = lambda r: _batched_rhs(r, h, l, config.gamma)
    times, ent = [0.0], [_subsystem_entropies(rho, m)]
    for step in range(1, n_steps + 1):
        k1 = f(rho)
        k2 = f(rho + 0.5 * dt * k1)
        k3 = f(rho + 0.5 * dt * k2)
        k4 = f(rho + dt * k3)
        rho = rho + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        rho = 0.5 * (rho + rho.conj().transpose(0, 2, 1))
        if step % record_every == 0 or step == n_steps:
            times.append(step * dt)
            ent.append(_subsystem_entropies(rho, m))
    times, ent = np.array(times), np.array(ent)
    mean = ent.mean(axis=1)
    ss = None
    if steady:
        ss = []
        for g in gens:
            rss = steady_state(build_liouvillian(g.hamiltonian, g.jumps[0][0], config.gamma, sparse=True))
            ss.append(von_neumann_entropy(partial_trace(rss, (m, m), 0)))
        ss = np.array(ss)
    return ToyEntropySeries(times, mean, config.mu, config.chi, tuple(slope_window),
                            _slope(times, mean, slope_window), _tail_mean(times, mean),
                            float(ss.mean()) if ss is not None else np.nan, float(np.log(m)),
                            len(reals), ent, ss)


def real_liouvillian(h, jump, gamma, dtype=np.float64):
    """Liouvillian in an orthonormal basis of Hermitian matrices (a real matrix).

    The basis is ``E_kk``, ``(E_jk + E_kj)/sqrt 2`` and ``i(E_jk - E_kj)/sqrt 2``
    for ``j < k``; the spectrum equals that of :func:`build_liouvillian`.
    """
    n = h.shape[0]
    big = build_liouvillian(h, jump, gamma, sparse=True)
    rows, cols, vals = [], [], []
    col = 0
    s = 1 / np.sqrt(2)
    for k in range(n):
        rows.append(k * n + k)
        cols.append(col)
        vals.append(1.0)
        col += 1
    for j in range(n):
        for k in range(j + 1, n):
            rows += [j * n + k, k * n + j]
            cols += [col, col]
            vals += [s, s]
            col += 1
            rows += [j * n + k, k * n + j]
            cols += [col, col]
            vals += [1j * s, -1j * s]
            col += 1
    t = sp.csr_matrix((vals, (rows, cols)), shape=(n * n, n * n))
    r = (t.conj().T @ big @ t).toarray()
    return np.ascontiguousarray(r.real, dtype=dtype)


def zero_mode_moduli(config, index=0, k=3, shift=-1e-2):
    """Smallest eigenvalue moduli of one realization's Liouvillian, ascending.

    Shift-invert Arnoldi around ``shift`` on the real representation with a
    dense LU factor. The shift must be nonzero: inverting the exactly
    singular generator would swamp every other Ritz value. A unique steady
    state shows as one modulus at round-off level followed by a finite gap.
    """
    real = prepared_realization(config, index)
    h = build_hamiltonian(real, config.mu, config.chi)
    r = real_liouvillian(h, real.jump, config.gamma)
    r[np.diag_indices_from(r)] -= shift
    lu = sla.lu_factor(r, overwrite_a=True, check_finite=False)
    op = spla.LinearOperator(r.shape, matvec=lambda v: sla.lu_solve(lu, v, check_finite=False), dtype=float)
    v0 = np.random.default_rng(0x5EED).standard_normal(r.shape[0])
    mu = spla.eigs(op, k=k, which="LM", return_eigenvectors=False, tol=1e-12, v0=v0)
    return np.sort(np.abs(shift + 1.0 / mu))


def toy_spectrum(config, index=0, dtype=np.float32):
    """Full Liouvillian spectrum of one realization as a :class:`ComplexSpectrum`."""
    real = prepared_realization(config, index)
    h = build_hamiltonian(real, config.mu, config.chi)
    r = real_liouvillian(h, real.jump, config.gamma, dtype=dtype)
    ev = sla.eigvals(r, overwrite_a=True, check_finite=False)
    prov = {"n_total": config.n_total, "mu": config.mu, "chi": config.chi, "gamma": config.gamma,
            "seed": config.seed, "index": index, "dtype": np.dtype(dtype).name}
    return ComplexSpectrum(ev.astype(complex), prov)


def toy_spectra(config, dtype=np.float32):
    return [toy_spectrum(config, k, dtype) for k in range(config.ensemble_size)]
