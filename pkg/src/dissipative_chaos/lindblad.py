"""Lindblad generator of the open ADM, density-matrix and operator propagation.

The dissipator convention is ``rate * (2 L rho L^dag - {L^dag L, rho})`` for
every ``(L, rate)`` pair, so a single photon-loss channel with rate ``kappa``
damps ``<a^dag a>`` as ``exp(-2 kappa t)``.

Vectorization is row-stacking (``rho.reshape(-1)`` in C order), under which

    vec(A rho B) = (A kron B^T) vec(rho)

and the superoperator takes the familiar form
``-i(H kron I - I kron H^*) + rate(2 L kron L^* - L^dag L kron I - I kron L^T L^*)``.
"""

from dataclasses import dataclass, field
from functools import cached_property
import struct

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hilbert import HilbertSpec, composite_operators

DENSE_GUARD = 100


class PositivityError(RuntimeError):
    """rho(t) acquired a negative eigenvalue beyond tolerance."""


class DimensionGuardError(ValueError):
    """Dense superoperator requested for too large a space."""


class SteadyStateMultiplicityError(RuntimeError):
    def __init__(self, message, candidates=()):
        super().__init__(message)
        self.candidates = list(candidates)


def _dense(m):
    return m.toarray() if sp.issparse(m) else np.asarray(m)


def _dag(m):
    return m.conj().T


@dataclass(frozen=True)
class LindbladGenerator:
    """Hamiltonian plus a list of ``(jump operator, rate)`` pairs."""

    hamiltonian: object
    jumps: tuple = ()

    def __post_init__(self):
        h = self.hamiltonian
        if h.shape[0] != h.shape[1]:
            raise ValueError("hamiltonian must be square")
        defect = abs(h - _dag(h)).max()
        if defect > 1e-12 * max(1.0, abs(h).max()):
            raise ValueError(f"hamiltonian is not Hermitian (defect {defect:.2e})")
        jumps = tuple((op, float(rate)) for op, rate in self.jumps)
        for op, rate in jumps:
            if rate < 0:
                raise ValueError("jump rates must be non-negative")
            if op.shape != h.shape:
                raise ValueError("jump operator dimension mismatch")
        object.__setattr__(self, "jumps", jumps)

    @property
    def dim(self):
        return self.hamiltonian.shape[0]

    @property
    def is_unitary(self):
        return all(rate == 0 for _, rate in self.jumps)

    @cached_property
    def h_eff(self):
        """Non-Hermitian ``H - i sum rate L^dag L``."""
        h = self.hamiltonian
        for op, rate in self.jumps:
            if rate:
                h = h - 1j * rate * (_dag(op) @ op)
        return sp.csr_matrix(h) if sp.issparse(h) else np.asarray(h, dtype=complex)

    @cached_property
    def _active(self):
        out = []
        for op, rate in self.jumps:
            if rate:
                op = sp.csr_matrix(op) if sp.issparse(op) else np.asarray(op, dtype=complex)
                out.append((op, _dag(op).tocsr() if sp.issparse(op) else _dag(op), rate))
        return out


def build_adm_hamiltonian(params, spec, sparse=True):
    """``w a^dag a + w0 Sz + lm/sqrt(2S) (a S+ + a^dag S-) + lp/sqrt(2S) (a S- + a^dag S+)``."""
    o = composite_operators(spec, sparse=True)
    c = 1.0 / np.sqrt(2.0 * spec.spin_s)
    h = (params.omega * o["n"] + params.omega0 * o["sz"]
         + params.lambda_minus * c * (o["a"] @ o["splus"] + o["adag"] @ o["sminus"])
         + params.lambda_plus * c * (o["a"] @ o["sminus"] + o["adag"] @ o["splus"]))
    h = (h + _dag(h)) / 2
    return h.tocsr() if sparse else h.toarray()


def adm_generator(params, spec, sparse=True):
    """Lindblad generator with photon loss ``a`` at rate ``kappa``."""
    o = composite_operators(spec, sparse=True)
    h = build_adm_hamiltonian(params, spec, sparse=sparse)
    a = o["a"] if sparse else o["a"].toarray()
    jumps = ((a, params.kappa),) if params.kappa > 0 else ()
    return LindbladGenerator(h, jumps)


def _left(op, m):
    return op @ m


def _right_dag(m, op):
    # m @ op^dag without materialising a dense op
    return _dag(op @ _dag(m))


def lindblad_rhs(rho, gen):
    """``L[rho]`` for a general (not necessarily Hermitian) square matrix."""
    rho = np.asarray(rho)
    if rho.shape != (gen.dim, gen.dim):
        raise ValueError(f"rho has shape {rho.shape}, generator acts on dim {gen.dim}")
    he = gen.h_eff
    out = -1j * (he @ rho) + 1j * _right_dag(rho, he)
    for op, opd, rate in gen._active:
        out = out + (2 * rate) * _right_dag(op @ rho, op)
    return out


def _lindblad_rhs_hermitian(rho, gen):
    k = -1j * (gen.h_eff @ rho)
    out = k + _dag(k)
    for op, opd, rate in gen._active:
        out = out + (2 * rate) * _right_dag(op @ rho, op)
    return out


def adjoint_rhs(w, gen):
    """Heisenberg-picture generator ``L^dag[W] = i(H_eff^dag W - W H_eff) + sum 2 rate L^dag W L``."""
    he = gen.h_eff
    out = 1j * (_dag(he) @ w) - 1j * _dag(_dag(he) @ _dag(w))
    for op, opd, rate in gen._active:
        out = out + (2 * rate) * (opd @ _dag(opd @ _dag(w)))
    return out


def _rk4(f, y, dt):
    k1 = f(y)
    k2 = f(y + (0.5 * dt) * k1)
    k3 = f(y + (0.5 * dt) * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def check_density_matrix(rho, trace_tol=1e-10, herm_tol=1e-12, pos_tol=-1e-8):
    """Raise ``ValueError`` unless ``rho`` is a valid density matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError("density matrix must be square")
    if abs(np.trace(rho) - 1) > trace_tol:
        raise ValueError(f"trace {np.trace(rho):.3g} != 1")
    if np.max(np.abs(rho - _dag(rho))) > herm_tol:
        raise ValueError("density matrix is not Hermitian")
    if np.linalg.eigvalsh(rho).min() < pos_tol:
        raise ValueError("density matrix has negative eigenvalues")
    return rho


def pure_density(psi):
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


@dataclass
class Evolution:
    """Output of :func:`evolve`.

    ``expectations`` has shape ``(n_times, n_observers)``; ``states`` holds
    the density matrices at output times when snapshots were requested.
    """

    times: np.ndarray
    expectations: np.ndarray
    states: list = field(default_factory=list)
    dt: float = None
    method: str = "rk4"
    min_eigenvalue: float = 0.0
    max_trace_drift: float = 0.0


def _output_steps(dt, t_final, record_every, times):
    n_steps = int(round(t_final / dt))
    if times is None:
        idx = list(range(0, n_steps + 1, record_every))
        if idx[-1] != n_steps:
            idx.append(n_steps)
    else:
        idx = sorted({int(round(t / dt)) for t in times})
    return n_steps, idx


def _expect(observers, rho):
    return [complex(np.sum(_dense(o).T * rho) if not sp.issparse(o) else (o.multiply(rho.T)).sum())
            for o in observers]


def evolve(rho0, gen, dt=1e-3, t_final=1.0, observers=(), record_every=100, times=None,
           snapshots=False, method="rk4", positivity_tol=-1e-6, max_halvings=4, callback=None):
    """Propagate the master equation and record ``Tr(O rho)`` for each observer.

    ``method="rk4"`` integrates the ``d x d`` equation with a fixed step and
    halves ``dt`` (up to ``max_halvings`` times) when the monitored minimum
    eigenvalue drops below ``positivity_tol``. ``method="expm"`` propagates
    exactly between output times with a sparse matrix exponential of the
    vectorized generator; ``method="unitary"`` diagonalizes ``H`` (only for
    generators without active jumps). ``callback(t, rho)`` is invoked at every
    output time.
    """
    rho0 = np.array(rho0, dtype=complex)
    if rho0.shape != (gen.dim, gen.dim):
        raise ValueError("rho0 dimension does not match the generator")
    if method == "auto":
        method = "unitary" if gen.is_unitary else "expm"
    if method == "rk4":
        for attempt in range(max_halvings + 1):
            try:
                return _evolve_rk4(rho0, gen, dt, t_final, observers, record_every, times,
                                   snapshots, positivity_tol, callback)
            except PositivityError:
                if attempt == max_halvings:
                    raise
                dt, record_every = dt / 2, record_every * 2
    if method in ("expm", "unitary"):
        n_steps, idx = _output_steps(dt, t_final, record_every, times)
        out_t = np.array(idx) * dt
        if method == "unitary":
            if not gen.is_unitary:
                raise ValueError("unitary method requires a generator without active jumps")
            e, v = np.linalg.eigh(_dense(gen.hamiltonian))
            r0 = _dag(v) @ rho0 @ v

            def state_at(t):
                ph = np.exp(-1j * e * t)
                return v @ (ph[:, None] * r0 * ph.conj()[None, :]) @ _dag(v)
            path = (state_at(t) for t in out_t)
        else:
            path = (vec.reshape(gen.dim, gen.dim)
                    for vec in _expm_path(vectorize_generator(gen, sparse=True), rho0.reshape(-1), out_t))
        exps, states = [], []
        drift = 0.0
        for t, rho in zip(out_t, path):
            exps.append(_expect(observers, rho))
            drift = max(drift, abs(np.trace(rho) - 1))
            if snapshots:
                states.append(rho.copy())
            if callback is not None:
                callback(t, rho)
        return Evolution(out_t, np.array(exps).reshape(len(out_t), len(observers)), states, dt, method,
                         np.nan, drift)
    raise ValueError(f"unknown method {method!r}")


def _evolve_rk4(rho0, gen, dt, t_final, observers, record_every, times, snapshots, pos_tol, callback):
    n_steps, idx = _output_steps(dt, t_final, record_every, times)
    targets = set(idx)
    rho = rho0.copy()
    herm = np.max(np.abs(rho0 - _dag(rho0))) < 1e-12
    f = (lambda r: _lindblad_rhs_hermitian(r, gen)) if herm else (lambda r: lindblad_rhs(r, gen))
    out_t, exps, states = [], [], []
    min_ev, drift = np.inf, 0.0

    def record(step):
        nonlocal min_ev, drift
        if herm:
            ev = float(np.linalg.eigvalsh(rho).min())
            min_ev = min(min_ev, ev)
            if ev < pos_tol:
                raise PositivityError(f"min eigenvalue {ev:.2e} at t={step * dt:.4g}; "
                                      "reduce dt or increase the photon cutoff")
        drift = max(drift, abs(np.trace(rho) - 1))
        out_t.append(step * dt)
        exps.append(_expect(observers, rho))
        if snapshots:
            states.append(rho.copy())
        if callback is not None:
            callback(step * dt, rho)

    if 0 in targets:
        record(0)
    for step in range(1, n_steps + 1):
        rho = _rk4(f, rho, dt)
        if herm:
            rho = 0.5 * (rho + _dag(rho))
        if step in targets:
            record(step)
    return Evolution(np.array(out_t), np.array(exps).reshape(len(out_t), len(observers)), states, dt,
                     "rk4", float(min_ev), float(drift))


def _expm_path(m, vec, out_t, chunk=32):
    """``exp(m t) vec`` at the sorted times ``out_t`` (starting from ``t = 0``).

    Equally spaced stretches go through one interval-mode ``expm_multiply``
    call, which estimates the matrix norms once instead of per interval.
    """
    tr_m = complex(m.diagonal().sum())
    t_prev, i, n = 0.0, 0, len(out_t)
    while i < n:
        if out_t[i] == t_prev:
            yield vec
            i += 1
            continue
        step = out_t[i] - t_prev
        j = i + 1
        while j < n and j - i < chunk and abs(out_t[j] - out_t[j - 1] - step) <= 1e-12 * max(1.0, step):
            j += 1
        if j - i == 1:
            vec = spla.expm_multiply(m * step, vec, traceA=tr_m * step)
            block = [vec]
        else:
            block = spla.expm_multiply(m, vec, start=0.0, stop=out_t[j - 1] - t_prev, num=j - i + 1,
                                       endpoint=True, traceA=tr_m)[1:]
            vec = block[-1]
        yield from block
        t_prev, i = out_t[j - 1], j


def adjoint_evolve(w0, gen, dt=1e-3, t_final=1.0, record_every=100, times=None, method="rk4"):
    """Propagate an operator with ``dW/dt = L^dag[W]``; returns ``(times, [W(t)])``.

    ``method="expm"`` uses the conjugate transpose of the vectorized
    generator, which is the adjoint under the Hilbert-Schmidt product.
    """
    w = np.array(_dense(w0), dtype=complex)
    if w.shape != (gen.dim, gen.dim):
        raise ValueError("operator dimension does not match the generator")
    n_steps, idx = _output_steps(dt, t_final, record_every, times)
    out_t = [i * dt for i in idx]
    if method == "expm":
        m = vectorize_generator(gen, sparse=True).conj().T.tocsr()
        ws = [vec.reshape(gen.dim, gen.dim).copy() for vec in _expm_path(m, w.reshape(-1), out_t)]
        return np.array(out_t), ws
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")
    targets = set(idx)
    f = lambda x: adjoint_rhs(x, gen)
    ws = []
    if 0 in targets:
        ws.append(w.copy())
    for step in range(1, n_steps + 1):
        w = _rk4(f, w, dt)
        if step in targets:
            ws.append(w.copy())
    return np.array(out_t), ws


def vectorize_generator(gen, sparse=False, max_dim=DENSE_GUARD):
    """Superoperator ``M`` with ``vec(L[rho]) = M vec(rho)`` (row-stacking).

    Dense output is refused for ``dim > max_dim``; sparse output has no guard.
    """
    d = gen.dim
    if not sparse and d > max_dim:
        raise DimensionGuardError(
            f"dense superoperator of size {d*d}x{d*d} refused (dim {d} > {max_dim}); use sparse=True")
    eye = sp.identity(d, format="csr", dtype=complex)
    h = sp.csr_matrix(gen.hamiltonian, dtype=complex)
    m = -1j * (sp.kron(h, eye) - sp.kron(eye, h.conj()))
    for op, _, rate in gen._active:
        op = sp.csr_matrix(op, dtype=complex)
        ldl = (_dag(op) @ op).tocsr()
        m = m + rate * (2 * sp.kron(op, op.conj()) - sp.kron(ldl, eye) - sp.kron(eye, ldl.T))
    m = m.tocsr()
    return m if sparse else m.toarray()


def exact_evolve(rho0, superop, t):
    """``unvec(exp(M t) vec(rho0))``; the dense oracle for :func:`evolve`."""
    rho0 = np.asarray(rho0, dtype=complex)
    d = rho0.shape[0]
    if superop.shape != (d * d, d * d):
        raise ValueError("superoperator does not match rho0")
    if t == 0:
        return rho0.copy()
    if sp.issparse(superop):
        vec = spla.expm_multiply(superop * t, rho0.reshape(-1))
    else:
        if d > DENSE_GUARD:
            raise DimensionGuardError(f"dense exponential refused for dim {d}")
        vec = sla.expm(superop * t) @ rho0.reshape(-1)
    return vec.reshape(d, d)


def _finish_state(vec, d):
    rho = vec.reshape(d, d)
    rho = 0.5 * (rho + _dag(rho))
    return rho / np.trace(rho).real


def _start_vector(n):
    # fixed ARPACK start so repeated solves are bit-identical
    return np.random.default_rng(0x5EED).standard_normal(n) + 0j


def steady_state(superop, tol=1e-10, return_info=False, n_candidates=3):
    """Null vector of the superoperator reshaped to a density matrix.

    Dense input uses a full eigendecomposition; sparse input uses shift-invert
    Arnoldi around a small negative shift (exactly zero would leave the
    inverted operator singular). Raises :class:`SteadyStateMultiplicityError` when
    more than one eigenvalue lies within ``tol`` of zero.
    """
    n = superop.shape[0]
    d = int(round(np.sqrt(n)))
    if d * d != n:
        raise ValueError("superoperator size is not a perfect square")
    if sp.issparse(superop):
        k = min(n_candidates, n - 2)
        vals, vecs = spla.eigs(superop.tocsc(), k=k, sigma=-1e-3, which="LM", tol=1e-13,
                               v0=_start_vector(n))
    else:
        if d > DENSE_GUARD:
            raise DimensionGuardError(f"dense steady-state solve refused for dim {d}")
        vals, vecs = np.linalg.eig(np.asarray(superop))
    order = np.argsort(np.abs(vals))
    vals, vecs = vals[order], vecs[:, order]
    scale = max(1.0, float(abs(superop).max()))
    near = np.abs(vals) < tol * scale
    if near.sum() > 1:
        raise SteadyStateMultiplicityError(
            f"{int(near.sum())} eigenvalues within {tol:g} of zero",
            [_finish_state(vecs[:, i], d) for i in np.flatnonzero(near)])
    rho = _finish_state(vecs[:, 0], d)
    residual = float(np.linalg.norm(superop @ rho.reshape(-1)))
    if return_info:
        return rho, {"eigenvalues": vals[:n_candidates], "residual": residual,
                     "gap": float(abs(vals[1])) if len(vals) > 1 else np.inf}
    return rho


def steady_state_linear(superop):
    """Steady state from the sparse linear system with one row replaced by ``Tr rho = 1``.

    Cheaper than :func:`steady_state` for large sparse generators but does not
    test uniqueness.
    """
    n = superop.shape[0]
    d = int(round(np.sqrt(n)))
    m = sp.csr_matrix(superop, dtype=complex)
    keep = sp.diags(np.r_[0.0, np.ones(n - 1)])
    tr = sp.csr_matrix((np.ones(d), (np.zeros(d, dtype=int), np.arange(d) * (d + 1))), shape=(n, n))
    a = (keep @ m + tr).tocsc()
    b = np.zeros(n, dtype=complex)
    b[0] = 1.0
    return _finish_state(spla.spsolve(a, b), d)


_SNAP_MAGIC = b"RHO1"
_SNAP_HEADER = struct.Struct("<4sId")


def dump_snapshot(path, rho, t):
    """Write ``rho`` with a 16-byte header (magic, dim as uint32, time as float64)."""
    rho = np.ascontiguousarray(rho, dtype="<c16")
    with open(path, "wb") as fh:
        fh.write(_SNAP_HEADER.pack(_SNAP_MAGIC, rho.shape[0], float(t)))
        fh.write(rho.tobytes())


def load_snapshot(path):
    """Inverse of :func:`dump_snapshot`; returns ``(rho, t)``."""
    with open(path, "rb") as fh:
        magic, dim, t = _SNAP_HEADER.unpack(fh.read(_SNAP_HEADER.size))
        if magic != _SNAP_MAGIC:
            raise ValueError(f"{path}: not a density-matrix snapshot")
        data = np.frombuffer(fh.read(), dtype="<c16")
    if data.size != dim * dim:
        raise ValueError(f"{path}: truncated snapshot")
    return data.reshape(dim, dim).copy(), t
