"""Subsystem entropies, FOTOC fidelities and steady-state fluctuations.

Entropies are in nats. The composite space is ordered photon (x) spin, as in
:mod:`dissipative_chaos.hilbert`.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .hilbert import HilbertSpec, composite_operators
from .lindblad import (DENSE_GUARD, LindbladGenerator, PositivityError, evolve, adjoint_evolve,
                       pure_density, steady_state, vectorize_generator)

ETA_FLOOR = 1e-12


def _dims(spec):
    if isinstance(spec, HilbertSpec):
        return spec.d_photon, spec.d_spin
    d_a, d_b = spec
    return int(d_a), int(d_b)


def partial_trace(rho, spec, keep="spin"):
    """Reduced density matrix of one factor.

    ``spec`` is a :class:`HilbertSpec` (then ``keep`` is ``"spin"`` or
    ``"photon"``) or a pair ``(d_a, d_b)`` for a generic bipartition (then
    ``keep`` is 0 for the first factor and 1 for the second).
    """
    d_a, d_b = _dims(spec)
    rho = np.asarray(rho)
    if rho.shape != (d_a * d_b, d_a * d_b):
        raise ValueError(f"rho has shape {rho.shape}, expected {(d_a * d_b,) * 2}")
    r4 = rho.reshape(d_a, d_b, d_a, d_b)
    if keep in ("photon", 0):
        return np.einsum("ikjk->ij", r4)
    if keep in ("spin", 1):
        return np.einsum("kikj->ij", r4)
    raise ValueError(f"unknown subsystem {keep!r}")


def von_neumann_entropy(rho, floor=ETA_FLOOR):
    """``-sum eta ln eta`` over eigenvalues above ``floor``."""
    rho = np.asarray(rho)
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-8:
        raise ValueError("density matrix is not Hermitian")
    eta = np.linalg.eigvalsh(rho)
    if eta.min() < -1e-6:
        raise PositivityError(f"eigenvalue {eta.min():.2e} below -1e-6")
    eta = eta[eta > floor]
    return float(-np.sum(eta * np.log(eta)))


def _slope(t, y, window):
    sel = (t >= window[0] - 1e-12) & (t <= window[1] + 1e-12)
    if sel.sum() < 2:
        return np.nan
    return float(np.polyfit(t[sel], y[sel], 1)[0])


def _tail_mean(t, y, fraction=0.2):
    t = np.asarray(t)
    sel = t >= t[-1] - fraction * (t[-1] - t[0]) - 1e-12
    return float(np.mean(np.asarray(y)[sel]))


@dataclass
class EntropySeries:
    """Ensemble-averaged subsystem entropies.

    ``s_slope`` is the least-squares slope of ``s_total`` on ``slope_window``;
    ``s_ss`` averages ``s_total`` over the final 20% of the time span.
    ``expectations`` holds per-member observer values with shape
    ``(members, times, observers)``, if any were requested.
    """

    times: np.ndarray
    s_spin: np.ndarray
    s_photon: np.ndarray
    s_total: np.ndarray = None
    slope_window: tuple = (0.0, 0.5)
    s_slope: float = np.nan
    s_ss: float = np.nan
    n_members: int = 1
    n_failed: int = 0
    members: np.ndarray = None
    expectations: np.ndarray = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        if self.s_total is None:
            self.s_total = np.asarray(self.s_spin) + np.asarray(self.s_photon)
        if len(self.times) > 1:
            self.s_slope = _slope(self.times, self.s_total, self.slope_window)
            self.s_ss = _tail_mean(self.times, self.s_total)

    def rows(self):
        return [(float(t), float(a), float(b), float(c))
                for t, a, b, c in zip(self.times, self.s_spin, self.s_photon, self.s_total)]


def default_time_grid(t_final, fine_dt=0.025, coarse_dt=0.5, fine_until=0.5):
    """Dense sampling of the slope window followed by a coarser grid."""
    fine = np.arange(0.0, min(fine_until, t_final) + 1e-12, fine_dt)
    coarse = np.arange(0.0, t_final + 1e-12, coarse_dt)
    return np.unique(np.round(np.r_[fine, coarse, t_final], 12))


def _as_density(state):
    state = np.asarray(state)
    return pure_density(state) if state.ndim == 1 else np.array(state, dtype=complex)


def _member_entropies(rho0, gen, spec, dt, times, method, observers):
    rec = []

    def cb(t, rho):
        rec.append((von_neumann_entropy(partial_trace(rho, spec, "spin")),
                    von_neumann_entropy(partial_trace(rho, spec, "photon"))))

    ev = evolve(rho0, gen, dt=dt, t_final=float(times[-1]), observers=observers, times=times,
                method=method, callback=cb)
    return ev.times, np.array(rec), ev.expectations


def vne_dynamics(ensemble, gen, spec, dt=1e-3, t_final=10.0, times=None, method="auto",
                 observers=(), slope_window=(0.0, 0.5), workers=1):
    """Ensemble-mean spin and photon entropies along the master-equation flow.

    ``ensemble`` is a sequence of pure states (vectors) or density matrices.
    Members whose evolution raises a ``RuntimeError`` are dropped and counted
    in ``n_failed``; the call fails only if every member fails.
    """
    members = [_as_density(s) for s in ensemble]
    if not members:
        raise ValueError("ensemble is empty")
    if times is None:
        times = default_time_grid(t_final)
    times = np.asarray(times, dtype=float)
    observers = list(observers)
    jobs = [(rho0, gen, spec, dt, times, method, observers) for rho0 in members]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            futures = [pool.submit(_member_entropies, *job) for job in jobs]
            results = []
            for fut in futures:
                try:
                    results.append(fut.result())
                except RuntimeError as exc:
                    results.append(exc)
    else:
        results = []
        for job in jobs:
            try:
                results.append(_member_entropies(*job))
            except RuntimeError as exc:
                results.append(exc)
    good = [r for r in results if not isinstance(r, Exception)]
    n_failed = len(results) - len(good)
    if not good:
        raise RuntimeError(f"all {n_failed} ensemble members failed: {results[0]}")
    t_out = good[0][0]
    ent = np.stack([g[1] for g in good])  # (members, times, 2)
    exps = np.array([g[2] for g in good]) if observers else None
    return EntropySeries(t_out, ent[..., 0].mean(axis=0), ent[..., 1].mean(axis=0),
                         slope_window=tuple(slope_window), n_members=len(good), n_failed=n_failed,
                         members=ent.sum(axis=2), expectations=exps)


@dataclass
class FotocResult:
    """Fidelity ``F(t)`` of the perturbation ``W = exp(i dphi G)`` and the variance of ``G``.

    ``one_minus_f`` is computed without cancellation; ``sigma_adjoint`` is the
    width ``sqrt(1 - F) / dphi`` implied by the adjoint path and
    ``sigma_series`` the directly computed ``Delta G(t)``.
    """

    times: np.ndarray
    f_values: np.ndarray
    delta_phi: float
    generator_label: str = "G"
    sigma_series: np.ndarray = None
    sigma_ss: float = np.nan
    one_minus_f: np.ndarray = None
    sigma_adjoint: np.ndarray = field(default=None)

    def relative_mismatch(self):
        """``|(1 - F)/dphi^2 - DeltaG^2| / DeltaG^2`` pointwise."""
        var = self.sigma_series ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.abs(self.one_minus_f / self.delta_phi ** 2 - var) / var


def _variance(rho, g, g2):
    m1 = np.real(np.sum(g.T * rho))
    m2 = np.real(np.sum(g2.T * rho))
    return max(m2 - m1 * m1, 0.0)


def fotoc(rho0, gen, G, delta_phi=1e-4, dt=1e-3, t_final=5.0, times=None, record_every=100,
          method="rk4", paths=("adjoint", "variance"), label="G"):
    """FOTOC of ``G`` from the state ``rho0``.

    The adjoint path evolves ``W - I`` in the Heisenberg picture and forms
    ``F = Tr(W(t)^dag rho0 W(t) rho0)``; the variance path evolves ``rho`` and
    records ``Delta G(t)``. For a pure ``rho0`` the two agree to order
    ``dphi^2`` via ``F = 1 - dphi^2 Delta G^2``.
    """
    g = np.asarray(G.toarray() if sp.issparse(G) else G, dtype=complex)
    if np.max(np.abs(g - g.conj().T)) > 1e-12 * max(1.0, np.abs(g).max()):
        raise ValueError("G must be Hermitian")
    norm = np.abs(np.linalg.eigvalsh(g)).max()
    if delta_phi * norm > 0.01:
        warnings.warn(f"delta_phi*|G| = {delta_phi * norm:.3g} is not small; "
                      "the variance relation is only perturbative", RuntimeWarning, stacklevel=2)
    rho0 = _as_density(rho0)
    w0 = sla.expm(1j * delta_phi * g) - np.eye(g.shape[0])
    t_out, f_vals, one_minus_f, sig = None, None, None, None
    if "adjoint" in paths:
        t_out, zs = adjoint_evolve(w0, gen, dt=dt, t_final=t_final, record_every=record_every,
                                   times=times, method="rk4" if method == "rk4" else "expm")
        purity = np.real(np.trace(rho0 @ rho0))
        r2 = rho0 @ rho0
        one_minus_f = np.array([
            (1 - purity) - 2 * np.real(np.sum(z.T * r2)) - np.real(np.trace(z.conj().T @ rho0 @ z @ rho0))
            for z in zs])
        f_vals = 1.0 - one_minus_f
    if "variance" in paths:
        g2 = g @ g
        rec = []
        ev = evolve(rho0, gen, dt=dt, t_final=t_final, record_every=record_every, times=times,
                    method=method, callback=lambda t, r: rec.append(_variance(r, g, g2)))
        t_out = ev.times
        sig = np.sqrt(np.array(rec))
    res = FotocResult(np.asarray(t_out), f_vals, delta_phi, label, sig,
                      _tail_mean(t_out, sig) if sig is not None and len(t_out) > 1 else np.nan,
                      one_minus_f)
    if one_minus_f is not None:
        res.sigma_adjoint = np.sqrt(np.clip(one_minus_f, 0, None)) / delta_phi
    return res


@dataclass
class SteadyStateVariance:
    """Standard deviation of an observable in the steady state, with the method used."""

    sigma: float
    mean: float
    method: str
    rho: np.ndarray = None
    drift: float = 0.0


def steady_state_variance(source, G, method="auto", rho0=None, t_final=200.0, dt=1e-2,
                          tol=1e-6):
    """``Delta G`` in the steady state of ``source`` (generator or superoperator).

    ``method="nullspace"`` extracts the zero mode of the vectorized generator;
    ``method="dynamics"`` propagates ``rho0`` to ``t_final`` and reports the
    change of ``Delta G`` over the last 20% of the run as ``drift``. The
    default picks the null space when the dense guard allows it.
    """
    g = np.asarray(G.toarray() if sp.issparse(G) else G, dtype=complex)
    g2 = g @ g
    is_gen = isinstance(source, LindbladGenerator)
    dim = source.dim if is_gen else int(round(np.sqrt(source.shape[0])))
    if method == "auto":
        method = "nullspace" if (not is_gen or dim <= DENSE_GUARD) else "dynamics"
    if method == "nullspace":
        m = vectorize_generator(source, sparse=dim > DENSE_GUARD) if is_gen else source
        rho = steady_state(m)
        drift = 0.0
    elif method == "dynamics":
        if not is_gen:
            raise ValueError("the dynamics method needs a LindbladGenerator")
        if rho0 is None:
            raise ValueError("the dynamics method needs an initial state rho0")
        sig = []
        ev = evolve(_as_density(rho0), source, dt=dt, t_final=t_final,
                    times=np.linspace(0.8 * t_final, t_final, 5), snapshots=True, method="auto",
                    callback=lambda t, r: sig.append(np.sqrt(_variance(r, g, g2))))
        rho = ev.states[-1]
        drift = float(np.ptp(sig))
        if drift > tol:
            warnings.warn(f"steady-state variance drifts by {drift:.2e} over the tail; "
                          "increase t_final", RuntimeWarning, stacklevel=2)
    else:
        raise ValueError(f"unknown method {method!r}")
    mean = float(np.real(np.sum(g.T * rho)))
    return SteadyStateVariance(float(np.sqrt(_variance(rho, g, g2))), mean, method, rho, drift)


def adm_observables(spec):
    """Dense ``Sz``, ``Sz^2``, ``n`` and ``n^2`` for observer lists."""
    o = composite_operators(spec, sparse=True)
    return {"sz": o["sz"], "sz2": (o["sz"] @ o["sz"]).tocsr(), "n": o["n"], "n2": (o["n"] @ o["n"]).tocsr()}


def cutoff_drift(params, spec, theta=1.0, phi=0.5, t_final=10.0, n_points=11):
    """Largest change of ``<Sz>/S`` over ``[0, t_final]`` when the photon cutoff is doubled.

    Starts from the spin coherent state at ``(theta, phi)`` with the photon in
    vacuum. A value below ``1e-4`` means ``spec.photon_cutoff`` is converged
    for this parameter point.
    """
    from .hilbert import coherent_ensemble
    from .lindblad import adm_generator

    times = np.linspace(0.0, t_final, n_points)
    curves = []
    for n_max in (spec.photon_cutoff, 2 * spec.photon_cutoff):
        s = HilbertSpec(spec.spin_s, n_max)
        rho0 = pure_density(coherent_ensemble(s, [theta], [phi])[0])
        ev = evolve(rho0, adm_generator(params, s), t_final=t_final, times=times,
                    observers=[adm_observables(s)["sz"]], method="expm")
        curves.append(np.real(np.asarray(ev.expectations)[:, 0]) / spec.spin_s)
    return float(np.max(np.abs(curves[0] - curves[1])))


def ensemble_sigma(series, first=0, second=1):
    """Ensemble mean of ``sqrt(<G^2> - <G>^2)`` from observer columns ``first`` (G) and ``second`` (G^2)."""
    e = np.real(series.expectations)
    var = np.clip(e[..., second] - e[..., first] ** 2, 0.0, None)
    return np.sqrt(var).mean(axis=0)


def vne_slope(times, values, window=(0.0, 0.5)):
    """Least-squares slope of ``values`` on the time window."""
    return _slope(np.asarray(times, dtype=float), np.asarray(values, dtype=float), window)


@dataclass
class QuantumScanResult:
    """Steady-state entropy and fluctuations on a ``lambda_- x lambda_+`` grid."""

    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    s_ss: np.ndarray
    sigma_sz_ss: np.ndarray
    sigma_n_ss: np.ndarray
    n_members: np.ndarray

    def rows(self):
        for i, lm in enumerate(self.lambda_minus):
            for j, lp in enumerate(self.lambda_plus):
                yield (float(lm), float(lp), float(self.s_ss[i, j]), float(self.sigma_sz_ss[i, j]),
                       float(self.sigma_n_ss[i, j]), int(self.n_members[i, j]))


def quantum_scan(lambda_minus, lambda_plus, base, spec, ensemble, t_final=40.0, record_dt=2.0,
                 workers=1, progress=None):
    """Tail-averaged ``S_ss``, ``(Delta S_z)_ss`` and ``(Delta n)_ss`` per grid cell.

    ``base`` supplies ``omega``, ``omega0`` and ``kappa``; ``ensemble`` is a
    list of initial states shared by every cell.
    """
    from dataclasses import replace
    from .lindblad import adm_generator

    lm = np.atleast_1d(np.asarray(lambda_minus, float))
    lp = np.atleast_1d(np.asarray(lambda_plus, float))
    shape = (lm.size, lp.size)
    s_ss, sz, nn, cnt = (np.full(shape, np.nan) for _ in range(4))
    ops = adm_observables(spec)
    obs = [ops["sz"], ops["sz2"], ops["n"], ops["n2"]]
    times = np.arange(0.0, t_final + 1e-9, record_dt)
    for i, a in enumerate(lm):
        for j, b in enumerate(lp):
            gen = adm_generator(replace(base, lambda_minus=a, lambda_plus=b), spec)
            es = vne_dynamics(ensemble, gen, spec, times=times, method="auto", observers=obs,
                              workers=workers)
            s_ss[i, j] = es.s_ss
            sz[i, j] = _tail_mean(es.times, ensemble_sigma(es, 0, 1))
            nn[i, j] = _tail_mean(es.times, ensemble_sigma(es, 2, 3))
            cnt[i, j] = es.n_members
            if progress is not None:
                progress(i, j, es)
    return QuantumScanResult(lm, lp, s_ss, sz, nn, cnt.astype(int))
