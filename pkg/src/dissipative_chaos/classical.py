"""Mean-field dynamics of the open anisotropic Dicke model and Lyapunov exponents.

The phase-space point is stored as a real vector ``(x, p, sx, sy, sz)`` with
the scaled field ``alpha = (x + i p) / sqrt(2)`` and a unit Bloch vector. All
functions broadcast over leading batch axes, so a whole ensemble (or a whole
parameter grid) is integrated in one vectorized RK4 loop.

Equations of motion (field amplitude decays at ``kappa``)::

    d alpha/dt = -(kappa + i omega) alpha - i (lambda_- s_- + lambda_+ s_+)
    d s_+/dt   = i omega0 s_+ - i s_z (lambda_- alpha* + lambda_+ alpha)
    d s_z/dt   = -(i/2) [lambda_- (alpha s_+ - c.c.) + lambda_+ (alpha* s_+ - c.c.)]

with ``s_+- = sx +- i sy``.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
import math

import numpy as np

SQRT2 = math.sqrt(2.0)


class IntegrationError(RuntimeError):
    """Raised when a trajectory leaves the Bloch sphere or becomes non-finite."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class AdmParams:
    omega: float = 1.0
    omega0: float = 1.0
    lambda_minus: float = 0.0
    lambda_plus: float = 0.0
    kappa: float = 0.0

    def __post_init__(self):
        vals = [np.asarray(getattr(self, f)) for f in ("omega", "omega0", "lambda_minus", "lambda_plus", "kappa")]
        if not all(np.all(np.isfinite(v)) for v in vals):
            raise ValueError("AdmParams entries must be finite")
        if np.any(vals[-1] < 0):
            raise ValueError("kappa must be non-negative")

    @classmethod
    def dicke(cls, lam, kappa=0.0, omega=1.0, omega0=1.0):
        """Dicke limit ``lambda_- = lambda_+ = lam``."""
        return cls(omega=omega, omega0=omega0, lambda_minus=lam, lambda_plus=lam, kappa=kappa)


@dataclass(frozen=True)
class ClassicalState:
    """Scaled photon quadratures and a unit Bloch vector."""

    x: float
    p: float
    sx: float
    sy: float
    sz: float

    @classmethod
    def from_angles(cls, theta, phi, alpha=0j):
        alpha = complex(alpha)
        return cls(SQRT2 * alpha.real, SQRT2 * alpha.imag,
                   math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta))

    @classmethod
    def from_array(cls, arr):
        return cls(*map(float, arr))

    def as_array(self):
        return np.array([self.x, self.p, self.sx, self.sy, self.sz])

    @property
    def alpha(self):
        return complex(self.x, self.p) / SQRT2

    @property
    def photon_number(self):
        return abs(self.alpha) ** 2


def _unpack(params):
    # array-valued fields must match the batch shape of the states
    return tuple(np.asarray(getattr(params, f), dtype=float)
                 for f in ("omega", "omega0", "lambda_minus", "lambda_plus", "kappa"))


def eom_rhs(state, params):
    """Time derivative of ``(x, p, sx, sy, sz)``; broadcasts over leading axes."""
    state = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(state)):
        raise FloatingPointError("non-finite classical state")
    w, w0, lm, lp, k = _unpack(params)
    x, p, sx, sy, sz = np.moveaxis(state, -1, 0)
    u = (lm + lp) * x / SQRT2
    v = (lp - lm) * p / SQRT2
    out = np.empty(np.broadcast_shapes(state.shape, np.shape(u) + (5,)))
    out[..., 0] = -k * x + w * p + SQRT2 * (lp - lm) * sy
    out[..., 1] = -k * p - w * x - SQRT2 * (lm + lp) * sx
    out[..., 2] = -w0 * sy + sz * v
    out[..., 3] = w0 * sx - sz * u
    out[..., 4] = u * sy - v * sx
    return out


def jacobian(state, params):
    """Analytic 5x5 Jacobian of :func:`eom_rhs` (batched: ``(..., 5, 5)``)."""
    state = np.asarray(state, dtype=float)
    w, w0, lm, lp, k = _unpack(params)
    x, p, sx, sy, sz = np.moveaxis(state, -1, 0)
    cp, cm = (lm + lp) / SQRT2, (lp - lm) / SQRT2
    u, v = cp * x, cm * p
    shape = np.broadcast_shapes(x.shape, np.shape(u))
    J = np.zeros(shape + (5, 5))
    J[..., 0, 0] = -k
    J[..., 0, 1] = w
    J[..., 0, 3] = 2 * cm
    J[..., 1, 0] = -w
    J[..., 1, 1] = -k
    J[..., 1, 2] = -2 * cp
    J[..., 2, 1] = sz * cm
    J[..., 2, 3] = -w0
    J[..., 2, 4] = v
    J[..., 3, 0] = -sz * cp
    J[..., 3, 2] = w0
    J[..., 3, 4] = -u
    J[..., 4, 0] = cp * sy
    J[..., 4, 1] = -cm * sx
    J[..., 4, 2] = -v
    J[..., 4, 3] = u
    return J


def tangent_rhs(state, delta, params):
    """Jacobian-vector product ``J(state) @ delta`` without forming ``J``."""
    w, w0, lm, lp, k = _unpack(params)
    x, p, sx, sy, sz = np.moveaxis(state, -1, 0)
    dx, dp, dsx, dsy, dsz = np.moveaxis(delta, -1, 0)
    cp, cm = (lm + lp) / SQRT2, (lp - lm) / SQRT2
    u, v = cp * x, cm * p
    du, dv = cp * dx, cm * dp
    out = np.empty(np.broadcast_shapes(delta.shape, np.shape(u) + (5,)))
    out[..., 0] = -k * dx + w * dp + 2 * cm * dsy
    out[..., 1] = -k * dp - w * dx - 2 * cp * dsx
    out[..., 2] = -w0 * dsy + dsz * v + sz * dv
    out[..., 3] = w0 * dsx - dsz * u - sz * du
    out[..., 4] = du * sy + u * dsy - dv * sx - v * dsx
    return out


def bloch_norm_defect(state):
    s = np.asarray(state)[..., 2:]
    return np.abs(np.sum(s * s, axis=-1) - 1.0)


def rk4_step(f, y, dt):
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    max_norm_drift: float


def integrate(state0, params, dt=1e-3, t_final=10.0, record_every=1, max_drift=1e-6):
    """Fixed-step RK4 trajectory sampled every ``record_every`` steps.

    Raises :class:`IntegrationError` (carrying the partial trajectory) if the
    Bloch norm drifts by more than ``max_drift`` or the state blows up.
    """
    if dt <= 0 or t_final <= 0:
        raise ValueError("dt and t_final must be positive")
    y = np.array(state0.as_array() if isinstance(state0, ClassicalState) else state0, dtype=float)
    n_steps = int(round(t_final / dt))
    f = lambda z: eom_rhs(z, params)
    times, states = [0.0], [y.copy()]
    drift = float(np.max(bloch_norm_defect(y)))
    for i in range(1, n_steps + 1):
        y = rk4_step(f, y, dt)
        if not np.all(np.isfinite(y)):
            raise IntegrationError("trajectory became non-finite",
                                   Trajectory(np.array(times), np.array(states), drift))
        drift = max(drift, float(np.max(bloch_norm_defect(y))))
        if drift > max_drift:
            raise IntegrationError(f"Bloch norm drift {drift:.2e} exceeds {max_drift:.1e}",
                                   Trajectory(np.array(times), np.array(states), drift))
        if i % record_every == 0:
            times.append(i * dt)
            states.append(y.copy())
    return Trajectory(np.array(times), np.array(states), drift)


def step_halving_error(state0, params, dt=1e-3, t_check=1.0):
    """Max deviation between runs with ``dt`` and ``dt/2`` at ``t_check``."""
    a = integrate(state0, params, dt, t_check, record_every=int(round(t_check / dt))).states[-1]
    b = integrate(state0, params, dt / 2, t_check, record_every=int(round(2 * t_check / dt))).states[-1]
    return float(np.max(np.abs(a - b)))


@dataclass
class LyapunovSeries:
    """Finite-time exponents ``lambda_t`` sampled at renormalization times.

    ``lambda_t`` is the ensemble mean; ``members`` keeps per-member values
    (shape ``(n_times, n_members)``) when available. Negative values are kept
    as computed; use :meth:`display_ss` for the clamped map value.
    """

    times: np.ndarray
    lambda_t: np.ndarray
    lambda_ss: float
    ensemble_size: int
    members: np.ndarray = None
    n_failed: int = 0
    window: tuple = None
    lambda_bar: float = None

    def display_ss(self):
        return max(self.lambda_ss, 0.0)

    def window_average(self, t_lo, t_hi):
        mask = (self.times >= t_lo) & (self.times <= t_hi)
        return float(np.mean(self.lambda_t[mask]))


def benettin(rhs, jvp, x0, dt, t_final, renorm_every=10, tangent0=None, rng=None,
             tail_fraction=0.2, keep_series=True, stop_on_failure=True):
    """Largest Lyapunov exponent by tangent-vector propagation.

    ``rhs(x)`` and ``jvp(x, d)`` act on arrays of shape ``(..., n)``; the batch
    axes are independent trajectories. Returns ``(times, lam, lam_tail,
    failed)`` where ``lam[k] = sum(log growth) / times[k]`` and ``lam_tail``
    averages ``lam`` over the last ``tail_fraction`` of the run.
    """
    x = np.array(x0, dtype=float)
    n = x.shape[-1]
    if tangent0 is None:
        rng = np.random.default_rng(rng)
        tangent0 = rng.standard_normal(x.shape)
    d = np.array(np.broadcast_to(tangent0, x.shape), dtype=float)
    d /= np.linalg.norm(d, axis=-1, keepdims=True)
    n_steps = int(round(t_final / dt))
    n_renorm = n_steps // renorm_every
    if n_renorm < 1:
        raise ValueError("t_final too short for a single renormalization")
    batch = x.shape[:-1]
    log_sum = np.zeros(batch)
    failed = np.zeros(batch, dtype=bool)
    t_tail = (1.0 - tail_fraction) * n_renorm * renorm_every * dt
    tail_acc = np.zeros(batch)
    tail_cnt = 0
    times = np.arange(1, n_renorm + 1) * renorm_every * dt
    series = np.empty((n_renorm,) + batch) if keep_series else None

    def f(y):
        xs, ds = y[..., :n], y[..., n:]
        return np.concatenate([rhs(xs), jvp(xs, ds)], axis=-1)

    y = np.concatenate([x, d], axis=-1)
    for k in range(n_renorm):
        for _ in range(renorm_every):
            y = rk4_step(f, y, dt)
        norms = np.linalg.norm(y[..., n:], axis=-1)
        bad = ~np.isfinite(norms) | ~np.all(np.isfinite(y[..., :n]), axis=-1)
        if np.any(bad):
            if stop_on_failure and not batch:
                raise IntegrationError(
                    f"trajectory escaped at t={times[k]:.3f}",
                    (times[:k], series[:k] if keep_series else None))
            failed |= bad
            y[bad] = 0.0
            y[bad, n + 0] = 1.0
            norms = np.where(bad, 1.0, norms)
        y[..., n:] /= norms[..., None]
        log_sum += np.log(norms)
        lam = log_sum / times[k]
        if keep_series:
            series[k] = lam
        if times[k] >= t_tail - 1e-12:
            tail_acc += lam
            tail_cnt += 1
    lam_tail = tail_acc / max(tail_cnt, 1)
    lam_tail = np.where(failed, np.nan, lam_tail)
    if keep_series and np.any(failed):
        series[:, failed] = np.nan
    return times, series, lam_tail, failed


def lyapunov(state0, params, dt=1e-3, t_final=200.0, renorm_every=10, tangent0=None, seed=0,
             tail_fraction=0.2):
    """Largest Lyapunov exponent of a single trajectory (or a batch).

    For a batch (leading axes on ``state0``) the returned series is the mean
    over members and ``members`` holds the individual curves.
    """
    x0 = state0.as_array() if isinstance(state0, ClassicalState) else np.asarray(state0, float)
    if int(round(t_final / dt)) // renorm_every < 100:
        raise ValueError("need at least 100 renormalizations; increase t_final or reduce renorm_every")
    times, series, tail, failed = benettin(
        lambda z: eom_rhs(z, params), lambda z, d: tangent_rhs(z, d, params),
        x0, dt, t_final, renorm_every, tangent0, seed, tail_fraction)
    if x0.ndim == 1:
        return LyapunovSeries(times, series, float(tail), 1)
    ok = ~failed.reshape(-1)
    mem = series.reshape(series.shape[0], -1)[:, ok]
    return LyapunovSeries(times, mem.mean(axis=1), float(np.mean(tail.reshape(-1)[ok])), int(ok.sum()),
                          members=mem, n_failed=int((~ok).sum()))


def bloch_uniform_ensemble(n_members=20, seed=0, alpha=0j):
    """Points uniform on the Bloch sphere with a fixed photon field (default vacuum).

    Returns ``(states, thetas, phis)``; ``states`` has shape ``(n_members, 5)``.
    """
    rng = np.random.default_rng(seed)
    sz = rng.uniform(-1.0, 1.0, n_members)
    phi = rng.uniform(0.0, 2 * math.pi, n_members)
    theta = np.arccos(sz)
    st = np.sin(theta)
    states = np.column_stack([
        np.full(n_members, SQRT2 * complex(alpha).real), np.full(n_members, SQRT2 * complex(alpha).imag),
        st * np.cos(phi), st * np.sin(phi), sz])
    return states, theta, phi


def finite_time_lyapunov_ensemble(params, ensemble, dt=1e-3, t_final=30.0, window=(0.0, 0.5),
                                  renorm_every=10, seed=0, tail_fraction=0.2):
    """Ensemble-averaged finite-time exponent ``Lambda_t`` and its window average.

    ``ensemble`` is an array ``(n_members, 5)`` (see :func:`bloch_uniform_ensemble`).
    Members whose trajectories escape are excluded and counted in ``n_failed``.
    """
    ensemble = np.atleast_2d(np.asarray(ensemble, dtype=float))
    if ensemble.shape[0] == 0:
        raise ValueError("ensemble is empty")
    times, series, tail, failed = benettin(
        lambda z: eom_rhs(z, params), lambda z, d: tangent_rhs(z, d, params),
        ensemble, dt, t_final, renorm_every, None, seed, tail_fraction)
    ok = ~failed
    if not np.any(ok):
        raise IntegrationError("every ensemble member failed")
    mean = series[:, ok].mean(axis=1)
    res = LyapunovSeries(times, mean, float(np.mean(tail[ok])), int(ok.sum()),
                         members=series[:, ok], n_failed=int(failed.sum()), window=tuple(window))
    res.lambda_bar = res.window_average(*window)
    return res


@dataclass
class ScanConfig:
    ensemble_size: int = 20
    dt: float = 1e-3
    t_final: float = 200.0
    renorm_every: int = 10
    tail_fraction: float = 0.2
    seed: int = 0
    workers: int = 1
    chunk_cells: int = 64


@dataclass
class ScanResult:
    lambda_minus: np.ndarray
    lambda_plus: np.ndarray
    lambda_ss: np.ndarray  # (n_minus, n_plus), raw values
    n_ensemble: np.ndarray
    config: ScanConfig = field(default_factory=ScanConfig)

    def display(self):
        return np.clip(self.lambda_ss, 0.0, None)

    def rows(self):
        for i, lm in enumerate(self.lambda_minus):
            for j, lp in enumerate(self.lambda_plus):
                yield float(lm), float(lp), float(self.lambda_ss[i, j]), int(self.n_ensemble[i, j])


def _scan_chunk(args):
    lms, lps, base, cfg = args
    ens, _, _ = bloch_uniform_ensemble(cfg.ensemble_size, cfg.seed)
    tangent = np.random.default_rng(cfg.seed + 1).standard_normal(ens.shape)
    n_cells = len(lms)
    shape = (n_cells, cfg.ensemble_size)
    p = replace(base,
                omega=np.full(shape, base.omega), omega0=np.full(shape, base.omega0),
                kappa=np.full(shape, base.kappa),
                lambda_minus=np.repeat(np.asarray(lms, float)[:, None], cfg.ensemble_size, axis=1),
                lambda_plus=np.repeat(np.asarray(lps, float)[:, None], cfg.ensemble_size, axis=1))
    x0 = np.broadcast_to(ens, shape + (5,)).copy()
    d0 = np.broadcast_to(tangent, shape + (5,)).copy()
    _, _, tail, failed = benettin(
        lambda z: eom_rhs(z, p), lambda z, d: tangent_rhs(z, d, p),
        x0, cfg.dt, cfg.t_final, cfg.renorm_every, d0, None, cfg.tail_fraction, keep_series=False)
    ok = ~failed
    lam = np.array([np.mean(tail[c, ok[c]]) if ok[c].any() else np.nan for c in range(n_cells)])
    return lam, ok.sum(axis=1)


def phase_scan(lambda_minus, lambda_plus, base=None, config=None):
    """Ensemble-averaged ``Lambda_ss`` on the ``lambda_- x lambda_+`` lattice.

    Every cell uses the same seeded initial ensemble and tangent vectors, and
    cells are evaluated elementwise, so the result does not depend on the
    chunking or on the number of worker processes.
    """
    base = base or AdmParams()
    cfg = config or ScanConfig()
    lm = np.atleast_1d(np.asarray(lambda_minus, float))
    lp = np.atleast_1d(np.asarray(lambda_plus, float))
    if lm.size == 0 or lp.size == 0:
        raise ValueError("empty scan grid")
    LM, LP = np.meshgrid(lm, lp, indexing="ij")
    flat_m, flat_p = LM.ravel(), LP.ravel()
    chunks = [(flat_m[i:i + cfg.chunk_cells], flat_p[i:i + cfg.chunk_cells], base, cfg)
              for i in range(0, flat_m.size, cfg.chunk_cells)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(_scan_chunk, chunks))
    else:
        parts = [_scan_chunk(c) for c in chunks]
    lam = np.concatenate([q[0] for q in parts]).reshape(LM.shape)
    cnt = np.concatenate([q[1] for q in parts]).reshape(LM.shape)
    return ScanResult(lm, lp, lam, cnt, cfg)
