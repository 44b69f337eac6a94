"""Operator algebra for a collective spin coupled to one truncated bosonic mode.

Basis convention used throughout the package: the composite space is
``photon (x) spin`` with the Fock index major, i.e. the composite index is
``k = n * d_spin + i`` where ``n`` is the photon number and ``i`` labels
``m = S, S-1, ..., -S``.
"""

from dataclasses import dataclass
import math
import warnings

import numpy as np
import scipy.sparse as sp
from scipy.special import gammaln


class TruncationWarning(UserWarning):
    """A coherent state has non-negligible weight beyond the Fock cutoff."""


def _check_spin(spin_s):
    twice = 2 * spin_s
    if not np.isfinite(twice) or twice < 1 or abs(twice - round(twice)) > 1e-12:
        raise ValueError(f"spin_s must be a positive multiple of 1/2, got {spin_s!r}")
    return round(twice) / 2


@dataclass(frozen=True)
class HilbertSpec:
    """Truncated spin (x) photon space."""

    spin_s: float
    photon_cutoff: int = 20

    def __post_init__(self):
        object.__setattr__(self, "spin_s", _check_spin(self.spin_s))
        if int(self.photon_cutoff) != self.photon_cutoff or self.photon_cutoff < 1:
            raise ValueError(f"photon_cutoff must be an integer >= 1, got {self.photon_cutoff!r}")
        object.__setattr__(self, "photon_cutoff", int(self.photon_cutoff))

    @property
    def d_spin(self):
        return int(round(2 * self.spin_s)) + 1

    @property
    def d_photon(self):
        return self.photon_cutoff + 1

    @property
    def d_total(self):
        return self.d_spin * self.d_photon

    def index(self, n, i):
        """Composite index of Fock state ``n`` and spin basis state ``i``."""
        return n * self.d_spin + i


def _as(matrix, sparse):
    return sp.csr_matrix(matrix) if sparse else np.asarray(matrix.toarray() if sp.issparse(matrix) else matrix)


def spin_operators(spin_s, sparse=False):
    """Return ``(Sz, S+, S-)`` in the ``|S, m>`` basis ordered ``m = S..-S``."""
    s = _check_spin(spin_s)
    m = s - np.arange(int(round(2 * s)) + 1)
    sz = np.diag(m).astype(complex)
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1)); row i-1 holds m+1 for column i
    amp = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    splus = np.diag(amp, k=1).astype(complex)
    sminus = splus.conj().T.copy()
    return _as(sz, sparse), _as(splus, sparse), _as(sminus, sparse)


def spin_xyz(spin_s, sparse=False):
    """Cartesian components ``(Sx, Sy, Sz)``."""
    sz, sp_, sm = spin_operators(spin_s, sparse=sparse)
    return 0.5 * (sp_ + sm), -0.5j * (sp_ - sm), sz


def boson_operators(n_max, sparse=False):
    """Annihilation and creation operators truncated to Fock states ``0..n_max``."""
    if int(n_max) != n_max or n_max < 1:
        raise ValueError(f"n_max must be an integer >= 1, got {n_max!r}")
    a = np.diag(np.sqrt(np.arange(1, int(n_max) + 1)), k=1).astype(complex)
    return _as(a, sparse), _as(a.conj().T.copy(), sparse)


def tensor(A, B):
    """Kronecker product ``A (x) B``; call as ``tensor(photon_op, spin_op)``."""
    for name, m in (("A", A), ("B", B)):
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"{name} must be a square matrix, got shape {m.shape}")
    if sp.issparse(A) or sp.issparse(B):
        return sp.kron(A, B, format="csr")
    return np.kron(A, B)


def composite_operators(spec, sparse=True):
    """Photon and spin operators lifted to the composite space.

    Returns a dict with keys ``a, adag, n, sz, splus, sminus, sx, sy`` and the
    identity ``eye``.
    """
    a, adag = boson_operators(spec.photon_cutoff, sparse=True)
    sz, splus, sminus = spin_operators(spec.spin_s, sparse=True)
    eye_p = sp.identity(spec.d_photon, format="csr", dtype=complex)
    eye_s = sp.identity(spec.d_spin, format="csr", dtype=complex)
    ops = {
        "a": tensor(a, eye_s),
        "adag": tensor(adag, eye_s),
        "n": tensor(adag @ a, eye_s),
        "sz": tensor(eye_p, sz),
        "splus": tensor(eye_p, splus),
        "sminus": tensor(eye_p, sminus),
        "eye": sp.identity(spec.d_total, format="csr", dtype=complex),
    }
    ops["sx"] = 0.5 * (ops["splus"] + ops["sminus"])
    ops["sy"] = -0.5j * (ops["splus"] - ops["sminus"])
    if not sparse:
        ops = {k: v.toarray() for k, v in ops.items()}
    return ops


def spin_coherent_state(theta, phi, spin_s):
    """``exp(-i phi Sz) exp(-i theta Sy) |S, S>`` as a normalized vector.

    Built from the closed-form Wigner small-d amplitudes, so that
    ``<Sz> = S cos(theta)`` and ``<Sx> + i<Sy> = S sin(theta) e^{i phi}``.
    """
    if not 0.0 <= theta <= math.pi + 1e-12:
        raise ValueError(f"theta must lie in [0, pi], got {theta!r}")
    s = _check_spin(spin_s)
    two_s = int(round(2 * s))
    k = np.arange(two_s + 1)  # k = S - m
    m = s - k
    log_binom = 0.5 * (gammaln(two_s + 1) - gammaln(k + 1) - gammaln(two_s - k + 1))
    c, sn = math.cos(theta / 2), math.sin(theta / 2)
    with np.errstate(divide="ignore"):
        mag = np.exp(log_binom) * np.power(c, two_s - k) * np.power(sn, k)
    psi = mag * np.exp(-1j * phi * m)
    return psi / np.linalg.norm(psi)


def photon_coherent_state(alpha, n_max, return_info=False, tol=1e-8):
    """Truncated Glauber coherent state, renormalized on ``0..n_max``.

    With ``return_info=True`` also returns the Poisson weight lost beyond the
    cutoff. A :class:`TruncationWarning` is emitted when that weight exceeds
    ``tol``.
    """
    if int(n_max) != n_max or n_max < 1:
        raise ValueError(f"n_max must be an integer >= 1, got {n_max!r}")
    n = np.arange(int(n_max) + 1)
    alpha = complex(alpha)
    if alpha == 0:
        psi = np.zeros(n.size, dtype=complex)
        psi[0] = 1.0
        lost = 0.0
    else:
        logmag = n * math.log(abs(alpha)) - 0.5 * gammaln(n + 1) - 0.5 * abs(alpha) ** 2
        psi = np.exp(logmag) * np.exp(1j * n * np.angle(alpha))
        lost = max(0.0, 1.0 - float(np.sum(np.abs(psi) ** 2)))
        psi = psi / np.linalg.norm(psi)
    if lost > tol:
        warnings.warn(
            f"coherent state |alpha|^2={abs(alpha)**2:.3g} loses weight {lost:.2e} beyond n_max={n_max}",
            TruncationWarning,
            stacklevel=2,
        )
    if return_info:
        return psi, lost
    return psi


def product_state(photon_vec, spin_vec):
    """Composite pure state in photon (x) spin ordering."""
    return np.kron(photon_vec, spin_vec)


def coherent_ensemble(spec, thetas, phis, alpha=0j):
    """Pure product states ``|alpha> (x) |theta, phi>`` for each Bloch-sphere point."""
    field_vec = photon_coherent_state(alpha, spec.photon_cutoff)
    return [product_state(field_vec, spin_coherent_state(t, p, spec.spin_s)) for t, p in zip(thetas, phis)]
