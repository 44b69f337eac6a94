"""Nearest-neighbour spacing statistics of complex spectra.

Spacings are Euclidean distances in the complex plane, unfolded by the local
mean spacing of the ``k`` nearest neighbours (or by the global mean), and
compared against the 2d-Poisson law and a sampled Ginibre reference.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats
from scipy.spatial import cKDTree


class InsufficientStatisticsError(ValueError):
    pass


REAL_AXIS_TOL = 1e-10


@dataclass
class ComplexSpectrum:
    """Eigenvalues with a config echo.

    ``conjugate_pairs`` marks spectra closed under complex conjugation (as for
    any Liouvillian); only those are halved by :meth:`filtered`.
    """

    eigenvalues: np.ndarray
    provenance: dict = field(default_factory=dict)
    symmetry_filtered: bool = False
    conjugate_pairs: bool = True

    def __post_init__(self):
        self.eigenvalues = np.asarray(self.eigenvalues, dtype=complex).ravel()
        if not np.all(np.isfinite(self.eigenvalues)):
            raise ValueError("spectrum contains non-finite entries")
        if self.symmetry_filtered and np.any(self.eigenvalues.imag < -REAL_AXIS_TOL):
            raise ValueError("filtered spectrum has eigenvalues below the real axis")

    def __len__(self):
        return self.eigenvalues.size

    def filtered(self):
        """Upper half-plane plus the real axis, dropping conjugate partners."""
        if self.symmetry_filtered or not self.conjugate_pairs:
            return self
        z = self.eigenvalues
        keep = z.imag >= -REAL_AXIS_TOL
        z = z[keep]
        z = np.where(np.abs(z.imag) <= REAL_AXIS_TOL, z.real + 0j, z)
        return ComplexSpectrum(z, dict(self.provenance), True, True)

    def transformed(self, scale, shift=0.0):
        return ComplexSpectrum(scale * self.eigenvalues + shift, dict(self.provenance),
                               self.symmetry_filtered, self.conjugate_pairs)


def _unfold(z, unfolding="knn", k=10, edge_fraction=0.05):
    """Unfolded spacings of one spectrum and the number of exact degeneracies."""
    pts = np.column_stack([z.real, z.imag])
    n = len(pts)
    if unfolding == "knn":
        if n <= k + 1:
            raise InsufficientStatisticsError(f"need more than {k + 1} eigenvalues, got {n}")
        dist, idx = cKDTree(pts).query(pts, k=k + 1)
        nn = dist[:, 1]
        local = nn[idx[:, 1:]].mean(axis=1)
        radius = dist[:, k]
    elif unfolding == "global":
        dist, _ = cKDTree(pts).query(pts, k=min(n, k + 1))
        nn = dist[:, 1]
        local = np.full(n, nn.mean())
        radius = dist[:, -1]
    else:
        raise ValueError(f"unknown unfolding {unfolding!r}")
    keep = np.ones(n, dtype=bool)
    if edge_fraction > 0:
        keep = radius <= np.quantile(radius, 1 - edge_fraction)
    with np.errstate(invalid="ignore", divide="ignore"):
        s = np.where(local > 0, nn / local, 0.0)
    return s[keep], int(np.sum(nn[keep] == 0))


def poisson2d_pdf(s):
    """``(pi/2) s exp(-pi s^2 / 4)``, the spacing law of uncorrelated planar points."""
    s = np.asarray(s, dtype=float)
    return np.where(s >= 0, 0.5 * np.pi * s * np.exp(-0.25 * np.pi * s * s), 0.0)


def poisson2d_cdf(s):
    s = np.asarray(s, dtype=float)
    return np.where(s >= 0, -np.expm1(-0.25 * np.pi * s * s), 0.0)


@dataclass
class SpacingDistribution:
    """Unfolded spacings (mean 1), a normalized histogram and KS scores."""

    spacings: np.ndarray
    bin_edges: np.ndarray = None
    densities: np.ndarray = None
    ks_vs_poisson2d: float = np.nan
    ks_vs_ginibre: float = np.nan
    n_degenerate: int = 0
    unfolding: str = "knn"

    def rows(self, reference=None):
        """``(bin centre, density, 2d-Poisson density[, reference density])`` rows."""
        centres = 0.5 * (self.bin_edges[1:] + self.bin_edges[:-1])
        cols = [centres, self.densities, poisson2d_pdf(centres)]
        if reference is not None:
            cols.append(np.histogram(reference.spacings, bins=self.bin_edges, density=True)[0])
        return list(zip(*[c.tolist() for c in cols]))


def nn_spacings(spectra, unfolding="knn", k=10, edge_fraction=0.05, bins=None, min_count=200,
                reference=None):
    """Pooled unfolded spacings of one spectrum or a list of spectra.

    Each spectrum is symmetry-filtered and unfolded on its own before pooling.
    Exactly degenerate eigenvalues give spacing 0 and are counted in
    ``n_degenerate``. ``reference`` (a :class:`GinibreReference`) fills
    ``ks_vs_ginibre``.
    """
    if isinstance(spectra, ComplexSpectrum):
        spectra = [spectra]
    parts, n_deg = [], 0
    for spec in spectra:
        z = spec.filtered().eigenvalues
        s, deg = _unfold(z, unfolding, k, edge_fraction)
        parts.append(s)
        n_deg += deg
    s = np.concatenate(parts) if parts else np.empty(0)
    if s.size < min_count:
        raise InsufficientStatisticsError(f"{s.size} spacings < {min_count}; aggregate more realizations")
    s = s / s.mean()
    if bins is None:
        bins = np.linspace(0.0, s.max() * (1 + 1e-9), 41)
    dens, edges = np.histogram(s, bins=bins, density=True)
    out = SpacingDistribution(s, edges, dens, ks_vs_poisson2d=float(stats.kstest(s, poisson2d_cdf).statistic),
                              n_degenerate=n_deg, unfolding=unfolding)
    if reference is not None:
        out.ks_vs_ginibre = reference.ks(s)
    return out


@dataclass
class GinibreReference:
    """Sampled bulk spacings of complex Ginibre matrices with an empirical CDF."""

    spacings: np.ndarray
    n_samples: int
    dim: int
    seed: int

    def cdf(self, s):
        return np.searchsorted(self.spacings, np.asarray(s), side="right") / self.spacings.size

    def ks(self, sample):
        return float(stats.ks_2samp(np.asarray(sample), self.spacings).statistic)

    def small_s_exponent(self, s_max=0.3):
        """Maximum-likelihood exponent ``beta`` of ``p(s) ~ s^beta`` on ``(0, s_max)``."""
        x = self.spacings[(self.spacings > 0) & (self.spacings < s_max)]
        return float(-x.size / np.sum(np.log(x / s_max)) - 1.0)


def ginibre_spectra(n_samples, dim, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n_samples):
        a = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2)
        out.append(ComplexSpectrum(np.linalg.eigvals(a), {"ensemble": "ginibre", "dim": dim},
                                   conjugate_pairs=False))
    return out


@lru_cache(maxsize=8)
def ginibre_reference(n_samples=50, dim=200, seed=12345, unfolding="knn", k=10, edge_fraction=0.05):
    """Reference spacing sample from ``n_samples`` complex Ginibre matrices (cached)."""
    if dim < 100:
        raise ValueError("dim must be at least 100 for a bulk-dominated reference")
    parts = [_unfold(sp.eigenvalues, unfolding, k, edge_fraction)[0]
             for sp in ginibre_spectra(n_samples, dim, seed)]
    s = np.concatenate(parts)
    return GinibreReference(np.sort(s / s.mean()), n_samples, dim, seed)


@dataclass
class Classification:
    label: str
    ks_vs_poisson2d: float
    ks_vs_ginibre: float
    n_spacings: int


def classify(spectra, reference=None, margin=0.05, **kwargs):
    """Label a spectrum (or ensemble) as ``poisson2d``, ``ginibre`` or ``indeterminate``."""
    if reference is None:
        reference = ginibre_reference()
    dist = spectra if isinstance(spectra, SpacingDistribution) else nn_spacings(spectra, reference=reference, **kwargs)
    if np.isnan(dist.ks_vs_ginibre):
        dist.ks_vs_ginibre = reference.ks(dist.spacings)
    kp, kg = dist.ks_vs_poisson2d, dist.ks_vs_ginibre
    if abs(kp - kg) <= margin:
        label = "indeterminate"
    else:
        label = "poisson2d" if kp < kg else "ginibre"
    return Classification(label, kp, kg, dist.spacings.size)
