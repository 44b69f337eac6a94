"""Transient and steady-state dissipative quantum chaos in the open anisotropic Dicke model."""

__version__ = "0.1.0"

from .hilbert import HilbertSpec, spin_coherent_state, photon_coherent_state, product_state, coherent_ensemble
from .classical import AdmParams, ClassicalState, integrate, lyapunov, phase_scan, finite_time_lyapunov_ensemble
from .lindblad import LindbladGenerator, adm_generator, evolve, adjoint_evolve, vectorize_generator, steady_state
from .observables import partial_trace, von_neumann_entropy, vne_dynamics, fotoc, steady_state_variance
from .rmt import ToyModelConfig, sample_realization, build_hamiltonian, build_liouvillian, toy_vne_dynamics
from .spectra import ComplexSpectrum, nn_spacings, classify, poisson2d_pdf, ginibre_reference
