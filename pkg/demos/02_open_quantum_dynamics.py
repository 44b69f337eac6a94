"""Entanglement growth and operator spreading in the open Dicke model.

Uses a small spin (S = 2) so the script runs in seconds. The same calls
with ``HilbertSpec(5, 40)`` reproduce the production setting.
"""

import numpy as np

from dissipative_chaos.classical import AdmParams, bloch_uniform_ensemble
from dissipative_chaos.hilbert import HilbertSpec, coherent_ensemble, photon_coherent_state, product_state, \
    spin_coherent_state
from dissipative_chaos.lindblad import adm_generator
from dissipative_chaos.observables import adm_observables, ensemble_sigma, fotoc, vne_dynamics

spec = HilbertSpec(2, 16)
_, theta, phi = bloch_uniform_ensemble(4, seed=0)
ensemble = coherent_ensemble(spec, theta, phi)
ops = adm_observables(spec)
times = np.r_[np.arange(0, 0.5, 0.025), np.arange(0.5, 20.01, 0.5)]

# Spin-photon entropy: same early growth, lower plateau with loss
for kappa in (0.0, 1.0):
    for lam in (1.2, 2.0):
        gen = adm_generator(AdmParams.dicke(lam, kappa), spec)
        es = vne_dynamics(ensemble, gen, spec, times=times, observers=[ops["sz"], ops["sz2"]])
        dsz = ensemble_sigma(es)
        print(f"kappa={kappa:g} lambda={lam:g}: slope {es.s_slope:.3f}, S_late {es.s_ss:.3f}, "
              f"Delta Sz late {dsz[-8:].mean():.3f}")

# FOTOC: the perturbed-fidelity width tracks Delta Sz(t)
psi = product_state(photon_coherent_state(0, spec.photon_cutoff), spin_coherent_state(1.0, 0.0, spec.spin_s))
gen = adm_generator(AdmParams.dicke(2.0, 1.0), spec)
res = fotoc(psi, gen, ops["sz"], delta_phi=1e-4, times=np.arange(0, 5.01, 0.5), t_final=5.0, method="expm")
for t, a, b in zip(res.times, res.sigma_adjoint, res.sigma_series):
    print(f"t = {t:4.1f}: sqrt(1-F)/dphi = {a:.4f}, Delta Sz = {b:.4f}")
