"""Regular versus chaotic dissipation in the random-matrix toy model.

Spectral statistics (spacing distributions against the 2d-Poisson law and a
sampled Ginibre reference) and the entropy of one subsystem for three
choices of the GOE admixture ``mu`` and the deformation ``chi``.
"""

import numpy as np

from dissipative_chaos.rmt import ToyModelConfig, toy_spectrum, toy_vne_dynamics
from dissipative_chaos.spectra import classify, ginibre_reference, nn_spacings

ref = ginibre_reference()
cases = [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)]

# 15 realizations already give a few thousand spacings per case
for mu, chi in cases:
    cfg = ToyModelConfig(n_total=49, mu=mu, chi=chi, seed=0)
    spectra = [toy_spectrum(cfg, k) for k in range(15)]
    c = classify(nn_spacings(spectra, reference=ref), ref)
    print(f"mu={mu:g} chi={chi:g}: {c.label:13s} KS(2d-Poisson) {c.ks_vs_poisson2d:.3f}, "
          f"KS(Ginibre) {c.ks_vs_ginibre:.3f}, {c.n_spacings} spacings")

# Entropy of one 7-level subsystem; the maximum is ln 7
for mu, chi in cases:
    res = toy_vne_dynamics(ToyModelConfig(n_total=49, mu=mu, chi=chi, seed=0, ensemble_size=10), t_final=10.0)
    print(f"mu={mu:g} chi={chi:g}: slope {res.s_slope:.2f}, S(t=10) {res.s_vn[-1]:.3f}, "
          f"steady state {res.s_sat:.3f} of {res.s_max:.3f}")
