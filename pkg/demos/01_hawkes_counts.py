"""
Self-exciting event counts
==========================

A two-type Hawkes process with exponential kernels. The long-run rate is
(I - K)^{-1} mu and normalized counts fluctuate with covariance Sigma_N.
"""
import numpy as np

from hawkes_lob import HawkesSpec, branching_matrix, empirical_fclt, simulate_hawkes, spectral_radius, stationary_intensity

spec = HawkesSpec(mu=[0.5, 0.3], alpha=[[0.3, 0.2], [0.1, 0.4]], beta=[[1.0, 1.5], [1.2, 1.0]])
K = branching_matrix(spec)
print("branching matrix K:\n", K)
print("spectral radius:", round(spectral_radius(K), 4))

# one long path: empirical rates against the stationary intensity
T = 5000.0
log = simulate_hawkes(spec, T, seed=1)
print("empirical rate:  ", log.counts() / T)
print("stationary rate: ", stationary_intensity(spec))

# count fluctuations on a diffusive scale
rep = empirical_fclt(spec, n=2000, T=1.0, replicates=500, seed=1, threads=4)
np.set_printoptions(precision=3)
print("empirical covariance:\n", rep.empirical)
print("limit covariance:\n", rep.theoretical)
print("relative Frobenius error:", round(rep.rel_frobenius_error, 3))
