"""
From jumps to diffusion
=======================

The rescaled micro generator approaches the limit generator at rate
n^{-1/2}. Simulated terminal moments of the micro book are then set
against the reflected SDE.
"""
import numpy as np

from hawkes_lob import (
    EffectiveCoefficients, PiecewiseLinear, TestFunction, generator_convergence_report,
    micro_meso_moment_comparison,
)

A = PiecewiseLinear.affine
coeffs = EffectiveCoefficients(
    4,
    sigma_sq=[A(1.0, 0.3), A(0.8, 0.2), A(1.2, 0.1)],
    f=[A(0.5, -0.2), A(0.3, 0.1), A(-0.2, 0.4)],
    g=[A(0.4, 0.3), A(0.6, -0.1), A(0.2, 0.2)],
    alpha_b=0.7,
)
F = TestFunction.neumann_cosine([1.0, 0.7, 1.3], [4.0, 3.0, 5.0])
rep = generator_convergence_report(F, coeffs, [64, 256, 1024, 4096])
for n, e in zip(rep.n_list, rep.sup_errors):
    print(f"n={n:5d}  sup error {e:.5f}  sqrt(n)*error {np.sqrt(n) * e:.3f}")
print("ratios per factor 4 in n:", np.round(rep.ratios, 3))

# moments: micro book versus SDE, small run
simple = EffectiveCoefficients.uniform(4, 1.0, 0.0, 0.0, 0.5)
mm = micro_meso_moment_comparison(simple, [1.0, 1.0, 1.0], [100, 400, 1600], 0.5, 200, seed=3,
                                  block_boundary_migration=False)
print("meso terminal mean:", np.round(mm.meso_mean, 3))
print("micro terminal mean by n:\n", np.round(mm.micro_mean, 3))
print("violations:", mm.violations)
