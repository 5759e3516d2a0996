"""
Reflection at zero and Laplacian smoothing
==========================================

A projected Euler scheme keeps the queues non-negative and accumulates the
pushing term eta. Without noise, migration alone is a heat flow with zero
boundary values.
"""
import math

import numpy as np

from hawkes_lob import (
    EffectiveCoefficients, MesoConfig, PiecewiseLinear, dirichlet_modes, heat_relaxation, simulate_meso,
)
from hawkes_lob.cli import projected_walk_mean

# constant drift -1 from x0=1: the queue hits zero at t=1 and is held there
c = EffectiveCoefficients(2, 0.0, 0.0, PiecewiseLinear.constant(1.0), 0.0)
ens = simulate_meso(MesoConfig(c, [1.0], 1e-3), 2.0, 1, seed=0, output_step=0.5, keep_paths=True)
for t, x, e in zip(ens.times, ens.paths_x[0, :, 0], ens.paths_eta[0, :, 0]):
    print(f"t={t:.1f}  X={x:.3f}  eta={e:.3f}")

# reflected Brownian motion from 0: the scheme mean sits below sqrt(2/pi)
# by a discretization bias of order sqrt(dt)
bm = EffectiveCoefficients(2, 1.0, 0.0, 0.0, 0.0)
for dt in (1e-2, 1e-3):
    e = simulate_meso(MesoConfig(bm, [0.0], dt), 1.0, 4000, seed=0, threads=4)
    print(f"dt={dt:g}  mean {e.terminal_x[:, 0].mean():.4f}  scheme {projected_walk_mean(1.0, dt, round(1 / dt)):.4f}"
          f"  exact {math.sqrt(2 / math.pi):.4f}")

# heat relaxation of the slowest Dirichlet mode
lam, V = dirichlet_modes(7)
h = heat_relaxation(1.0, V[:, 0], 1.0, 1e-4)
print("decay of mode 1:", np.round(h.numeric[-1] / V[:, 0], 6)[:3], "expected", round(math.exp(-lam[0]), 6))
print("relative error at t=1:", h.terminal_relative_error)
