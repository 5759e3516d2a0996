"""
Event-level order book
======================

Bid and ask queues on three price levels. Arrivals and cancellations are
Hawkes driven, volume migrates between neighbouring levels, and removals
only happen from non-empty queues.
"""
import numpy as np

from hawkes_lob import MicroConfig, simulate_micro, terminal_book

cfg = MicroConfig.hawkes(
    4, bid0=[5, 8, 10],
    arrival=(1.0, 0.0), removal=(0.3, 0.15),
    alpha={"11": 0.3, "22": 0.2, "21": 0.1}, beta=1.5,
    eta=0.05, kappa=0.01, rho=2.0,
)
path = simulate_micro(cfg, horizon=50.0, seed=7)
print("events simulated:", path.diagnostics["events"])
print("first events:")
for e in path.events[:5]:
    print("  ", e)

grid = np.linspace(0, 50, 6)
print("bid queues on a coarse grid:\n", path.sample(grid)[0])

# terminal books over many replicates
books = np.stack([terminal_book(cfg, 50.0, 7, r) for r in range(200)])
print("mean terminal bid:", books[:, 0].mean(axis=0))
print("mean terminal ask:", books[:, 1].mean(axis=0))
print("any negative volume:", bool((books < 0).any()))
