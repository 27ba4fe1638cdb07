"""Stable Green functions: shape, scaling and how much mass leaves a finite box.

Run ``python demos/kernel_tour.py``; a figure ``kernel_tour.png`` is written
next to the script.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from fracspde.kernel import StableIndex, green_1d
from fracspde.kernel_checks import mass_outside

x = np.linspace(-6, 6, 481)

# Symmetric kernels get heavier tails as alpha drops; delta tilts them.
fig, axes = plt.subplots(1, 2, figsize=(9, 3.5))
for alpha in (2.0, 1.5, 0.8):
    axes[0].plot(x, green_1d(alpha, 0.0, 1.0, x), label=f"alpha={alpha}")
for delta in (-0.4, 0.0, 0.4):
    axes[1].plot(x, green_1d(1.5, delta, 1.0, x), label=f"delta={delta}")
for ax in axes:
    ax.set_xlabel("x")
    ax.legend()
axes[0].set_ylabel("G(1, x)")
fig.tight_layout()
fig.savefig(Path(__file__).with_name("kernel_tour.png"), dpi=120)

# Self-similarity: G(t, x) = t^(-1/alpha) G(1, t^(-1/alpha) x)
alpha, delta, t = 1.5, 0.3, 4.0
c = t ** (-1 / alpha)
gap = np.max(np.abs(green_1d(alpha, delta, t, x) - c * green_1d(alpha, delta, 1.0, c * x)))
print(f"scaling residual at t={t}: {gap:.2e}")

# Mass outside [-L, L]: a Gaussian tail versus the L^(-alpha) tail of alpha < 2.
for a in (2.0, 1.5):
    idx = StableIndex((a,), (0.0,))
    masses = [mass_outside(idx, 1.0, L) for L in (5.0, 10.0, 20.0)]
    print(f"alpha={a}: mass outside L=5,10,20 -> " + ", ".join(f"{m:.2e}" for m in masses))
