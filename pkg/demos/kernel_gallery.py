"""A short tour of the truncated Biot-Savart kernel and its regularization.

Run as:  python demos/kernel_gallery.py
"""

import numpy as np

from vortexlab.kernels import (
    KernelSpec,
    biot_savart,
    biot_savart_regularized,
    green,
    green_regularized,
)

# At M = 1 the truncated sums collapse to closed forms:
#   G(x)  = 2 cos x1 + 2 cos x2
#   K(x)  = (-2 sin x2, 2 sin x1)
spec1 = KernelSpec(1)
x = np.array([0.9, -1.3])
print("M = 1 closed forms at x =", x)
print("  G   :", green(x, spec1), "vs", 2 * np.cos(x[0]) + 2 * np.cos(x[1]))
print("  K   :", biot_savart(x, spec1), "vs", (-2 * np.sin(x[1]), 2 * np.sin(x[0])))

# At larger M the kernel develops the logarithmic core of the 2D Green
# function.  Watch G grow as we walk toward the origin.
spec = KernelSpec(24)
print("\nG along a ray toward the singularity (M = 24):")
for r in (1.0, 0.3, 0.1, 0.03):
    print(f"  r = {r:5.2f}   G = {green(np.array([r, 0.0]), spec):8.3f}")

# The regularized kernel caps that growth: constant plateau inside r < eps/2,
# untouched outside r > eps, and a C^2 blend in between.
speceps = KernelSpec(24, epsilon=0.4)
print("\nregularized G with eps = 0.4:")
for r in (1.0, 0.4, 0.3, 0.1, 0.01):
    g = green_regularized(np.array([r, 0.0]), speceps)
    print(f"  r = {r:5.2f}   G_eps = {g:8.3f}")
print("  K_eps(0) =", biot_savart_regularized(np.zeros(2), speceps))

# The velocity kernel is divergence free; check it with a spectral identity
# made concrete: a tight finite-difference loop around a few random points.
rng = np.random.default_rng(1)
h = 1e-5
worst = 0.0
for _ in range(25):
    y = rng.uniform(0.5, 2.5, 2)
    div = (
        biot_savart(y + [h, 0], spec)[0]
        - biot_savart(y - [h, 0], spec)[0]
        + biot_savart(y + [0, h], spec)[1]
        - biot_savart(y - [0, h], spec)[1]
    ) / (2 * h)
    worst = max(worst, abs(div))
print("\nmax |div K| over 25 random points:", worst)
