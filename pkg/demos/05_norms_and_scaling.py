"""Weighted and fractional Sobolev norms, and the narrow-factor scaling law.

Shows the three realisations of the weighted norm, the agreement of the
Gagliardo and Fourier routes at integer order, and the decay of
f(v1/delta) g(v) sequences that underpins the closeness budgets of the
wave construction.
"""

import numpy as np

from vplab.norms import (
    check_norm_equivalence,
    fractional_wsp_norm,
    hardy_quotient,
    weighted_hsb_norm,
)
from vplab.profiles import VelocityGrid, make_builtin

grid = VelocityGrid(2, 8.0, 128)
maxwellian = make_builtin("maxwellian", grid)

print("weighted norms of the 2D Maxwellian:")
for s, b in ((0.0, 0.0), (1.0, 0.0), (1.0, 0.5), (1.6, 0.3)):
    print(f"  H^({s},{b}): {weighted_hsb_norm(maxwellian.values, grid, s, b):.6f}")
print(f"  L2 closed form: {1 / (2 * np.sqrt(np.pi)):.6f}")

w = fractional_wsp_norm(maxwellian.values, grid, 1.0, 2.0)
h = weighted_hsb_norm(maxwellian.values, grid, 1.0, 0.0)
print(f"\nGagliardo vs Fourier at integer order: {w:.6f} vs {h:.6f}")

rep = check_norm_equivalence(maxwellian.values, grid, 1.0, 0.4)
print(f"equivalence ratios (iso, split): {rep['ratio_iso']:.3f}, "
      f"{rep['ratio_split']:.3f}")

# --- Hardy quotient with exact cancellation -----------------------------------

g1 = VelocityGrid(1, 8.0, 4096)
ax = g1.axis()
val = hardy_quotient(ax * np.exp(-ax ** 2), ax, 0.0)
print(f"\nHardy quotient of v e^(-v^2) at 0: {val:.6f} (sqrt(pi) = "
      f"{np.sqrt(np.pi):.6f})")

# --- the scaling-decay law -----------------------------------------------------

gg = VelocityGrid(2, 4.0, 1024)
mesh = gg.mesh()
broad = np.exp(-(mesh[0] ** 2 + mesh[1] ** 2) / (2 * 0.25))
print("\nnarrow-factor sequence in H^(0.3, 0.3):")
prev = None
for n in range(1, 7):
    d = 2.0 ** (-n)
    val = weighted_hsb_norm(np.exp(-(mesh[0] / d) ** 2 / 2) * broad, gg,
                            0.3, 0.3)
    marker = "" if prev is None else f"  (x {val / prev:.3f})"
    print(f"  delta = 2^-{n}: {val:.5f}{marker}")
    prev = val
