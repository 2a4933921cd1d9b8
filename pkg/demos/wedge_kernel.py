"""Heat kernel of a planar wedge: the half-plane check, a slice written to
CSV, and survival probabilities for a few opening angles.

    python demos/wedge_kernel.py [out.csv]
"""
import math
import sys

import numpy as np

from nodalbm.heatkernel import ConeSpec, halfplane_image_kernel, kernel_slice_csv, wedge_heat_kernel, wedge_survival

half = ConeSpec(math.pi)
x = (1.0, math.pi / 2)
worst = 0.0
for r in (0.5, 1.0, 1.5):
    for eta in (0.3, 1.2, 2.5):
        y = (r, eta)
        a = wedge_heat_kernel(half, 0.5, x, y)
        b = halfplane_image_kernel(0.5, [0.0, 1.0], [r * math.cos(eta), r * math.sin(eta)])
        worst = max(worst, abs(a - b) / b)
print(f"beta = pi vs image method: max relative difference {worst:.1e}")

for frac in (0.25, 0.5, 1.0, 1.5):
    spec = ConeSpec(frac * math.pi)
    s = [wedge_survival(spec, t, (1.0, spec.beta / 2)) for t in (0.1, 0.5, 2.0)]
    print(f"beta = {frac:>4} pi: survival from the bisector at t = 0.1, 0.5, 2: " + ", ".join(f"{v:.4f}" for v in s))

out = sys.argv[1] if len(sys.argv) > 1 else "wedge_slice.csv"
spec = ConeSpec(math.pi / 2)
kernel_slice_csv(out, spec, 0.5, (1.0, math.pi / 4), np.linspace(0.05, 3, 30), np.linspace(0, spec.beta, 25))
print(f"slice written to {out}")
