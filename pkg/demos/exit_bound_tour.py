"""Walk through one eigenfunction: nodal domains, max points and the
probability of leaving a nodal domain within one wavelength-time.

    python demos/exit_bound_tour.py [m] [n]
"""
import math
import sys

from nodalbm.geometry import Box
from nodalbm.special import DiffusionConvention
from nodalbm.spectral import eigenpair_catalog, inradius, nodal_decomposition
from nodalbm.stochastic import WalkConfig, feynman_kac_expectation, max_point_exit_check

m, n = (int(a) for a in sys.argv[1:3]) if len(sys.argv) > 2 else (3, 2)

pair = eigenpair_catalog(Box((1.0, 1.0)), (m, n))
decomp = nodal_decomposition(pair, 128)
print(f"mode ({m},{n}): lambda = {pair.lam:.4f}, {len(decomp.components)} nodal domains")

cfg = WalkConfig(DiffusionConvention.ANALYST, dt=1 / 200, samples=20_000, seed=1)
bound = 1 - math.exp(-1)
for c in decomp.components[:4]:
    rad = inradius(decomp, c.id).value
    rep = max_point_exit_check(pair, c, 1.0, cfg)
    print(f"  domain {c.id}: sign {c.sign:+d}, max at ({c.max_point[0]:.3f}, {c.max_point[1]:.3f}), "
          f"inradius*sqrt(lam) = {rad * math.sqrt(pair.lam):.3f}, "
          f"P(exit by 1/lam) = {rep.psi.p_hat:.4f} +- {rep.psi.stderr:.4f} (bound {bound:.4f})")

# the same paths, weighted by phi at the end, reproduce e^{-lam t} phi(x0)
c = decomp.components[0]
for f in (0.3, 1.0, 3.0):
    est = feynman_kac_expectation(pair, c, f / pair.lam, c.max_point, cfg)
    print(f"  t = {f}/lam: E[phi(w_t); survive] = {est.estimate:.4f} +- {est.stderr:.4f}, exact {est.reference:.4f}")
