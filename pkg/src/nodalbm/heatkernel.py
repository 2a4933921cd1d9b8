"""Dirichlet heat kernel of a planar wedge, its half-plane image oracle,
survival probabilities and the Green-comparability experiment.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import special as sp

from ._io import fmt
from .geometry import Euclidean, FlatTorus, Sphere2
from .special import ConvergenceError, DiffusionConvention, kent_hitting_probability
from .stochastic import BallExterior, BallTarget, WalkConfig, derive_seed, hitting_probability

__all__ = [
    "ConeSpec",
    "wedge_heat_kernel",
    "halfplane_image_kernel",
    "wedge_survival",
    "kernel_slice_csv",
    "ComparabilityReport",
    "green_comparability_experiment",
]

SERIES_RTOL = 1e-10
MAX_TERMS = 200_000
MASS_RADIUS = 8.0  # kernel mass beyond rho_x + 8 sqrt(t) is negligible


@dataclass(frozen=True)
class ConeSpec:
    """Planar wedge of opening ``beta``; Dirichlet eigendata of the arc ``(0, beta)``."""

    beta: float
    convention: DiffusionConvention = DiffusionConvention.STANDARD

    def __post_init__(self):
        if not 0 < self.beta < 2 * math.pi:
            raise ValueError("opening angle must lie in (0, 2 pi)")
        object.__setattr__(self, "convention", DiffusionConvention(self.convention))

    def eigenvalue(self, j):
        """``l_j = (j pi / beta)^2``."""
        return (np.asarray(j) * math.pi / self.beta) ** 2

    def eigenfunction(self, j, theta):
        """``m_j(theta) = sqrt(2/beta) sin(j pi theta / beta)``."""
        return math.sqrt(2.0 / self.beta) * np.sin(np.multiply.outer(np.asarray(j), np.asarray(theta)) * math.pi / self.beta)

    def order(self, j):
        """Bessel order ``sqrt(l_j + (n/2 - 1)^2)`` with ``n = 2``."""
        return np.sqrt(self.eigenvalue(j))


def _polar(p):
    p = np.asarray(p, dtype=float)
    return float(p[0]), float(p[1])


def _std_time(t, convention):
    return DiffusionConvention(convention).to_standard_time(t)


def wedge_heat_kernel(spec: ConeSpec, t: float, x, y, terms: int = 20, return_terms: bool = False):
    """Dirichlet heat kernel of the wedge between polar points ``x = (ρ, θ)``
    and ``y = (r, η)``.

    STANDARD form::

        (1/t) e^{-(ρ² + r²)/(2t)} Σ_j I_{ν_j}(ρ r / t) m_j(θ) m_j(η),   ν_j = jπ/β

    evaluated as ``e^{-(ρ - r)²/(2t)} Σ_j ive(ν_j, ρr/t) m_j(θ) m_j(η) / t`` so
    nothing overflows.  At least ``terms`` terms are summed; summation
    continues until the last term is
    below ``1e-10`` of the running sum.  The stopping test uses the term
    envelope ``(2/β) ive(ν_j, z)``, which is decreasing in ``j``, so a zero
    of the sines cannot end the sum early.
    """
    if terms < 20:
        raise ValueError("at least 20 terms are required")
    if t <= 0:
        raise ValueError("time must be positive")
    rho, th = _polar(x)
    r, eta = _polar(y)
    for ang in (th, eta):
        if not 0 <= ang <= spec.beta:
            raise ValueError("angles must lie in [0, beta]")
    if rho < 0 or r < 0:
        raise ValueError("radii must be nonnegative")
    ts = _std_time(t, spec.convention)
    if rho == 0 or r == 0:
        return (0.0, 0) if return_terms else 0.0
    z = rho * r / ts
    pref = math.exp(-((rho - r) ** 2) / (2 * ts)) / ts
    total = 0.0
    comp = 0.0
    j = 0
    chunk = max(terms, 32)
    while True:
        js = np.arange(j + 1, j + chunk + 1)
        nu = spec.order(js)
        env = sp.ive(nu, z)
        vals = env * spec.eigenfunction(js, th) * spec.eigenfunction(js, eta)
        env = env * (2.0 / spec.beta)
        for k, v in enumerate(vals):
            # Kahan summation keeps the alternating tail honest
            yk = v - comp
            tk = total + yk
            comp = (tk - total) - yk
            total = tk
            jj = j + k + 1
            if jj >= terms and env[k] <= SERIES_RTOL * abs(total):
                out = max(pref * total, 0.0)
                return (out, jj) if return_terms else out
        j += chunk
        if j >= MAX_TERMS:
            raise ConvergenceError(f"wedge series not converged after {j} terms (z = {z:.3g}); attained bound {env[-1] / max(abs(total), 1e-300):.3g}")


def halfplane_image_kernel(t: float, x, y, convention=DiffusionConvention.STANDARD) -> float:
    """Dirichlet heat kernel of the upper half-plane by reflection.

    Cartesian points with second coordinate ``>= 0``; STANDARD form
    ``(2πt)^{-1} (e^{-|x-y|²/2t} - e^{-|x-ȳ|²/2t})``.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(x[..., 1] < 0) or np.any(y[..., 1] < 0):
        raise ValueError("points must lie in the closed upper half-plane")
    ts = _std_time(t, convention)
    ybar = y * np.array([1.0, -1.0])
    d1 = np.sum((x - y) ** 2, axis=-1)
    d2 = np.sum((x - ybar) ** 2, axis=-1)
    # e^{-a} - e^{-b} = e^{-a}(1 - e^{-(b - a)}) avoids cancellation
    out = np.exp(-d1 / (2 * ts)) * -np.expm1(-(d2 - d1) / (2 * ts)) / (2 * math.pi * ts)
    return float(out) if np.ndim(out) == 0 else out


def _gauss_panels(a, b, width, per_panel):
    n = max(1, int(math.ceil((b - a) / width)))
    g, w = np.polynomial.legendre.leggauss(per_panel)
    edges = np.linspace(a, b, n + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * g[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def wedge_survival(spec: ConeSpec, t: float, x, resolution: int = 16, terms: int = 20) -> float:
    """Probability that the walk from ``x = (ρ, θ)`` has not left the wedge
    by time ``t``: ``∫ P(t, x, y) dy`` by composite Gauss–Legendre in polar
    coordinates over ``ρ_x ± 8√t`` (STANDARD time).

    ``resolution`` is the number of nodes per panel; panels are at most
    ``√t`` wide radially and ``√t/ρ`` angularly.
    """
    rho, th = _polar(x)
    if not (rho > 0 and 0 < th < spec.beta):
        raise ValueError("x must be interior")
    if t <= 0:
        return 1.0
    ts = _std_time(t, spec.convention)
    s = math.sqrt(ts)
    r_lo = max(0.0, rho - MASS_RADIUS * s)
    r_hi = rho + MASS_RADIUS * s
    if r_lo == 0.0 and resolution < 16:
        warnings.warn("kernel mass reaches the apex; increase resolution", RuntimeWarning, stacklevel=2)
    rs, wr = _gauss_panels(r_lo, r_hi, s, resolution)
    total = 0.0
    for r, w in zip(rs, wr):
        ang_w = MASS_RADIUS * s / r
        a_lo, a_hi = max(0.0, th - ang_w), min(spec.beta, th + ang_w)
        if a_hi <= a_lo:
            continue
        es, we = _gauss_panels(a_lo, a_hi, max(s / r, 1e-3), resolution)
        vals = _kernel_vector(spec, ts, rho, th, r, es, terms)
        total += w * r * float(np.dot(we, vals))
    return float(min(max(total, 0.0), 1.0))


def _kernel_vector(spec, ts, rho, th, r, etas, terms):
    """Standard-time kernel at fixed radii for many angles (shared Bessel factors)."""
    z = rho * r / ts
    pref = math.exp(-((rho - r) ** 2) / (2 * ts)) / ts
    if z == 0:
        return np.zeros_like(etas)
    nmax = max(terms, int(math.ceil(spec.beta / math.pi * (40 + math.sqrt(80 * z)))))
    js = np.arange(1, nmax + 1)
    coef = sp.ive(spec.order(js), z) * spec.eigenfunction(js, th)
    return np.maximum(pref * (coef @ spec.eigenfunction(js, etas)), 0.0)


def kernel_slice_csv(path, spec: ConeSpec, t: float, x, rhos, thetas, terms: int = 20):
    """Write ``(ρ, θ, value)`` rows of ``P(t, x, ·)`` on a polar grid."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["rho", "theta", "value"])
        for r in rhos:
            for e in thetas:
                v = wedge_heat_kernel(spec, t, x, (r, e), terms)
                w.writerow([fmt(r), fmt(e), fmt(v)])


# ---------------------------------------------------------------------------
# Green comparability


@dataclass
class ComparabilityReport:
    placements: list  # dicts: distance, angle, psi_M, psi_E, ratio
    c1_hat: float
    c2_hat: float
    half_scale: "ComparabilityReport | None" = None
    stable: bool | None = None
    exit_ratio: float | None = None
    exit_prediction: float | None = None
    exit_stderr: float | None = None


def _chart_max(domain):
    if isinstance(domain, FlatTorus):
        return 0.25 * min(domain.periods)
    if isinstance(domain, Sphere2):
        return 0.5 * math.pi
    raise ValueError("comparability is set up for FlatTorus(3) and Sphere2")


def _sphere_point(p, dist, ang):
    e1, e2 = Sphere2.tangent_basis(p)
    v = math.cos(ang) * e1 + math.sin(ang) * e2
    return Sphere2().geodesic_step(p, v, dist)


def green_comparability_experiment(domain, p, r: float, c: float, config: WalkConfig, placements=None,
                                   target_radius: float = 0.25, stability: bool = True) -> ComparabilityReport:
    """Ratios ``ψ_K^M(T, p) / ψ_{K'}^e(T, q)`` with ``T = c r²`` for small balls
    ``K`` inside ``B(p, r)`` and their chart images ``K'`` (geodesic normal
    coordinates at ``p``).

    ``placements`` are ``(distance/r, angle)`` pairs; each ``K`` has radius
    ``target_radius * r``.  ``c1_hat``/``c2_hat`` are the min/max ratios.
    With ``stability`` the sweep is repeated at ``r/2`` and the bounds must
    agree within ±30%.  The exit ratio compares ``ψ_{∂B}`` on ``M`` with the
    Euclidean series value.
    """
    if r <= 0 or r >= _chart_max(domain):
        raise ValueError(f"radius {r} violates the chart scale {_chart_max(domain):.3g}")
    p = np.asarray(p, dtype=float)
    if placements is None:
        placements = [(0.5, 0.0), (0.6, 1.3), (0.7, 2.6), (0.5, 4.0), (0.65, 5.2)]
    T = c * r * r
    cfg = replace(config, convention=DiffusionConvention.STANDARD).for_horizon(T)
    n = domain.dim
    rows = []
    for k, (frac, ang) in enumerate(placements):
        dist = frac * r
        a = target_radius * r
        if isinstance(domain, Sphere2):
            centre = _sphere_point(p, dist, ang)
        else:
            v = np.zeros(n)
            v[0], v[1] = math.cos(ang), math.sin(ang)
            centre = domain.wrap(p + dist * v)
        q = np.zeros(n)
        ce = np.zeros(n)
        ce[0], ce[1] = dist * math.cos(ang), dist * math.sin(ang)
        seed = derive_seed(cfg.seed, "place", k)
        pm = hitting_probability(domain, BallTarget(tuple(centre), a), T, p, replace(cfg, seed=seed))
        pe = hitting_probability(Euclidean(n), BallTarget(tuple(ce), a), T, q, replace(cfg, seed=seed))
        ratio = pm.p_hat / pe.p_hat if pe.p_hat > 0 else math.inf
        rows.append({"distance": dist, "angle": ang, "psi_M": pm.p_hat, "psi_M_stderr": pm.stderr,
                     "psi_E": pe.p_hat, "psi_E_stderr": pe.stderr, "ratio": ratio})
    ratios = [row["ratio"] for row in rows]
    ex = hitting_probability(domain, BallExterior(tuple(p), r), T, p, replace(cfg, seed=derive_seed(cfg.seed, "exit")))
    kent = kent_hitting_probability(n, r, T)
    rep = ComparabilityReport(rows, float(min(ratios)), float(max(ratios)), exit_ratio=ex.p_hat / kent,
                              exit_prediction=1.0, exit_stderr=ex.stderr / kent)
    if stability:
        half = green_comparability_experiment(domain, p, r / 2, c, config, placements, target_radius, stability=False)
        rep.half_scale = half
        rep.stable = bool(0.7 <= half.c1_hat / rep.c1_hat <= 1.3 and 0.7 <= half.c2_hat / rep.c2_hat <= 1.3)
    return rep
