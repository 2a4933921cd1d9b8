"""Cut-off Green's functions, Martin kernels and minimum-energy capacities.

The Green's function with horizon ``T`` is ``G_T(x, y) = ∫_0^T h(t, x, y) dt``
for the heat kernel ``h`` of the chosen diffusion convention.  On compact
catalog domains the time integral is split at ``τ``: the short-time part uses
the method of images and the long-time part the eigen-expansion, both of
which converge geometrically there.
"""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import special as sp

from ._io import fmt
from .geometry import Box, Domain, Euclidean, FlatTorus, Sphere2
from .special import DiffusionConvention, upper_incomplete_gamma
from .spectral import NodalDecomposition, _component_membership
from .stochastic import (BallTarget, HittingEstimate, RegionExit, Target, UnionTarget, WalkConfig,
                         _norm, _radial, derive_seed, hitting_probability)

__all__ = [
    "cutoff_green",
    "GreenFunction",
    "CellSet",
    "BallSet",
    "BallUnionSet",
    "CubeSet",
    "CapacityProblem",
    "martin_kernel_matrix",
    "EnergyResult",
    "min_energy_measure",
    "capacity_sandwich_check",
    "volume_ratio_capacity_bound",
]

GREEN_RTOL = 1e-10
DIAG_SUBSAMPLES = 12


# ---------------------------------------------------------------------------
# Green's functions


def _uig(s, x):
    """Vectorised upper incomplete gamma Γ(s, x)."""
    x = np.asarray(x, dtype=float)
    if s > 0:
        return sp.gammaincc(s, x) * sp.gamma(s)
    return np.vectorize(upper_incomplete_gamma, otypes=[float])(s, x)


def _euclid_green_std(n, T, d):
    """STANDARD-time ``∫_0^T (2πt)^{-n/2} e^{-d²/2t} dt``, zero-safe for the tails."""
    d = np.asarray(d, dtype=float)
    a = 0.5 * d * d
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        if n == 3:
            # Γ(1/2, a/T) = √π erfc(d/√(2T))
            out = sp.erfc(d / math.sqrt(2.0 * T)) / (2.0 * math.pi * d)
        else:
            out = (2 * math.pi) ** (-n / 2) * a ** (1 - n / 2) * _uig(n / 2 - 1, a / T)
    return out


def _rate(convention):
    """Heat-kernel time scale: STANDARD ``e^{tΔ/2}``, ANALYST ``e^{tΔ}``."""
    return 0.5 if DiffusionConvention(convention) is DiffusionConvention.STANDARD else 1.0


def _standardise(T, convention):
    """Map (T, convention) to STANDARD horizon and the factor on the integral.

    ANALYST h_A(t) = h_S(2t), so ∫_0^T h_A = ½ ∫_0^{2T} h_S.
    """
    if DiffusionConvention(convention) is DiffusionConvention.ANALYST:
        return 2.0 * T, 0.5
    return T, 1.0


def _image_shifts(periods, reach):
    ranges = [range(-int(math.ceil(reach / L)) - 1, int(math.ceil(reach / L)) + 2) for L in periods]
    return np.array(list(itertools.product(*ranges)), dtype=float) * np.asarray(periods)


def _torus_green_std(L, T, diff):
    """Flat torus, STANDARD time, as a function of the displacement ``diff``."""
    L = np.asarray(L, dtype=float)
    n = L.size
    vol = float(np.prod(L))
    tau = min(T, float(L.min()) ** 2 / 4.0)
    # images: Euclidean kernels beyond distance `reach` contribute < e^{-40} relative
    reach = math.sqrt(80.0 * tau)
    shifts = _image_shifts(L, reach)
    diff = np.asarray(diff, dtype=float)
    out = np.zeros(diff.shape[:-1])
    for s in shifts:
        out += _euclid_green_std(n, tau, np.linalg.norm(diff + s, axis=-1))
    if T > tau:
        out += (T - tau) / vol
        # eigen part: modes with e^{-μ τ} above 1e-16
        kmax = [int(math.ceil(math.sqrt(2 * 37.0 / tau) * Li / (2 * math.pi))) for Li in L]
        ks = np.array(list(itertools.product(*[range(-k, k + 1) for k in kmax])), dtype=float)
        ks = ks[np.any(ks != 0, axis=1)]
        freq = 2 * math.pi * ks / L
        mu = 0.5 * np.sum(freq * freq, axis=1)
        keep = mu * tau < 37.0
        freq, mu = freq[keep], mu[keep]
        w = (np.exp(-mu * tau) - np.exp(-mu * T)) / (mu * vol)
        phase = diff @ freq.T
        out += np.cos(phase) @ w
    return out


def _box_green_std(sides, T, x, y):
    """Dirichlet box, STANDARD time: signed images for ``t < τ``, sine series after."""
    a = np.asarray(sides, dtype=float)
    n = a.size
    vol = float(np.prod(a))
    tau = min(T, float(a.min()) ** 2 / 4.0)
    reach = math.sqrt(80.0 * tau)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast_shapes(x.shape, y.shape)[:-1])
    per_axis = []
    for i in range(n):
        K = int(math.ceil(reach / (2 * a[i]))) + 1
        per_axis.append([(2 * k * a[i], 1.0) for k in range(-K, K + 1)] + [(2 * k * a[i], -1.0) for k in range(-K, K + 1)])
    for combo in itertools.product(*per_axis):
        sign = 1.0
        ydiff = []
        for i, (shift, sg) in enumerate(combo):
            # reflection: y -> -y + shift, identity: y -> y + shift
            ydiff.append((sg * y[..., i] + shift) - x[..., i])
            sign *= sg
        d = np.sqrt(sum(c * c for c in ydiff))
        out = out + sign * _euclid_green_std(n, tau, d)
    if T > tau:
        mmax = [int(math.ceil(math.sqrt(2 * 37.0 / tau) * ai / math.pi)) for ai in a]
        ms = np.array(list(itertools.product(*[range(1, m + 1) for m in mmax])), dtype=float)
        freq = math.pi * ms / a
        mu = 0.5 * np.sum(freq * freq, axis=1)
        keep = mu * tau < 37.0
        freq, mu = freq[keep], mu[keep]
        w = (np.exp(-mu * tau) - np.exp(-mu * T)) / mu * (2.0**n / vol)
        fx = np.ones(x.shape[:-1] + (len(mu),))
        fy = np.ones(y.shape[:-1] + (len(mu),))
        for i in range(n):
            fx = fx * np.sin(x[..., i, None] * freq[:, i])
            fy = fy * np.sin(y[..., i, None] * freq[:, i])
        out = out + np.sum(fx * fy * w, axis=-1)
    return out


def _sphere_green_std(T, cosg):
    """Unit sphere, STANDARD time (generator Δ/2): resummed zonal expansion.

    ``Σ_{ℓ≥1} (2ℓ+1)/(ℓ(ℓ+1)) P_ℓ(x) = -1 - log((1-x)/2)`` carries the
    singular part; the remainder decays like ``e^{-ℓ(ℓ+1)T/2}``.
    """
    x = np.clip(np.asarray(cosg, dtype=float), -1.0, 1.0)
    with np.errstate(divide="ignore"):
        out = T / (4 * math.pi) + 2.0 / (4 * math.pi) * (-1.0 - np.log((1.0 - x) / 2.0))
    # subtract Σ (2ℓ+1)/(4π) P_ℓ e^{-λT/2}/(λ/2), λ = ℓ(ℓ+1)
    p_prev, p = np.ones_like(x), x.copy()
    ell = 1
    while True:
        lam = ell * (ell + 1)
        coef = (2 * ell + 1) / (4 * math.pi) * math.exp(-0.5 * lam * T) / (0.5 * lam)
        out -= coef * p
        if coef < 1e-16 * max(T / (4 * math.pi), 1e-300) and ell > 2:
            break
        p_prev, p = p, ((2 * ell + 1) * x * p - ell * p_prev) / (ell + 1)
        ell += 1
        if ell > 100_000:
            raise RuntimeError("sphere Green expansion did not converge")
    return out


def cutoff_green(domain: Domain, T: float, x, y, convention=DiffusionConvention.ANALYST):
    """Cut-off Green's function ``∫_0^T h(t, x, y) dt``.

    Parameters
    ----------
    domain : Domain
        ``Euclidean``, ``FlatTorus``, ``Box`` (Dirichlet) or ``Sphere2``.
    T : float
        Horizon.
    x, y : array_like
        Points (broadcast against each other); coincident points raise.
    convention : DiffusionConvention
        Heat kernel ``e^{tΔ}`` (ANALYST, the default) or ``e^{tΔ/2}``.

    Returns
    -------
    float or ndarray
    """
    if T <= 0:
        raise ValueError("horizon must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    Ts, factor = _standardise(T, convention)
    if isinstance(domain, Sphere2):
        cosg = np.sum(x * y, axis=-1) / (np.linalg.norm(x, axis=-1) * np.linalg.norm(y, axis=-1))
        if np.any(cosg >= 1.0 - 1e-15):
            raise ValueError("coincident points")
        out = factor * _sphere_green_std(Ts, cosg)
    else:
        diff = domain.displacement(x, y)
        if np.any(np.linalg.norm(diff, axis=-1) == 0):
            raise ValueError("coincident points")
        if isinstance(domain, Euclidean):
            out = factor * _euclid_green_std(domain.dim, Ts, np.linalg.norm(diff, axis=-1))
        elif isinstance(domain, FlatTorus):
            out = factor * _torus_green_std(domain.periods, Ts, diff)
        elif isinstance(domain, Box):
            out = factor * _box_green_std(domain.sides, Ts, x, y)
        else:
            raise ValueError(f"no Green's function for {type(domain).__name__}")
    out = np.maximum(out, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def torus_green_eigen(periods, T, diff, convention=DiffusionConvention.ANALYST, kmax=None):
    """Pure eigen-expansion of the torus Green's function (cross-check route).

    Truncated at ``|k_i| <= kmax``; converges only for moderate ``T`` and
    separated points, so it serves as an independent check, not a solver.
    """
    L = np.asarray(periods, dtype=float)
    Ts, factor = _standardise(T, convention)
    if kmax is None:
        kmax = 40
    ks = np.array(list(itertools.product(*[range(-kmax, kmax + 1)] * L.size)), dtype=float)
    ks = ks[np.any(ks != 0, axis=1)]
    freq = 2 * math.pi * ks / L
    mu = 0.5 * np.sum(freq * freq, axis=1)
    vol = float(np.prod(L))
    w = -np.expm1(-mu * Ts) / (mu * vol)
    diff = np.atleast_2d(np.asarray(diff, dtype=float))
    return factor * (Ts / vol + np.cos(diff @ freq.T) @ w)


@dataclass(frozen=True)
class GreenFunction:
    domain: Domain
    horizon: float
    convention: DiffusionConvention = DiffusionConvention.ANALYST

    def __call__(self, x, y):
        return cutoff_green(self.domain, self.horizon, x, y, self.convention)

    @property
    def homogeneous(self):
        """Translation invariant, so kernels on a lattice can be tabulated."""
        return isinstance(self.domain, (Euclidean, FlatTorus))

    def of_displacement(self, diff):
        Ts, factor = _standardise(self.horizon, self.convention)
        diff = np.asarray(diff, dtype=float)
        if isinstance(self.domain, Euclidean):
            return factor * _euclid_green_std(self.domain.dim, Ts, np.linalg.norm(diff, axis=-1))
        if isinstance(self.domain, FlatTorus):
            return factor * _torus_green_std(self.domain.periods, Ts, diff)
        raise ValueError("displacement form only for homogeneous domains")


# ---------------------------------------------------------------------------
# compact sets and their discretisation


@dataclass
class CellSet:
    """Cells of a regular grid: centers, measures and integer lattice indices."""

    centers: np.ndarray
    measures: np.ndarray
    spacing: float
    index: np.ndarray | None = None

    def __len__(self):
        return len(self.measures)

    @property
    def volume(self):
        return float(self.measures.sum())


def _grid_cells(inside, lo, hi, per_axis):
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    h = float(np.max(hi - lo)) / per_axis
    counts = [max(1, int(math.ceil((hi[i] - lo[i]) / h - 1e-9))) for i in range(lo.size)]
    mid = 0.5 * (lo + hi)
    axes = [mid[i] + (np.arange(c) - 0.5 * (c - 1)) * h for i, c in enumerate(counts)]
    idx = np.stack(np.meshgrid(*[np.arange(c) for c in counts], indexing="ij"), axis=-1).reshape(-1, lo.size)
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, lo.size)
    keep = inside(pts)
    return CellSet(pts[keep], np.full(int(keep.sum()), h**lo.size), h, idx[keep])


class CompactSet:
    """A compact target set with a cell discretisation and a walk target."""

    def cells(self, per_axis: int = 12) -> CellSet:
        raise NotImplementedError

    def target(self) -> Target:
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class BallSet(CompactSet):
    center: tuple
    radius: float

    def cells(self, per_axis=12):
        c = np.asarray(self.center, dtype=float)
        return _grid_cells(lambda p: _norm(p - c) <= self.radius, c - self.radius, c + self.radius, per_axis)

    def target(self):
        return BallTarget(tuple(self.center), self.radius)

    def spec(self):
        return {"kind": "ball", "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class BallUnionSet(CompactSet):
    balls: tuple  # ((center, radius), ...)

    def cells(self, per_axis=12):
        cs = [np.asarray(c, dtype=float) for c, _ in self.balls]
        rs = [r for _, r in self.balls]
        lo = np.min([c - r for c, r in zip(cs, rs)], axis=0)
        hi = np.max([c + r for c, r in zip(cs, rs)], axis=0)

        def inside(p):
            return np.any([_norm(p - c) <= r for c, r in zip(cs, rs)], axis=0)

        return _grid_cells(inside, lo, hi, per_axis)

    def target(self):
        return UnionTarget(tuple(BallTarget(tuple(c), r) for c, r in self.balls))

    def spec(self):
        return {"kind": "ball_union", "balls": [{"center": list(c), "radius": r} for c, r in self.balls]}


@dataclass(frozen=True)
class CubeTarget(Target):
    center: tuple
    half: float

    def distance(self, domain, x):
        c = np.asarray(self.center, dtype=float)
        off = np.abs(domain.displacement(c, x)) - self.half
        return _norm(np.maximum(off, 0.0))


@dataclass(frozen=True)
class CubeSet(CompactSet):
    """Axis-aligned closed cube with the given center and half side."""

    center: tuple
    half: float

    def cells(self, per_axis=12):
        c = np.asarray(self.center, dtype=float)
        return _grid_cells(lambda p: np.all(np.abs(p - c) <= self.half + 1e-12, axis=-1), c - self.half, c + self.half, per_axis)

    def target(self):
        return CubeTarget(tuple(self.center), self.half)

    def spec(self):
        return {"kind": "cube", "center": list(self.center), "half": self.half}


# ---------------------------------------------------------------------------
# Martin kernel and energy minimisation


@dataclass
class CapacityProblem:
    """Discretised capacity problem ``min_μ μᵀ M μ`` over the simplex.

    ``kernel`` holds ``M(x_i, x_j) = G(x_i, x_j) / G(ρ, x_j)``; ``green``
    the unnormalised ``G`` on the cells and ``g_root`` the values ``G(ρ, x_j)``.
    """

    cells: CellSet
    root: np.ndarray
    kernel: np.ndarray
    green: np.ndarray | None = None
    g_root: np.ndarray | None = None
    weights: np.ndarray | None = None

    def to_csv(self, path):
        w = self.weights if self.weights is not None else np.zeros(len(self.cells))
        d = self.cells.centers.shape[1]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "y", "z"][:d] + ["weight"])
            for c, m in zip(self.cells.centers, w):
                wr.writerow([fmt(v) for v in c] + [fmt(m)])


def _cell_average(green: GreenFunction, center, h, n=DIAG_SUBSAMPLES):
    """Average of ``G(·, center)`` over the cube of side ``h`` around ``center``."""
    d = center.size
    off = (np.arange(n) + 0.5) / n - 0.5
    grid = np.stack(np.meshgrid(*([off * h] * d), indexing="ij"), axis=-1).reshape(-1, d)
    if green.homogeneous:
        return float(np.mean(green.of_displacement(grid)))
    return float(np.mean(green(center + grid, center)))


def martin_kernel_matrix(domain: Domain, T: float, K: CellSet, rho, convention=DiffusionConvention.STANDARD) -> CapacityProblem:
    """Martin kernel ``G(x_i, x_j) / G(ρ, x_j)`` on the cells of ``K``.

    The diagonal uses the cell average of ``G(·, x_j)`` (midpoint
    sub-sampling, ``12`` points per axis), which is finite although ``G``
    is singular on the diagonal.
    """
    rho = np.asarray(rho, dtype=float)
    green = GreenFunction(domain, T, convention)
    c = K.centers
    if np.any(np.max(np.abs(domain.displacement(rho, c)), axis=-1) <= 0.5 * K.spacing):
        raise ValueError("root lies inside the discretised set")
    m = len(K)
    if green.homogeneous and K.index is not None:
        # tabulate on the lattice of index differences
        idx = K.index
        span = idx.max(axis=0) - idx.min(axis=0)
        rng = [np.arange(-s, s + 1) for s in span]
        lattice = np.stack(np.meshgrid(*rng, indexing="ij"), axis=-1)
        zero = tuple(span)
        disp = lattice * K.spacing
        flat = disp.reshape(-1, disp.shape[-1])
        nz = np.any(flat != 0, axis=1)
        table = np.empty(len(flat))
        table[nz] = green.of_displacement(flat[nz])
        table = table.reshape(lattice.shape[:-1])
        table[zero] = _cell_average(green, c[0], K.spacing)
        G = np.empty((m, m))
        for i in range(m):
            delta = idx - idx[i] + span
            G[i] = table[tuple(delta.T)]
    else:
        G = np.empty((m, m))
        for i in range(m):
            row = np.empty(m)
            others = np.arange(m) != i
            row[others] = green(c[i][None, :], c[others])
            row[i] = _cell_average(green, c[i], K.spacing)
            G[i] = row
    g_root = green(rho[None, :], c)
    M = G / g_root[None, :]
    if not np.all(np.isfinite(M)) or np.any(M < 0):
        raise ValueError("kernel entries must be finite and nonnegative")
    return CapacityProblem(K, rho, M, G, np.asarray(g_root))


@dataclass
class EnergyResult:
    weights: np.ndarray
    energy: float
    capacity: float
    iterations: int
    gap: float
    converged: bool
    energies: list = field(default_factory=list, repr=False)


def min_energy_measure(problem, tol: float = 1e-5, max_iters: int = 100_000) -> EnergyResult:
    """Minimise ``μᵀ ((M + Mᵀ)/2) μ`` over probability vectors.

    Away-step Frank–Wolfe with exact line search.  Stops when the
    Frank–Wolfe duality gap drops below ``tol * energy``; otherwise returns
    the last iterate with ``converged = False``.  The energy sequence is
    nonincreasing (checked every iteration).

    ``problem`` may be a :class:`CapacityProblem` or a square array.
    """
    if not (0 < tol <= 1e-4):
        raise ValueError("tol must lie in (0, 1e-4]")
    M = problem.kernel if isinstance(problem, CapacityProblem) else np.asarray(problem, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("kernel must be square")
    if not np.all(np.isfinite(M)):
        raise ValueError("kernel must be finite")
    Q = 0.5 * (M + M.T)
    m = Q.shape[0]
    diag = np.diag(Q).copy()
    s0 = int(np.argmin(diag))
    mu = np.zeros(m)
    mu[s0] = 1.0
    q = Q[:, s0].copy()  # Q mu
    E = float(diag[s0])
    energies = [E]
    gap = math.inf
    it = 0
    converged = False
    active = np.zeros(m, dtype=bool)
    active[s0] = True
    while it < max_iters:
        s = int(np.argmin(q))
        gap = 2.0 * (E - q[s])
        if gap <= tol * E:
            converged = True
            break
        act = np.flatnonzero(active)
        v = int(act[np.argmax(q[act])])
        fw_gain = E - q[s]
        away_gain = q[v] - E
        if fw_gain >= away_gain or mu[v] >= 1.0:
            col = Q[:, s]
            lin = q[s] - E  # μᵀQd for d = e_s - μ
            quad = Q[s, s] - 2.0 * q[s] + E
            amax = 1.0
            alpha = amax if quad <= 0 else min(amax, -lin / quad)
            alpha = max(alpha, 0.0)
            mu *= 1.0 - alpha
            mu[s] += alpha
            q = (1.0 - alpha) * q + alpha * col
            active[s] = True
        else:
            col = Q[:, v]
            lin = E - q[v]  # μᵀQd for d = μ - e_v
            quad = E - 2.0 * q[v] + Q[v, v]
            amax = mu[v] / (1.0 - mu[v])
            alpha = amax if quad <= 0 else min(amax, -lin / quad)
            alpha = max(alpha, 0.0)
            mu *= 1.0 + alpha
            mu[v] -= alpha
            q = (1.0 + alpha) * q - alpha * col
            if alpha >= amax * (1 - 1e-15):
                mu[v] = 0.0
                active[v] = False
        mu[mu < 0] = 0.0
        E_new = float(mu @ q)
        if E_new > E * (1 + 1e-12) + 1e-300:
            raise AssertionError(f"energy increased at iteration {it}: {E} -> {E_new}")
        E = min(E_new, E)
        energies.append(E)
        it += 1
    mu /= mu.sum()
    E = float(mu @ (Q @ mu))
    res = EnergyResult(mu, E, 1.0 / E, it, gap, converged, energies)
    if isinstance(problem, CapacityProblem):
        problem.weights = mu
    return res


# ---------------------------------------------------------------------------
# experiments


@dataclass
class SandwichReport:
    capacity: float
    p_hat: float
    stderr: float
    passed: bool
    lower_ok: bool
    upper_ok: bool
    energy: EnergyResult
    estimate: HittingEstimate
    cells: int


def capacity_sandwich_check(domain: Domain, K: CompactSet, rho, T: float, config: WalkConfig,
                            per_axis: int = 12, tol: float = 1e-5) -> SandwichReport:
    """Check ``½ Cap - 3σ <= p̂ <= Cap + 3σ`` for the hitting probability of
    ``K`` from ``ρ`` by time ``T``, with the Martin capacity built from the
    STANDARD-convention Green's function of the simulated walk."""
    cfg = replace(config, convention=DiffusionConvention.STANDARD)
    cells = K.cells(per_axis)
    prob = martin_kernel_matrix(domain, T, cells, rho, DiffusionConvention.STANDARD)
    er = min_energy_measure(prob, tol=tol)
    est = hitting_probability(domain, K.target(), T, np.asarray(rho, dtype=float), cfg.for_horizon(T))
    cap = er.capacity
    lo = est.p_hat >= 0.5 * cap - 3 * est.stderr
    hi = est.p_hat <= cap + 3 * est.stderr
    return SandwichReport(cap, est.p_hat, est.stderr, lo and hi, lo, hi, er, est, len(cells))


@dataclass(frozen=True)
class ErrorSetTarget(Target):
    """``B(x0, r) ∖ Ω``: points of the ball outside the nodal domain of ``x0``."""

    region: RegionExit
    center: tuple
    radius: float

    def inside(self, domain, x):
        r = _radial(domain, np.asarray(self.center, dtype=float), x)
        return (r <= self.radius) & self.region.inside(domain, x)

    def distance(self, domain, x):
        return np.where(self.inside(domain, x), 0.0, np.inf)

    def cross(self, st0, st1, s2h):
        return np.zeros(len(st0))


@dataclass
class VolumeCapacityRow:
    r0: float
    radius: float
    horizon: float
    vol_ratio: float
    vol_term: float
    cap_green: float
    cap_term: float
    cap_martin: float
    psi: float
    psi_stderr: float
    cells: int


@dataclass
class VolumeCapacityReport:
    rows: list
    vol_exponent: float | None
    cap_exponent: float | None
    psi_exponent: float | None
    calibration: list
    calibration_stable: bool
    trivial: bool


def _slope(r0s, vals):
    r0s = np.asarray(r0s, dtype=float)
    vals = np.asarray(vals, dtype=float)
    ok = vals > 0
    if ok.sum() < 2:
        return None
    return float(np.polyfit(np.log(r0s[ok]), np.log(vals[ok]), 1)[0])


def volume_ratio_capacity_bound(decomp: NodalDecomposition, component_id: int, r0s, t_ratio: float,
                                config: WalkConfig, per_axis: int = 12, tol: float = 1e-5) -> VolumeCapacityReport:
    """Volume ratio, capacity and hitting probability of the error set
    ``E = B(x0, r) ∖ Ω`` with ``r = r0/√λ`` and horizon ``t' = t_ratio r²``.

    For each ``r0`` the row holds ``Vol(E)/Vol(B)`` and its ``(n-2)/n``
    power, the Green capacity ``cap(E)`` scaled by ``r²/Vol(B)``, the
    Martin capacity and the Monte Carlo ``ψ_E(t', x0)``; exponents are
    log-log slopes over the sweep.  ``calibration`` lists
    ``ψ / (cap r²/Vol(B))`` per row, stable if within ±30% of its median.
    """
    dom = decomp.domain
    n = dom.dim
    if n != 3:
        raise ValueError("the isocapacitary chain needs dimension n = 3")
    pair = decomp.pair
    comp = decomp.component(component_id)
    x0 = np.asarray(comp.max_point, dtype=float)
    cfg = replace(config, convention=DiffusionConvention.STANDARD)
    rows = []
    for k, r0 in enumerate(r0s):
        r = r0 / math.sqrt(pair.lam)
        t = t_ratio * r * r
        ball = BallSet(tuple(x0), r).cells(per_axis)
        pts = ball.centers
        if isinstance(dom, FlatTorus):
            pts = dom.wrap(pts)
        indom = dom.contains(pts)
        member = np.zeros(len(pts), dtype=bool)
        member[indom] = _component_membership(decomp, component_id, pts[indom])
        err = ~member & indom
        bvol = 4.0 / 3.0 * math.pi * r**3
        vol_ratio = float(ball.measures[err].sum() / ball.measures.sum())
        if not err.any():
            rows.append(VolumeCapacityRow(r0, r, t, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0))
            continue
        E = CellSet(ball.centers[err], ball.measures[err], ball.spacing, ball.index[err])
        if isinstance(dom, FlatTorus):
            prob = martin_kernel_matrix(dom, t, E, x0, DiffusionConvention.STANDARD)
        else:
            prob = martin_kernel_matrix(Euclidean(3), t, E, x0, DiffusionConvention.STANDARD)
        er = min_energy_measure(prob, tol=tol)
        eg = min_energy_measure(prob.green, tol=tol)
        cap_g = eg.capacity
        target = ErrorSetTarget(RegionExit(pair, tuple(x0)), tuple(x0), r)
        est = hitting_probability(dom, target, t, x0, replace(cfg, seed=derive_seed(cfg.seed, k)).for_horizon(t))
        rows.append(VolumeCapacityRow(r0, r, t, vol_ratio, vol_ratio ** ((n - 2) / n), cap_g, cap_g * r * r / bvol,
                                      er.capacity, est.p_hat, est.stderr, len(E)))
    trivial = all(row.vol_ratio == 0 for row in rows)
    r0v = [row.r0 for row in rows]
    calib = [row.psi / row.cap_term if row.cap_term > 0 and row.psi > 0 else None for row in rows]
    vals = [c for c in calib if c is not None]
    stable = bool(vals) and all(0.7 <= c / float(np.median(vals)) <= 1.3 for c in vals)
    return VolumeCapacityReport(rows, _slope(r0v, [r.vol_ratio for r in rows]), _slope(r0v, [r.cap_term for r in rows]),
                                _slope(r0v, [r.psi for r in rows]), calib, stable or trivial, trivial)
