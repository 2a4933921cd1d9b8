"""Monte Carlo Brownian motion on the catalog domains.

Every estimator here runs on one sharded, block-seeded path engine, so all
targets passed to a single call (and nested targets passed to separate calls
with the same seed) are evaluated on identical paths.  Crossings between time
steps are corrected with the Brownian-bridge probability for a flat face,
``exp(-2 d0 d1 / (s2 h))``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np

from ._io import fmt
from .geometry import Box, Disk, Domain, Euclidean, FlatTorus, Sphere2, SubmanifoldUnion, Wedge
from .special import DiffusionConvention, kent_hitting_probability
from .spectral import Eigenpair, NodalComponent

__all__ = [
    "WalkConfig",
    "HittingEstimate",
    "FeynmanKacEstimate",
    "PathRecord",
    "Target",
    "BallTarget",
    "BallExterior",
    "HalfSpace",
    "UnionTarget",
    "BallMinusTube",
    "PredicateTarget",
    "RegionExit",
    "DomainExit",
    "ProjectedExterior",
    "simulate_path",
    "hitting_probability",
    "feynman_kac_expectation",
    "max_point_exit_check",
    "cylinder_factorization_check",
    "alpha_constant_estimate",
    "derive_seed",
]

HIST_BINS = 64
BLOCK = 16384


@dataclass(frozen=True)
class WalkConfig:
    """Sampling parameters.

    The walk takes ``ceil(horizon / dt)`` equal steps.  Operations that run
    to a different time ``t`` keep that step count, so ``dt`` acts as the
    relative resolution ``dt / horizon``.
    """

    convention: DiffusionConvention = DiffusionConvention.STANDARD
    dt: float = 1e-3
    horizon: float = 1.0
    samples: int = 100_000
    seed: int = 0
    shards: int = 16
    bridge_correction: bool = True

    def __post_init__(self):
        object.__setattr__(self, "convention", DiffusionConvention(self.convention))
        if not (self.dt > 0 and self.horizon > 0):
            raise ValueError("dt and horizon must be positive")
        if self.dt > self.horizon:
            raise ValueError("dt must not exceed the horizon")
        if self.samples < 100:
            raise ValueError("at least 100 samples are required")
        if self.shards < 1:
            raise ValueError("shards must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    @property
    def steps(self):
        return max(1, int(math.ceil(self.horizon / self.dt - 1e-9)))

    def for_horizon(self, t):
        """Copy running to time ``t`` with the same number of steps."""
        return replace(self, horizon=t, dt=t / self.steps)


def derive_seed(seed: int, *tags) -> int:
    """Deterministic 64-bit child seed of ``seed`` labelled by integer/str tags."""
    ints = [int(seed)]
    for t in tags:
        ints.append(int.from_bytes(str(t).encode(), "little") % (2**63) if isinstance(t, str) else int(t))
    return int(np.random.SeedSequence(ints).generate_state(1, np.uint64)[0])


@dataclass
class HittingEstimate:
    p_hat: float
    stderr: float
    samples: int
    hits: int
    histogram: np.ndarray
    horizon: float

    @property
    def bin_edges(self):
        return np.linspace(0.0, self.horizon, HIST_BINS + 1)

    def ci(self, k=3.0):
        return self.p_hat - k * self.stderr, self.p_hat + k * self.stderr

    def to_csv(self, path):
        e = self.bin_edges
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(["bin_start", "bin_end", "count"])
            for a, b, c in zip(e[:-1], e[1:], self.histogram):
                w.writerow([fmt(a), fmt(b), int(c)])


def _estimate(hit_mask, hit_steps, n_steps, horizon):
    n = hit_mask.size
    hits = int(hit_mask.sum())
    p = hits / n
    times = (hit_steps[hit_mask] / n_steps) * horizon
    hist, _ = np.histogram(times, bins=HIST_BINS, range=(0.0, horizon))
    return HittingEstimate(p, math.sqrt(p * (1 - p) / n), n, hits, hist, horizon)


@dataclass
class FeynmanKacEstimate:
    estimate: float
    stderr: float
    reference: float
    samples: int
    survival: float

    @property
    def deviation(self):
        return self.estimate - self.reference

    @property
    def within(self):
        return abs(self.deviation) <= 3 * self.stderr


# ---------------------------------------------------------------------------
# targets


def _bridge(d0, d1, s2h):
    """Probability that a Brownian bridge between points at distances d0, d1
    from a flat face touches it (1 when either endpoint is on or past it)."""
    a = (-2.0 / s2h) * (d0 * d1)
    # exp(-60) is below double resolution of 1 - p; clamping avoids slow underflow
    np.maximum(a, -60.0, out=a)
    return np.exp(a)


def _cross_faces(f0, f1, s2h):
    """Crossing probability of any of several flat faces, ``1 - prod(1 - p_f)``."""
    surv = 1.0 - _bridge(f0[:, 0], f1[:, 0], s2h)
    for c in range(1, f0.shape[1]):
        surv *= 1.0 - _bridge(f0[:, c], f1[:, c], s2h)
    return 1.0 - surv


def _any_cols(m):
    out = m[:, 0].copy()
    for c in range(1, m.shape[1]):
        out |= m[:, c]
    return out


def _norm(v):
    return np.sqrt(np.einsum("ij,ij->i", v, v))


class Target:
    """A closed set the walk may hit.

    Subclasses give ``distance`` (zero inside, a lower bound outside);
    the engine caches ``state`` from the previous step so each position is
    measured once.
    """

    counts_domain_exit = False

    def distance(self, domain, x):
        raise NotImplementedError

    def inside(self, domain, x):
        return self.distance(domain, x) <= 0

    def state(self, domain, x):
        return self.distance(domain, x)

    def hit(self, domain, x, st):
        return st <= 0

    def cross(self, st0, st1, s2h):
        return _bridge(st0, st1, s2h)

    def crossing(self, domain, x0, x1, s2h):
        return self.cross(self.state(domain, x0), self.state(domain, x1), s2h)


def _radial(domain, c, x):
    if isinstance(domain, Sphere2):
        return domain._distance(np.broadcast_to(c, x.shape), x)
    if isinstance(domain, FlatTorus):
        return np.linalg.norm(domain.displacement(c, x), axis=-1)
    return _norm(x - c)


@dataclass(frozen=True)
class BallTarget(Target):
    center: tuple
    radius: float

    def distance(self, domain, x):
        return np.maximum(_radial(domain, np.asarray(self.center, dtype=float), x) - self.radius, 0.0)


@dataclass(frozen=True)
class BallExterior(Target):
    """``{x : d(x, center) >= radius}``: hitting it means leaving the open ball."""

    center: tuple
    radius: float

    def distance(self, domain, x):
        return np.maximum(self.radius - _radial(domain, np.asarray(self.center, dtype=float), x), 0.0)


@dataclass(frozen=True)
class HalfSpace(Target):
    """``{x : <normal, x> >= offset}``."""

    normal: tuple
    offset: float

    def distance(self, domain, x):
        n = np.asarray(self.normal, dtype=float)
        return np.maximum(self.offset - x @ (n / np.linalg.norm(n)), 0.0)


@dataclass(frozen=True)
class UnionTarget(Target):
    parts: tuple

    def distance(self, domain, x):
        return np.min([p.distance(domain, x) for p in self.parts], axis=0)


@dataclass(frozen=True)
class ProjectedExterior(Target):
    """Leaving radius ``radius`` in the coordinates ``axes`` (a cylinder wall)."""

    axes: tuple
    radius: float

    def distance(self, domain, x):
        return np.maximum(self.radius - _norm(x[:, list(self.axes)]), 0.0)


@dataclass(frozen=True)
class BallMinusTube(Target):
    """Closed ball minus the open ``eps``-tube around a submanifold union."""

    center: tuple
    radius: float
    sigma: SubmanifoldUnion
    eps: float

    def distance(self, domain, x):
        r = _radial(domain, np.asarray(self.center, dtype=float), x)
        ds = self.sigma.distance(x)
        inside = (r <= self.radius) & (ds >= self.eps)
        d = np.maximum(r - self.radius, self.eps - ds)
        return np.where(inside, 0.0, np.maximum(d, 1e-300))


@dataclass(frozen=True)
class PredicateTarget(Target):
    """Arbitrary vectorised predicate; no bridge correction."""

    predicate: object

    def inside(self, domain, x):
        return np.asarray(self.predicate(x), dtype=bool)

    def distance(self, domain, x):
        return np.where(self.inside(domain, x), 0.0, np.inf)

    def cross(self, st0, st1, s2h):
        return np.zeros(len(st0))


@dataclass(frozen=True)
class DomainExit(Target):
    """Leaving a bounded domain; ``1 - p̂`` is the survival probability."""

    counts_domain_exit = True

    def distance(self, domain, x):
        return np.full(len(x), np.inf)

    def cross(self, st0, st1, s2h):
        return np.zeros(len(st0))


@dataclass(frozen=True)
class RegionExit(Target):
    """Complement of the nodal domain of ``pair`` containing ``ref``.

    Product eigenfunctions compare exact cell indices; otherwise the sign
    of the eigenfunction is compared with the sign at ``ref``.  Leaving the
    underlying domain counts as leaving the region.
    """

    pair: Eigenpair
    ref: tuple
    counts_domain_exit = True

    def inside(self, domain, x):
        ref = np.asarray(self.ref, dtype=float)[None, :]
        out = ~domain.contains(x)
        if self.pair.cell_fn is not None:
            out |= _any_cols(self.pair.cell_fn(x) != self.pair.cell_fn(ref))
        else:
            out |= np.sign(self.pair.func(ref)) * self.pair.func(x) <= 0
        return out

    def distance(self, domain, x):
        f = self.pair.face_distances(x)
        return np.where(self.inside(domain, x), 0.0, np.maximum(np.min(f, axis=-1), 0.0))

    def state(self, domain, x):
        return np.maximum(self.pair.face_distances(x), 0.0)

    def hit(self, domain, x, st):
        return self.inside(domain, x)

    def cross(self, st0, st1, s2h):
        return _cross_faces(st0, st1, s2h)


# ---------------------------------------------------------------------------
# engine

_UNBOUNDED = (Euclidean, FlatTorus, Sphere2)


def _domain_faces(domain, x):
    """Distances to the flat (or locally flattened) boundary faces of the domain."""
    if isinstance(domain, Box):
        hi = np.asarray(domain.sides)
        return np.concatenate([x, hi - x], axis=-1)
    if isinstance(domain, Disk):
        return (domain.radius - _norm(x))[:, None]
    if isinstance(domain, Wedge):
        d0, d1 = domain.boundary_distances(x)
        cols = [d0, d1]
        if math.isfinite(domain.radius):
            cols.append(domain.radius - _norm(x))
        return np.stack(cols, axis=-1)
    return None


def _step(domain, x, z, sd):
    if isinstance(domain, Sphere2):
        v = z - np.sum(z * x, axis=-1, keepdims=True) * x
        n = np.linalg.norm(v, axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = np.where(n > 0, v / n, 0.0)
        return domain.geodesic_step(x, u, sd * n[:, 0])
    if isinstance(domain, FlatTorus):
        return domain.wrap(x + sd * z)
    return x + sd * z


def _noise_dim(domain):
    return 3 if isinstance(domain, Sphere2) else domain.dim


@dataclass
class _RunResult:
    hit_steps: np.ndarray  # (N, targets), -1 when never hit
    kill_steps: np.ndarray  # (N,), -1 when alive at the horizon
    endpoints: np.ndarray | None
    n_steps: int

    def hit(self, j):
        return self.hit_steps[:, j] >= 0


def _shard_sizes(n, shards):
    base, extra = divmod(n, shards)
    return [base + (1 if s < extra else 0) for s in range(shards)]


def _take(a, idx):
    return a if isinstance(idx, slice) else a[idx]


def _run(domain: Domain, x0, horizon, config: WalkConfig, targets=(), kill: Target | None = None, endpoints=False):
    """Core sampler.  Returns per-path first-hit steps, kill steps and endpoints.

    Paths are processed in blocks; each block draws a full-size normal and
    uniform batch at every step until all of its paths are resolved, so a
    path's trajectory depends only on (seed, shard, block, position).
    Kill is resolved before targets within a step; a target that
    ``counts_domain_exit`` is hit when the walk leaves a bounded domain.
    """
    x0 = np.asarray(x0, dtype=float)
    if not np.all(domain.contains(x0[None, :])):
        raise ValueError("starting point outside the domain")
    n_steps = config.steps
    h = horizon / n_steps
    s2h = config.convention.variance_rate * h
    sd = math.sqrt(s2h)
    nt = len(targets)
    N = config.samples
    hit_steps = np.full((N, nt), -1, dtype=np.int64)
    kill_steps = np.full(N, -1, dtype=np.int64)
    ends = np.full((N, x0.size), np.nan) if endpoints else None
    bridge = config.bridge_correction
    nd = _noise_dim(domain)
    bounded = not isinstance(domain, _UNBOUNDED)

    start = x0[None, :]
    start_hit = np.array([bool(t.inside(domain, start)[0]) for t in targets], dtype=bool)
    start_killed = bool(kill is not None and kill.inside(domain, start)[0])
    start_states = [t.state(domain, start) for t in targets]
    kill_state0 = kill.state(domain, start) if kill is not None else None
    face_state0 = np.maximum(_domain_faces(domain, start), 0.0) if bounded else None

    offset = 0
    for s, ns in enumerate(_shard_sizes(N, config.shards)):
        for b, b0 in enumerate(range(0, ns, BLOCK)):
            B = min(BLOCK, ns - b0)
            sl = slice(offset + b0, offset + b0 + B)
            hs = hit_steps[sl]
            ks = kill_steps[sl]
            if start_killed:
                ks[:] = 0
                continue
            hs[:, start_hit] = 0
            rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), s, b]))
            x = np.repeat(start, B, axis=0)
            alive = np.ones(B, dtype=bool)
            pending = np.repeat(~start_hit[None, :], B, axis=0)
            states = [np.repeat(st, B, axis=0) for st in start_states]
            kstate = np.repeat(kill_state0, B, axis=0) if kill is not None else None
            fstate = np.repeat(face_state0, B, axis=0) if face_state0 is not None else None
            for i in range(n_steps):
                active = alive & pending.any(axis=1) if not endpoints else alive
                n_act = int(np.count_nonzero(active))
                if n_act == 0:
                    break
                z = rng.standard_normal((B, nd))
                u = rng.random((B, 2))
                # dense masked updates unless most paths are resolved
                dense = n_act * 4 >= B
                idx = slice(None) if dense else np.flatnonzero(active)
                xa = _take(x, idx)
                xn = _step(domain, xa, _take(z, idx), sd)
                ua = _take(u, idx)
                if bounded:
                    fn = _domain_faces(domain, xn)
                    out_dom = _any_cols(fn < 0) if isinstance(domain, Box) else ~domain.contains(xn)
                    np.maximum(fn, 0.0, out=fn)
                    if bridge:
                        out_dom |= ua[:, 0] < _cross_faces(_take(fstate, idx), fn, s2h)
                    fstate[idx] = fn
                else:
                    out_dom = np.zeros(len(xn), dtype=bool)
                killed = out_dom.copy()
                if kill is not None:
                    kn = kill.state(domain, xn)
                    kk = kill.hit(domain, xn, kn)
                    if bridge:
                        kk |= ua[:, 0] < kill.cross(_take(kstate, idx), kn, s2h)
                    kstate[idx] = kn
                    killed |= kk
                for j, t in enumerate(targets):
                    pj = _take(pending[:, j], idx)
                    if dense:
                        pj = pj & active
                    if not pj.any():
                        continue
                    stn = t.state(domain, xn)
                    hit = t.hit(domain, xn, stn)
                    if bridge:
                        hit |= ua[:, 1] < t.cross(_take(states[j], idx), stn, s2h)
                    states[j][idx] = stn
                    if t.counts_domain_exit and kill is None:
                        hit = pj & (hit | out_dom)
                    else:
                        hit &= pj & ~killed
                    rows = np.arange(B)[idx][hit]
                    hs[rows, j] = i + 1
                    pending[rows, j] = False
                if dense:
                    killed &= active
                if killed.any():
                    dead = np.arange(B)[idx][killed]
                    ks[dead] = i + 1
                    alive[dead] = False
                if dense:
                    x = xn
                else:
                    x[idx] = xn
            if endpoints:
                e = ends[sl]
                e[alive] = x[alive]
        offset += ns
    return _RunResult(hit_steps, kill_steps, ends, n_steps)


# ---------------------------------------------------------------------------
# public operations


@dataclass
class PathRecord:
    times: np.ndarray
    positions: np.ndarray
    stopped: bool
    stop_time: float | None


def simulate_path(domain: Domain, x0, config: WalkConfig, stop=None) -> PathRecord:
    """One path at the step times ``0, h, ..., T``; stops at the first step
    where ``stop(x)`` is true (bridge crossings are not applied here)."""
    x0 = np.asarray(x0, dtype=float)
    domain.check_points(x0)
    n_steps = config.steps
    h = config.horizon / n_steps
    sd = math.sqrt(config.convention.variance_rate * h)
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), 0, 0]))
    pos = [x0]
    x = x0[None, :]
    for i in range(n_steps):
        x = _step(domain, x, rng.standard_normal((1, _noise_dim(domain))), sd)
        pos.append(x[0])
        if stop is not None and bool(stop(x[0])):
            return PathRecord(np.arange(i + 2) * h, np.array(pos), True, (i + 1) * h)
    return PathRecord(np.arange(n_steps + 1) * h, np.array(pos), False, None)


def hitting_probability(domain: Domain, target, t: float, x0, config: WalkConfig, kill: Target | None = None):
    """Probability that the walk from ``x0`` meets ``target`` within time ``t``.

    ``target`` may be a single :class:`Target` or a sequence; a sequence is
    evaluated on one shared set of paths and a list of estimates returned.
    Paths leaving a bounded domain are killed (Dirichlet boundary).
    """
    many = isinstance(target, (list, tuple))
    targets = list(target) if many else [target]
    targets = [t_ if isinstance(t_, Target) else PredicateTarget(t_) for t_ in targets]
    if t < 0:
        raise ValueError("time must be nonnegative")
    x0 = np.asarray(x0, dtype=float)
    if t == 0:
        res = []
        for tg in targets:
            inside = bool(tg.inside(domain, x0[None, :])[0])
            n = config.samples
            res.append(HittingEstimate(float(inside), 0.0, n, n if inside else 0, np.zeros(HIST_BINS, dtype=int), 0.0))
        return res if many else res[0]
    run = _run(domain, x0, t, config.for_horizon(t), targets, kill)
    out = [_estimate(run.hit(j), run.hit_steps[:, j], run.n_steps, t) for j in range(len(targets))]
    return out if many else out[0]


def _component_start(pair, component, x0):
    if x0 is None:
        if component is None:
            raise ValueError("need a component or a starting point")
        x0 = component.max_point
    return np.asarray(x0, dtype=float)


def feynman_kac_expectation(pair: Eigenpair, component: NodalComponent | None, t: float, x0, config: WalkConfig) -> FeynmanKacEstimate:
    """``E_x[φ(ω(t)) 1{ω([0,t]) ⊂ Ω}]`` with Ω the nodal domain containing ``x0``.

    The reference ``e^{-λt} φ(x0)`` is exact in the ANALYST convention; in
    STANDARD time the reference uses ``e^{-λt/2}``.
    """
    x0 = _component_start(pair, component, x0)
    dom = pair.domain
    phi0 = float(pair.func(x0[None, :])[0])
    rate = 1.0 if config.convention is DiffusionConvention.ANALYST else 0.5
    ref = math.exp(-rate * pair.lam * t) * phi0
    n = config.samples
    if t == 0:
        return FeynmanKacEstimate(phi0, 0.0, ref, n, 1.0)
    kill = RegionExit(pair, tuple(x0.tolist()))
    run = _run(dom, x0, t, config.for_horizon(t), (), kill, endpoints=True)
    alive = run.kill_steps < 0
    vals = np.zeros(n)
    if alive.any():
        vals[alive] = pair.func(run.endpoints[alive])
    est = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(n))
    return FeynmanKacEstimate(est, se, ref, n, float(alive.mean()))


@dataclass
class ExitCheckReport:
    psi: HittingEstimate
    bound: float
    t0: float
    x0: tuple
    passed: bool


def max_point_exit_check(pair: Eigenpair, component: NodalComponent, t0: float, config: WalkConfig) -> ExitCheckReport:
    """Estimate of the probability of leaving the nodal domain within
    ``t0 / λ`` from its max point, against the bound ``1 - e^{-t0}``."""
    cfg = replace(config, convention=DiffusionConvention.ANALYST)
    x0 = np.asarray(component.max_point, dtype=float)
    t = t0 / pair.lam
    est = hitting_probability(pair.domain, RegionExit(pair, tuple(x0.tolist())), t, x0, cfg.for_horizon(t))
    bound = 1.0 - math.exp(-t0)
    return ExitCheckReport(est, bound, t0, tuple(x0.tolist()), est.p_hat <= bound + 3 * est.stderr)


@dataclass
class CylinderReport:
    confinement: HittingEstimate  # probability of staying inside radius R (k-dim)
    exit_projection: HittingEstimate  # (n-k)-dim exit of radius r0
    product: float
    product_stderr: float
    joint: float
    joint_stderr: float

    @property
    def difference(self):
        return self.joint - self.product


def cylinder_factorization_check(n: int, k: int, R: float, r0: float, t0: float, config: WalkConfig) -> CylinderReport:
    """Compare the factorised bound (independent k-dim confinement times
    (n-k)-dim exit) with the joint event on full n-dim paths."""
    if not (0 <= k <= n - 1):
        raise ValueError("need 0 <= k <= n - 1")
    cfg = replace(config, convention=DiffusionConvention.STANDARD).for_horizon(t0)
    N = cfg.samples
    if k == 0:
        conf = HittingEstimate(1.0, 0.0, N, N, np.zeros(HIST_BINS, dtype=int), t0)
    else:
        ek = hitting_probability(Euclidean(k), BallExterior((0.0,) * k, R), t0, np.zeros(k),
                                 replace(cfg, seed=derive_seed(cfg.seed, "confine")))
        conf = HittingEstimate(1.0 - ek.p_hat, ek.stderr, N, N - ek.hits, ek.histogram, t0)
    ex = hitting_probability(Euclidean(n - k), BallExterior((0.0,) * (n - k), r0), t0, np.zeros(n - k),
                             replace(cfg, seed=derive_seed(cfg.seed, "exit")))
    prod = conf.p_hat * ex.p_hat
    prod_se = math.sqrt((conf.p_hat * ex.stderr) ** 2 + (ex.p_hat * conf.stderr) ** 2)
    targets = [ProjectedExterior(tuple(range(k, n)), r0)]
    if k:
        targets.append(ProjectedExterior(tuple(range(k)), R))
    run = _run(Euclidean(n), np.zeros(n), t0, replace(cfg, seed=derive_seed(cfg.seed, "exit")), targets)
    ev = run.hit(0)
    if k:
        ev &= ~run.hit(1)
    joint = float(ev.mean())
    return CylinderReport(conf, ex, prod, prod_se, joint, math.sqrt(joint * (1 - joint) / N))


@dataclass
class AlphaReport:
    ratio: float
    numerator: HittingEstimate
    denominator: HittingEstimate
    radius: float
    time: float
    widened: bool

    def __float__(self):
        return self.ratio


def alpha_constant_estimate(sigma: SubmanifoldUnion, pair: Eigenpair, component: NodalComponent, r0: float, t0: float,
                            config: WalkConfig, tube_radius: float | None = None) -> AlphaReport:
    """Empirical ``C_λ``: hitting probability of ``B ∖ N_ε(Σ)`` over that of
    ``∂B`` for ``B = B(x0, r0/√λ)``, time ``t0/λ``, both on the same paths.

    ``ε`` defaults to the ball radius.  When the denominator has fewer than
    ``10`` hits the ratio is flagged as having a widened interval.
    """
    x0 = np.asarray(component.max_point, dtype=float)
    r = r0 / math.sqrt(pair.lam)
    t = t0 / pair.lam
    eps = r if tube_radius is None else tube_radius
    cfg = replace(config, convention=DiffusionConvention.ANALYST).for_horizon(t)
    num, den = hitting_probability(pair.domain, [BallMinusTube(tuple(x0), r, sigma, eps), BallExterior(tuple(x0), r)], t, x0, cfg)
    widened = den.hits < 10
    ratio = num.p_hat / den.p_hat if den.hits else math.inf
    return AlphaReport(ratio, num, den, r, t, widened)


def kent_reference(dim, radius, t, convention=DiffusionConvention.STANDARD):
    """Series value of the exit probability for cross-checks."""
    return kent_hitting_probability(dim, radius, t, convention)
