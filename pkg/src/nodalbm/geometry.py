"""Model domains, geodesic distance, ball volumes and tubular neighbourhoods
of finite unions of parametrised submanifolds.

Points are numpy arrays in the domain's ambient coordinates: Cartesian for
the flat members, unit 3-vectors for :class:`Sphere2`.  Every vectorised
routine accepts a trailing coordinate axis and broadcasts over the others.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import optimize

__all__ = [
    "Domain",
    "Box",
    "FlatTorus",
    "Disk",
    "Sphere2",
    "Wedge",
    "Euclidean",
    "domain_from_spec",
    "Piece",
    "PointPiece",
    "Segment",
    "Circle",
    "FlatStrip",
    "GeodesicArc",
    "GraphPatch",
    "SubmanifoldUnion",
    "TubularNeighborhood",
    "UnionDistance",
    "dist_to_union",
    "admissible_up_to",
    "piece_from_spec",
    "union_from_spec",
]

POINT_TOL = 1e-9
PROJECTION_SLACK = 1e-6
DEFAULT_BALL_RESOLUTION = 400


def _as_points(x, ambient):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != ambient:
        raise ValueError(f"expected points with {ambient} coordinates, got shape {x.shape}")
    return x


def _interval_overlap(lo, hi, a, b):
    return np.clip(np.minimum(hi, b) - np.maximum(lo, a), 0.0, None)


def _midpoints(lo, hi, n):
    """Midpoint nodes of n equal cells on [lo, hi] (broadcasting), and widths."""
    lo = np.asarray(lo, dtype=float)[..., None]
    hi = np.asarray(hi, dtype=float)[..., None]
    w = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * w, w


class Domain:
    """Base class for the catalog geometries."""

    dim: int
    ambient_dim: int
    kind: str = "domain"

    def contains(self, x):
        raise NotImplementedError

    def check_points(self, *pts):
        for p in pts:
            if not np.all(self.contains(p)):
                raise ValueError(f"point outside {self.kind} domain: {np.asarray(p).tolist()}")

    def wrap(self, x):
        return np.asarray(x, dtype=float)

    def displacement(self, x, y):
        """Tangent displacement from x to y in flat charts (minimum image on tori)."""
        return np.asarray(y, dtype=float) - np.asarray(x, dtype=float)

    def distance(self, x, y):
        """Geodesic distance; raises ``ValueError`` for points outside the domain."""
        x = _as_points(x, self.ambient_dim)
        y = _as_points(y, self.ambient_dim)
        self.check_points(x, y)
        out = self._distance(x, y)
        return float(out) if np.ndim(out) == 0 else out

    def _distance(self, x, y):
        return np.linalg.norm(self.displacement(x, y), axis=-1)

    def geodesic_step(self, x, v, h):
        """Exponential-map step of length ``h`` along unit direction ``v``."""
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        h = np.asarray(h, dtype=float)
        if h.ndim:
            h = h[..., None]
        return self.wrap(x + h * v)

    @property
    def volume(self) -> float:
        raise NotImplementedError

    @property
    def diameter(self) -> float:
        raise NotImplementedError

    def ball_volume(self, center, r, resolution=DEFAULT_BALL_RESOLUTION):
        raise NotImplementedError

    def spec(self) -> dict:
        raise NotImplementedError


def _ball_volume_flat(center, r, bounds, n):
    """Volume of the Euclidean ball B(center, r) clipped to an axis box.

    Nested midpoint quadrature over all but the last axis with the last
    axis chord evaluated exactly.  ``bounds`` is a (d, 2) array (use
    infinities for unclipped axes).
    """
    c = np.asarray(center, dtype=float)
    d = c.size
    lo = np.maximum(c - r, bounds[:, 0])
    hi = np.minimum(c + r, bounds[:, 1])
    if np.any(hi <= lo):
        return 0.0
    if d == 1:
        return float(hi[0] - lo[0])
    if d == 2:
        x, w = _midpoints(lo[0], hi[0], n)
        s = np.sqrt(np.clip(r * r - (x - c[0]) ** 2, 0.0, None))
        return float(np.sum(w * _interval_overlap(c[1] - s, c[1] + s, bounds[1, 0], bounds[1, 1])))
    if d == 3:
        x, wx = _midpoints(lo[0], hi[0], n)
        rho = np.sqrt(np.clip(r * r - (x - c[0]) ** 2, 0.0, None))
        ylo = np.maximum(c[1] - rho, bounds[1, 0])
        yhi = np.minimum(c[1] + rho, bounds[1, 1])
        yhi = np.maximum(yhi, ylo)
        y, wy = _midpoints(ylo, yhi, n)
        s = np.sqrt(np.clip(rho[:, None] ** 2 - (y - c[1]) ** 2, 0.0, None))
        area = np.sum(wy * _interval_overlap(c[2] - s, c[2] + s, bounds[2, 0], bounds[2, 1]), axis=-1)
        return float(np.sum(wx * area))
    raise ValueError("ball volume implemented for dimensions 1-3")


@dataclass(frozen=True)
class Box(Domain):
    """Axis box ``[0, a_1] x ... x [0, a_d]``."""

    sides: tuple = (1.0, 1.0)
    kind = "box"

    def __post_init__(self):
        sides = tuple(float(s) for s in np.atleast_1d(self.sides))
        if not 1 <= len(sides) <= 3 or min(sides) <= 0:
            raise ValueError("Box needs 1-3 positive side lengths")
        object.__setattr__(self, "sides", sides)

    @property
    def dim(self):
        return len(self.sides)

    ambient_dim = dim

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        a = np.asarray(self.sides)
        return np.all((x >= -POINT_TOL) & (x <= a + POINT_TOL), axis=-1)

    @property
    def volume(self):
        return float(np.prod(self.sides))

    @property
    def diameter(self):
        return float(np.linalg.norm(self.sides))

    def bounds(self):
        return np.array([[0.0, a] for a in self.sides])

    def ball_volume(self, center, r, resolution=DEFAULT_BALL_RESOLUTION):
        """Volume of ``B(center, r) ∩ box``."""
        return _ball_volume_flat(center, r, self.bounds(), resolution)

    def spec(self):
        return {"kind": "box", "sides": list(self.sides)}


@dataclass(frozen=True)
class FlatTorus(Domain):
    """Flat torus ``R^d / (L_1 Z x ... x L_d Z)`` with fundamental cell ``[0, L)``."""

    periods: tuple = (1.0, 1.0)
    kind = "torus"

    def __post_init__(self):
        p = tuple(float(s) for s in np.atleast_1d(self.periods))
        if not 1 <= len(p) <= 3 or min(p) <= 0:
            raise ValueError("FlatTorus needs 1-3 positive periods")
        object.__setattr__(self, "periods", p)

    @property
    def dim(self):
        return len(self.periods)

    ambient_dim = dim

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        return np.all(np.isfinite(x), axis=-1)

    def wrap(self, x):
        return np.mod(np.asarray(x, dtype=float), np.asarray(self.periods))

    def displacement(self, x, y):
        L = np.asarray(self.periods)
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        return d - L * np.round(d / L)

    @property
    def volume(self):
        return float(np.prod(self.periods))

    @property
    def diameter(self):
        return 0.5 * float(np.linalg.norm(self.periods))

    def ball_volume(self, center, r, resolution=DEFAULT_BALL_RESOLUTION):
        if r >= 0.5 * min(self.periods):
            raise ValueError("radius must stay below half the shortest period")
        inf = np.full((self.dim, 2), np.inf)
        inf[:, 0] = -np.inf
        return _ball_volume_flat(np.zeros(self.dim), r, inf, resolution)

    def spec(self):
        return {"kind": "torus", "periods": list(self.periods)}


@dataclass(frozen=True)
class Euclidean(Domain):
    """Whole space ``R^d``."""

    d: int = 3
    kind = "euclidean"

    def __post_init__(self):
        if self.d not in (1, 2, 3):
            raise ValueError("Euclidean dimension must be 1, 2 or 3")

    @property
    def dim(self):
        return self.d

    ambient_dim = dim

    def contains(self, x):
        return np.all(np.isfinite(np.asarray(x, dtype=float)), axis=-1)

    @property
    def volume(self):
        return math.inf

    @property
    def diameter(self):
        return math.inf

    def ball_volume(self, center, r, resolution=DEFAULT_BALL_RESOLUTION):
        inf = np.full((self.d, 2), np.inf)
        inf[:, 0] = -np.inf
        return _ball_volume_flat(np.zeros(self.d), r, inf, resolution)

    def spec(self):
        return {"kind": "euclidean", "dim": self.d}


@dataclass(frozen=True)
class Disk(Domain):
    """Closed disk of radius ``radius`` centred at the origin."""

    radius: float = 1.0
    kind = "disk"
    dim = 2
    ambient_dim = 2

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")

    def contains(self, x):
        return np.linalg.norm(np.asarray(x, dtype=float), axis=-1) <= self.radius + POINT_TOL

    @property
    def volume(self):
        return math.pi * self.radius**2

    @property
    def diameter(self):
        return 2.0 * self.radius

    def ball_volume(self, center, r, resolution=DEFAULT_BALL_RESOLUTION):
        """Area of ``B(center, r) ∩ disk`` by midpoint rule over x with exact y-chords."""
        c = np.asarray(center, dtype=float)
        R = self.radius
        lo, hi = max(c[0] - r, -R), min(c[0] + r, R)
        if hi <= lo:
            return 0.0
        x, w = _midpoints(lo, hi, resolution)
        s1 = np.sqrt(np.clip(r * r - (x - c[0]) ** 2, 0.0, None))
        s2 = np.sqrt(np.clip(R * R - x * x, 0.0, None))
        return float(np.sum(w * _interval_overlap(c[1] - s1, c[1] + s1, -s2, s2)))

    def spec(self):
        return {"kind": "disk", "radius": self.radius}


@dataclass(frozen=True)
class Sphere2(Domain):
    """Unit two-sphere; points are unit vectors in R^3."""

    kind = "sphere2"
    dim = 2
    ambient_dim = 3

    def contains(self, x):
        return np.abs(np.linalg.norm(np.asarray(x, dtype=float), axis=-1) - 1.0) <= 1e-7

    def wrap(self, x):
        x = np.asarray(x, dtype=float)
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    def _distance(self, x, y):
        # atan2 form is accurate near 0 and pi
        cr = np.linalg.norm(np.cross(x, y), axis=-1)
        dot = np.sum(x * y, axis=-1)
        return np.arctan2(cr, dot)

    def displacement(self, x, y):
        """Logarithm map: tangent vector at x pointing to y with length d(x, y)."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        dot = np.clip(np.sum(x * y, axis=-1, keepdims=True), -1.0, 1.0)
        perp = y - dot * x
        n = np.linalg.norm(perp, axis=-1, keepdims=True)
        ang = np.arctan2(n, dot)
        with np.errstate(invalid="ignore", divide="ignore"):
            v = np.where(n > 0, perp / n, 0.0)
        return v * ang

    def geodesic_step(self, x, v, h):
        x = np.asarray(x, dtype=float)
        v = np.asarray(v, dtype=float)
        h = np.asarray(h, dtype=float)
        if h.ndim:
            h = h[..., None]
        return self.wrap(np.cos(h) * x + np.sin(h) * v)

    @staticmethod
    def tangent_basis(x):
        """Orthonormal tangent frame (e1, e2) at each point of ``x``."""
        x = np.asarray(x, dtype=float)
        ref = np.where(np.abs(x[..., 2:3]) < 0.9, np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
        e1 = np.cross(ref, x)
        e1 /= np.linalg.norm(e1, axis=-1, keepdims=True)
        e2 = np.cross(x, e1)
        return e1, e2

    @staticmethod
    def from_angles(theta, phi):
        """Point with colatitude ``theta`` and longitude ``phi``."""
        theta = np.asarray(theta, dtype=float)
        phi = np.asarray(phi, dtype=float)
        st = np.sin(theta)
        return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)

    @property
    def volume(self):
        return 4.0 * math.pi

    @property
    def diameter(self):
        return math.pi

    def ball_volume(self, center, r, resolution=DEFAULT_BALL_RESOLUTION):
        """Cap area by midpoint quadrature in geodesic polar coordinates."""
        if not 0 < r <= math.pi:
            raise ValueError("cap radius must lie in (0, pi]")
        s, w = _midpoints(0.0, r, resolution)
        # the angular integral is exact (2 pi) by rotational symmetry
        return float(2.0 * math.pi * np.sum(w * np.sin(s)))

    def spec(self):
        return {"kind": "sphere2"}


@dataclass(frozen=True)
class Wedge(Domain):
    """Planar wedge ``{(rho cos t, rho sin t): 0 < t < beta, rho < radius}``."""

    beta: float = math.pi / 2
    radius: float = math.inf
    kind = "wedge"
    dim = 2
    ambient_dim = 2

    def __post_init__(self):
        if not 0 < self.beta < 2 * math.pi:
            raise ValueError("wedge opening angle must lie in (0, 2 pi)")
        if not self.radius > 0:
            raise ValueError("wedge radius must be positive")

    @staticmethod
    def polar(x):
        x = np.asarray(x, dtype=float)
        rho = np.linalg.norm(x, axis=-1)
        th = np.mod(np.arctan2(x[..., 1], x[..., 0]), 2 * math.pi)
        return rho, th

    @staticmethod
    def cartesian(rho, theta):
        rho = np.asarray(rho, dtype=float)
        theta = np.asarray(theta, dtype=float)
        return np.stack([rho * np.cos(theta), rho * np.sin(theta)], axis=-1)

    def contains(self, x):
        rho, th = self.polar(x)
        apex = rho <= POINT_TOL
        return apex | ((th >= -POINT_TOL) & (th <= self.beta + POINT_TOL) & (rho <= self.radius + POINT_TOL))

    def _distance(self, x, y):
        rho1, th1 = self.polar(x)
        rho2, th2 = self.polar(y)
        straight = np.linalg.norm(np.asarray(y) - np.asarray(x), axis=-1)
        if self.beta <= math.pi:
            return straight
        # reflex wedge: the straight segment leaves the wedge when the angular gap exceeds pi
        return np.where(np.abs(th1 - th2) > math.pi, rho1 + rho2, straight)

    def boundary_distances(self, x):
        """Distances to the two boundary lines (positive inside a convex wedge)."""
        x = np.asarray(x, dtype=float)
        d0 = x[..., 1]
        d1 = math.sin(self.beta) * x[..., 0] - math.cos(self.beta) * x[..., 1]
        return d0, d1

    @property
    def volume(self):
        return 0.5 * self.beta * self.radius**2

    @property
    def diameter(self):
        if math.isinf(self.radius):
            return math.inf
        return 2 * self.radius * (math.sin(self.beta / 2) if self.beta < math.pi else 1.0)

    def _convex_ball_area(self, c, r, beta, rot, n):
        # area of B(c, r) ∩ convex wedge(beta) rotated by rot, clipped to the radius
        cr, sr = math.cos(-rot), math.sin(-rot)
        cc = np.array([cr * c[0] - sr * c[1], sr * c[0] + cr * c[1]])
        lo, hi = cc[0] - r, cc[0] + r
        if math.isfinite(self.radius):
            lo, hi = max(lo, -self.radius), min(hi, self.radius)
        if hi <= lo:
            return 0.0
        x, w = _midpoints(lo, hi, n)
        s = np.sqrt(np.clip(r * r - (x - cc[0]) ** 2, 0.0, None))
        ylo, yhi = cc[1] - s, cc[1] + s
        # half-plane y > 0
        ylo = np.maximum(ylo, 0.0)
        # half-plane sin(b) x - cos(b) y > 0
        sb, cb = math.sin(beta), math.cos(beta)
        if abs(cb) < 1e-15:
            ok = sb * x > 0
            yhi = np.where(ok, yhi, ylo)
        elif cb > 0:
            yhi = np.minimum(yhi, sb * x / cb)
        else:
            ylo = np.maximum(ylo, sb * x / cb)
        if math.isfinite(self.radius):
            s2 = np.sqrt(np.clip(self.radius**2 - x * x, 0.0, None))
            ylo, yhi = np.maximum(ylo, -s2), np.minimum(yhi, s2)
        return float(np.sum(w * np.clip(yhi - ylo, 0.0, None)))

    def ball_volume(self, center, r, resolution=DEFAULT_BALL_RESOLUTION):
        c = np.asarray(center, dtype=float)
        n = resolution
        if self.beta <= math.pi:
            return self._convex_ball_area(c, r, self.beta, 0.0, n)
        whole = Disk(self.radius).ball_volume(c, r, n) if math.isfinite(self.radius) else math.pi * r * r
        # reflex wedge: remove the complementary convex wedge
        return whole - self._convex_ball_area(c, r, 2 * math.pi - self.beta, self.beta, n)

    def spec(self):
        out = {"kind": "wedge", "beta": self.beta}
        if math.isfinite(self.radius):
            out["radius"] = self.radius
        return out


def domain_from_spec(spec: dict) -> Domain:
    """Build a catalog domain from its JSON description."""
    kind = spec.get("kind")
    if kind == "box":
        return Box(tuple(spec["sides"]))
    if kind == "torus":
        return FlatTorus(tuple(spec["periods"]))
    if kind == "disk":
        return Disk(float(spec.get("radius", 1.0)))
    if kind == "sphere2":
        return Sphere2()
    if kind == "wedge":
        return Wedge(float(spec["beta"]), float(spec.get("radius", math.inf)))
    if kind == "euclidean":
        return Euclidean(int(spec["dim"]))
    raise ValueError(f"unknown domain kind {kind!r}")


# ---------------------------------------------------------------------------
# Submanifold pieces


class Piece:
    """A compact parametrised piece of intrinsic dimension ``k``.

    Subclasses provide ``evaluate(params)`` on the parameter box
    ``bounds`` (shape (k, 2)).  ``foot(domain, x)`` returns distances and
    the number of distinct nearest points; convex pieces override it with
    closed forms, the default uses dense sampling plus local refinement.
    """

    k: int = 0
    samples_per_axis = 257

    @property
    def bounds(self) -> np.ndarray:
        return np.zeros((self.k, 2))

    def evaluate(self, params):
        raise NotImplementedError

    def param_grid(self):
        axes = [np.linspace(lo, hi, self.samples_per_axis) for lo, hi in self.bounds]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1), [a.size for a in axes]

    def distance(self, domain, x):
        return self.foot(domain, x)[0]

    def foot(self, domain, x):
        """(distance, count of distinct near-minimising foot points) per point."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        params, shape = self.param_grid()
        pts = self.evaluate(params)
        dist = np.empty(len(x))
        count = np.empty(len(x), dtype=int)
        for i, xi in enumerate(x):
            d = _domain_dist(domain, xi[None, :], pts)
            dist[i], count[i] = self._refine_minima(domain, xi, d.reshape(shape), params.reshape(*shape, -1))
        return dist, count

    def _refine_minima(self, domain, xi, dgrid, pgrid):
        # discrete local minima over the sample grid, then local refinement
        from scipy.ndimage import minimum_filter

        mins = dgrid == minimum_filter(dgrid, size=3, mode="nearest")
        cand = np.argwhere(mins)
        best = []
        for idx in cand[:64]:
            p0 = pgrid[tuple(idx)]
            f = lambda p: float(_domain_dist(domain, xi[None, :], self.evaluate(np.atleast_2d(p)))[0])
            res = optimize.minimize(f, p0, method="L-BFGS-B", bounds=self.bounds, options={"ftol": 1e-15, "gtol": 1e-12})
            best.append((res.fun, self.evaluate(np.atleast_2d(res.x))[0]))
        dmin = min(b[0] for b in best)
        return dmin, _count_distinct(domain, [b[1] for b in best if b[0] <= dmin * (1 + PROJECTION_SLACK) + 1e-12])

    def spec(self) -> dict:
        raise NotImplementedError


def _count_distinct(domain, feet, sep=1e-5):
    reps = []
    for p in feet:
        if all(_domain_dist(domain, p[None, :], q[None, :])[0] > sep for q in reps):
            reps.append(p)
    return len(reps)


def _domain_dist(domain, x, y):
    return domain._distance(np.asarray(x, dtype=float), np.asarray(y, dtype=float))


def _local_coords(domain, x, anchor):
    """Unwrap x next to ``anchor`` on tori so flat formulas apply."""
    if isinstance(domain, FlatTorus):
        return anchor + domain.displacement(anchor, x)
    return x


@dataclass(frozen=True)
class PointPiece(Piece):
    p: tuple
    k = 0

    def evaluate(self, params):
        params = np.atleast_2d(params)
        return np.broadcast_to(np.asarray(self.p, dtype=float), (params.shape[0], len(self.p)))

    def param_grid(self):
        return np.zeros((1, 0)), [1]

    def foot(self, domain, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        d = _domain_dist(domain, x, np.asarray(self.p, dtype=float)[None, :])
        return d, np.ones(len(x), dtype=int)

    def spec(self):
        return {"kind": "point", "p": list(self.p)}


@dataclass(frozen=True)
class Segment(Piece):
    """Straight segment from ``a`` to ``b`` (flat domains)."""

    a: tuple
    b: tuple
    k = 1

    @property
    def bounds(self):
        return np.array([[0.0, 1.0]])

    def evaluate(self, params):
        s = np.atleast_2d(params)[:, :1]
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        return a + s * (b - a)

    def foot(self, domain, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a, b = np.asarray(self.a, float), np.asarray(self.b, float)
        xl = _local_coords(domain, x, 0.5 * (a + b))
        ab = b - a
        s = np.clip(((xl - a) @ ab) / (ab @ ab), 0.0, 1.0)
        d = np.linalg.norm(xl - (a + s[:, None] * ab), axis=-1)
        return d, np.ones(len(x), dtype=int)

    def spec(self):
        return {"kind": "segment", "a": list(self.a), "b": list(self.b)}


@dataclass(frozen=True)
class Circle(Piece):
    """Round circle; in 3-D it lies in the plane orthogonal to ``normal``."""

    center: tuple
    radius: float
    normal: tuple | None = None
    k = 1

    @property
    def bounds(self):
        return np.array([[0.0, 2 * math.pi]])

    def _frame(self):
        c = np.asarray(self.center, float)
        if c.size == 2:
            return c, np.array([1.0, 0.0]), np.array([0.0, 1.0])
        n = np.asarray(self.normal if self.normal is not None else (0, 0, 1), float)
        n = n / np.linalg.norm(n)
        ref = np.array([1.0, 0, 0]) if abs(n[0]) < 0.9 else np.array([0, 1.0, 0])
        e1 = np.cross(n, ref)
        e1 /= np.linalg.norm(e1)
        return c, e1, np.cross(n, e1)

    def evaluate(self, params):
        t = np.atleast_2d(params)[:, :1]
        c, e1, e2 = self._frame()
        return c + self.radius * (np.cos(t) * e1 + np.sin(t) * e2)

    def foot(self, domain, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        c, e1, e2 = self._frame()
        xl = _local_coords(domain, x, c)
        v = xl - c
        u1, u2 = v @ e1, v @ e2
        inplane = np.hypot(u1, u2)
        normal = np.sqrt(np.clip(np.sum(v * v, axis=-1) - inplane**2, 0.0, None))
        d = np.hypot(inplane - self.radius, normal)
        count = np.where(inplane < 1e-12 * max(1.0, self.radius), 2**31 - 1, 1)
        return d, count

    def spec(self):
        out = {"kind": "circle", "center": list(self.center), "radius": self.radius}
        if self.normal is not None:
            out["normal"] = list(self.normal)
        return out


@dataclass(frozen=True)
class FlatStrip(Piece):
    """Planar rectangle ``origin + s u + t v``, s in [0, 1], t in [0, 1] (3-D)."""

    origin: tuple
    u: tuple
    v: tuple
    k = 2

    @property
    def bounds(self):
        return np.array([[0.0, 1.0], [0.0, 1.0]])

    def evaluate(self, params):
        p = np.atleast_2d(params)
        o, u, v = (np.asarray(a, float) for a in (self.origin, self.u, self.v))
        return o + p[:, :1] * u + p[:, 1:2] * v

    def foot(self, domain, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        o, u, v = (np.asarray(a, float) for a in (self.origin, self.u, self.v))
        xl = _local_coords(domain, x, o + 0.5 * (u + v))
        G = np.array([[u @ u, u @ v], [u @ v, v @ v]])
        rhs = np.stack([(xl - o) @ u, (xl - o) @ v], axis=-1)
        st = np.linalg.solve(G, rhs.T).T
        inside = np.all((st >= 0) & (st <= 1), axis=-1)
        d_in = np.linalg.norm(xl - (o + st[:, :1] * u + st[:, 1:] * v), axis=-1)
        corners = [o, o + u, o + v, o + u + v]
        edges = [Segment(tuple(corners[0]), tuple(corners[1])), Segment(tuple(corners[0]), tuple(corners[2])),
                 Segment(tuple(corners[1]), tuple(corners[3])), Segment(tuple(corners[2]), tuple(corners[3]))]
        d_edge = np.min([e.foot(Euclidean(3), xl)[0] for e in edges], axis=0)
        return np.where(inside, d_in, d_edge), np.ones(len(x), dtype=int)

    def spec(self):
        return {"kind": "strip", "origin": list(self.origin), "u": list(self.u), "v": list(self.v)}


@dataclass(frozen=True)
class GeodesicArc(Piece):
    """Great-circle arc on Sphere2 from unit vector ``a`` to ``b`` (length < pi)."""

    a: tuple
    b: tuple
    k = 1

    @property
    def bounds(self):
        return np.array([[0.0, 1.0]])

    def _frame(self):
        a = np.asarray(self.a, float)
        a /= np.linalg.norm(a)
        b = np.asarray(self.b, float)
        b /= np.linalg.norm(b)
        n = np.cross(a, b)
        length = math.atan2(np.linalg.norm(n), a @ b)
        n /= np.linalg.norm(n)
        return a, np.cross(n, a), n, length

    def evaluate(self, params):
        s = np.atleast_2d(params)[:, :1]
        a, t, _, L = self._frame()
        return np.cos(s * L) * a + np.sin(s * L) * t

    def foot(self, domain, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        a, t, n, L = self._frame()
        ang = np.mod(np.arctan2(x @ t, x @ a), 2 * math.pi)
        proj = x - (x @ n)[:, None] * n
        nrm = np.linalg.norm(proj, axis=-1)
        with np.errstate(invalid="ignore", divide="ignore"):
            foot_in = proj / nrm[:, None]
        d_in = Sphere2()._distance(x, foot_in)
        ends = np.stack([self.evaluate([[0.0]])[0], self.evaluate([[1.0]])[0]])
        d_end = np.min([Sphere2()._distance(x, e[None, :]) for e in ends], axis=0)
        inside = (ang <= L) & (nrm > 1e-12)
        return np.where(inside, np.minimum(d_in, d_end), d_end), np.ones(len(x), dtype=int)

    def spec(self):
        return {"kind": "arc", "a": list(self.a), "b": list(self.b)}


@dataclass(frozen=True)
class GraphPatch(Piece):
    """Graph of ``f`` over a parameter box: ``(s, f(s))`` in 2-D or ``(s, t, f(s, t))`` in 3-D."""

    f: Callable
    param_box: tuple
    name: str = "graph"

    @property
    def k(self):
        return len(self.param_box)

    @property
    def bounds(self):
        return np.asarray(self.param_box, dtype=float)

    samples_per_axis = 129

    def evaluate(self, params):
        p = np.atleast_2d(np.asarray(params, dtype=float))
        val = np.asarray(self.f(*p.T), dtype=float).reshape(-1, 1)
        return np.concatenate([p, val], axis=-1)

    def spec(self):
        return {"kind": "graph", "name": self.name, "param_box": [list(b) for b in self.param_box]}


_GRAPH_FUNCTIONS = {
    "parabola": lambda s: s * s,
    "sine": lambda s: 0.1 * np.sin(2 * np.pi * s),
    "saddle": lambda s, t: s * s - t * t,
}


def piece_from_spec(spec: dict) -> Piece:
    kind = spec.get("kind")
    if kind == "point":
        return PointPiece(tuple(spec["p"]))
    if kind == "segment":
        return Segment(tuple(spec["a"]), tuple(spec["b"]))
    if kind == "circle":
        normal = spec.get("normal")
        return Circle(tuple(spec["center"]), float(spec["radius"]), tuple(normal) if normal else None)
    if kind == "strip":
        return FlatStrip(tuple(spec["origin"]), tuple(spec["u"]), tuple(spec["v"]))
    if kind == "arc":
        return GeodesicArc(tuple(spec["a"]), tuple(spec["b"]))
    if kind == "graph":
        name = spec["name"]
        if name not in _GRAPH_FUNCTIONS:
            raise ValueError(f"unknown graph function {name!r}; known: {sorted(_GRAPH_FUNCTIONS)}")
        offset = np.asarray(spec.get("offset", 0.0))
        base = _GRAPH_FUNCTIONS[name]
        f = (lambda *a: base(*a) + offset) if np.any(offset) else base
        return GraphPatch(f, tuple(tuple(b) for b in spec["param_box"]), name)
    raise ValueError(f"unknown piece kind {kind!r}")


@dataclass(frozen=True)
class SubmanifoldUnion:
    """Finite union of parametrised pieces inside a domain."""

    domain: Domain
    pieces: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        for i, p in enumerate(self.pieces):
            if p.k > self.domain.dim - 1:
                raise ValueError(f"piece {i} has dimension {p.k} >= domain dimension {self.domain.dim}")
            params, _ = p.param_grid()
            pts = p.evaluate(params[:: max(1, len(params) // 50)])
            if not np.all(self.domain.contains(pts)):
                raise ValueError(f"piece {i} leaves the domain")

    def distances(self, x):
        """Per-piece (distance, count) arrays of shape (pieces, points)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if not self.pieces:
            return np.full((0, len(x)), np.inf), np.zeros((0, len(x)), dtype=int)
        out = [p.foot(self.domain, x) for p in self.pieces]
        return np.array([o[0] for o in out]), np.array([o[1] for o in out])

    def distance(self, x):
        """Vectorised distance to the union (``inf`` for the empty union)."""
        d, _ = self.distances(x)
        x = np.asarray(x, dtype=float)
        if d.shape[0] == 0:
            return np.full(np.atleast_2d(x).shape[0], np.inf)
        return d.min(axis=0)

    def spec(self):
        return {"pieces": [p.spec() for p in self.pieces]}


def union_from_spec(domain: Domain, spec) -> SubmanifoldUnion:
    pieces = spec["pieces"] if isinstance(spec, dict) else spec
    return SubmanifoldUnion(domain, tuple(piece_from_spec(p) for p in pieces))


@dataclass(frozen=True)
class UnionDistance:
    distance: float
    nearest_piece_ids: frozenset
    projection_count: int


def dist_to_union(sigma: SubmanifoldUnion, x) -> UnionDistance:
    """Distance from ``x`` to the union, nearest pieces and number of distinct
    near-minimising foot points (relative slack ``1e-6``)."""
    x = np.asarray(x, dtype=float)
    sigma.domain.check_points(x)
    d, c = sigma.distances(x[None, :])
    if d.shape[0] == 0:
        return UnionDistance(math.inf, frozenset(), 0)
    d, c = d[:, 0], c[:, 0]
    dmin = float(d.min())
    near = np.nonzero(d <= dmin * (1 + PROJECTION_SLACK) + 1e-12)[0]
    return UnionDistance(dmin, frozenset(int(i) for i in near), int(c[near].sum()))


@dataclass(frozen=True)
class TubularNeighborhood:
    """Open ``eps``-neighbourhood ``{x : dist(x, Σ) < eps}``."""

    base: SubmanifoldUnion
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("tube radius must be positive")

    def contains(self, x):
        return self.base.distance(x) < self.radius


@dataclass
class AdmissibilityResult:
    admissible: bool
    witness: np.ndarray | None = None
    reason: str = ""

    def __bool__(self):
        return self.admissible


def _domain_grid(domain: Domain, n):
    if isinstance(domain, Box):
        axes = [np.linspace(0.0, a, n + 1) for a in domain.sides]
    elif isinstance(domain, FlatTorus):
        axes = [np.linspace(0.0, L, n, endpoint=False) for L in domain.periods]
    elif isinstance(domain, Disk):
        axes = [np.linspace(-domain.radius, domain.radius, n + 1)] * 2
    else:
        raise ValueError(f"admissibility grid not available for {domain.kind}")
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack(mesh, axis=-1)
    return pts, domain.contains(pts)


def admissible_up_to(sigma: SubmanifoldUnion, r: float, grid_resolution: int = 256) -> AdmissibilityResult:
    """Grid test of admissibility up to distance ``r``.

    Every grid point within ``r`` of the union must have one nearest piece
    and one foot point.  Adjacent grid points (both within ``r``) whose
    nearest pieces differ bracket an equidistant point; that point is located
    by bisection and returned as the witness.
    """
    dom = sigma.domain
    if math.isfinite(dom.diameter) and not r < 0.5 * dom.diameter:
        raise ValueError("r must stay below half the domain diameter")
    pts, inside = _domain_grid(dom, grid_resolution)
    flat = pts.reshape(-1, dom.ambient_dim)
    d, c = sigma.distances(flat)
    if d.shape[0] == 0:
        return AdmissibilityResult(True)
    shape = pts.shape[:-1]
    dmin = d.min(axis=0)
    near = d <= dmin * (1 + PROJECTION_SLACK) + 1e-12
    count = np.where(near, c, 0).sum(axis=0)
    nearest = d.argmin(axis=0)
    close = (dmin <= r) & inside.ravel()
    bad = np.nonzero(close & (count > 1))[0]
    if bad.size:
        return AdmissibilityResult(False, flat[bad[0]].copy(), "multiple nearest points")
    nearest = nearest.reshape(shape)
    close = close.reshape(shape)
    for ax in range(len(shape)):
        a = [slice(None)] * len(shape)
        b = [slice(None)] * len(shape)
        a[ax] = slice(None, -1)
        b[ax] = slice(1, None)
        a, b = tuple(a), tuple(b)
        edges = np.argwhere(close[a] & close[b] & (nearest[a] != nearest[b]))
        if isinstance(dom, FlatTorus):
            pass  # the wrap edge is covered by the periodic grid within each cell
        if edges.size:
            i0 = tuple(edges[0])
            i1 = list(i0)
            i1[ax] += 1
            w = _bisect_tie(sigma, pts[i0], pts[tuple(i1)], int(nearest[i0]), int(nearest[tuple(i1)]))
            return AdmissibilityResult(False, w, "equidistant from two pieces")
    return AdmissibilityResult(True)


def _bisect_tie(sigma, p, q, i, j, iters=60):
    def g(x):
        d, _ = sigma.distances(x[None, :])
        return d[i, 0] - d[j, 0]

    gp = g(p)
    for _ in range(iters):
        m = 0.5 * (p + q)
        gm = g(m)
        if np.sign(gm) == np.sign(gp):
            p, gp = m, gm
        else:
            q = m
    return 0.5 * (p + q)
