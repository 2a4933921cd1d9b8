"""Closed-form eigenpairs on the catalog domains and grid-based nodal geometry:
connected nodal domains, max points, inradius, inscribed-ball volume ratios
and positivity/negativity asymmetry.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import ndimage, optimize
from scipy import special as sp
from scipy.spatial import cKDTree

from ._io import fmt
from .geometry import Box, Disk, Domain, Euclidean, FlatTorus, Sphere2, Wedge
from .special import bessel_zeros

__all__ = [
    "Eigenpair",
    "eigenpair_catalog",
    "laplacian_residual",
    "NodalComponent",
    "NodalDecomposition",
    "nodal_decomposition",
    "inradius",
    "VolumeRatioReport",
    "inscribed_ball_ratio",
    "AsymmetryReport",
    "asymmetry_ratio",
]

NODAL_THRESHOLD = 1e-12
MIN_RESOLUTION = 64


@dataclass(frozen=True)
class Eigenpair:
    """Eigenvalue ``lam`` of ``-Δ`` with a vectorised eigenfunction.

    ``face_distances``, when present, maps points to an ``(n, F)`` array of
    distances to the flat pieces of the nodal set (and of the domain
    boundary) that bound the nodal cell containing each point.  Product
    eigenfunctions on boxes and tori have it in closed form; for the
    others the first-order estimate ``|φ| / |∇φ|`` is used.
    """

    domain: Domain
    lam: float
    mode: tuple
    func: Callable
    dirichlet: bool = True
    kinds: tuple | None = None
    face_fn: Callable | None = None
    sup_norm: float = 1.0
    cell_fn: Callable | None = None

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        out = self.func(x)
        return float(out) if np.ndim(out) == 0 else out

    __call__ = evaluate

    def gradient(self, x, h=1e-6):
        """Central-difference gradient in ambient coordinates."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        g = np.empty_like(x)
        for i in range(x.shape[-1]):
            e = np.zeros(x.shape[-1])
            e[i] = h
            g[:, i] = (self.func(x + e) - self.func(x - e)) / (2 * h)
        if isinstance(self.domain, Sphere2):
            g -= np.sum(g * x, axis=-1, keepdims=True) * x
        return g

    def face_distances(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        if self.face_fn is not None:
            return self.face_fn(x)
        v = np.abs(self.func(x))
        gn = np.linalg.norm(self.gradient(x), axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            est = np.where(gn > 0, v / gn, np.inf)
        cols = [est]
        dom = self.domain
        if isinstance(dom, Disk):
            cols.append(dom.radius - np.linalg.norm(x, axis=-1))
        elif isinstance(dom, Wedge):
            d0, d1 = dom.boundary_distances(x)
            cols += [d0, d1, dom.radius - np.linalg.norm(x, axis=-1)]
        return np.stack(cols, axis=-1)

    def in_domain(self, x):
        return self.domain.contains(x)


def _product_faces(spacings, offsets, lo, hi):
    """Distances to the nearest nodal planes x_i = offset_i + k s_i on each axis."""

    def faces(x):
        cols = []
        for i, (s, o) in enumerate(zip(spacings, offsets)):
            if s is None:
                continue
            u = x[:, i] - o
            below = u - np.floor(u / s) * s
            cols += [below, s - below]
        for i, (a, b) in enumerate(zip(lo, hi)):
            if np.isfinite(a):
                cols += [x[:, i] - a, b - x[:, i]]
        return np.stack(cols, axis=-1)

    return faces


def _product_cells(spacings, offsets, periods):
    """Integer index of the nodal cell along each axis with nodal planes."""
    axes = [i for i, s in enumerate(spacings) if s is not None]

    def cells(x):
        out = np.empty((x.shape[0], len(axes)), dtype=np.int64)
        for j, i in enumerate(axes):
            c = np.floor((x[:, i] - offsets[i]) / spacings[i]).astype(np.int64)
            out[:, j] = np.mod(c, periods[i]) if periods is not None else c
        return out

    return cells


def eigenpair_catalog(domain: Domain, mode, kinds=None) -> Eigenpair:
    """Closed-form eigenpair of ``-Δ`` on a catalog domain.

    ==========  ==========================================  ==============
    domain      eigenfunction                               eigenvalue
    ==========  ==========================================  ==============
    Box         prod sin(m_i pi x_i / a_i) (Dirichlet)      pi^2 sum m_i^2/a_i^2
    FlatTorus   prod sin|cos(2 pi m_i x_i / L_i)            4 pi^2 sum m_i^2/L_i^2
    Disk        J_k(j_{k,l} rho / R) cos(k theta)           (j_{k,l}/R)^2
    Sphere2     P_l(cos theta), zonal                       l (l + 1)
    Wedge       J_nu(j_{nu,l} rho) sin(nu theta), nu=j pi/b  j_{nu,l}^2
    ==========  ==========================================  ==============
    """
    mode = tuple(int(m) for m in np.atleast_1d(mode))
    if isinstance(domain, Box):
        if len(mode) != domain.dim or min(mode) < 1:
            raise ValueError(f"Box({domain.dim}) modes need {domain.dim} positive integers")
        a = np.asarray(domain.sides)
        k = np.asarray(mode) * np.pi / a
        lam = float(np.sum(k * k))

        def f(x, k=k):
            return np.prod(np.sin(x * k), axis=-1)

        sp_ = list(a / np.asarray(mode))
        faces = _product_faces(sp_, [0.0] * len(a), [-np.inf] * len(a), [np.inf] * len(a))
        return Eigenpair(domain, lam, mode, f, True, None, faces, cell_fn=_product_cells(sp_, [0.0] * len(a), None))
    if isinstance(domain, FlatTorus):
        if len(mode) != domain.dim or min(mode) < 0:
            raise ValueError(f"FlatTorus({domain.dim}) modes need {domain.dim} nonnegative integers")
        if kinds is None:
            kinds = tuple("sin" if m > 0 else "cos" for m in mode)
        kinds = tuple(kinds)
        if len(kinds) != len(mode) or any(kd not in ("sin", "cos") for kd in kinds):
            raise ValueError("kinds must be 'sin' or 'cos' per axis")
        if any(m == 0 and kd == "sin" for m, kd in zip(mode, kinds)):
            raise ValueError("sin factor with zero frequency vanishes identically")
        if all(m == 0 for m in mode):
            raise ValueError("constant mode has eigenvalue 0")
        L = np.asarray(domain.periods)
        k = 2 * np.pi * np.asarray(mode) / L
        is_sin = np.array([kd == "sin" for kd in kinds])
        lam = float(np.sum(k * k))

        def f(x, k=k, is_sin=is_sin):
            arg = x * k
            return np.prod(np.where(is_sin, np.sin(arg), np.cos(arg)), axis=-1)

        spacings = [L[i] / (2 * m) if m > 0 else None for i, m in enumerate(mode)]
        offsets = [0.0 if s else (L[i] / (4 * m) if m > 0 else 0.0) for i, (m, s) in enumerate(zip(mode, is_sin))]
        faces = _product_faces(spacings, offsets, [-np.inf] * len(L), [np.inf] * len(L))
        cells = _product_cells(spacings, offsets, [2 * m for m in mode])
        return Eigenpair(domain, lam, mode, f, False, kinds, faces, cell_fn=cells)
    if isinstance(domain, Disk):
        if len(mode) != 2 or mode[0] < 0 or mode[1] < 1:
            raise ValueError("Disk modes are (k >= 0, l >= 1)")
        kk, ll = mode
        R = domain.radius
        j = bessel_zeros(float(kk), ll)[ll]

        def f(x, kk=kk, j=j, R=R):
            rho = np.linalg.norm(x, axis=-1)
            th = np.arctan2(x[..., 1], x[..., 0])
            return sp.jv(kk, j * rho / R) * np.cos(kk * th)

        sup = _radial_sup(lambda r: sp.jv(kk, j * r), 1.0)
        return Eigenpair(domain, (j / R) ** 2, mode, f, True, sup_norm=sup)
    if isinstance(domain, Sphere2):
        if len(mode) not in (1, 2) or mode[0] < 1 or (len(mode) == 2 and mode[1] != 0):
            raise ValueError("Sphere2 modes are zonal: (l,) or (l, 0) with l >= 1")
        ell = mode[0]

        def f(x, ell=ell):
            z = np.clip(x[..., 2] / np.linalg.norm(x, axis=-1), -1.0, 1.0)
            return sp.eval_legendre(ell, z)

        return Eigenpair(domain, float(ell * (ell + 1)), (ell,), f, False)
    if isinstance(domain, Wedge):
        if len(mode) != 2 or min(mode) < 1:
            raise ValueError("Wedge modes are (j >= 1, l >= 1)")
        if not (math.isfinite(domain.radius) and domain.radius == 1.0):
            domain = Wedge(domain.beta, 1.0)
        jj, ll = mode
        nu = jj * np.pi / domain.beta
        z = bessel_zeros(float(nu), ll)[ll]

        def f(x, nu=nu, z=z):
            rho, th = Wedge.polar(x)
            return sp.jv(nu, z * rho) * np.sin(nu * th)

        sup = _radial_sup(lambda r: sp.jv(nu, z * r), 1.0)
        return Eigenpair(domain, z * z, mode, f, True, sup_norm=sup)
    raise ValueError(f"no eigenpair catalog for {type(domain).__name__}")


def _radial_sup(g, R):
    r = np.linspace(0, R, 4001)
    return float(np.max(np.abs(g(r))))


def laplacian_residual(pair: Eigenpair, resolution: int = 256) -> float:
    """Relative error of a second-order finite-difference ``Δφ + λφ`` on interior nodes."""
    dom = pair.domain
    n = resolution
    if isinstance(dom, Sphere2):
        th = np.linspace(0, np.pi, n + 1)[1:-1]
        ph = np.linspace(0, 2 * np.pi, 2 * n, endpoint=False)
        T, P = np.meshgrid(th, ph, indexing="ij")
        f = pair.func(Sphere2.from_angles(T, P))
        ht, hp = th[1] - th[0], ph[1] - ph[0]
        fp = np.roll(f, -1, 1) - 2 * f + np.roll(f, 1, 1)
        st = np.sin(T)
        s_plus, s_minus = np.sin(T[1:-1] + ht / 2), np.sin(T[1:-1] - ht / 2)
        lap = (s_plus * (f[2:] - f[1:-1]) - s_minus * (f[1:-1] - f[:-2])) / (st[1:-1] * ht**2)
        lap += fp[1:-1] / (st[1:-1] ** 2 * hp**2)
        core = f[1:-1]
    else:
        if isinstance(dom, (Box, FlatTorus)):
            ext = dom.sides if isinstance(dom, Box) else dom.periods
            axes = [np.linspace(0, a, n + 1) for a in ext]
        elif isinstance(dom, Disk):
            axes = [np.linspace(-dom.radius, dom.radius, n + 1)] * 2
        else:
            axes = [np.linspace(-1, 1, n + 1)] * 2
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        f = pair.func(mesh)
        hs = [a[1] - a[0] for a in axes]
        inner = tuple(slice(1, -1) for _ in axes)
        lap = np.zeros_like(f[inner])
        for i, h in enumerate(hs):
            up = [slice(1, -1)] * len(axes)
            dn = [slice(1, -1)] * len(axes)
            up[i] = slice(2, None)
            dn[i] = slice(None, -2)
            lap += (f[tuple(up)] - 2 * f[inner] + f[tuple(dn)]) / h**2
        core = f[inner]
        # stencils must stay inside the domain
        ok = np.ones(core.shape, dtype=bool)
        for i, h in enumerate(hs):
            for s in (-1, 1):
                sh = mesh[inner].copy()
                sh[..., i] += s * h
                ok &= dom.contains(sh)
        ok &= dom.contains(mesh[inner])
        lap, core = lap[ok], core[ok]
    res = lap + pair.lam * core
    return float(np.max(np.abs(res)) / (pair.lam * np.max(np.abs(core))))


# ---------------------------------------------------------------------------
# Nodal decomposition


@dataclass
class NodalComponent:
    id: int
    sign: int
    n_cells: int
    volume: float
    max_point: np.ndarray
    max_value: float
    max_cell: tuple


@dataclass
class NodalDecomposition:
    """Sign field on a cell grid with labelled nodal domains.

    ``labels`` is 0 on nodal and out-of-domain cells; component ids start at 1.
    """

    pair: Eigenpair
    resolution: int
    centers: np.ndarray
    values: np.ndarray
    labels: np.ndarray
    inside: np.ndarray
    cell_volumes: np.ndarray
    spacing: tuple
    components: list = field(default_factory=list)
    periodic: tuple = ()

    @property
    def domain(self):
        return self.pair.domain

    def component(self, cid) -> NodalComponent:
        for c in self.components:
            if c.id == cid:
                return c
        raise KeyError(f"no component {cid}")

    def mask(self, cid):
        return self.labels == cid

    @property
    def nodal_volume(self):
        return float(self.cell_volumes[(self.labels == 0) & self.inside].sum())

    def rows(self):
        """Cell table rows ``(coords..., sign, component_id)`` for in-domain cells."""
        sel = self.inside
        pts = self.centers[sel]
        lab = self.labels[sel]
        sgn = np.where(lab > 0, np.sign(self.values[sel]), 0).astype(int)
        return pts, sgn, lab

    def to_csv(self, path):
        pts, sgn, lab = self.rows()
        names = ["x", "y", "z"][: pts.shape[1]]
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["sign", "component_id"])
            for p, s, c in zip(pts, sgn, lab):
                w.writerow([fmt(v) for v in p] + [int(s), int(c)])

    def cell_index(self, x):
        """Grid index of the cell containing each point (flat Cartesian grids)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        origin = self.centers[(0,) * len(self.spacing)] - 0.5 * np.asarray(self.spacing)
        idx = np.floor((x - origin) / np.asarray(self.spacing)).astype(int)
        shape = np.asarray(self.labels.shape)
        if self.periodic:
            idx = np.where(self.periodic, np.mod(idx, shape), idx)
        return idx


def _grid(domain, n):
    if isinstance(domain, (Box, FlatTorus)):
        ext = domain.sides if isinstance(domain, Box) else domain.periods
        hs = [a / n for a in ext]
        axes = [(np.arange(n) + 0.5) * h for h in hs]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        inside = np.ones(mesh.shape[:-1], dtype=bool)
        vol = np.full(inside.shape, float(np.prod(hs)))
        periodic = tuple([isinstance(domain, FlatTorus)] * len(ext))
        return mesh, inside, vol, tuple(hs), periodic
    if isinstance(domain, (Disk, Wedge)):
        R = domain.radius if isinstance(domain, Disk) else 1.0
        if isinstance(domain, Wedge):
            pts = Wedge.cartesian(np.full(400, R), np.linspace(0, domain.beta, 400))
            lo = np.minimum(pts.min(axis=0), 0.0)
            hi = np.maximum(pts.max(axis=0), 0.0)
        else:
            lo, hi = np.array([-R, -R]), np.array([R, R])
        h = float(np.max(hi - lo)) / n
        axes = [lo[i] + (np.arange(int(math.ceil((hi[i] - lo[i]) / h))) + 0.5) * h for i in range(2)]
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        inside = domain.contains(mesh) if isinstance(domain, Disk) else Wedge(domain.beta, 1.0).contains(mesh)
        vol = np.full(inside.shape, h * h)
        return mesh, inside, vol, (h, h), (False, False)
    if isinstance(domain, Sphere2):
        ht, hp = np.pi / n, np.pi / n
        th = (np.arange(n) + 0.5) * ht
        ph = (np.arange(2 * n) + 0.5) * hp
        T, P = np.meshgrid(th, ph, indexing="ij")
        mesh = Sphere2.from_angles(T, P)
        vol = (np.cos(T - ht / 2) - np.cos(T + ht / 2)) * hp
        return mesh, np.ones(T.shape, dtype=bool), vol, (ht, hp), (False, True)
    raise ValueError(f"no grid for {type(domain).__name__}")


class _UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def nodal_decomposition(pair: Eigenpair, resolution: int = 128, refine: bool = True) -> NodalDecomposition:
    """Label the nodal domains of ``pair`` on a cell grid.

    Cells are joined across shared faces only (4-neighbour in 2-D,
    6-neighbour in 3-D), across the periodic faces of a torus and the
    longitude seam of the sphere, and all cells of the same sign touching a
    pole are joined through it.  Cells with ``|φ|`` below ``1e-12 max|φ|``
    belong to the nodal set.
    """
    if resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be >= {MIN_RESOLUTION}")
    dom = pair.domain
    mesh, inside, vol, spacing, periodic = _grid(dom, resolution)
    vals = np.where(inside, pair.func(mesh), 0.0)
    thresh = NODAL_THRESHOLD * np.max(np.abs(vals))
    structure = ndimage.generate_binary_structure(vals.ndim, 1)
    pos, npos = ndimage.label(inside & (vals > thresh), structure)
    neg, nneg = ndimage.label(inside & (vals < -thresh), structure)
    labels = np.where(neg > 0, neg + npos, pos)
    uf = _UnionFind(npos + nneg + 1)
    for ax, per in enumerate(periodic):
        if not per:
            continue
        a = np.take(labels, 0, axis=ax)
        b = np.take(labels, -1, axis=ax)
        for la, lb in set(zip(a[(a > 0) & (b > 0)].tolist(), b[(a > 0) & (b > 0)].tolist())):
            if (la <= npos) == (lb <= npos):
                uf.union(la, lb)
    if isinstance(dom, Sphere2):
        for row in (labels[0], labels[-1]):
            for sign_pos in (True, False):
                ids = sorted({int(v) for v in row if v > 0 and (v <= npos) == sign_pos})
                for other in ids[1:]:
                    uf.union(ids[0], other)
    roots = np.array([uf.find(i) for i in range(npos + nneg + 1)])
    uniq = {r: i for i, r in enumerate(sorted(set(roots[1:].tolist())), start=1)}
    remap = np.zeros(npos + nneg + 1, dtype=int)
    for i in range(1, npos + nneg + 1):
        remap[i] = uniq[roots[i]]
    labels = remap[labels]
    dec = NodalDecomposition(pair, resolution, mesh, vals, labels, inside, vol, spacing, [], periodic)
    absval = np.abs(vals)
    flat_lab = labels.ravel()
    order = np.argsort(flat_lab, kind="stable")
    bounds = np.searchsorted(flat_lab[order], np.arange(1, len(uniq) + 2))
    for cid in range(1, len(uniq) + 1):
        cells = order[bounds[cid - 1] : bounds[cid]]
        best = cells[np.argmax(absval.ravel()[cells])]
        idx = np.unravel_index(best, labels.shape)
        x0 = mesh[idx]
        sgn = int(np.sign(vals[idx]))
        if refine:
            x0 = _refine_max(pair, x0, sgn, spacing, dom)
        dec.components.append(
            NodalComponent(cid, sgn, int(cells.size), float(vol.ravel()[cells].sum()), x0,
                           float(abs(pair.func(x0))), tuple(int(i) for i in idx))
        )
    return dec


def _refine_max(pair, x0, sgn, spacing, dom):
    """One local ascent pass of ``sign * φ`` within a cell of the grid maximum."""
    v0 = sgn * float(pair.func(x0))
    if isinstance(dom, Sphere2):
        th0 = math.acos(np.clip(x0[2], -1, 1))
        ph0 = math.atan2(x0[1], x0[0])
        ht, hp = spacing

        def obj(p):
            return -sgn * float(pair.func(Sphere2.from_angles(p[0], p[1])))

        bnds = [(max(0.0, th0 - ht), min(np.pi, th0 + ht)), (ph0 - hp, ph0 + hp)]
        res = optimize.minimize(obj, [th0, ph0], method="L-BFGS-B", bounds=bnds)
        cand = Sphere2.from_angles(res.x[0], res.x[1])
    else:
        h = np.asarray(spacing)
        bnds = list(zip(x0 - h, x0 + h))
        res = optimize.minimize(lambda p: -sgn * float(pair.func(p)), x0, method="L-BFGS-B", bounds=bnds)
        cand = res.x
    if np.all(dom.contains(cand)) and sgn * float(pair.func(cand)) >= v0:
        return np.asarray(cand, dtype=float)
    return np.asarray(x0, dtype=float)


@dataclass(frozen=True)
class InradiusEstimate:
    value: float
    error: float

    def __float__(self):
        return self.value


def inradius(decomp: NodalDecomposition, component_id: int) -> InradiusEstimate:
    """Largest distance from a component cell to the component's complement.

    Returned with an error bar of one grid spacing.
    """
    mask = decomp.mask(component_id)
    if not mask.any():
        raise ValueError(f"component {component_id} is empty")
    dom = decomp.domain
    h = float(max(decomp.spacing))
    if isinstance(dom, Sphere2):
        others = decomp.centers[~mask]
        tree = cKDTree(others)
        chord, _ = tree.query(decomp.centers[mask])
        geo = 2 * np.arcsin(np.clip(chord / 2, 0, 1))
        return InradiusEstimate(float(geo.max() - 0.5 * h), h)
    if any(decomp.periodic):
        pad = [(s // 2, s // 2) if p else (1, 1) for s, p in zip(mask.shape, decomp.periodic)]
        padded = np.pad(mask, pad, mode="wrap")
        # non-periodic axes get an empty border
        for ax, p in enumerate(decomp.periodic):
            if not p:
                sl = [slice(None)] * mask.ndim
                sl[ax] = [0, -1]
                padded[tuple(sl)] = False
    else:
        pad = [(1, 1)] * mask.ndim
        padded = np.pad(mask, pad, mode="constant", constant_values=False)
    edt = ndimage.distance_transform_edt(padded, sampling=decomp.spacing)
    core = tuple(slice(p[0], p[0] + s) for p, s in zip(pad, mask.shape))
    value = float(edt[core][mask].max()) - 0.5 * min(decomp.spacing)
    return InradiusEstimate(value, h)


@dataclass(frozen=True)
class VolumeRatioReport:
    r0: float
    radius: float
    ball_volume: float
    intersection_volume: float
    error_volume: float
    ratio: float
    exits_domain: bool = False
    center: tuple = ()


def _ball_samples(dom, center, r, h):
    """Quadrature nodes and weights covering ``B(center, r)`` (flat) or the cap (sphere)."""
    if isinstance(dom, Sphere2):
        ns = max(16, int(math.ceil(r / h)))
        na = max(32, int(math.ceil(2 * math.pi * r / h)))
        s = (np.arange(ns) + 0.5) * r / ns
        a = (np.arange(na) + 0.5) * 2 * math.pi / na
        S, A = np.meshgrid(s, a, indexing="ij")
        e1, e2 = Sphere2.tangent_basis(center)
        v = np.cos(A)[..., None] * e1 + np.sin(A)[..., None] * e2
        pts = dom.geodesic_step(np.broadcast_to(center, v.shape), v, S)
        w = np.sin(S) * (r / ns) * (2 * math.pi / na)
        return pts.reshape(-1, 3), w.ravel()
    d = center.size
    n = int(math.ceil(r / h))
    ax = (np.arange(-n, n) + 0.5) * h
    mesh = np.stack(np.meshgrid(*([ax] * d), indexing="ij"), axis=-1).reshape(-1, d)
    keep = np.sum(mesh * mesh, axis=-1) < r * r
    pts = center + mesh[keep]
    return pts, np.full(len(pts), h**d)


def _component_membership(decomp, cid, pts):
    """Sample points lying in component ``cid``: matching sign and a cell of
    the component at, or face-adjacent to, the containing cell."""
    comp = decomp.component(cid)
    vals = decomp.pair.func(pts)
    thresh = NODAL_THRESHOLD * max(np.max(np.abs(decomp.values)), 1e-300)
    ok = comp.sign * vals > thresh
    dom = decomp.domain
    if isinstance(dom, Sphere2):
        tree = cKDTree(decomp.centers.reshape(-1, 3))
        _, nn = tree.query(pts, k=5)
        lab = decomp.labels.ravel()[nn]
        return ok & np.any(lab == cid, axis=-1)
    idx = decomp.cell_index(pts)
    shape = np.asarray(decomp.labels.shape)
    hit = np.zeros(len(pts), dtype=bool)
    offsets = [np.zeros(len(shape), dtype=int)]
    for ax in range(len(shape)):
        for s in (-1, 1):
            o = np.zeros(len(shape), dtype=int)
            o[ax] = s
            offsets.append(o)
    for o in offsets:
        j = idx + o
        if decomp.periodic:
            j = np.where(decomp.periodic, np.mod(j, shape), j)
        valid = np.all((j >= 0) & (j < shape), axis=-1)
        jj = np.where(valid[:, None], j, 0)
        hit |= valid & (decomp.labels[tuple(jj.T)] == cid)
    return ok & hit


def inscribed_ball_ratio(decomp: NodalDecomposition, component_id: int, r0: float, supersample: int = 4) -> VolumeRatioReport:
    """``Vol(B ∩ Ω) / Vol(B)`` for ``B = B(x0, r0 / sqrt(λ))`` at the component's max point.

    The ball is sampled on a grid ``supersample`` times finer than the
    decomposition; points are attributed to the component through the cell
    labels and the sign of the eigenfunction.  Parts of the ball outside a
    box are dropped from both volumes and flagged with ``exits_domain``.
    """
    comp = decomp.component(component_id)
    dom = decomp.domain
    r = r0 / math.sqrt(decomp.pair.lam)
    x0 = np.asarray(comp.max_point, dtype=float)
    h = min(decomp.spacing) / supersample
    pts, w = _ball_samples(dom, x0, r, h)
    if isinstance(dom, FlatTorus):
        # the ball lives in the covering space; membership is read off the wrapped point
        pts = dom.wrap(pts)
    indom = dom.contains(pts) if not isinstance(dom, Wedge) else Wedge(dom.beta, 1.0).contains(pts)
    exits = not bool(np.all(indom))
    member = np.zeros(len(pts), dtype=bool)
    member[indom] = _component_membership(decomp, component_id, pts[indom])
    total = float(w[indom].sum())
    frac = float(w[member].sum()) / total
    if isinstance(dom, FlatTorus):
        bvol = Euclidean(dom.dim).ball_volume(x0, r)
    elif isinstance(dom, (Box, Disk, Sphere2)):
        bvol = dom.ball_volume(x0, r)
    else:
        bvol = total
    return VolumeRatioReport(r0, r, bvol, frac * bvol, (1 - frac) * bvol, frac, exits, tuple(x0.tolist()))


@dataclass(frozen=True)
class AsymmetryReport:
    ratio: float
    precondition_met: bool


def asymmetry_ratio(pair: Eigenpair, center, radius: float, resolution: int = 96) -> AsymmetryReport:
    """``Vol({φ > 0} ∩ B) / Vol(B)`` for ``B = B(center, radius)`` by cell counting.

    The precondition (the concentric half-radius ball meets the nodal set)
    is checked by a sign change or a zero among the samples inside it; the
    value is returned either way.
    """
    dom = pair.domain
    c = np.asarray(center, dtype=float)
    h = 2 * radius / resolution
    pts, w = _ball_samples(dom, c, radius, h)
    if isinstance(dom, FlatTorus):
        pts = dom.wrap(pts)
    indom = dom.contains(pts)
    pts, w = pts[indom], w[indom]
    v = pair.func(pts)
    frac = float(w[v > 0].sum() / w.sum())
    if isinstance(dom, Sphere2):
        dist = dom._distance(pts, c[None, :])
    else:
        dist = np.linalg.norm(dom.displacement(c, pts), axis=-1)
    half = v[dist < 0.5 * radius]
    met = bool(half.size and (np.any(half > 0) and np.any(half < 0) or np.any(half == 0)))
    return AsymmetryReport(frac, met)
