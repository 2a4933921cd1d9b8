import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, special

from nodalbm.capacity import (BallSet, BallUnionSet, CapacityProblem, CellSet, CubeSet, GreenFunction, _euclid_green_std,
                              capacity_sandwich_check, cutoff_green, martin_kernel_matrix, min_energy_measure,
                              torus_green_eigen, volume_ratio_capacity_bound)
from nodalbm.geometry import Box, Euclidean, FlatTorus, Sphere2
from nodalbm.special import DiffusionConvention, upper_incomplete_gamma
from nodalbm.spectral import eigenpair_catalog, nodal_decomposition
from nodalbm.stochastic import WalkConfig, hitting_probability

STD = DiffusionConvention.STANDARD
ANA = DiffusionConvention.ANALYST


def _quad(f, a, b):
    return integrate.quad(f, a, b, epsabs=0, epsrel=1e-12, limit=500)[0]


# ---------------------------------------------------------------------------
# Green's functions against quadrature of the heat kernel


@pytest.mark.parametrize("n", [2, 3, 4, 5])
@pytest.mark.parametrize("d,T", [(0.3, 0.5), (1.0, 1.0), (2.0, 0.2)])
def test_euclidean_green_vs_quadrature(n, d, T):
    heat = lambda t: (2 * math.pi * t) ** (-n / 2) * math.exp(-d * d / (2 * t))
    want = _quad(heat, 0, T)
    assert _euclid_green_std(n, T, d) == pytest.approx(want, rel=1e-8)
    if n <= 3:
        got = cutoff_green(Euclidean(n), T, np.zeros(n), np.r_[d, np.zeros(n - 1)], STD)
        assert got == pytest.approx(want, rel=1e-8)


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("r,c", [(0.5, 0.3), (1.0, 2.0), (2.0, 0.05)])
def test_incomplete_gamma_identity(n, r, c):
    lhs = _quad(lambda t: t ** (-n / 2) * math.exp(-r * r / (4 * t)), 0, c * r * r)
    rhs = r ** (2 - n) * 4 ** (n / 2 - 1) * upper_incomplete_gamma(n / 2 - 1, 1 / (4 * c))
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_euclidean3_newtonian_limit():
    d = 0.7
    g = cutoff_green(Euclidean(3), 1e6, [0, 0, 0], [d, 0, 0])
    assert g == pytest.approx(1 / (4 * math.pi * d), rel=1e-3)


def test_convention_map():
    x, y = [0.1, 0.2, 0.3], [0.5, 0.1, 0.2]
    dom = Euclidean(3)
    assert cutoff_green(dom, 0.4, x, y, ANA) == pytest.approx(0.5 * cutoff_green(dom, 0.8, x, y, STD), rel=1e-14)


def test_torus_green_against_eigen_expansion():
    # increments over [T1, T2] converge exponentially in the eigen form
    L = (1.0, 1.0, 1.0)
    diffs = np.array([[0.3, 0.1, 0.2], [0.5, 0.5, 0.5], [0.2, 0.0, 0.0]])
    dom = FlatTorus(L)
    got = cutoff_green(dom, 1.0, np.zeros((3, 3)), diffs) - cutoff_green(dom, 0.2, np.zeros((3, 3)), diffs)
    want = torus_green_eigen(L, 1.0, diffs, kmax=12) - torus_green_eigen(L, 0.2, diffs, kmax=12)
    assert np.allclose(got, want, rtol=1e-9)
    # full values of separated points agree to the truncation level
    assert np.allclose(cutoff_green(dom, 0.5, np.zeros((2, 3)), diffs[:2]),
                       torus_green_eigen(L, 0.5, diffs[:2], kmax=30), rtol=1e-4)


def test_torus_green_small_time_matches_euclidean():
    g_t = cutoff_green(FlatTorus((4.0, 4.0, 4.0)), 0.05, [2.0, 2.0, 2.0], [2.3, 2.0, 2.0])
    g_e = cutoff_green(Euclidean(3), 0.05, [0, 0, 0], [0.3, 0, 0])
    assert g_t == pytest.approx(g_e, rel=1e-10)


def _box_heat_std(t, x, y, sides, terms=200):
    out = 1.0
    for xi, yi, a in zip(x, y, sides):
        m = np.arange(1, terms + 1)
        k = m * math.pi / a
        out *= (2 / a) * np.sum(np.sin(k * xi) * np.sin(k * yi) * np.exp(-0.5 * k * k * t))
    return out


def test_box_green_against_time_integrated_series():
    sides = (1.0, 1.5, 0.8)
    x, y = np.array([0.3, 0.7, 0.4]), np.array([0.6, 0.9, 0.35])
    eps = 0.002  # h(t) < e^{-20} for t < eps at this separation
    for T in (0.05, 0.5):
        want = _quad(lambda t: _box_heat_std(t, x, y, sides), eps, T)
        assert cutoff_green(Box(sides), T, x, y, STD) == pytest.approx(want, rel=1e-7)


def test_box_green_vanishes_at_wall():
    g = cutoff_green(Box((1.0, 1.0)), 0.3, [[0.0, 0.4]], [[0.5, 0.5]])
    assert abs(g) < 1e-10


def _sphere_heat_std(t, cosg, lmax=150):
    ell = np.arange(lmax + 1)
    return float(np.sum((2 * ell + 1) / (4 * math.pi) * special.eval_legendre(ell, cosg) * np.exp(-0.5 * ell * (ell + 1) * t)))


def test_sphere_green_against_time_integrated_series():
    g = 1.2
    x, y = [0.0, 0.0, 1.0], [math.sin(g), 0.0, math.cos(g)]
    eps = 0.01
    for T in (0.3, 2.0):
        want = _quad(lambda t: _sphere_heat_std(t, math.cos(g)), eps, T)
        assert cutoff_green(Sphere2(), T, x, y, STD) == pytest.approx(want, rel=1e-7)


def test_coincident_points_rejected():
    for dom, p in ((Euclidean(3), [0, 0, 0]), (FlatTorus((1.0, 1.0)), [0.2, 0.2]), (Sphere2(), [0, 0, 1.0])):
        with pytest.raises(ValueError):
            cutoff_green(dom, 1.0, p, p)


@pytest.mark.parametrize("dom,x,y", [
    (Euclidean(3), [0, 0, 0], [0.4, 0.2, 0]),
    (FlatTorus((1.0, 2.0, 1.0)), [0.1, 0.2, 0.3], [0.8, 1.5, 0.1]),
    (Box((1.0, 1.0, 1.0)), [0.2, 0.3, 0.4], [0.7, 0.6, 0.5]),
    (Sphere2(), [0, 0, 1.0], [0.6, 0, 0.8]),
])
def test_green_symmetric_and_monotone_in_T(dom, x, y):
    gs = [cutoff_green(dom, T, x, y) for T in (0.1, 0.2, 0.4, 0.8)]
    assert all(b > a for a, b in zip(gs, gs[1:]))
    assert cutoff_green(dom, 0.5, x, y) == pytest.approx(cutoff_green(dom, 0.5, y, x), rel=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(0.0, 1.0), min_size=6, max_size=6), st.floats(0.05, 2.0))
def test_torus_green_symmetry_property(c, T):
    x, y = np.array(c[:3]), np.array(c[3:])
    if FlatTorus((1.0, 1.0, 1.0)).distance(x, y) < 1e-3:
        return
    g = GreenFunction(FlatTorus((1.0, 1.0, 1.0)), T)
    assert g(x, y) == pytest.approx(g(y, x), rel=1e-8)
    assert g(x, y) >= 0


# ---------------------------------------------------------------------------
# Martin kernel


def test_single_cell_kernel():
    K = CellSet(np.array([[1.0, 0.0, 0.0]]), np.array([0.001]), 0.1, np.zeros((1, 3), dtype=int))
    prob = martin_kernel_matrix(Euclidean(3), 1.0, K, [0, 0, 0])
    g_root = cutoff_green(Euclidean(3), 1.0, [0, 0, 0], [1.0, 0, 0], STD)
    off = (np.arange(12) + 0.5) / 12 - 0.5
    grid = np.stack(np.meshgrid(off, off, off, indexing="ij"), -1).reshape(-1, 3) * 0.1
    avg = np.mean(cutoff_green(Euclidean(3), 1.0, np.zeros(3), grid, STD))
    assert prob.kernel.shape == (1, 1)
    assert prob.kernel[0, 0] == pytest.approx(avg / g_root, rel=1e-10)


@pytest.mark.parametrize("dom", [Euclidean(3), Box((3.0, 3.0, 3.0))])
def test_kernel_times_root_green_is_symmetric(dom):
    K = BallSet((1.5, 1.5, 1.5), 0.2).cells(4)
    prob = martin_kernel_matrix(dom, 1.0, K, [0.5, 1.5, 1.5])
    G = prob.kernel * prob.g_root[None, :]
    assert np.allclose(G, prob.green, rtol=1e-12)
    assert np.allclose(G, G.T, rtol=1e-8)
    assert np.all(prob.kernel >= 0) and np.all(np.isfinite(prob.kernel))


def test_root_inside_rejected():
    for rho in ([0, 0, 0], [0.05, 0.02, 0.0]):
        with pytest.raises(ValueError):
            martin_kernel_matrix(Euclidean(3), 1.0, BallSet((0, 0, 0), 0.3).cells(6), rho)


def test_refinement_changes_disk_capacity_little():
    dom = Euclidean(2)
    disk = BallSet((1.0, 0.0), 0.2)
    caps = [min_energy_measure(martin_kernel_matrix(dom, 1.0, disk.cells(k), [0, 0])).capacity for k in (12, 24)]
    assert abs(caps[1] - caps[0]) / caps[1] < 0.05


# ---------------------------------------------------------------------------
# energy minimisation


def test_one_cell_problem():
    res = min_energy_measure(np.array([[2.5]]))
    assert res.weights.tolist() == [1.0] and res.capacity == pytest.approx(0.4)


def test_diagonal_pair():
    res = min_energy_measure(np.diag([3.0, 3.0]))
    assert np.allclose(res.weights, [0.5, 0.5], atol=1e-6)
    assert res.capacity == pytest.approx(2 / 3, rel=1e-5)


def test_tol_validation():
    with pytest.raises(ValueError):
        min_energy_measure(np.eye(2), tol=1e-3)
    with pytest.raises(ValueError):
        min_energy_measure(np.ones((2, 3)))


def _random_kernel(m, rng):
    pts = rng.uniform(0, 1, (m, 3))
    d = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    G = np.exp(-d / 0.3) + np.diag(rng.uniform(0.5, 1.5, m))
    scale = rng.uniform(0.5, 2.0, m)
    return G / scale[None, :]


def _simplex_grid(m, step):
    k = int(round(1 / step))
    for c in itertools.combinations(range(k + m - 1), m - 1):
        b = np.diff(np.r_[-1, c, k + m - 1]) - 1
        yield b / k


@pytest.mark.parametrize("m", [2, 3, 4])
def test_energy_against_exhaustive_simplex_grid(m):
    rng = np.random.default_rng(m)
    M = _random_kernel(m, rng)
    Q = 0.5 * (M + M.T)
    tol = 1e-5
    res = min_energy_measure(M, tol=tol)
    grid = min(w @ Q @ w for w in _simplex_grid(m, 0.05))
    assert res.converged
    assert res.energy <= grid * (1 + tol)


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_energy_against_slsqp_on_twenty_cells(seed):
    rng = np.random.default_rng(100 + seed)
    M = _random_kernel(20, rng)
    Q = 0.5 * (M + M.T)
    tol = 1e-5
    res = min_energy_measure(M, tol=tol)
    opt = optimize.minimize(lambda w: w @ Q @ w, np.full(20, 1 / 20), jac=lambda w: 2 * Q @ w, method="SLSQP",
                            bounds=[(0, 1)] * 20, constraints=[{"type": "eq", "fun": lambda w: w.sum() - 1}],
                            options={"ftol": 1e-14, "maxiter": 1000})
    assert res.energy == pytest.approx(opt.fun, rel=tol)
    assert np.all(res.weights >= 0) and res.weights.sum() == pytest.approx(1.0)


def test_energy_nonincreasing_and_cap_flag():
    rng = np.random.default_rng(5)
    M = _random_kernel(30, rng)
    res = min_energy_measure(M, tol=1e-5)
    assert all(b <= a * (1 + 1e-12) for a, b in zip(res.energies, res.energies[1:]))
    capped = min_energy_measure(M, tol=1e-10, max_iters=2)
    assert not capped.converged and capped.iterations == 2


def test_weights_written_to_problem(tmp_path):
    prob = martin_kernel_matrix(Euclidean(3), 1.0, BallSet((1.0, 0, 0), 0.2).cells(6), [0, 0, 0])
    min_energy_measure(prob)
    assert isinstance(prob, CapacityProblem) and prob.weights.sum() == pytest.approx(1.0)
    prob.to_csv(tmp_path / "mu.csv")
    lines = (tmp_path / "mu.csv").read_text().splitlines()
    assert lines[0] == "x,y,z,weight" and len(lines) == len(prob.cells) + 1


def test_capacity_monotone_under_inclusion():
    dom = Euclidean(3)
    big = BallSet((1.0, 0.0, 0.0), 0.25).cells(10)
    keep = np.linalg.norm(big.centers - [1.0, 0, 0], axis=1) <= 0.15
    small = CellSet(big.centers[keep], big.measures[keep], big.spacing, big.index[keep])
    caps = [min_energy_measure(martin_kernel_matrix(dom, 1.0, K, [0, 0, 0])).capacity for K in (small, big)]
    assert caps[0] <= caps[1] * (1 + 1e-5)


def test_capacity_grows_with_radius():
    dom = Euclidean(3)
    caps = [min_energy_measure(martin_kernel_matrix(dom, 5.0, BallSet((1.0, 0, 0), a).cells(8), [0, 0, 0])).capacity
            for a in (0.05, 0.1, 0.2, 0.3)]
    assert all(b > a for a, b in zip(caps, caps[1:]))


# ---------------------------------------------------------------------------
# sandwich


def _cfg(**kw):
    base = dict(convention=STD, dt=1 / 200, horizon=1.0, samples=20_000, seed=3, shards=4)
    base.update(kw)
    return WalkConfig(**base)


def test_shrinking_ball_hitting_vanishes():
    ps = [hitting_probability(Euclidean(3), BallSet((1.0, 0, 0), a).target(), 1.0, [0, 0, 0], _cfg()).p_hat
          for a in (0.2, 0.05, 0.01)]
    assert ps[0] > ps[1] > ps[2] and ps[2] < 0.02


@pytest.mark.parametrize("dom,K,rho,T", [
    (Euclidean(3), BallSet((1.0, 0.0, 0.0), 0.2), (0, 0, 0), 1.0),
    (FlatTorus((1.0, 1.0, 1.0)), BallSet((0.8, 0.5, 0.5), 0.1), (0.5, 0.5, 0.5), 0.1),
])
def test_sandwich_lower_half(dom, K, rho, T):
    rep = capacity_sandwich_check(dom, K, rho, T, _cfg(), per_axis=8)
    assert rep.lower_ok
    assert rep.energy.converged and rep.cells > 100


@pytest.mark.xfail(strict=True, reason="fixed-time killing is not time-homogeneous; the Green-kernel capacity "
                                       "sits below the hitting probability (see the decisions ledger)")
def test_sandwich_upper_half():
    rep = capacity_sandwich_check(Euclidean(3), BallSet((1.0, 0.0, 0.0), 0.2), (0, 0, 0), 1.0, _cfg(), per_axis=8)
    assert rep.upper_ok


def test_cube_and_union_sets():
    cube = CubeSet((0.0, 0.0, 0.0), 0.1).cells(4)
    assert len(cube) == 64 and cube.volume == pytest.approx(0.008)
    u = BallUnionSet((((1.0, 0.15, 0.0), 0.15), ((1.0, -0.15, 0.0), 0.15)))
    assert u.target().distance(Euclidean(3), np.array([[1.0, 0.15, 0.0]]))[0] == 0.0
    assert u.spec()["kind"] == "ball_union"


# ---------------------------------------------------------------------------
# volume ratio / capacity chain


def test_volume_ratio_trivial_when_ball_inside():
    pair = eigenpair_catalog(Box((1.0, 1.0, 1.0)), (1, 1, 1))
    d = nodal_decomposition(pair, 64)
    rep = volume_ratio_capacity_bound(d, d.components[0].id, [0.5, 1.0], 1 / 3, _cfg(samples=1000), per_axis=6)
    assert rep.trivial and rep.calibration_stable
    assert all(r.vol_ratio == 0 and r.psi == 0 for r in rep.rows)


def test_volume_ratio_needs_dimension_three():
    pair = eigenpair_catalog(Box((1.0, 1.0)), (1, 1))
    d = nodal_decomposition(pair, 64)
    with pytest.raises(ValueError):
        volume_ratio_capacity_bound(d, d.components[0].id, [1.0], 1 / 3, _cfg())


def test_volume_ratio_rows_monotone():
    pair = eigenpair_catalog(Box((1.0, 1.0, 1.0)), (4, 1, 1))
    d = nodal_decomposition(pair, 64)
    rep = volume_ratio_capacity_bound(d, d.components[0].id, [2.0, 3.0, 4.0], 1 / 3, _cfg(samples=2000), per_axis=8)
    vr = [r.vol_ratio for r in rep.rows]
    assert all(b >= a for a, b in zip(vr, vr[1:])) and vr[-1] > 0
    assert all(r.psi <= 1 and r.cap_term >= 0 for r in rep.rows)
