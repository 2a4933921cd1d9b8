import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from nodalbm.geometry import FlatTorus, Sphere2, Wedge
from nodalbm.heatkernel import (ConeSpec, green_comparability_experiment, halfplane_image_kernel, kernel_slice_csv,
                                wedge_heat_kernel, wedge_survival)
from nodalbm.special import ConvergenceError, DiffusionConvention
from nodalbm.stochastic import DomainExit, WalkConfig, hitting_probability

STD = DiffusionConvention.STANDARD
ANA = DiffusionConvention.ANALYST
HALF = ConeSpec(math.pi)


def _cart(p):
    return np.array([p[0] * math.cos(p[1]), p[0] * math.sin(p[1])])


def test_cone_spec_eigendata():
    spec = ConeSpec(1.3)
    ls = spec.eigenvalue(np.arange(1, 30))
    assert np.all(np.diff(ls) > 0)
    for j in (1, 2, 5):
        for k in (1, 2, 5):
            val = integrate.quad(lambda th: spec.eigenfunction(j, th) * spec.eigenfunction(k, th), 0, 1.3,
                                 epsabs=1e-13, limit=200)[0]
            assert val == pytest.approx(float(j == k), abs=1e-8)
    with pytest.raises(ValueError):
        ConeSpec(2 * math.pi)


@pytest.mark.parametrize("t", [0.1, 0.5, 2.0])
def test_halfplane_oracle_grid(t):
    pts = [(r, th) for r in np.linspace(0.3, 2.0, 5) for th in np.linspace(0.2, 2.9, 5)]
    x = (1.0, 1.1)
    # the series cancels down to deep-tail values; floor at 1e-12 of the peak
    floor = 1e-12 / (2 * math.pi * t)
    for y in pts:
        got = wedge_heat_kernel(HALF, t, x, y)
        want = halfplane_image_kernel(t, _cart(x), _cart(y))
        assert got == pytest.approx(want, rel=1e-6, abs=floor)


def test_halfplane_oracle_across_conventions():
    spec = ConeSpec(math.pi, ANA)
    x, y = (1.0, 0.7), (1.4, 2.0)
    got = wedge_heat_kernel(spec, 0.3, x, y)
    assert got == pytest.approx(halfplane_image_kernel(0.3, _cart(x), _cart(y), ANA), rel=1e-6)
    # ANALYST time t is STANDARD time 2t; densities in y agree
    assert got == pytest.approx(wedge_heat_kernel(HALF, 0.6, x, y), rel=1e-12)


def test_kernel_symmetry_and_sign():
    spec = ConeSpec(1.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        x = (rng.uniform(0.1, 3), rng.uniform(0.01, 0.99))
        y = (rng.uniform(0.1, 3), rng.uniform(0.01, 0.99))
        a, b = wedge_heat_kernel(spec, 0.4, x, y), wedge_heat_kernel(spec, 0.4, y, x)
        assert a >= 0
        assert a == pytest.approx(b, rel=1e-10, abs=1e-300)


def test_kernel_vanishes_at_boundary():
    spec = ConeSpec(1.0)
    vals = [wedge_heat_kernel(spec, 0.3, (1.0, 0.5), (1.0, eta)) for eta in (0.1, 1e-2, 1e-4, 1e-6, 0.0)]
    assert all(b < a for a, b in zip(vals, vals[1:-1]))
    assert vals[-1] == 0.0
    assert wedge_heat_kernel(spec, 0.3, (0.0, 0.5), (1.0, 0.5)) == 0.0


def test_kernel_input_checks():
    with pytest.raises(ValueError):
        wedge_heat_kernel(HALF, 0.3, (1.0, 0.5), (1.0, 4.0))
    with pytest.raises(ValueError):
        wedge_heat_kernel(HALF, 0.3, (1.0, 0.5), (1.0, 1.0), terms=5)
    with pytest.raises(ValueError):
        wedge_heat_kernel(HALF, -1.0, (1.0, 0.5), (1.0, 1.0))


def test_truncation_reports_terms():
    v, n = wedge_heat_kernel(ConeSpec(0.5), 0.01, (1.0, 0.2), (1.0, 0.25), return_terms=True)
    assert v > 0 and n >= 20


def test_nonconvergence_reports_bound(monkeypatch):
    import nodalbm.heatkernel as hk
    monkeypatch.setattr(hk, "MAX_TERMS", 64)
    # z = 1e4 needs hundreds of terms before ive(nu, z) decays
    with pytest.raises(ConvergenceError, match="attained bound"):
        wedge_heat_kernel(ConeSpec(math.pi), 1e-4, (1.0, 1.0), (1.0, 1.0))


def test_image_kernel_properties():
    x = np.array([0.3, 0.8])
    assert halfplane_image_kernel(0.5, x, np.array([1.0, 0.0])) == pytest.approx(0.0, abs=1e-300)
    with pytest.raises(ValueError):
        halfplane_image_kernel(0.5, x, np.array([1.0, -0.1]))
    # swapping y with its mirror flips the image term
    y = np.array([0.7, 0.4])
    free = lambda a, b: math.exp(-np.sum((a - b) ** 2) / (2 * 0.5)) / (2 * math.pi * 0.5)
    ybar = y * [1, -1]
    assert free(x, y) - free(x, ybar) == pytest.approx(-(free(x, ybar) - free(x, y)))
    assert halfplane_image_kernel(0.5, x, y) == pytest.approx(free(x, y) - free(x, ybar), rel=1e-12)


@pytest.mark.parametrize("h,t", [(0.5, 0.2), (1.0, 1.0), (0.3, 2.0)])
def test_image_kernel_integrates_to_survival(h, t):
    s = math.sqrt(t)
    f = lambda y2, y1: halfplane_image_kernel(t, np.array([0.0, h]), np.array([y1, y2]))
    val = integrate.dblquad(f, -10 * s, 10 * s, 0, h + 10 * s, epsabs=1e-11)[0]
    assert val == pytest.approx(2 * stats.norm.cdf(h / s) - 1, abs=1e-7)


def test_survival_halfplane_closed_form():
    val = wedge_survival(HALF, 0.25, (1.0, math.pi / 2))
    assert val == pytest.approx(2 * stats.norm.cdf(2.0) - 1, abs=1e-6)
    assert val == pytest.approx(0.9545, abs=1e-4)


def test_survival_small_time():
    assert wedge_survival(ConeSpec(1.0), 1e-5, (1.0, 0.5)) == pytest.approx(1.0, abs=1e-8)
    assert wedge_survival(ConeSpec(1.0), 0.0, (1.0, 0.5)) == 1.0


def test_survival_monotone():
    spec = ConeSpec(math.pi / 2)
    times = [wedge_survival(spec, t, (1.0, math.pi / 4)) for t in (0.05, 0.1, 0.2, 0.4, 0.8)]
    assert all(b <= a + 1e-9 for a, b in zip(times, times[1:]))
    depth = [wedge_survival(spec, 0.3, (1.0, th)) for th in (0.1, 0.3, 0.5, math.pi / 4)]
    assert all(b > a for a, b in zip(depth, depth[1:]))


def test_survival_matches_killed_walk():
    beta = math.pi / 2
    x = (1.0, beta / 2)
    t = 0.5
    val = wedge_survival(ConeSpec(beta), t, x)
    cfg = WalkConfig(dt=t / 400, horizon=t, samples=100_000, seed=17)
    est = hitting_probability(Wedge(beta), DomainExit(), t, _cart(x), cfg)
    assert abs((1 - est.p_hat) - val) <= 3 * est.stderr


def test_survival_warns_when_apex_underresolved():
    with pytest.warns(RuntimeWarning):
        wedge_survival(ConeSpec(1.0), 1.0, (0.5, 0.5), resolution=8)


def test_semigroup_property():
    spec = ConeSpec(math.pi / 2)
    t, s = 0.2, 0.3
    pts = [((0.8, 0.5), (1.1, 0.9)), ((1.0, 0.3), (0.7, 1.2)), ((1.2, 0.785), (1.2, 0.6))]
    g, w = np.polynomial.legendre.leggauss(40)
    rs = 0.5 * 4.0 * (g + 1)
    wr = 0.5 * 4.0 * w
    es = 0.5 * spec.beta * (g + 1)
    we = 0.5 * spec.beta * w
    for x, y in pts:
        tot = 0.0
        for r, a in zip(rs, wr):
            for e, b in zip(es, we):
                tot += a * b * r * wedge_heat_kernel(spec, t, x, (r, e)) * wedge_heat_kernel(spec, s, (r, e), y)
        assert tot == pytest.approx(wedge_heat_kernel(spec, t + s, x, y), rel=1e-4)


def test_kernel_slice_csv(tmp_path):
    path = tmp_path / "slice.csv"
    kernel_slice_csv(path, HALF, 0.5, (1.0, 1.5), [0.5, 1.0], [0.5, 1.0, 1.5])
    lines = path.read_text().splitlines()
    assert lines[0] == "rho,theta,value" and len(lines) == 7


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 3.0), st.floats(0.05, 3.09), st.floats(0.2, 3.0), st.floats(0.05, 3.09), st.floats(0.05, 3.0))
def test_halfplane_reduction_property(r1, a1, r2, a2, t):
    got = wedge_heat_kernel(HALF, t, (r1, a1), (r2, a2))
    want = halfplane_image_kernel(t, _cart((r1, a1)), _cart((r2, a2)))
    assert got == pytest.approx(want, rel=1e-6, abs=1e-12 / (2 * math.pi * t))


# ---------------------------------------------------------------------------
# Green comparability


def _cfg(n=10_000, seed=5):
    return WalkConfig(dt=1 / 200, horizon=1.0, samples=n, seed=seed, shards=4)


def test_torus_comparability_ratios_near_one():
    rep = green_comparability_experiment(FlatTorus((1.0, 1.0, 1.0)), [0.5, 0.5, 0.5], 0.1, 1.0, _cfg())
    assert 0.9 <= rep.c1_hat <= rep.c2_hat <= 1.1
    assert rep.stable
    assert abs(rep.exit_ratio - rep.exit_prediction) <= 3 * rep.exit_stderr + 1e-3


def test_sphere_comparability_finite_and_stable():
    rep = green_comparability_experiment(Sphere2(), [0, 0, 1.0], 0.2, 1.0, _cfg())
    assert 0 < rep.c1_hat <= rep.c2_hat < math.inf
    assert rep.stable


def test_comparability_chart_violation():
    with pytest.raises(ValueError):
        green_comparability_experiment(FlatTorus((1.0, 1.0, 1.0)), [0.5, 0.5, 0.5], 0.3, 1.0, _cfg())
    with pytest.raises(ValueError):
        green_comparability_experiment(Sphere2(), [0, 0, 1.0], 2.0, 1.0, _cfg())
