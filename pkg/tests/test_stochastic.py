import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from nodalbm.geometry import Box, Euclidean, FlatTorus, PointPiece, Sphere2, SubmanifoldUnion
from nodalbm.special import DiffusionConvention, kent_hitting_probability
from nodalbm.spectral import eigenpair_catalog, nodal_decomposition
from nodalbm.stochastic import (BallExterior, BallTarget, HalfSpace, UnionTarget, WalkConfig, alpha_constant_estimate,
                                cylinder_factorization_check, derive_seed, feynman_kac_expectation,
                                hitting_probability, max_point_exit_check, simulate_path)

ANALYST = DiffusionConvention.ANALYST


def cfg(**kw):
    base = dict(dt=1 / 200, horizon=1.0, samples=20_000, seed=7, shards=4)
    base.update(kw)
    return WalkConfig(**base)


def test_config_validation():
    with pytest.raises(ValueError):
        WalkConfig(dt=2.0, horizon=1.0)
    with pytest.raises(ValueError):
        WalkConfig(samples=50)
    with pytest.raises(ValueError):
        WalkConfig(seed=-1)
    assert WalkConfig(dt=0.01, horizon=1.0).steps == 100
    assert cfg().for_horizon(0.3).steps == 200


def test_derive_seed_is_deterministic_and_tag_sensitive():
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
    assert derive_seed(1, "a") != derive_seed(1, "b")
    assert 0 <= derive_seed(2**64 - 1, 3) < 2**64


def test_determinism_bit_for_bit():
    dom = Euclidean(3)
    a = hitting_probability(dom, BallExterior((0, 0, 0), 1.0), 0.5, [0, 0, 0], cfg(samples=5000))
    b = hitting_probability(dom, BallExterior((0, 0, 0), 1.0), 0.5, [0, 0, 0], cfg(samples=5000))
    assert a.p_hat == b.p_hat and a.hits == b.hits
    assert np.array_equal(a.histogram, b.histogram)
    c = hitting_probability(dom, BallExterior((0, 0, 0), 1.0), 0.5, [0, 0, 0], cfg(samples=5000, seed=8))
    assert c.hits != a.hits


def test_trivial_hitting_cases():
    dom = Euclidean(2)
    inside = hitting_probability(dom, BallTarget((0, 0), 0.5), 1.0, [0.1, 0.0], cfg(samples=1000))
    assert inside.p_hat == 1.0 and inside.stderr == 0.0
    zero = hitting_probability(dom, BallTarget((3, 0), 0.5), 0.0, [0.0, 0.0], cfg(samples=1000))
    assert zero.p_hat == 0.0 and zero.hits == 0


def test_estimate_fields_consistent():
    est = hitting_probability(Euclidean(2), BallExterior((0, 0), 1.0), 0.4, [0, 0], cfg(samples=4000))
    assert 0 <= est.p_hat <= 1
    assert est.stderr == pytest.approx(math.sqrt(est.p_hat * (1 - est.p_hat) / est.samples))
    assert est.histogram.sum() == est.hits
    lo, hi = est.ci()
    assert lo < est.p_hat < hi


@pytest.mark.parametrize("dim", [1, 2, 3])
def test_exit_probability_matches_kent(dim):
    t = 0.5
    est = hitting_probability(Euclidean(dim), BallExterior((0.0,) * dim, 1.0), t, np.zeros(dim), cfg())
    ref = kent_hitting_probability(dim, 1.0, t)
    assert abs(est.p_hat - ref) <= 3 * est.stderr + 2e-3


def test_halfspace_matches_reflection_principle():
    # P(max_{s<=t} B_s >= a) = 2 (1 - Φ(a / √t))
    a, t = 0.7, 0.6
    est = hitting_probability(Euclidean(2), HalfSpace((1.0, 0.0), a), t, [0, 0], cfg())
    ref = 2 * stats.norm.sf(a / math.sqrt(t))
    assert abs(est.p_hat - ref) <= 3 * est.stderr + 2e-3


def test_analyst_convention_doubles_time():
    dom = Euclidean(3)
    tg = BallExterior((0, 0, 0), 1.0)
    a = hitting_probability(dom, tg, 0.25, [0, 0, 0], cfg(convention=ANALYST))
    b = hitting_probability(dom, tg, 0.5, [0, 0, 0], cfg())
    assert a.p_hat == b.p_hat


def test_dt_halving_stable_with_bridge():
    dom = Euclidean(3)
    tg = BallExterior((0, 0, 0), 1.0)
    coarse = hitting_probability(dom, tg, 0.5, [0, 0, 0], cfg(dt=1 / 100))
    fine = hitting_probability(dom, tg, 0.5, [0, 0, 0], cfg(dt=1 / 200))
    assert abs(coarse.p_hat - fine.p_hat) < 2 * max(coarse.stderr, fine.stderr) * math.sqrt(2)


def test_path_lengths_and_stop():
    rec = simulate_path(Euclidean(2), [0, 0], cfg(dt=0.01))
    assert rec.positions.shape == (101, 2) and not rec.stopped
    rec = simulate_path(Euclidean(1), [0.0], cfg(dt=0.001), stop=lambda x: abs(x[0]) > 0.05)
    assert rec.stopped and abs(rec.positions[-1, 0]) > 0.05
    assert rec.stop_time == pytest.approx(rec.times[-1])


def test_sphere_path_stays_on_sphere():
    rec = simulate_path(Sphere2(), [0, 0, 1.0], cfg(dt=0.01))
    assert np.allclose(np.linalg.norm(rec.positions, axis=1), 1.0, atol=1e-12)


def test_endpoint_variance_equals_time():
    T = 0.8
    n = 100_000
    c = WalkConfig(dt=T / 8, horizon=T, samples=n, seed=3)
    rng = np.random.default_rng(np.random.SeedSequence([c.seed, 1]))
    ends = np.array([simulate_path(Euclidean(1), [0.0], replace(c, seed=int(s))).positions[-1, 0]
                     for s in rng.integers(0, 2**63, 2000)])
    # sample variance within 3 stderr; stderr of s^2 is T sqrt(2/(n-1))
    se = T * math.sqrt(2 / (len(ends) - 1))
    assert abs(ends.var(ddof=1) - T) <= 3 * se


def test_torus_endpoint_uniform():
    c = WalkConfig(dt=0.5, horizon=4.0, samples=100, seed=5)
    rng = np.random.default_rng(11)
    ends = np.array([simulate_path(FlatTorus((1.0,)), [0.0], replace(c, seed=int(s))).positions[-1, 0]
                     for s in rng.integers(0, 2**63, 3000)])
    counts, _ = np.histogram(ends, bins=10, range=(0, 1))
    assert stats.chisquare(counts).pvalue > 1e-3


# ---------------------------------------------------------------------------
# Feynman–Kac and the exit bound


@pytest.fixture(scope="module")
def box_pair():
    return eigenpair_catalog(Box((1.0, 1.0)), (1, 1))


def test_feynman_kac_unit_square(box_pair):
    t = 1 / box_pair.lam
    est = feynman_kac_expectation(box_pair, None, t, [0.5, 0.5], cfg(convention=ANALYST))
    assert est.reference == pytest.approx(math.exp(-1))
    assert est.within
    assert abs(est.estimate) <= 1.0 + 3 * est.stderr


def test_feynman_kac_small_time(box_pair):
    est = feynman_kac_expectation(box_pair, None, 1e-6, [0.5, 0.5], cfg(convention=ANALYST, samples=1000))
    assert est.estimate == pytest.approx(1.0, abs=1e-3)
    zero = feynman_kac_expectation(box_pair, None, 0.0, [0.3, 0.5], cfg(samples=1000))
    assert zero.estimate == pytest.approx(box_pair([[0.3, 0.5]])[0])


@pytest.mark.parametrize("mode", [(1, 1), (2, 1), (3, 2)])
@pytest.mark.parametrize("s", [0.25, 1.0, 2.0])
def test_feynman_kac_grid(mode, s):
    pair = eigenpair_catalog(Box((1.0, 1.0)), mode)
    d = nodal_decomposition(pair, 64)
    est = feynman_kac_expectation(pair, d.components[0], s / pair.lam, None, cfg(convention=ANALYST, samples=10_000))
    assert est.within


@pytest.mark.parametrize("t0,bound", [(1.0, 0.6321), (0.1, 0.0952)])
def test_exit_bound_examples(box_pair, t0, bound):
    d = nodal_decomposition(box_pair, 64)
    rep = max_point_exit_check(box_pair, d.components[0], t0, cfg(samples=10_000))
    assert rep.bound == pytest.approx(bound, abs=1e-4)
    assert rep.passed


@pytest.mark.parametrize("dom,mode", [(Box((1.0, 1.0)), (3, 2)), (Box((1.0, 2.0)), (1, 3)), (FlatTorus((1.0, 1.0)), (1, 1))])
def test_exit_bound_all_components(dom, mode):
    pair = eigenpair_catalog(dom, mode)
    d = nodal_decomposition(pair, 64)
    for c in d.components:
        assert max_point_exit_check(pair, c, 1.0, cfg(samples=4000)).passed


# ---------------------------------------------------------------------------
# cylinder factorisation and α


def test_cylinder_degenerate_k0():
    rep = cylinder_factorization_check(3, 0, 1.0, 0.5, 0.2, cfg(samples=5000))
    assert rep.confinement.p_hat == 1.0
    assert rep.joint == rep.exit_projection.p_hat == rep.product


@pytest.mark.parametrize("n,k", [(2, 1), (3, 1), (3, 2)])
def test_cylinder_joint_dominates_product(n, k):
    rep = cylinder_factorization_check(n, k, 1.0, 0.5, 0.2, cfg(samples=10_000))
    assert rep.joint >= rep.product - 3 * math.hypot(rep.product_stderr, rep.joint_stderr)


def test_cylinder_rejects_bad_k():
    with pytest.raises(ValueError):
        cylinder_factorization_check(3, 3, 1.0, 0.5, 0.2, cfg())


def test_alpha_empty_sigma_at_least_one(box_pair):
    d = nodal_decomposition(box_pair, 64)
    sig = SubmanifoldUnion(box_pair.domain, ())
    rep = alpha_constant_estimate(sig, box_pair, d.components[0], 1.0, 1.0, cfg(samples=5000))
    assert rep.numerator.p_hat == 1.0
    assert rep.ratio >= 1.0


def test_alpha_point_piece_thinning(box_pair):
    # a point is polar in the plane: the numerator tends to 1 as the
    # thickening shrinks, so the ratio tends to 1 / ψ_∂B
    d = nodal_decomposition(box_pair, 64)
    c = d.components[0]
    sig = SubmanifoldUnion(box_pair.domain, (PointPiece(tuple(c.max_point)),))
    r = 1.0 / math.sqrt(box_pair.lam)
    nums = []
    for eps in (0.5 * r, 0.1 * r, 0.01 * r):
        rep = alpha_constant_estimate(sig, box_pair, c, 1.0, 1.0, cfg(samples=5000), tube_radius=eps)
        nums.append(rep.numerator.p_hat)
    assert nums == sorted(nums)
    assert nums[-1] > 0.99
    assert rep.ratio == pytest.approx(nums[-1] / rep.denominator.p_hat)


# ---------------------------------------------------------------------------
# properties


@settings(max_examples=15, deadline=None)
@given(r1=st.floats(0.2, 1.5), r2=st.floats(0.2, 1.5), seed=st.integers(0, 2**32))
def test_path_coupled_monotonicity(r1, r2, seed):
    lo, hi = sorted((r1, r2))
    dom = Euclidean(2)
    small = BallTarget((1.8, 0.0), lo)
    big = UnionTarget((BallTarget((1.8, 0.0), hi), BallTarget((0.0, 2.0), 0.3)))
    a, b = hitting_probability(dom, [small, big], 1.0, [0, 0], cfg(samples=2000, seed=seed))
    assert a.hits <= b.hits


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32))
def test_shared_paths_equal_separate_runs(seed):
    dom = Euclidean(3)
    t1, t2 = BallExterior((0, 0, 0), 1.0), BallTarget((0.8, 0, 0), 0.2)
    both = hitting_probability(dom, [t1, t2], 0.5, [0, 0, 0], cfg(samples=1000, seed=seed))
    one = hitting_probability(dom, t1, 0.5, [0, 0, 0], cfg(samples=1000, seed=seed))
    assert both[0].hits == one.hits
