import csv
import math

import numpy as np
import pytest

from nodalbm.geometry import Box, Disk, FlatTorus, Sphere2, Wedge
from nodalbm.special import bessel_zeros
from nodalbm.spectral import (asymmetry_ratio, eigenpair_catalog, inradius, inscribed_ball_ratio, laplacian_residual,
                              nodal_decomposition)


def test_catalog_examples():
    p = eigenpair_catalog(Box((1.0, 1.0)), (1, 1))
    assert p.lam == pytest.approx(2 * math.pi**2)
    assert p([[0.5, 0.5]])[0] == pytest.approx(1.0)
    assert eigenpair_catalog(Disk(1.0), (0, 1)).lam == pytest.approx(bessel_zeros(0, 1)[1] ** 2)
    assert eigenpair_catalog(Disk(1.0), (0, 1)).lam == pytest.approx(5.7832, abs=1e-4)
    assert eigenpair_catalog(Sphere2(), 2).lam == pytest.approx(6.0)


@pytest.mark.parametrize("dom,mode", [(Box((1.0, 1.0)), (0, 1)), (FlatTorus((1.0,)), (0,)), (Box((1.0,)), (1, 2))])
def test_invalid_modes(dom, mode):
    with pytest.raises(ValueError):
        eigenpair_catalog(dom, mode)


@pytest.mark.parametrize("dom,mode", [
    (Box((1.0, 1.5)), (2, 3)),
    (Box((1.0, 1.0, 1.0)), (1, 2, 1)),
    (FlatTorus((1.0, 2.0)), (1, 2)),
    (Disk(1.0), (2, 2)),
    (Sphere2(), 3),
    (Wedge(1.2), (1, 2)),
])
def test_laplacian_residual(dom, mode):
    assert laplacian_residual(eigenpair_catalog(dom, mode), 256) < 1e-2


def test_dirichlet_vanishes_on_boundary():
    p = eigenpair_catalog(Box((1.0, 2.0)), (3, 2))
    s = np.linspace(0, 1, 50)
    pts = np.concatenate([np.c_[s, 0 * s], np.c_[s, 2 + 0 * s], np.c_[0 * s, 2 * s], np.c_[1 + 0 * s, 2 * s]])
    assert np.max(np.abs(p(pts))) < 1e-9
    d = eigenpair_catalog(Disk(1.0), (1, 2))
    th = np.linspace(0, 2 * math.pi, 40)
    assert np.max(np.abs(d(np.c_[np.cos(th), np.sin(th)]))) < 1e-9


@pytest.mark.parametrize("dom,mode,count", [
    (Box((1.0, 1.0)), (3, 2), 6),
    (Box((1.0, 1.0)), (1, 1), 1),
    (FlatTorus((1.0,)), (3,), 6),
    (FlatTorus((1.0, 1.0)), (2, 1), 8),
    (Sphere2(), 3, 4),
    (Disk(1.0), (2, 2), 8),
])
def test_component_counts(dom, mode, count):
    assert len(nodal_decomposition(eigenpair_catalog(dom, mode), 128).components) == count


@pytest.mark.parametrize("mode", [(1, 1, 1), (2, 1, 3)])
def test_box3_product_count(mode):
    d = nodal_decomposition(eigenpair_catalog(Box((1.0, 1.0, 1.0)), mode), 64 * 1)
    assert len(d.components) == np.prod(mode)


def test_components_partition_and_max_points():
    p = eigenpair_catalog(Box((1.0, 1.0)), (3, 2))
    d = nodal_decomposition(p, 128)
    total = sum(c.volume for c in d.components) + d.nodal_volume
    assert total == pytest.approx(1.0, rel=1e-12)
    for c in d.components:
        m = d.mask(c.id)
        assert np.all(np.sign(d.values[m]) == c.sign)
        assert abs(c.max_value) >= np.max(np.abs(d.values[m])) - 1e-12
        assert abs(c.max_value) == pytest.approx(1.0, abs=1e-9)


def test_decomposition_csv(tmp_path):
    d = nodal_decomposition(eigenpair_catalog(Box((1.0, 1.0)), (2, 1)), 64)
    path = tmp_path / "cells.csv"
    d.to_csv(path)
    with open(path, encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["x", "y", "sign", "component_id"]
    assert len(rows) == 64 * 64 + 1


@pytest.mark.parametrize("mode", [(2, 2), (3, 2), (4, 1), (1, 1)])
def test_inradius_of_rectangles(mode):
    d = nodal_decomposition(eigenpair_catalog(Box((1.0, 1.0)), mode), 128)
    est = inradius(d, d.components[0].id)
    assert abs(est.value - 1 / (2 * max(mode))) <= est.error + 1e-12


def test_inradius_interval():
    d = nodal_decomposition(eigenpair_catalog(Box((1.0,)), (4,)), 256)
    est = inradius(d, d.components[0].id)
    assert abs(est.value - 1 / 8) <= est.error


def test_inradius_wavelength_scaling_stable():
    vals = []
    for m in range(2, 9):
        p = eigenpair_catalog(Box((1.0, 1.0)), (m, m))
        d = nodal_decomposition(p, 64 * m // 2 + 64)
        vals.append(inradius(d, d.components[0].id).value * math.sqrt(p.lam))
    med = float(np.median(vals))
    assert all(0.8 * med <= v <= 1.2 * med for v in vals)


def test_inscribed_ratio_examples():
    p = eigenpair_catalog(Box((1.0, 1.0, 1.0)), (4, 4, 4))
    d = nodal_decomposition(p, 64)
    c = max(d.components, key=lambda c: abs(c.max_value))
    rep = inscribed_ball_ratio(d, c.id, 0.5)
    assert rep.ratio == 1.0 and rep.error_volume == 0.0


def test_inscribed_ratio_sweep_monotone_and_consistent():
    p = eigenpair_catalog(Box((1.0, 1.0, 1.0)), (4, 1, 1))
    d = nodal_decomposition(p, 64)
    c = d.components[0]
    reps = [inscribed_ball_ratio(d, c.id, r0) for r0 in (0.5, 1, 2, 3, 4)]
    errs = [r.error_volume for r in reps]
    assert all(b >= a for a, b in zip(errs, errs[1:]))
    for r in reps:
        assert 0 <= r.ratio <= 1
        assert r.intersection_volume + r.error_volume == pytest.approx(r.ball_volume, rel=1e-3)


@pytest.mark.parametrize("dom,mode", [(Box((1.0, 1.0)), (3, 2)), (FlatTorus((1.0, 1.0)), (2, 1)), (Sphere2(), 3)])
def test_ratio_tends_to_one(dom, mode):
    d = nodal_decomposition(eigenpair_catalog(dom, mode), 128)
    for c in d.components:
        assert inscribed_ball_ratio(d, c.id, 0.125).ratio > 0.99


def test_asymmetry_examples():
    p = eigenpair_catalog(Box((1.0, 1.0)), (2, 1))
    on_line = asymmetry_ratio(p, (0.5, 0.5), 0.2)
    assert on_line.precondition_met and on_line.ratio == pytest.approx(0.5, abs=1e-2)
    inside = asymmetry_ratio(p, (0.25, 0.5), 0.05)
    assert not inside.precondition_met and inside.ratio == 1.0


def _min_asymmetry(m, rng, radius=0.1, trials=16):
    p = eigenpair_catalog(Box((1.0, 1.0)), (m, m))
    vals = []
    for _ in range(trials):
        c = rng.uniform(radius, 1 - radius, 2)
        rep = asymmetry_ratio(p, tuple(c), radius)
        if rep.precondition_met:
            vals.append(min(rep.ratio, 1 - rep.ratio))
    return min(vals), p.lam


def test_asymmetry_lower_bound_with_constant_fitted_once():
    # both sign sets occupy at least C / sqrt(lambda) of balls meeting the nodal set
    rng = np.random.default_rng(11)
    v, lam = _min_asymmetry(5, rng)
    C = v * math.sqrt(lam)
    assert C > 0
    for m in range(6, 10):
        v, lam = _min_asymmetry(m, rng)
        assert v >= C / math.sqrt(lam)
