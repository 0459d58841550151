import math

import numpy as np
import pytest
from scipy.special import ellipe

from scatterlab import (
    BoundaryCurve,
    DomainShapeError,
    build_boundary,
    circle_points,
    ellipse_points,
    fourier_points,
    geodesic_circle,
    geodesic_curvature,
    interior_quadrature,
    outward_normal,
)
from scatterlab.chords import curvature_from_chords


def test_unit_circle_length(unit_disk):
    assert unit_disk.length == pytest.approx(2.0 * math.pi, abs=1e-8)


def test_ellipse_length_elliptic_integral(ellipse21):
    # independent oracle: complete elliptic integral of the second kind
    a, b = 2.0, 1.0
    want = 4.0 * a * ellipe(1.0 - (b / a) ** 2)
    assert ellipse21.length == pytest.approx(want, abs=1e-5)
    assert want == pytest.approx(9.6884482, abs=1e-6)


def test_nodes_equispaced_in_arclength(ellipse21):
    assert ellipse21.reparam_error < 1e-6 * ellipse21.length


def test_frame_orthonormal(ellipse21):
    m = ellipse21.metric
    p, T, N = ellipse21.points, ellipse21.tangents, ellipse21.normals
    assert np.abs(m.inner(p, T, N)).max() < 1e-8
    assert np.abs(m.norm(p, T) - 1.0).max() < 1e-8
    assert np.abs(m.norm(p, N) - 1.0).max() < 1e-8


def test_normal_points_outward(ellipse21):
    # moving a touch along the normal exits the domain
    probe = ellipse21.points + 1e-3 * ellipse21.normals
    assert not ellipse21.contains(probe).any()


def test_circle_curvature_constant(unit_disk):
    assert np.abs(unit_disk.kappa - 1.0).max() < 1e-8
    assert geodesic_curvature(unit_disk, 1.234) == pytest.approx(1.0, abs=1e-8)


def test_ellipse_curvature_closed_form(ellipse21):
    # kappa at the major-axis end is a/b^2, at the minor-axis end b/a^2
    assert geodesic_curvature(ellipse21, 0.0) == pytest.approx(2.0, rel=1e-6)
    quarter = ellipse21.length / 4.0
    assert geodesic_curvature(ellipse21, quarter) == pytest.approx(0.25, rel=1e-6)


def test_geodesic_circle_curvature_on_sphere(sphere):
    r0 = 0.7
    cap = BoundaryCurve(sphere, geodesic_circle(sphere, r0), n_nodes=128,
                        dense=2048)
    want = math.cos(r0) / math.sin(r0)
    assert np.abs(cap.kappa - want).max() < 1e-7


def test_two_curvature_estimators_agree(ellipse21):
    # covariant-derivative kappa vs the chord entry/exit angle estimator
    est = curvature_from_chords(ellipse21, separation=1e-2)
    assert np.abs(est - ellipse21.kappa).max() < 1e-3


def test_interior_rule_disk_area(unit_disk):
    ones = lambda p: np.ones(p.shape[0])
    assert interior_quadrature(unit_disk, ones) == pytest.approx(math.pi, abs=1e-8)
    assert unit_disk.area() == pytest.approx(math.pi, abs=1e-8)


def test_interior_rule_converges_second_order(bump):
    curve = BoundaryCurve(bump, ellipse_points(1.2, 0.9), n_nodes=128, dense=2048)
    vals = []
    for n in (8, 16, 32):
        pts, w = curve.interior_quadrature(n, 4 * n)
        vals.append(float(w.sum()))
    fine = curve.area()
    e1, e2 = abs(vals[0] - fine), abs(vals[1] - fine)
    assert e2 < e1 / 4.0 or e2 < 1e-10


def test_cap_area_closed_form(sphere):
    theta0 = math.pi / 5.0
    cap = BoundaryCurve(sphere, geodesic_circle(sphere, theta0), n_nodes=128,
                        dense=2048)
    assert cap.area() == pytest.approx(2.0 * math.pi * (1.0 - math.cos(theta0)),
                                       abs=1e-7)
    assert cap.length == pytest.approx(2.0 * math.pi * math.sin(theta0), abs=1e-7)


def test_hyperbolic_disk_closed_form(hyperbolic):
    R = 1.0
    disk = BoundaryCurve(hyperbolic, geodesic_circle(hyperbolic, R),
                         n_nodes=128, dense=2048)
    assert disk.length == pytest.approx(2.0 * math.pi * math.sinh(R), abs=1e-7)
    assert disk.area() == pytest.approx(2.0 * math.pi * (math.cosh(R) - 1.0),
                                        abs=1e-7)


def test_bump_area_against_monte_carlo(bump):
    curve = BoundaryCurve(bump, circle_points(1.0), n_nodes=128, dense=2048)
    quad = curve.area()
    # independent route: chart-uniform samples in the unit disk, weighted by
    # the conformal area element
    rig = np.random.default_rng(7)
    n = 1_000_000
    pts = rig.uniform(-1.0, 1.0, size=(n, 2))
    inside = (pts ** 2).sum(axis=1) <= 1.0
    vals = np.zeros(n)
    vals[inside] = np.exp(2.0 * bump.phi(pts[inside]))
    mc = 4.0 * vals.mean()
    sigma = 4.0 * vals.std(ddof=1) / math.sqrt(n)
    assert abs(quad - mc) < 3.0 * sigma


def test_figure_eight_rejected(plane):
    def fig8(t):
        u = 2.0 * math.pi * np.asarray(t)
        return np.stack([np.sin(2.0 * u), np.sin(u)], axis=-1)

    with pytest.raises(DomainShapeError):
        BoundaryCurve(plane, fig8, n_nodes=128, dense=2048)


def test_kidney_not_convex(plane):
    kidney = BoundaryCurve(plane, fourier_points(1.0, {2: (0.25, 0.0)}),
                           n_nodes=128, dense=2048)
    flag, witness = kidney.is_strictly_convex()
    assert not flag
    assert witness["kappa"] < 0.0
    assert "node" in witness


def test_convexity_of_smooth_domains(unit_disk, ellipse21):
    for curve in (unit_disk, ellipse21):
        flag, witness = curve.is_strictly_convex()
        assert flag
        assert witness["kappa_min"] > 0.0


def test_build_boundary_from_samples(plane):
    ang = np.arange(200) * 2.0 * math.pi / 200
    pts = np.stack([2.0 * np.cos(ang), np.sin(ang)], axis=-1)
    curve = build_boundary(plane, pts, n_nodes=128, dense=2048)
    want = 4.0 * 2.0 * ellipe(0.75)
    assert curve.length == pytest.approx(want, abs=1e-4)


def test_build_boundary_from_fourier_dict(plane):
    rep = {"cos": [[0.0, 0.0], [2.0, 0.0]], "sin": [[0.0, 0.0], [0.0, 1.0]]}
    curve = build_boundary(plane, rep)
    want = 4.0 * 2.0 * ellipe(0.75)
    assert curve.length == pytest.approx(want, abs=1e-6)


def test_build_boundary_needs_enough_samples(plane):
    ang = np.arange(40) * 2.0 * math.pi / 40
    pts = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    with pytest.raises(DomainShapeError):
        build_boundary(plane, pts)


def test_outward_normal_interpolates(unit_disk):
    s = 0.37 * unit_disk.length
    n = outward_normal(unit_disk, s)
    ang = 2.0 * math.pi * 0.37
    assert np.allclose(n, [math.cos(ang), math.sin(ang)], atol=1e-9)


def test_construction_stable_across_dense_values(plane):
    # periodic-spline closure must not depend on the sampling density
    for dense in (1024, 2048, 3072, 4096, 8192):
        curve = BoundaryCurve(plane, ellipse_points(2.0, 1.0), n_nodes=64,
                              dense=dense)
        assert curve.length == pytest.approx(9.6884482, abs=1e-5)


def test_interior_quadrature_rejects_bad_integrand(unit_disk):
    with pytest.raises(DomainShapeError):
        interior_quadrature(unit_disk, lambda p: np.full(p.shape[0], np.nan))
    with pytest.raises(DomainShapeError):
        interior_quadrature(unit_disk, lambda p: np.ones(3))
