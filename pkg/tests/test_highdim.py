"""Model spaces, ball/ellipsoid domains, and the weighted-energy identity."""

import math

import numpy as np
import pytest
from scipy.special import ellipe

from scatterlab.errors import DomainShapeError, HypothesisError
from scatterlab.highdim import (
    HDDomain,
    ModelSpace,
    divergence_radial_fd,
    divergence_reflection_fd,
    energy_p_direct,
    energy_p_identity,
    reflect_hd,
    unit_sphere_area,
    unit_sphere_grid,
)


def _scatter_points(model, count, rng, r_lo=0.2, r_hi=1.2):
    # random points around the base point, pushed out along geodesics
    frame = model.tangent_frame(model.base_point)
    v = rng.standard_normal((count, model.dim))
    v /= np.linalg.norm(v, axis=1)[:, None]
    t = rng.uniform(r_lo, r_hi, count)
    pts, _ = model.exp(model.base_point[None, :], v @ frame, t)
    return pts, v @ frame, t


@pytest.mark.parametrize("curvature", [0, 1, -1])
def test_exp_log_roundtrip(curvature, rng):
    model = ModelSpace(3, curvature)
    pts, tans, t = _scatter_points(model, 8, rng)
    r, u = model.log(np.broadcast_to(model.base_point, pts.shape), pts)
    assert np.max(np.abs(r - t)) < 1.0e-12
    assert np.max(np.abs(u - tans)) < 1.0e-12


@pytest.mark.parametrize("curvature", [0, 1, -1])
def test_radial_density_pythagorean(curvature):
    model = ModelSpace(4, curvature)
    assert model.pythagorean_residual(np.linspace(0.01, 2.0, 200)) < 1.0e-12


def test_model_space_rejects_bad_arguments():
    with pytest.raises(HypothesisError):
        ModelSpace(1, 0)
    with pytest.raises(HypothesisError):
        ModelSpace(3, 2)


def test_sphere_grid_measures():
    # odd-dimensional ambient spheres integrate constants exactly
    pts, w = unit_sphere_grid(2, polar=48)
    assert abs(w.sum() - 2.0 * math.pi) < 1.0e-12
    pts, w = unit_sphere_grid(3, polar=48)
    assert abs(w.sum() - 4.0 * math.pi) < 1.0e-12
    coarse = abs(unit_sphere_grid(4, polar=24)[1].sum() - unit_sphere_area(4))
    fine = abs(unit_sphere_grid(4, polar=48)[1].sum() - unit_sphere_area(4))
    assert fine < 1.0e-3 and fine < coarse


def test_unit_sphere_area_values():
    assert abs(unit_sphere_area(2) - 2.0 * math.pi) < 1.0e-14
    assert abs(unit_sphere_area(3) - 4.0 * math.pi) < 1.0e-13
    assert abs(unit_sphere_area(4) - 2.0 * math.pi ** 2) < 1.0e-13


def test_ball_area_and_volume():
    flat = HDDomain.ball(ModelSpace(3, 0), 1.0, polar=16)
    assert abs(flat.area - 4.0 * math.pi) < 1.0e-10
    assert abs(flat.volume - 4.0 * math.pi / 3.0) < 1.0e-10
    r0 = 0.4
    cap = HDDomain.ball(ModelSpace(3, 1), r0, polar=16)
    assert abs(cap.area - 4.0 * math.pi * math.sin(r0) ** 2) < 1.0e-10
    vol = 2.0 * math.pi * (r0 - math.sin(r0) * math.cos(r0))
    assert abs(cap.volume - vol) < 1.0e-8


@pytest.mark.parametrize("curvature", [0, 1, -1])
def test_ball_normals_reflect_onto_each_other(curvature):
    dom = HDDomain.ball(ModelSpace(3, curvature), 0.7, polar=12)
    X, NU = dom.boundary_points, dom.boundary_normals
    for i, j in ((0, 41), (5, 200), (17, 283)):
        got = reflect_hd(dom.model, X[i], X[j], NU[j])
        assert np.max(np.abs(got - NU[i])) < 1.0e-12


@pytest.mark.parametrize("curvature", [0, 1, -1])
def test_round_ball_energy_vanishes(curvature):
    dom = HDDomain.ball(ModelSpace(3, curvature), 0.7, polar=16)
    assert abs(energy_p_direct(dom, 0.0)) < 1.0e-15
    assert abs(energy_p_direct(dom, -1.0)) < 1.0e-15


def test_prolate_ellipsoid_energy_positive():
    dom = HDDomain.ellipsoid((1.5, 1.0, 1.0), polar=64, azimuth=128)
    val = energy_p_direct(dom, 0.0)
    assert val > 0.0
    # frozen from a finer grid (polar 96 / azimuth 192)
    assert abs(val - 18.93858) < 1.0e-4 * 18.93858


def test_flat_two_dimensional_reduction():
    # in the plane the weighted energy at exponent 0 reduces to the
    # perimeter-area deficit of the convex cross-section
    a, b = 2.0, 1.0
    length = 4.0 * a * ellipe(1.0 - (b / a) ** 2)
    deficit = length ** 2 - 4.0 * math.pi * (math.pi * a * b)
    dom = HDDomain.ellipsoid((a, b), azimuth=256)
    assert abs(energy_p_direct(dom, 0.0) - deficit) < 1.0e-12 * deficit


def test_singular_boundary_sum_flat_ball():
    # double boundary integral of 1/r over the unit sphere is 16 pi^2
    dom = HDDomain.ball(ModelSpace(3, 0), 1.0, polar=32)
    out = energy_p_identity(dom, -1.0, seed=1)
    target = 16.0 * math.pi ** 2
    assert abs(out["details"]["boundary_term"] - target) < 1.0e-3 * target
    assert out["residual"] < 1.0e-3


def test_identity_critical_exponent_hyperbolic_ball():
    dom = HDDomain.ball(ModelSpace(3, -1), 0.8, polar=24)
    out = energy_p_identity(dom, -1.0, interior_samples=100_000, seed=1)
    assert out["residual"] < 2.0e-3


def test_identity_above_critical_flat_ball():
    dom = HDDomain.ball(ModelSpace(3, 0), 1.0, polar=32)
    out = energy_p_identity(dom, 0.0, interior_samples=100_000, seed=1)
    assert out["residual"] < 1.0e-2


def test_identity_spherical_ball():
    dom = HDDomain.ball(ModelSpace(3, 1), 0.4, polar=24)
    out = energy_p_identity(dom, 0.0, interior_samples=100_000, seed=1)
    assert out["residual"] < 1.0e-2


def test_interior_sampler_moments():
    # uniform on the flat unit 3-ball: E[r^2] = 3/5
    dom = HDDomain.ball(ModelSpace(3, 0), 1.0, polar=8)
    pts = dom.sample_interior(200_000, key=np.array([7, 0], dtype=np.uint64))
    r2 = (pts ** 2).sum(axis=1)
    sigma = 3.0 * r2.std() / math.sqrt(len(r2))
    assert abs(r2.mean() - 0.6) < sigma
    assert r2.max() <= 1.0 + 1.0e-12


def test_interior_sampler_deterministic():
    dom = HDDomain.ball(ModelSpace(3, 0), 1.0, polar=8)
    key = np.array([3, 5], dtype=np.uint64)
    a = dom.sample_interior(1000, key=key)
    b = dom.sample_interior(1000, key=key)
    assert np.array_equal(a, b)
    c = dom.sample_interior(1000, key=np.array([3, 6], dtype=np.uint64))
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("curvature", [0, 1, -1])
def test_divergence_probes_match_closed_forms(curvature, rng):
    model = ModelSpace(3, curvature)
    frame = model.tangent_frame(model.base_point)
    checked = 0
    while checked < 20:
        pts, _, _ = _scatter_points(model, 2, rng, r_lo=0.3, r_hi=1.0)
        x, y = pts
        if float(model.distance(x[None], y[None])[0]) < 0.2:
            continue
        v = rng.standard_normal(3) @ model.tangent_frame(y)
        fd, exact = divergence_reflection_fd(model, x, y, v)
        assert abs(fd - exact) < 1.0e-4
        fd, exact = divergence_radial_fd(model, x, y, 0.5)
        assert abs(fd - exact) < 1.0e-4
        checked += 1


def test_hypothesis_guards():
    dom = HDDomain.ball(ModelSpace(3, 0), 1.0, polar=8)
    with pytest.raises(HypothesisError):
        energy_p_direct(dom, -1.5)  # below 2 - n
    with pytest.raises(HypothesisError):
        HDDomain.ball(ModelSpace(3, 1), math.pi / 2.0)
    with pytest.raises(DomainShapeError):
        HDDomain.ball(ModelSpace(3, 0), -1.0)
    with pytest.raises(DomainShapeError):
        HDDomain.ellipsoid((1.0, 1.0, 1.0, 1.0))
    with pytest.raises(HypothesisError):
        divergence_radial_fd(ModelSpace(3, 0), np.zeros(3), np.ones(3), -1.0)
