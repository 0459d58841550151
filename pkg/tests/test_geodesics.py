import math

import numpy as np
import pytest

from scatterlab import (
    ConformalChart,
    ConjugatePointError,
    ConstantCurvature,
    Tangent,
    connect,
    parallel_transport,
    reflect_transport,
    shoot,
)
from scatterlab.geodesics import connect_batch


def test_plane_shoot_is_straight(plane):
    geo = shoot(plane, (0.0, 0.0), (1.0, 0.0), 1.0)
    assert np.allclose(geo.end, [1.0, 0.0], atol=1e-12)
    assert geo.length == pytest.approx(1.0)


def test_shoot_reversibility(bump):
    geo = shoot(bump, (0.3, -0.2), (0.7, 0.4), 1.1)
    back = shoot(bump, geo.end, -geo.end_tangent, geo.length)
    assert np.allclose(back.end, [0.3, -0.2], atol=1e-8)


def test_unit_speed_samples(bump):
    geo = shoot(bump, (0.1, 0.0), (0.2, 1.0), 1.3)
    lam = bump.conformal_factor(geo.points)
    speed = lam * np.hypot(geo.tangents[:, 0], geo.tangents[:, 1])
    assert np.abs(speed - 1.0).max() < 1e-8


def test_connect_inverts_shoot(bump, rng):
    for _ in range(5):
        x = rng.uniform(-0.5, 0.5, 2)
        d = rng.normal(size=2)
        ell = rng.uniform(0.3, 1.2)
        geo = shoot(bump, x, d, ell)
        conn = connect(bump, x, geo.end)
        assert conn.length == pytest.approx(ell, abs=1e-7)
        assert np.allclose(conn.start_tangent, geo.start_tangent, atol=1e-6)


def test_sphere_closed_form_matches_generic_chart(sphere, rng):
    # same chart exponent, forced through the generic ODE machinery
    generic = ConformalChart(
        lambda p: np.log(2.0 / (1.0 + (p ** 2).sum(axis=-1))))
    for _ in range(5):
        x = rng.uniform(-0.4, 0.4, 2)
        y = rng.uniform(-0.4, 0.4, 2)
        a = connect(sphere, x, y)
        b = connect(generic, x, y)
        assert a.length == pytest.approx(b.length, abs=1e-7)
        assert np.allclose(a.start_tangent, b.start_tangent, atol=1e-6)


def test_hyperbolic_distance_closed_form(hyperbolic):
    # distance from the origin in the unit-disk chart is 2 artanh(chart radius)
    p = np.array([0.4, 0.0])
    geo = connect(hyperbolic, (0.0, 0.0), p)
    assert geo.length == pytest.approx(2.0 * math.atanh(0.4), abs=1e-10)


def test_transport_preserves_inner_products(bump, rng):
    x = np.array([0.2, -0.1])
    y = np.array([-0.4, 0.6])
    geo = connect(bump, x, y)
    v = rng.normal(size=2)
    w = rng.normal(size=2)
    tv = parallel_transport(bump, geo, Tangent(x, v))
    tw = parallel_transport(bump, geo, Tangent(x, w))
    before = bump.inner(x[None], v[None], w[None])[0]
    after = bump.inner(y[None], tv.vec[None], tw.vec[None])[0]
    assert after == pytest.approx(before, rel=1e-8)


def test_plane_reflection_flips_chord_component(plane):
    geo = connect(plane, (0.0, 0.0), (1.0, 0.0))
    along = reflect_transport(plane, geo, Tangent(np.zeros(2), np.array([1.0, 0.0])))
    assert np.allclose(along.vec, [-1.0, 0.0], atol=1e-12)
    perp = reflect_transport(plane, geo, Tangent(np.zeros(2), np.array([0.0, 1.0])))
    assert np.allclose(perp.vec, [0.0, 1.0], atol=1e-12)


def test_reflection_is_isometry_and_radial(bump, rng):
    x = np.array([0.25, 0.3])
    y = np.array([-0.5, -0.1])
    geo = connect(bump, x, y)
    v = rng.normal(size=2)
    rv = reflect_transport(bump, geo, Tangent(x, v))
    assert bump.norm(y[None], rv.vec[None])[0] == pytest.approx(
        bump.norm(x[None], v[None])[0], rel=1e-8)
    # chord component flips: <R v, t1> = -<v, t0>
    lhs = bump.inner(y[None], rv.vec[None], geo.end_tangent[None])[0]
    rhs = bump.inner(x[None], v[None], geo.start_tangent[None])[0]
    assert lhs == pytest.approx(-rhs, abs=1e-8)


def test_round_sphere_normals_reflect_onto_each_other(sphere):
    # two points of a geodesic circle about the origin: the outward normal
    # at one reflects exactly onto the outward normal at the other
    r0 = 0.7
    rho = math.tan(r0 / 2.0)  # chart radius of the geodesic circle
    ang = 1.1
    x = rho * np.array([1.0, 0.0])
    y = rho * np.array([math.cos(ang), math.sin(ang)])
    geo = connect(sphere, x, y)
    nx = sphere.unit(x[None], x[None])[0]
    ny = sphere.unit(y[None], y[None])[0]
    out = reflect_transport(sphere, geo, Tangent(x, nx))
    assert np.allclose(out.vec, ny, atol=1e-10)


def test_conjugate_point_refused(sphere):
    # distance 0.9999 pi: inside the antipodal refusal margin
    big = math.tan(0.9999 * math.pi / 4.0)
    with pytest.raises(ConjugatePointError):
        connect(sphere, (-big, 0.0), (big, 1e-9))
    # well short of the cut locus the same pair geometry is fine
    ok = math.tan(0.9 * math.pi / 4.0)
    geo = connect(sphere, (-ok, 0.0), (ok, 1e-9))
    assert geo.length == pytest.approx(0.9 * math.pi, abs=1e-9)


def test_connect_batch_consistent_with_scalar(bump, rng):
    X = rng.uniform(-0.4, 0.4, size=(6, 2))
    Y = rng.uniform(-0.4, 0.4, size=(6, 2))
    out = connect_batch(bump, X, Y)
    for i in range(6):
        geo = connect(bump, X[i], Y[i])
        assert out["r"][i] == pytest.approx(geo.length, abs=1e-8)
        assert np.allclose(out["t0"][i], geo.start_tangent, atol=1e-7)
        assert np.allclose(out["t1"][i], geo.end_tangent, atol=1e-7)
