import math

import numpy as np
import pytest

from scatterlab import (
    connect,
    curvature_sandwich,
    jacobi_along,
    jacobi_batch,
    point_source_flux,
    reflection_divergence_check,
    reflection_divergence_weight,
    sn,
)
from scatterlab.geodesics import connect_batch


def test_constant_curvature_closed_forms(sphere, hyperbolic):
    for metric, K in ((sphere, 1.0), (hyperbolic, -1.0)):
        rho = 0.31
        geo = connect(metric, (-rho, 0.0), (rho, 0.0))
        jd = jacobi_along(metric, geo)
        r = geo.length
        assert jd.sqrt_g == pytest.approx(sn(K, r), rel=1e-10)
        want_lap = float(np.cos(r) / np.sin(r)) if K > 0 else float(
            np.cosh(r) / np.sinh(r))
        assert jd.lap_start == pytest.approx(want_lap, rel=1e-10)
        assert jd.lap_end == pytest.approx(want_lap, rel=1e-10)


def test_plane_density_is_distance(plane):
    geo = connect(plane, (0.0, 0.0), (0.8, 0.6))
    jd = jacobi_along(plane, geo)
    assert jd.sqrt_g == pytest.approx(1.0, rel=1e-12)  # per unit initial rate: sn_0(r)/r
    assert jd.lap_end == pytest.approx(1.0 / geo.length, rel=1e-12)


def test_density_symmetric_in_endpoints(bump, rng):
    X = rng.uniform(-0.5, 0.5, size=(8, 2))
    Y = rng.uniform(-0.5, 0.5, size=(8, 2))
    fwd = jacobi_batch(bump, X, Y, connect_batch(bump, X, Y))
    bwd = jacobi_batch(bump, Y, X, connect_batch(bump, Y, X))
    assert np.abs(fwd["sqrt_g"] - bwd["sqrt_g"]).max() < 1e-8
    assert np.abs(fwd["lap_end"] - bwd["lap_start"]).max() < 1e-8
    assert fwd["residual"].max() < 1e-8


def test_curvature_sandwich_on_bump(bump, rng):
    for _ in range(6):
        x = rng.uniform(-0.6, 0.6, 2)
        y = rng.uniform(-0.6, 0.6, 2)
        geo = connect(bump, x, y)
        jd = jacobi_along(bump, geo)
        lo, hi, val = curvature_sandwich(jd)["sqrt_g"]
        assert lo - 1e-10 <= val <= hi + 1e-10


def test_point_source_flux_limit(bump):
    # the flux through a shrinking circle tends to twice the full angle
    x = np.array([0.2, 0.1])
    vals = [point_source_flux(bump, x, eps) for eps in (0.2, 0.1, 0.05)]
    errs = [abs(v - 4.0 * math.pi) for v in vals]
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] < 5e-3
    # quadratic shrinkage in the circle radius
    assert errs[0] / errs[1] > 3.0


def test_point_source_flux_constant_curvature_exact(sphere):
    eps = 0.3
    want = 2.0 * math.pi * (1.0 + math.cos(eps))
    assert point_source_flux(sphere, (0.0, 0.0), eps) == pytest.approx(want, rel=1e-12)


def test_divergence_weight_combination(plane):
    geo = connect(plane, (0.0, 0.0), (1.5, 0.0))
    jd = jacobi_along(plane, geo)
    # in the plane: 1/r + 1/r at the far end
    assert reflection_divergence_weight(jd) == pytest.approx(2.0 / 1.5, rel=1e-12)


@pytest.mark.parametrize("metric_name", ["plane", "sphere", "hyperbolic", "bump"])
def test_reflection_divergence_fd(metric_name, request, rng):
    # the divergence of a reflected constant field matches the closed form
    metric = request.getfixturevalue(metric_name)
    lim = 0.55 if metric_name == "hyperbolic" else 0.7
    X = rng.uniform(-lim, lim, size=(20, 2))
    Y = rng.uniform(-lim, lim, size=(20, 2))
    keep = np.hypot(*(X - Y).T) > 0.15
    V = rng.normal(size=(20, 2))
    fd, exact = reflection_divergence_check(metric, X[keep], Y[keep], V[keep])
    assert np.abs(fd - exact).max() < 1e-4
