import math

import numpy as np
import pytest
from scipy.special import ellipe

from scatterlab import (
    BoundaryCurve,
    HypothesisError,
    bol_check,
    boundary_residual_grid,
    circle_points,
    deficit_identity_rhs,
    ellipse_points,
    geodesic_circle,
    mixed_identity_rhs,
    scattering_energy_direct,
)


def test_disk_energy_vanishes(unit_disk):
    rep = scattering_energy_direct(unit_disk)
    assert abs(rep.value) < 1e-10
    assert rep.value >= -1e-12


def test_energy_grid_symmetric_nonnegative(ellipse21):
    M = boundary_residual_grid(ellipse21)
    assert np.abs(M - M.T).max() < 1e-9
    assert M.min() >= 0.0
    assert np.allclose(np.diag(M), 0.0, atol=1e-12)


def test_planar_exactness_on_ellipse(ellipse21):
    # in the plane the interior correction vanishes and the energy is the
    # isoperimetric deficit itself
    rep = scattering_energy_direct(ellipse21)
    L = 4.0 * 2.0 * ellipe(0.75)
    A = 2.0 * math.pi
    want = L * L - 4.0 * math.pi * A
    assert rep.value == pytest.approx(want, rel=1e-6)
    assert want == pytest.approx(14.9091937, abs=2e-6)


def test_planar_interior_route_is_exact(ellipse21):
    out = deficit_identity_rhs(ellipse21)
    # the interior integrand is identically zero in the plane
    assert abs(out["deficit_term"]) < 1e-10
    rep = scattering_energy_direct(ellipse21)
    assert out["value"] == pytest.approx(rep.value, rel=1e-9)


def test_cap_energy_vanishes(sphere):
    cap = BoundaryCurve(sphere, geodesic_circle(sphere, math.pi / 5.0),
                        n_nodes=128, dense=2048)
    rep = scattering_energy_direct(cap)
    assert abs(rep.value) < 1e-8
    # closed-form deficit with the curvature term included is zero
    L, A = cap.length, cap.area()
    assert L * L - 4.0 * math.pi * A + A * A == pytest.approx(0.0, abs=1e-6)


def test_hyperbolic_disk_energy_vanishes(hyperbolic):
    disk = BoundaryCurve(hyperbolic, geodesic_circle(hyperbolic, 1.0),
                         n_nodes=128, dense=2048)
    rep = scattering_energy_direct(disk)
    assert abs(rep.value) < 1e-8
    L, A = disk.length, disk.area()
    assert L * L - 4.0 * math.pi * A - A * A == pytest.approx(0.0, abs=1e-6)


def test_identity_routes_agree_on_bump(bump):
    curve = BoundaryCurve(bump, circle_points(1.0), n_nodes=128, dense=2048)
    direct = scattering_energy_direct(curve).value
    interior = deficit_identity_rhs(curve)["value"]
    mixed = mixed_identity_rhs(curve, n_theta=64)["value"]
    assert direct > 0.0
    scale = max(abs(direct), 1e-3)
    assert abs(direct - interior) <= 0.01 * scale
    assert abs(direct - mixed) <= 0.01 * scale


def test_curved_interior_term_has_curvature_sign(sphere, hyperbolic):
    # for constant curvature the interior integrand is exactly K / sqrt_g**0
    cap = BoundaryCurve(sphere, geodesic_circle(sphere, 0.5), n_nodes=96,
                        dense=1536)
    out = deficit_identity_rhs(cap)
    assert out["deficit_term"] > 0.0
    dsk = BoundaryCurve(hyperbolic, geodesic_circle(hyperbolic, 0.5),
                        n_nodes=96, dense=1536)
    out = deficit_identity_rhs(dsk)
    assert out["deficit_term"] < 0.0


def test_bol_equality_in_constant_curvature(ellipse21, sphere):
    out = bol_check(ellipse21)
    assert out["k_sup"] == 0.0
    assert abs(out["margin"]) < 1e-8
    cap = BoundaryCurve(sphere, geodesic_circle(sphere, math.pi / 5.0),
                        n_nodes=128, dense=2048)
    out = bol_check(cap)
    assert out["k_sup"] == 1.0
    assert abs(out["margin"]) < 1e-6


def test_bol_strict_on_bump(bump):
    curve = BoundaryCurve(bump, circle_points(1.0), n_nodes=128, dense=2048)
    out = bol_check(curve)
    assert out["margin"] > 0.0
    assert out["k_sup"] > 0.0


def test_bol_refuses_oversized_cap(sphere):
    cap = BoundaryCurve(sphere, geodesic_circle(sphere, 1.45), n_nodes=96,
                        dense=1536)
    with pytest.raises(HypothesisError):
        bol_check(cap)


def test_mixed_route_disk_closed_form(unit_disk):
    # each piece is known for the unit disk: L^2 = 4 pi^2, 2 pi A = 2 pi^2,
    # and the fan term equals 2 pi^2
    out = mixed_identity_rhs(unit_disk, n_theta=64)
    assert out["flux_term"] == pytest.approx(2.0 * math.pi ** 2, rel=1e-9)
    assert out["value"] == pytest.approx(0.0, abs=1e-8)


def test_energy_scale_invariance_breaks_with_shape(plane):
    # same area, different shape: rounder boundary has less energy
    fat = BoundaryCurve(plane, ellipse_points(1.2, 1.0 / 1.2), n_nodes=128,
                        dense=2048)
    thin = BoundaryCurve(plane, ellipse_points(1.6, 0.625), n_nodes=192,
                         dense=3072)
    assert scattering_energy_direct(fat).value < scattering_energy_direct(thin).value
