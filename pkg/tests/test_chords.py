import math

import numpy as np
import pytest

from scatterlab import (
    BoundaryCurve,
    boundary_map_checks,
    build_chords,
    chord_field,
    circle_points,
    energy_via_chords,
    geodesic_circle,
    santalo_check,
    scattering_energy_direct,
    symmetry_diagnostics,
)


def test_disk_chord_functions_closed_form(unit_disk):
    cf = chord_field(unit_disk, 0.7, n_theta=96)
    th = cf.theta
    assert np.abs(cf.rho - 2.0 * np.cos(th)).max() < 1e-10
    assert np.abs(cf.tau - 2.0).max() < 1e-8
    # reflective symmetry of the disk: the chord leaves at the angle it entered
    assert np.abs(cf.exit_angle - th).max() < 1e-10


def test_disk_exit_points_wrap_halfway(unit_disk):
    # the theta = 0 chord is the diameter: exit point half a perimeter away
    cf = chord_field(unit_disk, 0.0, n_theta=129)
    mid = np.argmin(np.abs(cf.theta))
    want = math.pi  # arclength L/2 on the unit circle
    assert cf.beta[mid] == pytest.approx(want, abs=1e-6)


def test_chord_field_matches_fan(ellipse21):
    fan = build_chords(ellipse21, 64)
    i = 17
    cf = chord_field(ellipse21, float(ellipse21.s[i]), n_theta=64)
    assert np.abs(cf.rho - fan.lengths[i]).max() < 1e-9
    # the fan stores unwrapped exit arclengths; compare mod the perimeter
    L = ellipse21.length
    d = np.abs(cf.beta - np.mod(fan.exit_s[i], L))
    assert np.minimum(d, L - d).max() < 1e-8


def test_santalo_disk_closed_form(unit_disk):
    out = santalo_check(unit_disk)
    assert out["rhs"] == pytest.approx(2.0 * math.pi ** 2, abs=1e-8)
    assert out["lhs"] == pytest.approx(2.0 * math.pi ** 2, rel=1e-6)


def test_santalo_ellipse_and_cap(ellipse21, sphere):
    assert santalo_check(ellipse21)["residual"] < 1e-3
    cap = BoundaryCurve(sphere, geodesic_circle(sphere, math.pi / 5.0),
                        n_nodes=128, dense=2048)
    assert santalo_check(cap)["residual"] < 1e-3


def test_energy_via_chords_disk(unit_disk):
    out = energy_via_chords(unit_disk)
    # deficit L^2 - 2 pi A and the fan term are both 2 pi^2 for the unit disk
    deficit = out["length"] ** 2 - 2.0 * math.pi * out["area"]
    assert deficit == pytest.approx(2.0 * math.pi ** 2, abs=1e-7)
    assert out["jacobi_term"] == pytest.approx(2.0 * math.pi ** 2, rel=1e-7)
    assert abs(out["value"]) < 1e-6


def test_energy_via_chords_matches_direct(ellipse21):
    direct = scattering_energy_direct(ellipse21).value
    out = energy_via_chords(ellipse21)
    assert out["value"] == pytest.approx(direct, rel=1e-2)
    assert out["jacobi_term"] > 0.0


def test_cap_fan_term_closed_form(sphere):
    # for a cap of radius t the fan term is 4 pi^2 cos(t) (1 - cos(t))
    for theta0 in (0.4, 0.8, 1.1):
        cap = BoundaryCurve(sphere, geodesic_circle(sphere, theta0),
                            n_nodes=96, dense=1536)
        out = energy_via_chords(cap)
        want = 4.0 * math.pi ** 2 * math.cos(theta0) * (1.0 - math.cos(theta0))
        assert out["jacobi_term"] == pytest.approx(want, rel=1e-6)


def test_fan_term_positive_up_to_hemisphere(sphere):
    # stays strictly positive while the cap is convex, shrinking toward the
    # hemisphere limit
    vals = []
    for theta0 in (1.2, 1.35, 1.5):
        cap = BoundaryCurve(sphere, geodesic_circle(sphere, theta0),
                            n_nodes=96, dense=1536)
        vals.append(energy_via_chords(cap)["jacobi_term"])
    assert all(v > 0.0 for v in vals)
    assert vals[0] > vals[1] > vals[2]


def test_boundary_map_differential_identity(ellipse21):
    out = boundary_map_checks(ellipse21)
    assert out["ibp_residual"] < 1e-8
    # the pointwise form needs the finer angular grid to differentiate
    fine = boundary_map_checks(build_chords(ellipse21, 256))
    assert fine["pointwise_max"] < 1e-6
    assert fine["pointwise_max"] < out["pointwise_max"]


def test_chord_field_on_curved_chart(bump):
    curve = BoundaryCurve(bump, circle_points(1.0), n_nodes=128, dense=2048)
    cf = chord_field(curve, 0.9, n_theta=48)
    assert cf.rho.min() > 0.0
    assert cf.tau.min() > 0.0  # exit point advances monotonically with theta
    assert np.all((0.0 <= cf.beta) & (cf.beta < curve.length))
    assert np.abs(cf.exit_angle).max() < math.pi / 2.0


def test_symmetry_diagnostics_disk(unit_disk):
    diag = symmetry_diagnostics(unit_disk)
    assert diag.angle_residual < 1e-6
    assert diag.chord_dispersion < 1e-6
    assert diag.curvature_dispersion < 1e-6


def test_symmetry_diagnostics_ellipse(ellipse21):
    diag = symmetry_diagnostics(ellipse21)
    assert diag.angle_residual > 0.1
    assert diag.curvature_dispersion == pytest.approx(1.75, rel=1e-2)


def test_symmetry_diagnostics_cap(sphere):
    cap = BoundaryCurve(sphere, geodesic_circle(sphere, math.pi / 5.0),
                        n_nodes=128, dense=2048)
    diag = symmetry_diagnostics(cap)
    assert max(diag.angle_residual, diag.chord_dispersion,
               diag.curvature_dispersion) < 1e-6
