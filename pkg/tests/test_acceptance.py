"""End-to-end gates for the whole build, one printed verdict line per check.

Every gate states its tolerance inline.  Reference values come from closed
forms (elliptic integrals, constant-curvature circle formulas) or from
independent Monte Carlo oracles computed before the code path under test
is trusted.
"""

import math

import numpy as np
import pytest
from scipy.special import ellipe

from scatterlab import (
    BoundaryCurve,
    ConstantCurvature,
    bol_check,
    build_chords,
    chain_check,
    circle_points,
    crossterm_double_integral,
    deficit_identity_rhs,
    ellipse_points,
    energy_via_chords,
    geodesic_circle,
    make_cone,
    make_gaussian,
    mixed_identity_rhs,
    reflection_divergence_check,
    santalo_check,
    scattering_energy_direct,
    sobolev_sides,
    symmetry_diagnostics,
)
from scatterlab.config import bump_chart, parse, _revolution_metric
from scatterlab.highdim import (
    HDDomain,
    ModelSpace,
    divergence_radial_fd,
    divergence_reflection_fd,
    energy_p_identity,
    interior_radial_integral,
)
from scatterlab.report import convergence_study

TWO_PI_SQ = 2.0 * math.pi ** 2


def _finish(label, checks):
    ok = all(c for c, _ in checks)
    line = "; ".join(d for _, d in checks)
    print(f"{'PASS' if ok else 'FAIL'}  {label}: {line}")
    assert ok, f"{label}: {line}"


# -- shared geometry ----------------------------------------------------------

@pytest.fixture(scope="module")
def plane():
    return ConstantCurvature(0.0)


@pytest.fixture(scope="module")
def disk(plane):
    return BoundaryCurve(plane, circle_points(1.0), n_nodes=256, dense=4096)


@pytest.fixture(scope="module")
def ellipse(plane):
    return BoundaryCurve(plane, ellipse_points(2.0, 1.0), n_nodes=256, dense=4096)


@pytest.fixture(scope="module")
def cap():
    sphere = ConstantCurvature(1.0)
    return BoundaryCurve(sphere, geodesic_circle(sphere, math.pi / 5.0),
                         n_nodes=128, dense=2048)


@pytest.fixture(scope="module")
def disk_fan(disk):
    return build_chords(disk, n_theta=128)


@pytest.fixture(scope="module")
def ellipse_fan(ellipse):
    return build_chords(ellipse, n_theta=128)


@pytest.fixture(scope="module")
def cap_fan(cap):
    return build_chords(cap, n_theta=128)


# -- gates, in order ----------------------------------------------------------

def test_disk_energy_null(disk):
    energy = scattering_energy_direct(disk).value
    _finish("round disk energy vanishes",
            [(abs(energy) <= 1.0e-6, f"|E| = {abs(energy):.3e} <= 1e-6")])


def test_ellipse_energy_matches_deficit(ellipse):
    a, b = 2.0, 1.0
    length_oracle = 4.0 * a * ellipe(1.0 - (b / a) ** 2)
    energy = scattering_energy_direct(ellipse).value
    deficit = ellipse.length ** 2 - 4.0 * math.pi * ellipse.area()
    _finish("ellipse energy equals perimeter-area deficit", [
        (abs(length_oracle - 9.68845) < 1.0e-4,
         f"elliptic-integral length {length_oracle:.5f} = 9.68845"),
        (abs(ellipse.length - length_oracle) <= 1.0e-6 * length_oracle,
         f"curve length matches to {abs(ellipse.length - length_oracle):.2e}"),
        (abs(energy - deficit) <= 1.0e-3 * energy,
         f"|E - (L^2-4piA)|/E = {abs(energy - deficit) / energy:.2e} <= 1e-3"),
        (abs(energy - 14.909) <= 1.0e-3 * 14.909, f"E = {energy:.5f} = 14.909"),
    ])


def test_curved_disks_attain_equality(cap):
    checks = []
    theta0 = math.pi / 5.0
    L = 2.0 * math.pi * math.sin(theta0)
    A = 2.0 * math.pi * (1.0 - math.cos(theta0))
    closed = L * L - 4.0 * math.pi * A + A * A
    checks.append((abs(closed) <= 1.0e-6,
                   f"spherical cap closed form {closed:.2e} <= 1e-6"))
    e_cap = scattering_energy_direct(cap).value
    checks.append((abs(e_cap) <= 1.0e-4, f"cap |E| = {abs(e_cap):.2e} <= 1e-4"))

    hyper = ConstantCurvature(-1.0)
    L = 2.0 * math.pi * math.sinh(1.0)
    A = 2.0 * math.pi * (math.cosh(1.0) - 1.0)
    closed = L * L - 4.0 * math.pi * A - A * A
    checks.append((abs(closed) <= 1.0e-6,
                   f"hyperbolic disk closed form {closed:.2e} <= 1e-6"))
    hdisk = BoundaryCurve(hyper, geodesic_circle(hyper, 1.0),
                          n_nodes=128, dense=2048)
    e_h = scattering_energy_direct(hdisk).value
    checks.append((abs(e_h) <= 1.0e-4,
                   f"hyperbolic disk |E| = {abs(e_h):.2e} <= 1e-4"))
    _finish("curved round disks attain equality", checks)


def test_bump_identity_routes_consistent():
    bump = bump_chart(0.1, 1.0)
    circle = BoundaryCurve(bump, circle_points(1.0), n_nodes=192, dense=3072)
    direct = scattering_energy_direct(circle).value
    routes = (direct,
              deficit_identity_rhs(circle)["value"],
              mixed_identity_rhs(circle, n_theta=128)["value"])
    # symmetric domain: all routes sit near zero, so the spread is
    # measured against an order-one floor rather than the tiny maximum
    denom = max(max(abs(v) for v in routes), 1.0e-3)
    spread = (max(routes) - min(routes)) / denom
    margin = bol_check(circle, energy=direct)["margin"]
    _finish("variable-curvature energy routes agree", [
        (spread <= 1.0e-2, f"route spread {spread:.2e} <= 1e-2"),
        (margin > 0.0, f"comparison margin {margin:.3f} > 0"),
    ])


def test_chord_measure_totals(disk_fan, ellipse_fan, cap_fan):
    disk_out = santalo_check(disk_fan)
    _finish("chord measure recovers the invariant total", [
        (abs(disk_out["lhs"] - TWO_PI_SQ) <= 1.0e-4 * TWO_PI_SQ,
         f"disk chord total {disk_out['lhs']:.6f} = 2pi^2 within 1e-4"),
        (santalo_check(ellipse_fan)["residual"] <= 1.0e-3,
         f"ellipse residual {santalo_check(ellipse_fan)['residual']:.2e} <= 1e-3"),
        (santalo_check(cap_fan)["residual"] <= 1.0e-3,
         f"cap residual {santalo_check(cap_fan)['residual']:.2e} <= 1e-3"),
    ])


def test_chord_route_decomposition(disk_fan, ellipse_fan, cap_fan,
                                   disk, ellipse, cap):
    checks = []
    for name, fan, curve in (("disk", disk_fan, disk),
                             ("ellipse", ellipse_fan, ellipse),
                             ("cap", cap_fan, cap)):
        out = energy_via_chords(fan)
        direct = scattering_energy_direct(curve).value
        rel = abs(out["value"] - direct) / max(abs(direct), 1.0e-3)
        checks.append((rel <= 1.0e-2, f"{name} chord route off by {rel:.2e}"))
        checks.append((out["jacobi_term"] > 0.0,
                       f"{name} spreading term {out['jacobi_term']:.4f} > 0"))
        if name == "disk":
            deficit = out["length"] ** 2 - 2.0 * math.pi * out["area"]
            checks.append((abs(deficit - TWO_PI_SQ) <= 1.0e-4 * TWO_PI_SQ,
                           f"disk L^2-2piA = {deficit:.6f} = 2pi^2"))
            checks.append((abs(out["jacobi_term"] - TWO_PI_SQ) <= 1.0e-4 * TWO_PI_SQ,
                           f"disk spreading term = {out['jacobi_term']:.6f} = 2pi^2"))
    _finish("energy through the chord decomposition", checks)


def test_function_inequality_chain(plane):
    cone = make_cone()
    sides = sobolev_sides(plane, cone)
    cross = crossterm_double_integral(plane, cone, n_nodes=384)
    chain = chain_check(bump_chart(0.1, 1.0),
                        make_gaussian(sigma=0.4, radius=1.2),
                        crossterm_nodes=256)
    _finish("gradient-mass inequality chain", [
        (abs(sides["lhs"] - TWO_PI_SQ / 3.0) <= 1.0e-3 * TWO_PI_SQ / 3.0,
         f"cone lhs {sides['lhs']:.4f} = 2pi^2/3"),
        (abs(sides["rhs"] - math.pi ** 2) <= 1.0e-3 * math.pi ** 2,
         f"cone rhs {sides['rhs']:.4f} = pi^2"),
        (sides["margin"] > 0.0, f"margin {sides['margin']:.4f} > 0"),
        (abs(cross - sides["lhs"]) <= 1.0e-2 * sides["lhs"],
         f"pair-sum crossterm off by {abs(cross - sides['lhs']) / sides['lhs']:.2e}"),
        (chain["ordered"], "chain ordered on the curved metric"),
    ])


def test_shape_diagnostics_separate(disk, ellipse):
    checks = []
    d = symmetry_diagnostics(disk)
    worst = max(d.angle_residual, d.chord_dispersion, d.curvature_dispersion)
    checks.append((worst <= 1.0e-5, f"disk diagnostics {worst:.2e} <= 1e-5"))

    rev = _revolution_metric("sine")
    cap_rev = BoundaryCurve(rev, geodesic_circle(rev, math.pi / 5.0),
                            n_nodes=128, dense=2048)
    r = symmetry_diagnostics(cap_rev)
    worst = max(r.angle_residual, r.chord_dispersion, r.curvature_dispersion)
    checks.append((worst <= 1.0e-5,
                   f"revolution cap diagnostics {worst:.2e} <= 1e-5"))

    e = symmetry_diagnostics(ellipse)
    checks.append((e.angle_residual > 0.1,
                   f"ellipse angle residual {e.angle_residual:.3f} > 0.1"))
    checks.append((abs(e.curvature_dispersion - 1.75) <= 1.0e-2 * 1.75,
                   f"ellipse curvature dispersion {e.curvature_dispersion:.4f} = 1.75 within 1%"))
    _finish("diagnostics separate round from non-round", checks)


def test_weighted_energy_ball_identities():
    target = 16.0 * math.pi ** 2
    ball = HDDomain.ball(ModelSpace(3, 0), 1.0, polar=32)
    crit = energy_p_identity(ball, -1.0, interior_samples=100_000, seed=1)
    checks = [
        (abs(crit["details"]["boundary_term"] - target) <= 5.0e-3 * target,
         f"boundary pair sum {crit['details']['boundary_term']:.3f} = 16pi^2 within 0.5%"),
        (abs(crit["scale"] - target) <= 5.0e-3 * target,
         f"volume side {crit['scale']:.3f} = 16pi^2 within 0.5%"),
    ]

    # independent oracle for the interior pair integral, checked before the
    # identity that consumes the same Monte Carlo machinery
    oracle = 4.0 * math.pi ** 2
    (val,), _ = interior_radial_integral(ball, [lambda r: r ** -2.0],
                                         samples=1_000_000, seed=1)
    checks.append((abs(val - oracle) <= 1.0e-2 * oracle,
                   f"interior 1/r^2 mass {val:.4f} = 4pi^2 within 1%"))
    flat = energy_p_identity(ball, 0.0, interior_samples=1_000_000, seed=1)
    checks.append((flat["residual"] <= 1.0e-2,
                   f"flat ball p=0 residual {flat['residual']:.2e} <= 1e-2"))

    round_ball = HDDomain.ball(ModelSpace(3, 1), 0.4, polar=24)
    curved = energy_p_identity(round_ball, 0.0, interior_samples=100_000, seed=1)
    checks.append((curved["residual"] <= 1.0e-2,
                   f"spherical ball p=0 residual {curved['residual']:.2e} <= 1e-2"))
    _finish("weighted energy identities on balls", checks)


def test_divergence_closed_forms_random_probes(plane):
    rng = np.random.default_rng(11)
    checks = []
    surfaces = (("plane", plane, 0.7),
                ("sphere", ConstantCurvature(1.0), 0.7),
                ("hyperbolic", ConstantCurvature(-1.0), 0.55),
                ("bump", bump_chart(0.1, 1.0), 0.7))
    for name, metric, box in surfaces:
        X = rng.uniform(-box, box, (300, 2))
        Y = rng.uniform(-box, box, (300, 2))
        V = rng.standard_normal((300, 2))
        keep = np.linalg.norm(X - Y, axis=1) > 0.15
        X, Y, V = X[keep][:100], Y[keep][:100], V[keep][:100]
        assert len(X) == 100
        fd, exact = reflection_divergence_check(metric, X, Y, V)
        worst = float(np.max(np.abs(fd - exact)))
        checks.append((worst <= 1.0e-4,
                       f"{name}: 100 probes, worst {worst:.2e} <= 1e-4"))

    for curvature in (0, 1, -1):
        model = ModelSpace(3, curvature)
        frame = model.tangent_frame(model.base_point)
        worst = 0.0
        done = 0
        while done < 100:
            v = rng.standard_normal((2, 3))
            v /= np.linalg.norm(v, axis=1)[:, None]
            pts, _ = model.exp(np.broadcast_to(model.base_point, (2, model.ambient_dim)),
                               v @ frame, rng.uniform(0.3, 1.0, 2))
            x, y = pts
            if float(model.distance(x[None], y[None])[0]) < 0.2:
                continue
            w = rng.standard_normal(3) @ model.tangent_frame(y)
            fd, exact = divergence_reflection_fd(model, x, y, w)
            worst = max(worst, abs(fd - exact))
            fd, exact = divergence_radial_fd(model, x, y, 0.5)
            worst = max(worst, abs(fd - exact))
            done += 1
        checks.append((worst <= 1.0e-4,
                       f"model K={curvature}: 100 probes, worst {worst:.2e} <= 1e-4"))
    _finish("divergence closed forms at random configurations", checks)


def test_residual_convergence_order():
    cfg = parse("""
tasks = ["energy"]
[metric]
name = "plane"
[domain]
name = "ellipse"
a = 2.0
b = 1.0
""")
    study = convergence_study(cfg, (128, 256, 512))
    order = min(study["order_santalo"], study["order_identity"])
    _finish("residuals converge with order >= 2", [
        (study["monotone"], "residuals decrease monotonically over 128/256/512"),
        (order >= 2.0, f"estimated order {order:.2f} >= 2"),
    ])
