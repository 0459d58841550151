"""Sharp first-order Sobolev bound on surfaces, checked by quadrature.

The chain has three rungs: the squared L1 norm of the gradient, the double
integral of the reflected-gradient inner product (the crossterm), and
4 pi ||f||_2^2 minus sup K ||f||_1^2.  Cauchy-Schwarz gives rung one at
least rung two, and the reflection divergence identity gives rung two at
least rung three, with equality in the plane.  The crossterm has two
evaluation routes that share no arithmetic: a flat closed form for the
plane and a transport route through the geodesic machinery for anything.

Built-in test functions are radial cones, radially truncated Gaussians,
and tensor-product bumps.  Profiles with gradient kinks are mollified by
an honest 2D convolution with a C2 kernel of small radius before any
differentiation, so every function handed downstream is C2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from ._parallel import map_chunks
from .errors import ConfigError, HypothesisError
from .geodesics import connect_batch, reflect_batch
from .metrics import ConstantCurvature, Metric

__all__ = [
    "TestFunction",
    "make_cone",
    "make_gaussian",
    "make_tensor_bump",
    "function_norms",
    "sobolev_sides",
    "crossterm_double_integral",
    "chain_check",
]

MOLLIFY_RADIUS = 1.0e-2


@dataclass
class TestFunction:
    """A compactly supported C2 function on the chart.

    ``value`` maps (B, 2) chart points to (B,) values, ``grad`` to (B, 2)
    chart gradients.  ``radial_kinks`` lists radii about the center where
    the profile changes analytic form; quadrature splits there.
    """

    name: str
    value: Callable
    grad: Callable
    support_radius: float
    center: np.ndarray
    radial_kinks: tuple = ()
    meta: dict = field(default_factory=dict)

    def scaled(self, factor: float) -> "TestFunction":
        """The same function times a constant."""
        fac = float(factor)
        return TestFunction(
            name=f"{fac:g}*{self.name}",
            value=lambda pts, _v=self.value: fac * _v(pts),
            grad=lambda pts, _g=self.grad: fac * _g(pts),
            support_radius=self.support_radius,
            center=self.center,
            radial_kinks=self.radial_kinks,
            meta=dict(self.meta),
        )


def _mollify_profile(profile, r_top: float, eps: float):
    """2D convolution of a radial profile with the C2 kernel
    c (1 - (s/eps)^2)^3 supported on s < eps; returns a spline of the
    smoothed profile on [0, r_top + eps].

    The convolution of a radial function is radial, so it reduces to a
    double quadrature over the kernel disk for each output radius.
    """
    ks, kw = np.polynomial.legendre.leggauss(24)
    s = 0.5 * eps * (ks + 1.0)
    sw = 0.5 * eps * kw
    kern = (1.0 - (s / eps) ** 2) ** 3
    n_ang = 64
    ang = 2.0 * math.pi * (np.arange(n_ang) + 0.5) / n_ang
    mass = float((kern * s * sw).sum() * 2.0 * math.pi)

    t = np.linspace(0.0, r_top + eps, 4001)
    # |t e1 - z| over the kernel disk, for every output radius at once
    tt = t[:, None, None]
    ss = s[None, :, None]
    ca = np.cos(ang)[None, None, :]
    rr = np.sqrt(np.maximum(tt * tt + ss * ss - 2.0 * tt * ss * ca, 0.0))
    vals = profile(rr)
    w = (kern * s * sw)[None, :, None] / mass
    h = (vals * w).sum(axis=(1, 2)) * (2.0 * math.pi / n_ang)
    h[-1] = 0.0
    return CubicSpline(t, h, bc_type=((1, 0.0), (1, 0.0)))


def _radial_fn(name, spline, r_support, center, kinks, meta):
    c = np.asarray(center, dtype=float)
    top = float(spline.x[-1])
    dspl = spline.derivative()

    def value(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        rho = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
        out = np.where(rho < top, spline(np.minimum(rho, top)), 0.0)
        return out

    def grad(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        d = pts - c
        rho = np.hypot(d[:, 0], d[:, 1])
        slope = np.where(rho < top, dspl(np.minimum(rho, top)), 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            u = d / rho[:, None]
        u = np.where(rho[:, None] > 0.0, u, 0.0)
        return slope[:, None] * u

    return TestFunction(name=name, value=value, grad=grad,
                        support_radius=r_support, center=c,
                        radial_kinks=tuple(kinks), meta=meta)


def make_cone(radius: float = 1.0, center=(0.0, 0.0), *,
              mollify: float = MOLLIFY_RADIUS) -> TestFunction:
    """The tent profile max(0, 1 - rho / radius), smoothed at apex and rim."""
    R = float(radius)
    if R <= 0.0:
        raise ConfigError("cone radius must be positive")
    eps = float(mollify)
    spl = _mollify_profile(lambda rr: np.maximum(0.0, 1.0 - rr / R), R, eps)
    kinks = (eps, R - eps, R + eps)
    return _radial_fn(f"cone(r={R:g})", spl, R + eps, center, kinks,
                      {"family": "cone", "radius": R, "mollify": eps})


def make_gaussian(sigma: float = 0.5, radius: float = 1.5,
                  center=(0.0, 0.0), *,
                  mollify: float = MOLLIFY_RADIUS) -> TestFunction:
    """exp(-rho^2 / 2 sigma^2) minus its value at the truncation radius,
    clamped at zero outside, then smoothed across the rim."""
    sg = float(sigma)
    R = float(radius)
    if sg <= 0.0 or R <= 0.0:
        raise ConfigError("gaussian needs positive sigma and radius")
    eps = float(mollify)
    off = math.exp(-R * R / (2.0 * sg * sg))

    def prof(rr):
        return np.maximum(0.0, np.exp(-rr * rr / (2.0 * sg * sg)) - off)

    spl = _mollify_profile(prof, R, eps)
    return _radial_fn(f"gaussian(sigma={sg:g},r={R:g})", spl, R + eps, center,
                      (R - eps, R + eps),
                      {"family": "gaussian", "sigma": sg, "radius": R,
                       "mollify": eps})


def make_tensor_bump(a: float = 1.0, b: float = 1.0,
                     center=(0.0, 0.0)) -> TestFunction:
    """Separable bump (1-(x/a)^2)^3 (1-(y/b)^2)^3 on the open box; already C2."""
    ax, bx = float(a), float(b)
    if ax <= 0.0 or bx <= 0.0:
        raise ConfigError("tensor bump needs positive half-widths")
    c = np.asarray(center, dtype=float)

    def one(u):
        return np.maximum(0.0, 1.0 - u * u) ** 3

    def done(u):
        return -6.0 * u * np.maximum(0.0, 1.0 - u * u) ** 2

    def value(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        return one((pts[:, 0] - c[0]) / ax) * one((pts[:, 1] - c[1]) / bx)

    def grad(pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        u = (pts[:, 0] - c[0]) / ax
        v = (pts[:, 1] - c[1]) / bx
        return np.stack([done(u) * one(v) / ax, one(u) * done(v) / bx],
                        axis=-1)

    return TestFunction(name=f"tensor({ax:g},{bx:g})", value=value, grad=grad,
                        support_radius=math.hypot(ax, bx), center=c,
                        meta={"family": "tensor", "a": ax, "b": bx})


# ---------------------------------------------------------------------------
# quadrature over the support
# ---------------------------------------------------------------------------

def _support_grid(metric: Metric, f: TestFunction, n_nodes: int):
    """Polar quadrature about the support center, radial rule split at the
    profile kinks; returns (points, metric area weights)."""
    breaks = [0.0]
    for k in sorted(set(f.radial_kinks)):
        if 0.0 < k < f.support_radius:
            breaks.append(float(k))
    breaks.append(f.support_radius)
    n_ang = max(16, int(round(math.sqrt(n_nodes / 2.0))))
    per_seg = max(8, int(round(n_nodes / (n_ang * (len(breaks) - 1)))))
    gl_x, gl_w = np.polynomial.legendre.leggauss(per_seg)
    rad = []
    radw = []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        rad.append(0.5 * (hi - lo) * (gl_x + 1.0) + lo)
        radw.append(0.5 * (hi - lo) * gl_w)
    rad = np.concatenate(rad)
    radw = np.concatenate(radw)
    ang = 2.0 * math.pi * (np.arange(n_ang) + 0.5) / n_ang
    u = np.stack([np.cos(ang), np.sin(ang)], axis=-1)
    pts = f.center[None, None, :] + rad[None, :, None] * u[:, None, :]
    flat = pts.reshape(-1, 2)
    lam2 = metric.conformal_factor(flat) ** 2
    w = (np.broadcast_to(rad * radw, (n_ang, rad.size)).reshape(-1)
         * lam2 * (2.0 * math.pi / n_ang))
    return flat, w


def function_norms(metric: Metric, f: TestFunction,
                   n_nodes: int = 2048) -> dict:
    """Metric norms ||f||_1, ||f||_2^2, ||grad f||_1 over the support."""
    pts, w = _support_grid(metric, f, n_nodes)
    vals = f.value(pts)
    g = f.grad(pts)
    lam = metric.conformal_factor(pts)
    grad_norm = np.hypot(g[:, 0], g[:, 1]) / lam
    return {
        "l1": float(w @ np.abs(vals)),
        "l2_sq": float(w @ vals ** 2),
        "grad_l1": float(w @ grad_norm),
    }


def _support_diameter(metric: Metric, f: TestFunction) -> float:
    """Geodesic diameter of the support disk, probed on rim pairs and the
    two diameters through the center."""
    ang = 2.0 * math.pi * np.arange(16) / 16
    rim = f.center[None, :] + f.support_radius * np.stack(
        [np.cos(ang), np.sin(ang)], axis=-1)
    X = rim[:8]
    Y = rim[8:]
    conn = connect_batch(metric, X, Y)
    return float(conn["r"].max())


def sobolev_sides(metric: Metric, f: TestFunction, *,
                  n_nodes: int = 2048) -> dict:
    """Both sides of 4 pi ||f||_2^2 <= ||grad f||_1^2 + sup K ||f||_1^2.

    sup K is sampled on the support quadrature grid.  For positive
    curvature the comparison argument needs the support to fit inside the
    model quarter sphere; the diameter hypothesis is enforced.
    """
    pts, _ = _support_grid(metric, f, n_nodes)
    k_sup = float(metric.gauss_curvature(pts).max())
    if k_sup > 0.0:
        limit = 0.5 * math.pi / math.sqrt(k_sup)
        diam = _support_diameter(metric, f)
        if diam > limit:
            raise HypothesisError(
                f"support diameter {diam:.4f} exceeds the comparison limit "
                f"{limit:.4f} for curvature bound {k_sup:.4f}"
            )
    norms = function_norms(metric, f, n_nodes)
    lhs = 4.0 * math.pi * norms["l2_sq"]
    rhs = norms["grad_l1"] ** 2 + max(k_sup, 0.0) * norms["l1"] ** 2
    return {
        "lhs": lhs,
        "rhs": rhs,
        "margin": rhs - lhs,
        "sup_k": k_sup,
        "norms": norms,
    }


# ---------------------------------------------------------------------------
# the crossterm
# ---------------------------------------------------------------------------

def _crossterm_flat(pts, w, G, chunk):
    """Closed-form pair sum of <g_x, R g_y> in the plane.

    The reflection along the chord flips the chord component, so the
    integrand is <g_x, g_y> - 2 <g_x, u><g_y, u> with u the chord direction.
    The diagonal keeps |g|^2 (the reflection at zero distance is the
    identity).
    """
    n = pts.shape[0]
    ii, jj = np.triu_indices(n, k=1)

    def work(lo, hi):
        sl = slice(lo, hi)
        d = pts[ii[sl]] - pts[jj[sl]]
        r2 = d[:, 0] ** 2 + d[:, 1] ** 2
        gi = G[ii[sl]]
        gj = G[jj[sl]]
        plain = gi[:, 0] * gj[:, 0] + gi[:, 1] * gj[:, 1]
        proj = ((gi[:, 0] * d[:, 0] + gi[:, 1] * d[:, 1])
                * (gj[:, 0] * d[:, 0] + gj[:, 1] * d[:, 1]))
        with np.errstate(invalid="ignore", divide="ignore"):
            term = plain - 2.0 * proj / r2
        term = np.where(r2 > 0.0, term, plain)
        return float((2.0 * w[ii[sl]] * w[jj[sl]] * term).sum())

    off = sum(map_chunks(work, ii.size, chunk))
    diag = float((w * w * (G[:, 0] ** 2 + G[:, 1] ** 2)).sum())
    return off + diag


def _crossterm_transport(metric, pts, w, G, rtol, chunk):
    """Transport route: reflect the gradient along each connecting geodesic
    and take the metric inner product at the far end."""
    n = pts.shape[0]
    ii, jj = np.triu_indices(n, k=1)
    lam2 = metric.conformal_factor(pts) ** 2
    # chart gradients of f have euclidean components; the metric gradient
    # is grad / lam^2, and metric inner products carry lam^2 back
    GM = G / lam2[:, None]

    def work(lo, hi):
        sl = slice(lo, hi)
        X = pts[jj[sl]]
        Y = pts[ii[sl]]
        conn = connect_batch(metric, X, Y, rtol=rtol)
        refl = reflect_batch(metric, X, conn, GM[jj[sl]], rtol=rtol)
        term = metric.inner(Y, GM[ii[sl]], refl)
        return float((2.0 * w[ii[sl]] * w[jj[sl]] * term).sum())

    off = sum(map_chunks(work, ii.size, chunk))
    diag = float((w * w * metric.inner(pts, GM, GM)).sum())
    return off + diag


def crossterm_double_integral(metric: Metric, f: TestFunction, *,
                              method: str = "auto", n_nodes: int = 1024,
                              rtol: float = 1.0e-9,
                              chunk: int = 200000) -> float:
    """Double integral of <grad_x f, R grad_y f> over the support.

    ``method`` is "flat" (planar closed form), "transport" (geodesic
    machinery, any metric), or "auto" (flat when the metric is the plane).
    """
    flat_ok = isinstance(metric, ConstantCurvature) and metric.K == 0.0
    if method == "auto":
        method = "flat" if flat_ok else "transport"
    if method == "flat":
        if not flat_ok:
            raise ConfigError("flat crossterm route needs the plane metric")
        pts, w = _support_grid(metric, f, n_nodes)
        return _crossterm_flat(pts, w, f.grad(pts), chunk)
    if method != "transport":
        raise ConfigError(f"unknown crossterm method '{method}'")
    pts, w = _support_grid(metric, f, n_nodes)
    ch = chunk if isinstance(metric, ConstantCurvature) else 4096
    return _crossterm_transport(metric, pts, w, f.grad(pts), rtol, ch)


def chain_check(metric: Metric, f: TestFunction, *, n_nodes: int = 2048,
                crossterm_nodes: int = 1024, rtol: float = 1.0e-9) -> dict:
    """All three rungs of the Sobolev chain in descending order.

    grad_sq >= crossterm >= lower, where lower = 4 pi ||f||_2^2 -
    sup K ||f||_1^2.  In the plane the last two rungs coincide.
    """
    sides = sobolev_sides(metric, f, n_nodes=n_nodes)
    cross = crossterm_double_integral(metric, f, n_nodes=crossterm_nodes,
                                      rtol=rtol)
    norms = sides["norms"]
    grad_sq = norms["grad_l1"] ** 2
    lower = sides["lhs"] - max(sides["sup_k"], 0.0) * norms["l1"] ** 2
    return {
        "grad_sq": grad_sq,
        "crossterm": cross,
        "lower": lower,
        "sides": sides,
        "ordered": bool(grad_sq >= cross >= lower),
    }
