"""Geodesics, parallel transport, and the two-endpoint reflection map.

The generic machinery integrates the conformal-chart geodesic equations with
a batched adaptive Dormand-Prince pair; whole families of geodesics (all
boundary pairs of a domain, all chords of a fan) advance together as one
array computation.  Two-point problems are solved by single shooting with a
damped Newton iteration on (initial angle, length), seeded by the chart
segment and backed by a discrete path-energy minimizer over a 32-point
polyline when the seed is poor.  ``ConstantCurvature`` metrics bypass the
integrator entirely through their ambient quadric models.

The reflection map sends a vector v at the start y of a geodesic to the
vector at the far end x obtained by flipping the component of v along the
geodesic direction at y and parallel-transporting the result to x.
Equivalently R v = (transport of v) + 2 <v, grad_y r> grad_x r, where r is
the two-point distance; the chart routines and the closed forms agree to
roundoff, which the test suite pins.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import _rk45
from .errors import ConjugatePointError, NonConvergenceError
from .metrics import ConstantCurvature, Metric

__all__ = [
    "Tangent",
    "GeodesicSolution",
    "shoot",
    "connect",
    "parallel_transport",
    "reflect_transport",
]

# chart pairs within this angle of the cut locus of a positively curved
# model are refused rather than returned with doubtful uniqueness
ANTIPODAL_MARGIN = 1.0e-3

_GL5_X = np.array([0.04691007703066800, 0.23076534494715845, 0.5,
                   0.76923465505284155, 0.95308992296933200])
_GL5_W = np.array([0.11846344252809454, 0.23931433524968324, 0.28444444444444444,
                   0.23931433524968324, 0.11846344252809454])


@dataclass(frozen=True)
class Tangent:
    """A chart tangent vector: components ``vec`` attached at ``point``."""

    point: np.ndarray
    vec: np.ndarray


@dataclass
class GeodesicSolution:
    """A unit-speed geodesic segment.

    ``ts`` are arclength values from 0 to ``length``; ``points`` and
    ``tangents`` are the chart positions and metric-unit chart velocities at
    those values.  ``tangents[0]`` points from start toward end.
    """

    metric: Metric
    length: float
    ts: np.ndarray
    points: np.ndarray
    tangents: np.ndarray

    @property
    def start(self):
        return self.points[0]

    @property
    def end(self):
        return self.points[-1]

    @property
    def start_tangent(self):
        return self.tangents[0]

    @property
    def end_tangent(self):
        return self.tangents[-1]


# ---------------------------------------------------------------------------
# conformal-chart right-hand sides
# ---------------------------------------------------------------------------

def _rhs_factory(metric: Metric, horizon, transport: bool = False, jacobi: bool = False):
    """Right-hand side for the joint geodesic system, time-scaled to [0, 1].

    State layout: p (2), v (2), then optionally a transported vector w (2),
    then optionally the radial Jacobi pair (a, a').  ``horizon`` holds the
    per-row true integration length.
    """
    horizon = np.asarray(horizon, dtype=float)

    def rhs(y):
        p = y[:, 0:2]
        v = y[:, 2:4]
        g = metric.grad_phi(p)
        gx, gy = g[:, 0], g[:, 1]
        vx, vy = v[:, 0], v[:, 1]
        q = vx * vx - vy * vy
        c = vx * vy
        out = np.empty_like(y)
        out[:, 0] = vx
        out[:, 1] = vy
        out[:, 2] = -gx * q - 2.0 * gy * c
        out[:, 3] = gy * q - 2.0 * gx * c
        col = 4
        if transport:
            wx, wy = y[:, 4], y[:, 5]
            out[:, 4] = -(gx * vx * wx + gy * (vx * wy + vy * wx) - gx * vy * wy)
            out[:, 5] = -(-gy * vx * wx + gx * (vx * wy + vy * wx) + gy * vy * wy)
            col = 6
        if jacobi:
            K = metric.gauss_curvature(p)
            out[:, col] = y[:, col + 1]
            out[:, col + 1] = -K * y[:, col]
        return out * horizon[:, None]

    return rhs


def _unit_from_angle(metric: Metric, pts, angles):
    """Metric-unit chart vector at ``pts`` pointing at chart angle ``angles``."""
    lam = metric.conformal_factor(pts)
    return np.stack([np.cos(angles), np.sin(angles)], axis=-1) / lam[..., None]


def _segment_length(metric: Metric, X, Y):
    """Metric length of the straight chart segment (a shooting seed)."""
    d = Y - X
    chord = np.hypot(d[..., 0], d[..., 1])
    acc = np.zeros_like(chord)
    for xi, wi in zip(_GL5_X, _GL5_W):
        acc += wi * metric.conformal_factor(X + xi * d)
    return acc * chord


# ---------------------------------------------------------------------------
# constant-curvature ambient closed forms
# ---------------------------------------------------------------------------

def _amb_inner(K: float, U, V):
    s = (U * V).sum(axis=-1)
    if K < 0.0:
        s -= 2.0 * U[..., 2] * V[..., 2]
    return s


def _cc_log_batch(metric: ConstantCurvature, X, Y):
    """Distances and endpoint tangents of the connecting geodesics.

    Returns (r, t0, t1): t0 is the metric-unit chart tangent at X toward Y,
    t1 the one at Y pointing away from X.  Raises ConjugatePointError when a
    positive-curvature pair sits within ANTIPODAL_MARGIN of the cut locus.
    """
    K = metric.K
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if K == 0.0:
        d = Y - X
        r = np.hypot(d[..., 0], d[..., 1])
        with np.errstate(invalid="ignore", divide="ignore"):
            u = d / r[..., None]
        u = np.where(r[..., None] > 0.0, u, 0.0)
        return r, u, u.copy()
    R = 1.0 / math.sqrt(abs(K))
    A = metric.to_ambient(X)
    B = metric.to_ambient(Y)
    if K > 0.0:
        cosr = np.clip(_amb_inner(K, A, B) / R ** 2, -1.0, 1.0)
        theta = np.arccos(cosr)
        if np.any(theta > math.pi - ANTIPODAL_MARGIN):
            raise ConjugatePointError(
                "endpoint pair within the antipodal margin of the cut locus"
            )
        sinr = np.sin(theta)
        with np.errstate(invalid="ignore", divide="ignore"):
            u_amb = (B - A * cosr[..., None]) / (R * sinr)[..., None]
        u_amb = np.where(sinr[..., None] > 0.0, u_amb, 0.0)
        end_amb = -(A / R) * sinr[..., None] + u_amb * cosr[..., None]
    else:
        coshr = np.clip(-_amb_inner(K, A, B) / R ** 2, 1.0, None)
        theta = np.arccosh(coshr)
        sinhr = np.sinh(theta)
        with np.errstate(invalid="ignore", divide="ignore"):
            u_amb = (B - A * coshr[..., None]) / (R * sinhr)[..., None]
        u_amb = np.where(sinhr[..., None] > 0.0, u_amb, 0.0)
        end_amb = (A / R) * sinhr[..., None] + u_amb * coshr[..., None]
    r = R * theta
    t0 = metric.pull_tangent(X, u_amb)
    t1 = metric.pull_tangent(Y, end_amb)
    return r, t0, t1


def _cc_exp_batch(metric: ConstantCurvature, X, V, t):
    """Endpoint and endpoint tangent of exp starting at X with metric-unit V."""
    K = metric.K
    X = np.asarray(X, dtype=float)
    V = np.asarray(V, dtype=float)
    t = np.asarray(t, dtype=float)
    if K == 0.0:
        return X + t[..., None] * V, V.copy()
    R = 1.0 / math.sqrt(abs(K))
    A = metric.to_ambient(X)
    U = metric.push_tangent(X, V)
    th = t / R
    if K > 0.0:
        P = A * np.cos(th)[..., None] + U * (R * np.sin(th))[..., None]
        Tg = -(A / R) * np.sin(th)[..., None] + U * np.cos(th)[..., None]
    else:
        P = A * np.cosh(th)[..., None] + U * (R * np.sinh(th))[..., None]
        Tg = (A / R) * np.sinh(th)[..., None] + U * np.cosh(th)[..., None]
    pts = metric.from_ambient(P)
    return pts, metric.pull_tangent(pts, Tg)


def _cc_transport_batch(metric: ConstantCurvature, X, t0, r, W):
    """Parallel transport of chart vectors W from X along the geodesic with
    initial metric-unit tangent t0 for length r."""
    K = metric.K
    if K == 0.0:
        return np.asarray(W, dtype=float).copy()
    R = 1.0 / math.sqrt(abs(K))
    A = metric.to_ambient(X)
    U = metric.push_tangent(X, t0)
    Wa = metric.push_tangent(X, W)
    th = np.asarray(r, dtype=float) / R
    par = _amb_inner(K, Wa, U)
    perp = Wa - par[..., None] * U
    if K > 0.0:
        P = A * np.cos(th)[..., None] + U * (R * np.sin(th))[..., None]
        end_dir = -(A / R) * np.sin(th)[..., None] + U * np.cos(th)[..., None]
    else:
        P = A * np.cosh(th)[..., None] + U * (R * np.sinh(th))[..., None]
        end_dir = (A / R) * np.sinh(th)[..., None] + U * np.cosh(th)[..., None]
    out_amb = perp + par[..., None] * end_dir
    pts = metric.from_ambient(P)
    return metric.pull_tangent(pts, out_amb)


# ---------------------------------------------------------------------------
# batched two-point solver
# ---------------------------------------------------------------------------

def _newton_refine(metric: Metric, X, Y, alpha, horizon, *, rtol, bvp_tol,
                   max_iter):
    """Damped Newton iteration on (initial angle, length) for all rows.

    Mutates ``alpha``/``horizon`` in place and returns the final metric-scaled
    endpoint errors.
    """
    lamY = metric.conformal_factor(Y)
    all_rows = np.arange(X.shape[0])

    def endpoints(al, hz, rows):
        v0 = _unit_from_angle(metric, X[rows], al)
        y0 = np.concatenate([X[rows], v0], axis=1)
        yT, _ = _rk45.integrate(_rhs_factory(metric, hz), y0, rtol=rtol, atol=1e-12)
        return yT[:, 0:2]

    G = endpoints(alpha, horizon, all_rows) - Y
    gn = np.hypot(G[:, 0], G[:, 1]) * lamY
    for _ in range(max_iter):
        act = gn > bvp_tol
        if not act.any():
            break
        rows = all_rows[act]
        da = 1.0e-7
        dh = np.maximum(1.0e-7, 1.0e-7 * horizon[rows])
        G0 = G[rows]
        Ga = endpoints(alpha[rows] + da, horizon[rows], rows) - Y[rows]
        Gh = endpoints(alpha[rows], horizon[rows] + dh, rows) - Y[rows]
        J11 = (Ga[:, 0] - G0[:, 0]) / da
        J21 = (Ga[:, 1] - G0[:, 1]) / da
        J12 = (Gh[:, 0] - G0[:, 0]) / dh
        J22 = (Gh[:, 1] - G0[:, 1]) / dh
        det = J11 * J22 - J12 * J21
        bad = np.abs(det) < 1.0e-14
        det = np.where(bad, 1.0, det)
        step_a = -(J22 * G0[:, 0] - J12 * G0[:, 1]) / det
        step_h = -(-J21 * G0[:, 0] + J11 * G0[:, 1]) / det
        step_a[bad] = 0.0
        step_h[bad] = 0.0
        # damped acceptance, halving the step per row until the residual drops
        lam = np.ones(rows.size)
        g_old = gn[rows]
        pending = np.ones(rows.size, dtype=bool)
        for _try in range(9):
            sub = np.nonzero(pending)[0]
            if sub.size == 0:
                break
            cand_a = alpha[rows[sub]] + lam[sub] * step_a[sub]
            cand_h = np.maximum(horizon[rows[sub]] + lam[sub] * step_h[sub],
                                0.05 * horizon[rows[sub]])
            Gc = endpoints(cand_a, cand_h, rows[sub]) - Y[rows[sub]]
            gc = np.hypot(Gc[:, 0], Gc[:, 1]) * lamY[rows[sub]]
            ok = gc < g_old[sub]
            tok = sub[ok]
            alpha[rows[tok]] = cand_a[ok]
            horizon[rows[tok]] = cand_h[ok]
            G[rows[tok]] = Gc[ok]
            gn[rows[tok]] = gc[ok]
            pending[tok] = False
            lam[sub[~ok]] *= 0.5
        # rows still pending keep their old iterate; the next sweep retries
    return gn


def connect_batch(metric: Metric, X, Y, *, rtol=1.0e-9, bvp_tol=1.0e-10,
                  max_iter=40):
    """Connecting geodesic data for endpoint arrays X, Y of shape (B, 2).

    Returns a dict with ``r`` (lengths), ``t0`` (metric-unit chart tangents
    at X toward Y), ``t1`` (at Y, pointing away from X), and for generic
    metrics ``alpha``/``horizon`` (shooting parameters for follow-up joint
    integrations).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    if isinstance(metric, ConstantCurvature):
        r, t0, t1 = _cc_log_batch(metric, X, Y)
        return {"r": r, "t0": t0, "t1": t1}

    B = X.shape[0]
    d = Y - X
    alpha = np.arctan2(d[:, 1], d[:, 0])
    horizon = _segment_length(metric, X, Y)
    gn = _newton_refine(metric, X, Y, alpha, horizon, rtol=rtol,
                        bvp_tol=bvp_tol, max_iter=max_iter)
    if np.any(gn > bvp_tol):
        stuck = np.nonzero(gn > bvp_tol)[0]
        for i in stuck:
            alpha[i], horizon[i] = _polyline_reseed(metric, X[i], Y[i])
        sa = alpha[stuck]
        sh = horizon[stuck]
        g2 = _newton_refine(metric, X[stuck], Y[stuck], sa, sh, rtol=rtol,
                            bvp_tol=bvp_tol, max_iter=max_iter)
        alpha[stuck] = sa
        horizon[stuck] = sh
        if np.any(g2 > bvp_tol):
            raise NonConvergenceError(
                f"two-point geodesic search failed for {int((g2 > bvp_tol).sum())} "
                f"of {B} endpoint pairs"
            )
    v0 = _unit_from_angle(metric, X, alpha)
    y0 = np.concatenate([X, v0], axis=1)
    yT, _ = _rk45.integrate(_rhs_factory(metric, horizon), y0, rtol=rtol, atol=1e-12)
    t1 = metric.unit(yT[:, 0:2], yT[:, 2:4])
    return {"r": horizon.copy(), "t0": v0, "t1": t1, "alpha": alpha,
            "horizon": horizon}


def _polyline_reseed(metric, x, y, n_seg=32):
    """Discrete path-energy minimization used to reseed a stalled Newton search.

    Minimizes sum |dP|^2 e^{2 phi(mid)} * n over a free 32-segment chart
    polyline and reports the minimizer's initial angle and metric length.
    """
    ts = np.linspace(0.0, 1.0, n_seg + 1)[1:-1]
    seed = x[None, :] + ts[:, None] * (y - x)[None, :]

    def energy(flat):
        P = np.vstack([x, flat.reshape(-1, 2), y])
        mids = 0.5 * (P[1:] + P[:-1])
        seg2 = ((P[1:] - P[:-1]) ** 2).sum(axis=1)
        return float((seg2 * np.exp(2.0 * metric.phi(mids))).sum() * n_seg / 2.0)

    res = minimize(energy, seed.ravel(), method="L-BFGS-B",
                   options={"maxiter": 400, "ftol": 1e-14})
    P = np.vstack([x, res.x.reshape(-1, 2), y])
    mids = 0.5 * (P[1:] + P[:-1])
    seglen = np.hypot(*(P[1:] - P[:-1]).T) * metric.conformal_factor(mids)
    length = float(seglen.sum())
    first = P[1] - P[0]
    return math.atan2(first[1], first[0]), length


# ---------------------------------------------------------------------------
# follow-up joint integrations on solved pairs
# ---------------------------------------------------------------------------

def joint_eval_batch(metric: Metric, X, conn, *, carry=None, jacobi=False,
                     rtol=1.0e-9, record=False):
    """Re-integrate solved geodesics with optional transported vectors and
    radial Jacobi data.  ``conn`` holds either shooting angles (``alpha``)
    or metric-unit start vectors (``v0``), plus per-row ``horizon`` lengths.
    Returns (final_states, path)."""
    v0 = conn.get("v0")
    if v0 is None:
        v0 = _unit_from_angle(metric, X, conn["alpha"])
    else:
        v0 = np.asarray(v0, dtype=float)
    parts = [X, v0]
    if carry is not None:
        parts.append(np.asarray(carry, dtype=float))
    if jacobi:
        B = X.shape[0]
        aj = np.zeros((B, 2))
        aj[:, 1] = 1.0
        parts.append(aj)
    y0 = np.concatenate(parts, axis=1)
    rhs = _rhs_factory(metric, conn["horizon"], transport=carry is not None,
                       jacobi=jacobi)
    return _rk45.integrate(rhs, y0, rtol=rtol, atol=1e-12, record=record)


def transport_batch(metric: Metric, X, conn, W, *, rtol=1.0e-9):
    """Parallel transport chart vectors W from X to the far endpoints."""
    if isinstance(metric, ConstantCurvature):
        return _cc_transport_batch(metric, X, conn["t0"], conn["r"], W)
    yT, _ = joint_eval_batch(metric, X, conn, carry=W, rtol=rtol)
    return yT[:, 4:6]


def reflect_batch(metric: Metric, X, conn, V, *, rtol=1.0e-9):
    """Reflection map applied to chart vectors V at the start points X.

    Flips the component of V along the outgoing geodesic direction, then
    parallel transports to the far endpoint.
    """
    V = np.asarray(V, dtype=float)
    c = metric.inner(X, V, conn["t0"])
    W = V - 2.0 * c[..., None] * conn["t0"]
    return transport_batch(metric, X, conn, W, rtol=rtol)


# ---------------------------------------------------------------------------
# public single-geodesic API
# ---------------------------------------------------------------------------

def shoot(metric: Metric, point, direction, length: float, *, rtol=1.0e-9,
          samples: int = 33) -> GeodesicSolution:
    """Trace the unit-speed geodesic from ``point`` in ``direction``.

    ``direction`` is a chart vector (any nonzero scale); it is normalized to
    metric norm one.  The trajectory is sampled at ``samples`` equally spaced
    arclength values and checked against the metric's working region.
    """
    p = np.asarray(point, dtype=float)
    v = metric.unit(p, np.asarray(direction, dtype=float))
    metric.require_inside(p)
    ts = np.linspace(0.0, float(length), samples)
    if isinstance(metric, ConstantCurvature):
        pts, tans = _cc_exp_batch(
            metric, np.repeat(p[None, :], samples, axis=0),
            np.repeat(v[None, :], samples, axis=0), ts
        )
    else:
        y0 = np.concatenate([p, v])[None, :]
        _, path = _rk45.integrate(
            _rhs_factory(metric, np.array([length])), y0, rtol=rtol,
            atol=1e-12, record=True
        )
        states = path.eval_grid(ts / max(length, 1e-300))[:, 0, :]
        pts = states[:, 0:2]
        tans = metric.unit(pts, states[:, 2:4])
    metric.require_inside(pts, "geodesic trajectory")
    return GeodesicSolution(metric, float(length), ts, pts, tans)


def connect(metric: Metric, x, y, *, rtol=1.0e-9, bvp_tol=1.0e-10,
            samples: int = 33) -> GeodesicSolution:
    """Geodesic from x to y (both chart points inside the working region).

    Errors: ``ConjugatePointError`` near the cut locus of a positively curved
    model, ``NonConvergenceError`` if shooting and the polyline fallback both
    stall.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    metric.require_inside(np.stack([x, y]))
    conn = connect_batch(metric, x[None, :], y[None, :], rtol=rtol, bvp_tol=bvp_tol)
    r = float(conn["r"][0])
    if isinstance(metric, ConstantCurvature):
        geo = shoot(metric, x, conn["t0"][0], r, rtol=rtol, samples=samples)
        # replace the far endpoint with the exact target to kill roundoff
        geo.points[-1] = y
        return geo
    _, path = joint_eval_batch(metric, x[None, :], conn, rtol=rtol, record=True)
    ts = np.linspace(0.0, r, samples)
    states = path.eval_grid(ts / max(r, 1e-300))[:, 0, :]
    pts = states[:, 0:2]
    tans = metric.unit(pts, states[:, 2:4])
    pts[-1] = y
    metric.require_inside(pts, "geodesic trajectory")
    return GeodesicSolution(metric, r, ts, pts, tans)


def parallel_transport(metric: Metric, geo: GeodesicSolution, tangent: Tangent,
                       *, rtol=1.0e-9) -> Tangent:
    """Transport ``tangent`` (based at geo.start) along ``geo`` to its end."""
    if not np.allclose(tangent.point, geo.start, atol=1e-9):
        raise ValueError("tangent must be based at the geodesic start")
    X = geo.start[None, :]
    W = np.asarray(tangent.vec, dtype=float)[None, :]
    if isinstance(metric, ConstantCurvature):
        out = _cc_transport_batch(metric, X, geo.start_tangent[None, :],
                                  np.array([geo.length]), W)
        return Tangent(geo.end.copy(), out[0])
    conn = {"alpha": np.array([math.atan2(geo.start_tangent[1], geo.start_tangent[0])]),
            "horizon": np.array([geo.length])}
    yT, _ = joint_eval_batch(metric, X, conn, carry=W, rtol=rtol)
    return Tangent(geo.end.copy(), yT[0, 4:6])


def reflect_transport(metric: Metric, geo: GeodesicSolution, tangent: Tangent,
                      *, rtol=1.0e-9) -> Tangent:
    """Reflection map along ``geo``: flip the component of the vector along
    the outgoing geodesic direction at the start, then parallel transport to
    the far end.  Preserves metric norms and the radial component in the
    sense <R v, grad r at end> = <v, grad r at start>."""
    v = np.asarray(tangent.vec, dtype=float)
    t0 = geo.start_tangent
    c = float(metric.inner(geo.start, v, t0))
    w = v - 2.0 * c * t0
    return parallel_transport(metric, geo, Tangent(tangent.point, w), rtol=rtol)
