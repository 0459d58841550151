"""Two-dimensional Riemannian metrics presented as conformal charts.

Every surface handled by the 2-d machinery lives on a planar chart carrying
the metric g = e^{2 phi(p)} (dx^2 + dy^2).  Conformal charts keep angles
Euclidean, which simplifies frames and reflections, while lengths pick up a
factor e^{phi} and areas e^{2 phi}.  The Gauss curvature of such a chart is

    K(p) = -e^{-2 phi} * laplacian(phi)(p).

Three families are provided:

* ``ConformalChart``        -- user-supplied phi, derivatives analytic or by
                               fourth-order central differences,
* ``ConstantCurvature``     -- closed-form chart of curvature K (disk model
                               for K < 0, projective-plane-free sphere chart
                               for K > 0, the literal plane for K = 0),
* ``SurfaceOfRevolution``   -- profile metric dr^2 + f(r)^2 dtheta^2 reduced
                               to an isothermal chart through the conformal
                               radius rho(r) = r * exp(int_0^r (1/f(s) - 1/s) ds).

Also here: the curvature comparison functions sn_K, cs_K, ct_K (generalized
sine / cosine / cotangent), used everywhere a constant-curvature model value
is needed.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import WorkingRegionError

__all__ = [
    "sn",
    "cs",
    "ct",
    "comparison_fns",
    "Metric",
    "ConformalChart",
    "ConstantCurvature",
    "SurfaceOfRevolution",
    "gauss_curvature",
]

# step for fourth-order finite differences of user-supplied chart data
FD_STEP = 1.0e-4


# ---------------------------------------------------------------------------
# comparison functions
# ---------------------------------------------------------------------------

def sn(K: float, r):
    """Generalized sine: the solution of u'' + K u = 0, u(0)=0, u'(0)=1.

    Equals sin(sqrt(K) r)/sqrt(K) for K > 0, r for K = 0, and
    sinh(sqrt(-K) r)/sqrt(-K) for K < 0.  Vectorized in ``r``; smooth in K
    across K = 0 (the closed forms already degenerate continuously).
    """
    r = np.asarray(r, dtype=float)
    if K == 0.0:
        return r + 0.0
    s = math.sqrt(abs(K))
    if K > 0.0:
        return np.sin(s * r) / s
    return np.sinh(s * r) / s


def cs(K: float, r):
    """Derivative of sn: cos(sqrt(K) r), 1, or cosh(sqrt(-K) r)."""
    r = np.asarray(r, dtype=float)
    if K == 0.0:
        return np.ones_like(r)
    s = math.sqrt(abs(K))
    return np.cos(s * r) if K > 0.0 else np.cosh(s * r)


def ct(K: float, r):
    """Generalized cotangent cs_K / sn_K.

    Diverges at r = 0 (callers must handle the pole themselves) and, for
    K > 0, is only defined for r < pi/sqrt(K); scalar input outside that
    range raises ValueError.
    """
    scalar = np.isscalar(r)
    r = np.asarray(r, dtype=float)
    if K > 0.0 and scalar and float(r) >= math.pi / math.sqrt(K):
        raise ValueError("ct_K undefined at or beyond r = pi/sqrt(K)")
    with np.errstate(divide="ignore", invalid="ignore"):
        out = cs(K, r) / sn(K, r)
    return float(out) if scalar else out


def comparison_fns(K: float, r):
    """Evaluate the triple (sn_K, cs_K, ct_K) at distance r.

    ct_K has a pole at r = 0; the caller gets inf there and must handle it.
    """
    return sn(K, r), cs(K, r), ct(K, r)


# ---------------------------------------------------------------------------
# working regions
# ---------------------------------------------------------------------------

class WorkingRegion:
    """Declared subset of the chart on which a metric is trusted.

    Either a centered disk (``radius``) or an axis-aligned box (``box`` =
    (xmin, xmax, ymin, ymax)).  Disk regions suit the constant-curvature
    models; boxes suit localized charts.
    """

    def __init__(self, radius=None, box=None):
        if (radius is None) == (box is None):
            raise ValueError("specify exactly one of radius or box")
        self.radius = radius
        self.box = box

    def contains(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.radius is not None:
            return np.hypot(pts[..., 0], pts[..., 1]) <= self.radius
        x0, x1, y0, y1 = self.box
        return (
            (pts[..., 0] >= x0)
            & (pts[..., 0] <= x1)
            & (pts[..., 1] >= y0)
            & (pts[..., 1] <= y1)
        )

    def describe(self) -> str:
        if self.radius is not None:
            return f"disk(|p| <= {self.radius:g})"
        return f"box{self.box}"


# ---------------------------------------------------------------------------
# metric base class
# ---------------------------------------------------------------------------

class Metric:
    """A conformal chart metric e^{2 phi} |dp|^2 on a working region.

    Subclasses provide ``phi`` and, when available, analytic ``grad_phi`` and
    ``lap_phi``; the base class falls back to fourth-order central
    differences with step ``FD_STEP``.  All chart functions accept arrays of
    points with shape (..., 2).
    """

    #: geodesic and transport operations may dispatch to exact formulas
    has_closed_forms = False
    dim = 2

    def __init__(self, region: WorkingRegion):
        self.region = region

    # --- chart data -------------------------------------------------------

    def phi(self, pts) -> np.ndarray:
        raise NotImplementedError

    def grad_phi(self, pts) -> np.ndarray:
        """d phi, shape (..., 2); fourth-order finite differences by default."""
        pts = np.asarray(pts, dtype=float)
        h = FD_STEP
        out = np.empty(pts.shape, dtype=float)
        for k in (0, 1):
            e = np.zeros(2)
            e[k] = 1.0
            out[..., k] = (
                -self.phi(pts + 2 * h * e)
                + 8.0 * self.phi(pts + h * e)
                - 8.0 * self.phi(pts - h * e)
                + self.phi(pts - 2 * h * e)
            ) / (12.0 * h)
        return out

    def lap_phi(self, pts) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        h = FD_STEP
        acc = np.zeros(pts.shape[:-1], dtype=float)
        f0 = self.phi(pts)
        for k in (0, 1):
            e = np.zeros(2)
            e[k] = 1.0
            acc += (
                -self.phi(pts + 2 * h * e)
                + 16.0 * self.phi(pts + h * e)
                - 30.0 * f0
                + 16.0 * self.phi(pts - h * e)
                - self.phi(pts - 2 * h * e)
            ) / (12.0 * h * h)
        return acc

    # --- derived quantities ------------------------------------------------

    def conformal_factor(self, pts) -> np.ndarray:
        """e^{phi}: the local length magnification of the chart."""
        return np.exp(self.phi(pts))

    def gauss_curvature(self, pts) -> np.ndarray:
        """Gauss curvature K = -e^{-2 phi} laplacian(phi)."""
        return -np.exp(-2.0 * self.phi(pts)) * self.lap_phi(pts)

    def inner(self, pts, u, v) -> np.ndarray:
        """Metric inner product of chart-component vectors at ``pts``."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        return np.exp(2.0 * self.phi(pts)) * (u * v).sum(axis=-1)

    def norm(self, pts, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return np.exp(self.phi(pts)) * np.hypot(v[..., 0], v[..., 1])

    def unit(self, pts, v) -> np.ndarray:
        """Rescale chart vectors to metric norm one."""
        v = np.asarray(v, dtype=float)
        n = self.norm(pts, v)
        return v / n[..., None]

    # --- housekeeping -------------------------------------------------------

    def require_inside(self, pts, what: str = "point"):
        ok = self.region.contains(pts)
        if not np.all(ok):
            raise WorkingRegionError(
                f"{what} outside the working region {self.region.describe()}"
            )

    def curvature_range(self, samples: int = 201):
        """(min, max) of K sampled on a grid over the working region.

        The reported supremum is a sampled working-region value, not a
        certified global bound; constant-curvature charts override this with
        the exact constant.
        """
        if self.region.radius is not None:
            rr = np.linspace(0.0, self.region.radius, samples)
            aa = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
            pts = np.stack(
                [np.outer(rr, np.cos(aa)), np.outer(rr, np.sin(aa))], axis=-1
            ).reshape(-1, 2)
        else:
            x0, x1, y0, y1 = self.region.box
            xs = np.linspace(x0, x1, samples)
            ys = np.linspace(y0, y1, samples)
            X, Y = np.meshgrid(xs, ys)
            pts = np.stack([X, Y], axis=-1).reshape(-1, 2)
        k = self.gauss_curvature(pts)
        return float(np.min(k)), float(np.max(k))


# ---------------------------------------------------------------------------
# concrete metrics
# ---------------------------------------------------------------------------

class ConformalChart(Metric):
    """Metric e^{2 phi} |dp|^2 from a user-supplied conformal exponent.

    Parameters
    ----------
    phi_fn : callable
        Vectorized map from points (..., 2) to phi values (...,).
    grad_fn, lap_fn : callable, optional
        Analytic first derivatives / Laplacian of phi.  When omitted these
        are produced by fourth-order central differences with step 1e-4.
    region : WorkingRegion, optional
        Defaults to the box [-8, 8]^2.
    """

    def __init__(self, phi_fn, grad_fn=None, lap_fn=None, region=None):
        super().__init__(region or WorkingRegion(box=(-8.0, 8.0, -8.0, 8.0)))
        self._phi = phi_fn
        self._grad = grad_fn
        self._lap = lap_fn

    def phi(self, pts):
        return self._phi(np.asarray(pts, dtype=float))

    def grad_phi(self, pts):
        if self._grad is None:
            return super().grad_phi(pts)
        return self._grad(np.asarray(pts, dtype=float))

    def lap_phi(self, pts):
        if self._lap is None:
            return super().lap_phi(pts)
        return self._lap(np.asarray(pts, dtype=float))


class ConstantCurvature(Metric):
    """Constant-curvature chart of curvature ``K``.

    For K != 0 the chart exponent is phi = log(2 / (1 + K |p|^2)): for K > 0
    this covers the curvature-K sphere minus one point, for K < 0 the disk
    |p| < 1/sqrt(-K) is the entire hyperbolic plane.  K = 0 is the literal
    Euclidean plane (phi = 0).  Geodesics, parallel transport and Jacobi data
    are available in closed form through the ambient quadric models; the
    geodesic engine dispatches on ``has_closed_forms``.

    ``dim`` is carried for bookkeeping; values above 2 are only meaningful to
    the space-form module and the 2-d chart operations refuse them.
    """

    has_closed_forms = True

    def __init__(self, K: float, dim: int = 2, region: WorkingRegion | None = None):
        if dim < 2:
            raise ValueError("dim must be at least 2")
        if region is None:
            region = self._default_region(K)
        super().__init__(region)
        self.K = float(K)
        self.dim = dim

    @staticmethod
    def _default_region(K: float) -> WorkingRegion:
        if K > 0.0:
            # stay a chart-angle short of the antipode of the origin
            rmax = 0.995 * math.pi / math.sqrt(K)
            return WorkingRegion(radius=math.tan(math.sqrt(K) * rmax / 2.0) / math.sqrt(K))
        if K < 0.0:
            rmax = 14.0 / math.sqrt(-K)
            return WorkingRegion(
                radius=math.tanh(math.sqrt(-K) * rmax / 2.0) / math.sqrt(-K)
            )
        return WorkingRegion(radius=1.0e3)

    def _check_2d(self):
        if self.dim != 2:
            raise WorkingRegionError(
                "chart operations on ConstantCurvature require dim == 2; "
                "higher dimensions are handled by the space-form module"
            )

    # --- chart data ---------------------------------------------------------

    def phi(self, pts):
        self._check_2d()
        pts = np.asarray(pts, dtype=float)
        if self.K == 0.0:
            return np.zeros(pts.shape[:-1], dtype=float)
        r2 = (pts * pts).sum(axis=-1)
        return math.log(2.0) - np.log1p(self.K * r2)

    def grad_phi(self, pts):
        self._check_2d()
        pts = np.asarray(pts, dtype=float)
        if self.K == 0.0:
            return np.zeros_like(pts)
        r2 = (pts * pts).sum(axis=-1)
        return -2.0 * self.K * pts / (1.0 + self.K * r2)[..., None]

    def lap_phi(self, pts):
        self._check_2d()
        pts = np.asarray(pts, dtype=float)
        if self.K == 0.0:
            return np.zeros(pts.shape[:-1], dtype=float)
        r2 = (pts * pts).sum(axis=-1)
        return -4.0 * self.K / (1.0 + self.K * r2) ** 2

    def gauss_curvature(self, pts):
        pts = np.asarray(pts, dtype=float)
        return np.full(pts.shape[:-1], self.K, dtype=float)

    def curvature_range(self, samples: int = 0):
        return self.K, self.K

    # --- chart <-> geodesic polar helpers ------------------------------------

    def chart_radius(self, r: float) -> float:
        """Chart radius of the geodesic circle of radius r about the origin."""
        if self.K == 0.0:
            return r
        s = math.sqrt(abs(self.K))
        if self.K > 0.0:
            return math.tan(s * r / 2.0) / s
        return math.tanh(s * r / 2.0) / s

    def geodesic_radius(self, rho: float) -> float:
        """Inverse of ``chart_radius``."""
        if self.K == 0.0:
            return rho
        s = math.sqrt(abs(self.K))
        if self.K > 0.0:
            return 2.0 * math.atan(s * rho) / s
        return 2.0 * math.atanh(s * rho) / s

    # --- ambient quadric model ------------------------------------------------
    # For K > 0 the chart maps to the radius-R sphere in R^3 (R = 1/sqrt(K)),
    # for K < 0 to the upper hyperboloid <P,P>_M = -R^2 in Minkowski R^{2,1}
    # (signature + + -).  These drive the closed-form geodesic operations.

    def to_ambient(self, pts) -> np.ndarray:
        self._check_2d()
        pts = np.asarray(pts, dtype=float)
        if self.K == 0.0:
            return pts
        s = math.sqrt(abs(self.K))
        q = s * pts
        q2 = (q * q).sum(axis=-1)
        out = np.empty(pts.shape[:-1] + (3,), dtype=float)
        if self.K > 0.0:
            D = 1.0 + q2
            out[..., :2] = 2.0 * q / D[..., None]
            out[..., 2] = (q2 - 1.0) / D
        else:
            D = 1.0 - q2
            out[..., :2] = 2.0 * q / D[..., None]
            out[..., 2] = (1.0 + q2) / D
        return out / s

    def from_ambient(self, P) -> np.ndarray:
        self._check_2d()
        P = np.asarray(P, dtype=float)
        if self.K == 0.0:
            return P
        s = math.sqrt(abs(self.K))
        Q = s * P
        if self.K > 0.0:
            denom = 1.0 - Q[..., 2]
        else:
            denom = 1.0 + Q[..., 2]
        return Q[..., :2] / denom[..., None] / s

    def push_tangent(self, pts, v) -> np.ndarray:
        """Ambient image of a chart tangent vector at ``pts``."""
        self._check_2d()
        pts = np.asarray(pts, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.K == 0.0:
            return v
        s = math.sqrt(abs(self.K))
        q = s * pts
        w = s * v
        q2 = (q * q).sum(axis=-1)
        qw = (q * w).sum(axis=-1)
        out = np.empty(pts.shape[:-1] + (3,), dtype=float)
        if self.K > 0.0:
            D = 1.0 + q2
            out[..., :2] = 2.0 * w / D[..., None] - 4.0 * q * (qw / (D * D))[..., None]
            out[..., 2] = 4.0 * qw / (D * D)
        else:
            D = 1.0 - q2
            out[..., :2] = 2.0 * w / D[..., None] + 4.0 * q * (qw / (D * D))[..., None]
            out[..., 2] = 4.0 * qw / (D * D)
        return out / s

    def pull_tangent(self, pts, W) -> np.ndarray:
        """Chart components of an ambient tangent vector at ``pts``.

        Uses conformality: the differential J of the chart embedding
        satisfies J^T J = lambda^2 I, so its inverse on the tangent plane is
        lambda^{-2} J^T.
        """
        self._check_2d()
        pts = np.asarray(pts, dtype=float)
        W = np.asarray(W, dtype=float)
        if self.K == 0.0:
            return W
        lam2 = np.exp(2.0 * self.phi(pts))
        # J^T W assembled column by column from push_tangent of the basis
        e1 = np.zeros_like(pts)
        e1[..., 0] = 1.0
        e2 = np.zeros_like(pts)
        e2[..., 1] = 1.0
        J1 = self.push_tangent(pts, e1)
        J2 = self.push_tangent(pts, e2)
        if self.K > 0.0:
            c1 = (J1 * W).sum(axis=-1)
            c2 = (J2 * W).sum(axis=-1)
        else:
            sign = np.array([1.0, 1.0, -1.0])
            c1 = (J1 * W * sign).sum(axis=-1)
            c2 = (J2 * W * sign).sum(axis=-1)
        return np.stack([c1, c2], axis=-1) / lam2[..., None]


class SurfaceOfRevolution(Metric):
    """Rotationally symmetric metric dr^2 + f(r)^2 dtheta^2 on 0 <= r <= r_max.

    The profile must satisfy f(0) = 0, f'(0) = 1, f > 0 on (0, r_max]
    (a smooth pole at r = 0).  The surface is rendered isothermal through the
    conformal radius

        rho(r) = r * exp( int_0^r (1/f(s) - 1/s) ds ),

    after which phi(rho) = log(f(r(rho)) / rho) and the radial identities

        phi'(rho) = (f'(r) - 1) / rho,      lap phi = f(r) f''(r) / rho^2

    give analytic chart derivatives; the Gauss curvature reduces to the
    classical -f''(r)/f(r).

    Parameters
    ----------
    profile : callable
        f(r), vectorized.
    d1, d2 : callable, optional
        f' and f''.  Finite differences (step 1e-6) are used when omitted.
    r_max : float
        Outer geodesic radius of the chart.
    """

    def __init__(self, profile, d1=None, d2=None, r_max: float = 2.5, name: str = ""):
        self.f = profile
        h = 1.0e-6
        self.f1 = d1 if d1 is not None else (
            lambda r: (profile(r + h) - profile(r - h)) / (2.0 * h)
        )
        self.f2 = d2 if d2 is not None else (
            lambda r: (profile(r + h) - 2.0 * profile(r) + profile(r - h)) / (h * h)
        )
        self.r_max = float(r_max)
        self.name = name
        self._build_tables()
        super().__init__(WorkingRegion(radius=0.999 * float(self._rho_of_r(self.r_max))))

    def _build_tables(self):
        n = 8193
        r = np.linspace(0.0, self.r_max, n)
        with np.errstate(divide="ignore", invalid="ignore"):
            g = (r - self.f(r)) / (r * self.f(r))
        # limit of (1/f - 1/s) at the pole is -f''(0)/2
        g[0] = -0.5 * float(np.asarray(self.f2(1.0e-7)))
        q = np.concatenate([[0.0], np.cumsum((g[1:] + g[:-1]) * 0.5 * np.diff(r))])
        rho = r * np.exp(q)
        self._rho_of_r = CubicSpline(r, rho)
        self._r_of_rho = CubicSpline(rho, r)
        self._rho_max = float(rho[-1])

    def r_of_rho(self, rho):
        return np.clip(self._r_of_rho(np.asarray(rho, dtype=float)), 0.0, self.r_max)

    def rho_of_r(self, r):
        return self._rho_of_r(np.asarray(r, dtype=float))

    def phi(self, pts):
        pts = np.asarray(pts, dtype=float)
        rho = np.hypot(pts[..., 0], pts[..., 1])
        rho_safe = np.maximum(rho, 1.0e-9)
        r = self.r_of_rho(rho_safe)
        val = np.log(self.f(r) / rho_safe)
        return np.where(rho > 1.0e-9, val, 0.0)

    def grad_phi(self, pts):
        pts = np.asarray(pts, dtype=float)
        rho2 = (pts * pts).sum(axis=-1)
        rho = np.sqrt(rho2)
        r = self.r_of_rho(np.maximum(rho, 1.0e-9))
        scale = np.where(rho2 > 1.0e-18, (self.f1(r) - 1.0) / np.maximum(rho2, 1.0e-18), 0.0)
        return scale[..., None] * pts

    def lap_phi(self, pts):
        pts = np.asarray(pts, dtype=float)
        rho2 = np.maximum((pts * pts).sum(axis=-1), 1.0e-18)
        r = self.r_of_rho(np.sqrt(rho2))
        return self.f(r) * self.f2(r) / rho2

    def gauss_curvature(self, pts):
        pts = np.asarray(pts, dtype=float)
        rho = np.hypot(pts[..., 0], pts[..., 1])
        r = np.maximum(self.r_of_rho(np.maximum(rho, 1.0e-9)), 1.0e-6)
        return -self.f2(r) / self.f(r)

    def curvature_range(self, samples: int = 2001):
        r = np.linspace(1.0e-6, self.r_max, samples)
        k = -self.f2(r) / self.f(r)
        return float(np.min(k)), float(np.max(k))


def gauss_curvature(metric: Metric, pts) -> np.ndarray:
    """Gauss curvature of ``metric`` at chart points ``pts`` (..., 2)."""
    return metric.gauss_curvature(pts)
