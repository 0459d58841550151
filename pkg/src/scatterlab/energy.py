"""The scattering energy of a domain and its independent integral routes.

The direct route doubles over boundary nodes: for each unordered node pair
the outward normal at one end is reflected along the connecting geodesic
and compared with the outward normal at the other end; the squared metric
gap, integrated by the periodic trapezoid rule in both arclengths, is twice
the energy.  The reflection map is symmetric under swapping the endpoints,
so the grid is computed once per unordered pair and mirrored.

Two more routes never touch the reflected normals and serve as independent
checks: an interior double integral of the two-point density deficit, and a
boundary fan integral of the density derivative (the mixed route).  A
curvature-weighted isoperimetric bound caps the energy from above whenever
the domain is small enough for the comparison argument.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import map_chunks
from .boundary import BoundaryCurve
from .chords import boundary_pair_grids, build_chords
from .errors import HypothesisError
from .geodesics import connect_batch
from .jacobi import jacobi_batch
from .metrics import ConstantCurvature

__all__ = [
    "EnergyReport",
    "boundary_residual_grid",
    "scattering_energy_direct",
    "deficit_identity_rhs",
    "mixed_identity_rhs",
    "bol_check",
]


@dataclass
class EnergyReport:
    """Direct-route energy with the coarse domain functionals beside it."""

    value: float
    length: float
    area: float
    n_nodes: int
    grid_max: float


def boundary_residual_grid(curve: BoundaryCurve, *, rtol: float = 1.0e-9
                           ) -> np.ndarray:
    """Symmetric matrix of squared reflection residuals between node pairs."""
    return boundary_pair_grids(curve, rtol=rtol)["residual_grid"]


def scattering_energy_direct(curve: BoundaryCurve, *, rtol: float = 1.0e-9
                             ) -> EnergyReport:
    """Half the double boundary integral of the reflection residual."""
    M = boundary_residual_grid(curve, rtol=rtol)
    w = curve.weights
    value = 0.5 * float(w @ M @ w)
    return EnergyReport(value=value, length=curve.length, area=curve.area(),
                        n_nodes=curve.n_nodes, grid_max=float(M.max()))


def deficit_identity_rhs(curve: BoundaryCurve, *, n_radial: int = 12,
                         n_angular: int = 32, rtol: float = 1.0e-9,
                         chunk: int = 8192) -> dict:
    """Interior route: L^2 - 4 pi A plus the double integral over the domain
    of (1 / sqrt_g^2 - lap_x r * lap_y r).

    The integrand extends continuously to the diagonal, where it equals the
    Gauss curvature.
    """
    metric = curve.metric
    pts, w = curve.interior_quadrature(n_radial, n_angular)
    Mq = pts.shape[0]
    ii, jj = np.triu_indices(Mq, k=1)

    def work(lo, hi):
        sl = slice(lo, hi)
        X = pts[ii[sl]]
        Y = pts[jj[sl]]
        conn = connect_batch(metric, X, Y, rtol=rtol)
        jd = jacobi_batch(metric, X, Y, conn, rtol=rtol)
        f = 1.0 / jd["sqrt_g"] ** 2 - jd["lap_start"] * jd["lap_end"]
        return np.array([
            float((2.0 * w[ii[sl]] * w[jj[sl]] * f).sum()),
            float(jd["residual"].max()),
        ])

    parts = map_chunks(work, ii.size, chunk)
    off_diag = sum(p[0] for p in parts)
    sym_res = max(p[1] for p in parts)
    diag = float((w * w * metric.gauss_curvature(pts)).sum())
    deficit = off_diag + diag
    L = curve.length
    A = curve.area()
    value = L * L - 4.0 * math.pi * A + deficit
    return {
        "value": value,
        "deficit_term": deficit,
        "length": L,
        "area": A,
        "pair_symmetry_residual": sym_res,
    }


def mixed_identity_rhs(curve: BoundaryCurve, *, n_theta: int = 128,
                       n_radial: int = 12, rtol: float = 1.0e-9) -> dict:
    """Boundary-interior route: L^2 - 2 pi A minus the fan integral of the
    density derivative against cos(theta).

    The inner radial integral is evaluated by Gauss nodes on the density
    derivative along each chord (see ``chords.ChordField.radial_flux``),
    keeping this route's arithmetic separate from the endpoint-density one.
    """
    fieldv = build_chords(curve, n_theta, n_radial=n_radial, rtol=rtol)
    cosw = np.cos(fieldv.theta) * fieldv.theta_w
    term = float(curve.weights @ (fieldv.radial_flux @ cosw))
    L = curve.length
    A = curve.area()
    value = L * L - 2.0 * math.pi * A - term
    return {"value": value, "flux_term": term, "length": L, "area": A}


def bol_check(curve: BoundaryCurve, *, energy: float | None = None,
              rtol: float = 1.0e-9) -> dict:
    """Curvature-weighted isoperimetric upper bound on the energy.

    bound = L^2 - 4 pi A + (sup K) A^2.  For positive curvature the
    comparison argument needs the domain to fit well inside the model
    hemisphere; the diameter hypothesis is checked and a HypothesisError
    raised when it fails.
    """
    if isinstance(curve.metric, ConstantCurvature):
        k_sup = curve.metric.K
    else:
        k_sup = curve.curvature_bounds()[1]
    if k_sup > 0.0:
        limit = 0.5 * math.pi / math.sqrt(k_sup)
        diam = curve.geodesic_diameter()
        if diam > limit:
            raise HypothesisError(
                f"domain diameter {diam:.4f} exceeds the comparison limit "
                f"{limit:.4f} for curvature bound {k_sup:.4f}"
            )
    if energy is None:
        energy = scattering_energy_direct(curve, rtol=rtol).value
    L = curve.length
    A = curve.area()
    bound = L * L - 4.0 * math.pi * A + k_sup * A * A
    return {
        "bound": bound,
        "energy": energy,
        "margin": bound - energy,
        "k_sup": k_sup,
    }
