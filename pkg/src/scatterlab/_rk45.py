"""Batched adaptive Dormand-Prince 5(4) integrator.

Integrates dy/dt = rhs(y) for a whole batch of states simultaneously,
y of shape (B, D), from t = 0 to t = 1 (callers fold their true horizon
into the right-hand side).  All batch rows share the adaptive step sequence;
the error controller tracks the worst row, which keeps the recorded step grid
common across the batch so dense (cubic Hermite) evaluation stays a pure
array operation.
"""

from __future__ import annotations

import numpy as np

from .errors import NonConvergenceError

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)

_MAX_STEPS = 10_000
_MIN_STEP = 1.0e-13


def integrate(rhs, y0, rtol=1.0e-9, atol=1.0e-11, record=False, h0=0.05):
    """Advance y' = rhs(y) over t in [0, 1].

    Parameters
    ----------
    rhs : callable
        Maps states (B, D) to derivatives (B, D).
    y0 : ndarray (B, D)
    record : bool
        When set, return the full accepted-step history for dense output.

    Returns
    -------
    yT : ndarray (B, D)
        States at t = 1.
    path : DensePath or None
    """
    y = np.array(y0, dtype=float)
    if y.ndim != 2:
        raise ValueError("y0 must have shape (B, D)")
    t = 0.0
    h = min(h0, 1.0)
    k0 = rhs(y)
    ts = [0.0]
    ys = [y.copy()] if record else None
    fs = [k0.copy()] if record else None
    stages = [None] * 7
    for _ in range(_MAX_STEPS):
        if t >= 1.0:
            break
        h = min(h, 1.0 - t)
        stages[0] = k0
        for i in range(1, 7):
            acc = stages[0] * _A[i][0]
            for j in range(1, i):
                if _A[i][j] != 0.0:
                    acc = acc + stages[j] * _A[i][j]
            stages[i] = rhs(y + h * acc)
        y5 = y + h * sum(_B5[i] * stages[i] for i in range(7) if _B5[i] != 0.0)
        err = h * sum(
            (_B5[i] - _B4[i]) * stages[i] for i in range(7) if _B5[i] != _B4[i]
        )
        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
        enorm = float(np.sqrt(np.mean((err / scale) ** 2, axis=1)).max()) if y.size else 0.0
        if enorm <= 1.0:
            t += h
            y = y5
            k0 = stages[6]  # FSAL
            if record:
                ts.append(t)
                ys.append(y.copy())
                fs.append(k0.copy())
        factor = 0.9 * enorm ** -0.2 if enorm > 0.0 else 5.0
        h *= min(5.0, max(0.2, factor))
        if h < _MIN_STEP:
            raise NonConvergenceError("integrator step size underflow")
    else:
        raise NonConvergenceError("integrator exceeded the step budget")
    path = DensePath(np.array(ts), np.stack(ys), np.stack(fs)) if record else None
    return y, path


class DensePath:
    """Accepted-step history with cubic Hermite dense evaluation.

    ``ts`` (S,) is shared by every batch row; ``ys``/``fs`` are (S, B, D).
    """

    def __init__(self, ts, ys, fs):
        self.ts = ts
        self.ys = ys
        self.fs = fs

    def eval_rowwise(self, tq):
        """Dense states at per-row times ``tq`` (B,) in [0, 1] -> (B, D)."""
        tq = np.clip(np.asarray(tq, dtype=float), 0.0, 1.0)
        idx = np.clip(np.searchsorted(self.ts, tq, side="right") - 1, 0, len(self.ts) - 2)
        rows = np.arange(self.ys.shape[1])
        t0 = self.ts[idx]
        hstep = self.ts[idx + 1] - t0
        th = ((tq - t0) / hstep)[:, None]
        y0 = self.ys[idx, rows]
        y1 = self.ys[idx + 1, rows]
        m0 = self.fs[idx, rows] * hstep[:, None]
        m1 = self.fs[idx + 1, rows] * hstep[:, None]
        t2 = th * th
        t3 = t2 * th
        return (
            (2 * t3 - 3 * t2 + 1) * y0
            + (t3 - 2 * t2 + th) * m0
            + (-2 * t3 + 3 * t2) * y1
            + (t3 - t2) * m1
        )

    def eval_grid(self, tq):
        """Dense states at shared times ``tq`` (Q,) -> (Q, B, D)."""
        tq = np.clip(np.asarray(tq, dtype=float), 0.0, 1.0)
        idx = np.clip(np.searchsorted(self.ts, tq, side="right") - 1, 0, len(self.ts) - 2)
        t0 = self.ts[idx]
        hstep = self.ts[idx + 1] - t0
        th = ((tq - t0) / hstep)[:, None, None]
        y0 = self.ys[idx]
        y1 = self.ys[idx + 1]
        m0 = self.fs[idx] * hstep[:, None, None]
        m1 = self.fs[idx + 1] * hstep[:, None, None]
        t2 = th * th
        t3 = t2 * th
        return (
            (2 * t3 - 3 * t2 + 1) * y0
            + (t3 - 2 * t2 + th) * m0
            + (-2 * t3 + 3 * t2) * y1
            + (t3 - t2) * m1
        )
