"""Task orchestration, report persistence, CSV/SVG artifact emission.

``run_tasks`` executes the configured task list in order, recording per-task
values, tolerance verdicts, and errors (a failing task never aborts the ones
after it).  ``emit_artifacts`` writes the JSON report, the residual-grid and
chord CSV tables, and the reflection-residual heatmap.  The JSON report is
byte-deterministic for a fixed config and seeds; wall-clock data lives in a
separate metadata file.
"""

from __future__ import annotations

import csv
import datetime
import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import chords as chords_mod
from . import energy as energy_mod
from . import highdim as highdim_mod
from . import sobolev as sobolev_mod
from .boundary import BoundaryCurve
from .config import RunConfig, emit, make_domain, make_metric
from .errors import ConfigError, ScatterlabError
from .metrics import ConstantCurvature

__all__ = [
    "RunReport",
    "run_tasks",
    "convergence_study",
    "emit_artifacts",
    "report_exit_code",
]

# strictly-nonnegative quantities get this much numerical slack
NEGATIVITY_SLACK = 1.0e-12
CONVERGE_LEVELS = (128, 256, 512)


@dataclass
class RunReport:
    """Everything a run produced: echo, per-task results, artifacts data."""

    config: RunConfig
    results: list = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    created: str = ""
    residual_grid: np.ndarray | None = None
    fan: object | None = None
    convergence: list | None = None

    @property
    def passed(self) -> bool:
        return all(r["passed"] for r in self.results)

    @property
    def errored(self) -> bool:
        return any(r["error"] is not None for r in self.results)

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "config": {
                "tasks": list(cfg.tasks),
                "metric": cfg.metric,
                "domain": cfg.domain,
                "resolutions": cfg.resolutions,
                "tolerances": cfg.tolerances,
                "highdim": cfg.highdim,
                "output": cfg.output,
            },
            "config_toml": emit(cfg),
            "tasks": self.results,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True,
                          default=_jsonable) + "\n"

    def meta_json(self) -> str:
        meta = {"created": self.created, "timings_s": self.timings}
        return json.dumps(meta, indent=2, sort_keys=True, default=_jsonable) + "\n"


def _jsonable(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON-serializable: {type(value).__name__}")


def report_exit_code(report: RunReport) -> int:
    """0 pass, 1 tolerance failure, 3 solver error (2 is reserved for config)."""
    if report.errored:
        return 3
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# task execution


class _RunContext:
    """Lazily built shared objects so tasks never recompute each other's work."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.metric = make_metric(cfg)
        self.convergence = None
        self._domain = None
        self._energy = None
        self._grid = None

    @property
    def domain(self):
        if self._domain is None:
            self._domain = make_domain(self.cfg, self.metric)
        return self._domain

    @property
    def grid(self):
        if self._grid is None:
            self._grid = energy_mod.boundary_residual_grid(self.domain)
        return self._grid

    @property
    def energy(self):
        if self._energy is None:
            curve = self.domain
            w = curve.weights
            value = 0.5 * float(w @ self.grid @ w)
            self._energy = energy_mod.EnergyReport(
                value=value, length=curve.length, area=curve.area(),
                n_nodes=curve.n_nodes, grid_max=float(self.grid.max()))
        return self._energy


def _task_energy(ctx: _RunContext) -> tuple:
    rep = ctx.energy
    values = {
        "energy": rep.value,
        "length": rep.length,
        "area": rep.area,
        "n_nodes": rep.n_nodes,
        "grid_max": rep.grid_max,
    }
    passed = math.isfinite(rep.value) and rep.value >= -NEGATIVITY_SLACK
    return passed, values


def _task_identity(ctx: _RunContext) -> tuple:
    cfg = ctx.cfg
    curve = ctx.domain
    n_theta = cfg.resolutions["n_theta"]
    direct = ctx.energy.value
    deficit = energy_mod.deficit_identity_rhs(curve)
    mixed = energy_mod.mixed_identity_rhs(curve, n_theta=n_theta)
    fan = chords_mod.build_chords(curve, n_theta)
    santalo = chords_mod.santalo_check(fan)
    routes = np.array([direct, deficit["value"], mixed["value"]])
    # symmetric domains put every route at zero; the floor keeps the
    # comparison meaningful there
    scale = max(float(np.abs(routes).max()), 1.0e-3)
    spread = float(routes.max() - routes.min())
    rel = spread / scale
    values = {
        "direct": direct,
        "interior_route": deficit["value"],
        "fan_route": mixed["value"],
        "route_spread_rel": rel,
        "santalo_lhs": santalo["lhs"],
        "santalo_rhs": santalo["rhs"],
        "santalo_residual": santalo["residual"],
    }
    passed = (rel <= cfg.tolerances["identity_rel"]
              and santalo["residual"] <= cfg.tolerances["santalo_abs"])
    return passed, values


def _task_bol(ctx: _RunContext) -> tuple:
    out = energy_mod.bol_check(ctx.domain, energy=ctx.energy.value)
    # the plane attains equality, so quadrature noise may land either side
    passed = out["margin"] > -1.0e-8
    return passed, dict(out)


def _task_convex(ctx: _RunContext) -> tuple:
    flag, witness = ctx.domain.is_strictly_convex()
    return bool(flag), {"convex": bool(flag), "witness": witness}


def _task_sobolev(ctx: _RunContext) -> tuple:
    metric = ctx.metric
    k0 = float(metric.gauss_curvature(np.zeros((1, 2)))[0])
    if k0 > 0.0:
        # keep the support inside the comparison quarter sphere
        radius = min(1.5, 0.45 * math.pi / (2.0 * math.sqrt(k0)))
    else:
        radius = 1.5
    f = sobolev_mod.make_gaussian(sigma=radius / 3.0, radius=radius)
    out = sobolev_mod.chain_check(metric, f, crossterm_nodes=384)
    sides = out.pop("sides")
    values = {
        "grad_sq": out["grad_sq"],
        "crossterm": out["crossterm"],
        "lower": out["lower"],
        "ordered": out["ordered"],
        "lhs": sides["lhs"],
        "rhs": sides["rhs"],
        "margin": sides["margin"],
        "sup_k": sides["sup_k"],
    }
    passed = out["ordered"] and sides["margin"] > -NEGATIVITY_SLACK
    return passed, values


def _task_symmetry(ctx: _RunContext) -> tuple:
    diag = chords_mod.symmetry_diagnostics(ctx.domain)
    values = diag.summary()
    worst = max(diag.angle_residual, diag.chord_dispersion,
                diag.curvature_dispersion)
    values["worst"] = worst
    passed = worst <= ctx.cfg.tolerances["symmetry_abs"]
    return passed, values


def _task_highdim(ctx: _RunContext) -> tuple:
    cfg = ctx.cfg
    domain = ctx.domain
    p = float(cfg.highdim["p"])
    direct = highdim_mod.energy_p_direct(domain, p)
    out = highdim_mod.energy_p_identity(
        domain, p,
        interior_samples=cfg.resolutions["interior_samples"],
        seed=cfg.resolutions["seed"],
    )
    values = {
        "p": p,
        "energy": direct,
        "identity_lhs": out["lhs"],
        "identity_rhs": out["rhs"],
        "identity_residual": out["residual"],
        "scale": out["scale"],
        "dim": domain.model.dim,
        "curvature": domain.model.curvature,
    }
    passed = (math.isfinite(direct) and direct >= -1.0e-9
              and out["residual"] <= cfg.tolerances["highdim_rel"])
    return passed, values


def _task_converge(ctx: _RunContext) -> tuple:
    study = convergence_study(ctx.cfg)
    ctx.convergence = study["rows"]
    values = {
        "levels": [r["level"] for r in study["rows"]],
        "santalo_residuals": [r["santalo_residual"] for r in study["rows"]],
        "identity_residuals": [r["identity_residual"] for r in study["rows"]],
        "order_santalo": study["order_santalo"],
        "order_identity": study["order_identity"],
        "monotone": study["monotone"],
    }
    return study["passed"], values


_TASK_FNS = {
    "energy": _task_energy,
    "identity": _task_identity,
    "bol": _task_bol,
    "convex": _task_convex,
    "sobolev": _task_sobolev,
    "symmetry": _task_symmetry,
    "highdim": _task_highdim,
    "converge": _task_converge,
}


def run_tasks(cfg: RunConfig) -> RunReport:
    """Execute the configured tasks in declared order and collect results."""
    report = RunReport(config=cfg)
    report.created = datetime.datetime.now(datetime.timezone.utc).isoformat()
    ctx = _RunContext(cfg)
    for task in cfg.tasks:
        t0 = time.perf_counter()
        entry = {"task": task, "passed": False, "error": None, "values": {}}
        try:
            passed, values = _TASK_FNS[task](ctx)
            entry["passed"] = bool(passed)
            entry["values"] = _sanitize(values)
        except ScatterlabError as exc:
            entry["error"] = f"{type(exc).__name__}: {exc}"
        report.timings[task] = time.perf_counter() - t0
        report.results.append(entry)
    if isinstance(ctx._domain, BoundaryCurve):
        try:
            report.residual_grid = ctx.grid
            report.fan = chords_mod.build_chords(
                ctx.domain, cfg.resolutions["n_theta"])
        except ScatterlabError:
            pass  # tasks already recorded the failure; skip grid artifacts
    report.convergence = ctx.convergence
    return report


def _sanitize(values):
    """Recursively coerce task values into JSON-ready builtins."""
    if isinstance(values, dict):
        return {str(k): _sanitize(v) for k, v in values.items()}
    if isinstance(values, (list, tuple)):
        return [_sanitize(v) for v in values]
    if isinstance(values, np.ndarray):
        return values.tolist()
    if isinstance(values, (np.floating, np.integer, np.bool_)):
        return values.item()
    return values


# ---------------------------------------------------------------------------
# convergence study


def _estimate_order(residuals) -> float:
    """Doubling-step convergence order; an exact zero later in the sequence
    counts as an infinitely good step rather than a stall."""
    steps = []
    for a, b in zip(residuals, residuals[1:]):
        if a <= 0.0:
            continue
        if b <= 0.0:
            steps.append(math.inf)
        else:
            steps.append(math.log2(a / b))
    finite = [s for s in steps if math.isfinite(s)]
    if finite:
        return min(finite)
    return math.inf if steps else 0.0


def convergence_study(cfg: RunConfig, levels=CONVERGE_LEVELS) -> dict:
    """Re-run the Santalo and identity residuals at doubling resolutions."""
    if len(levels) < 2:
        raise ConfigError(f"convergence needs at least 2 levels (got {len(levels)})")
    if cfg.domain.get("name") in ("ball", "ellipsoid"):
        raise ConfigError("convergence studies need a surface domain")
    metric = make_metric(cfg)
    planar = isinstance(metric, ConstantCurvature) and metric.K == 0.0
    rows = []
    for level in levels:
        res = dict(cfg.resolutions)
        res["n_boundary"] = int(level)
        res["dense"] = 16 * int(level)
        res["n_theta"] = max(16, int(level) // 2)
        sub = RunConfig(metric=cfg.metric, domain=cfg.domain, tasks=list(cfg.tasks),
                        resolutions=res, tolerances=cfg.tolerances,
                        highdim=cfg.highdim, output=cfg.output)
        curve = make_domain(sub, metric)
        rep = energy_mod.scattering_energy_direct(curve)
        fan = chords_mod.build_chords(curve, res["n_theta"])
        santalo = chords_mod.santalo_check(fan)["residual"]
        if planar:
            ident = abs(rep.value - (rep.length ** 2 - 4.0 * math.pi * rep.area))
        else:
            interior = energy_mod.deficit_identity_rhs(curve)
            ident = abs(rep.value - interior["value"]) / max(abs(rep.value), 1.0e-3)
        rows.append({
            "level": int(level),
            "length": rep.length,
            "energy": rep.value,
            "santalo_residual": santalo,
            "identity_residual": ident,
        })
    sant = [r["santalo_residual"] for r in rows]
    ident = [r["identity_residual"] for r in rows]
    monotone = all(b < a or (b == 0.0 and a > 0.0)
                   for a, b in zip(sant, sant[1:]))
    monotone = monotone and all(b < a or (b == 0.0 and a > 0.0)
                                for a, b in zip(ident, ident[1:]))
    order_s = _estimate_order(sant)
    order_i = _estimate_order(ident)
    passed = bool(monotone and min(order_s, order_i) >= 2.0)
    return {
        "rows": rows,
        "order_santalo": order_s,
        "order_identity": order_i,
        "monotone": bool(monotone),
        "passed": passed,
    }


# ---------------------------------------------------------------------------
# artifact emission


def emit_artifacts(report: RunReport, outdir) -> list:
    """Write report.json, meta.json, CSV tables, and the residual heatmap.

    Returns the list of written paths.  Grid-based artifacts are only
    produced when the run built a boundary residual grid (2-d domains).
    """
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []

    path = outdir / "report.json"
    path.write_text(report.to_json(), encoding="utf-8")
    written.append(path)

    path = outdir / "meta.json"
    path.write_text(report.meta_json(), encoding="utf-8")
    written.append(path)

    if report.residual_grid is not None:
        written.append(_write_grid_csv(report, outdir / "residual_grid.csv"))
        written.append(_write_chords_csv(report, outdir / "chords.csv"))
        written.append(_write_heatmap(report, outdir / "heatmap.svg"))

    if report.convergence:
        written.append(_write_convergence_csv(report, outdir / "convergence.csv"))

    return written


def _curve_of(report: RunReport) -> BoundaryCurve:
    fan = report.fan
    return fan.curve


def _write_grid_csv(report: RunReport, path: Path) -> Path:
    grid = report.residual_grid
    curve = _curve_of(report)
    s = curve.s
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "j", "s", "t", "residual_sq"])
        n = grid.shape[0]
        for i in range(n):
            si = repr(float(s[i]))
            for j in range(n):
                writer.writerow([i, j, si, repr(float(s[j])),
                                 repr(float(grid[i, j]))])
    return path


def _write_chords_csv(report: RunReport, path: Path) -> Path:
    fan = report.fan
    curve = fan.curve
    s = curve.s
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["i", "k", "s", "theta", "length", "exit_s"])
        for i in range(curve.n_nodes):
            si = repr(float(s[i]))
            for k in range(fan.n_theta):
                writer.writerow([
                    i, k, si,
                    repr(float(fan.theta[k])),
                    repr(float(fan.lengths[i, k])),
                    repr(float(fan.exit_s[i, k])),
                ])
    return path


def _write_convergence_csv(report: RunReport, path: Path) -> Path:
    rows = report.convergence
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "length", "energy",
                         "santalo_residual", "identity_residual"])
        for r in rows:
            writer.writerow([r["level"], repr(r["length"]), repr(r["energy"]),
                             repr(r["santalo_residual"]),
                             repr(r["identity_residual"])])
    return path


def _write_heatmap(report: RunReport, path: Path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    grid = report.residual_grid
    curve = _curve_of(report)
    L = curve.length
    with matplotlib.rc_context({"svg.hashsalt": "scatterlab"}):
        fig, ax = plt.subplots(figsize=(5.6, 4.6))
        im = ax.imshow(grid.T, origin="lower", extent=(0.0, L, 0.0, L),
                       cmap="viridis", aspect="equal")
        ax.set_xlabel("boundary arclength s")
        ax.set_ylabel("boundary arclength t")
        ax.set_title("squared reflection residual")
        cbar = fig.colorbar(im, ax=ax)
        cbar.set_label("|normal mismatch|^2")
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
