"""Run configuration: TOML ingestion, validation, named metric/domain builders.

A :class:`RunConfig` is plain data.  :func:`parse` fills defaults and
validates; :func:`emit` writes canonical TOML such that
``parse(emit(cfg)) == cfg``.  The metric/domain tables use the builtin
names ``plane``/``sphere``/``hyperbolic``/``conformal_bump``/``revolution``
and ``disk``/``ellipse``/``fourier``/``cap``/``hyperbolic_disk``/``ball``/
``ellipsoid``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

try:
    import tomllib as tomli
except ModuleNotFoundError:
    import tomli

from .boundary import (
    BoundaryCurve,
    circle_points,
    ellipse_points,
    fourier_points,
    geodesic_circle,
)
from .errors import ConfigError
from .highdim import HDDomain, ModelSpace
from .metrics import ConformalChart, ConstantCurvature, SurfaceOfRevolution, WorkingRegion

__all__ = [
    "RunConfig",
    "TASKS",
    "parse",
    "emit",
    "load",
    "save",
    "validate_config",
    "make_metric",
    "make_domain",
]

TASKS = (
    "energy",
    "identity",
    "bol",
    "convex",
    "sobolev",
    "symmetry",
    "highdim",
    "converge",
)

METRIC_NAMES = ("plane", "sphere", "hyperbolic", "conformal_bump", "revolution")
DOMAIN_NAMES = (
    "disk",
    "ellipse",
    "fourier",
    "cap",
    "hyperbolic_disk",
    "ball",
    "ellipsoid",
)
HD_DOMAINS = ("ball", "ellipsoid")
REVOLUTION_PROFILES = ("sine", "sinh", "linear")

# documented minima for the resolution block
RESOLUTION_MINIMA = {
    "n_boundary": 64,
    "dense_factor": 4,
    "n_theta": 16,
    "n_radial": 8,
    "n_polar": 8,
    "interior_samples": 1000,
}

_DEFAULT_RESOLUTIONS = {
    "n_boundary": 256,
    "dense": 4096,
    "n_theta": 128,
    "n_radial": 64,
    "n_polar": 48,
    "interior_samples": 200_000,
    "seed": 1,
}

_DEFAULT_TOLERANCES = {
    "ode_tol": 1.0e-10,
    "bvp_tol": 1.0e-10,
    "diag_cutoff": 1.0e-3,
    "identity_rel": 1.0e-2,
    "santalo_abs": 1.0e-3,
    "symmetry_abs": 1.0e-6,
    "highdim_rel": 1.0e-2,
}

_DEFAULT_HIGHDIM = {"p": 0.0}
_DEFAULT_OUTPUT = {"dir": "out"}


@dataclass
class RunConfig:
    """Fully defaulted run description (metric, domain, tasks, knobs, paths)."""

    metric: dict = field(default_factory=lambda: {"name": "plane"})
    domain: dict = field(default_factory=lambda: {"name": "disk", "radius": 1.0})
    tasks: list = field(default_factory=lambda: ["energy"])
    resolutions: dict = field(default_factory=lambda: dict(_DEFAULT_RESOLUTIONS))
    tolerances: dict = field(default_factory=lambda: dict(_DEFAULT_TOLERANCES))
    highdim: dict = field(default_factory=lambda: dict(_DEFAULT_HIGHDIM))
    output: dict = field(default_factory=lambda: dict(_DEFAULT_OUTPUT))


# ---------------------------------------------------------------------------
# parsing / emission


def _merge_defaults(table: dict, defaults: dict, where: str) -> dict:
    out = dict(defaults)
    for key, value in table.items():
        if key not in defaults:
            raise ConfigError(f"{where}.{key} is not a recognized field")
        out[key] = value
    return out


def parse(text: str) -> RunConfig:
    """Parse TOML text into a validated RunConfig with defaults applied."""
    try:
        raw = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse failure: {exc}") from exc

    known = {"tasks", "metric", "domain", "resolutions", "tolerances", "highdim", "output"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"unknown top-level key '{key}'")

    cfg = RunConfig(
        metric=dict(raw.get("metric", {"name": "plane"})),
        domain=dict(raw.get("domain", {"name": "disk", "radius": 1.0})),
        tasks=list(raw.get("tasks", ["energy"])),
        resolutions=_merge_defaults(
            raw.get("resolutions", {}), _DEFAULT_RESOLUTIONS, "resolutions"
        ),
        tolerances=_merge_defaults(
            raw.get("tolerances", {}), _DEFAULT_TOLERANCES, "tolerances"
        ),
        highdim=_merge_defaults(raw.get("highdim", {}), _DEFAULT_HIGHDIM, "highdim"),
        output=_merge_defaults(raw.get("output", {}), _DEFAULT_OUTPUT, "output"),
    )
    validate_config(cfg)
    return cfg


def load(path) -> RunConfig:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return parse(text)


def _toml_scalar(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return repr(value)
    if isinstance(value, float):
        # repr round-trips exactly; integral floats keep their dot
        return repr(value)
    if isinstance(value, str):
        escaped = value.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{escaped}"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise ConfigError(f"cannot emit TOML value of type {type(value).__name__}")


def _emit_table(name: str, table: dict, lines: list) -> None:
    subtables = {k: v for k, v in table.items() if isinstance(v, dict)}
    scalars = {k: v for k, v in table.items() if not isinstance(v, dict)}
    lines.append(f"[{name}]")
    keys = sorted(scalars)
    if "name" in scalars:
        keys.remove("name")
        keys.insert(0, "name")
    for key in keys:
        lines.append(f"{key} = {_toml_scalar(scalars[key])}")
    lines.append("")
    for key in sorted(subtables):
        _emit_table(f"{name}.{key}", subtables[key], lines)


def emit(config: RunConfig) -> str:
    """Canonical TOML for a config; deterministic key order."""
    lines: list = []
    lines.append(f"tasks = {_toml_scalar(list(config.tasks))}")
    lines.append("")
    _emit_table("metric", config.metric, lines)
    _emit_table("domain", config.domain, lines)
    _emit_table("resolutions", config.resolutions, lines)
    _emit_table("tolerances", config.tolerances, lines)
    _emit_table("highdim", config.highdim, lines)
    _emit_table("output", config.output, lines)
    return "\n".join(lines).rstrip() + "\n"


def save(config: RunConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(emit(config))


# ---------------------------------------------------------------------------
# validation


def _require_number(table: dict, table_name: str, key: str, *, positive=False):
    if key not in table:
        raise ConfigError(f"{table_name}.{key} is required")
    value = table[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{table_name}.{key} must be a number")
    if positive and value <= 0:
        raise ConfigError(f"{table_name}.{key} must be positive (got {value})")
    return value


def validate_config(cfg: RunConfig) -> None:
    """Raise ConfigError naming the offending field; no-op when valid."""
    # tasks
    if not cfg.tasks:
        raise ConfigError("tasks must be a non-empty list")
    seen = set()
    for task in cfg.tasks:
        if task not in TASKS:
            raise ConfigError(
                f"tasks contains unknown task '{task}' (choose from {', '.join(TASKS)})"
            )
        if task in seen:
            raise ConfigError(f"tasks lists '{task}' twice")
        seen.add(task)

    # metric
    mname = cfg.metric.get("name")
    if mname not in METRIC_NAMES:
        raise ConfigError(
            f"metric.name must be one of {', '.join(METRIC_NAMES)} (got {mname!r})"
        )
    allowed_metric_keys = {"name", "dim"}
    if mname == "conformal_bump":
        allowed_metric_keys |= {"amplitude", "width"}
        _require_number(cfg.metric, "metric", "amplitude")
        _require_number(cfg.metric, "metric", "width", positive=True)
    if mname == "revolution":
        allowed_metric_keys |= {"profile"}
        profile = cfg.metric.get("profile")
        if profile not in REVOLUTION_PROFILES:
            raise ConfigError(
                "metric.profile must be one of "
                f"{', '.join(REVOLUTION_PROFILES)} (got {profile!r})"
            )
    for key in cfg.metric:
        if key not in allowed_metric_keys:
            raise ConfigError(f"metric.{key} is not a recognized field")
    dim = cfg.metric.get("dim", 2)
    if not isinstance(dim, int) or not (2 <= dim <= 6):
        raise ConfigError(f"metric.dim must be an integer in [2, 6] (got {dim})")
    if dim > 2 and mname not in ("plane", "sphere", "hyperbolic"):
        raise ConfigError(f"metric.dim > 2 requires a constant-curvature metric, not {mname}")

    # resolutions
    res = cfg.resolutions
    for key in ("n_boundary", "n_theta", "n_radial", "n_polar", "interior_samples"):
        value = res.get(key)
        if not isinstance(value, int):
            raise ConfigError(f"resolutions.{key} must be an integer (got {value!r})")
        minimum = RESOLUTION_MINIMA[key]
        if value < minimum:
            raise ConfigError(
                f"resolutions.{key} must be at least {minimum} (got {value})"
            )
    if not isinstance(res.get("seed"), int) or res["seed"] < 0:
        raise ConfigError(f"resolutions.seed must be a non-negative integer (got {res.get('seed')!r})")
    dense_min = RESOLUTION_MINIMA["dense_factor"] * res["n_boundary"]
    if not isinstance(res.get("dense"), int) or res["dense"] < dense_min:
        raise ConfigError(
            f"resolutions.dense must be at least {dense_min} "
            f"(4 x n_boundary; got {res.get('dense')!r})"
        )

    # tolerances: all positive
    for key in cfg.tolerances:
        _require_number(cfg.tolerances, "tolerances", key, positive=True)

    # domain + compatibility
    dname = cfg.domain.get("name")
    if dname not in DOMAIN_NAMES:
        raise ConfigError(
            f"domain.name must be one of {', '.join(DOMAIN_NAMES)} (got {dname!r})"
        )
    _validate_domain_params(cfg, mname, dname, dim)

    # task/domain compatibility
    wants_hd = dname in HD_DOMAINS
    for task in cfg.tasks:
        if task == "highdim" and not wants_hd:
            raise ConfigError(
                f"task 'highdim' needs domain.name of ball or ellipsoid (got {dname!r})"
            )
        if task != "highdim" and wants_hd:
            raise ConfigError(
                f"task '{task}' needs a surface domain, not '{dname}'"
            )

    # highdim exponent: the identity needs p >= 2 - n
    p = _require_number(cfg.highdim, "highdim", "p")
    if wants_hd:
        n = dim if dname == "ball" else len(cfg.domain.get("semi_axes", ()))
        if n and p < 2 - n:
            raise ConfigError(
                f"highdim.p must be at least {2 - n} in dimension {n} (got {p})"
            )

    if not isinstance(cfg.output.get("dir"), str) or not cfg.output["dir"]:
        raise ConfigError("output.dir must be a non-empty path string")


def _validate_domain_params(cfg: RunConfig, mname: str, dname: str, dim: int) -> None:
    dom = cfg.domain
    allowed = {"name"}
    if dname == "disk":
        allowed |= {"radius", "center"}
        _require_number(dom, "domain", "radius", positive=True)
        center = dom.get("center", [0.0, 0.0])
        if not (isinstance(center, list) and len(center) == 2):
            raise ConfigError("domain.center must be a 2-element list")
    elif dname == "ellipse":
        allowed |= {"a", "b"}
        _require_number(dom, "domain", "a", positive=True)
        _require_number(dom, "domain", "b", positive=True)
    elif dname == "fourier":
        allowed |= {"radius", "modes"}
        _require_number(dom, "domain", "radius", positive=True)
        modes = dom.get("modes")
        if not isinstance(modes, dict) or not modes:
            raise ConfigError("domain.modes must be a non-empty table of mode index -> [cos, sin]")
        total = 0.0
        for key, pair in modes.items():
            try:
                k = int(key)
            except ValueError:
                raise ConfigError(f"domain.modes key '{key}' is not an integer mode index") from None
            if k < 1:
                raise ConfigError(f"domain.modes index must be >= 1 (got {k})")
            if not (isinstance(pair, list) and len(pair) == 2
                    and all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)):
                raise ConfigError(f"domain.modes.{key} must be a [cos, sin] coefficient pair")
            total += abs(float(pair[0])) + abs(float(pair[1]))
        if total >= 1.0:
            raise ConfigError(
                f"domain.modes coefficients sum to {total:.3f} >= 1; the radius would vanish"
            )
    elif dname == "cap":
        allowed |= {"theta0"}
        theta0 = _require_number(dom, "domain", "theta0", positive=True)
        if mname == "sphere":
            if theta0 >= math.pi / 2.0:
                raise ConfigError(
                    f"domain.theta0 must stay below pi/2 for a convex cap (got {theta0})"
                )
        elif mname == "revolution":
            pass  # radial bound enforced by the metric's working region at build time
        else:
            raise ConfigError(
                f"domain 'cap' needs metric.name sphere or revolution (got {mname!r})"
            )
    elif dname == "hyperbolic_disk":
        allowed |= {"radius"}
        _require_number(dom, "domain", "radius", positive=True)
        if mname != "hyperbolic":
            raise ConfigError(
                f"domain 'hyperbolic_disk' needs metric.name hyperbolic (got {mname!r})"
            )
    elif dname == "ball":
        allowed |= {"radius"}
        radius = _require_number(dom, "domain", "radius", positive=True)
        if mname not in ("plane", "sphere", "hyperbolic"):
            raise ConfigError(f"domain 'ball' needs a constant-curvature metric, not {mname!r}")
        if mname == "sphere" and radius >= math.pi / 2.0:
            raise ConfigError(
                f"domain.radius must stay below pi/2 on the sphere (got {radius})"
            )
    elif dname == "ellipsoid":
        allowed |= {"semi_axes"}
        axes = dom.get("semi_axes")
        if not (isinstance(axes, list) and len(axes) in (2, 3)
                and all(isinstance(v, (int, float)) and not isinstance(v, bool) and v > 0 for v in axes)):
            raise ConfigError("domain.semi_axes must be a list of 2 or 3 positive numbers")
        if mname != "plane":
            raise ConfigError(f"domain 'ellipsoid' needs metric.name plane (got {mname!r})")
    for key in dom:
        if key not in allowed:
            raise ConfigError(f"domain.{key} is not a recognized field")


# ---------------------------------------------------------------------------
# builders


def bump_chart(amplitude: float, width: float) -> ConformalChart:
    """Gaussian conformal exponent with analytic gradient and Laplacian."""
    a = float(amplitude)
    w2 = float(width) ** 2

    def phi(p):
        p = np.asarray(p, dtype=float)
        return a * np.exp(-(p ** 2).sum(axis=-1) / w2)

    def grad(p):
        p = np.asarray(p, dtype=float)
        return (-2.0 / w2) * phi(p)[..., None] * p

    def lap(p):
        p = np.asarray(p, dtype=float)
        q = (p ** 2).sum(axis=-1)
        return phi(p) * (4.0 * q / w2 ** 2 - 4.0 / w2)

    return ConformalChart(phi, grad, lap, region=WorkingRegion(radius=16.0))


def _revolution_metric(profile: str) -> SurfaceOfRevolution:
    if profile == "sine":
        return SurfaceOfRevolution(np.sin, np.cos, lambda r: -np.sin(r), r_max=2.5)
    if profile == "sinh":
        return SurfaceOfRevolution(np.sinh, np.cosh, np.sinh, r_max=2.5)
    return SurfaceOfRevolution(
        lambda r: np.asarray(r, dtype=float),
        lambda r: np.ones_like(np.asarray(r, dtype=float)),
        lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        r_max=6.0,
    )


def make_metric(cfg: RunConfig):
    """Instantiate the configured metric (2-d chart) or model space (dim > 2)."""
    table = cfg.metric
    name = table["name"]
    dim = table.get("dim", 2)
    if dim > 2 or cfg.domain.get("name") in HD_DOMAINS:
        curvature = {"plane": 0, "sphere": 1, "hyperbolic": -1}[name]
        return ModelSpace(dim=max(dim, 2), curvature=curvature)
    if name == "plane":
        return ConstantCurvature(0.0)
    if name == "sphere":
        return ConstantCurvature(1.0)
    if name == "hyperbolic":
        return ConstantCurvature(-1.0)
    if name == "conformal_bump":
        return bump_chart(table["amplitude"], table["width"])
    return _revolution_metric(table["profile"])


def make_domain(cfg: RunConfig, metric):
    """Instantiate the configured domain against the built metric."""
    dom = cfg.domain
    name = dom["name"]
    res = cfg.resolutions
    if name == "ball":
        return HDDomain.ball(metric, float(dom["radius"]), polar=res["n_polar"])
    if name == "ellipsoid":
        polar = res["n_polar"]
        return HDDomain.ellipsoid(
            [float(v) for v in dom["semi_axes"]], polar=polar, azimuth=2 * polar
        )
    if name == "disk":
        fn = circle_points(float(dom["radius"]), tuple(dom.get("center", (0.0, 0.0))))
    elif name == "ellipse":
        fn = ellipse_points(float(dom["a"]), float(dom["b"]))
    elif name == "fourier":
        modes = {int(k): (float(v[0]), float(v[1])) for k, v in dom["modes"].items()}
        fn = fourier_points(float(dom["radius"]), modes)
    elif name == "cap":
        fn = geodesic_circle(metric, float(dom["theta0"]))
    else:  # hyperbolic_disk
        fn = geodesic_circle(metric, float(dom["radius"]))
    return BoundaryCurve(metric, fn, n_nodes=res["n_boundary"], dense=res["dense"])
