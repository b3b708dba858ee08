"""Scenario descriptors: a geometry plus a flow description, runnable and cacheable.

A scenario is plain JSON-compatible data, so the same object drives the
CLI config files, the default verification suite and the tests.  Runs are
memoised on the canonical JSON text of the descriptor.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Mapping

import numpy as np

from .entropy import Potential
from .errors import ConfigurationError
from .flows import (
    FiniteDimTrajectory,
    FlowTrajectory,
    SolverConfig,
    model_patch_data,
    normalize_density,
    run_euler_damped,
    run_finite_dim,
    run_geodesic,
    run_heat,
    run_langevin,
)
from .geometry import ScalarField, TorusGeometry, VectorField, build_geometry, trig_polynomial
from .reference import ReferenceModel, solve_u_beta

__all__ = [
    "FLOW_KINDS",
    "RHO_PRESETS",
    "Scenario",
    "parse_coupling",
    "initial_data",
    "run_scenario",
    "clear_cache",
]

FLOW_KINDS = ("heat", "geodesic", "langevin", "euler", "finite_dim", "reference")
RHO_PRESETS = ("uniform", "perturbed_uniform", "model_patch", "random_trig")
SOLVER_KEYS = ("dt", "t_start", "t_end", "output_stride", "rho_floor", "hess_ceiling", "dealias", "tail_limit")


def parse_coupling(c: Any) -> float:
    """Accept numbers and the strings ``"inf"``/``"infinity"``."""
    if isinstance(c, str):
        if c.strip().lower() in ("inf", "infinity", "+inf"):
            return math.inf
        try:
            c = float(c)
        except ValueError as exc:
            raise ConfigurationError(f"cannot read coupling {c!r}") from exc
    c = float(c)
    if math.isnan(c) or c < 0:
        raise ConfigurationError(f"coupling must be nonnegative, got {c}")
    return c


@dataclass(frozen=True)
class Scenario:
    geometry: Mapping = field(default_factory=dict)
    flow: Mapping = field(default_factory=dict)
    seed: int | None = None

    def __post_init__(self):
        kind = self.flow.get("kind")
        if kind not in FLOW_KINDS:
            raise ConfigurationError(f"unknown flow kind {kind!r}; expected one of {FLOW_KINDS}")

    @property
    def kind(self) -> str:
        return self.flow["kind"]

    def key(self) -> str:
        return json.dumps({"geometry": self.geometry, "flow": self.flow, "seed": self.seed},
                          sort_keys=True, default=str)

    def solver(self) -> SolverConfig:
        raw = dict(self.flow.get("solver", {}))
        unknown = set(raw) - set(SOLVER_KEYS)
        if unknown:
            raise ConfigurationError(f"unknown solver keys {sorted(unknown)}")
        if "dt" not in raw or "t_end" not in raw:
            raise ConfigurationError("solver needs dt and t_end")
        return SolverConfig(**raw)

    def replace(self, geometry: Mapping | None = None, flow: Mapping | None = None) -> "Scenario":
        g = copy.deepcopy(dict(self.geometry))
        f = copy.deepcopy(dict(self.flow))
        g.update(geometry or {})
        for k, v in (flow or {}).items():
            if k == "solver":
                f.setdefault("solver", {}).update(v)
            else:
                f[k] = v
        return Scenario(g, f, self.seed)

    def refined(self, level: int = 1) -> "Scenario":
        """Grid doubled and solver step halved ``level`` times; the output stride is kept."""
        if level == 0:
            return self
        factor = 2**level
        geo = {}
        if self.geometry:
            geo["grid"] = [int(n) * factor for n in self.geometry.get("grid", [64])]
        if self.kind == "reference":
            return self.replace(flow={"dt": float(self.flow.get("dt", 1e-3)) / factor})
        solver = self.flow.get("solver", {})
        return self.replace(geometry=geo, flow={"solver": {"dt": float(solver["dt"]) / factor}})

    @property
    def c(self) -> float:
        default = "inf" if self.kind == "geodesic" else 0.0 if self.kind == "heat" else 1.0
        return parse_coupling(self.flow.get("c", default))

    def build_geometry(self) -> TorusGeometry:
        return build_geometry(dict(self.geometry))


def _random_trig(geo: TorusGeometry, spec: Mapping, seed: int | None) -> np.ndarray:
    if seed is None:
        raise ConfigurationError("random_trig initial data needs an explicit seed")
    rng = np.random.default_rng(seed)
    kmax = int(spec.get("modes", 3))
    amp = float(spec.get("amplitude", 0.1))
    coeffs = []
    ranges = [range(-kmax, kmax + 1)] * geo.dim
    for k in np.array(np.meshgrid(*ranges, indexing="ij")).reshape(geo.dim, -1).T:
        if not any(k) or tuple(k) <= tuple(-k):  # one representative per +-k pair
            continue
        scale = amp / (1.0 + float(np.dot(k, k)))
        coeffs.append({"k": [int(v) for v in k], "cos": scale * rng.normal(), "sin": scale * rng.normal()})
    return trig_polynomial(geo, coeffs)


def _scalar(geo: TorusGeometry, spec: Mapping | None, seed: int | None, *, base: float) -> np.ndarray:
    spec = spec or {}
    preset = spec.get("preset")
    if preset is None or preset == "coeffs":
        return float(spec.get("base", base)) + trig_polynomial(geo, spec.get("coeffs", []))
    if preset == "uniform":
        return np.full(geo.shape, max(base, 1.0))
    if preset == "perturbed_uniform":
        a = float(spec.get("a", 0.2))
        if not abs(a) < 1:
            raise ConfigurationError("perturbed_uniform needs |a| < 1")
        return 1.0 + a * np.prod([np.cos(2.0 * math.pi * x / L) for x, L in zip(geo.coords, geo.periods)], axis=0)
    if preset == "random_trig":
        pert = _random_trig(geo, spec, seed)
        if base:
            top = float(np.max(np.abs(pert)))
            pert = pert * (0.5 / top) if top > 0.5 else pert
        return base + pert
    raise ConfigurationError(f"unknown preset {preset!r}")


def initial_data(sc: Scenario) -> dict[str, Any]:
    """Build ``geometry``, ``rho0``, ``phi0`` and (for Euler) ``u0`` from the descriptor."""
    geo = sc.build_geometry()
    flow = sc.flow
    rho_spec = flow.get("rho0", {"preset": "uniform"})
    if rho_spec.get("preset") == "model_patch":
        rho0, phi0 = model_patch_data(geo, float(rho_spec.get("u0", 1.0)), float(rho_spec.get("beta0", 0.0)),
                                      float(rho_spec.get("background", 1e-14)))
    else:
        rho0 = normalize_density(geo, _scalar(geo, rho_spec, sc.seed, base=1.0))
        phi0 = ScalarField(geo, _scalar(geo, flow.get("phi0"), sc.seed, base=0.0))
    out = {"geometry": geo, "rho0": rho0, "phi0": phi0}
    if sc.kind == "euler":
        u_spec = flow.get("u0")
        if u_spec is None:
            comps = tuple(geo.d(phi0.values, i) for i in range(geo.dim))
        else:
            rows = u_spec.get("components")
            if rows is None or len(rows) != geo.dim:
                raise ConfigurationError("u0.components needs one coefficient list per dimension")
            comps = tuple(trig_polynomial(geo, row) for row in rows)
        out["u0"] = VectorField(geo, comps)
    return out


def _potential(spec: Mapping) -> Potential:
    A = spec.get("A", [[1.0]])
    b = spec.get("b")
    if "a4" in spec:
        return Potential.quartic(spec["a4"], A, b)
    return Potential.quadratic(A, b)


@lru_cache(maxsize=32)
def _run_cached(key: str) -> FlowTrajectory | FiniteDimTrajectory | ReferenceModel:
    raw = json.loads(key)
    sc = Scenario(raw["geometry"], raw["flow"], raw["seed"])
    flow = sc.flow
    if sc.kind == "reference":
        return solve_u_beta(sc.c, m=int(flow.get("m", 1)), u0=float(flow.get("u0", 1.0)),
                            up0=float(flow.get("up0", 0.0)), beta0=float(flow.get("beta0", 0.0)),
                            t_end=float(flow.get("t_end", 1.0)), dt=float(flow.get("dt", 1e-3)))
    cfg = sc.solver()
    if sc.kind == "finite_dim":
        return run_finite_dim(flow.get("x0", [1.0]), flow.get("v0", [0.0]),
                              _potential(flow.get("potential", {})), sc.c, cfg)
    data = initial_data(sc)
    if sc.kind == "heat":
        return run_heat(data["rho0"], cfg)
    if sc.kind == "geodesic":
        return run_geodesic(data["rho0"], data["phi0"], cfg)
    if sc.kind == "langevin":
        return run_langevin(data["rho0"], data["phi0"], sc.c, cfg)
    return run_euler_damped(data["rho0"], data["u0"], sc.c, cfg)


def run_scenario(sc: Scenario):
    """Run (or fetch from the memo) the flow a scenario describes."""
    return _run_cached(sc.key())


def clear_cache() -> None:
    _run_cached.cache_clear()
