"""Identity and inequality harness.

Every check builds a left-hand side from finite differences of entropy
series (or from an independent oracle) and a right-hand side from
quadrature of the curvature integrands at each snapshot, then compares the
two over a verification window.  Identity checks are scored by the relative
residual ``|L - R| / (|L| + |R| + 1)``; inequality checks by the margin
``L - R``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .entropy import (
    entropy_series,
    finite_dim_functionals,
    rhs_integrals,
    w_exponential,
    w_general,
)
from .errors import ConfigurationError, DomainError, NumericError
from .flows import hopf_lax_oracle, linear_finite_dim_solution, recover_potential, vorticity_history
from .geometry import cd_lower_bound
from .reference import model_closed_forms, model_identity_residual, model_residual, solve_u_beta
from .scenario import Scenario, run_scenario
from .series import differentiate_series

__all__ = [
    "IdentitySpec",
    "InequalitySpec",
    "VerificationReport",
    "CHECKS",
    "RHS_SOURCES",
    "differentiate_series",
    "check_identity",
    "check_inequality",
    "run_check",
    "refinement_study",
    "default_suite",
    "run_suite",
    "canonical_scenario",
]

EDGE_STEPS = 3
MIN_WINDOW = 10
REFINEMENT_GATE = 3.0
TOL_FD = 1e-3
TOL_MODEL = 1e-6
TOL_FINITE_DIM = 1e-7
SLACK = 1e-6
SLACK_MONOTONE = 1e-8


# -- specs and reports -------------------------------------------------------


@dataclass(frozen=True, eq=False)
class _Spec:
    id: str
    scenario: Scenario | None = None
    params: Mapping[str, Any] = field(default_factory=dict)
    tolerance: float | None = None
    refine: bool | None = None
    label: str | None = None

    kind = "check"

    def __post_init__(self):
        if self.id not in CHECKS:
            raise ConfigurationError(f"unknown check id {self.id!r}")
        if CHECKS[self.id].kind != self.kind:
            raise ConfigurationError(f"{self.id!r} is an {CHECKS[self.id].kind} check, not an {self.kind} check")

    @property
    def name(self) -> str:
        return self.label or self.id

    @property
    def definition(self) -> "_CheckDef":
        return CHECKS[self.id]

    def resolved(self) -> "_Spec":
        """Fill the scenario, tolerance and refinement flag from the registry defaults."""
        d = self.definition
        return type(self)(
            self.id,
            self.scenario if self.scenario is not None else d.scenario(),
            {**d.params, **dict(self.params)},
            d.tolerance if self.tolerance is None else float(self.tolerance),
            d.refine if self.refine is None else bool(self.refine),
            self.label,
        )


class IdentitySpec(_Spec):
    kind = "identity"


class InequalitySpec(_Spec):
    kind = "inequality"


def make_spec(check_id: str, **kwargs) -> _Spec:
    if check_id not in CHECKS:
        raise ConfigurationError(f"unknown check id {check_id!r}")
    cls = IdentitySpec if CHECKS[check_id].kind == "identity" else InequalitySpec
    return cls(check_id, **kwargs)


@dataclass(eq=False)
class VerificationReport:
    id: str
    name: str
    kind: str
    window: list[float] | None
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    residual: np.ndarray
    sup_residual: float
    l2_residual: float
    tolerance: float
    status: str  # pass | fail | inconclusive
    termination: str = "completed"
    refinement_ratios: list[float] = field(default_factory=list)
    refinement: str = "off"  # off | run | exempt
    secondary: dict[str, dict[str, Any]] = field(default_factory=dict)
    reported: dict[str, Any] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == "pass"

    def to_dict(self) -> dict[str, Any]:
        return {
            "id": self.id,
            "name": self.name,
            "kind": self.kind,
            "window": self.window,
            "sup_residual": _clean(self.sup_residual),
            "l2_residual": _clean(self.l2_residual),
            "refinement_ratios": [_clean(r) for r in self.refinement_ratios],
            "refinement": self.refinement,
            "pass": self.passed,
            "status": self.status,
            "termination": self.termination,
            "tolerance": self.tolerance,
            "secondary": {k: {kk: _clean(vv) for kk, vv in v.items()} for k, v in self.secondary.items()},
            "reported": {k: _clean(v) for k, v in self.reported.items()},
        }

    def write(self, out_dir: str) -> tuple[str, str]:
        os.makedirs(out_dir, exist_ok=True)
        stem = os.path.join(out_dir, _safe(self.name))
        with open(stem + ".json", "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(stem + ".csv", "w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "lhs", "rhs", "residual"])
            for row in zip(self.t, self.lhs, self.rhs, self.residual):
                w.writerow([repr(float(v)) for v in row])
        return stem + ".json", stem + ".csv"


def _clean(v):
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _safe(name: str) -> str:
    return "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in name)


# -- evaluation plumbing ----------------------------------------------------


@dataclass(eq=False)
class _Evaluation:
    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    edges: int = EDGE_STEPS
    termination: str = "completed"
    # name -> (lhs, rhs, tolerance); asserted over the same window
    secondary: dict[str, tuple[np.ndarray, np.ndarray, float]] = field(default_factory=dict)
    # name -> (lhs, rhs); residual reported, never asserted
    alternatives: dict[str, tuple[np.ndarray, np.ndarray]] = field(default_factory=dict)
    reported: dict[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class _CheckDef:
    kind: str  # identity | inequality
    flows: tuple[str, ...]
    evaluate: Callable[[_Spec], _Evaluation]
    scenario: Callable[[], Scenario | None]
    tolerance: float
    params: Mapping[str, Any] = field(default_factory=dict)
    residual: str = "relative"  # relative | absolute (identities)
    relative_slack: bool = False  # inequalities: slack scales with |lhs|
    refine: bool = False
    refinement_exempt: bool = False


def _rel(lhs, rhs):
    return np.abs(lhs - rhs) / (np.abs(lhs) + np.abs(rhs) + 1.0)


@lru_cache(maxsize=32)
def _series_cached(key: str, m, mode):
    raw = json.loads(key)
    traj = run_scenario(Scenario(raw["geometry"], raw["flow"], raw["seed"]))
    return entropy_series(traj, m, mode)


def _series(sc: Scenario, m=None, mode=None):
    return _series_cached(sc.key(), m, mode)


def _traj(sc: Scenario, *kinds: str):
    if sc.kind not in kinds:
        raise ConfigurationError(f"this check needs a {' or '.join(kinds)} flow, got {sc.kind!r}")
    return run_scenario(sc)


def _m(spec: _Spec) -> float:
    m = spec.params.get("m", spec.scenario.geometry.get("m"))
    if m is None:
        raise ConfigurationError(f"{spec.id} needs the synthetic dimension m")
    return float(m)


def _K(spec: _Spec, traj, m: float) -> float:
    K = spec.params.get("K", "K_eff")
    return cd_lower_bound(traj.geometry, m) if K == "K_eff" else float(K)


def _alpha(spec: _Spec, times: np.ndarray, c: float, m: float) -> np.ndarray:
    src = spec.params.get("alpha", "reference")
    if src == "reference":
        dt = float(spec.scenario.flow.get("solver", {}).get("dt", 1e-3))
        model = solve_u_beta(c, m=int(round(m)), u0=float(spec.params.get("u0", 1.0)),
                             up0=float(spec.params.get("up0", 0.0)), t_end=float(times[-1]) + 2 * dt, dt=dt)
        out = []
        for t in times:
            u, up, _ = model.state_at(float(t))
            out.append(up / u)
        return np.array(out)
    if isinstance(src, Mapping) and "linear" in src:
        a, b = (float(v) for v in src["linear"])
        return a + b * times
    if isinstance(src, Mapping) and "constant" in src:
        return np.full(times.shape, float(src["constant"]))
    raise ConfigurationError(f"unknown alpha source {src!r}")


def _per_state(traj, fn) -> np.ndarray:
    return np.array([fn(st) for st in traj.states], dtype=float)


def _backward(traj, spec: _Spec):
    """Time-reversed reading of a heat run: ``tau = T - t`` ascending."""
    T = float(spec.params.get("T", traj.config.t_end))
    return T, slice(None, None, -1)


# -- evaluators ----------------------------------------------------------------


def _eval_geo_wm(spec):
    traj = _traj(spec.scenario, "geodesic")
    m = _m(spec)
    es = _series(spec.scenario, m, "geodesic")
    rhs = _per_state(traj, lambda s: rhs_integrals(s.rho, s.phi, {"m": m, "t": s.t}, ["geo_wm"])["geo_wm"])
    return _Evaluation(es.times, es["dWm"], rhs, termination=traj.termination,
                       reported=_roundoff(es, weight=np.max(np.abs(es.times))))


def _eval_heat_wm(spec):
    traj = _traj(spec.scenario, "heat")
    m = _m(spec)
    es = _series(spec.scenario, m, "heat")
    rhs = _per_state(traj, lambda s: rhs_integrals(s.rho, None, {"m": m, "t": s.t}, ["heat_wm"])["heat_wm"]
                     if s.t > 0 else math.nan)
    return _Evaluation(es.times, es["dWm"], rhs, termination=traj.termination,
                       reported=_roundoff(es, weight=np.max(np.abs(es.times))))


def _roundoff(es, weight: float = 1.0) -> dict[str, float]:
    """Rounding-error scale of the second-difference stencil applied to ``Ent``."""
    t = es.times
    if t.size < 2:
        return {}
    h = float(t[1] - t[0])
    scale = float(np.nanmax(np.abs(es["Ent"])))
    return {"stencil_roundoff_estimate": np.finfo(float).eps * (64.0 / 12.0) * scale * weight / (h * h)}


def _backward_heat_parts(spec):
    traj = _traj(spec.scenario, "heat")
    m = _m(spec)
    es = _series(spec.scenario, m, "heat")
    T, rev = _backward(traj, spec)
    tau = (T - es.times)[rev]
    d1_tau = -es["dEnt"][rev]
    d2 = es["d2Ent"][rev]
    states = traj.states[::-1]
    K = _K(spec, traj, m)
    return traj, es, tau, d1_tau, d2, states, K, m


def _eval_heat_cdkm(spec):
    traj, es, tau, d1, d2, states, K, m = _backward_heat_parts(spec)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = d2 + (2.0 / tau) * d1 + 0.5 * m * (K + 1.0 / tau) ** 2
    rhs = np.array([rhs_integrals(s.rho, None, {"m": m, "t": ta, "K": K}, ["heat_cdkm"])["heat_cdkm"]
                    if ta > 0 else math.nan for s, ta in zip(states, tau)])
    return _Evaluation(tau, lhs, rhs, termination=traj.termination, reported={"K": K})


def _eval_cs_bound(spec):
    traj, es, tau, d1, d2, states, K, m = _backward_heat_parts(spec)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = d2 + (2.0 / tau) * d1 + 0.5 * m * (K + 1.0 / tau) ** 2
    rhs = np.array([rhs_integrals(s.rho, None, {"m": m, "t": ta, "K": K}, ["cs_bound"])["cs_bound"]
                    if ta > 0 else math.nan for s, ta in zip(states, tau)])
    return _Evaluation(tau, lhs, rhs, termination=traj.termination, reported={"K": K})


def _eval_eks_grad(spec):
    traj, es, tau, d1, d2, states, K, m = _backward_heat_parts(spec)
    N = float(spec.params.get("N", m))
    fisher = es["Fisher"][::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs = d2 + (2.0 / tau) * d1 + 0.5 * N * (K + 1.0 / tau) ** 2
    rhs = np.array([rhs_integrals(s.rho, None, {"N": N, "t": ta, "K": K, "dEnt": F}, ["eks_grad"])["eks_grad"]
                    if ta > 0 else math.nan for s, ta, F in zip(states, tau, fisher)])
    # forward parametrisation, reported only
    t = es.times
    lo, hi = spec.params.get("forward_window", spec.params.get("window", [t[0], t[-1]]))
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs_f = es["d2Ent"] + (2.0 / t) * es["dEnt"] + 0.5 * N * (K + 1.0 / t) ** 2
        rhs_f = (2.0 / N) * (-es["Fisher"] + 0.5 * N * (K + 1.0 / t)) ** 2
    sel = _window_mask(t, [lo, hi], EDGE_STEPS) & np.isfinite(lhs_f) & np.isfinite(rhs_f)
    reported = {"K": K, "N": N}
    if np.any(sel):
        reported["forward_min_margin"] = float(np.min((lhs_f - rhs_f)[sel]))
    return _Evaluation(tau, lhs, rhs, termination=traj.termination, reported=reported)


def _eval_geo_dissipation(spec):
    traj = _traj(spec.scenario, "geodesic")
    es = _series(spec.scenario)
    rhs = _per_state(traj, lambda s: rhs_integrals(s.rho, s.phi, {}, ["geo_dissipation"])["geo_dissipation"])
    tol2 = float(spec.params.get("rate_tolerance", TOL_MODEL))
    return _Evaluation(es.times, es["d2Ent"], rhs, termination=traj.termination,
                       secondary={"dEnt_two_ways": (es["dEnt"], es["dEnt_quad"], tol2)})


def _langevin_setup(spec):
    traj = _traj(spec.scenario, "langevin")
    es = _series(spec.scenario)
    c = float(traj.c)
    return traj, es, c, 1.0 / c**2


def _eval_langevin_mf3(spec):
    traj, es, c, g = _langevin_setup(spec)
    m = _m(spec)
    al = _alpha(spec, es.times, c, m)
    lhs = es["d2Ent"] + (2.0 * al + g) * es["dEnt"] + m * al**2
    rhs = np.array([rhs_integrals(s.rho, s.phi, {"m": m, "alpha": a, "c": c}, ["langevin_mf3"])["langevin_mf3"]
                    for s, a in zip(traj.states, al)])
    return _Evaluation(es.times, lhs, rhs, termination=traj.termination)


def _eval_hamiltonian_2nd(spec):
    traj, es, c, _ = _langevin_setup(spec)
    rhs = _per_state(traj, lambda s: rhs_integrals(s.rho, s.phi, {"c": c}, ["hamiltonian_2nd"])["hamiltonian_2nd"])
    return _Evaluation(es.times, es["d2H"], rhs, termination=traj.termination)


def _eval_hamiltonian_1st(spec):
    traj, es, c, _ = _langevin_setup(spec)
    both = [rhs_integrals(s.rho, s.phi, {}, ["hamiltonian_1st", "hamiltonian_1st_alt"]) for s in traj.states]
    rhs = np.array([b["hamiltonian_1st"] for b in both])
    alt = np.array([b["hamiltonian_1st_alt"] for b in both])
    return _Evaluation(es.times, es["dH"], rhs, termination=traj.termination,
                       alternatives={"hamiltonian_1st_alt": (es["dH"], alt)})


def _eval_w_comparison(spec):
    traj, es, c, _ = _langevin_setup(spec)
    m = _m(spec)
    al = _alpha(spec, es.times, c, m)
    w = w_general(es.times, es["dEnt"], es["Fisher"], al, c, m)
    rhs = np.array([rhs_integrals(s.rho, s.phi, {"m": m, "alpha": a}, ["w_comparison"])["w_comparison"]
                    for s, a in zip(traj.states, al)])
    return _Evaluation(es.times, w["excess"], rhs, termination=traj.termination)


def _eval_w_comparison_monotone(spec):
    traj, es, c, _ = _langevin_setup(spec)
    m = _m(spec)
    al = _alpha(spec, es.times, c, m)
    w = w_general(es.times, es["dEnt"], es["Fisher"], al, c, m)
    return _Evaluation(es.times, w["excess"], np.zeros(es.times.shape), termination=traj.termination)


def _w_exp_parts(spec):
    traj, es, c, _ = _langevin_setup(spec)
    t = es.times - es.times[0]
    wH = w_exponential(t, es["H"], es["dH"], c, "H")
    wE = w_exponential(t, es["Ent"], es["dEnt"], c, "Ent")
    return traj, es, c, t, wH, wE


def _eval_w_exp(spec):
    traj, es, c, t, wH, wE = _w_exp_parts(spec)
    both = [rhs_integrals(s.rho, s.phi, {"c": c, "t": tt}, ["w_exp_H", "w_exp_Ent"]) for s, tt in zip(traj.states, t)]
    rH = np.array([b["w_exp_H"] for b in both])
    rE = np.array([b["w_exp_Ent"] for b in both])
    return _Evaluation(es.times, wH["dW"], rH, termination=traj.termination,
                       secondary={"w_exp_Ent": (wE["dW"], rE, spec.tolerance)})


def _eval_whc_monotone(spec):
    traj, es, c, t, wH, _ = _w_exp_parts(spec)
    return _Evaluation(es.times, np.zeros(t.shape), wH["dW"], termination=traj.termination)


def _eval_geo_monotone(spec):
    traj = _traj(spec.scenario, "geodesic")
    es = _series(spec.scenario, _m(spec), "geodesic")
    return _Evaluation(es.times, es["dWm"], np.zeros(es.times.shape), termination=traj.termination)


def _eval_heat_monotone(spec):
    traj = _traj(spec.scenario, "heat")
    es = _series(spec.scenario, _m(spec), "heat")
    return _Evaluation(es.times, es["dWm"], np.zeros(es.times.shape), termination=traj.termination)


def _eval_eks_geo(spec):
    traj = _traj(spec.scenario, "geodesic")
    m = _m(spec)
    N = float(spec.params.get("N", m))
    es = _series(spec.scenario)
    K = _K(spec, traj, N)
    t = es.times
    lhs = es["d2Ent"] + (2.0 / t) * es["dEnt"] + N / t**2
    rhs = np.array([rhs_integrals(s.rho, s.phi, {"N": N, "t": s.t, "K": K, "dEnt": d}, ["eks_geo"])["eks_geo"]
                    for s, d in zip(traj.states, es["dEnt_quad"])])
    return _Evaluation(t, lhs, rhs, termination=traj.termination, reported={"K": K, "N": N})


def _eval_eks_langevin(spec):
    traj, es, c, g = _langevin_setup(spec)
    m = _m(spec)
    N = float(spec.params.get("N", m))
    K = _K(spec, traj, N)
    al = _alpha(spec, es.times, c, N)
    lhs = es["d2Ent"] + (2.0 * al + g) * es["dEnt"] + N * al**2 + g * es["Fisher"]
    rhs = np.array([rhs_integrals(s.rho, s.phi, {"N": N, "alpha": a, "K": K, "dEnt": d}, ["eks_langevin"])["eks_langevin"]
                    for s, a, d in zip(traj.states, al, es["dEnt_quad"])])
    return _Evaluation(es.times, lhs, rhs, termination=traj.termination, reported={"K": K, "N": N})


def _eval_model_identity(spec):
    model = _traj(spec.scenario, "reference")
    res = model_identity_residual(model)
    return _Evaluation(res["t"], res["lhs"], res["rhs"],
                       secondary={"closed_chain": (res["lhs_chain"], res["rhs"], spec.tolerance)},
                       reported={"T_model": model.T_model})


def _eval_model_residual(spec):
    cs = [float(c) for c in spec.params.get("c_values", [0.5, 1.0, 2.0])]
    ms = [int(m) for m in spec.params.get("m_values", [1, 2])]
    n = int(spec.params.get("n_samples", 100))
    sign = float(spec.params.get("sign", 1.0))
    mf1, mf2, mf1_abs, combos = [], [], [], []
    for c in cs:
        for m in ms:
            model = solve_u_beta(c, m=m, t_end=0.6, dt=1e-3)
            r = model_residual(model, n_samples=n, seed=int(spec.params.get("seed", 0)), sign=sign)
            mf1.append(r["mf1"])
            mf2.append(r["mf2"])
            mf1_abs.append(r["mf1_abs"])
            combos.append(f"c={c:g},m={m}")
    idx = np.arange(len(combos), dtype=float)
    zeros = np.zeros(idx.shape)
    return _Evaluation(idx, np.array(mf1), zeros, edges=0,
                       secondary={"mf2": (np.array(mf2), zeros, spec.tolerance)},
                       reported={"combos": combos, "mf1_absolute": mf1_abs, "sign": sign})


def _finite_dim(spec):
    traj = _traj(spec.scenario, "finite_dim")
    F = [finite_dim_functionals(x, v, traj.potential, traj.c) for x, v in zip(traj.x, traj.v)]
    cols = {k: np.array([f[k] for f in F]) for k in ("H", "V", "dH_analytic", "rhs_5_1", "dissipation",
                                                     "rhs_5_2_V", "rhs_5_2_H")}
    return traj, cols


def _eval_fd_langevin(spec):
    traj, f = _finite_dim(spec)
    t = traj.times
    secondary = {"dH": (differentiate_series(f["H"], t, 1), f["dH_analytic"], spec.tolerance)}
    if traj.potential.A is not None:
        x, v = linear_finite_dim_solution(traj.x[0], traj.v[0], traj.potential, traj.c, t)
        err = np.max(np.abs(np.hstack([traj.x - x, traj.v - v])), axis=1)
        secondary["matrix_exponential"] = (err, np.zeros(t.shape), spec.tolerance)
    return _Evaluation(t, differentiate_series(f["H"], t, 2), f["rhs_5_1"], secondary=secondary)


def _eval_fd_vh(spec):
    traj, f = _finite_dim(spec)
    t, g = traj.times, 1.0 / traj.c**2
    lhs_V = differentiate_series(f["V"], t, 2) + g * differentiate_series(f["V"], t, 1)
    lhs_H = differentiate_series(f["H"], t, 2) + 2 * g * differentiate_series(f["H"], t, 1)
    return _Evaluation(t, lhs_V, f["rhs_5_2_V"], secondary={"H": (lhs_H, f["rhs_5_2_H"], spec.tolerance)})


def _eval_fd_w(spec):
    traj, f = _finite_dim(spec)
    t, c = traj.times, traj.c
    s = t - t[0]
    wH = w_exponential(s, f["H"], differentiate_series(f["H"], t, 1), c, "H")
    wV = w_exponential(s, f["V"], differentiate_series(f["V"], t, 1), c, "Ent")
    rH = (1.0 - np.exp(2.0 * s / c**2)) * f["dissipation"]
    rV = (1.0 - np.exp(s / c**2)) * f["dissipation"]
    return _Evaluation(t, wH["dW"], rH, secondary={"W_V": (wV["dW"], rV, spec.tolerance)})


def _langevin_twin(sc: Scenario) -> Scenario:
    flow = {k: v for k, v in sc.flow.items() if k != "u0"}
    flow["kind"] = "langevin"
    return Scenario(sc.geometry, flow, sc.seed)


def _eval_euler_equivalence(spec):
    te = _traj(spec.scenario, "euler")
    if "u0" in spec.scenario.flow:
        raise ConfigurationError("the equivalence check starts Euler from grad phi0; drop u0")
    tl = run_scenario(_langevin_twin(spec.scenario))
    geo = te.geometry
    n = min(len(te.states), len(tl.states))
    err = np.array([max(float(np.max(np.abs(a.u.components[i] - geo.d(b.phi.values, i)))) for i in range(geo.dim))
                    for a, b in zip(te.states[:n], tl.states[:n])])
    term = te.termination if te.termination != "completed" else tl.termination
    return _Evaluation(te.times[:n], err, np.zeros(n), edges=0, termination=term)


def _eval_potential_recovery(spec):
    from .scenario import initial_data

    te = _traj(spec.scenario, "euler")
    tl = run_scenario(_langevin_twin(spec.scenario))
    phi0 = initial_data(spec.scenario)["phi0"]
    rec = recover_potential(te, phi0)
    n = min(len(rec), len(tl.states))
    err = []
    for r, b in zip(rec[:n], tl.states[:n]):
        d = r.values - b.phi.values
        err.append(float(np.max(np.abs(d - np.mean(d)))))
    term = te.termination if te.termination != "completed" else tl.termination
    return _Evaluation(te.times[:n], np.array(err), np.zeros(n), edges=0, termination=term)


def _eval_hopf_lax(spec):
    traj = _traj(spec.scenario, "geodesic")
    st = traj.states[-1]
    t = st.t - traj.states[0].t
    oracle = hopf_lax_oracle(traj.states[0].phi, t, refine=int(spec.params.get("search_refine", 4)))
    diff = float(np.max(np.abs(st.phi.values - oracle.values)))
    return _Evaluation(np.array([st.t]), np.array([diff]), np.zeros(1), edges=0, termination=traj.termination)


def _eval_closedness(spec):
    traj = _traj(spec.scenario, "euler")
    if traj.geometry.dim != 2:
        raise ConfigurationError("closedness is a two-dimensional check")
    hist = vorticity_history(traj)
    return _Evaluation(hist["t"], np.zeros(hist["t"].shape), hist["sup"], edges=0, termination=traj.termination)


def _eval_vorticity_decay(spec):
    traj = _traj(spec.scenario, "euler")
    if traj.geometry.dim != 2:
        raise ConfigurationError("vorticity decay is a two-dimensional check")
    hist = vorticity_history(traj)
    return _Evaluation(hist["t"], hist["bound_L2"], hist["L2"], edges=0, termination=traj.termination,
                       reported={"C_final": float(hist["C"][-1])})


# -- canonical scenarios -----------------------------------------------------

TWO_PI = 2.0 * math.pi
F_WEIGHT = [{"k": [1], "cos": 0.3}]


def _geo1(grid=128, weighted=True, m=3):
    return {"dim": 1, "periods": [TWO_PI], "grid": [grid], "f_coeffs": F_WEIGHT if weighted else [], "m": m}


RHO0 = {"preset": "perturbed_uniform", "a": 0.2}
PHI0 = {"coeffs": [{"k": [1], "cos": 0.1}]}


def canonical_scenario(name: str) -> Scenario:
    """Named canonical configurations used by the default suite."""
    table: dict[str, Callable[[], Scenario]] = {
        "geodesic": lambda: Scenario(_geo1(), {"kind": "geodesic", "c": "inf", "rho0": RHO0, "phi0": PHI0,
                                               "solver": {"dt": 1e-3, "t_start": 0.5, "t_end": 1.0, "output_stride": 20}}),
        "geodesic_flat": lambda: Scenario(_geo1(weighted=False), {"kind": "geodesic", "c": "inf", "rho0": RHO0, "phi0": PHI0,
                                                                  "solver": {"dt": 1e-3, "t_start": 0.5, "t_end": 1.0, "output_stride": 20}}),
        "heat": lambda: Scenario(_geo1(), {"kind": "heat", "rho0": RHO0,
                                           "solver": {"dt": 1e-3, "t_end": 1.1, "output_stride": 20}}),
        "heat_flat": lambda: Scenario(_geo1(weighted=False), {"kind": "heat", "rho0": RHO0,
                                                              "solver": {"dt": 1e-3, "t_end": 1.1, "output_stride": 20}}),
        "langevin": lambda: Scenario(_geo1(64), {"kind": "langevin", "c": 1.0, "rho0": RHO0, "phi0": PHI0,
                                                 "solver": {"dt": 1e-3, "t_end": 0.5, "output_stride": 10}}),
        "langevin_flat": lambda: Scenario(_geo1(64, weighted=False), {"kind": "langevin", "c": 1.0, "rho0": RHO0, "phi0": PHI0,
                                                                      "solver": {"dt": 1e-3, "t_end": 0.5, "output_stride": 10}}),
        "euler": lambda: Scenario(_geo1(64), {"kind": "euler", "c": 1.0, "rho0": RHO0, "phi0": PHI0,
                                              "solver": {"dt": 1e-3, "t_end": 0.5, "output_stride": 10}}),
        "euler2d_gradient": lambda: Scenario(
            {"dim": 2, "periods": [TWO_PI, TWO_PI], "grid": [64, 64],
             "f_coeffs": [{"k": [1, 0], "cos": 0.2}, {"k": [0, 1], "cos": 0.1}], "m": 3},
            {"kind": "euler", "c": 1.0, "rho0": RHO0,
             "phi0": {"coeffs": [{"k": [1, 0], "cos": 0.1}, {"k": [0, 2], "sin": 0.1}]},
             "solver": {"dt": 1e-3, "t_end": 0.5, "output_stride": 10}}),
        "euler2d_shear": lambda: Scenario(
            {"dim": 2, "periods": [TWO_PI, TWO_PI], "grid": [64, 64],
             "f_coeffs": [{"k": [1, 0], "cos": 0.2}, {"k": [0, 1], "cos": 0.1}], "m": 3},
            {"kind": "euler", "c": 1.0, "rho0": RHO0,
             "u0": {"components": [[{"k": [0, 1], "sin": 1.0}], []]},
             "solver": {"dt": 1e-3, "t_end": 0.5, "output_stride": 10}}),
        "hopf_lax": lambda: Scenario({"dim": 1, "periods": [TWO_PI], "grid": [256], "f_coeffs": []},
                                     {"kind": "geodesic", "c": "inf", "rho0": {"preset": "uniform"}, "phi0": PHI0,
                                      "solver": {"dt": 1e-3, "t_end": 0.2, "output_stride": 200}}),
        "finite_dim": lambda: Scenario({}, {"kind": "finite_dim", "c": 1.0, "x0": [1.0], "v0": [0.0],
                                            "potential": {"A": [[1.0]]},
                                            "solver": {"dt": 1e-3, "t_end": 1.0, "output_stride": 10}}),
        "reference_m1": lambda: Scenario({}, {"kind": "reference", "c": 1.0, "m": 1, "t_end": 1.0, "dt": 1e-3}),
        "reference_m2": lambda: Scenario({}, {"kind": "reference", "c": 1.0, "m": 2, "t_end": 1.0, "dt": 1e-3}),
    }
    if name not in table:
        raise ConfigurationError(f"unknown canonical scenario {name!r}")
    return table[name]()


def _canon(name):
    return lambda: canonical_scenario(name)


HEAT_WINDOW = [0.1, 1.0]

CHECKS: dict[str, _CheckDef] = {
    # identities
    "geo_wm": _CheckDef("identity", ("geodesic",), _eval_geo_wm, _canon("geodesic"), TOL_FD, refine=True),
    "heat_wm": _CheckDef("identity", ("heat",), _eval_heat_wm, _canon("heat"), TOL_FD,
                         {"window": HEAT_WINDOW}, refine=True),
    "heat_cdkm": _CheckDef("identity", ("heat",), _eval_heat_cdkm, _canon("heat"), TOL_FD,
                           {"window": HEAT_WINDOW}, refine=True),
    "geo_dissipation": _CheckDef("identity", ("geodesic",), _eval_geo_dissipation, _canon("geodesic"), TOL_FD),
    "langevin_mf3": _CheckDef("identity", ("langevin",), _eval_langevin_mf3, _canon("langevin"), TOL_FD),
    "hamiltonian_2nd": _CheckDef("identity", ("langevin",), _eval_hamiltonian_2nd, _canon("langevin"), TOL_FD),
    "hamiltonian_1st": _CheckDef("identity", ("langevin",), _eval_hamiltonian_1st, _canon("langevin"), TOL_FD),
    "w_comparison": _CheckDef("identity", ("langevin",), _eval_w_comparison, _canon("langevin"), TOL_FD),
    "w_exp": _CheckDef("identity", ("langevin",), _eval_w_exp, _canon("langevin"), TOL_FD),
    "model_identity": _CheckDef("identity", ("reference",), _eval_model_identity, _canon("reference_m1"), TOL_MODEL,
                                residual="absolute", refinement_exempt=True),
    "model_residual": _CheckDef("identity", ("reference",), _eval_model_residual, lambda: None, TOL_MODEL,
                                residual="absolute", refinement_exempt=True),
    "fd_langevin": _CheckDef("identity", ("finite_dim",), _eval_fd_langevin, _canon("finite_dim"), TOL_FINITE_DIM),
    "fd_vh": _CheckDef("identity", ("finite_dim",), _eval_fd_vh, _canon("finite_dim"), TOL_FINITE_DIM),
    "fd_w": _CheckDef("identity", ("finite_dim",), _eval_fd_w, _canon("finite_dim"), TOL_FINITE_DIM),
    "euler_equivalence": _CheckDef("identity", ("euler", "langevin"), _eval_euler_equivalence, _canon("euler"), 1e-4,
                                   residual="absolute"),
    "potential_recovery": _CheckDef("identity", ("euler", "langevin"), _eval_potential_recovery, _canon("euler"), 1e-4,
                                    residual="absolute"),
    "hopf_lax": _CheckDef("identity", ("geodesic",), _eval_hopf_lax, _canon("hopf_lax"), 1e-3, residual="absolute"),
    # inequalities
    "geo_monotone": _CheckDef("inequality", ("geodesic",), _eval_geo_monotone, _canon("geodesic_flat"), SLACK_MONOTONE),
    "heat_monotone": _CheckDef("inequality", ("heat",), _eval_heat_monotone, _canon("heat_flat"), SLACK_MONOTONE,
                               {"window": HEAT_WINDOW}),
    "cs_bound": _CheckDef("inequality", ("heat",), _eval_cs_bound, _canon("heat"), SLACK, {"window": HEAT_WINDOW}),
    "eks_geo": _CheckDef("inequality", ("geodesic",), _eval_eks_geo, _canon("geodesic"), SLACK),
    "eks_grad": _CheckDef("inequality", ("heat",), _eval_eks_grad, _canon("heat"), SLACK, {"window": HEAT_WINDOW}),
    "eks_langevin": _CheckDef("inequality", ("langevin",), _eval_eks_langevin, _canon("langevin"), SLACK),
    "vorticity_decay": _CheckDef("inequality", ("euler",), _eval_vorticity_decay, _canon("euler2d_shear"), SLACK,
                                 relative_slack=True),
    "closedness": _CheckDef("inequality", ("euler",), _eval_closedness, _canon("euler2d_gradient"), SLACK),
    "whc_monotone": _CheckDef("inequality", ("langevin",), _eval_whc_monotone, _canon("langevin_flat"), SLACK),
    "w_comparison_monotone": _CheckDef("inequality", ("langevin",), _eval_w_comparison_monotone,
                                       _canon("langevin_flat"), SLACK),
}

# Where each identity's right-hand side comes from: (module function, output key).
RHS_SOURCES: dict[str, tuple[str, str]] = {
    "geo_wm": ("entropy.rhs_integrals", "geo_wm"),
    "heat_wm": ("entropy.rhs_integrals", "heat_wm"),
    "heat_cdkm": ("entropy.rhs_integrals", "heat_cdkm"),
    "geo_dissipation": ("entropy.rhs_integrals", "geo_dissipation"),
    "langevin_mf3": ("entropy.rhs_integrals", "langevin_mf3"),
    "hamiltonian_2nd": ("entropy.rhs_integrals", "hamiltonian_2nd"),
    "hamiltonian_1st": ("entropy.rhs_integrals", "hamiltonian_1st"),
    "w_comparison": ("entropy.rhs_integrals", "w_comparison"),
    "w_exp": ("entropy.rhs_integrals", "w_exp_H"),
    "model_identity": ("reference.model_closed_forms", "dW_model"),
    "model_residual": ("reference.model_residual", "mf1"),
    "fd_langevin": ("entropy.finite_dim_functionals", "rhs_5_1"),
    "fd_vh": ("entropy.finite_dim_functionals", "rhs_5_2_V"),
    "fd_w": ("entropy.finite_dim_functionals", "dissipation"),
    "euler_equivalence": ("flows.run_langevin", "phi"),
    "potential_recovery": ("flows.recover_potential", "phi"),
    "hopf_lax": ("flows.hopf_lax_oracle", "phi"),
}


# -- scoring -------------------------------------------------------------------


def _window_mask(t: np.ndarray, window, edges: int) -> np.ndarray:
    mask = np.ones(t.shape, dtype=bool)
    if edges:
        mask[:edges] = False
        mask[max(t.size - edges, 0):] = False
    if window is not None:
        lo, hi = float(window[0]), float(window[1])
        eps = 1e-9 * max(1.0, abs(hi))
        mask &= (t >= lo - eps) & (t <= hi + eps)
    return mask


def _l2(values: np.ndarray, t: np.ndarray) -> float:
    if values.size < 2:
        return float(np.sqrt(np.mean(values**2))) if values.size else math.nan
    return float(np.sqrt(np.trapezoid(values**2, t) if hasattr(np, "trapezoid") else np.trapz(values**2, t)))


def _score(spec: _Spec, ev: _Evaluation) -> VerificationReport:
    d = spec.definition
    window = spec.params.get("window")
    finite = np.isfinite(ev.lhs) & np.isfinite(ev.rhs)
    mask = _window_mask(ev.t, window, ev.edges) & finite
    min_points = MIN_WINDOW if ev.edges else 1
    t, lhs, rhs = ev.t[mask], ev.lhs[mask], ev.rhs[mask]
    used = [float(t[0]), float(t[-1])] if t.size else None
    if d.kind == "identity":
        res = _rel(lhs, rhs) if d.residual == "relative" else np.abs(lhs - rhs)
        sup = float(np.max(res)) if res.size else math.nan
        ok = sup <= spec.tolerance
    else:
        res = lhs - rhs
        scale = np.abs(lhs) if d.relative_slack else 1.0
        viol = np.maximum(-(res + spec.tolerance * scale), 0.0)
        sup = float(np.max(np.maximum(-res, 0.0))) if res.size else math.nan
        ok = bool(res.size) and bool(np.all(viol == 0.0))
    secondary = {}
    for name, (sl, sr, tol) in ev.secondary.items():
        m2 = mask & np.isfinite(sl) & np.isfinite(sr)
        r2 = _rel(sl[m2], sr[m2]) if d.residual == "relative" else np.abs(sl[m2] - sr[m2])
        s2 = float(np.max(r2)) if r2.size else math.nan
        secondary[name] = {"sup_residual": s2, "tolerance": tol, "pass": bool(r2.size) and s2 <= tol}
        ok = ok and secondary[name]["pass"]
    reported = dict(ev.reported)
    for name, (al, ar) in ev.alternatives.items():
        m2 = mask & np.isfinite(al) & np.isfinite(ar)
        r2 = _rel(al[m2], ar[m2])
        reported[f"{name}_sup_residual"] = float(np.max(r2)) if r2.size else math.nan
    if d.kind == "inequality" and res.size:
        reported["min_margin"] = float(np.min(res))
    if t.size < min_points:
        status = "inconclusive"
        reported["reason"] = f"usable window has {t.size} samples, need {min_points}"
    else:
        status = "pass" if ok else "fail"
    return VerificationReport(
        id=spec.id, name=spec.name, kind=d.kind, window=used, t=t, lhs=lhs, rhs=rhs, residual=res,
        sup_residual=sup, l2_residual=_l2(res, t) if res.size else math.nan, tolerance=spec.tolerance,
        status=status, termination=ev.termination, secondary=secondary, reported=reported,
    )


def _evaluate(spec: _Spec) -> VerificationReport:
    try:
        ev = spec.definition.evaluate(spec)
    except (NumericError, FloatingPointError) as exc:
        return _inconclusive(spec, f"numeric failure: {exc}")
    return _score(spec, ev)


def _inconclusive(spec: _Spec, reason: str, termination: str = "blow_up") -> VerificationReport:
    empty = np.zeros(0)
    return VerificationReport(spec.id, spec.name, spec.definition.kind, None, empty, empty, empty, empty,
                              math.nan, math.nan, spec.tolerance, "inconclusive", termination,
                              reported={"reason": reason})


def refinement_study(spec: _Spec, levels: int = 2) -> list[float]:
    """Coarse-to-fine ratios of the sup residual over ``levels`` resolutions (grid x2, dt /2 per step)."""
    spec = spec.resolved()
    if spec.scenario is None:
        raise DomainError(f"{spec.id} has no scenario to refine")
    sups = []
    for level in range(levels):
        sc = spec.scenario.refined(level)
        rep = _evaluate(type(spec)(spec.id, sc, spec.params, spec.tolerance, False, spec.label))
        if rep.status == "inconclusive":
            raise NumericError(f"refinement level {level} is inconclusive: {rep.reported.get('reason')}")
        sups.append(rep.sup_residual)
    return [a / b if b > 0 else math.inf for a, b in zip(sups[:-1], sups[1:])]


def run_check(spec: _Spec) -> VerificationReport:
    """Evaluate one check, including its refinement study when requested."""
    spec = spec.resolved()
    start = time.perf_counter()
    rep = _evaluate(spec)
    d = spec.definition
    if d.refinement_exempt:
        rep.refinement = "exempt"
    elif spec.refine and rep.status != "inconclusive":
        rep.refinement = "run"
        try:
            ratios = refinement_study(spec, levels=2)
        except NumericError as exc:
            rep.status = "inconclusive"
            rep.reported["reason"] = str(exc)
            ratios = []
        rep.refinement_ratios = ratios
        if rep.status == "pass" and not all(r >= REFINEMENT_GATE for r in ratios):
            rep.status = "fail"
    rep.elapsed = time.perf_counter() - start
    return rep


def check_identity(spec: IdentitySpec) -> VerificationReport:
    if spec.kind != "identity":
        raise ConfigurationError(f"{spec.id} is not an identity check")
    return run_check(spec)


def check_inequality(spec: InequalitySpec) -> VerificationReport:
    if spec.kind != "inequality":
        raise ConfigurationError(f"{spec.id} is not an inequality check")
    return run_check(spec)


# -- suites --------------------------------------------------------------------


def default_suite(wrong_sign: bool = False) -> list[_Spec]:
    """Every registered check on its canonical configuration."""
    specs: list[_Spec] = [
        make_spec("model_residual", params={"sign": -1.0} if wrong_sign else {}),
        make_spec("model_identity", label="model_identity[m=1]"),
        make_spec("model_identity", scenario=canonical_scenario("reference_m2"), label="model_identity[m=2]"),
        make_spec("geo_wm"),
        make_spec("heat_wm"),
        make_spec("heat_cdkm"),
        make_spec("cs_bound"),
        make_spec("geo_dissipation"),
        make_spec("langevin_mf3", label="langevin_mf3[alpha=reference]"),
        make_spec("langevin_mf3", params={"alpha": {"linear": [0.3, 0.1]}}, label="langevin_mf3[alpha=linear]"),
        make_spec("hamiltonian_2nd"),
        make_spec("hamiltonian_1st"),
        make_spec("w_comparison"),
        make_spec("w_exp"),
        make_spec("geo_monotone"),
        make_spec("heat_monotone"),
        make_spec("whc_monotone"),
        make_spec("w_comparison_monotone"),
        make_spec("euler_equivalence"),
        make_spec("potential_recovery"),
        make_spec("hopf_lax"),
        make_spec("closedness"),
        make_spec("vorticity_decay"),
        make_spec("fd_langevin"),
        make_spec("fd_vh"),
        make_spec("fd_w"),
        make_spec("eks_geo"),
        make_spec("eks_grad"),
        make_spec("eks_langevin"),
    ]
    return specs


SUITES = {"default": default_suite}


def run_suite(name: str = "default", only: Sequence[str] | None = None, wrong_sign: bool = False,
              workers: int = 1) -> list[VerificationReport]:
    if name not in SUITES:
        raise ConfigurationError(f"unknown suite {name!r}; known: {sorted(SUITES)}")
    specs = SUITES[name](wrong_sign=wrong_sign)
    if only:
        unknown = set(only) - set(CHECKS)
        if unknown:
            raise ConfigurationError(f"unknown check id(s) {sorted(unknown)}")
        specs = [s for s in specs if s.id in set(only)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run_check, specs))
    return [run_check(s) for s in specs]


def summary_table(reports: Sequence[VerificationReport]) -> str:
    width = max([len(r.name) for r in reports] + [5])
    lines = [f"{'check':<{width}}  {'status':<12}  {'sup_residual':>12}  {'tolerance':>9}  ratios"]
    for r in reports:
        ratios = ",".join(f"{x:.3g}" for x in r.refinement_ratios) or r.refinement
        lines.append(f"{r.name:<{width}}  {r.status:<12}  {r.sup_residual:>12.3e}  {r.tolerance:>9.1e}  {ratios}")
    counts = {s: sum(r.status == s for r in reports) for s in ("pass", "fail", "inconclusive")}
    lines.append(f"{counts['pass']} pass, {counts['fail']} fail, {counts['inconclusive']} inconclusive")
    return "\n".join(lines)
