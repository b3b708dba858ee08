"""Time integration of the density flows on a weighted torus.

Every flow advances grid arrays with a fixed-step fourth-order Runge-Kutta
scheme.  Right-hand sides are dealiased by the two-thirds rule so the state
stays inside the retained band.  The heat flow treats the Laplacian exactly
through an integrating factor, which keeps the step independent of the grid
size.

The transport convention throughout is ``d_t rho + div_mu(rho grad phi) = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import expm

from .entropy import Potential
from .errors import ConfigurationError, DomainError
from .geometry import ScalarField, TorusGeometry, VectorField, torus_distance

__all__ = [
    "SolverConfig",
    "FlowState",
    "FlowTrajectory",
    "run_heat",
    "run_geodesic",
    "run_langevin",
    "run_euler_damped",
    "vorticity",
    "closedness_defect",
    "vorticity_history",
    "hopf_lax_oracle",
    "recover_potential",
    "FiniteDimTrajectory",
    "run_finite_dim",
    "linear_finite_dim_solution",
    "normalize_density",
    "model_patch_data",
]

MASS_TOL = 1e-8
CFL_LIMIT = 2.5  # inside the RK4 stability region on both axes


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    t_end: float
    t_start: float = 0.0
    output_stride: int = 1
    rho_floor: float = 1e-10
    hess_ceiling: float = 1e3
    dealias: bool = True
    tail_limit: float = 1e-3

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigurationError("dt must be positive")
        if not self.dt < self.t_end - self.t_start:
            raise ConfigurationError("dt must be shorter than the run")
        if int(self.output_stride) < 1:
            raise ConfigurationError("output_stride must be at least 1")
        if self.rho_floor <= 0 or self.hess_ceiling <= 0:
            raise ConfigurationError("floor and ceiling must be positive")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_start) / self.dt))

    def refined(self, level: int = 1) -> "SolverConfig":
        return replace(self, dt=self.dt / 2**level)


@dataclass(frozen=True, eq=False)
class FlowState:
    t: float
    rho: ScalarField
    kind: str
    phi: ScalarField | None = None
    u: VectorField | None = None
    c: float | None = None


@dataclass(eq=False)
class FlowTrajectory:
    kind: str
    geometry: TorusGeometry
    config: SolverConfig
    states: list[FlowState]
    c: float | None = None
    termination: str = "completed"
    diagnostics: dict[str, list[float]] = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.t for s in self.states])

    @property
    def output_step(self) -> float:
        return self.config.dt * self.config.output_stride

    def diagnostic_table(self) -> dict[str, np.ndarray]:
        return {"t": self.times, **{k: np.asarray(v) for k, v in self.diagnostics.items()}}


def normalize_density(geo: TorusGeometry, values) -> ScalarField:
    values = np.asarray(values, dtype=float) * np.ones(geo.shape)
    if np.any(values <= 0):
        raise DomainError("initial density must be positive")
    return ScalarField(geo, values / geo.integrate(values))


# -- shared integrator -------------------------------------------------------


def _kmax(geo: TorusGeometry) -> float:
    return max((N // 3) * 2.0 * math.pi / L for N, L in zip(geo.grid_sizes, geo.periods))


def _rk4(rhs: Callable, y: list[np.ndarray], t: float, dt: float) -> list[np.ndarray]:
    k1 = rhs(t, y)
    k2 = rhs(t + 0.5 * dt, [a + 0.5 * dt * b for a, b in zip(y, k1)])
    k3 = rhs(t + 0.5 * dt, [a + 0.5 * dt * b for a, b in zip(y, k2)])
    k4 = rhs(t + dt, [a + dt * b for a, b in zip(y, k3)])
    return [a + dt / 6.0 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]


def _march(kind, geo, cfg, y0, step, to_state, c=None) -> FlowTrajectory:
    traj = FlowTrajectory(kind, geo, cfg, [], c=c,
                          diagnostics={k: [] for k in ("min_rho", "mass", "hess_sup", "vorticity_L2", "vorticity_sup")})
    y = [np.array(a, dtype=float) for a in y0]
    t = cfg.t_start
    for n in range(cfg.n_steps + 1):
        if n % cfg.output_stride == 0:
            reason = _record(traj, to_state(t, y))
            if reason:
                traj.termination = reason
                break
        if n == cfg.n_steps:
            break
        y = step(y, t, cfg.dt)
        t = cfg.t_start + (n + 1) * cfg.dt
        if not all(np.all(np.isfinite(a)) for a in y):
            traj.termination = "blow_up"
            break
        if np.min(y[0]) <= cfg.rho_floor:
            traj.termination = "rho_floor"
            break
    return traj


def _record(traj: FlowTrajectory, st: FlowState) -> str | None:
    geo, cfg = traj.geometry, traj.config
    rho = st.rho.values
    if np.min(rho) <= cfg.rho_floor:
        return "rho_floor"
    mass = geo.integrate(rho)
    if abs(mass - 1.0) > MASS_TOL:
        return "blow_up"
    hess_sup = math.nan
    field_to_watch = None
    if st.phi is not None and st.kind != "heat":
        hess_sup = max(float(np.max(np.abs(geo.d2(st.phi.values, i, j))))
                       for i in range(geo.dim) for j in range(i, geo.dim))
        field_to_watch = st.phi.values
    elif st.u is not None:
        hess_sup = max(float(np.max(np.abs(geo.d(st.u.components[i], j))))
                       for i in range(geo.dim) for j in range(geo.dim))
        field_to_watch = st.u.components[0]
    if hess_sup > cfg.hess_ceiling:
        return "hess_ceiling"
    if field_to_watch is not None and geo.tail_ratio(field_to_watch) > cfg.tail_limit:
        return "blow_up"
    w2 = wsup = 0.0
    if st.u is not None and geo.dim == 2:
        w = vorticity(st).values
        w2 = math.sqrt(float(np.sum(w * w)) * geo.cell_volume)
        wsup = float(np.max(np.abs(w)))
    traj.states.append(st)
    d = traj.diagnostics
    d["min_rho"].append(float(np.min(rho)))
    d["mass"].append(mass)
    d["hess_sup"].append(hess_sup)
    d["vorticity_L2"].append(w2)
    d["vorticity_sup"].append(wsup)
    return None


def _proj(geo, cfg):
    return geo.project if cfg.dealias else (lambda a: a)


def _transport(geo, P, rho, vel):
    """``-div_mu(rho * vel)`` with the flux dealiased before differentiation."""
    out = 0.0
    for i in range(geo.dim):
        flux = P(rho * vel[i])
        out = out + geo.d(flux, i) - geo.grad_f[i] * flux
    return -P(out)


def _check_cfl(rate: float, cfg: SolverConfig, what: str) -> None:
    if cfg.dt * rate > CFL_LIMIT:
        raise ConfigurationError(f"dt={cfg.dt} violates the {what} stability bound (dt * rate = {cfg.dt * rate:.3g})")


# -- flows -------------------------------------------------------------------


def run_heat(rho0: ScalarField, cfg: SolverConfig) -> FlowTrajectory:
    """Forward heat flow ``d_t rho = L rho``.

    Snapshots carry ``phi = -(log rho + 1)`` so the transport equation holds
    in forward time; reading the trajectory backwards gives the gradient flow
    with potential ``log rho + 1``.
    """
    geo = rho0.geometry
    _check_initial(rho0)
    P = _proj(geo, cfg)
    _check_cfl(_kmax(geo) * max(float(np.max(np.abs(g))) for g in geo.grad_f), cfg, "weight drift")
    E_half = np.exp(-geo._k2 * cfg.dt / 2.0)
    keep = geo._keep if cfg.dealias else 1.0

    def drift_hat(r_hat):
        r = geo.ifft(r_hat)
        out = -sum(geo.grad_f[i] * geo.d(r, i) for i in range(geo.dim))
        return keep * geo.fft(out)

    def step(y, t, dt):
        v = keep * geo.fft(y[0])
        a = dt * drift_hat(v)
        b = dt * drift_hat(E_half * (v + a / 2))
        c = dt * drift_hat(E_half * v + b / 2)
        d = dt * drift_hat(E_half**2 * v + E_half * c)
        v = E_half**2 * v + (E_half**2 * a + 2 * E_half * (b + c) + d) / 6.0
        return [geo.ifft(v)]

    def to_state(t, y):
        r = ScalarField(geo, y[0])
        phi = ScalarField(geo, -(np.log(np.maximum(y[0], 1e-300)) + 1.0))
        return FlowState(t, r, "heat", phi=phi)

    return _march("heat", geo, cfg, [P(rho0.values)], step, to_state)


def _potential_rhs(geo, P, c):
    gamma = 0.0 if c is None else 1.0 / c**2

    def rhs(t, y):
        rho, phi = y
        gp = [geo.d(phi, i) for i in range(geo.dim)]
        d_rho = _transport(geo, P, rho, gp)
        d_phi = -0.5 * P(sum(g * g for g in gp))
        if gamma:
            d_phi = d_phi + gamma * P(-phi + np.log(rho) + 1.0)
        return [d_rho, d_phi]

    return rhs


def run_geodesic(rho0: ScalarField, phi0: ScalarField, cfg: SolverConfig) -> FlowTrajectory:
    """Transport coupled to ``d_t phi + |grad phi|^2 / 2 = 0``."""
    return _run_potential_flow(rho0, phi0, None, cfg)


def run_langevin(rho0: ScalarField, phi0: ScalarField, c: float, cfg: SolverConfig) -> FlowTrajectory:
    """Transport coupled to ``c^2 (d_t phi + |grad phi|^2 / 2) = -phi + log rho + 1``."""
    if not (0 < c < math.inf):
        raise DomainError("c must be finite and positive")
    if cfg.dt > 0.5 * c * c:
        raise ConfigurationError(f"dt={cfg.dt} exceeds c^2/2 = {0.5 * c * c}")
    return _run_potential_flow(rho0, phi0, c, cfg)


def _pressure_rate(kmax: float, c: float | None) -> float:
    if c is None:
        return 0.0
    return (math.sqrt(1.0 + 4.0 * c * c * kmax * kmax) - 1.0) / (2.0 * c * c)


def _run_potential_flow(rho0, phi0, c, cfg):
    geo = rho0.geometry
    _check_initial(rho0)
    P = _proj(geo, cfg)
    speed = max(float(np.max(np.abs(geo.d(phi0.values, i)))) for i in range(geo.dim))
    k = _kmax(geo)
    _check_cfl(k * speed + _pressure_rate(k, c), cfg, "advection")
    rhs = _potential_rhs(geo, P, c)
    kind = "geodesic" if c is None else "langevin"

    def to_state(t, y):
        return FlowState(t, ScalarField(geo, y[0]), kind, phi=ScalarField(geo, y[1]), c=c)

    return _march(kind, geo, cfg, [P(rho0.values), P(phi0.values)],
                  lambda y, t, dt: _rk4(rhs, y, t, dt), to_state, c=c)


def run_euler_damped(rho0: ScalarField, u0: VectorField, c: float, cfg: SolverConfig) -> FlowTrajectory:
    """Compressible Euler with damping ``-u/c^2`` and forcing ``grad(log rho)/c^2``.

    The advection term uses the rotational form ``grad(|u|^2/2) - u x omega``
    so that a curl-free velocity stays curl-free to rounding.
    """
    if not (0 < c < math.inf):
        raise DomainError("c must be finite and positive")
    if cfg.dt > 0.5 * c * c:
        raise ConfigurationError(f"dt={cfg.dt} exceeds c^2/2 = {0.5 * c * c}")
    geo = rho0.geometry
    _check_initial(rho0)
    P = _proj(geo, cfg)
    gamma = 1.0 / c**2
    k = _kmax(geo)
    speed = max(float(np.max(np.abs(a))) for a in u0.components)
    _check_cfl(k * speed + _pressure_rate(k, c), cfg, "advection")

    def rhs(t, y):
        rho, us = y[0], y[1:]
        d_rho = _transport(geo, P, rho, us)
        energy = P(0.5 * sum(a * a for a in us))
        forcing = P(np.log(rho))
        out = []
        for i in range(geo.dim):
            du = -geo.d(energy, i) - gamma * us[i] + gamma * geo.d(forcing, i)
            out.append(du)
        if geo.dim == 2:
            w = geo.d(us[1], 0) - geo.d(us[0], 1)
            out[0] = out[0] + P(us[1] * w)
            out[1] = out[1] - P(us[0] * w)
        return [d_rho] + [P(a) for a in out]

    def to_state(t, y):
        return FlowState(t, ScalarField(geo, y[0]), "euler", u=VectorField(geo, tuple(y[1:])), c=c)

    y0 = [P(rho0.values)] + [P(a) for a in u0.components]
    return _march("euler", geo, cfg, y0, lambda y, t, dt: _rk4(rhs, y, t, dt), to_state, c=c)


def _check_initial(rho0: ScalarField) -> None:
    if np.any(rho0.values <= 0):
        raise DomainError("initial density must be positive")
    mass = rho0.geometry.integrate(rho0.values)
    if abs(mass - 1.0) > MASS_TOL:
        raise DomainError(f"initial density has mass {mass}, expected 1")


# -- structural diagnostics --------------------------------------------------


def vorticity(state: FlowState | VectorField) -> ScalarField:
    u = state.u if isinstance(state, FlowState) else state
    geo = u.geometry
    if geo.dim == 1:
        return ScalarField(geo, np.zeros(geo.shape))
    return ScalarField(geo, geo.d(u.components[1], 0) - geo.d(u.components[0], 1))


def closedness_defect(state: FlowState | VectorField) -> float:
    return float(np.max(np.abs(vorticity(state).values)))


def vorticity_history(traj: FlowTrajectory) -> dict[str, np.ndarray]:
    """Vorticity norms with the exponential bound built from the running velocity-gradient sup.

    ``C(t)`` is the running maximum over snapshots of the largest pointwise
    Frobenius norm of ``grad u``.
    """
    geo = traj.geometry
    gamma = 1.0 / traj.c**2
    L2, sup, C = [], [], []
    running = 0.0
    for st in traj.states:
        w = vorticity(st).values
        L2.append(math.sqrt(float(np.sum(w * w)) * geo.cell_volume))
        sup.append(float(np.max(np.abs(w))))
        frob = sum(geo.d(st.u.components[i], j) ** 2 for i in range(geo.dim) for j in range(geo.dim))
        running = max(running, float(np.sqrt(np.max(frob))))
        C.append(running)
    t = traj.times - traj.times[0]
    L2, sup, C = map(np.array, (L2, sup, C))
    return {"t": traj.times, "L2": L2, "sup": sup, "C": C, "bound_L2": L2[0] * np.exp((C - gamma) * t)}


# -- independent oracles -----------------------------------------------------


def _fourier_refine(geo: TorusGeometry, values: np.ndarray, factor: int) -> tuple[list[np.ndarray], np.ndarray]:
    """Band-limited interpolation of a grid function onto a grid ``factor`` times finer."""
    if factor == 1:
        return [c for c in geo.coords], values
    fine = tuple(N * factor for N in geo.grid_sizes)
    spec = np.fft.fftn(values)
    out = np.zeros(fine, dtype=complex)
    slices_src, slices_dst = [], []
    idx = [np.fft.fftfreq(N, d=1.0 / N).astype(int) for N in geo.grid_sizes]
    src_grid = np.meshgrid(*[np.arange(N) for N in geo.grid_sizes], indexing="ij")
    dst_index = tuple(np.mod(np.meshgrid(*idx, indexing="ij")[a], fine[a]) for a in range(geo.dim))
    out[dst_index] = spec[tuple(src_grid)]
    refined = np.real(np.fft.ifftn(out)) * factor**geo.dim
    axes = [np.arange(N) * (L / N) for L, N in zip(geo.periods, fine)]
    return list(np.meshgrid(*axes, indexing="ij")), refined


def hopf_lax_oracle(phi0: ScalarField, t: float, refine: int = 1) -> ScalarField:
    """Brute-force ``min_y phi0(y) + d(x, y)^2 / (2t)`` over every node ``y``.

    ``refine > 1`` searches over a band-limited interpolation of ``phi0`` on
    a finer grid of candidate points.
    """
    if t <= 0:
        raise DomainError("Hopf-Lax needs t > 0")
    geo = phi0.geometry
    ycoords, yvals = _fourier_refine(geo, phi0.values, refine)
    ypts = np.stack([c.ravel() for c in ycoords], axis=-1)
    yvals = yvals.ravel()
    xpts = np.stack([c.ravel() for c in geo.coords], axis=-1)
    out = np.empty(xpts.shape[0])
    chunk = max(1, 4_000_000 // max(1, ypts.shape[0]))
    for s in range(0, xpts.shape[0], chunk):
        d = torus_distance(xpts[s:s + chunk, None, :], ypts[None, :, :], geo.periods)
        out[s:s + chunk] = np.min(yvals[None, :] + d * d / (2.0 * t), axis=1)
    return ScalarField(geo, out.reshape(geo.shape))


def recover_potential(traj: FlowTrajectory, phi0: ScalarField, tol: float = 1e-8) -> list[ScalarField]:
    """Rebuild the potential from an Euler trajectory by integrating along time.

    ``phi(t) = e^{-g t} phi0 + e^{-g t} int_0^t e^{g s} (g (log rho + 1) - |u|^2/2) ds``
    with ``g = 1/c^2``; the time integral is a trapezoid over snapshots.
    """
    if traj.kind != "euler":
        raise DomainError("needs an Euler trajectory")
    first = traj.states[0]
    if closedness_defect(first) > tol:
        raise DomainError("initial velocity is not a gradient")
    geo = traj.geometry
    gamma = 1.0 / traj.c**2
    t = traj.times - traj.times[0]
    out = [phi0]
    acc = np.zeros(geo.shape)
    prev = None
    for j, st in enumerate(traj.states):
        g = math.exp(gamma * t[j]) * (gamma * (np.log(st.rho.values) + 1.0)
                                       - 0.5 * sum(a * a for a in st.u.components))
        if prev is not None:
            acc = acc + 0.5 * (t[j] - t[j - 1]) * (g + prev)
            out.append(ScalarField(geo, math.exp(-gamma * t[j]) * (phi0.values + acc)))
        prev = g
    return out


def model_patch_data(geo: TorusGeometry, u0: float = 1.0, beta0: float = 0.0,
                     background: float = 1e-14) -> tuple[ScalarField, ScalarField]:
    """Gaussian reference profile centred in a large 1-D box.

    The relative background keeps ``log rho`` bounded in the far field; it
    sits below the Gaussian's own tail cut so the core is unaffected.
    """
    if geo.dim != 1 or not geo.weight_is_constant:
        raise DomainError("the Gaussian patch lives on a flat 1-D box")
    x = geo.coords[0] - geo.periods[0] / 2
    peak = (4.0 * math.pi * u0 * u0) ** -0.5
    rho = peak * np.exp(-x * x / (4.0 * u0 * u0)) + background * peak
    rho = rho / geo.integrate(rho)
    return ScalarField(geo, rho), ScalarField(geo, np.full(geo.shape, beta0))


# -- finite-dimensional system ----------------------------------------------


@dataclass(eq=False)
class FiniteDimTrajectory:
    times: np.ndarray
    x: np.ndarray
    v: np.ndarray
    potential: Potential
    c: float


def run_finite_dim(x0: Sequence[float], v0: Sequence[float], V: Potential, c: float,
                   cfg: SolverConfig) -> FiniteDimTrajectory:
    """``x' = v/c``, ``v' = -v/c^2 + grad V(x)/c`` by RK4."""
    if not (0 < c < math.inf):
        raise DomainError("c must be finite and positive")
    x = np.asarray(x0, dtype=float)
    v = np.asarray(v0, dtype=float)

    def rhs(t, y):
        return [y[1] / c, -y[1] / c**2 + V.grad(y[0]) / c]

    ts, xs, vs = [], [], []
    y = [x, v]
    for n in range(cfg.n_steps + 1):
        if n % cfg.output_stride == 0:
            ts.append(cfg.t_start + n * cfg.dt)
            xs.append(y[0].copy())
            vs.append(y[1].copy())
        if n < cfg.n_steps:
            y = _rk4(rhs, y, cfg.t_start + n * cfg.dt, cfg.dt)
    return FiniteDimTrajectory(np.array(ts), np.array(xs), np.array(vs), V, c)


def linear_finite_dim_solution(x0, v0, V: Potential, c: float, times) -> tuple[np.ndarray, np.ndarray]:
    """Matrix-exponential solution for a quadratic potential (affine system)."""
    if V.A is None:
        raise DomainError("closed-form solution needs a quadratic potential")
    d = V.A.shape[0]
    M = np.zeros((2 * d + 1, 2 * d + 1))
    M[:d, d:2 * d] = np.eye(d) / c
    M[d:2 * d, :d] = V.A / c
    M[d:2 * d, d:2 * d] = -np.eye(d) / c**2
    M[d:2 * d, 2 * d] = V.b / c
    z0 = np.concatenate([np.asarray(x0, float), np.asarray(v0, float), [1.0]])
    t0 = times[0]
    Z = np.array([expm(M * (t - t0)) @ z0 for t in times])
    return Z[:, :d], Z[:, d:2 * d]
