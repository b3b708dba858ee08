"""Exact Gaussian solution of the transport / deformed Hamilton-Jacobi pair on R^m.

With ``u(t)`` solving ``c^2 u'' + u' = -1/(2u)``, ``alpha = u'/u`` and ``beta``
solving ``c^2 beta' = -beta - m log u - (m/2) log(4 pi) + 1``, the pair

    rho_m = (4 pi u^2)^(-m/2) exp(-|x|^2 / (4 u^2)),   phi_m = alpha |x|^2 / 2 + beta

solves the flow exactly.  The limits c = 0 and c = infinity have explicit
``u``; everything else comes from a fixed-step RK4 solve of the ODE.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError
from .series import differentiate_series

__all__ = [
    "ReferenceModel",
    "solve_u_beta",
    "geodesic_preset",
    "gradient_preset",
    "eval_model",
    "model_residual",
    "model_closed_forms",
    "model_identity_residual",
]

LOG4PI = math.log(4.0 * math.pi)


@dataclass(frozen=True, eq=False)
class ReferenceModel:
    c: float
    m: int
    t: np.ndarray
    u: np.ndarray
    up: np.ndarray
    beta: np.ndarray
    T_model: float
    preset: str = "ode"
    T: float | None = None  # terminal time of the c = 0 preset

    @property
    def alpha(self) -> np.ndarray:
        return self.up / self.u

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    @property
    def gamma(self) -> float:
        return 0.0 if math.isinf(self.c) else (math.inf if self.c == 0 else 1.0 / self.c**2)

    def state_at(self, t: float) -> tuple[float, float, float]:
        """``(u, u', beta)`` at an arbitrary time inside the horizon."""
        if t >= self.T_model:
            raise DomainError(f"t={t} is beyond the model horizon {self.T_model}")
        if self.preset == "geodesic":
            if t <= 0:
                raise DomainError("the u = t model needs t > 0")
            return t, 1.0, 0.0
        if self.preset == "gradient":
            s = self.T - t
            return math.sqrt(s), -0.5 / math.sqrt(s), -0.5 * self.m * math.log(4.0 * math.pi * s) + 1.0
        j = int(np.clip(round((t - self.t[0]) / self.dt), 0, self.t.size - 1))
        y = np.array([self.u[j], self.up[j], self.beta[j]])
        h = t - self.t[j]
        if h != 0.0:
            y = _rk4_step(y, h, self.c, self.m)
        return float(y[0]), float(y[1]), float(y[2])

    def second_derivatives(self, u: float, up: float, beta: float) -> tuple[float, float]:
        """``(u'', beta')`` from the defining equations."""
        if self.preset == "geodesic":
            return 0.0, 0.0
        if self.preset == "gradient":
            s = u * u
            return -0.25 / (s * u), 0.5 * self.m / s
        return tuple(_ode_rhs(np.array([u, up, beta]), self.c, self.m)[1:])


def _ode_rhs(y: np.ndarray, c: float, m: int) -> np.ndarray:
    u, up, beta = y
    c2 = c * c
    return np.array([
        up,
        (-up - 0.5 / u) / c2,
        (-beta - m * math.log(u) - 0.5 * m * LOG4PI + 1.0) / c2,
    ])


def _rk4_step(y: np.ndarray, h: float, c: float, m: int) -> np.ndarray:
    k1 = _ode_rhs(y, c, m)
    k2 = _ode_rhs(y + 0.5 * h * k1, c, m)
    k3 = _ode_rhs(y + 0.5 * h * k2, c, m)
    k4 = _ode_rhs(y + h * k3, c, m)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def solve_u_beta(c: float, m: int = 1, u0: float = 1.0, up0: float = 0.0, beta0: float = 0.0,
                 t_end: float = 1.0, dt: float = 1e-3, u_floor: float = 1e-6) -> ReferenceModel:
    """Sample the reference ODE on ``[0, t_end]``.

    ``c = inf`` and ``c = 0`` dispatch to the explicit presets (``u = t`` and
    ``u = sqrt(t_end - t)``).  Integration stops before ``u`` would fall
    under ``u_floor`` and the stopping time becomes ``T_model``.
    """
    if u0 <= 0:
        raise DomainError("u0 must be positive")
    if m < 1:
        raise DomainError("m must be a positive integer")
    if math.isinf(c):
        return geodesic_preset(m, t_end=t_end, dt=dt)
    if c == 0:
        return gradient_preset(m, T=t_end, dt=dt, u_floor=u_floor)
    if c < 0:
        raise DomainError("c must be nonnegative")
    n = int(round(t_end / dt))
    y = np.array([u0, up0, beta0], dtype=float)
    rows = [y]
    T_model = math.inf
    for k in range(n):
        try:
            nxt = _rk4_step(y, dt, c, m)
        except (ValueError, ZeroDivisionError):  # an inner stage left u > 0
            nxt = np.full(3, np.nan)
        if not np.all(np.isfinite(nxt)) or nxt[0] <= u_floor:
            T_model = (k + 1) * dt
            break
        y = nxt
        rows.append(y)
    arr = np.array(rows)
    t = np.arange(arr.shape[0]) * dt
    return ReferenceModel(float(c), int(m), t, arr[:, 0], arr[:, 1], arr[:, 2], T_model)


def geodesic_preset(m: int, t_end: float = 1.0, dt: float = 1e-3, t_start: float | None = None) -> ReferenceModel:
    """``u = t``; the grid starts one step after zero where ``u`` vanishes."""
    t0 = dt if t_start is None else t_start
    t = t0 + np.arange(int(round((t_end - t0) / dt)) + 1) * dt
    return ReferenceModel(math.inf, int(m), t, t.copy(), np.ones_like(t), np.zeros_like(t), math.inf, "geodesic")


def gradient_preset(m: int, T: float = 1.0, dt: float = 1e-3, u_floor: float = 1e-6) -> ReferenceModel:
    """``u = sqrt(T - t)``, sampled strictly before ``u`` reaches ``u_floor``."""
    n = int(math.floor((T - u_floor**2) / dt))
    t = np.arange(n) * dt
    t = t[T - t > u_floor**2]
    s = T - t
    u = np.sqrt(s)
    beta = -0.5 * m * np.log(4.0 * math.pi * s) + 1.0
    return ReferenceModel(0.0, int(m), t, u, -0.5 / u, beta, float(T), "gradient", T=float(T))


# -- closed-form evaluation --------------------------------------------------


def _fields(m: int, u: float, up: float, beta: float, x: np.ndarray) -> dict[str, np.ndarray]:
    r2 = np.sum(x * x, axis=-1)
    alpha = up / u
    log_rho = -0.5 * m * math.log(4.0 * math.pi * u * u) - r2 / (4.0 * u * u)
    return {
        "rho": np.exp(log_rho),
        "log_rho": log_rho,
        "phi": 0.5 * alpha * r2 + beta,
        "grad_phi": alpha * x,
        "lap_phi": np.full(r2.shape, m * alpha),
        "grad_log_rho": -x / (2.0 * u * u),
        "alpha": alpha,
        "r2": r2,
    }


def eval_model(model: ReferenceModel, t: float, points) -> dict[str, np.ndarray]:
    """Closed-form ``rho_m``, ``phi_m`` and their derivatives at ``points`` (shape ``(..., m)``)."""
    x = np.asarray(points, dtype=float)
    if x.shape[-1] != model.m:
        x = x[..., None] if model.m == 1 else x
    u, up, beta = model.state_at(t)
    upp, betap = model.second_derivatives(u, up, beta)
    out = _fields(model.m, u, up, beta, x)
    alpha = out["alpha"]
    alphap = upp / u - alpha * alpha
    r2 = out["r2"]
    out["dt_rho"] = out["rho"] * (-model.m * alpha + r2 * up / (2.0 * u**3))
    out["dt_phi"] = 0.5 * alphap * r2 + betap
    out["hess_phi_minus_alpha"] = np.zeros(r2.shape)
    return out


def model_residual(model: ReferenceModel, n_samples: int = 100, radius: float = 4.0,
                   t_range: tuple[float, float] | None = None, seed: int = 0, sign: float = 1.0,
                   fd_step: float = 1e-3) -> dict[str, float]:
    """Sup residuals of the transport and deformed HJ equations at random spacetime points.

    Time derivatives are taken by a centered finite difference of the closed
    forms evaluated on the sampled ``u`` and ``beta``, so any inconsistency in
    the ODE solution shows up here.  ``sign = -1`` flips the divergence term
    (the adjoint sign written literally), which must break the transport
    equation.

    The transport residual is reported both in absolute form and divided by
    ``rho_m`` (``rel``), the scale-free form used for pass/fail because the
    Gaussian spans many orders of magnitude.
    """
    rng = np.random.default_rng(seed)
    lo, hi = t_range if t_range is not None else (model.t[0], min(model.t[-1], 0.5))
    if model.preset == "geodesic":
        lo = max(lo, 0.1)  # keep the 1/t scale resolvable by the time stencil
    h = fd_step
    lo, hi = lo + 2 * h, hi - 2 * h
    if model.preset == "gradient":
        hi = min(hi, model.T - 4 * h)
    times = rng.uniform(lo, hi, size=n_samples)
    dirs = rng.normal(size=(n_samples, model.m))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    radii = radius * rng.uniform(0.0, 1.0, size=n_samples) ** (1.0 / model.m)
    points = dirs * radii[:, None]

    mf1_abs = mf1_rel = mf2 = 0.0
    weights = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / (12.0 * h)
    for t, x in zip(times, points):
        u, up, beta = model.state_at(t)
        fx = _fields(model.m, u, up, beta, x)
        if model.preset == "ode":
            logs, phis = [], []
            for k in range(-2, 3):
                fk = _fields(model.m, *model.state_at(t + k * h), x)
                logs.append(fk["log_rho"])
                phis.append(fk["phi"])
            dt_log_rho = float(np.dot(weights, logs))
            dt_phi = float(np.dot(weights, phis))
        else:
            # explicit presets: exact time derivatives of the closed forms
            ev = eval_model(model, t, x)
            dt_log_rho = float(ev["dt_rho"] / ev["rho"])
            dt_phi = float(ev["dt_phi"])
        # div(rho grad phi) / rho = lap phi + grad phi . grad log rho
        div_over_rho = float(fx["lap_phi"] + np.dot(fx["grad_phi"], fx["grad_log_rho"]))
        r1 = dt_log_rho + sign * div_over_rho
        mf1_rel = max(mf1_rel, abs(r1))
        mf1_abs = max(mf1_abs, abs(r1) * float(fx["rho"]))
        hj = dt_phi + 0.5 * float(np.dot(fx["grad_phi"], fx["grad_phi"]))
        if model.preset == "geodesic":
            r2 = hj
        elif model.preset == "gradient":
            r2 = float(fx["phi"] - fx["log_rho"] - 1.0)
        else:
            r2 = model.c**2 * hj + float(fx["phi"] - fx["log_rho"] - 1.0)
        mf2 = max(mf2, abs(r2))
    return {"mf1": mf1_rel, "mf1_abs": mf1_abs, "mf2": mf2, "samples": n_samples}


def gaussian_second_moment(m: int, u: float) -> float:
    """``int |x|^2 rho_m dx`` by radial quadrature (exact value ``2 m u^2``)."""
    area = 2.0 * math.pi ** (m / 2) / special.gamma(m / 2)

    def integrand(r):
        return r ** (m + 1) * (4.0 * math.pi) ** (-m / 2) * math.exp(-r * r / 4.0) * area

    val, _ = integrate.quad(integrand, 0.0, math.inf, epsabs=1e-14, epsrel=1e-13)
    return val * u * u  # radial scaling x = u y


def model_closed_forms(model: ReferenceModel) -> dict[str, np.ndarray]:
    """Entropy, Fisher information, kinetic energy and Hamiltonian along the samples.

    ``H`` uses a quadrature of the kinetic energy; ``H_alt`` is the candidate
    ``m c^2 u'^2 / 2 + Ent`` kept for comparison.
    """
    m, u, up = model.m, model.u, model.up
    alpha = up / u
    ent = -0.5 * m * (1.0 + np.log(4.0 * math.pi * u * u))
    fisher = m / (2.0 * u * u)
    kin_closed = 2.0 * m * up * up
    kin_num = alpha**2 * gaussian_second_moment(m, 1.0) * u * u
    if math.isinf(model.c):
        H = H_alt = np.full_like(u, np.nan)
    else:
        H = 0.5 * model.c**2 * kin_num + ent
        H_alt = 0.5 * m * model.c**2 * up * up + ent
    return {
        "t": model.t,
        "Ent": ent,
        "Fisher": fisher,
        "Kin": kin_closed,
        "Kin_quadrature": kin_num,
        "H": H,
        "H_alt": H_alt,
        "dW_model": -m * alpha**2,
    }


def model_identity_residual(model: ReferenceModel) -> dict[str, np.ndarray]:
    """Second-order entropy identity of the Gaussian model.

    ``lhs = Ent'' + (2 alpha + 1/c^2) Ent' - Fisher/c^2`` with the time
    derivatives taken by finite differences of the sampled entropy, and
    ``rhs = -m alpha^2``.  ``lhs_chain`` replaces the differences by the
    closed chain ``Ent' = -m alpha``.
    """
    if model.c == 0:
        raise DomainError("the identity degenerates at c = 0")
    cf = model_closed_forms(model)
    t, ent, fisher = model.t, cf["Ent"], cf["Fisher"]
    alpha = model.alpha
    gamma = 0.0 if math.isinf(model.c) else 1.0 / model.c**2
    d1 = differentiate_series(ent, t, 1)
    d2 = differentiate_series(ent, t, 2)
    lhs = d2 + (2.0 * alpha + gamma) * d1 - gamma * fisher
    upp = np.array([model.second_derivatives(a, b, c)[0] for a, b, c in zip(model.u, model.up, model.beta)])
    alphap = upp / model.u - alpha**2
    lhs_chain = -model.m * alphap + (2.0 * alpha + gamma) * (-model.m * alpha) - gamma * fisher
    return {"t": t, "lhs": lhs, "lhs_chain": lhs_chain, "rhs": -model.m * alpha**2, "dEnt": d1, "d2Ent": d2}
