"""Entropy-type functionals of densities and potentials, and the curvature integrals they are compared with.

All integrals are grid sums against ``dmu``; densities are taken with
respect to ``mu``.  The right-hand sides returned by :func:`rhs_integrals`
are written the way the identities state them (squares completed, trace
parts split off) instead of being simplified, so a check compares two
genuinely different computations.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterable

import numpy as np

from .errors import DomainError
from .geometry import ScalarField, TorusGeometry, _check_dimension, _pairs
from .series import cumulative_trapezoid, differentiate_series

__all__ = [
    "boltzmann_entropy",
    "fisher_information",
    "kinetic",
    "hamiltonian",
    "entropy_rate",
    "rhs_integrals",
    "RHS_NAMES",
    "EntropySeries",
    "entropy_series",
    "hm_wm",
    "w_general",
    "w_exponential",
    "Potential",
    "finite_dim_functionals",
]


class _Calc:
    """Lazily computed derivatives of one ``(rho, phi)`` pair on a torus."""

    def __init__(self, geo: TorusGeometry, rho: np.ndarray, phi: np.ndarray | None = None):
        if np.any(rho <= 0):
            raise DomainError("density must be positive at every node")
        self.geo, self.rho, self.phi = geo, rho, phi

    def _grad(self, a):
        return [self.geo.d(a, i) for i in range(self.geo.dim)]

    def _hess(self, a):
        return [self.geo.d2(a, i, j) for i, j in _pairs(self.geo.dim)]

    @cached_property
    def log_rho(self):
        return np.log(self.rho)

    @cached_property
    def grad_rho(self):
        return self._grad(self.rho)

    @cached_property
    def grad_log(self):
        return self._grad(self.log_rho)

    @cached_property
    def hess_log(self):
        return self._hess(self.log_rho)

    @cached_property
    def grad_phi(self):
        if self.phi is None:
            raise DomainError("this quantity needs a potential")
        return self._grad(self.phi)

    @cached_property
    def hess_phi(self):
        return self._hess(self.phi)

    def int(self, h) -> float:
        return self.geo.integrate(h)

    def dot(self, a, b):
        return sum(x * y for x, y in zip(a, b))

    def quad_form(self, S, a):
        """``S(a, a)`` for an upper-triangle packed symmetric tensor."""
        out = 0.0
        for idx, (i, j) in enumerate(_pairs(self.geo.dim)):
            w = 1.0 if i == j else 2.0
            out = out + w * S[idx] * a[i] * a[j]
        return out

    def frob2(self, S, shift=0.0):
        """``|S - shift * g|^2``."""
        out = 0.0
        for idx, (i, j) in enumerate(_pairs(self.geo.dim)):
            if i == j:
                out = out + (S[idx] - shift) ** 2
            else:
                out = out + 2.0 * S[idx] ** 2
        return out

    def ric_mn(self, a, m):
        """``Ric_{m,n}(L)(a, a)``; the rank-one correction is absent when m equals n."""
        n = self.geo.dim
        val = self.quad_form(self.geo.hess_f, a)
        if m > n:
            val = val - self.dot(self.geo.grad_f, a) ** 2 / (m - n)
        return val

    def witten(self, a, grad_a):
        return self.geo.laplacian(a) - self.dot(self.geo.grad_f, grad_a)


def _arr(x):
    return x.values if isinstance(x, ScalarField) else np.asarray(x, dtype=float)


def boltzmann_entropy(rho: ScalarField) -> float:
    """``int rho log rho dmu``."""
    c = _Calc(rho.geometry, rho.values)
    return c.int(c.rho * c.log_rho)


def fisher_information(rho: ScalarField) -> float:
    c = _Calc(rho.geometry, rho.values)
    return c.int(c.dot(c.grad_rho, c.grad_rho) / c.rho)


def kinetic(rho: ScalarField, phi: ScalarField) -> float:
    """Otto norm ``int |grad phi|^2 rho dmu``."""
    c = _Calc(rho.geometry, rho.values, phi.values)
    return c.int(c.dot(c.grad_phi, c.grad_phi) * c.rho)


def hamiltonian(rho: ScalarField, phi: ScalarField, c: float) -> float:
    if not (0 < c < math.inf):
        raise DomainError("the Hamiltonian needs a finite positive coupling")
    return 0.5 * c * c * kinetic(rho, phi) + boltzmann_entropy(rho)


def entropy_rate(rho: ScalarField, phi: ScalarField) -> float:
    """``int grad phi . grad rho dmu``, the entropy production along the transport."""
    c = _Calc(rho.geometry, rho.values, phi.values)
    return c.int(c.dot(c.grad_phi, c.grad_rho))


RHS_NAMES = (
    "geo_wm",
    "heat_wm",
    "langevin_mf3",
    "hamiltonian_2nd",
    "geo_dissipation",
    "heat_cdkm",
    "cs_bound",
    "eks_geo",
    "eks_grad",
    "eks_langevin",
    "hamiltonian_1st",
    "hamiltonian_1st_alt",
    "w_comparison",
    "w_exp_H",
    "w_exp_Ent",
)


def rhs_integrals(rho: ScalarField, phi: ScalarField | None, params: dict,
                  which: Iterable[str] | None = None) -> dict[str, float]:
    """Evaluate the requested right-hand sides at one state.

    ``params`` may carry ``m``, ``t``, ``alpha``, ``c``, ``K``, ``N`` and
    ``dEnt``; each entry of ``which`` pulls only what it needs.  The heat
    entries (``heat_wm``, ``heat_cdkm``, ``cs_bound``, ``eks_grad``) read the
    density alone and ignore ``phi``.
    """
    geo = rho.geometry
    calc = _Calc(geo, rho.values, None if phi is None else phi.values)
    names = RHS_NAMES if which is None else tuple(which)
    unknown = set(names) - set(RHS_NAMES)
    if unknown:
        raise KeyError(f"unknown right-hand side(s): {sorted(unknown)}")
    n = geo.dim
    out: dict[str, float] = {}

    def need(key):
        if key not in params or params[key] is None:
            raise DomainError(f"parameter {key!r} is required")
        return float(params[key])

    def dims():
        m = need("m")
        _check_dimension(geo, m)
        return m

    def gamma2_phi():
        gp = calc.grad_phi
        return calc.int((calc.frob2(calc.hess_phi) + calc.quad_form(geo.hess_f, gp)) * calc.rho)

    def fisher():
        return calc.int(calc.dot(calc.grad_rho, calc.grad_rho) / calc.rho)

    for name in names:
        if name == "geo_wm":
            m, t = dims(), need("t")
            gp = calc.grad_phi
            val = t * calc.int((calc.frob2(calc.hess_phi, 1.0 / t) + calc.ric_mn(gp, m)) * calc.rho)
            if m > n:
                val += t / (m - n) * calc.int((calc.dot(gp, geo.grad_f) + (m - n) / t) ** 2 * calc.rho)
            out[name] = val
        elif name == "heat_wm":
            m, t = dims(), need("t")
            gl = calc.grad_log
            val = 2 * t * calc.int((calc.frob2(calc.hess_log, -0.5 / t) + calc.ric_mn(gl, m)) * calc.rho)
            if m > n:
                val += 2 * t / (m - n) * calc.int((calc.dot(gl, geo.grad_f) - (m - n) / (2 * t)) ** 2 * calc.rho)
            out[name] = val
        elif name in ("langevin_mf3", "w_comparison"):
            m, a = dims(), need("alpha")
            gp = calc.grad_phi
            val = calc.int((calc.frob2(calc.hess_phi, a) + calc.ric_mn(gp, m)) * calc.rho)
            if m > n:
                val += (m - n) * calc.int((a + calc.dot(gp, geo.grad_f) / (m - n)) ** 2 * calc.rho)
            if name == "langevin_mf3":
                val += fisher() / need("c") ** 2
            out[name] = val
        elif name == "hamiltonian_2nd":
            c = need("c")
            gp = calc.grad_phi
            diff = [a - b for a, b in zip(gp, calc.grad_log)]
            integrand = calc.dot(diff, diff) / c**2 + calc.frob2(calc.hess_phi) + calc.quad_form(geo.hess_f, gp)
            out[name] = 2.0 * calc.int(integrand * calc.rho)
        elif name == "geo_dissipation":
            out[name] = gamma2_phi()
        elif name == "heat_cdkm":
            m, t, K = dims(), need("t"), need("K")
            a = 0.5 * (K + 1.0 / t)
            gl = calc.grad_log
            val = 2 * calc.int((calc.frob2(calc.hess_log, a) + calc.ric_mn(gl, m) - K * calc.dot(gl, gl)) * calc.rho)
            if m > n:
                val += 2.0 / (m - n) * calc.int((calc.dot(geo.grad_f, gl) + (m - n) * a) ** 2 * calc.rho)
            out[name] = val
        elif name == "cs_bound":
            m, t, K = dims(), need("t"), need("K")
            out[name] = 2.0 / m * (fisher() + 0.5 * m * (K + 1.0 / t)) ** 2
        elif name == "eks_grad":
            N, t, K = need("N"), need("t"), need("K")
            out[name] = 2.0 / N * (need("dEnt") + 0.5 * N * (K + 1.0 / t)) ** 2
        elif name == "eks_geo":
            N, t, K = need("N"), need("t"), need("K")
            kin = calc.int(calc.dot(calc.grad_phi, calc.grad_phi) * calc.rho)
            out[name] = (need("dEnt") + N / t) ** 2 / N + K * kin
        elif name == "eks_langevin":
            N, a, K = need("N"), need("alpha"), need("K")
            kin = calc.int(calc.dot(calc.grad_phi, calc.grad_phi) * calc.rho)
            out[name] = (need("dEnt") + N * a) ** 2 / N + K * kin
        elif name == "hamiltonian_1st":
            gp = calc.grad_phi
            out[name] = 2.0 * calc.int(calc.dot(gp, calc.grad_rho)) - calc.int(calc.dot(gp, gp) * calc.rho)
        elif name == "hamiltonian_1st_alt":
            gp = calc.grad_phi
            lphi = calc.witten(calc.phi, gp)
            out[name] = -calc.int((2.0 * lphi + calc.dot(gp, gp)) * calc.rho)
        elif name in ("w_exp_H", "w_exp_Ent"):
            c, t = need("c"), need("t")
            factor = 1.0 - math.exp((2.0 if name == "w_exp_H" else 1.0) * t / c**2)
            out[name] = factor * (fisher() + c * c * gamma2_phi())
    return out


# -- time series -------------------------------------------------------------


@dataclass
class EntropySeries:
    times: np.ndarray
    columns: dict[str, np.ndarray] = field(default_factory=dict)
    stencil_order: int = 4

    CSV_COLUMNS = ("Ent", "Fisher", "Kin", "H", "Hm", "Wm", "dEnt", "d2Ent", "dH", "d2H", "dWm")

    def __getitem__(self, key: str) -> np.ndarray:
        return self.columns[key]

    def valid(self, key: str) -> np.ndarray:
        return np.isfinite(self.columns[key])

    def to_csv(self, path, rhs: dict[str, np.ndarray] | None = None) -> None:
        rhs = rhs or {}
        header = ["t", *self.CSV_COLUMNS, *(f"rhs_{k}" for k in rhs)]
        cols = [self.times] + [self.columns.get(k, np.full(self.times.shape, np.nan)) for k in self.CSV_COLUMNS]
        cols += list(rhs.values())
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])


def entropy_series(traj, m: float | None = None, mode: str | None = None) -> EntropySeries:
    """Entropy functionals and their time derivatives along a trajectory.

    ``mode`` (``"geodesic"`` or ``"heat"``) together with ``m`` adds the
    relative entropy ``Hm`` and its ``Wm`` companion.
    """
    geo = traj.geometry
    t = traj.times
    ent, fis, kin, rate = [], [], [], []
    for st in traj.states:
        phi = st.phi.values if st.phi is not None else None
        calc = _Calc(geo, st.rho.values, phi)
        ent.append(calc.int(calc.rho * calc.log_rho))
        fis.append(calc.int(calc.dot(calc.grad_rho, calc.grad_rho) / calc.rho))
        if phi is not None:
            kin.append(calc.int(calc.dot(calc.grad_phi, calc.grad_phi) * calc.rho))
            rate.append(calc.int(calc.dot(calc.grad_phi, calc.grad_rho)))
        else:
            kin.append(np.nan)
            rate.append(np.nan)
    cols = {"Ent": np.array(ent), "Fisher": np.array(fis), "Kin": np.array(kin), "dEnt_quad": np.array(rate)}
    c = traj.c
    if c is not None and 0 < c < math.inf:
        cols["H"] = 0.5 * c * c * cols["Kin"] + cols["Ent"]
    else:
        cols["H"] = np.full(t.shape, np.nan)
    cols["dEnt"] = differentiate_series(cols["Ent"], t, 1)
    cols["d2Ent"] = differentiate_series(cols["Ent"], t, 2)
    cols["dH"] = differentiate_series(cols["H"], t, 1)
    cols["d2H"] = differentiate_series(cols["H"], t, 2)
    if mode is not None and m is not None:
        pos = t > 0
        for key, val in hm_wm(t[pos], cols["Ent"][pos], mode, m, cols["dEnt"][pos], cols["d2Ent"][pos]).items():
            cols[key] = np.full(t.shape, np.nan)
            cols[key][pos] = val
    return EntropySeries(t, cols)


def hm_wm(times, ent, mode: str, m: float, dEnt=None, d2Ent=None) -> dict[str, np.ndarray]:
    """Relative entropy ``Hm`` against the model and ``Wm = d/dt (t Hm)``.

    The model part of ``Hm`` is differentiated analytically and only the
    entropy is differenced; differencing ``log t`` near small ``t`` would
    dominate the error budget otherwise.
    """
    t = np.asarray(times, dtype=float)
    ent = np.asarray(ent, dtype=float)
    if np.any(t <= 0):
        raise DomainError("Hm and Wm need strictly positive times")
    d1 = differentiate_series(ent, t, 1) if dEnt is None else np.asarray(dEnt)
    d2 = differentiate_series(ent, t, 2) if d2Ent is None else np.asarray(d2Ent)
    if mode == "geodesic":
        Hm = ent + 0.5 * m * (1.0 + np.log(4.0 * math.pi * t * t))
        dHm = d1 + m / t
        dWm = t * d2 + 2.0 * d1 + m / t
    elif mode == "heat":
        Hm = ent + 0.5 * m * (1.0 + np.log(4.0 * math.pi * t))
        dHm = d1 + 0.5 * m / t
        dWm = t * d2 + 2.0 * d1 + 0.5 * m / t
    else:
        raise DomainError(f"unknown mode {mode!r}")
    return {"Hm": Hm, "Wm": Hm + t * dHm, "dWm": dWm}


def w_general(times, dEnt, fisher, alpha, c: float, m: float) -> dict[str, np.ndarray]:
    """Comparison functional built from running time integrals of the entropy production."""
    t = np.asarray(times, dtype=float)
    dEnt = np.asarray(dEnt, dtype=float)
    fisher = np.asarray(fisher, dtype=float)
    alpha = np.broadcast_to(np.asarray(alpha, dtype=float), t.shape)
    gamma = 1.0 / c**2
    ok = np.flatnonzero(np.isfinite(dEnt) & np.isfinite(fisher))
    W = np.full(t.shape, np.nan)
    dW = np.full(t.shape, np.nan)
    if ok.size:
        blk = slice(ok[0], ok[-1] + 1)
        tb, db = t[blk], dEnt[blk]
        W[blk] = db + cumulative_trapezoid((2.0 * alpha[blk] + gamma) * db, tb) - gamma * cumulative_trapezoid(fisher[blk], tb)
        if ok.size >= 7:
            dW[blk] = differentiate_series(W[blk], tb, 1)
    return {"W": W, "dW": dW, "excess": dW + m * alpha**2}


def w_exponential(times, value, dvalue, c: float, mode: str = "H") -> dict[str, np.ndarray]:
    """Exponentially weighted W-functional of ``H`` (rate 2/c^2) or ``Ent`` (rate 1/c^2)."""
    if not (0 < c < math.inf):
        raise DomainError("needs a finite positive coupling")
    t = np.asarray(times, dtype=float)
    if mode == "H":
        pref = 0.5 * c * c * (1.0 - np.exp(2.0 * t / c**2))
    elif mode == "Ent":
        pref = c * c * (1.0 - np.exp(t / c**2))
    else:
        raise DomainError(f"unknown mode {mode!r}")
    W = np.asarray(value) + pref * np.asarray(dvalue)
    return {"W": W, "dW": differentiate_series(W, t, 1)}


# -- finite-dimensional system ----------------------------------------------


@dataclass(frozen=True)
class Potential:
    """A potential with analytic gradient and Hessian."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    A: np.ndarray | None = None
    b: np.ndarray | None = None

    @classmethod
    def quadratic(cls, A, b=None) -> "Potential":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        A = 0.5 * (A + A.T)
        b = np.zeros(A.shape[0]) if b is None else np.asarray(b, dtype=float)
        return cls(
            value=lambda x: 0.5 * float(x @ A @ x) + float(b @ x),
            grad=lambda x: A @ x + b,
            hess=lambda x: A,
            A=A,
            b=b,
        )

    @classmethod
    def quartic(cls, a4, A, b=None) -> "Potential":
        """``sum a4_i x_i^4 / 4`` plus a quadratic part."""
        a4 = np.asarray(a4, dtype=float)
        q = cls.quadratic(A, b)
        return cls(
            value=lambda x: float(np.sum(a4 * x**4) / 4.0) + q.value(x),
            grad=lambda x: a4 * x**3 + q.grad(x),
            hess=lambda x: np.diag(3.0 * a4 * x**2) + q.hess(x),
        )


def finite_dim_functionals(x, v, V: Potential, c: float) -> dict[str, float]:
    """Energy, its derivatives and the dissipation terms at one phase-space point."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    g = V.grad(x)
    Hx = V.hess(x)
    vdot = -v / c**2 + g / c
    hvv = float(v @ Hx @ v)
    g2 = float(g @ g)
    return {
        "V": V.value(x),
        "H": 0.5 * float(v @ v) + V.value(x),
        "dH_analytic": -float(v @ v) / c**2 + 2.0 * float(g @ v) / c,
        "dV_analytic": float(g @ v) / c,
        "vdot": vdot,
        "rhs_5_1": 2.0 * float(vdot @ vdot) + 2.0 * hvv / c**2,
        "dissipation": hvv + g2,
        "rhs_5_2_V": (hvv + g2) / c**2,
        "rhs_5_2_H": 2.0 * (hvv + g2) / c**2,
    }
