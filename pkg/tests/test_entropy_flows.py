import math

import numpy as np
import pytest

from wasslab.entropy import (
    Potential,
    boltzmann_entropy,
    entropy_rate,
    entropy_series,
    finite_dim_functionals,
    fisher_information,
    hamiltonian,
    hm_wm,
    kinetic,
    rhs_integrals,
    w_exponential,
    w_general,
)
from wasslab.errors import ConfigurationError, DomainError
from wasslab.flows import (
    SolverConfig,
    closedness_defect,
    hopf_lax_oracle,
    linear_finite_dim_solution,
    normalize_density,
    run_finite_dim,
    run_geodesic,
    run_heat,
    run_langevin,
    vorticity,
)
from wasslab.geometry import ScalarField, build_geometry

# 1 - sqrt(3)/2, from the contour integral of sin^2/(1 + cos/2)
FISHER_HALF_COS = 0.1339745962155614


def _density(geo, a=0.2):
    return normalize_density(geo, 1.0 + a * np.cos(geo.coords[0]))


def test_fisher_closed_form():
    geo = build_geometry(dim=1, grid=[128])
    rho = ScalarField(geo, (1.0 + 0.5 * np.cos(geo.coords[0])) / (2 * math.pi))
    assert abs(fisher_information(rho) - FISHER_HALF_COS) <= 1e-8


def test_uniform_entropy_is_minus_log_volume(weighted1d):
    rho = normalize_density(weighted1d, np.ones(weighted1d.shape))
    assert boltzmann_entropy(rho) == pytest.approx(-math.log(weighted1d.total_measure), abs=1e-13)
    assert fisher_information(rho) == pytest.approx(0.0, abs=1e-20)


def test_kinetic_and_rate(flat1d):
    x = flat1d.coords[0]
    rho = _density(flat1d)
    phi = ScalarField(flat1d, np.sin(x))
    expected_kin = np.sum(np.cos(x) ** 2 * rho.values) * flat1d.cell_volume
    assert kinetic(rho, phi) == pytest.approx(expected_kin, rel=1e-13)
    # int phi' rho' = int cos x * (-0.2 sin x)/Z = 0
    assert entropy_rate(rho, phi) == pytest.approx(0.0, abs=1e-15)


def test_hamiltonian_needs_finite_c(flat1d):
    rho = _density(flat1d)
    with pytest.raises(DomainError):
        hamiltonian(rho, ScalarField(flat1d, np.zeros(flat1d.shape)), math.inf)


def test_rhs_unknown_name(flat1d):
    with pytest.raises(KeyError):
        rhs_integrals(_density(flat1d), None, {}, ["nope"])


def test_rhs_missing_param(weighted1d):
    with pytest.raises(DomainError):
        rhs_integrals(_density(weighted1d), None, {"m": 3}, ["heat_wm"])


def test_geo_wm_vanishes_on_flat_uniform(flat1d):
    # uniform rho, phi = 0: only the (m - n)/t square survives
    rho = normalize_density(flat1d, np.ones(flat1d.shape))
    phi = ScalarField(flat1d, np.zeros(flat1d.shape))
    val = rhs_integrals(rho, phi, {"m": 3, "t": 0.5}, ["geo_wm"])["geo_wm"]
    assert val == pytest.approx(0.5 / 2 * (2 / 0.5) ** 2 + 0.5 * (1 / 0.5) ** 2, rel=1e-13)


def test_hm_wm_heat_rejects_nonpositive_times():
    with pytest.raises(DomainError):
        hm_wm(np.arange(8.0), np.zeros(8), "heat", 3)


def test_hm_wm_model_entropy_is_flat():
    # the heat kernel entropy itself gives Hm = 0 and dWm = 0
    t = np.linspace(0.5, 1.5, 201)
    m = 2
    ent = -0.5 * m * (1 + np.log(4 * math.pi * t))
    out = hm_wm(t, ent, "heat", m)
    assert np.max(np.abs(out["Hm"])) < 1e-14
    assert np.nanmax(np.abs(out["dWm"])) < 1e-7


def test_w_exponential_constant_value():
    t = np.linspace(0, 1, 11)
    out = w_exponential(t, np.full(11, 2.0), np.zeros(11), 1.0, "H")
    assert np.allclose(out["W"], 2.0)
    with pytest.raises(DomainError):
        w_exponential(t, t, t, math.inf)


def test_w_general_linear_entropy():
    # dEnt = const, no Fisher, alpha = 0, c = inf: W = dEnt, dW = 0
    t = np.linspace(0, 1, 21)
    out = w_general(t, np.full(21, 0.3), np.zeros(21), 0.0, math.inf, 2)
    assert np.allclose(out["W"], 0.3)
    assert np.nanmax(np.abs(out["dW"])) < 1e-12


def test_finite_dim_functionals_quadratic():
    V = Potential.quadratic([[2.0]])
    f = finite_dim_functionals([1.0], [0.5], V, 1.0)
    assert f["H"] == pytest.approx(0.125 + 1.0)
    assert f["dissipation"] == pytest.approx(2.0 * 0.25 + 4.0)


def test_quartic_potential_gradient():
    V = Potential.quartic([1.0], [[1.0]])
    x = np.array([0.7])
    h = 1e-6
    fd = (V.value(x + h) - V.value(x - h)) / (2 * h)
    assert V.grad(x)[0] == pytest.approx(fd, rel=1e-8)


# -- flows ---------------------------------------------------------------


def test_solver_config_validation():
    with pytest.raises(ConfigurationError):
        SolverConfig(dt=0.0, t_end=1.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(dt=2.0, t_end=1.0)
    with pytest.raises(ConfigurationError):
        SolverConfig(dt=0.1, t_end=1.0, output_stride=0)


def test_heat_conserves_mass_and_decreases_entropy(weighted1d):
    traj = run_heat(_density(weighted1d), SolverConfig(dt=1e-3, t_end=0.2, output_stride=20))
    assert traj.termination == "completed"
    assert np.max(np.abs(np.array(traj.diagnostics["mass"]) - 1)) < 1e-12
    es = entropy_series(traj)
    assert np.all(np.diff(es["Ent"]) < 0)


def test_heat_entropy_rate_is_minus_fisher(weighted1d):
    traj = run_heat(_density(weighted1d), SolverConfig(dt=1e-3, t_end=0.2, output_stride=10))
    es = entropy_series(traj)
    ok = np.isfinite(es["dEnt"])
    assert np.max(np.abs(es["dEnt"][ok] + es["Fisher"][ok])) < 1e-8


def test_heat_rejects_unnormalized(weighted1d):
    with pytest.raises(DomainError):
        run_heat(ScalarField(weighted1d, np.ones(weighted1d.shape)), SolverConfig(dt=1e-3, t_end=0.1))


def test_heat_cfl_guard():
    geo = build_geometry(dim=1, grid=[512])
    with pytest.raises(ConfigurationError):
        run_geodesic(_density(geo), ScalarField(geo, 0.1 * np.cos(geo.coords[0])), SolverConfig(dt=0.5, t_end=1.0))


def test_geodesic_zero_potential_is_static(flat1d):
    rho = _density(flat1d)
    traj = run_geodesic(rho, ScalarField(flat1d, np.zeros(flat1d.shape)),
                        SolverConfig(dt=1e-3, t_end=0.1, output_stride=50))
    assert np.max(np.abs(traj.states[-1].rho.values - rho.values)) < 1e-14


def test_langevin_dh_matches_first_order_formula(weighted1d):
    phi0 = ScalarField(weighted1d, 0.1 * np.cos(weighted1d.coords[0]))
    traj = run_langevin(_density(weighted1d), phi0, 1.0, SolverConfig(dt=1e-3, t_end=0.2, output_stride=10))
    es = entropy_series(traj)
    rhs = np.array([rhs_integrals(s.rho, s.phi, {}, ["hamiltonian_1st"])["hamiltonian_1st"] for s in traj.states])
    ok = np.isfinite(es["dH"])
    assert np.max(np.abs(es["dH"][ok] - rhs[ok])) < 1e-8
    assert np.max(np.abs(np.array(traj.diagnostics["mass"]) - 1)) < 1e-12


def test_hopf_lax_of_constant(flat1d):
    phi = ScalarField(flat1d, np.full(flat1d.shape, 0.7))
    assert np.allclose(hopf_lax_oracle(phi, 0.3).values, 0.7)
    with pytest.raises(DomainError):
        hopf_lax_oracle(phi, 0.0)


def test_vorticity_of_gradient_is_zero(weighted2d):
    x, y = weighted2d.coords
    phi = np.sin(x) * np.cos(y)
    u = weighted2d.vector([weighted2d.d(phi, 0), weighted2d.d(phi, 1)])
    assert closedness_defect(u) < 1e-13
    shear = weighted2d.vector([np.sin(y), np.zeros(weighted2d.shape)])
    assert np.max(np.abs(vorticity(shear).values + np.cos(y))) < 1e-12


def test_finite_dim_matches_matrix_exponential():
    V = Potential.quadratic([[1.0, 0.2], [0.2, 0.5]], [0.1, 0.0])
    traj = run_finite_dim([1.0, -0.5], [0.0, 0.3], V, 1.0, SolverConfig(dt=1e-3, t_end=1.0, output_stride=50))
    x, v = linear_finite_dim_solution(traj.x[0], traj.v[0], V, 1.0, traj.times)
    assert np.max(np.abs(traj.x - x)) < 1e-10 and np.max(np.abs(traj.v - v)) < 1e-10


def test_finite_dim_needs_finite_c():
    with pytest.raises(DomainError):
        run_finite_dim([1.0], [0.0], Potential.quadratic([[1.0]]), math.inf, SolverConfig(dt=1e-3, t_end=0.1))
