"""Structural invariants as property tests over random trig data."""

import math

import numpy as np
from hypothesis import given
from hypothesis import strategies as st

from wasslab.entropy import boltzmann_entropy, entropy_rate, kinetic, rhs_integrals
from wasslab.flows import normalize_density
from wasslab.geometry import ScalarField, build_geometry, div_mu, grad, torus_distance, witten_laplacian
from wasslab.series import differentiate_series

coef = st.floats(-0.4, 0.4, allow_nan=False)
mode = st.integers(-4, 4)


def _trig(geo, terms):
    out = np.zeros(geo.shape)
    for k, a, b in terms:
        theta = k * geo.coords[0]
        out = out + a * np.cos(theta) + b * np.sin(theta)
    return out


terms = st.lists(st.tuples(mode, coef, coef), min_size=1, max_size=4)
weights = st.lists(st.tuples(st.integers(1, 3), coef, coef), max_size=2)


def _geo(wt, grid=64):
    return build_geometry(dim=1, grid=[grid], f_coeffs=[{"k": [k], "cos": a, "sin": b} for k, a, b in wt], m=3)


@given(weights, terms, terms)
def test_div_mu_is_minus_adjoint_of_grad(wt, t1, t2):
    geo = _geo(wt)
    h = ScalarField(geo, _trig(geo, t1))
    X = grad(ScalarField(geo, _trig(geo, t2)))
    lhs = geo.integrate(div_mu(X).values * h.values)
    rhs = -geo.integrate(X.components[0] * grad(h).components[0])
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


@given(weights, terms)
def test_witten_laplacian_is_div_of_grad(wt, t1):
    geo = _geo(wt)
    h = ScalarField(geo, _trig(geo, t1))
    assert np.max(np.abs(witten_laplacian(h).values - div_mu(grad(h)).values)) < 1e-10


@given(weights, terms, terms)
def test_witten_laplacian_symmetric(wt, t1, t2):
    geo = _geo(wt)
    a = ScalarField(geo, _trig(geo, t1))
    b = ScalarField(geo, _trig(geo, t2))
    lhs = geo.integrate(witten_laplacian(a).values * b.values)
    rhs = geo.integrate(a.values * witten_laplacian(b).values)
    assert abs(lhs - rhs) <= 1e-10 * (1 + abs(lhs))


@given(st.integers(1, 20), coef, coef)
def test_spectral_derivative_exact_below_nyquist(k, a, b):
    geo = build_geometry(dim=1, grid=[64])
    x = geo.coords[0]
    vals = a * np.cos(k * x) + b * np.sin(k * x)
    d = geo.d(vals, 0)
    assert np.max(np.abs(d - k * (-a * np.sin(k * x) + b * np.cos(k * x)))) < 1e-11


@given(weights, terms, terms, st.floats(-5, 5, allow_nan=False))
def test_potential_gauge_invariance(wt, t_rho, t_phi, shift):
    geo = _geo(wt)
    rho = normalize_density(geo, 1.0 + 0.5 * np.tanh(_trig(geo, t_rho)))
    phi = ScalarField(geo, _trig(geo, t_phi))
    phi2 = ScalarField(geo, phi.values + shift)
    assert abs(kinetic(rho, phi) - kinetic(rho, phi2)) < 1e-12
    assert abs(entropy_rate(rho, phi) - entropy_rate(rho, phi2)) < 1e-12
    names = ["geo_dissipation", "hamiltonian_2nd", "hamiltonian_1st"]
    a = rhs_integrals(rho, phi, {"c": 1.0}, names)
    b = rhs_integrals(rho, phi2, {"c": 1.0}, names)
    for n in names:
        assert abs(a[n] - b[n]) <= 1e-10 * (1 + abs(a[n]))


@given(weights, terms)
def test_entropy_bounded_below_by_uniform(wt, t_rho):
    geo = _geo(wt)
    rho = normalize_density(geo, 1.0 + 0.5 * np.tanh(_trig(geo, t_rho)))
    assert boltzmann_entropy(rho) >= -math.log(geo.total_measure) - 1e-12


@given(st.lists(st.floats(-3, 3, allow_nan=False), min_size=5, max_size=5), st.floats(0.01, 0.5))
def test_stencil_exact_for_quartics(c, h):
    t = np.arange(12) * h
    y = sum(ci * t**i for i, ci in enumerate(c))
    dy = sum(i * ci * t ** (i - 1) for i, ci in enumerate(c) if i)
    d = differentiate_series(y, t, 1)
    ok = np.isfinite(d)
    scale = 1 + np.max(np.abs(y)) / h
    assert np.max(np.abs(d[ok] - dy[ok])) <= 1e-10 * scale


@given(st.floats(-10, 10), st.floats(-10, 10), st.floats(0.5, 5))
def test_torus_distance_symmetric_and_bounded(x, y, L):
    d = float(torus_distance(x, y, [L]))
    assert d == float(torus_distance(y, x, [L]))
    assert 0.0 <= d <= L / 2 + 1e-12
