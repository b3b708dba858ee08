import math

import numpy as np
import pytest

from wasslab.errors import ConfigurationError, DomainError, NumericError
from wasslab.geometry import (
    ScalarField,
    bakry_emery,
    build_geometry,
    cd_lower_bound,
    div_mu,
    grad,
    hess,
    integrate_mu,
    torus_distance,
    trig_polynomial,
    witten_laplacian,
)

# 2*pi*I0(1), computed with scipy.special.i0 and frozen
INT_EXP_MINUS_COS = 7.954926521012844


def test_total_measure_of_cos_weight():
    geo = build_geometry(dim=1, grid=[64], f_coeffs=[{"k": [1], "cos": 1.0}])
    assert abs(geo.total_measure - INT_EXP_MINUS_COS) <= 1e-8


def test_flat_torus_measure_is_area():
    geo = build_geometry(dim=2, periods=[2.0, 3.0], grid=[16, 32])
    assert geo.total_measure == pytest.approx(6.0, abs=1e-13)


def test_grad_of_trig_mode_is_exact(flat1d):
    x = flat1d.coords[0]
    g = grad(ScalarField(flat1d, np.sin(3 * x)))
    assert np.max(np.abs(g.components[0] - 3 * np.cos(3 * x))) < 1e-12


def test_hess_2d_mixed_partial(weighted2d):
    x, y = weighted2d.coords
    h = hess(ScalarField(weighted2d, np.sin(x) * np.cos(2 * y)))
    assert np.max(np.abs(h.entry(0, 1) + 2 * np.cos(x) * np.sin(2 * y))) < 1e-11
    assert np.max(np.abs(h.entry(1, 1) + 4 * np.sin(x) * np.cos(2 * y))) < 1e-11


def test_weight_derivatives_match_spectral(weighted2d):
    for i in range(2):
        assert np.max(np.abs(weighted2d.grad_f[i] - weighted2d.d(weighted2d.f, i))) < 1e-12


def test_witten_laplacian_on_cos(weighted1d):
    x = weighted1d.coords[0]
    h = ScalarField(weighted1d, np.cos(x))
    # f = 0.3 cos x, so L cos = -cos - (-0.3 sin)(-sin)
    expected = -np.cos(x) - 0.3 * np.sin(x) ** 2
    assert np.max(np.abs(witten_laplacian(h).values - expected)) < 1e-12


def test_div_mu_kills_weighted_gradient_flux(weighted1d):
    # X = e^{f} e_x has div_mu X = d/dx(e^f) - f' e^f = 0
    X = weighted1d.vector([np.exp(weighted1d.f)])
    assert np.max(np.abs(div_mu(X).values)) < 1e-10


def test_k_eff_cos_weight_m3():
    geo = build_geometry(dim=1, grid=[128], f_coeffs=[{"k": [1], "cos": 1.0}], m=3)
    assert cd_lower_bound(geo, 3) == pytest.approx(-1.0, abs=1e-12)


def test_k_eff_canonical_weight(weighted1d):
    assert cd_lower_bound(weighted1d, 3) == pytest.approx(-0.3, abs=1e-12)


def test_bakry_emery_flat_is_zero(flat1d):
    assert np.all(bakry_emery(flat1d, 2).components[0] == 0.0)


def test_dimension_guard(weighted1d):
    with pytest.raises(DomainError):
        cd_lower_bound(weighted1d, 1)
    with pytest.raises(DomainError):
        cd_lower_bound(weighted1d, 0.5)


@pytest.mark.parametrize(
    "x, y, expected",
    [(0.1, 6.2, 0.1 + 2 * math.pi - 6.2), (0.0, math.pi, math.pi), (1.0, 1.0, 0.0), (0.5, 2.5, 2.0)],
)
def test_torus_distance_1d(x, y, expected):
    assert torus_distance(x, y, [2 * math.pi]) == pytest.approx(expected, abs=1e-14)


def test_torus_distance_2d_wraps_each_axis():
    d = torus_distance([0.1, 0.2], [0.9, 0.9], [1.0, 1.0])
    assert d == pytest.approx(math.hypot(0.2, 0.3), abs=1e-14)


def test_trig_polynomial_matches_direct(weighted2d):
    x, y = weighted2d.coords
    got = trig_polynomial(weighted2d, [{"k": [1, 2], "cos": 0.5, "sin": -0.25}])
    assert np.max(np.abs(got - (0.5 * np.cos(x + 2 * y) - 0.25 * np.sin(x + 2 * y)))) < 1e-14


def test_trig_polynomial_rejects_wrong_dim(weighted2d):
    with pytest.raises(ConfigurationError):
        trig_polynomial(weighted2d, [{"k": [1], "cos": 1.0}])


@pytest.mark.parametrize("bad", [{"dim": 3}, {"grid": [15]}, {"grid": [8]}, {"periods": [-1.0]},
                                 {"f_coeffs": [{"k": [1], "cos": float("nan")}]}])
def test_build_geometry_rejects(bad):
    with pytest.raises(ConfigurationError):
        build_geometry(**bad)


def test_integrate_mu_rejects_nan(flat1d):
    vals = np.ones(flat1d.shape)
    vals[3] = np.nan
    with pytest.raises(NumericError):
        integrate_mu(ScalarField(flat1d, vals))


def test_projection_keeps_low_modes(flat1d):
    x = flat1d.coords[0]
    a = np.cos(5 * x) + np.cos(30 * x)
    assert np.max(np.abs(flat1d.project(a) - np.cos(5 * x))) < 1e-13
