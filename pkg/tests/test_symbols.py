"""Amplitudes, dyadic slices, and derivative-bound reports."""

import numpy as np
import pytest

from fiolab.bumps import eta_k
from fiolab.errors import DomainError
from fiolab.phases import make_phase, xi_of
from fiolab.symbols import (SymbolFunction, default_symbol, dyadic_pieces,
                            verify_symbol_bounds)


def cone_points(count=64, lam_lo=16.0, lam_hi=2048.0, seed=7):
    rng = np.random.default_rng(seed)
    lam = 2.0 ** rng.uniform(np.log2(lam_lo), np.log2(lam_hi), count)
    om = rng.uniform(-0.24, 0.24, count)
    x = rng.uniform(-0.9, 0.9, (count, 2))
    return x, lam, om


def test_default_symbol_frozen_value():
    a = default_symbol(n=2)
    got = float(a.eval(np.zeros(2), np.array([0.0, 64.0])))
    assert got == pytest.approx((1.0 + 64.0**2) ** (-0.25), rel=1e-14)


def test_default_symbol_supports_exact():
    a = default_symbol(n=2)
    x0 = np.zeros(2)
    # low frequencies removed exactly
    assert a.eval(x0, np.array([0.3, 7.0])) == 0.0
    # angular taper dead at the cone edge
    assert a.eval(x0, np.array([0.26 * 100, 100.0])) == 0.0
    # compact spatial support
    assert a.eval(np.array([1.0, 0.4]), np.array([0.0, 64.0])) == 0.0
    # backward frequencies never contribute
    assert a.eval(x0, np.array([0.0, -64.0])) == 0.0


def test_piece_reconstruction():
    a = default_symbol(n=2)
    x, lam, om = cone_points()
    xi = xi_of(lam, om, 2)
    for phname in ("halfwave", "cusp", "varcoef"):
        ph = make_phase(phname, n=2)
        deg, nd = dyadic_pieces(a, ph, 8, 0.25)
        total = deg.eval(x, xi) + nd.eval(x, xi)
        ref = a.eval(x, xi) * eta_k(xi, 8, axis=-1)
        assert np.max(np.abs(total - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))


def test_linear_phase_is_fully_degenerate():
    a = default_symbol(n=2)
    ph = make_phase("linear", n=2)
    deg, nd = dyadic_pieces(a, ph, 8, 0.25)
    x, lam, om = cone_points()
    xi = xi_of(lam, om, 2)
    assert np.all(nd.eval(x, xi) == 0.0)
    ref = a.eval(x, xi) * eta_k(xi, 8, axis=-1)
    assert np.array_equal(deg.eval(x, xi), ref)


def test_halfwave_fully_nondegenerate_at_large_eps_k():
    # min J on the cone is (1 + omega_max^2)^{-3/2} ~ 0.913 > 2^{-eps k + 1}
    # once eps k >= 2, so the degenerate slice vanishes identically there
    a = default_symbol(n=2)
    ph = make_phase("halfwave", n=2)
    deg, nd = dyadic_pieces(a, ph, 8, 0.25)
    x, lam, om = cone_points()
    xi = xi_of(lam, om, 2)
    assert np.all(deg.eval(x, xi) == 0.0)
    ref = a.eval(x, xi) * eta_k(xi, 8, axis=-1)
    assert np.array_equal(nd.eval(x, xi), ref)


def test_cusp_degenerate_at_flat_direction():
    a = default_symbol(n=2)
    ph = make_phase("cusp", n=2)
    deg, nd = dyadic_pieces(a, ph, 8, 0.25)
    x = np.zeros(2)
    xi = np.array([0.0, 300.0])
    assert deg.eval(x, xi) == a.eval(x, xi) * eta_k(xi, 8, axis=-1)
    assert nd.eval(x, xi) == 0.0


def test_eval_polar_matches_cartesian():
    a = default_symbol(n=2)
    x, lam, om = cone_points()
    for phname in ("halfwave", "cusp"):
        ph = make_phase(phname, n=2)
        deg, nd = dyadic_pieces(a, ph, 7, 0.25)
        for piece in (deg, nd):
            pol = piece.eval_polar(x, lam, om)
            cart = piece.eval(x, xi_of(lam, om, 2))
            assert np.max(np.abs(pol - cart)) <= 1e-13


def test_piece_preconditions():
    a = default_symbol(n=2)
    ph = make_phase("halfwave", n=2)
    with pytest.raises(DomainError):
        dyadic_pieces(a, ph, 2, 0.25)


def test_constant_symbol_bounds():
    const = SymbolFunction(lambda x, xi: np.ones(np.shape(xi[..., 0])), order=0.0)
    rep = verify_symbol_bounds(const, max_order=2, samples=50)
    assert rep["max_normalized"] <= 1.0 + 1e-6
    assert rep["violations"] == []


def test_radial_symbol_bounds_against_closed_form():
    # a(xi) = (1 + |xi|^2)^{m/2} with m = -1/2; first-derivative entry checked
    # against the closed-form gradient on the same kind of sample
    m = -0.5
    a = SymbolFunction(lambda x, xi: (1.0 + np.sum(xi * xi, axis=-1)) ** (m / 2),
                       order=m)
    rep = verify_symbol_bounds(a, max_order=2, samples=120)
    assert rep["max_normalized"] < 3.0
    # closed form: grad a = m xi (1+|xi|^2)^{m/2-1}; normalized sup over the
    # cone stays below |m| (1+r)^{1-m} r (1+r^2)^{m/2-1} < 0.6
    assert rep["entries"]["a00_b01"] < 0.6
    assert rep["entries"]["a00_b10"] < 0.6


def test_bound_violation_flagging():
    a = SymbolFunction(lambda x, xi: np.ones(np.shape(xi[..., 0])), order=0.0,
                       bound_constants={((0, 0), (0, 0)): 0.5})
    rep = verify_symbol_bounds(a, max_order=1, samples=30)
    assert any(key == "a00_b00" for key, got, declared in rep["violations"])


def test_degenerate_piece_derivative_growth():
    # beta-derivatives of the cusp degenerate slice grow like 2^{C eps k |beta|}
    # with fitted C well under 4 (regression over the k-sweep)
    a = default_symbol(n=2)
    ph = make_phase("cusp", n=2)
    eps = 0.25
    ks, tops = [], []
    for k in (4, 6, 8, 10):
        deg, _ = dyadic_pieces(a, ph, k, eps)
        rep = verify_symbol_bounds(deg, max_order=2, samples=60)
        g = max(rep["entries"][e] for e in ("a00_b20", "a00_b02", "a00_b11"))
        assert np.isfinite(g)
        ks.append(k)
        tops.append(g)
    slope = np.polyfit(np.array(ks) * eps * 2, np.log2(tops), 1)[0]
    assert slope <= 4.0
