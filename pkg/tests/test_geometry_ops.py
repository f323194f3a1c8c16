"""Curvature bundle Q, Maslov data, gradient inversion, phase validation."""

import numpy as np
import pytest

from fiolab.errors import DomainError, FiolabError, InversionError
from fiolab.geometry import (build_Q, cone_samples, curvature_J, eval_phase,
                             invert_grad_x, validate_phase)
from fiolab.phases import ConeSpec, make_phase, xi_of


def test_eval_phase_cone_guard():
    ph = make_phase("halfwave", n=2)
    assert eval_phase(ph, [0.0, 0.0], [0.0, 16.0]) == pytest.approx(16.0)
    with pytest.raises(DomainError):
        eval_phase(ph, [0.0, 0.0], [0.0, 2.0])


def test_eval_phase_projective_consistency():
    ph = make_phase("cusp", n=2)
    x = np.array([0.3, 0.2])
    lam, om = 213.7, 0.11
    xi = xi_of(lam, om, 2)
    assert eval_phase(ph, x, xi) == pytest.approx(lam * ph.phase_omega(x, om), rel=1e-10)


def test_curvature_J_modes_agree():
    for name in ("halfwave", "cusp", "varcoef"):
        ph = make_phase(name, n=2)
        x = np.array([0.4, -0.3])
        om = 0.13
        closed = curvature_J(ph, x, om)
        ph.derivative_mode = "finite_difference"
        fd = curvature_J(ph, x, om)
        assert abs(closed - fd) < 1e-6


def test_build_Q_scalar_value():
    # J = 1 at omega = 0 for half-wave; 2^{-eps k} = 1/4 at eps=0.25, k=8
    ph = make_phase("halfwave", n=2)
    data = build_Q(ph, np.zeros(2), 0.0, k=8, eps=0.25)
    assert data.J == pytest.approx(1.0, abs=1e-14)
    assert data.Q[0, 0] == pytest.approx(1.118033988749895, rel=1e-13)  # sqrt(5)/2
    assert data.mu == 1
    assert not data.indeterminate


def test_build_Q_degenerate_floor():
    ph = make_phase("linear", n=2)
    k, eps = 8, 0.25
    data = build_Q(ph, np.zeros(2), 0.0, k=k, eps=eps)
    assert data.Q[0, 0] == pytest.approx(2.0 ** (-eps * k / 2), rel=1e-14)
    assert data.mu == 0
    assert data.indeterminate


def test_build_Q_indefinite_hessian_n3():
    # cusp n=3 at omega=(1/6,-1/6): Hessian diag(1,-1)
    ph = make_phase("cusp", n=3)
    data = build_Q(ph, np.zeros(3), np.array([1 / 6, -1 / 6]), k=8, eps=0.25)
    t = 2.0 ** (-0.25 * 8)
    want = np.sqrt(t + 1.0)
    assert np.allclose(data.Q, np.diag([want, want]), atol=1e-13)
    assert data.mu == 0
    assert not data.indeterminate
    assert data.J == pytest.approx(-1.0, rel=1e-13)


def test_build_Q_preconditions():
    ph = make_phase("halfwave", n=2)
    with pytest.raises(DomainError):
        build_Q(ph, np.zeros(2), 0.0, k=2, eps=0.25)
    with pytest.raises(DomainError):
        build_Q(ph, np.zeros(2), 0.0, k=8, eps=1.5)


def test_Q_domination_property():
    rng = np.random.default_rng(11)
    for name in ("halfwave", "cusp", "varcoef"):
        for n in (2, 3):
            ph = make_phase(name, n=n)
            cone = ConeSpec()
            x, lam, om = cone_samples(n, cone, 340)
            k, eps = 8, 0.25
            data = build_Q(ph, x, om, k=k, eps=eps)
            z = rng.standard_normal((340, n - 1))
            qf = np.einsum("...i,...ij,...j->...", z, data.Q, z)
            hf = np.einsum("...i,...ij,...j->...", z, data.hessian, z)
            zz = np.sum(z * z, axis=-1)
            assert np.all(qf >= np.abs(hf) - 1e-12)
            assert np.all(qf >= 2.0 ** (-eps * k) * zz - 1e-12)
            assert np.all(data.det_Q >= 2.0 ** (-eps * k * (n - 1) / 2) - 1e-12)


def test_Q_eigenvalue_floor_and_mu_parity():
    ph = make_phase("cusp", n=3)
    cone = ConeSpec()
    x, lam, om = cone_samples(3, cone, 300)
    data = build_Q(ph, x, om, k=8, eps=0.25)
    evs = np.linalg.eigvalsh(data.Q)
    assert np.min(evs) >= 2.0 ** (-0.25 * 8 / 2) - 1e-12
    # where J is healthy and no eigenvalue is borderline, mu has fixed parity
    ok = ~data.indeterminate
    assert np.all(np.abs(data.mu[ok]) <= ph.n - 1)
    assert np.all((data.mu[ok] - (ph.n - 1)) % 2 == 0)


def test_invert_identity_and_roundtrip():
    li = make_phase("linear", n=2, x0=[0.3, -0.2])
    z = np.array([1.0, 40.0])
    assert np.allclose(invert_grad_x(li, np.zeros(2), z), z)

    for name in ("halfwave", "varcoef"):
        for n in (2, 3):
            ph = make_phase(name, n=n)
            cone = ConeSpec()
            x, lam, om = cone_samples(n, cone, 150)
            xi = xi_of(lam, om, n)
            for i in range(0, 150, 10):
                zeta = ph.grad_x(x[i], xi[i])
                rec = invert_grad_x(ph, x[i], zeta)
                resid = np.linalg.norm(ph.grad_x(x[i], rec) - zeta)
                assert resid <= 1e-8 * np.linalg.norm(zeta)
                assert np.linalg.norm(rec - xi[i]) <= 1e-6 * np.linalg.norm(xi[i])


def test_invert_outside_cone_raises():
    ph = make_phase("cusp", n=2)
    # converges (identity gradient map) but lands outside the cone
    with pytest.raises(DomainError):
        invert_grad_x(ph, np.zeros(2), np.array([0.3, -2.0]), cone=ConeSpec())


def test_invert_failure_on_singular_ray():
    ph = make_phase("cusp", n=2)
    # xi_2 = 0 is the singular locus of the cusp tail; the residual goes bad
    # and stays bad, which must surface as an inversion failure
    with np.errstate(all="ignore"):
        with pytest.raises((InversionError, DomainError)):
            invert_grad_x(ph, np.zeros(2), np.array([1.0, 0.0]), cone=ConeSpec())


def test_validate_phase_reports():
    rep = validate_phase(make_phase("halfwave", n=2))
    assert rep["mixed_det_min"] == pytest.approx(1.0, abs=1e-10)
    assert rep["mixed_det_max"] == pytest.approx(1.0, abs=1e-10)
    assert rep["grad_ratio_min"] == pytest.approx(1.0, abs=1e-12)
    assert rep["homogeneity_max"] < 1e-8
    assert rep["euler_max"] < 1e-8

    rep = validate_phase(make_phase("linear", n=2, x0=[0.5, 0.1]))
    assert rep["mixed_det_min"] == pytest.approx(1.0, abs=1e-10)

    rep = validate_phase(make_phase("cusp", n=2))
    assert rep["mixed_det_min"] > 0.0
    assert rep["euler_max"] < 1e-9

    rep = validate_phase(make_phase("varcoef", n=2))
    assert rep["mixed_det_min"] > 0.9
    assert rep["homogeneity_max"] < 1e-8

    with pytest.raises(DomainError):
        validate_phase(make_phase("halfwave", n=2), samples=10)
