"""Built-in phases: closed forms, derivative consistency, homogeneity."""

import numpy as np
import pytest

from fiolab.errors import ConfigError, DomainError
from fiolab.geometry import cone_samples
from fiolab.phases import ConeSpec, as_omega, make_phase, q_of, xi_of

ALL_PHASES = ["halfwave", "linear", "cusp", "varcoef"]


def _sampled(phase, count=200):
    cone = ConeSpec()
    x, lam, om = cone_samples(phase.n, cone, count)
    return x, lam, om, xi_of(lam, om, phase.n)


def test_halfwave_point_values():
    ph = make_phase("halfwave", n=2)
    assert ph.eval([0.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0, abs=1e-15)
    # x=(1,0), xi=(1,2): 1 + sqrt(5)
    assert ph.eval([1.0, 0.0], [1.0, 2.0]) == pytest.approx(3.23606797749979, abs=1e-12)


def test_cusp_homogeneity_point():
    ph = make_phase("cusp", n=2)
    x = np.array([0.2, -0.4])
    xi = np.array([0.1, 1.0])
    assert ph.eval(x, 2 * xi) == pytest.approx(2 * ph.eval(x, xi), rel=1e-14)


@pytest.mark.parametrize("name", ALL_PHASES)
@pytest.mark.parametrize("n", [2, 3])
def test_homogeneity_and_euler(name, n):
    ph = make_phase(name, n=n)
    x, lam, om, xi = _sampled(ph, 250)
    base = ph.eval(x, xi)
    scale = np.maximum(np.abs(base), lam)
    for t in (0.5, 2.0, 7.0):
        resid = np.abs(ph.eval(x, t * xi) - t * base) / (t * scale)
        assert np.max(resid) < 1e-8
    euler = np.abs(np.sum(xi * ph.grad_xi(x, xi), axis=-1) - base) / scale
    assert np.max(euler) < 1e-8


@pytest.mark.parametrize("name", ALL_PHASES)
@pytest.mark.parametrize("n", [2, 3])
def test_fd_matches_closed_form(name, n):
    ph = make_phase(name, n=n)
    x, lam, om, xi = _sampled(ph, 60)
    gx = ph.grad_x(x, xi)
    gxi = ph.grad_xi(x, xi)
    fgx = ph.fd_grad_x(x, xi)
    fgxi = ph.fd_grad_xi(x, xi)
    sx = np.maximum(1.0, np.abs(gx))
    sxi = np.maximum(1.0, np.abs(gxi))
    assert np.max(np.abs(gx - fgx) / sx) < 1e-6
    assert np.max(np.abs(gxi - fgxi) / sxi) < 1e-6
    H = ph.hess_omega(x, om)
    FH = ph.fd_hess_omega(x, om)
    sh = np.maximum(1.0, np.abs(H))
    assert np.max(np.abs(H - FH) / sh) < 1e-6


def test_finite_difference_mode_dispatch():
    ph = make_phase("varcoef", n=2)
    x = np.array([0.3, -0.1])
    xi = np.array([2.0, 17.0])
    closed = ph.grad_x(x, xi)
    ph.derivative_mode = "finite_difference"
    fd = ph.grad_x(x, xi)
    assert np.max(np.abs(closed - fd)) < 1e-6


def test_halfwave_curvature_closed_forms():
    ph = make_phase("halfwave", n=2)
    x = np.zeros(2)
    assert ph.J(x, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert ph.J(x, 1.0) == pytest.approx(0.35355339059327373, rel=1e-13)
    ph3 = make_phase("halfwave", n=3)
    # n=3 at omega=0: Hessian is the identity
    assert ph3.J(np.zeros(3), np.zeros(2)) == pytest.approx(1.0, abs=1e-14)


def test_cusp_and_linear_curvature():
    cu = make_phase("cusp", n=2)
    x = np.zeros(2)
    assert cu.J(x, 0.0) == 0.0
    assert cu.J(x, 0.05) == pytest.approx(0.3, rel=1e-13)
    cu3 = make_phase("cusp", n=3)
    assert cu3.J(np.zeros(3), np.array([0.1, -0.1])) == pytest.approx(-0.36, rel=1e-12)
    li = make_phase("linear", n=2, x0=[0.4, 0.0])
    om = np.linspace(-0.25, 0.25, 11)
    assert np.all(li.J(x, om) == 0.0)


def test_pullback_structure():
    # grad_xi Phi = x + c(x) theta(omega) for every built-in
    for name in ALL_PHASES:
        ph = make_phase(name, n=2)
        x = np.array([0.15, -0.2])
        om = np.array([0.07])
        xi = xi_of(37.0, om, 2)
        direct = ph.grad_xi(x, xi)
        assert np.allclose(direct, ph.pullback(x, om), atol=1e-12)


def test_varcoef_mixed_hessian_nondegenerate():
    ph = make_phase("varcoef", n=2)
    x, lam, om, xi = _sampled(ph, 400)
    dets = ph.mixed_hess_det(x, xi)
    assert np.min(dets) > 0.9
    full = np.linalg.det(ph.mixed_hess(x, xi))
    assert np.allclose(full, dets, rtol=1e-10)


def test_q_of_and_omega_shapes():
    assert q_of(0.0) == 1.0
    assert q_of(1.0) == pytest.approx(np.sqrt(2.0))
    om3 = as_omega(np.array([0.1, 0.2]), 3)
    assert om3.shape == (2,)
    with pytest.raises(DomainError):
        as_omega(np.array([0.1, 0.2, 0.3]), 3)


def test_registry_rejects_unknown():
    with pytest.raises(ConfigError):
        make_phase("heat")
    with pytest.raises(DomainError):
        make_phase("halfwave", n=4)


def test_cone_spec_validation():
    with pytest.raises(DomainError):
        ConeSpec(lambda_min=2.0)
    with pytest.raises(DomainError):
        ConeSpec(omega_max=0.8)
    cone = ConeSpec()
    assert cone.contains(np.array([0.0, 16.0]))
    assert not cone.contains(np.array([8.0, 16.0]))  # angle too wide
    assert not cone.contains(np.array([0.0, 2.0]))  # below lambda_min
