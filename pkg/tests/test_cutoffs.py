"""Bump profile and dyadic cutoff family."""

import numpy as np
import pytest

from fiolab.bumps import bump_eval, eta_k, phi0, phi_k, rho, rho_prime


def test_plateaus_branch_exact():
    assert rho(0.0) == 1.0
    assert rho(0.99) == 1.0
    assert rho(1.0) == 1.0
    assert rho(2.0) == 0.0
    assert rho(37.0) == 0.0


def test_transition_midpoint_value():
    # h(0.5) / (h(0.5) + h(0.5)) by symmetry of the glue
    assert rho(1.5) == pytest.approx(0.5, abs=1e-15)


def test_monotone_and_bounded_on_transition():
    t = np.linspace(1.0, 2.0, 801)
    v = rho(t)
    assert np.all(np.diff(v) <= 0)
    assert np.all((v >= 0.0) & (v <= 1.0))


def test_smooth_join_derivatives_vanish_at_edges():
    for order in (1, 2, 3, 4):
        assert abs(rho_prime(1.0, order)) < 1e-6
        assert abs(rho_prime(2.0, order)) < 1e-6


def test_bump_eval_points():
    assert bump_eval(np.array([0.3, 0.4])) == 1.0  # modulus 0.5
    assert bump_eval(np.array([3.0, 0.0, 0.0])) == 0.0
    assert bump_eval(1.5) == pytest.approx(0.5, abs=1e-15)


def test_eta_support():
    k = 5
    r = np.array([2.0 ** (k - 1), 2.0 ** (k + 1), 10.0, 70.0, 1.0])
    v = eta_k(r, k)
    assert v[0] == 0.0 and v[1] == 0.0  # support endpoints
    assert v[2] == 0.0 or r[2] > 2 ** (k - 1)
    assert eta_k(1.0, k) == 0.0
    assert eta_k(200.0, k) == 0.0
    inside = eta_k(2.0**k, k)
    assert inside == 1.0  # phi_k = 1, phi_{k-1} = 0 there


def test_eta_between_zero_and_one():
    r = np.exp(np.linspace(np.log(2.0), np.log(5000.0), 4001))
    for k in range(3, 12):
        v = eta_k(r, k)
        assert np.all((v >= 0.0) & (v <= 1.0))


def test_telescoping_exact():
    # at most one fractional rho per point, so the dyadic sum collapses with
    # no floating-point residue at all
    rng = np.random.default_rng(7)
    r = 2.0 ** rng.uniform(2.0, 13.0, size=10_000)
    for a in range(3, 12):
        for b in range(a + 1, 13):
            total = np.zeros_like(r)
            for k in range(a + 1, b + 1):
                total += eta_k(r, k)
            diff = total - (phi_k(r, b) - phi_k(r, a))
            assert np.max(np.abs(diff)) == 0.0


def test_vector_frequency_modulus_path():
    xi = np.array([[3.0, 4.0], [0.5, 0.0]])
    assert phi0(xi, axis=-1)[0] == 0.0  # modulus 5
    assert phi0(xi, axis=-1)[1] == 1.0
    assert phi_k(xi, 2, axis=-1)[0] == pytest.approx(rho(5.0 / 4.0))


def test_fractional_k_allowed():
    # phi_{-eps k} with eps k fractional is routine downstream
    v = phi_k(1.0, -0.75)
    assert 0.0 <= v <= 1.0
