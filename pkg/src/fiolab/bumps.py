"""Smooth radial bump and the dyadic cutoff family built from it.

The profile is rho(t) = h(2-t)/(h(2-t)+h(t-1)) with h(s) = exp(-1/s) for
s > 0 and 0 otherwise: exactly 1 for t <= 1, exactly 0 for t >= 2, and
C-infinity in between.  The plateau values are produced by literal branch
assignments, not by a formula that merely saturates, so any dyadic
telescoping sum cancels term by term in floating point.
"""

import numpy as np

INNER_RADIUS = 1.0
OUTER_RADIUS = 2.0


def h(s):
    """exp(-1/s) on s > 0, identically 0 on s <= 0."""
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out if out.shape else float(out)


def rho(t):
    """Smooth step down: 1 on t <= 1, 0 on t >= 2, monotone in between."""
    t = np.asarray(t, dtype=float)
    out = np.ones(t.shape)
    out[t >= OUTER_RADIUS] = 0.0
    mid = (t > INNER_RADIUS) & (t < OUTER_RADIUS)
    if np.any(mid):
        tm = t[mid]
        a = np.exp(-1.0 / (OUTER_RADIUS - tm))
        b = np.exp(-1.0 / (tm - INNER_RADIUS))
        out[mid] = a / (a + b)
    return out if out.shape else float(out)


def rho_prime(t, order=1, step=1e-4):
    """Central finite-difference derivative of rho, orders 1..4."""
    t = np.asarray(t, dtype=float)
    if order == 1:
        return (rho(t + step) - rho(t - step)) / (2 * step)
    if order == 2:
        return (rho(t + step) - 2 * rho(t) + rho(t - step)) / step**2
    if order == 3:
        return (rho(t + 2 * step) - 2 * rho(t + step) + 2 * rho(t - step)
                - rho(t - 2 * step)) / (2 * step**3)
    if order == 4:
        return (rho(t + 2 * step) - 4 * rho(t + step) + 6 * rho(t)
                - 4 * rho(t - step) + rho(t - 2 * step)) / step**4
    raise ValueError("derivative order must be 1..4")


def _modulus(xi, axis):
    xi = np.asarray(xi, dtype=float)
    if axis is None:
        return np.abs(xi)
    return np.sqrt(np.sum(xi * xi, axis=axis))


def phi0(xi, axis=None):
    """Bump of the modulus: 1 inside |xi| <= 1, 0 outside |xi| >= 2.

    With axis=None the input is treated as already-scalar values (their
    absolute value is the modulus); pass axis=-1 for vector frequencies.
    """
    return rho(_modulus(xi, axis))


def phi_k(xi, k, axis=None):
    """Dilated bump phi_k(xi) = phi0(xi / 2^k); k may be any real number."""
    return rho(_modulus(xi, axis) / 2.0**k)


def eta_k(xi, k, axis=None):
    """Dyadic shell eta_k = phi_k - phi_{k-1}, supported on 2^{k-1} <= |xi| <= 2^{k+1}."""
    r = _modulus(xi, axis)
    return rho(r / 2.0**k) - rho(r / 2.0**(k - 1))


def bump_eval(t):
    """Radial bump at a single point: accepts one vector or a scalar modulus."""
    t = np.asarray(t, dtype=float)
    if t.ndim == 1:
        return phi0(t, axis=-1)
    return phi0(t)
