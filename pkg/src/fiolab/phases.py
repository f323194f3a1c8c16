"""Built-in phase functions with closed-form derivatives.

Every built-in has the shape Phi(x, xi) = x . xi + c(x) * p(xi) with p
homogeneous of degree 1 and c smooth, c == 1 except for "varcoef".  The
fast paths lean on this: the frequency-side gradient is the translate
x + c(x) * theta(omega) of one fixed curve theta.

Angular arguments follow the projective convention omega = xi_under / xi_n,
lambda = xi_n; for n = 2 omega may be passed as a bare scalar or array, for
n = 3 the last axis holds the two angular components.
"""

import numpy as np

from .errors import ConfigError, DomainError

OMEGA_MAX = 0.25
K_MIN = 3


class ConeSpec:
    """Frequency cone {xi_n >= lambda_min, |omega| <= omega_max}."""

    def __init__(self, lambda_min=2.0**K_MIN, omega_max=OMEGA_MAX):
        if lambda_min < 4:
            raise DomainError("lambda_min must be >= 4")
        if not 0 < omega_max <= 0.5:
            raise DomainError("omega_max must lie in (0, 1/2]")
        self.lambda_min = float(lambda_min)
        self.omega_max = float(omega_max)

    def contains(self, xi):
        xi = np.asarray(xi, dtype=float)
        lam = xi[..., -1]
        osq = np.sum(xi[..., :-1] ** 2, axis=-1)
        return (lam >= self.lambda_min) & (osq <= (self.omega_max * lam) ** 2)

    def omega_in(self, omega, n=2):
        om = as_omega(omega, n)
        return np.sqrt(np.sum(om * om, axis=-1)) <= self.omega_max

    def __repr__(self):
        return f"ConeSpec(lambda_min={self.lambda_min}, omega_max={self.omega_max})"


def as_omega(omega, n):
    """Canonical angular shape (..., n-1); bare scalars allowed when n = 2."""
    om = np.asarray(omega, dtype=float)
    if n == 2:
        if om.ndim == 0 or om.shape[-1] != 1:
            om = om[..., None]
    elif om.ndim == 0 or om.shape[-1] != n - 1:
        raise DomainError(f"angular argument must have last axis {n - 1}")
    return om


def lam_of(xi):
    return np.asarray(xi, dtype=float)[..., -1]


def omega_of(xi):
    xi = np.asarray(xi, dtype=float)
    return xi[..., :-1] / xi[..., -1:]


def xi_of(lam, omega, n):
    """Cartesian frequency lambda * (omega, 1)."""
    om = as_omega(omega, n)
    lam = np.asarray(lam, dtype=float)
    shape = np.broadcast_shapes(lam.shape, om.shape[:-1])
    out = np.empty(shape + (n,))
    out[..., :-1] = lam[..., None] * np.broadcast_to(om, shape + (n - 1,))
    out[..., -1] = lam
    return out


def q_of(omega, n=2):
    """|(omega, 1)| = sqrt(1 + |omega|^2)."""
    om = as_omega(omega, n)
    return np.sqrt(1.0 + np.sum(om * om, axis=-1))


class Phase:
    """Base phase Phi(x, xi) = x . xi + c(x) p(xi)."""

    name = "base"

    def __init__(self, n=2):
        if n not in (2, 3):
            raise DomainError("only n in {2, 3} supported")
        self.n = n
        self.derivative_mode = "closed_form"
        self.params = {}

    # hooks: p and its derivatives; subclasses override
    def p(self, xi):
        raise NotImplementedError

    def grad_p(self, xi):
        raise NotImplementedError

    def ptilde(self, omega):
        """p((omega, 1))."""
        raise NotImplementedError

    def grad_ptilde(self, omega):
        """d/d omega of p((omega, 1)), shape (..., n-1)."""
        raise NotImplementedError

    def hess_ptilde(self, omega):
        """Angular Hessian of p((omega, 1)), shape (..., n-1, n-1)."""
        raise NotImplementedError

    def theta(self, omega):
        """grad_xi p at (omega, 1); the pullback curve, shape (..., n)."""
        raise NotImplementedError

    def c(self, x):
        return 1.0

    def grad_c(self, x):
        return np.zeros(self.n)

    def translation_invariant(self):
        return True

    # assembled quantities
    def eval(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return np.sum(x * xi, axis=-1) + self.c(x) * self.p(xi)

    def phase_omega(self, x, omega):
        """Phi(x, (omega, 1))."""
        x = np.asarray(x, dtype=float)
        om = as_omega(omega, self.n)
        lin = np.sum(x[..., :-1] * om, axis=-1) + x[..., -1]
        return lin + self.c(x) * self.ptilde(om)

    def grad_x(self, x, xi):
        if self.derivative_mode == "finite_difference":
            return self.fd_grad_x(x, xi)
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        p = np.asarray(self.p(xi))
        return xi + np.asarray(self.grad_c(x)) * p[..., None]

    def grad_xi(self, x, xi):
        if self.derivative_mode == "finite_difference":
            return self.fd_grad_xi(x, xi)
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        c = np.asarray(self.c(x))
        return x + c[..., None] * self.grad_p(xi)

    def grad_omega(self, x, omega):
        """Gradient in omega of Phi(x, (omega, 1))."""
        x = np.asarray(x, dtype=float)
        om = as_omega(omega, self.n)
        c = np.asarray(self.c(x))
        return x[..., :-1] + c[..., None] * self.grad_ptilde(om)

    def hess_omega(self, x, omega):
        if self.derivative_mode == "finite_difference":
            return self.fd_hess_omega(x, omega)
        x = np.asarray(x, dtype=float)
        om = as_omega(omega, self.n)
        c = np.asarray(self.c(x))
        return c[..., None, None] * self.hess_ptilde(om)

    def J(self, x, omega):
        """Curvature det(hess_omega); closed 1x1 / 2x2 determinant."""
        H = self.hess_omega(x, omega)
        if self.n == 2:
            return H[..., 0, 0]
        return H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]

    def pullback(self, x, omega):
        """grad_xi Phi(x, (omega, 1)) = x + c(x) theta(omega)."""
        x = np.asarray(x, dtype=float)
        om = as_omega(omega, self.n)
        c = np.asarray(self.c(x))
        return x + c[..., None] * self.theta(om)

    def mixed_hess(self, x, xi):
        """d^2 Phi / dx dxi, an n x n matrix (identity plus a rank-1 update)."""
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        shape = np.broadcast_shapes(x[..., 0].shape, xi[..., 0].shape)
        out = np.zeros(shape + (self.n, self.n))
        out[...] = np.eye(self.n)
        gc = np.broadcast_to(np.asarray(self.grad_c(x)), shape + (self.n,))
        gp = np.broadcast_to(self.grad_p(xi), shape + (self.n,))
        return out + gc[..., :, None] * gp[..., None, :]

    def mixed_hess_det(self, x, xi):
        # rank-1 update of the identity: det = 1 + grad_c . grad_p
        gc = np.asarray(self.grad_c(np.asarray(x, dtype=float)))
        gp = self.grad_p(np.asarray(xi, dtype=float))
        return 1.0 + np.sum(gc * gp, axis=-1)

    # finite-difference fallbacks
    def _eval_closed(self, x, xi):
        x = np.asarray(x, dtype=float)
        xi = np.asarray(xi, dtype=float)
        return np.sum(x * xi, axis=-1) + self.c(x) * self.p(xi)

    def fd_grad_x(self, x, xi, step=1e-5):
        x = np.asarray(x, dtype=float)
        cols = []
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = step
            cols.append((self._eval_closed(x + e, xi)
                         - self._eval_closed(x - e, xi)) / (2 * step))
        return np.stack(cols, axis=-1)

    def fd_grad_xi(self, x, xi, step=1e-5):
        xi = np.asarray(xi, dtype=float)
        cols = []
        for i in range(self.n):
            e = np.zeros(self.n)
            e[i] = step
            cols.append((self._eval_closed(x, xi + e)
                         - self._eval_closed(x, xi - e)) / (2 * step))
        return np.stack(cols, axis=-1)

    def fd_hess_omega(self, x, omega, step=1e-4):
        om = as_omega(omega, self.n)
        d = self.n - 1
        x = np.asarray(x, dtype=float)

        def f(o):
            lin = np.sum(x[..., :-1] * o, axis=-1) + x[..., -1]
            return lin + self.c(x) * self.ptilde(o)

        H = np.empty(np.broadcast_shapes(om.shape[:-1], x[..., 0].shape) + (d, d))
        f0 = f(om)
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = step
            H[..., i, i] = (f(om + ei) - 2 * f0 + f(om - ei)) / step**2
            for j in range(i + 1, d):
                ej = np.zeros(d)
                ej[j] = step
                v = (f(om + ei + ej) - f(om + ei - ej)
                     - f(om - ei + ej) + f(om - ei - ej)) / (4 * step**2)
                H[..., i, j] = v
                H[..., j, i] = v
        return H


class Halfwave(Phase):
    """Phi = x . xi + |xi|; the constant-coefficient wave propagator phase."""

    name = "halfwave"

    def p(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.sqrt(np.sum(xi * xi, axis=-1))

    def grad_p(self, xi):
        xi = np.asarray(xi, dtype=float)
        return xi / np.sqrt(np.sum(xi * xi, axis=-1))[..., None]

    def ptilde(self, omega):
        return np.sqrt(1.0 + np.sum(omega * omega, axis=-1))

    def grad_ptilde(self, omega):
        q = np.sqrt(1.0 + np.sum(omega * omega, axis=-1))
        return omega / q[..., None]

    def hess_ptilde(self, omega):
        # (I - omega omega^T / q^2) / q
        q2 = 1.0 + np.sum(omega * omega, axis=-1)
        q = np.sqrt(q2)
        d = self.n - 1
        H = np.zeros(omega.shape[:-1] + (d, d))
        H[...] = np.eye(d)
        H = H / q[..., None, None]
        H -= omega[..., :, None] * omega[..., None, :] / (q2 * q)[..., None, None]
        return H

    def theta(self, omega):
        q = np.sqrt(1.0 + np.sum(omega * omega, axis=-1))
        out = np.empty(omega.shape[:-1] + (self.n,))
        out[..., :-1] = omega
        out[..., -1] = 1.0
        return out / q[..., None]


class Linear(Phase):
    """Phi = x . xi + x0 . xi; completely flat, curvature identically zero."""

    name = "linear"

    def __init__(self, n=2, x0=None):
        super().__init__(n)
        self.x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float)
        if self.x0.shape != (n,):
            raise DomainError("x0 must be a length-n vector")
        self.params = {"x0": list(self.x0)}

    def p(self, xi):
        return np.sum(self.x0 * np.asarray(xi, dtype=float), axis=-1)

    def grad_p(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.broadcast_to(self.x0, xi.shape).copy()

    def ptilde(self, omega):
        return np.sum(self.x0[:-1] * omega, axis=-1) + self.x0[-1]

    def grad_ptilde(self, omega):
        return np.broadcast_to(self.x0[:-1], omega.shape).copy()

    def hess_ptilde(self, omega):
        d = self.n - 1
        return np.zeros(omega.shape[:-1] + (d, d))

    def theta(self, omega):
        return np.broadcast_to(self.x0, omega.shape[:-1] + (self.n,)).copy()


class Cusp(Phase):
    """Cubic angular phase whose curvature vanishes on a hyperplane.

    n = 2: Phi = x . xi + xi_1^3 / xi_2^2, so J = 6 omega.
    n = 3: Phi = x . xi + (xi_1^3 + xi_2^3) / xi_3^2, J = 36 omega_1 omega_2.
    """

    name = "cusp"

    def p(self, xi):
        xi = np.asarray(xi, dtype=float)
        return np.sum(xi[..., :-1] ** 3, axis=-1) / xi[..., -1] ** 2

    def grad_p(self, xi):
        xi = np.asarray(xi, dtype=float)
        out = np.empty(xi.shape)
        out[..., :-1] = 3.0 * xi[..., :-1] ** 2 / xi[..., -1:] ** 2
        out[..., -1] = -2.0 * np.sum(xi[..., :-1] ** 3, axis=-1) / xi[..., -1] ** 3
        return out

    def ptilde(self, omega):
        return np.sum(omega**3, axis=-1)

    def grad_ptilde(self, omega):
        return 3.0 * omega**2

    def hess_ptilde(self, omega):
        d = self.n - 1
        H = np.zeros(omega.shape[:-1] + (d, d))
        for i in range(d):
            H[..., i, i] = 6.0 * omega[..., i]
        return H

    def theta(self, omega):
        out = np.empty(omega.shape[:-1] + (self.n,))
        out[..., :-1] = 3.0 * omega**2
        out[..., -1] = -2.0 * np.sum(omega**3, axis=-1)
        return out


class VarCoef(Halfwave):
    """Phi = x . xi + c(x) |xi| with c(x) = 1 + amp * exp(-|x|^2 / 2).

    A genuinely x-dependent speed; amp small keeps the mixed Hessian
    uniformly nondegenerate (det >= 1 - amp * exp(-1/2)).
    """

    name = "varcoef"

    def __init__(self, n=2, amp=0.1):
        super().__init__(n)
        if not 0 <= amp < 0.5:
            raise DomainError("amp must lie in [0, 0.5)")
        self.amp = float(amp)
        self.params = {"amp": self.amp}

    def c(self, x):
        x = np.asarray(x, dtype=float)
        return 1.0 + self.amp * np.exp(-0.5 * np.sum(x * x, axis=-1))

    def grad_c(self, x):
        x = np.asarray(x, dtype=float)
        bump = self.amp * np.exp(-0.5 * np.sum(x * x, axis=-1))
        return -bump[..., None] * x

    def translation_invariant(self):
        return False

    def c_range(self):
        return 1.0, 1.0 + self.amp


REGISTRY = {
    "halfwave": Halfwave,
    "linear": Linear,
    "cusp": Cusp,
    "varcoef": VarCoef,
}


def make_phase(name, n=2, **params):
    """Build a registered phase by name."""
    try:
        cls = REGISTRY[name]
    except KeyError:
        raise ConfigError(
            f"unknown phase {name!r}; registered: {', '.join(sorted(REGISTRY))}"
        ) from None
    return cls(n=n, **params)
