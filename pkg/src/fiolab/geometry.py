"""Derived phase geometry: curvature, the regularized matrix Q, Maslov
signature, gradient-map inversion, and whole-phase validation reports."""

import numpy as np

from .errors import DomainError, FiolabError, InversionError
from .phases import K_MIN, ConeSpec, as_omega, xi_of
from .stats import halton


class CurvatureData:
    """Curvature bundle at (x, omega, k, eps).

    J is det of the angular Hessian; Q = (2^{-eps k} I + H^2)^{1/2} built by
    eigendecomposition; mu is the Hessian signature counting only eigenvalues
    above the threshold 2^{-eps k / 2}, with `indeterminate` flagging points
    where some eigenvalue fell below it (those live inside the degenerate
    cutoff region, where the signature is never consumed).
    """

    def __init__(self, J, hessian, evals, evecs, k, eps, at):
        self.J = J
        self.hessian = hessian
        self._evals = evals
        self._evecs = evecs
        self.k = k
        self.eps = eps
        self.at = at
        t = 2.0 ** (-eps * k)
        self._qe = np.sqrt(t + evals**2)
        thr = 2.0 ** (-eps * k / 2)
        big = np.abs(evals) > thr
        self.mu = np.sum(np.sign(evals) * big, axis=-1).astype(int)
        self.indeterminate = ~np.all(big, axis=-1)
        self.det_Q = np.prod(self._qe, axis=-1)

    @property
    def q_eigenvalues(self):
        """Eigenvalues of Q, paired with the Hessian eigenvectors; all >= 2^{-eps k/2}."""
        return self._qe

    def _assemble(self, diag):
        V = self._evecs
        return (V * diag[..., None, :]) @ np.swapaxes(V, -1, -2)

    @property
    def Q(self):
        return self._assemble(self._qe)

    def Q_sqrt(self):
        return self._assemble(np.sqrt(self._qe))

    def Q_inv_sqrt(self):
        return self._assemble(1.0 / np.sqrt(self._qe))

    def Q_form(self, zeta):
        """Quadratic form Q(zeta, zeta)."""
        z = np.asarray(zeta, dtype=float)
        return np.einsum("...i,...ij,...j->...", z, self.Q, z)


def curvature_J(phase, x, omega):
    """det of the angular Hessian, honoring the phase's derivative mode."""
    if phase.derivative_mode == "finite_difference":
        H = phase.fd_hess_omega(x, omega)
        if phase.n == 2:
            return H[..., 0, 0]
        return H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]
    return phase.J(x, omega)


def build_Q(phase, x, omega, k, eps):
    """Regularized curvature matrix and Maslov data at (x, omega)."""
    if k < K_MIN:
        raise DomainError(f"k must be >= {K_MIN}")
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    om = as_omega(omega, phase.n)
    H = np.asarray(phase.hess_omega(x, om), dtype=float)
    if not np.allclose(H, np.swapaxes(H, -1, -2), atol=1e-10):
        raise FiolabError("angular Hessian is not symmetric")
    evals, evecs = np.linalg.eigh(H)
    if phase.n == 2:
        J = H[..., 0, 0]
    else:
        J = H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]
    return CurvatureData(J, H, evals, evecs, k, eps, at=(x, om, k, eps))


def invert_grad_x(phase, x, zeta, cone=None, tol=1e-10, maxiter=50):
    """Solve grad_x Phi(x, xi) = zeta for xi.

    Damped Newton seeded at xi0 = zeta (exact for every translation-invariant
    built-in, whose gradient map is the identity); steps are halved when the
    residual fails to drop.
    """
    x = np.asarray(x, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    xi = zeta.copy()
    target = tol * np.linalg.norm(zeta)
    res = phase.grad_x(x, xi) - zeta
    rn = np.linalg.norm(res)
    for _ in range(maxiter):
        if rn <= target:
            break
        M = phase.mixed_hess(x, xi)
        try:
            step = np.linalg.solve(M, -res)
        except np.linalg.LinAlgError:
            raise InversionError("singular mixed Hessian during inversion",
                                 residual=rn) from None
        t = 1.0
        xi_new, res_new, rn_new = xi, res, rn
        for _ in range(30):
            cand = xi + t * step
            rc = phase.grad_x(x, cand) - zeta
            rcn = np.linalg.norm(rc)
            if rcn < rn:
                xi_new, res_new, rn_new = cand, rc, rcn
                break
            t *= 0.5
        if rn_new >= rn:
            raise InversionError("no descent direction found", residual=rn)
        xi, res, rn = xi_new, res_new, rn_new
    if rn > target:
        raise InversionError(f"no convergence after {maxiter} iterations",
                             residual=rn)
    if cone is not None and not np.all(cone.contains(xi)):
        raise DomainError("inverted frequency lies outside the cone")
    return xi


def eval_phase(phase, x, xi, cone=None):
    """Phi(x, xi) with cone membership enforced."""
    cone = cone or ConeSpec()
    if not np.all(cone.contains(xi)):
        raise DomainError("frequency outside the configured cone")
    return phase.eval(x, xi)


def cone_samples(n, cone, count, lam_range=None, x_halfwidth=1.0, skip=20):
    """Quasi-random (x, lam, omega) triples inside the cone.

    x fills [-x_halfwidth, x_halfwidth]^n, lam is log-uniform, omega fills a
    box inscribed in the angular ball.
    """
    if lam_range is None:
        lam_range = (2 * cone.lambda_min, 4096.0)
    u = halton(count, 2 * n, skip=skip)
    x = x_halfwidth * (2 * u[:, :n] - 1)
    lo, hi = np.log2(lam_range[0]), np.log2(lam_range[1])
    lam = 2.0 ** (lo + (hi - lo) * u[:, n])
    d = n - 1
    half = cone.omega_max / np.sqrt(d)
    omega = half * (2 * u[:, n + 1:n + 1 + d] - 1)
    return x, lam, omega


def validate_phase(phase, cone=None, samples=1000):
    """Nondegeneracy and homogeneity report over a quasi-random cone sample."""
    if samples < 100:
        raise DomainError("samples must be >= 100")
    cone = cone or ConeSpec()
    x, lam, omega = cone_samples(phase.n, cone, samples)
    xi = xi_of(lam, omega, phase.n)

    dets = np.abs(phase.mixed_hess_det(x, xi))
    gx = phase.grad_x(x, xi)
    ratio = np.linalg.norm(gx, axis=-1) / np.linalg.norm(xi, axis=-1)

    base = phase.eval(x, xi)
    # |Phi| can nearly cancel for |x| ~ 1; relative error is against |xi| scale
    scale = np.maximum(np.abs(base), lam)
    hom = 0.0
    for t in (0.5, 2.0, 7.0):
        r = np.abs(phase.eval(x, t * xi) - t * base) / (t * scale)
        hom = max(hom, float(np.max(r)))
    euler = np.abs(np.sum(xi * phase.grad_xi(x, xi), axis=-1) - base) / scale

    return {
        "phase": phase.name,
        "n": phase.n,
        "samples": samples,
        "mixed_det_min": float(dets.min()),
        "mixed_det_max": float(dets.max()),
        "grad_ratio_min": float(ratio.min()),
        "grad_ratio_max": float(ratio.max()),
        "homogeneity_max": hom,
        "euler_max": float(np.max(euler)),
    }
