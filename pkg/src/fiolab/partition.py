"""Curvature-adaptive angular partition.

Per-center ellipsoid weights psi_{x,omega_D}, their continuous average
psi_x(omega) over centers, discrete tube families on a fine angular lattice,
and the rescaled per-tube amplitude b(lam, zeta).
"""

import numpy as np

from .bumps import rho
from .errors import AccuracyError, DomainError
from .geometry import build_Q
from .phases import K_MIN, OMEGA_MAX, as_omega
from .symbols import DyadicSymbolPiece

# lattice step in units of 2^{-k/2}; 1/16 keeps the discrete partition
# identity below 1e-3 for every built-in phase (measured worst 2.6e-4)
SPACING_FACTOR = 1.0 / 16.0

# midpoint-rule resolution per angular dimension for the center average;
# the bump profile defeats Gauss nodes, uniform midpoints converge fast
PSI_QUAD_POINTS = {1: 256, 2: 128}


def psi_weight(phase, x, centers, omega, k, eps, curv=None):
    """psi_{x,omega_D}(omega) for a batch of centers omega_D.

    2^{(n-1)k/2} det(Q)^{1/2} rho(2^k Q(omega - omega_D, omega - omega_D))
    with Q evaluated at each center; the prefactor makes the omega-integral
    equal the fixed profile mass independent of the center.
    """
    nm1 = phase.n - 1
    centers = as_omega(centers, phase.n)
    om = as_omega(omega, phase.n)
    data = curv if curv is not None else build_Q(phase, x, centers, k=k, eps=eps)
    d = om - centers
    qf = np.einsum("...i,...ij,...j->...", d, data.Q, d)
    return 2.0 ** (nm1 * k / 2.0) * np.sqrt(data.det_Q) * rho(2.0**k * qf)


class PartitionWeight:
    """One curvature-adapted ellipsoid weight psi_{x,omega_D}."""

    def __init__(self, phase, x, omega_d, k, eps):
        if k < K_MIN:
            raise DomainError(f"k must be >= {K_MIN}")
        self.phase = phase
        self.x = np.asarray(x, dtype=float)
        self.omega_d = as_omega(omega_d, phase.n)
        self.k = int(k)
        self.eps = float(eps)
        self.curv = build_Q(phase, self.x, self.omega_d, k=k, eps=eps)

    def eval(self, omega):
        return psi_weight(self.phase, self.x, self.omega_d, omega,
                          self.k, self.eps, curv=self.curv)

    __call__ = eval

    def support_radius(self):
        """Max |omega - omega_D| with psi > 0 (smallest-eigenvalue direction)."""
        qmin = float(np.min(self.curv.q_eigenvalues))
        return np.sqrt(2.0 * 2.0**-self.k / qmin)


def _min_eig(phase, x, omegas, k, eps):
    data = build_Q(phase, x, as_omega(omegas, phase.n), k=k, eps=eps)
    return float(np.min(data.q_eigenvalues))


def _center_box_radius(phase, x, omega, k, eps):
    """Two-pass bound on how far centers can reach the point omega.

    A first radius from Q at omega is widened by probing Q across that
    neighborhood and re-solving with the smallest eigenvalue found, so
    ellipsoids that flatten near omega are still fully inside the box.
    """
    nm1 = phase.n - 1
    om = as_omega(omega, phase.n)
    q0 = _min_eig(phase, x, om, k, eps)
    r0 = 1.8 * np.sqrt(2.0 * 2.0**-k / q0)
    grid = np.linspace(-1.0, 1.0, 9)
    if nm1 == 1:
        probes = om + r0 * grid[:, None]
    else:
        gx, gy = np.meshgrid(grid, grid, indexing="ij")
        probes = om + r0 * np.stack([gx.ravel(), gy.ravel()], axis=-1)
    qm = _min_eig(phase, x, probes, k, eps)
    return 1.3 * np.sqrt(2.0 * 2.0**-k / qm)


def psi_average(x, omega, k, eps, phase, m=None):
    """psi_x(omega): the center-integral of psi_{x,omega_D}(omega).

    Tensor midpoint rule over an adaptive box of centers; the value at half
    resolution provides the error estimate, and a relative estimate above
    1e-4 raises AccuracyError.
    """
    if k < K_MIN:
        raise DomainError(f"k must be >= {K_MIN}")
    nm1 = phase.n - 1
    om = as_omega(omega, phase.n)
    if float(np.max(np.abs(om))) > 2 * OMEGA_MAX:
        raise DomainError("omega outside the widened cone slice")
    if m is None:
        m = PSI_QUAD_POINTS[nm1]
    x = np.asarray(x, dtype=float)
    r = _center_box_radius(phase, x, om, k, eps)

    def midpoint(mm):
        pts = (np.arange(mm) + 0.5) * (2.0 * r / mm) - r
        if nm1 == 1:
            centers = om + pts[:, None]
        else:
            gx, gy = np.meshgrid(pts, pts, indexing="ij")
            centers = om + np.stack([gx.ravel(), gy.ravel()], axis=-1)
        vals = psi_weight(phase, x, centers, om, k, eps)
        return float(np.sum(vals)) * (2.0 * r / mm) ** nm1

    value = midpoint(m)
    estimate = abs(value - midpoint(m // 2))
    if estimate > 1e-4 * max(abs(value), 1e-300):
        raise AccuracyError(
            f"center-average quadrature estimate {estimate:.2e} "
            f"exceeds 1e-4 of value {value:.2e}")
    return value


def profile_mass(nm1=1, m=None):
    """The fixed constant int rho(|u|^2) du over R^{nm1} (frozen-Q value)."""
    if m is None:
        m = 4096 if nm1 == 1 else 1024
    r = np.sqrt(2.0)
    pts = (np.arange(m) + 0.5) * (2.0 * r / m) - r
    if nm1 == 1:
        vals = rho(pts * pts)
        return float(np.sum(vals)) * (2.0 * r / m)
    gx, gy = np.meshgrid(pts, pts, indexing="ij")
    vals = rho(gx * gx + gy * gy)
    return float(np.sum(vals)) * (2.0 * r / m) ** 2


class _Barycentric:
    """Tensor Chebyshev-Lobatto interpolant on [-a, a]^d (d = 1 or 2)."""

    def __init__(self, a, nodes_1d, values):
        self.a = a
        self.nodes = nodes_1d          # (N,), descending
        self.values = values           # (N,) or (N, N)
        n = len(nodes_1d)
        w = (-1.0) ** np.arange(n)
        w[0] *= 0.5
        w[-1] *= 0.5
        self.w = w

    @staticmethod
    def lobatto_nodes(a, n):
        return a * np.cos(np.pi * np.arange(n) / (n - 1))

    def _contract(self, vals, t):
        # vals (..., N) -> (...) at scalar-or-array t (...,)
        d = t[..., None] - self.nodes
        hit = np.abs(d) < 1e-14
        d = np.where(hit, 1.0, d)
        c = self.w / d
        out = np.sum(c * vals, axis=-1) / np.sum(c, axis=-1)
        if np.any(hit):
            exact = np.sum(np.where(hit, vals, 0.0), axis=-1)
            out = np.where(np.any(hit, axis=-1), exact, out)
        return out

    def eval(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self.values.ndim == 1:
            return self._contract(self.values, pts[..., 0])
        rows = self._contract(self.values, pts[..., 1][..., None])
        return self._contract(rows, pts[..., 0])


class TubePiece:
    """One tube of the angular decomposition, in rescaled coordinates.

    b(lam, zeta) = 2^{-(n-1)k/2} lam^{n-1} a_k(x, lam(omega,1))
                   * rho(|zeta|^2) / psi_x(omega)
    with omega = omega_D + 2^{-k/2} Q^{-1/2} zeta and a_k the scale-k
    nondegenerate slice of the base amplitude.
    """

    def __init__(self, phase, base, x, omega_d, k, eps, curv=None):
        self.phase = phase
        self.base = base
        self.x = np.asarray(x, dtype=float)
        self.omega_d = as_omega(omega_d, phase.n)
        self.k = int(k)
        self.eps = float(eps)
        self.a_k = DyadicSymbolPiece(base, phase, k, eps, "nondegenerate")
        self.curv = curv if curv is not None else build_Q(
            phase, self.x, self.omega_d, k=k, eps=eps)
        self._qis = self.curv.Q_inv_sqrt()
        self._qs = self.curv.Q_sqrt()
        self._psix = None

    @property
    def n(self):
        return self.phase.n

    def omega_of_zeta(self, zeta):
        z = as_omega(zeta, self.n)
        return self.omega_d + 2.0 ** (-self.k / 2.0) * (z @ self._qis.T)

    def zeta_of_omega(self, omega):
        d = as_omega(omega, self.n) - self.omega_d
        return 2.0 ** (self.k / 2.0) * (d @ self._qs.T)

    def _psix_interp(self):
        # psi_x is smooth and nearly constant across one tube; a small
        # Lobatto grid over the zeta-ball reproduces it far below 1e-5
        if self._psix is None:
            a = np.sqrt(2.0) * 1.05
            nm1 = self.n - 1
            npts = 17 if nm1 == 1 else 7
            nodes = _Barycentric.lobatto_nodes(a, npts)
            if nm1 == 1:
                oms = self.omega_of_zeta(nodes[:, None])
                vals = np.array([psi_average(self.x, o, self.k, self.eps, self.phase)
                                 for o in oms])
            else:
                gx, gy = np.meshgrid(nodes, nodes, indexing="ij")
                zs = np.stack([gx.ravel(), gy.ravel()], axis=-1)
                oms = self.omega_of_zeta(zs)
                vals = np.array([psi_average(self.x, o, self.k, self.eps, self.phase)
                                 for o in oms]).reshape(npts, npts)
            self._psix = _Barycentric(a, nodes, vals)
        return self._psix

    def psi_x(self, omega):
        """Interpolated psi_x at omega (must lie within this tube's reach)."""
        z = self.zeta_of_omega(omega)
        return self._psix_interp().eval(np.asarray(z, dtype=float))

    def weight(self, omega):
        """The normalized angular weight psi_{x,omega_D}(omega) / psi_x(omega)."""
        num = psi_weight(self.phase, self.x, self.omega_d, omega,
                         self.k, self.eps, curv=self.curv)
        # the numerator support sits inside the interpolation box, so the
        # denominator is only trusted where num is live
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(num != 0.0, num / self.psi_x(omega), 0.0)

    def eval(self, x, xi):
        """Plain-symbol view a_k(x, xi) * weight(omega).

        The tube geometry (Q, psi_x) stays frozen at this piece's anchor x;
        only the scale-k amplitude factor sees the x argument.
        """
        xi = np.asarray(xi, dtype=float)
        lam = xi[..., -1]
        good = lam > 0
        safe = np.where(good, lam, 1.0)
        om = xi[..., :-1] / safe[..., None]
        w = np.where(good, self.weight(om), 0.0)
        return self.a_k.eval(x, xi) * w

    __call__ = eval

    def eval_b(self, lam, zeta):
        lam = np.asarray(lam, dtype=float)
        z = as_omega(zeta, self.n)
        zz = np.sum(z * z, axis=-1)
        cut = rho(zz)
        om = self.omega_of_zeta(z)
        nm1 = self.n - 1
        amp = self.a_k.eval_polar(self.x, lam, om)
        # the interpolant extrapolates harmlessly where cut = 0; keep the
        # divisor away from any far-field zero crossing
        psix = np.where(cut > 0, self._psix_interp().eval(z), 1.0)
        return 2.0 ** (-nm1 * self.k / 2.0) * lam**nm1 * amp * cut / psix

    __call__ = eval_b


class TubeFamily:
    """All tubes of one dyadic scale: a fine angular lattice of centers.

    The lattice Riemann sum over centers reproduces the continuous average
    psi_x, so sum_D psi_{x,omega_D}(omega) spacing^{n-1} / psi_x(omega) = 1
    up to the lattice error (held below 1e-3 by the spacing choice).
    """

    def __init__(self, phase, x, k, eps, centers, spacing, omega_max):
        self.phase = phase
        self.x = np.asarray(x, dtype=float)
        self.k = int(k)
        self.eps = float(eps)
        self.centers = centers
        self.spacing = float(spacing)
        self.omega_max = float(omega_max)
        self.curv = build_Q(phase, self.x, centers, k=k, eps=eps)

    def __len__(self):
        return self.centers.shape[0]

    @property
    def cell_volume(self):
        return self.spacing ** (self.phase.n - 1)

    def psi_sum(self, omega):
        """sum_D psi_{x,omega_D}(omega) * cell volume (Riemann psi_x)."""
        om = as_omega(omega, self.phase.n)
        vals = psi_weight(self.phase, self.x, self.centers, om[..., None, :],
                          self.k, self.eps, curv=self.curv)
        return np.sum(vals, axis=-1) * self.cell_volume

    def covers(self, omega):
        """True where some tube weight is strictly positive."""
        return self.psi_sum(omega) > 0

    def partition_residual(self, omegas):
        """max |psi_sum / psi_x - 1| over the given angular points."""
        oms = as_omega(omegas, self.phase.n)
        worst = 0.0
        for om in oms.reshape(-1, self.phase.n - 1):
            exact = psi_average(self.x, om, self.k, self.eps, self.phase)
            worst = max(worst, abs(float(self.psi_sum(om)) / exact - 1.0))
        return worst

    def nearest_center(self, omega):
        om = as_omega(omega, self.phase.n)
        d = self.centers - om
        return int(np.argmin(np.sum(d * d, axis=-1)))

    def piece(self, index, base):
        """The TubePiece at one lattice center, for the given base amplitude."""
        c = self.centers[index]
        return TubePiece(self.phase, base, self.x, c, self.k, self.eps)


def build_tube_family(phase, x, k, eps, omega_max=OMEGA_MAX,
                      spacing_factor=SPACING_FACTOR):
    """Lay out the scale-k angular lattice of tube centers.

    Centers extend past the cone edge by the largest ellipsoid reach, so the
    center average seen from any in-cone omega is never truncated.
    """
    if k < K_MIN:
        raise DomainError(f"k must be >= {K_MIN}")
    nm1 = phase.n - 1
    x = np.asarray(x, dtype=float)
    s = spacing_factor * 2.0 ** (-k / 2.0)

    grid = np.linspace(-omega_max, omega_max, 17)
    if nm1 == 1:
        probe = grid[:, None]
    else:
        gx, gy = np.meshgrid(grid, grid, indexing="ij")
        probe = np.stack([gx.ravel(), gy.ravel()], axis=-1)
    qmin = _min_eig(phase, x, probe, k, eps)
    pad = 1.5 * np.sqrt(2.0 * 2.0**-k / qmin)

    half = omega_max + pad
    j = np.arange(-int(np.ceil(half / s)), int(np.ceil(half / s)) + 1)
    if nm1 == 1:
        centers = (j * s)[:, None]
    else:
        ja, jb = np.meshgrid(j, j, indexing="ij")
        centers = s * np.stack([ja.ravel(), jb.ravel()], axis=-1)
    return TubeFamily(phase, x, k, eps, centers, s, omega_max)
