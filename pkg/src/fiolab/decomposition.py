"""Kernel-mass diagnostics for the curvature split and the angular tubes.

Every estimate downstream leans on the L1 size of single-scale kernel rows,
so the integrators here place their mesh where the row actually lives: a
coarse sweep at the tangential scale finds the mass, the stationary curve
widens the box, and a fine sweep resolves the transversal beat.  All scans
carry a step-halving error estimate.
"""

import numpy as np

from .errors import DomainError, ResourceError
from .partition import (SPACING_FACTOR, TubePiece,  # noqa: F401
                        build_tube_family)
from .phases import K_MIN, OMEGA_MAX, q_of
from .stats import halton
from .symbols import DyadicSymbolPiece
from .tables import RadialTable, row_values, separable_row_parts

# fine mesh step in units of the transversal beat 2^{-k}
FINE_PPF = 2.5
# detection mesh step in units of the tangential scale 2^{-k/2}
COARSE_DIV = 3.0
# relative floor below which a detection sample is considered empty;
# the excluded far tail holds a few parts in a thousand of the row mass
DETECT_TAU = 1e-4
# hard budget on (fine points) x (angular nodes) per scan
COST_CAP = 2.0e10

_KIND = {"full": "full", "deg": "degenerate", "nondeg": "nondegenerate"}


class OperatorSpec:
    """Recipe for one dyadic operator family.

    variant "deg" keeps the flat-curvature portion of each scale slice,
    "nondeg" its complement, "full" the whole slice; the deg and nondeg
    slices always sum back to the full one.
    """

    def __init__(self, phase, symbol, eps, k_range, variant):
        if variant not in _KIND:
            raise DomainError("variant must be full, deg or nondeg")
        if not 0 < eps < 1:
            raise DomainError("eps must lie in (0, 1)")
        lo, hi = int(k_range[0]), int(k_range[1])
        if lo > hi:
            raise DomainError("empty scale range")
        if lo < K_MIN:
            raise DomainError(f"scale range must start at k >= {K_MIN}")
        self.phase = phase
        self.symbol = symbol
        self.eps = float(eps)
        self.k_range = (lo, hi)
        self.variant = variant

    def in_range(self, k):
        return self.k_range[0] <= k <= self.k_range[1]

    def piece(self, k):
        if not self.in_range(k):
            raise DomainError(
                f"k={k} outside the operator's range {self.k_range}")
        return DyadicSymbolPiece(self.symbol, self.phase, k, self.eps,
                                 _KIND[self.variant])


class L1Estimate:
    """L1 mass of one kernel row, with the half-resolution check."""

    def __init__(self, value, err, fine_points, box):
        self.value = float(value)
        self.err = float(err)
        self.fine_points = int(fine_points)
        self.box = box

    def __float__(self):
        return self.value

    def __repr__(self):
        return f"L1Estimate({self.value:.6g} +- {self.err:.2g})"


class TubeKernelMass(L1Estimate):
    """Tube-row L1 mass plus the share sitting inside the predicted spot."""

    def __init__(self, value, err, fine_points, box, disk_fraction):
        super().__init__(value, err, fine_points, box)
        self.disk_fraction = float(disk_fraction)


def _angular_support(angular, m=2001):
    """Tight [lo, hi] bracket of {angular > 0} on the cone slice, or None."""
    t = np.linspace(-OMEGA_MAX, OMEGA_MAX, m)
    v = np.abs(np.asarray(angular(t[:, None]), dtype=float))
    live = np.flatnonzero(v > 0)
    if live.size == 0:
        return None
    pad = 2.0 * OMEGA_MAX / (m - 1)
    return max(-OMEGA_MAX, t[live[0]] - pad), min(OMEGA_MAX, t[live[-1]] + pad)


def _ridge_points(phase, y, om):
    """The stationary curve x(omega) where the row mass concentrates."""
    om = np.asarray(om, dtype=float).reshape(-1, 1)
    gp = np.asarray(phase.grad_ptilde(om), dtype=float).reshape(-1)
    pt = np.asarray(phase.ptilde(om), dtype=float).reshape(-1)
    return np.stack([y[0] - gp, y[1] - (pt - om[:, 0] * gp)], axis=-1)


def _axis(lo, hi, target_h):
    # odd node count so the [::2] sublattice is the honest half-resolution rule
    m = 2 * max(1, int(np.ceil((hi - lo) / (2.0 * target_h))))
    return np.linspace(lo, hi, m + 1)


def _trapz_weights(ax):
    w = np.full(ax.size, ax[1] - ax[0])
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _scan_mesh(phase, piece, y, table=None, ppw=4.0):
    """Shared adaptive-mesh machinery: fine lattice, |K| values, weights."""
    if phase.n != 2:
        raise DomainError("kernel mass scans are implemented for n = 2")
    parts = separable_row_parts(piece)
    if parts is None:
        raise DomainError("piece does not factor for the table path")
    chi, radial, angular = parts
    k = piece.k
    a_k = piece.a_k if hasattr(piece, "a_k") else piece
    hw = float(a_k.base.x_halfwidth)
    y = np.asarray(y, dtype=float).reshape(2)
    if table is None:
        table = RadialTable.build(radial, k, 2)

    sup = _angular_support(angular)
    if sup is None:
        return None

    # coarse detection over the spatial window
    hc = 2.0 ** (-k / 2.0) / COARSE_DIV
    cax = _axis(-hw, hw, hc)
    cx, cy_ = np.meshgrid(cax, cax, indexing="ij")
    cpts = np.stack([cx.ravel(), cy_.ravel()], axis=-1)
    cvals = np.abs(row_values(phase, piece, cpts, y, ppw=ppw, table=table))
    amax = float(cvals.max(initial=0.0))
    cand = [cpts[cvals > DETECT_TAU * amax]] if amax > 0 else []

    # the stationary curve, padded by the table window, belts the detection
    om_probe = np.linspace(sup[0], sup[1], 201)
    ridge = _ridge_points(phase, y, om_probe)
    cand.append(ridge)
    cand = np.concatenate(cand, axis=0)
    qmax = float(np.max(q_of(om_probe[:, None], 2)))
    pad = 1.3 * table.s_half * qmax + 3.0 * hc
    lo = np.maximum(cand.min(axis=0) - pad, -hw)
    hi = np.minimum(cand.max(axis=0) + pad, hw)
    if np.any(hi <= lo):
        return None

    # fine pass at the transversal resolution
    hf = 2.0 ** (-k) / FINE_PPF
    ax0 = _axis(lo[0], hi[0], hf)
    ax1 = _axis(lo[1], hi[1], hf)
    gp = np.abs(np.asarray(phase.grad_ptilde(
        np.linspace(-OMEGA_MAX, OMEGA_MAX, 17)[:, None]), dtype=float)).max()
    xspan = max(abs(lo[0] - y[0]), abs(hi[0] - y[0]))
    m_est = max(64, int(np.ceil(2 * OMEGA_MAX * 2.0 ** (k + 1)
                                * (xspan + gp) * ppw)))
    # only cone nodes inside the angular support reach the sweep
    m_est = max(64, int(m_est * min(1.0, (sup[1] - sup[0]) / (2 * OMEGA_MAX))))
    if ax0.size * ax1.size * m_est > COST_CAP:
        raise ResourceError(
            f"row scan needs about {ax0.size * ax1.size * m_est:.2g} "
            f"kernel-node pairs (budget {COST_CAP:.2g})")
    fx, fy = np.meshgrid(ax0, ax1, indexing="ij")
    pts = np.stack([fx.ravel(), fy.ravel()], axis=-1)
    vals = np.abs(row_values(phase, piece, pts, y, ppw=ppw, table=table))
    V = vals.reshape(ax0.size, ax1.size)
    return pts, V, ax0, ax1


def _mesh_l1(V, ax0, ax1):
    w0, w1 = _trapz_weights(ax0), _trapz_weights(ax1)
    full = float(w0 @ V @ w1)
    half = float(_trapz_weights(ax0[::2]) @ V[::2, ::2]
                 @ _trapz_weights(ax1[::2]))
    return full, abs(full - half)


def kernel_l1_scan(phase, piece, y, table=None, ppw=4.0):
    """integral of |K(x, y)| dx for one single-scale piece."""
    mesh = _scan_mesh(phase, piece, y, table=table, ppw=ppw)
    if mesh is None:
        return L1Estimate(0.0, 0.0, 0, None)
    pts, V, ax0, ax1 = mesh
    value, err = _mesh_l1(V, ax0, ax1)
    box = ((float(ax0[0]), float(ax0[-1])), (float(ax1[0]), float(ax1[-1])))
    return L1Estimate(value, err, V.size, box)


def _check_probe(phase, symbol, y):
    """y must put some of the stationary curve inside the spatial window."""
    y = np.asarray(y, dtype=float).reshape(2)
    om = np.linspace(-OMEGA_MAX, OMEGA_MAX, 101)
    ridge = _ridge_points(phase, y, om)
    hw = float(getattr(symbol, "x_halfwidth", 1.0))
    if float(np.min(np.max(np.abs(ridge), axis=-1))) > hw + 0.1:
        raise DomainError("row probe y is out of reach of the spatial window")
    return y


def deg_kernel_l1(op, k, y, table=None):
    """L1 row mass keeping only the flat-curvature portion at scale k."""
    if op.variant != "deg":
        raise DomainError("deg_kernel_l1 needs a deg-variant operator")
    y = _check_probe(op.phase, op.symbol, y)
    return float(kernel_l1_scan(op.phase, op.piece(k), y, table=table))


def nodecay_kernel_l1(op, k, y, table=None):
    """L1 row mass of the whole scale-k slice."""
    if op.variant != "full":
        raise DomainError("nodecay_kernel_l1 needs a full-variant operator")
    y = _check_probe(op.phase, op.symbol, y)
    return float(kernel_l1_scan(op.phase, op.piece(k), y, table=table))


def tube_kernel_l1(phase, tube, y, table=None, dilation=8.0,
                   cell_volume=None):
    """Tube-row L1 mass and the fraction inside the predicted spot.

    The value carries the angular lattice cell measure, so the rows sum
    against their lattice the way the family average composes them; with
    it the natural normalization 2^{(n-1)k/2} * value is flat in k.  The
    spot: stationary time within dilation * 2^{-k} of zero and the
    straightened angular gradient within dilation * 2^{-k/2}, both taken
    at the tube's own center direction.
    """
    if not isinstance(tube, TubePiece):
        raise DomainError("tube_kernel_l1 wants a tube piece")
    if cell_volume is None:
        cell_volume = (SPACING_FACTOR * 2.0 ** (-tube.k / 2.0)) \
            ** (phase.n - 1)
    y = np.asarray(y, dtype=float).reshape(2)
    mesh = _scan_mesh(phase, tube, y, table=table)
    if mesh is None:
        return TubeKernelMass(0.0, 0.0, 0, None, 1.0)
    pts, V, ax0, ax1 = mesh
    value, err = _mesh_l1(V, ax0, ax1)
    value *= cell_volume
    err *= cell_volume
    box = ((float(ax0[0]), float(ax0[-1])), (float(ax1[0]), float(ax1[-1])))
    if value == 0.0:
        return TubeKernelMass(0.0, err, V.size, box, 1.0)

    k = tube.k
    omd = tube.omega_d
    sig = np.asarray(phase.phase_omega(pts, omd), dtype=float) \
        - (y[0] * float(omd[0]) + y[1])
    grad = np.asarray(phase.grad_omega(pts, omd), dtype=float)[..., 0] - y[0]
    qis = tube.curv.Q_inv_sqrt()
    zn = np.abs(float(qis[0, 0]) * grad)
    inside = (np.abs(sig) <= dilation * 2.0 ** (-k)) \
        & (zn <= dilation * 2.0 ** (-k / 2.0))
    w0, w1 = _trapz_weights(ax0), _trapz_weights(ax1)
    wxy = np.outer(w0, w1).ravel()
    mass_in = float(np.sum(V.ravel() * wxy * inside)) * cell_volume
    return TubeKernelMass(value, err, V.size, box, mass_in / value)


def taylor_remainder_scan(phase, tube, samples=200, radius=None):
    """First-order remainder of the row phase across one tube.

    Offsets zeta fill the straightened tube ball; the remainder e(zeta) of
    the angular phase about the tube center is compared against its
    half-Hessian model, with everything reported in the scalings that make
    the bounds scale-free: 2^k e and 2^{3k/2} (e - model).
    """
    if samples < 100:
        raise DomainError("at least 100 sample offsets")
    if not isinstance(tube, TubePiece):
        raise DomainError("taylor_remainder_scan wants a tube piece")
    nm1 = phase.n - 1
    k = tube.k
    x = tube.x
    a = np.sqrt(2.0) * 1.02 if radius is None else float(radius)
    zs = (halton(samples, nm1) * 2.0 - 1.0) * a
    qis = tube.curv.Q_inv_sqrt()
    delta = 2.0 ** (-k / 2.0) * (zs @ qis.T)
    om0 = tube.omega_d

    g0 = float(phase.phase_omega(x, om0))
    gr = np.asarray(phase.grad_omega(x, om0), dtype=float).reshape(nm1)
    H = np.asarray(phase.hess_omega(x, om0), dtype=float).reshape(nm1, nm1)
    gv = np.asarray(phase.phase_omega(x, om0[None, :] + delta), dtype=float)
    e = gv - g0 - delta @ gr
    lead = 0.5 * np.einsum("si,ij,sj->s", delta, H, delta)
    return TaylorRemainderReport(
        k=k, omega_d=np.array(om0, dtype=float), x=np.array(x, dtype=float),
        samples=int(samples),
        max_abs_e=float(np.max(np.abs(e))),
        sup_lambda_e=float(np.max(np.abs(e)) * 2.0 ** k),
        max_cubic_dev=float(np.max(np.abs(e - lead)) * 2.0 ** (1.5 * k)))


class TaylorRemainderReport:
    """Scale-free sizes of the row-phase remainder across one tube."""

    def __init__(self, k, omega_d, x, samples, max_abs_e, sup_lambda_e,
                 max_cubic_dev):
        self.k = k
        self.omega_d = omega_d
        self.x = x
        self.samples = samples
        self.max_abs_e = max_abs_e
        self.sup_lambda_e = sup_lambda_e
        self.max_cubic_dev = max_cubic_dev

    def __repr__(self):
        return (f"TaylorRemainderReport(k={self.k}, "
                f"sup_lambda_e={self.sup_lambda_e:.3g}, "
                f"cubic_dev={self.max_cubic_dev:.3g})")


class DecayFit:
    """Least-squares line through (k, log2 value); the measured exponent."""

    def __init__(self, series):
        pts = [(int(k), float(v)) for k, v in series]
        if len(pts) < 4:
            raise DomainError("a decay fit needs at least 4 points")
        if any(v <= 0 for _, v in pts):
            raise DomainError("decay fit values must be positive")
        ks = np.array([k for k, _ in pts], dtype=float)
        lv = np.log2([v for _, v in pts])
        kbar = ks.mean()
        sxx = float(np.sum((ks - kbar) ** 2))
        if sxx == 0.0:
            raise DomainError("decay fit needs at least two distinct scales")
        slope = float(np.sum((ks - kbar) * (lv - lv.mean())) / sxx)
        intercept = float(lv.mean() - slope * kbar)
        resid = lv - (slope * ks + intercept)
        dof = max(1, len(pts) - 2)
        self.slope = slope
        self.intercept = intercept
        self.stderr = float(np.sqrt(np.sum(resid ** 2) / dof / sxx))
        self.points = tuple(pts)

    def __repr__(self):
        return f"DecayFit(slope={self.slope:.4f} +- {self.stderr:.4f})"


def anisotropy_report(family):
    """Axis ratio of every regularization ellipsoid in a tube family.

    The ratio is (largest / smallest regularized eigenvalue)^{1/2}, the
    aspect of the level ellipsoids of the straightening form.
    """
    qe = family.curv.q_eigenvalues
    ratio = np.sqrt(np.max(qe, axis=-1) / np.min(qe, axis=-1))
    return {"max_ratio": float(ratio.max()), "min_ratio": float(ratio.min()),
            "ratios": ratio}
