"""Splitting each curved-shell slice through the damped average.

Writing a nondegenerate slice as a smoothing step composed with the
curvature-damped average leaves a remainder operator per scale.  This
module carries every piece of that split: the shared order-zero row
amplitude of the smoothing step, per-band tables of the difference
between the slice and the composed step, adaptive scans of the
remainder's row mass (tube-following at fine scales), a gridded
remainder apply, a localized frequency-window diagnostic compared
against its leading term, and identity checks for the angular critical
point that organizes all of the above.
"""

import numpy as np

from ._loops import cr_eval, e_row_sum
from .averaging import AveragingSpec, apply_A, default_weight
from .bumps import eta_k, phi_k, rho
from .decomposition import (COST_CAP, L1Estimate, _angular_support, _axis,
                            _trapz_weights)
from .errors import (AccuracyError, BandError, ConsistencyError, DomainError,
                     InversionError, ResourceError)
from .geometry import invert_grad_x
from .grids import GriddedFunction
from .oscillatory import apply_fio, apply_multiplier
from .phases import K_MIN, OMEGA_MAX, q_of
from .symbols import (DyadicSymbolPiece, SeparableSymbol, default_symbol,
                      spatial_bump)

EPS_DEFAULT = 0.25

# band-table shape: offset half-window 64 * 2^-k, envelope samples at 4 per
# window unit, stored samples at 24 per demodulated carrier wavelength
E_S_FACTOR = 64.0
E_PPU = 4.0
E_PPS = 24.0
E_NLAM = 96           # coarse nodes for the smooth average-side factor
E_NOMEGA = 128        # angular columns
E_PPW_INNER = 8.0     # node density of the average-side angular quadrature
E_CHEB_C = 6          # speed nodes when the phase speed varies
E_CBIN = 0.002        # speed quantization of the sweep slabs
E_EDGE_TOL = 1e-3     # stored window must contain the transform to this level
E_TRIM_TAU = 1e-5

# scans: fine step 2^-k / 2.5 across the tube, 2^{-k/2} / 3 along it;
# tube-following charts take over where the tube is thin enough to not fold
FINE_PPF = 2.5
RIDGE_PPF = 3.0
RING_MIN_K = 7
TUBE_GUARD = 1.4      # chart half-width in units of the table half-window


# ---------------------------------------------------------------------------
# the order-zero row amplitude shared by every scale


class PseudoSymbol:
    """Row amplitude s(x, zeta) = lam^{(n-1)/2} a(x, xi*) / varphi(x, om*).

    xi* inverts the frequency-to-output gradient map at (x, zeta); for a
    translation invariant phase that map is the identity.  Where the base
    amplitude vanishes the value is zero; where it does not, the weight
    plateau must cover it, so the division never amplifies anything.
    """

    def __init__(self, phase, base, weight, lam_floor=None, pad=0.1):
        if phase.n != base.n:
            raise DomainError("phase and amplitude dimensions differ")
        self.phase = phase
        self.base = base
        self.weight = weight
        self.n = phase.n
        self.order = float(base.order) + (phase.n - 1) / 2.0
        self.x_halfwidth = float(base.x_halfwidth)
        self.name = f"lifted({base.name})"
        # padded hull of frequencies the amplitude can reach: outside it the
        # value is zero without attempting any inversion
        self.lam_floor = (0.45 * 2.0**K_MIN if lam_floor is None
                          else float(lam_floor))
        self.om_ceil = 2.0 * OMEGA_MAX + float(pad)

    def _invert(self, x, zeta):
        """Vectorized gradient-map inversion for speed-times-p phases."""
        gc = np.asarray(self.phase.grad_c(x), dtype=float)
        p = np.asarray(self.phase.p(zeta), dtype=float)
        xi = zeta - gc * p[..., None]
        for _ in range(12):
            p = np.asarray(self.phase.p(xi), dtype=float)
            xi = zeta - gc * p[..., None]
        return xi

    def eval(self, x, zeta):
        x = np.asarray(x, dtype=float)
        zeta = np.asarray(zeta, dtype=float)
        shape = np.broadcast_shapes(x[..., 0].shape, zeta[..., 0].shape)
        xb = np.broadcast_to(x, shape + (self.n,)).reshape(-1, self.n)
        zb = np.broadcast_to(zeta, shape + (self.n,)).reshape(-1, self.n)
        lam = zb[:, -1]
        safe = np.where(lam > 0, lam, 1.0)
        omn = np.sqrt(np.sum((zb[:, :-1] / safe[:, None]) ** 2, axis=-1))
        inside = (lam >= self.lam_floor) & (omn <= self.om_ceil)
        out = np.zeros(xb.shape[0])
        if not np.any(inside):
            return out.reshape(shape)
        xs, zs = xb[inside], zb[inside]
        xi = self._invert(xs, zs)
        res = np.linalg.norm(self.phase.grad_x(xs, xi) - zs, axis=-1)
        bad = res > 1e-8 * (np.linalg.norm(zs, axis=-1) + 1.0)
        if np.any(bad):
            xi = self._rescue(xs, zs, xi, bad)
        ls = xi[:, -1]
        good = ls > 0
        lsafe = np.where(good, ls, 1.0)
        val = np.where(good, np.asarray(self.base.eval(xs, xi)),
                       0.0) * lsafe ** ((self.n - 1) / 2.0)
        om = xi[:, :-1] / lsafe[:, None]
        w = np.asarray(self.weight(xs, om), dtype=float)
        live = val != 0.0
        if np.any(live & (w < 1e-12)):
            raise ConsistencyError(
                "weight vanishes on the amplitude support; the row "
                "amplitude would blow up there")
        out[inside] = np.where(live, val / np.where(w == 0.0, 1.0, w), 0.0)
        return out.reshape(shape)

    __call__ = eval

    def _rescue(self, xs, zs, xi, bad):
        idx = np.flatnonzero(bad)
        for i in idx:
            try:
                xi[i] = invert_grad_x(self.phase, xs[i], zs[i])
            except InversionError as exc:
                raise ConsistencyError(
                    "gradient-map inversion failed inside the padded "
                    f"frequency hull at zeta={zs[i]}") from exc
        return xi


def build_s(phase, base=None, weight=None):
    """The default row amplitude for a phase: lifted default symbol."""
    if base is None:
        base = default_symbol(phase.n)
    if weight is None:
        weight = default_weight(phase.n, x_halfwidth=base.x_halfwidth)
    return PseudoSymbol(phase, base, weight)


# ---------------------------------------------------------------------------
# angular critical point identities


def verify_stationarity_identities(phase, x=None, omega_probe=0.04,
                                   omega_prime=0.1, k=8, lam_prime=None):
    """fd-vs-closed checks on F(om) = xi' . grad_xi Phi(x, (om, 1)).

    Three identities: the gradient form lam' (om' - om) H(x, om) with H the
    angular Hessian entry, the critical Hessian -lam' H(x, om'), and the
    homogeneity collapse F(om') = Phi(x, xi').  Residuals are reported
    relative to lam'.
    """
    if phase.n != 2:
        raise DomainError("identity checks are implemented for n = 2")
    if x is None:
        x = np.array([0.1, -0.05])
    x = np.asarray(x, dtype=float)
    lam_p = 1.2 * 2.0**k if lam_prime is None else float(lam_prime)
    om_p = float(omega_prime)
    xi_p = lam_p * np.array([om_p, 1.0])

    def F(om):
        pb = np.asarray(phase.pullback(x, np.asarray(om)), dtype=float)
        return pb @ xi_p

    h1 = 1e-6
    om0 = float(omega_probe)
    fd_grad = (F(om0 + h1) - F(om0 - h1)) / (2.0 * h1)
    H0 = float(np.asarray(phase.hess_omega(x, om0))[..., 0, 0])
    closed_grad = lam_p * (om_p - om0) * H0
    r_grad = abs(fd_grad - closed_grad) / lam_p

    h2 = 3e-4
    fd_hess = (F(om_p + h2) - 2.0 * F(om_p) + F(om_p - h2)) / h2**2
    Hp = float(np.asarray(phase.hess_omega(x, om_p))[..., 0, 0])
    r_hess = abs(fd_hess + lam_p * Hp) / lam_p

    r_euler = abs(F(om_p) - float(phase.eval(x, xi_p))) / max(
        abs(float(phase.eval(x, xi_p))), 1.0)

    tols = {"grad": 1e-8, "hess": 1e-6, "euler": 1e-12}
    res = {"grad": r_grad, "hess": r_hess, "euler": r_euler}
    return {"residuals": res, "tolerances": tols, "lam_prime": lam_p,
            "ok": all(res[key] <= tols[key] for key in res)}


# ---------------------------------------------------------------------------
# per-band difference tables


class EBandTable:
    """Transform of the slice-minus-composed-average envelope at one scale.

    values[c, w, i] holds the demodulated offset transform for speed node c
    and angular column w; the sweep kernel interpolates it and restores the
    carrier exp(2 pi i r0 s).
    """

    def __init__(self, values, s_lo, ds, r0, om0, dom, k, cnodes, meta):
        self.values = np.ascontiguousarray(values, dtype=complex)
        self.s_lo = float(s_lo)
        self.ds = float(ds)
        self.r0 = float(r0)
        self.om0 = float(om0)
        self.dom = float(dom)
        self.k = int(k)
        self.cnodes = np.asarray(cnodes, dtype=float)
        self.meta = dict(meta)

    @property
    def s_half(self):
        ns = self.values.shape[2]
        return 0.5 * (ns - 1) * self.ds

    @property
    def s_hi(self):
        return self.s_lo + (self.values.shape[2] - 1) * self.ds

    @property
    def nu_max(self):
        """Reach of the stored offset window on either side of the ridge."""
        return max(abs(self.s_lo), abs(self.s_hi))

    def premix(self, cval):
        """Collapse the speed axis onto quantized slabs for one sweep."""
        cval = np.asarray(cval, dtype=float)
        if self.cnodes.size == 1:
            return self.values, np.zeros(cval.shape, dtype=np.int64)
        c_lo, c_hi = self.cnodes.min(), self.cnodes.max()
        bins = np.round((cval - c_lo) / E_CBIN).astype(np.int64)
        uniq, slab = np.unique(bins, return_inverse=True)
        centers = np.clip(c_lo + uniq * E_CBIN, c_lo, c_hi)
        wts = np.ones((centers.size, self.cnodes.size))
        for j in range(self.cnodes.size):
            for l in range(self.cnodes.size):
                if l != j:
                    wts[:, j] *= ((centers - self.cnodes[l])
                                  / (self.cnodes[j] - self.cnodes[l]))
        mixed = np.tensordot(wts, self.values, axes=(1, 0))
        return np.ascontiguousarray(mixed), slab.reshape(cval.shape)

    @classmethod
    def build(cls, phase, k, base=None, weight=None, eps=EPS_DEFAULT,
              nomega=E_NOMEGA, nlam=E_NLAM, ppw_inner=E_PPW_INNER,
              s_factor=E_S_FACTOR, sign=1):
        if phase.n != 2:
            raise DomainError("band tables are implemented for n = 2")
        if k < K_MIN:
            raise DomainError(f"k must be >= {K_MIN}")
        if base is None:
            base = default_symbol(2)
        if not isinstance(base, SeparableSymbol):
            raise DomainError("band tables need a separable amplitude")
        if weight is None:
            weight = default_weight(2, x_halfwidth=base.x_halfwidth)

        if phase.translation_invariant():
            cnodes = np.array([1.0])
        else:
            c_lo, c_hi = phase.c_range()
            mid, half = 0.5 * (c_lo + c_hi), 0.5 * (c_hi - c_lo)
            j = np.arange(E_CHEB_C)
            cnodes = mid + half * np.cos((2 * j + 1) * np.pi / (2 * E_CHEB_C))

        sup = _angular_support(base.angular)
        if sup is None:
            raise DomainError("amplitude has empty angular support")
        span = sup[1] - sup[0]
        mid_om = 0.5 * (sup[0] + sup[1])
        dom = 1.12 * span / (nomega - 1)
        om0 = mid_om - 0.5 * (nomega - 1) * dom
        om_cols = om0 + dom * np.arange(nomega)
        q_cols = np.sqrt(1.0 + om_cols**2)
        pt_cols = np.asarray(phase.ptilde(om_cols[:, None]),
                             dtype=float).reshape(-1)

        lam_lo = 2.0 ** (k - 1) / float(q_cols.max())
        lam_hi = 2.0 ** (k + 1)
        s_max = s_factor * 2.0**-k
        du = 1.0 / (E_PPU * s_max)
        nu = int(np.ceil((lam_hi - lam_lo) / du))
        lam_f = lam_lo + (np.arange(nu) + 0.5) * du
        r0 = 0.5 * (lam_lo + lam_hi)
        half_bw = 0.5 * (lam_hi - lam_lo)
        M = 1 << int(np.ceil(np.log2(E_PPS * half_bw / du)))
        ds = 1.0 / (M * du)
        Lm = int(np.floor(s_max / ds))
        ls = np.arange(-Lm, Lm + 1)
        s_ax = ls * ds

        ext = 3.0 * (lam_hi - lam_lo) / (nlam - 6)
        lamc = np.linspace(lam_lo - ext, lam_hi + ext, nlam)
        dc = lamc[1] - lamc[0]
        t_fine = (lam_f - lamc[0]) / dc

        # average-side angular quadrature over the weight's support
        wsup = _angular_support(weight.angular)
        wspan = wsup[1] - wsup[0]
        hb = max(abs(om_cols[0]), abs(om_cols[-1])) + max(abs(wsup[0]),
                                                          abs(wsup[1]))
        m1 = max(512, int(np.ceil(ppw_inner * wspan * lam_hi
                                  * float(cnodes.max()) * hb * 1.1)))
        w1 = wsup[0] + (np.arange(m1) + 0.5) * wspan / m1
        dw1 = wspan / m1
        th1 = np.asarray(phase.theta(w1[:, None]), dtype=float)
        J1_in = np.asarray(phase.hess_ptilde(w1[:, None]),
                           dtype=float)[..., 0, 0]
        rw1 = np.asarray(weight.angular(w1[:, None]), dtype=float)
        J_cols = np.asarray(phase.hess_ptilde(om_cols[:, None]),
                            dtype=float)[..., 0, 0]

        vals = np.empty((cnodes.size, nomega, s_ax.size), dtype=complex)
        demod = np.exp(2j * np.pi * (lam_lo + 0.5 * du - r0) * s_ax)
        for ci, c in enumerate(cnodes):
            Jc = c * J1_in
            gate_in = 1.0 - phi_k(Jc, -eps * k)
            coef = (dw1 * rw1 * gate_in * np.sqrt(np.abs(Jc))
                    * np.exp(1j * (np.pi / 4.0) * sign * np.sign(Jc)))
            g_out = 1.0 - phi_k(c * J_cols, -eps * k)
            for wi in range(nomega):
                h1 = om_cols[wi] * th1[:, 0] + th1[:, 1]
                Mcol = np.exp((2j * np.pi * c) * np.outer(lamc, h1)) @ coef
                U = np.sqrt(lamc) * np.exp(
                    (-2j * np.pi * c * pt_cols[wi]) * lamc) * Mcol
                Uf = cr_eval(U, t_fine)
                rad = np.asarray(base.radial(lam_f * q_cols[wi]), dtype=float)
                G = lam_f * rad * eta_k(lam_f * q_cols[wi], k) * (g_out[wi]
                                                                  - Uf)
                spec = M * np.fft.ifft(G, n=M)
                vals[ci, wi] = du * demod * spec[ls % M]

        profile = np.max(np.abs(vals), axis=(0, 1))
        gmax = float(profile.max())
        edge = max(profile[0], profile[-1]) / gmax
        if edge > E_EDGE_TOL:
            raise AccuracyError(
                f"offset window too small at k={k}: edge level {edge:.2e}")
        keep = np.flatnonzero(profile > E_TRIM_TAU * gmax)
        i0 = max(0, keep[0] - 4)
        i1 = min(s_ax.size - 1, keep[-1] + 4)
        meta = {"lam_lo": lam_lo, "lam_hi": lam_hi, "m1": m1, "nlam": nlam,
                "edge_ratio": float(edge), "eps": float(eps),
                "s_max": s_max, "untrimmed": s_ax.size}
        return cls(vals[:, :, i0:i1 + 1], s_ax[i0], ds, r0, om0, dom, k,
                   cnodes, meta)


def build_e_tables(phase, k_range, **kw):
    """Difference tables for every scale in the closed range."""
    lo, hi = int(k_range[0]), int(k_range[1])
    return {k: EBandTable.build(phase, k, **kw) for k in range(lo, hi + 1)}


# ---------------------------------------------------------------------------
# remainder row evaluation and mass scans


def _e_ridge(phase, z, om):
    """Stationary curve of the row at source z, with unit normals."""
    om = np.asarray(om, dtype=float)
    gp = np.asarray(phase.grad_ptilde(om[:, None]), dtype=float).reshape(-1)
    pt = np.asarray(phase.ptilde(om[:, None]), dtype=float).reshape(-1)
    x = np.stack([z[0] - gp, z[1] - (pt - om * gp)], axis=-1)
    # the speed enters its own locus; a couple of sweeps settle it
    for _ in range(3):
        c = np.asarray(phase.c(x), dtype=float)
        x = np.stack([z[0] - c * gp, z[1] - c * (pt - om * gp)], axis=-1)
    q = np.sqrt(1.0 + om**2)
    nhat = np.stack([om / q, 1.0 / q], axis=-1)
    return x, nhat


def _band_nodes(base, k, reach, ppw):
    sup = _angular_support(base.angular)
    span = sup[1] - sup[0]
    m = max(64, int(np.ceil(ppw * span * 2.0 ** (k + 1) * reach * 1.15)))
    om = sup[0] + (np.arange(m) + 0.5) * span / m
    wang = (span / m) * np.asarray(base.angular(om[:, None]), dtype=float)
    return om, wang


def _band_row(phase, table, base, z, pts, ppw=4.0):
    """Remainder row values at arbitrary points, one scale."""
    pts = np.asarray(pts, dtype=float).reshape(-1, 2)
    z = np.asarray(z, dtype=float)
    chi = np.asarray(base.chi(pts), dtype=float)
    cval = np.broadcast_to(np.asarray(phase.c(pts), dtype=float),
                           chi.shape).astype(float)
    c_hi = float(cval.max()) if cval.size else 1.0
    sup = _angular_support(base.angular)
    gprobe = np.asarray(phase.grad_ptilde(
        np.linspace(sup[0], sup[1], 129)[:, None]), dtype=float)
    reach = (float(np.max(np.abs(pts[:, 0] - z[0]))) if pts.size else 0.0)
    reach += c_hi * float(np.max(np.abs(gprobe)))
    om, wang = _band_nodes(base, table.k, reach, ppw)
    if pts.shape[0] * om.size > COST_CAP:
        raise ResourceError(
            f"row sweep needs {pts.shape[0] * om.size:.2e} point-node pairs")
    qom = np.asarray(phase.ptilde(om[:, None]), dtype=float).reshape(-1)
    tabs, slab = table.premix(cval)
    out = np.empty(pts.shape[0], dtype=complex)
    e_row_sum(np.ascontiguousarray(pts[:, 0]), np.ascontiguousarray(pts[:, 1]),
              chi, cval, slab, om, qom, wang, tabs, table.om0,
              1.0 / table.dom, table.s_lo, 1.0 / table.ds, table.r0,
              float(z[0]), float(z[1]), out)
    return out


def _ridge_axis(phase, base, z, k, hw, numax, ppf_t=RIDGE_PPF):
    sup = _angular_support(base.angular)
    marg = 12.0 * 2.0 ** (-k / 2.0)
    om_t = _axis(sup[0] - marg, sup[1] + marg, 2.0 ** (-k / 2.0) / ppf_t)
    R, nhat = _e_ridge(phase, z, om_t)
    keep = np.linalg.norm(R, axis=-1) <= hw + numax + 0.1
    if not np.any(keep):
        return None
    lo, hi = np.flatnonzero(keep)[[0, -1]]
    lo, hi = max(0, lo - 1), min(om_t.size - 1, hi + 1)
    return om_t[lo:hi + 1], R[lo:hi + 1], nhat[lo:hi + 1]


def _ring_mesh(phase, base, z, k, table, ppf=FINE_PPF, ppf_t=RIDGE_PPF):
    """Tube-following chart: ridge parameter times normal offset."""
    numax = 1.05 * table.nu_max
    ax = _ridge_axis(phase, base, z, k, base.x_halfwidth, numax,
                     ppf_t=ppf_t)
    if ax is None:
        raise DomainError("row support lies outside the amplitude box")
    om_t, R, nhat = ax
    nu = _axis(-numax, numax, 2.0**-k / ppf)
    pts = R[:, None, :] + nu[None, :, None] * nhat[:, None, :]
    dR = np.gradient(R, om_t, axis=0)
    dn = np.gradient(nhat, om_t, axis=0)
    a0 = dR[:, None, 0] + nu[None, :] * dn[:, None, 0]
    a1 = dR[:, None, 1] + nu[None, :] * dn[:, None, 1]
    jac = a0 * nhat[:, None, 1] - a1 * nhat[:, None, 0]
    sgn = np.sign(jac[jac.shape[0] // 2, jac.shape[1] // 2])
    if np.any(sgn * jac <= 0.0):
        raise DomainError(f"tube chart folds at k={k}; use the box mesh")
    wts = (np.outer(_trapz_weights(om_t), _trapz_weights(nu))
           * np.abs(jac))
    return pts, wts


def _box_mesh(phase, base, z, k, table, ppf=FINE_PPF):
    sup = _angular_support(base.angular)
    om_probe = np.linspace(sup[0], sup[1], 257)
    R, _ = _e_ridge(phase, z, om_probe)
    h = 2.0**-k / ppf
    pad = 1.1 * table.nu_max + 3.0 * h
    hw = base.x_halfwidth + 2.0 * h
    lo0 = max(R[:, 0].min() - pad, -hw)
    hi0 = min(R[:, 0].max() + pad, hw)
    lo1 = max(R[:, 1].min() - pad, -hw)
    hi1 = min(R[:, 1].max() + pad, hw)
    if lo0 >= hi0 or lo1 >= hi1:
        raise DomainError("row support lies outside the amplitude box")
    ax0 = _axis(lo0, hi0, h)
    ax1 = _axis(lo1, hi1, h)
    pts = np.stack(np.meshgrid(ax0, ax1, indexing="ij"), axis=-1)
    wts = np.outer(_trapz_weights(ax0), _trapz_weights(ax1))
    return pts, wts


def _mesh_mass(vals, wts):
    full = float(np.sum(wts * np.abs(vals)))
    half = float(np.sum(4.0 * wts[::2, ::2] * np.abs(vals[::2, ::2])))
    return full, abs(full - half)


def e_band_l1(phase, k, z, table=None, base=None, weight=None,
              eps=EPS_DEFAULT, ppw=4.0, force_box=False, ppf=FINE_PPF,
              ppf_t=RIDGE_PPF):
    """L1 mass of one remainder row, with a step-halving error estimate."""
    if base is None:
        base = default_symbol(2)
    if table is None:
        table = EBandTable.build(phase, k, base=base, weight=weight, eps=eps)
    if k >= RING_MIN_K and not force_box:
        pts, wts = _ring_mesh(phase, base, z, k, table, ppf=ppf, ppf_t=ppf_t)
        kind = "ring"
    else:
        pts, wts = _box_mesh(phase, base, z, k, table, ppf=ppf)
        kind = "box"
    vals = _band_row(phase, table, base, z, pts, ppw=ppw).reshape(wts.shape)
    full, err = _mesh_mass(vals, wts)
    est = L1Estimate(full, err, wts.size, None)
    est.mesh = kind
    return est


def e_partial_l1(phase, z, k_hi, k_lo=None, tables=None, base=None,
                 weight=None, eps=EPS_DEFAULT, ppw=4.0):
    """L1 mass of the remainder rows accumulated over scales k_lo..k_hi.

    The field is summed before taking the modulus: a wide box mesh carries
    the coarse scales, and inside the common tube a graded normal-offset
    chart refines level by level so each scale is resolved exactly where
    its table is alive.
    """
    if base is None:
        base = default_symbol(2)
    k_lo = K_MIN + 1 if k_lo is None else int(k_lo)
    k_hi = int(k_hi)
    if k_lo > k_hi:
        raise DomainError("empty scale range")
    if tables is None:
        tables = {}
    for k in range(k_lo, k_hi + 1):
        if k not in tables:
            tables[k] = EBandTable.build(phase, k, base=base, weight=weight,
                                         eps=eps)
    z = np.asarray(z, dtype=float)
    k_mid = min(RING_MIN_K - 1, k_hi)
    ax = None
    if k_hi >= RING_MIN_K:
        numax = TUBE_GUARD * tables[RING_MIN_K].nu_max
        ax = _ridge_axis(phase, base, z, k_hi, base.x_halfwidth, numax)

    # wide piece: every scale the box resolution can carry, cut out along
    # the tube chart's own axis so the two meshes tile without overlap
    pts, wts = _box_mesh(phase, base, z, k_mid, tables[k_lo])
    flat = pts.reshape(-1, 2)
    acc = np.zeros(flat.shape[0], dtype=complex)
    for k in range(k_lo, k_mid + 1):
        acc += _band_row(phase, tables[k], base, z, flat, ppw=ppw)
    npts = wts.size
    if ax is not None:
        d_cut = TUBE_GUARD * tables[RING_MIN_K].nu_max
        R = ax[1]
        dist = np.full(flat.shape[0], np.inf)
        for lo in range(0, flat.shape[0], 65536):
            blk = flat[lo:lo + 65536]
            d2 = ((blk[:, None, 0] - R[None, :, 0]) ** 2
                  + (blk[:, None, 1] - R[None, :, 1]) ** 2)
            dist[lo:lo + 65536] = np.sqrt(d2.min(axis=1))
        acc[dist <= d_cut] = 0.0
    vals = acc.reshape(wts.shape)
    value, err = _mesh_mass(vals, wts)

    # tube piece: graded offsets, finest level innermost; a band vanishes
    # identically outside its own offset window, so each shell only sweeps
    # the scales that can reach it
    if ax is not None:
        om_t, R, nhat = ax
        wt_t = _trapz_weights(om_t)
        dR = np.gradient(R, om_t, axis=0)
        dn = np.gradient(nhat, om_t, axis=0)
        bounds = [TUBE_GUARD * tables[j].nu_max
                  for j in range(RING_MIN_K, k_hi + 1)] + [0.0]
        for li, j in enumerate(range(RING_MIN_K, k_hi + 1)):
            hi_b, lo_b = bounds[li], bounds[li + 1]
            if j == k_hi:
                segs = [_axis(-hi_b, hi_b, 2.0**-j / FINE_PPF)]
            else:
                seg = _axis(lo_b, hi_b, 2.0**-j / FINE_PPF)
                segs = [seg, -seg]
            for nu in segs:
                pts = R[:, None, :] + nu[None, :, None] * nhat[:, None, :]
                a0 = dR[:, None, 0] + nu[None, :] * dn[:, None, 0]
                a1 = dR[:, None, 1] + nu[None, :] * dn[:, None, 1]
                jac = np.abs(a0 * nhat[:, None, 1]
                             - a1 * nhat[:, None, 0])
                wts = np.outer(wt_t, _trapz_weights(nu)) * jac
                flat = pts.reshape(-1, 2)
                acc = np.zeros(flat.shape[0], dtype=complex)
                for k in range(k_lo, j + 1):
                    acc += _band_row(phase, tables[k], base, z, flat,
                                     ppw=ppw)
                v, e = _mesh_mass(acc.reshape(wts.shape), wts)
                value += v
                err += e
                npts += wts.size
    out = L1Estimate(value, err, npts, None)
    out.k_range = (k_lo, k_hi)
    return out


# ---------------------------------------------------------------------------
# gridded remainder apply


def apply_E(phase, f, bands, base=None, weight=None, eps=EPS_DEFAULT,
            ppw=4.0):
    """Remainder applied on the grid: slice minus smoothing-after-average.

    Needs a translation invariant phase, where the smoothing step is an
    exact Fourier multiplier under the spatial envelope; for an x-dependent
    speed use the row scans instead.
    """
    if not phase.translation_invariant():
        raise DomainError("gridded remainder needs a translation invariant "
                          "phase; use the row scans for varying speed")
    if base is None:
        base = default_symbol(phase.n)
    if weight is None:
        weight = default_weight(phase.n, x_halfwidth=base.x_halfwidth)
    bands = [int(k) for k in np.atleast_1d(bands)]
    for k in bands:
        if not f.grid.band_ok(k):
            raise BandError(f"band {k} exceeds the grid Nyquist")
    aspec = AveragingSpec(phase, weight=weight, eps=eps,
                          k_range=(min(bands), max(bands)))
    nn = phase.n

    def smul(xi):
        lam = xi[..., -1]
        good = lam > 0
        safe = np.where(good, lam, 1.0)
        r = np.sqrt(np.sum(xi * xi, axis=-1))
        om = xi[..., :-1] / safe[..., None]
        ang = np.where(good, np.asarray(base.angular(om), dtype=float), 0.0)
        return safe ** ((nn - 1) / 2.0) * base.radial(r) * ang * good

    chi = np.asarray(base.chi(f.grid.mesh()), dtype=float)
    total = np.zeros((f.grid.N,) * nn, dtype=complex)
    for k in bands:
        piece = DyadicSymbolPiece(base, phase, k, eps, "nondegenerate")
        t1 = apply_fio(phase, piece, f)
        g = apply_A(aspec, f, bands=[k], ppw=ppw)
        # the averaged field is band-limited already, so restricting the
        # smoothing multiplier to the lattice loses nothing
        t2 = apply_multiplier(g, smul, band_check=False)
        total += t1.values - chi * t2.values
    return GriddedFunction(f.grid, total)


# ---------------------------------------------------------------------------
# localized frequency-window diagnostic


class WDiagnostic:
    """Windowed triple integral W, its leading term W0, and their gap."""

    def __init__(self, W, W0, k, x, xi_prime, z, method, radii, npoints,
                 tail=None):
        self.W = complex(W)
        self.W0 = complex(W0)
        self.k = int(k)
        self.x = np.asarray(x, dtype=float)
        self.xi_prime = np.asarray(xi_prime, dtype=float)
        self.z = None if z is None else np.asarray(z, dtype=float)
        self.method = method
        self.radii = dict(radii)
        self.npoints = dict(npoints)
        self.tail = tail
        self.gap = abs(self.W - self.W0)
        self.scaled_gap = 2.0 ** (0.5 * k) * self.gap

    def __repr__(self):
        return (f"WDiagnostic(k={self.k}, |W|={abs(self.W):.4g}, "
                f"|W-W0|={self.gap:.3g}, method={self.method})")


def _y_window_fft(varphi, x, ry, wf, vcut):
    """Transform of the product spatial window around x, on a v-lattice."""
    du = 1.0 / (2.2 * vcut)
    half = 2.0 * wf * ry * 1.02
    n0 = int(np.ceil(2.0 * half / du))
    M2 = 1 << int(np.ceil(np.log2(4 * n0)))
    u = (np.arange(M2) - M2 // 2) * du
    uu = np.stack(np.meshgrid(u, u, indexing="ij"), axis=-1)
    rr = np.sqrt(np.sum(uu * uu, axis=-1))
    Y = (np.asarray(varphi.spatial(x[None, None, :] + uu), dtype=float)
         * rho(rr / (wf * ry)))
    spec = np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(Y)))
    dv = 1.0 / (M2 * du)
    v = (np.arange(M2) - M2 // 2) * dv
    return du * du * spec.conj(), v, dv


def _w_product(phase, varphi, s, x, k, xi_p, zc, eps, wf, ppw):
    lam_p = float(xi_p[-1])
    om_p = float(xi_p[0] / lam_p)
    r_om = 2.0 ** (-(0.5 - eps) * k)
    r_y = r_om
    r_z = 2.0 ** ((0.5 + 2.0 * eps) * k)

    # angular factor
    wsup = _angular_support(varphi.angular)
    lo = max(wsup[0], om_p - 2.0 * wf * r_om)
    hi = min(wsup[1], om_p + 2.0 * wf * r_om)
    m = max(256, int(np.ceil(ppw * lam_p * 2.0 * wf * r_om * (hi - lo))))
    om = lo + (np.arange(m) + 0.5) * (hi - lo) / m
    dspec = AveragingSpec(phase, weight=varphi, eps=eps,
                          k_range=(max(K_MIN, min(k, 10)),) * 2)
    damp = dspec.damping(np.zeros(2), om[:, None], k)
    th = np.asarray(phase.theta(om[:, None]), dtype=float)
    ip = th @ xi_p
    wom = rho(np.abs(om - om_p) / (wf * r_om))
    rw = np.asarray(varphi.angular(om[:, None]), dtype=float)
    I_om = np.sum(rw * damp * wom * np.exp(2j * np.pi * ip)) * (hi - lo) / m

    # frequency factor through the spatial window transform
    vcut = 24.0 / r_y
    Yhat, v, dv = _y_window_fft(varphi, x, r_y, wf, vcut)
    vi = np.flatnonzero(np.abs(v) <= vcut)
    Yp = Yhat[np.ix_(vi, vi)]
    ring = max(np.max(np.abs(Yp[0, :])), np.max(np.abs(Yp[-1, :])),
               np.max(np.abs(Yp[:, 0])), np.max(np.abs(Yp[:, -1])))
    if ring > 1e-7 * np.max(np.abs(Yp)):
        raise AccuracyError("spatial window transform not contained in the "
                            f"frequency patch: edge level {ring:.2e}")
    v0, v1 = np.meshgrid(v[vi], v[vi], indexing="ij")
    zeta = np.stack([xi_p[0] - v0, xi_p[1] - v1], axis=-1)
    dz = np.sqrt((zeta[..., 0] - zc[0]) ** 2 + (zeta[..., 1] - zc[1]) ** 2)
    wz = rho(dz / (wf * r_z))
    sv = np.asarray(s.eval(x[None, None, :], zeta), dtype=float)
    C_z = np.sum(sv * wz * Yp) * dv * dv

    ph_rad = float(phase.eval(x, xi_p)) - float(x @ xi_p)
    W = C_z * I_om * np.exp(-2j * np.pi * ph_rad)
    npts = {"omega": int(m), "zeta": int(vi.size**2),
            "yfft": int(Yhat.shape[0])}
    radii = {"omega": r_om, "y": r_y, "zeta": r_z, "factor": wf}
    return W, radii, npts


def _w_nested(phase, varphi, s, x, k, xi_p, zc, eps, wf, ppw):
    lam_p = float(xi_p[-1])
    om_p = float(xi_p[0] / lam_p)
    r_om = 2.0 ** (-(0.5 - eps) * k)
    r_y = r_om
    r_z = 2.0 ** ((0.5 + 2.0 * eps) * k)

    # windowed row amplitude on a frequency lattice centered at the gradient
    # image, transformed once; the conjugate lattice is fine enough that the
    # spatial sum below is exact by band limitation
    vr = 2.0 * wf * r_y * 1.05
    dz = 1.0 / (2.05 * vr)
    Nz = 1 << int(np.ceil(np.log2(4.0 * wf * r_z / dz)))
    if Nz > 4096:
        Nz = 4096
        dz = 4.0 * wf * r_z / Nz
        if 1.0 / (2.05 * dz) < 2.0 * wf * r_y:
            raise ResourceError("frequency lattice cannot cover the spatial "
                                "window at this scale")
    zg = (np.arange(Nz) - Nz // 2) * dz
    F = np.empty((Nz, Nz), dtype=complex)
    for lo_r in range(0, Nz, 256):
        hi_r = min(Nz, lo_r + 256)
        blk0 = zc[0] + zg[lo_r:hi_r, None]
        blk1 = zc[1] + zg[None, :]
        zeta = np.stack([np.broadcast_to(blk0, (hi_r - lo_r, Nz)),
                         np.broadcast_to(blk1, (hi_r - lo_r, Nz))], axis=-1)
        rad = np.sqrt((blk0 - zc[0]) ** 2 + (blk1 - zc[1]) ** 2)
        F[lo_r:hi_r] = (np.asarray(s.eval(x[None, None, :], zeta),
                                   dtype=float) * rho(rad / (wf * r_z)))
    # T(v) = sum dz^2 F(zc + g) exp(+2 pi i v . g) over lattice offsets g
    T = (np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(F)))
         * (Nz * Nz * dz * dz))
    dv = 1.0 / (Nz * dz)
    del F

    # angular layer collapses to a function of the local speed
    wsup = _angular_support(varphi.angular)
    lo = max(wsup[0], om_p - 2.0 * wf * r_om)
    hi = min(wsup[1], om_p + 2.0 * wf * r_om)
    m = max(256, int(np.ceil(ppw * lam_p * 2.0 * wf * r_om * (hi - lo))))
    om = lo + (np.arange(m) + 0.5) * (hi - lo) / m
    wom = rho(np.abs(om - om_p) / (wf * r_om))
    rw = np.asarray(varphi.angular(om[:, None]), dtype=float)
    tj = np.asarray(phase.theta(om[:, None]), dtype=float) @ xi_p
    J1 = np.asarray(phase.hess_ptilde(om[:, None]), dtype=float)[..., 0, 0]
    coef = ((hi - lo) / m * rw * wom
            * np.exp(1j * (np.pi / 4.0) * np.sign(J1)))
    if phase.translation_invariant():
        cn = np.array([1.0])
    else:
        c_lo, c_hi = phase.c_range()
        cn = np.linspace(c_lo, c_hi, 1025)
    gate = 1.0 - phi_k(cn[:, None] * J1[None, :], -eps * k)
    Sn = ((gate * np.sqrt(np.abs(cn[:, None] * J1[None, :]))
           * np.exp(2j * np.pi * cn[:, None] * tj[None, :])) @ coef)

    # spatial layer on the conjugate lattice, restricted to the window
    vcap = 2.0 * wf * r_y * 1.02
    half = min(Nz // 2 - 1, int(np.ceil(vcap / dv)))
    sl = slice(Nz // 2 - half, Nz // 2 + half + 1)
    vax = (np.arange(-half, half + 1)) * dv
    v0, v1 = np.meshgrid(vax, vax, indexing="ij")
    Ty = T[sl, sl]
    del T
    ys = np.stack([x[0] - v0, x[1] - v1], axis=-1)
    wy = (rho(np.sqrt(v0**2 + v1**2) / (wf * r_y))
          * np.asarray(varphi.spatial(ys), dtype=float))
    if cn.size == 1:
        Sy = Sn[0]
    else:
        cy = np.asarray(phase.c(ys), dtype=float)
        Sy = (np.interp(cy, cn, Sn.real)
              + 1j * np.interp(cy, cn, Sn.imag))
    beat = np.exp(2j * np.pi * (v0 * (zc[0] - xi_p[0])
                                + v1 * (zc[1] - xi_p[1])))
    acc = np.sum(wy * Ty * beat * Sy)
    W = acc * dv * dv * np.exp(2j * np.pi * (float(x @ xi_p)
                                             - float(phase.eval(x, xi_p))))
    npts = {"omega": int(m), "zeta": int(Nz) ** 2, "y": int(vax.size) ** 2}
    radii = {"omega": r_om, "y": r_y, "zeta": r_z, "factor": wf}
    return W, radii, npts


def compute_W_pair(phase, a, varphi, s, x, k, z, xi_prime, eps=EPS_DEFAULT,
                   window_factor=2.5, ppw=6.0, method="auto",
                   tail_check=False):
    """Windowed triple integral against its critical-point leading term.

    The product route collapses the spatial layer exactly for translation
    invariant phases; the nested route keeps all layers and works for a
    varying speed.  The source z is recorded for provenance only; the
    window sits at (x, xi_prime).
    """
    if phase.n != 2:
        raise DomainError("the window diagnostic is implemented for n = 2")
    x = np.asarray(x, dtype=float)
    xi_p = np.asarray(xi_prime, dtype=float)
    lam_p = float(xi_p[-1])
    if lam_p <= 0:
        raise DomainError("xi_prime must lie in the forward half space")
    om_p = float(xi_p[0] / lam_p)
    zc = np.asarray(phase.grad_x(x, xi_p), dtype=float)
    if method == "auto":
        method = "product" if phase.translation_invariant() else "nested"
    fn = {"product": _w_product, "nested": _w_nested}.get(method)
    if fn is None:
        raise DomainError("method must be auto, product or nested")
    if method == "product" and not phase.translation_invariant():
        raise DomainError("the product route needs a translation invariant "
                          "phase")
    W, radii, npts = fn(phase, varphi, s, x, k, xi_p, zc, eps,
                        window_factor, ppw)
    gate = 1.0 - float(np.squeeze(phi_k(np.asarray(phase.J(x, om_p)),
                                        -eps * k)))
    W0 = (float(s.eval(x, zc)) * lam_p ** (-0.5)
          * float(np.squeeze(np.asarray(varphi(x, np.asarray([om_p])))))
          * gate)
    tail = None
    if tail_check:
        W_in, _, _ = fn(phase, varphi, s, x, k, xi_p, zc, eps,
                        0.8 * window_factor, ppw)
        tail = abs(W - W_in)
    return WDiagnostic(W, W0, k, x, xi_p, z, method, radii, npts, tail)


def w_gap_series(phase, a, varphi, s, x, z, ks, omega_prime=0.1,
                 lam_factor=1.2, eps=EPS_DEFAULT, **kw):
    """Scaled window gaps over a range of scales, with the fitted slope."""
    diags = []
    for k in ks:
        lam_p = lam_factor * 2.0**k
        xi_p = np.array([omega_prime * lam_p, lam_p])
        diags.append(compute_W_pair(phase, a, varphi, s, x, k, z, xi_p,
                                    eps=eps, **kw))
    logs = np.log2([d.scaled_gap for d in diags])
    slope = float(np.polyfit(np.asarray(ks, dtype=float), logs, 1)[0])
    return {"diagnostics": diags, "slope": slope,
            "scaled_gaps": [d.scaled_gap for d in diags]}
