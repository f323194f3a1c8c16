"""Hot strip accumulators: jitted kernels with vectorized numpy twins.

Each name is bound to one of its two implementations at import time via
the FIOLAB_PURE_NUMPY switch in accel.

`row_sum_ti`: given a tabulated radial transform B on a uniform s-grid
(carrier removed), return

    out[i] = chi[i] * sum_j wgt[j] * H(sig_ij * invq[j])

with sig_ij = (xl[i]-yl).om[j] + (xn[i]-yn) + ptil[j] and
H(s) = exp(2 pi i r0 s) * CatmullRom(B, s), zero outside the table.

`bicubic_periodic`: Catmull-Rom interpolation of a periodic 2-D complex
field at fractional index coordinates (t0[i], t1[i]), taps wrapped mod N.

`e_row_sum`: angular sweep against a stack of band difference tables.
For each point i,

    out[i] = chi[i] * sum_j wang[j] * exp(2 pi i r0 s_ij)
             * Interp(tabs[slab[i]], om[j], s_ij)

with s_ij = (xl[i]-zl) om[j] + (xn[i]-zn) + cval[i] qom[j]; the table
lookup is Catmull-Rom along the offset axis and linear across the
angular axis, zero outside the tabulated window.
"""

import numpy as np

from .accel import USE_NUMBA, njit, prange


@njit(cache=True, parallel=True, fastmath=True)
def _row_sum_ti_numba(xl, xn, chi, yl, yn, om, ptil, wgt, invq,
                      tab, s_lo, inv_ds, r0, out):
    X = xl.shape[0]
    W = om.shape[0]
    nm1 = om.shape[1]
    top = tab.shape[0] - 3
    two_pi_r0 = 2.0 * np.pi * r0
    for i in prange(X):
        ci = chi[i]
        if ci == 0.0:
            out[i] = 0.0
            continue
        acc = 0.0 + 0.0j
        base = xn[i] - yn
        for j in range(W):
            sig = base + ptil[j]
            for d in range(nm1):
                sig += (xl[i, d] - yl[d]) * om[j, d]
            s = sig * invq[j]
            t = (s - s_lo) * inv_ds
            if t < 1.0 or t > top:
                continue
            idx = int(t)
            f = t - idx
            p0 = tab[idx - 1]
            p1 = tab[idx]
            p2 = tab[idx + 1]
            p3 = tab[idx + 2]
            h = p1 + 0.5 * f * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2
                                               - p3 + f * (3.0 * (p1 - p2)
                                                           + p3 - p0)))
            ph = two_pi_r0 * s
            acc += wgt[j] * h * complex(np.cos(ph), np.sin(ph))
        out[i] = ci * acc


def cr_eval(tab, t):
    """Catmull-Rom values of a tabulated array at fractional indices t.

    Zero outside [1, len-3]; the tap at index t=idx+f uses idx-1..idx+2.
    """
    tab = np.asarray(tab)
    t = np.asarray(t, dtype=float)
    top = tab.shape[0] - 3
    inside = (t >= 1.0) & (t <= top)
    tc = np.where(inside, t, 1.0)
    idx = tc.astype(np.int64)
    f = tc - idx
    p0 = tab[idx - 1]
    p1 = tab[idx]
    p2 = tab[idx + 1]
    p3 = tab[idx + 2]
    h = p1 + 0.5 * f * (p2 - p0 + f * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3
                                       + f * (3.0 * (p1 - p2) + p3 - p0)))
    return np.where(inside, h, 0.0)


def _row_sum_ti_numpy(xl, xn, chi, yl, yn, om, ptil, wgt, invq,
                      tab, s_lo, inv_ds, r0, out, chunk=64):
    X = xl.shape[0]
    out[:] = 0.0
    live = np.nonzero(chi != 0.0)[0]
    for lo in range(0, live.size, chunk):
        ii = live[lo:lo + chunk]
        sig = ((xl[ii, None, :] - yl) * om[None, :, :]).sum(axis=-1)
        sig += (xn[ii] - yn)[:, None] + ptil[None, :]
        s = sig * invq[None, :]
        h = cr_eval(tab, (s - s_lo) * inv_ds)
        h = h * np.exp(2j * np.pi * r0 * s)
        out[ii] = chi[ii] * (h @ wgt)


@njit(cache=True, parallel=True, fastmath=True)
def _bicubic_periodic_numba(vals, t0, t1, out):
    N0 = vals.shape[0]
    N1 = vals.shape[1]
    P = t0.shape[0]
    for i in prange(P):
        a = t0[i]
        b = t1[i]
        ia = int(np.floor(a))
        ib = int(np.floor(b))
        fa = a - ia
        fb = b - ib
        wa0 = 0.5 * fa * (-1.0 + fa * (2.0 - fa))
        wa1 = 1.0 + 0.5 * fa * fa * (-5.0 + 3.0 * fa)
        wa2 = 0.5 * fa * (1.0 + fa * (4.0 - 3.0 * fa))
        wa3 = 0.5 * fa * fa * (fa - 1.0)
        wb0 = 0.5 * fb * (-1.0 + fb * (2.0 - fb))
        wb1 = 1.0 + 0.5 * fb * fb * (-5.0 + 3.0 * fb)
        wb2 = 0.5 * fb * (1.0 + fb * (4.0 - 3.0 * fb))
        wb3 = 0.5 * fb * fb * (fb - 1.0)
        acc = 0.0 + 0.0j
        for da in range(4):
            ja = (ia + da - 1) % N0
            if da == 0:
                wa = wa0
            elif da == 1:
                wa = wa1
            elif da == 2:
                wa = wa2
            else:
                wa = wa3
            row = (vals[ja, (ib - 1) % N1] * wb0
                   + vals[ja, ib % N1] * wb1
                   + vals[ja, (ib + 1) % N1] * wb2
                   + vals[ja, (ib + 2) % N1] * wb3)
            acc += wa * row
        out[i] = acc


def _cr_weights(f):
    w0 = 0.5 * f * (-1.0 + f * (2.0 - f))
    w1 = 1.0 + 0.5 * f * f * (-5.0 + 3.0 * f)
    w2 = 0.5 * f * (1.0 + f * (4.0 - 3.0 * f))
    w3 = 0.5 * f * f * (f - 1.0)
    return w0, w1, w2, w3


def _bicubic_periodic_numpy(vals, t0, t1, out):
    N0, N1 = vals.shape
    ia = np.floor(t0).astype(np.int64)
    ib = np.floor(t1).astype(np.int64)
    wa = _cr_weights(t0 - ia)
    wb = _cr_weights(t1 - ib)
    out[:] = 0.0
    for da in range(4):
        ja = (ia + da - 1) % N0
        for db in range(4):
            jb = (ib + db - 1) % N1
            out += wa[da] * wb[db] * vals[ja, jb]


@njit(cache=True, parallel=True, fastmath=True)
def _e_row_sum_numba(xl, xn, chi, cval, slab, om, qom, wang, tabs,
                     om0, inv_dom, s_lo, inv_ds, r0, zl, zn, out):
    P = xl.shape[0]
    m = om.shape[0]
    nw = tabs.shape[1]
    top = tabs.shape[2] - 3
    two_pi_r0 = 2.0 * np.pi * r0
    for i in prange(P):
        ci = chi[i]
        if ci == 0.0:
            out[i] = 0.0
            continue
        dl = xl[i] - zl
        base = xn[i] - zn
        cc = cval[i]
        b = slab[i]
        acc = 0.0 + 0.0j
        for j in range(m):
            s = base + dl * om[j] + cc * qom[j]
            t = (s - s_lo) * inv_ds
            if t < 1.0 or t > top:
                continue
            tw = (om[j] - om0) * inv_dom
            iw = int(tw)
            if iw < 0 or iw > nw - 2:
                continue
            fw = tw - iw
            idx = int(t)
            f = t - idx
            w0 = 0.5 * f * (-1.0 + f * (2.0 - f))
            w1 = 1.0 + 0.5 * f * f * (-5.0 + 3.0 * f)
            w2 = 0.5 * f * (1.0 + f * (4.0 - 3.0 * f))
            w3 = 0.5 * f * f * (f - 1.0)
            ra = tabs[b, iw]
            rb = tabs[b, iw + 1]
            ha = (w0 * ra[idx - 1] + w1 * ra[idx]
                  + w2 * ra[idx + 1] + w3 * ra[idx + 2])
            hb = (w0 * rb[idx - 1] + w1 * rb[idx]
                  + w2 * rb[idx + 1] + w3 * rb[idx + 2])
            h = ha + fw * (hb - ha)
            ph = two_pi_r0 * s
            acc += wang[j] * h * complex(np.cos(ph), np.sin(ph))
        out[i] = ci * acc


def _e_row_sum_numpy(xl, xn, chi, cval, slab, om, qom, wang, tabs,
                     om0, inv_dom, s_lo, inv_ds, r0, zl, zn, out):
    out[:] = 0.0
    top = tabs.shape[2] - 3
    nw = tabs.shape[1]
    live = chi != 0.0
    for j in range(om.shape[0]):
        tw = (om[j] - om0) * inv_dom
        iw = int(np.floor(tw))
        if iw < 0 or iw > nw - 2:
            continue
        fw = tw - iw
        s = (xl - zl) * om[j] + (xn - zn) + cval * qom[j]
        t = (s - s_lo) * inv_ds
        ok = live & (t >= 1.0) & (t <= top)
        if not np.any(ok):
            continue
        tc = np.where(ok, t, 1.0)
        idx = tc.astype(np.int64)
        f = tc - idx
        w0 = 0.5 * f * (-1.0 + f * (2.0 - f))
        w1 = 1.0 + 0.5 * f * f * (-5.0 + 3.0 * f)
        w2 = 0.5 * f * (1.0 + f * (4.0 - 3.0 * f))
        w3 = 0.5 * f * f * (f - 1.0)
        sl = slab
        ha = (w0 * tabs[sl, iw, idx - 1] + w1 * tabs[sl, iw, idx]
              + w2 * tabs[sl, iw, idx + 1] + w3 * tabs[sl, iw, idx + 2])
        hb = (w0 * tabs[sl, iw + 1, idx - 1] + w1 * tabs[sl, iw + 1, idx]
              + w2 * tabs[sl, iw + 1, idx + 1] + w3 * tabs[sl, iw + 1, idx + 2])
        h = ha + fw * (hb - ha)
        val = wang[j] * h * np.exp((2j * np.pi * r0) * s)
        out[ok] += val[ok]
    out *= chi


if USE_NUMBA:
    def row_sum_ti(xl, xn, chi, yl, yn, om, ptil, wgt, invq,
                   tab, s_lo, inv_ds, r0, out):
        _row_sum_ti_numba(xl, xn, chi, yl, yn, om, ptil, wgt, invq,
                          tab, s_lo, inv_ds, r0, out)

    def bicubic_periodic(vals, t0, t1, out):
        _bicubic_periodic_numba(vals, t0, t1, out)

    def e_row_sum(xl, xn, chi, cval, slab, om, qom, wang, tabs,
                  om0, inv_dom, s_lo, inv_ds, r0, zl, zn, out):
        _e_row_sum_numba(xl, xn, chi, cval, slab, om, qom, wang, tabs,
                         om0, inv_dom, s_lo, inv_ds, r0, zl, zn, out)
else:
    row_sum_ti = _row_sum_ti_numpy
    bicubic_periodic = _bicubic_periodic_numpy
    e_row_sum = _e_row_sum_numpy
