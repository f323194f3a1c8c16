"""Tabulated radial transforms and the separable fast path for kernel rows.

At a fixed angle the frequency integral of a dyadic piece collapses to a
one dimensional transform of the radial profile,

    int exp(2 pi i lam sig) R(lam q) lam^{n-1} dlam = q^{-n} H(sig / q),
    H(s) = int R(u) u^{n-1} exp(2 pi i u s) du,

so one table of H per scale serves every x in a row sweep.  The table is
built by a zero-padded inverse FFT of the sampled profile; lookups restore
the carrier exp(2 pi i r0 s) exactly and interpolate only the slowly
varying remainder.
"""

import numpy as np

from ._loops import cr_eval, row_sum_ti
from .bumps import eta_k
from .errors import DomainError
from .grids import GriddedFunction
from .phases import OMEGA_MAX, q_of
from .symbols import DyadicSymbolPiece, SeparableSymbol


class RadialTable:
    """H(s) on a uniform s-grid, stored with the carrier removed."""

    def __init__(self, values, s_lo, ds, r0, k, n):
        self.values = np.ascontiguousarray(values, dtype=complex)
        self.s_lo = float(s_lo)
        self.ds = float(ds)
        self.r0 = float(r0)
        self.k = int(k)
        self.n = int(n)

    @property
    def s_half(self):
        """Largest |s| the table covers."""
        return max(abs(self.s_lo),
                   abs(self.s_lo + (self.values.shape[0] - 1) * self.ds))

    @classmethod
    def build(cls, radial_fn, k, n, s_max=None, ppu=32, pps=32):
        """Tabulate H for a profile supported on the scale-k shell.

        ppu controls the u-sampling relative to the fastest tabulated
        oscillation, pps the number of s-nodes per carrier period; both are
        chosen so 4-tap interpolation sits near 1e-6 relative.
        """
        r0, r1 = 2.0 ** (k - 1), 2.0 ** (k + 1)
        if s_max is None:
            s_max = 48.0 * 2.0 ** -k
        du = 1.0 / (ppu * s_max)
        m = int(np.ceil((r1 - r0) / du))
        du = (r1 - r0) / m
        u = r0 + (np.arange(m) + 0.5) * du
        g = np.asarray(radial_fn(u), dtype=complex) * u ** (n - 1)
        target = pps * 2.0 ** k / du  # ds = 1/(M du) <= 2^{-k}/pps
        M = 1
        while M < target:
            M *= 2
        ds = 1.0 / (M * du)
        raw = np.fft.ifft(g, M) * (M * du)
        ls = int(np.floor(s_max / ds))
        vals = np.concatenate([raw[M - ls:], raw[:ls + 1]])
        s = (-ls + np.arange(vals.shape[0])) * ds
        vals = vals * np.exp(1j * np.pi * du * s)  # midpoint half-step
        return cls(vals, -ls * ds, ds, r0, k, n)

    def __call__(self, s):
        """H(s), zero outside the tabulated window."""
        s = np.asarray(s, dtype=float)
        t = (s - self.s_lo) / self.ds
        return cr_eval(self.values, t) * np.exp(2j * np.pi * self.r0 * s)

    def envelope_radius(self, tau=1e-6):
        """Largest |s| where |H| still exceeds tau * max|H|."""
        mag = np.abs(self.values)
        live = np.nonzero(mag > tau * mag.max())[0]
        s = self.s_lo + live * self.ds
        return float(np.max(np.abs(s)))


def separable_row_parts(piece):
    """(chi, radial, angular) callables when the row sweep factorizes.

    Requires a dyadic piece over a separable base with a phase that is a
    shift plus a frequency-only term; the angular factor folds in the
    curvature gate, and for a tube piece also the normalized tube weight.
    Returns None when any ingredient is missing.
    """
    tube_w = None
    a_k = piece
    if hasattr(piece, "a_k"):
        tube_w = piece.weight
        a_k = piece.a_k
    if not isinstance(a_k, DyadicSymbolPiece):
        return None
    if not isinstance(a_k.base, SeparableSymbol):
        return None
    if not a_k.phase.translation_invariant():
        return None
    base = a_k.base
    k = a_k.k
    x_here = np.zeros(a_k.n)

    def radial(u):
        return base.radial(np.asarray(u, dtype=float)) * eta_k(u, k)

    def angular(om):
        v = base.angular(om) * a_k.cutoff(x_here, om)
        if tube_w is not None:
            v = v * tube_w(om)
        return v

    return base.chi, radial, angular


def _cone_nodes(phase, xs, y, k, ppw):
    """Midpoint lattice over the cone, resolving the fastest row oscillation
    seen from the given x point set."""
    nm1 = phase.n - 1
    probe = np.stack(np.meshgrid(
        *([np.linspace(-OMEGA_MAX, OMEGA_MAX, 17)] * nm1), indexing="ij"),
        axis=-1).reshape(-1, nm1)
    gp = np.abs(np.asarray(phase.grad_ptilde(probe), dtype=float))
    gp = gp.reshape(-1, nm1).max(axis=0)
    y = np.asarray(y, dtype=float)
    xspan = np.max(np.abs(xs[:, :nm1] - y[:nm1]), axis=0)
    rate = 2.0 ** (k + 1) * (xspan + gp)
    axes = []
    weight = 1.0
    for d in range(nm1):
        m = max(64, int(np.ceil(2 * OMEGA_MAX * rate[d] * ppw)))
        step = 2 * OMEGA_MAX / m
        axes.append(-OMEGA_MAX + (np.arange(m) + 0.5) * step)
        weight *= step
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack(mesh, axis=-1).reshape(-1, nm1), weight


def row_values(phase, piece, xs, y, ppw=4.0, table=None):
    """K(x, y) at arbitrary points x via the tabulated radial transform.

    Cone nodes whose whole s-window misses the table over the hull of xs are
    dropped before the sweep; that pruning is exact, the engine would skip
    them anyway.
    """
    parts = separable_row_parts(piece)
    if parts is None:
        raise DomainError("piece does not factor for the table path")
    chi, radial, angular = parts
    k = piece.k
    n = phase.n
    xs = np.ascontiguousarray(np.asarray(xs, dtype=float).reshape(-1, n))
    if table is None:
        table = RadialTable.build(radial, k, n)
    om, wq = _cone_nodes(phase, xs, y, k, ppw)
    q = q_of(om, n)
    wgt = wq * q ** (-float(n)) * np.asarray(angular(om), dtype=float)
    live = wgt != 0.0
    om, wgt, q = om[live], wgt[live], q[live]
    ptil = np.asarray(phase.ptilde(om), dtype=float)
    yv = np.asarray(y, dtype=float)
    center = xs.mean(axis=0)
    radius = float(np.max(np.linalg.norm(xs - center, axis=1), initial=0.0))
    sig_c = ((center[:n - 1] - yv[:n - 1]) * om).sum(axis=-1) \
        + (center[n - 1] - yv[n - 1]) + ptil
    reach = np.abs(sig_c) / q <= table.s_half + radius
    om, wgt, q, ptil = om[reach], wgt[reach], q[reach], ptil[reach]
    out = np.zeros(xs.shape[0], dtype=complex)
    if om.shape[0] == 0:
        return out
    chiv = np.asarray(chi(xs), dtype=float)
    row_sum_ti(np.ascontiguousarray(xs[:, :n - 1]),
               np.ascontiguousarray(xs[:, n - 1]),
               chiv, np.ascontiguousarray(yv[:n - 1]), float(yv[n - 1]),
               np.ascontiguousarray(om), np.ascontiguousarray(ptil),
               np.ascontiguousarray(wgt), np.ascontiguousarray(1.0 / q),
               table.values, table.s_lo, 1.0 / table.ds, table.r0, out)
    return out


def fast_kernel_row(phase, piece, y, xgrid, ppw=4.0, table=None):
    """Row x -> K(x, y) over a grid via the tabulated radial transform."""
    vals = row_values(phase, piece, xgrid.mesh().reshape(-1, phase.n), y,
                      ppw=ppw, table=table)
    return GriddedFunction(xgrid, vals.reshape((xgrid.N,) * phase.n))
