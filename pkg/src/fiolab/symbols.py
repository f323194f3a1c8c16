"""Amplitudes, their dyadic degenerate/nondegenerate slices, and numerical
symbol-estimate reports.

The default amplitude is separable, chi(x) * radial(|xi|) * angular(omega):
a spatial bump on the unit ball, the order-m radial weight with the low
frequencies removed, and a smooth angular taper that dies before the cone
boundary so no cutoff edge is ever seen by the oscillatory machinery.
"""

import numpy as np

from .bumps import eta_k, phi_k, rho
from .errors import DomainError
from .phases import K_MIN, OMEGA_MAX, as_omega, q_of, xi_of


class SymbolFunction:
    """Amplitude a(x, xi) with a declared order and compact x-support."""

    def __init__(self, fn, order, x_halfwidth=1.0, name="custom",
                 bound_constants=None, n=2):
        self._fn = fn
        self.order = float(order)
        self.x_halfwidth = float(x_halfwidth)
        self.name = name
        self.bound_constants = dict(bound_constants or {})
        self.n = n

    def eval(self, x, xi):
        return self._fn(np.asarray(x, dtype=float), np.asarray(xi, dtype=float))

    __call__ = eval


class SeparableSymbol(SymbolFunction):
    """chi(x) * radial(|xi|) * angular(omega), the form the fast paths use."""

    def __init__(self, chi, radial, angular, order, n, x_halfwidth=1.0,
                 name="separable"):
        self.chi = chi
        self.radial = radial
        self.angular = angular
        super().__init__(self._eval_sep, order, x_halfwidth, name, n=n)

    def _eval_sep(self, x, xi):
        xi = np.asarray(xi, dtype=float)
        r = np.sqrt(np.sum(xi * xi, axis=-1))
        lam = xi[..., -1]
        good = lam > 0
        safe = np.where(good, lam, 1.0)
        om = xi[..., :-1] / safe[..., None]
        ang = np.where(good, self.angular(om), 0.0)
        return self.chi(np.asarray(x, dtype=float)) * self.radial(r) * ang

    def eval_polar(self, x, lam, omega):
        """Value at xi = lam * (omega, 1) without forming xi."""
        om = as_omega(omega, self.n)
        r = np.asarray(lam, dtype=float) * q_of(om, self.n)
        return self.chi(np.asarray(x, dtype=float)) * self.radial(r) * self.angular(om)


def spatial_bump(x, halfwidth=1.0):
    """chi(x): 1 for |x| <= halfwidth/2, 0 beyond |x| >= halfwidth."""
    x = np.asarray(x, dtype=float)
    return rho(2.0 * np.sqrt(np.sum(x * x, axis=-1)) / halfwidth)


def default_radial(r, order, k_min=K_MIN):
    """(1 + r^2)^{m/2} with the |xi| <~ 2^{k_min} part smoothly removed."""
    r = np.asarray(r, dtype=float)
    return (1.0 + r * r) ** (order / 2.0) * (1.0 - rho(r / 2.0**k_min))


def default_angular(omega, n=2, omega_max=OMEGA_MAX):
    """Angular taper: 1 inside |omega| <= omega_max/2, 0 at the cone edge."""
    om = as_omega(omega, n)
    return rho(2.0 * np.sqrt(np.sum(om * om, axis=-1)) / omega_max)


def default_symbol(n=2, order=None, omega_max=OMEGA_MAX, x_halfwidth=1.0):
    """The standard test amplitude of order m = -(n-1)/2 (overridable)."""
    m = -(n - 1) / 2.0 if order is None else float(order)
    return SeparableSymbol(
        chi=lambda x: spatial_bump(x, x_halfwidth),
        radial=lambda r: default_radial(r, m),
        angular=lambda om: default_angular(om, n, omega_max),
        order=m, n=n, x_halfwidth=x_halfwidth, name=f"default(m={m:g})")


class DyadicSymbolPiece:
    """a(x, xi) * (curvature cutoff) * eta_k(|xi|).

    kind "degenerate" keeps |J| <~ 2^{-eps k}; "nondegenerate" keeps the
    complement; the two always sum back to a * eta_k, which is what kind
    "full" evaluates directly (no curvature gate at all).
    """

    def __init__(self, base, phase, k, eps, kind):
        if kind not in ("degenerate", "nondegenerate", "full"):
            raise DomainError("kind must be degenerate, nondegenerate or full")
        if k < K_MIN:
            raise DomainError(f"k must be >= {K_MIN}")
        self.base = base
        self.phase = phase
        self.k = int(k)
        self.eps = float(eps)
        self.kind = kind
        self.order = base.order
        self.n = phase.n
        self.name = f"{base.name}|{kind}@k={k}"

    def cutoff(self, x, omega):
        """The smooth curvature gate phi_{-eps k}(J), its complement, or 1."""
        om = as_omega(omega, self.n)
        J = self.phase.J(np.asarray(x, dtype=float), om)
        if self.kind == "full":
            return np.ones_like(np.asarray(J, dtype=float))
        deg = phi_k(J, -self.eps * self.k)
        return deg if self.kind == "degenerate" else 1.0 - deg

    def eval(self, x, xi):
        xi = np.asarray(xi, dtype=float)
        lam = xi[..., -1]
        good = lam > 0
        safe = np.where(good, lam, 1.0)
        om = xi[..., :-1] / safe[..., None]
        fill = 0.0 if self.kind == "nondegenerate" else 1.0
        gate = np.where(good, self.cutoff(x, om), fill)
        return self.base.eval(x, xi) * gate * eta_k(xi, self.k, axis=-1)

    __call__ = eval

    def eval_polar(self, x, lam, omega):
        om = as_omega(omega, self.n)
        q = q_of(om, self.n)
        r = np.asarray(lam, dtype=float) * q
        if isinstance(self.base, SeparableSymbol):
            base = self.base.eval_polar(x, lam, om)
        else:
            base = self.base.eval(x, xi_of(lam, om, self.n))
        return base * self.cutoff(x, om) * eta_k(r, self.k)


def dyadic_pieces(a, phase, k, eps):
    """The scale-k degenerate and nondegenerate slices of a."""
    return (DyadicSymbolPiece(a, phase, k, eps, "degenerate"),
            DyadicSymbolPiece(a, phase, k, eps, "nondegenerate"))


def _multi_indices(n, max_order):
    """All multi-indices over n variables with total order <= max_order."""
    if n == 1:
        return [(o,) for o in range(max_order + 1)]
    out = []
    for first in range(max_order + 1):
        for rest in _multi_indices(n - 1, max_order - first):
            out.append((first,) + rest)
    return sorted(out, key=sum)


def _stencil(order):
    """Central finite-difference stencil (offsets, weights) for one axis."""
    if order == 0:
        return np.array([0.0]), np.array([1.0])
    if order == 1:
        return np.array([-1.0, 1.0]), np.array([-0.5, 0.5])
    if order == 2:
        return np.array([-1.0, 0.0, 1.0]), np.array([1.0, -2.0, 1.0])
    if order == 3:
        return np.array([-2.0, -1.0, 1.0, 2.0]), np.array([-0.5, 1.0, -1.0, 0.5])
    raise DomainError("derivative order must be <= 3")


def _fd_mixed(f, x0, xi0, alpha, beta, hx, hxi):
    """partial_x^alpha partial_xi^beta f at batched points by tensor stencils."""
    n = x0.shape[-1]
    offs = [np.array([0.0])] * (2 * n)
    wts = [np.array([1.0])] * (2 * n)
    for i, o in enumerate(alpha):
        offs[i], wts[i] = _stencil(o)
    for i, o in enumerate(beta):
        offs[n + i], wts[n + i] = _stencil(o)
    total = np.zeros(x0.shape[:-1], dtype=complex)
    scale = 1.0
    for i, o in enumerate(alpha):
        scale *= hx**o
    for i, o in enumerate(beta):
        scale *= hxi[..., i] ** o if np.ndim(hxi) else hxi**o
    # iterate the (small) tensor product of per-axis stencils
    from itertools import product
    for combo in product(*[range(len(o)) for o in offs]):
        w = 1.0
        xs = x0.copy()
        xis = xi0.copy()
        for i in range(n):
            w = w * wts[i][combo[i]]
            xs[..., i] = xs[..., i] + offs[i][combo[i]] * hx
        for i in range(n):
            w = w * wts[n + i][combo[n + i]]
            step = hxi[..., i] if np.ndim(hxi) else hxi
            xis[..., i] = xis[..., i] + offs[n + i][combo[n + i]] * step
        total = total + w * f(xs, xis)
    return total / scale


def _fd_lam_zeta(f, lam0, zeta0, b_lam, delta, h_lam, h_z):
    """partial_lam^b partial_zeta^delta f for rescaled-coordinate amplitudes."""
    from itertools import product
    nm1 = zeta0.shape[-1]
    offs = [None] * (1 + nm1)
    wts = [None] * (1 + nm1)
    offs[0], wts[0] = _stencil(b_lam)
    for i, o in enumerate(delta):
        offs[1 + i], wts[1 + i] = _stencil(o)
    total = np.zeros(lam0.shape, dtype=complex)
    scale = h_lam**b_lam * h_z ** sum(delta)
    for combo in product(*[range(len(o)) for o in offs]):
        w = wts[0][combo[0]]
        lam = lam0 + offs[0][combo[0]] * h_lam
        z = zeta0.copy()
        for i in range(nm1):
            w = w * wts[1 + i][combo[1 + i]]
            z[..., i] = z[..., i] + offs[1 + i][combo[1 + i]] * h_z
        total = total + w * f(lam, z)
    return total / scale


def _verify_tube_bounds(tp, max_order, samples, seed_skip):
    """Normalized derivative sups for a rescaled tube amplitude b(lam, zeta)."""
    from .stats import halton

    nm1 = tp.n - 1
    u = halton(samples, 1 + nm1, skip=seed_skip)
    lam = 2.0 ** (tp.k - 1 + 2 * u[:, 0])
    zeta = 1.3 * (2 * u[:, 1:1 + nm1] - 1)
    h_lam = 1e-3 * 2.0**tp.k
    h_z = 1e-3
    report = {"name": f"tube@k={tp.k}", "samples": samples,
              "entries": {}, "violations": []}
    for b_lam in range(max_order + 1):
        for delta in _multi_indices(nm1, max_order):
            d = _fd_lam_zeta(tp.eval_b, lam, zeta, b_lam, delta, h_lam, h_z)
            sup = float(np.max(np.abs(d)) * 2.0 ** (tp.k * b_lam))
            report["entries"][f"lam{b_lam}_z{''.join(map(str, delta))}"] = sup
    report["max_normalized"] = max(report["entries"].values())
    return report


def verify_symbol_bounds(s, max_order=2, samples=200, seed_skip=40):
    """Report normalized sups of mixed derivatives over a quasi-random sample.

    Standard symbols are normalized by (1 + |xi|)^{|beta| - m}; dyadic pieces
    by 2^{(n-1)k/2} * 2^{|beta| k}, leaving any 2^{C eps k |beta|} growth
    visible to the caller, who can fit C across k.  Rescaled tube amplitudes
    b(lam, zeta) are normalized by 2^{k |beta|} on the lam-derivatives.
    """
    from .stats import halton

    if max_order > 3:
        raise DomainError("max_order must be <= 3")
    from .partition import TubePiece
    if isinstance(s, TubePiece):
        return _verify_tube_bounds(s, max_order, samples, seed_skip)
    piece = isinstance(s, DyadicSymbolPiece)
    n = s.n
    u = halton(samples, 2 * n, skip=seed_skip)
    hw = getattr(s, "x_halfwidth", 1.0) if not piece else s.base.x_halfwidth
    x = hw * 0.9 * (2 * u[:, :n] - 1)
    if piece:
        lam = 2.0 ** (s.k - 1 + 2 * u[:, n])
    else:
        lam = 2.0 ** (4.0 + 7.0 * u[:, n])
    om = (OMEGA_MAX / np.sqrt(n - 1)) * (2 * u[:, n + 1:2 * n] - 1)
    xi = xi_of(lam, om, n)
    absxi = np.sqrt(np.sum(xi * xi, axis=-1))

    f = s.eval
    # hx balances bump truncation against rounding amplified by the
    # (1+|xi|)^{|beta|-m} normalizer at the top of the frequency range
    hx = 3e-3
    hxi = 1e-3 * (1.0 + absxi)
    report = {"name": getattr(s, "name", "symbol"), "samples": samples,
              "entries": {}, "violations": []}
    m = s.order
    for alpha in _multi_indices(n, max_order):
        for beta in _multi_indices(n, max_order):
            d = _fd_mixed(f, x, xi, alpha, beta, hx, hxi)
            if piece:
                norm = 2.0 ** ((n - 1) * s.k / 2.0 + sum(beta) * s.k)
            else:
                norm = (1.0 + absxi) ** (sum(beta) - m)
            sup = float(np.max(np.abs(d) * norm))
            key = f"a{''.join(map(str, alpha))}_b{''.join(map(str, beta))}"
            report["entries"][key] = sup
            declared = getattr(s, "bound_constants", {}).get((alpha, beta))
            if declared is not None and sup > declared:
                report["violations"].append((key, sup, declared))
    report["max_normalized"] = max(report["entries"].values())
    return report
