"""Curvature-damped averaging over the frequency-gradient arcs.

For each dyadic shell the operator pushes the shell-filtered input along
the arcs traced by the xi-gradient of the phase and averages in the
angular variable with a quarter-turn phase correction:

    (A_k f)(x) = int varphi(x, w) e^{i sgn mu pi/4}
                 (1 - rho(|J| 2^{eps k})) |J(x, w)|^{1/2}
                 (P_k f)(grad_xi Phi(x, (w, 1))) dw

mu is the signature of the second omega-derivative of the phase and sgn
an orientation that is pinned against a quadrature oracle
(pin_damping_sign) rather than assumed.  The gate 1 - rho(|J| 2^{eps k})
matches the nondegenerate cutoff of the dyadic symbol pieces exactly;
that coincidence is what a factorization through A depends on.  A phase
with no curvature (J = 0) zeroes the damping factor, so A annihilates
everything in the flat case.
"""

import numpy as np

from ._loops import bicubic_periodic
from .bumps import eta_k, phi_k, rho
from .errors import BandError, DomainError
from .grids import GriddedFunction
from .oscillatory import apply_multiplier
from .phases import OMEGA_MAX, Halfwave, as_omega, q_of, xi_of
from .symbols import spatial_bump


class SeparableWeight:
    """varphi(x, omega) = spatial(x) * angular(omega).

    omega_support is the halfwidth of the angular factor's support; node
    placement and the translation-invariant fast paths key off it.
    """

    def __init__(self, spatial, angular, omega_support, name="custom"):
        self.spatial = spatial
        self.angular = angular
        self.omega_support = float(omega_support)
        self.name = name

    def __call__(self, x, omega):
        return self.spatial(np.asarray(x, dtype=float)) * self.angular(omega)


def default_weight(n=2, omega_max=OMEGA_MAX, x_halfwidth=1.0):
    """Plateau weight equal to 1 on the default symbol support.

    The spatial factor is a bump at four times the symbol halfwidth, flat
    out to twice the halfwidth; that plateau also covers the arc field
    reachable from the symbol support, so on plane-wave packets launched
    there A acts as if the weight were constant.  The angular factor
    rho(|omega|/omega_max) is flat up to omega_max.  Dividing a default
    symbol by this weight is a no-op on its support.
    """
    wide = 4.0 * x_halfwidth

    def spatial(x):
        return spatial_bump(x, wide)

    def angular(omega):
        om = as_omega(omega, n)
        return rho(np.sqrt(np.sum(om * om, axis=-1)) / omega_max)

    return SeparableWeight(spatial, angular, 2.0 * omega_max,
                           name=f"plateau(hw={wide:g})")


class ModeField:
    """Finite sum of plane waves sum_m c_m e^{2 pi i x . f_m}.

    Shell filtering is diagonal (each mode scaled by eta_k at its own
    frequency) and point evaluation is exact, so arc values need no grid
    or interpolation.  Serves as the exact reference the gridded path of
    apply_A is judged against.
    """

    def __init__(self, freqs, coeffs):
        freqs = np.atleast_2d(np.asarray(freqs, dtype=float))
        coeffs = np.asarray(coeffs, dtype=complex).ravel()
        if freqs.shape[0] != coeffs.shape[0]:
            raise DomainError("one coefficient per frequency row required")
        self.freqs = freqs
        self.coeffs = coeffs

    @property
    def n(self):
        return self.freqs.shape[1]

    def __call__(self, pts):
        pts = np.asarray(pts, dtype=float)
        ph = np.tensordot(pts, self.freqs, axes=([-1], [1]))
        return np.exp(2j * np.pi * ph) @ self.coeffs

    def band_piece(self, k):
        return ModeField(self.freqs, self.coeffs * eta_k(self.freqs, k, axis=-1))

    def running_piece(self, k):
        return ModeField(self.freqs, self.coeffs * phi_k(self.freqs, k, axis=-1))

    def band_mass_outside(self, k_lo, k_hi):
        """Coefficient mass fraction outside the closed annulus [2^lo, 2^hi]."""
        r = np.sqrt(np.sum(self.freqs ** 2, axis=-1))
        out = (r < 2.0 ** k_lo) | (r > 2.0 ** k_hi)
        tot = float(np.sum(np.abs(self.coeffs)))
        if tot == 0.0:
            return 0.0
        return float(np.sum(np.abs(self.coeffs[out]))) / tot

    def on_grid(self, grid):
        return GriddedFunction(grid, self(grid.mesh()))


class AveragingSpec:
    """Data of the averaging operator: phase, weight, gate sharpness, shells.

    sign flips the quarter-turn factor e^{i sign mu pi/4}; +1 is the
    orientation that undoes the principal oscillation (pin_damping_sign
    measures both and the run manifests record the choice).
    """

    def __init__(self, phase, weight=None, eps=0.25, k_range=(4, 10), sign=1):
        if not 0.0 < float(eps) < 1.0:
            raise DomainError("eps must lie in (0, 1)")
        lo, hi = int(k_range[0]), int(k_range[1])
        if lo > hi or lo < 1:
            raise DomainError(f"bad shell range {k_range}")
        if sign not in (1, -1):
            raise DomainError("sign must be +1 or -1")
        self.phase = phase
        self.weight = weight if weight is not None else default_weight(phase.n)
        self.eps = float(eps)
        self.k_range = (lo, hi)
        self.sign = int(sign)
        self._rate = None
        self._nodes = {}

    def mu(self, x, omega):
        """Signature of the omega-Hessian of the phase, thresholded at 0."""
        H = self.phase.hess_omega(np.asarray(x, dtype=float),
                                  as_omega(omega, self.phase.n))
        if self.phase.n == 2:
            return np.sign(H[..., 0, 0])
        ev = np.linalg.eigvalsh(H)
        return np.sum(np.sign(ev), axis=-1)

    def gate(self, x, omega, k):
        J = self.phase.J(np.asarray(x, dtype=float),
                         as_omega(omega, self.phase.n))
        return 1.0 - phi_k(J, -self.eps * k)

    def damping(self, x, omega, k):
        """e^{i sign mu pi/4} (1 - rho(|J| 2^{eps k})) |J|^{1/2}."""
        x = np.asarray(x, dtype=float)
        om = as_omega(omega, self.phase.n)
        J = self.phase.J(x, om)
        gate = 1.0 - phi_k(J, -self.eps * k)
        turn = np.exp(1j * (np.pi / 4.0) * self.sign * self.mu(x, om))
        return turn * gate * np.sqrt(np.abs(J))

    def omega_support(self):
        return float(getattr(self.weight, "omega_support", 2.0 * OMEGA_MAX))

    def _arc_rate(self):
        # cycles per unit omega per unit frequency: c_max * max |d theta|
        if self._rate is None:
            W = self.omega_support()
            n = self.phase.n
            if n == 2:
                t = np.linspace(-W, W, 513)[:, None]
            else:
                g = np.linspace(-W, W, 65)
                t = np.stack(np.meshgrid(g, g, indexing="ij"),
                             axis=-1).reshape(-1, 2)
            th = self.phase.theta(t)
            step = np.diff(th.reshape(-1, th.shape[-1]), axis=0)
            h = 2.0 * W / (t.shape[0] - 1) if n == 2 else 2.0 * W / 64
            rate = float(np.max(np.sqrt(np.sum(step ** 2, axis=-1)))) / h
            cr = getattr(self.phase, "c_range", None)
            c_hi = cr()[1] if cr is not None else float(
                np.max(self.phase.c(np.zeros(n))))
            self._rate = rate * c_hi
        return self._rate

    def omega_nodes(self, k, ppw=4.0):
        """Midpoint nodes resolving the shell-k arc oscillation.

        The angular weight factor is smooth and vanishes to all orders at
        the support edge, so midpoint converges superalgebraically here;
        its node count scales linearly where a Gauss rule's construction
        cost would not.
        """
        key = (int(k), float(ppw))
        if key not in self._nodes:
            W = self.omega_support()
            m = max(64, int(np.ceil(ppw * 2.0 * W * 2.0 ** (k + 1)
                                    * self._arc_rate() * 1.1)))
            t = -W + (np.arange(m) + 0.5) * (2.0 * W / m)
            w = np.full(m, 2.0 * W / m)
            if self.phase.n == 2:
                self._nodes[key] = (t[:, None], w)
            else:
                om = np.stack(np.meshgrid(t, t, indexing="ij"),
                              axis=-1).reshape(-1, 2)
                self._nodes[key] = (om, np.outer(w, w).ravel())
        return self._nodes[key]


def _check_arc_box(spec, x_flat, theta, grid):
    # conservative reach: every interpolation stencil stays in the box
    cr = getattr(spec.phase, "c_range", None)
    c_hi = cr()[1] if cr is not None else float(
        np.max(spec.phase.c(np.zeros(spec.phase.n))))
    xmax = np.max(np.abs(x_flat), axis=0)
    tmax = np.max(np.abs(theta), axis=0)
    reach = xmax + c_hi * tmax
    limit = grid.L / 2.0 - 2.0 * grid.h
    if np.any(reach > limit):
        raise DomainError(
            f"arc reach {float(np.max(reach)):.3f} leaves the sample box "
            f"(limit {limit:.3f}); enlarge the source grid or shrink x_grid")


def apply_A(spec, f, x_grid=None, bands=None, ppw=4.0):
    """Evaluate the damped average of f on a grid.

    f is either a GriddedFunction (shell filters run on its grid and arc
    values come from periodic bicubic interpolation) or a ModeField
    (filters and arc values exact).  x_grid defaults to f.grid for
    gridded input and is required for a ModeField.  Shells outside the
    source grid's band raise BandError; arcs that leave the source box
    raise DomainError.
    """
    if bands is None:
        bands = range(spec.k_range[0], spec.k_range[1] + 1)
    bands = [int(k) for k in bands]
    if isinstance(f, ModeField):
        if x_grid is None:
            raise DomainError("x_grid is required for ModeField input")
        return _apply_A_modes(spec, f, x_grid, bands, ppw)
    if x_grid is None:
        x_grid = f.grid
    for k in bands:
        if not f.grid.band_ok(k):
            raise BandError(
                f"shell k={k} exceeds the source grid band "
                f"(max {f.grid.max_band})")

    n = spec.phase.n
    x_flat = x_grid.mesh().reshape(-1, n)
    c_vals = np.broadcast_to(
        np.asarray(spec.phase.c(x_flat), dtype=float), (x_flat.shape[0],))
    ti = spec.phase.translation_invariant()
    sep = isinstance(spec.weight, SeparableWeight)
    spatial = spec.weight.spatial(x_flat) if (ti and sep) else None

    out = np.zeros(x_flat.shape[0], dtype=complex)
    buf = np.empty(x_flat.shape[0], dtype=complex)
    origin = -f.grid.L / 2.0
    for k in bands:
        fk = apply_multiplier(f, lambda xi, kk=k: eta_k(xi, kk, axis=-1))
        vals = np.ascontiguousarray(fk.values)
        om, wq = spec.omega_nodes(k, ppw)
        theta = spec.phase.theta(om)
        _check_arc_box(spec, x_flat, theta, f.grid)
        acc = np.zeros(x_flat.shape[0], dtype=complex)
        for j in range(om.shape[0]):
            pull = x_flat + c_vals[:, None] * theta[j]
            t0 = (pull[:, 0] - origin) / f.grid.h
            t1 = (pull[:, 1] - origin) / f.grid.h
            bicubic_periodic(vals, t0, t1, buf)
            if ti and sep:
                w = wq[j] * spec.weight.angular(om[j]) * complex(
                    spec.damping(np.zeros(n), om[j], k))
            else:
                w = wq[j] * spec.weight(x_flat, om[j]) * spec.damping(
                    x_flat, om[j], k)
            acc += w * buf
        if spatial is not None:
            acc *= spatial
        out += acc
    return GriddedFunction(x_grid, out.reshape((x_grid.N,) * n))


def _apply_A_modes(spec, f, x_grid, bands, ppw):
    n = spec.phase.n
    x_flat = x_grid.mesh().reshape(-1, n)
    c_vals = np.broadcast_to(
        np.asarray(spec.phase.c(x_flat), dtype=float), (x_flat.shape[0],))
    out = np.zeros(x_flat.shape[0], dtype=complex)
    for k in bands:
        g = f.band_piece(k)
        if not np.any(g.coeffs):
            continue
        om, wq = spec.omega_nodes(k, ppw)
        theta = spec.phase.theta(om)
        for j in range(om.shape[0]):
            pull = x_flat + c_vals[:, None] * theta[j]
            w = wq[j] * spec.weight(x_flat, om[j]) * spec.damping(
                x_flat, om[j], k)
            out += w * g(pull)
    return GriddedFunction(x_grid, out.reshape((x_grid.N,) * n))


def verify_A_summation_by_parts(spec, f, k_range=None, x_grid=None, ppw=4.0):
    """Check the finite rearrangement of the shell sum.

    With the spectrum of f confined to the closed annulus [2^a, 2^b], the
    gated shell sum equals a boundary term (f itself under the shell-b
    gate) plus telescoped gate increments against the running filters:

        sum_{k=a..b} gate_k (eta_k f) =
            gate_b f + sum_{k=a..b-1} (gate_k - gate_{k+1}) (phi_k f)

    pointwise along every arc.  Both sides here share one omega node set
    and one interpolation, so the gap must sit at rounding level; the
    report carries it, and spectral mass outside the annulus raises
    BandError before anything is summed.
    """
    a, b = (int(k_range[0]), int(k_range[1])) if k_range else spec.k_range
    if x_grid is None:
        x_grid = f.grid
    for k in range(a, b + 1):
        if not f.grid.band_ok(k):
            raise BandError(
                f"shell k={k} exceeds the source grid band "
                f"(max {f.grid.max_band})")
    F = f.spectrum()
    r = np.sqrt(np.sum(f.grid.freq_mesh() ** 2, axis=-1))
    outside = (r < 2.0 ** a) | (r > 2.0 ** b)
    tot = float(np.sum(np.abs(F)))
    mass_out = float(np.sum(np.abs(F[outside]))) / tot if tot > 0 else 0.0
    if mass_out > 1e-12:
        raise BandError(
            f"spectral mass fraction {mass_out:.2e} lies outside "
            f"[2^{a}, 2^{b}]; the rearrangement needs a confined band")

    n = spec.phase.n
    x_flat = x_grid.mesh().reshape(-1, n)
    c_vals = np.broadcast_to(
        np.asarray(spec.phase.c(x_flat), dtype=float), (x_flat.shape[0],))
    om, wq = spec.omega_nodes(b, ppw)
    theta = spec.phase.theta(om)
    _check_arc_box(spec, x_flat, theta, f.grid)

    fields = {None: np.ascontiguousarray(f.values)}
    for k in range(a, b + 1):
        fields[("eta", k)] = np.ascontiguousarray(apply_multiplier(
            f, lambda xi, kk=k: eta_k(xi, kk, axis=-1)).values)
    for k in range(a, b):
        fields[("phi", k)] = np.ascontiguousarray(apply_multiplier(
            f, lambda xi, kk=k: phi_k(xi, kk, axis=-1)).values)

    origin = -f.grid.L / 2.0
    direct = np.zeros(x_flat.shape[0], dtype=complex)
    parts = np.zeros(x_flat.shape[0], dtype=complex)
    buf = np.empty(x_flat.shape[0], dtype=complex)
    for j in range(om.shape[0]):
        pull = x_flat + c_vals[:, None] * theta[j]
        t0 = (pull[:, 0] - origin) / f.grid.h
        t1 = (pull[:, 1] - origin) / f.grid.h
        base = wq[j] * spec.weight(x_flat, om[j])
        gates = {k: spec.gate(x_flat, om[j], k) for k in range(a, b + 1)}
        turn = np.exp(1j * (np.pi / 4.0) * spec.sign * spec.mu(x_flat, om[j]))
        damp0 = base * turn * np.sqrt(np.abs(spec.phase.J(x_flat, om[j])))
        for k in range(a, b + 1):
            bicubic_periodic(fields[("eta", k)], t0, t1, buf)
            direct += damp0 * gates[k] * buf
        bicubic_periodic(fields[None], t0, t1, buf)
        parts += damp0 * gates[b] * buf
        for k in range(a, b):
            bicubic_periodic(fields[("phi", k)], t0, t1, buf)
            parts += damp0 * (gates[k] - gates[k + 1]) * buf

    scale = float(np.max(np.abs(direct)))
    gap = float(np.max(np.abs(direct - parts)))
    return {
        "k_lo": a,
        "k_hi": b,
        "nodes": int(om.shape[0]),
        "linf_direct": scale,
        "max_abs_gap": gap,
        "rel_gap": gap / scale if scale > 0 else 0.0,
    }


def pin_damping_sign(phase=None, k=8, eps=0.25, x=None, omega_prime=0.08,
                     ppw=8.0):
    """Measure both orientations of the quarter-turn phase on one mode.

    Applies the shell-k average to a single plane wave at xi' on the
    shell and compares against the stationary-envelope prediction

        e^{2 pi i Phi(x, xi')} lambda'^{-(n-1)/2} varphi(x, w') gate_k(w').

    The correct orientation leaves an O(1/lambda') residual; the wrong
    one misses the quarter turn twice and lands near |e^{-i pi/2} - 1|
    = sqrt(2).  Returns both residuals and the winner.
    """
    phase = phase if phase is not None else Halfwave(2)
    if phase.n != 2:
        raise DomainError("orientation pin is implemented for n=2")
    x = np.asarray(x if x is not None else (0.1, -0.05), dtype=float)
    omp = as_omega(omega_prime, 2)
    lam = 2.0 ** k / float(q_of(omp, 2))
    xi_p = xi_of(lam, omp, 2)

    weight = default_weight(2)
    W = weight.omega_support
    spec_plus = AveragingSpec(phase, weight, eps, (k, k), sign=1)
    m = max(512, int(np.ceil(ppw * 2.0 * W * 2.0 ** (k + 1)
                             * spec_plus._arc_rate() * 1.1)))
    t = (np.arange(m) + 0.5) / m * 2.0 * W - W
    dw = 2.0 * W / m
    om = t[:, None]

    pull = phase.pullback(x, om)
    osc = np.exp(2j * np.pi * np.sum(pull * xi_p, axis=-1))
    wvals = weight(x, om)
    residuals = {}
    target = (np.exp(2j * np.pi * phase.eval(x, xi_p)) / np.sqrt(lam)
              * weight(x, omp) * spec_plus.gate(x, omp, k))
    for sign in (1, -1):
        spec = AveragingSpec(phase, weight, eps, (k, k), sign=sign)
        integral = np.sum(osc * wvals * spec.damping(x, om, k)) * dw
        residuals[sign] = float(np.abs(integral - target) / np.abs(target))
    chosen = 1 if residuals[1] <= residuals[-1] else -1
    return {
        "k": k,
        "lambda": float(lam),
        "omega_prime": float(omega_prime),
        "x": [float(v) for v in x],
        "nodes": m,
        "residual_plus": residuals[1],
        "residual_minus": residuals[-1],
        "chosen_sign": chosen,
    }
