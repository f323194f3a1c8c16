"""Sampling, decay-slope fits, and distribution-function measurements."""

import numpy as np

from .errors import DomainError

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)


def halton(count, dim, skip=20):
    """Quasi-random points in [0,1)^dim (radical-inverse sequence)."""
    if dim > len(_PRIMES):
        raise DomainError(f"halton supports dim <= {len(_PRIMES)}")
    out = np.empty((count, dim))
    idx = np.arange(skip + 1, skip + count + 1, dtype=np.int64)
    for d in range(dim):
        b = _PRIMES[d]
        i = idx.copy()
        f = 1.0
        col = np.zeros(count)
        while np.any(i > 0):
            f /= b
            col += f * (i % b)
            i //= b
        out[:, d] = col
    return out


class DecayFit:
    """Least-squares line through (k, log2 value): slope, intercept, stderr."""

    def __init__(self, ks, values):
        ks = np.asarray(ks, dtype=float)
        values = np.asarray(values, dtype=float)
        if ks.size < 4:
            raise DomainError("decay fit needs at least 4 points")
        if np.any(values <= 0):
            raise DomainError("decay fit needs positive values")
        y = np.log2(values)
        kbar = ks.mean()
        sxx = np.sum((ks - kbar) ** 2)
        self.slope = float(np.sum((ks - kbar) * (y - y.mean())) / sxx)
        self.intercept = float(y.mean() - self.slope * kbar)
        resid = y - (self.intercept + self.slope * ks)
        dof = max(ks.size - 2, 1)
        self.stderr = float(np.sqrt(np.sum(resid**2) / dof / sxx))
        self.ks = ks
        self.values = values

    def __repr__(self):
        return (f"DecayFit(slope={self.slope:.4f}, "
                f"intercept={self.intercept:.3f}, stderr={self.stderr:.4f})")

    def as_dict(self):
        return {"slope": self.slope, "intercept": self.intercept,
                "stderr": self.stderr, "npoints": int(self.ks.size)}


def fit_decay_slope(series):
    """Fit log2(value) vs k for a series of (k, value) pairs."""
    ks = [k for k, _ in series]
    vs = [v for _, v in series]
    return DecayFit(ks, vs)


def dyadic_lambda_ladder(jmin=-10, jmax=20):
    return 2.0 ** np.arange(jmin, jmax + 1, dtype=float)


def distribution_function(absvals, cellvol, lam):
    """Measure of {|g| > lam} on the lattice, for each lam in the ladder."""
    a = np.abs(np.asarray(absvals)).ravel()
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    a_sorted = np.sort(a)
    counts = a.size - np.searchsorted(a_sorted, lam, side="right")
    return counts * cellvol


def weak_quasinorm(absvals, cellvol, ladder=None):
    """sup over the dyadic ladder of lam * |{|g| > lam}|."""
    if ladder is None:
        ladder = dyadic_lambda_ladder()
    d = distribution_function(absvals, cellvol, ladder)
    return float(np.max(ladder * d))
