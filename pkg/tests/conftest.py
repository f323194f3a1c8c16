"""Shared measured series, computed once per session.

The long kernel-mass sweeps feed both the module tests and the acceptance
gate, so they live in session fixtures.
"""

import numpy as np
import pytest

from fiolab.averaging import (AveragingSpec, ModeField, apply_A,
                              verify_A_summation_by_parts)
from fiolab.decomposition import (OperatorSpec, deg_kernel_l1,
                                  nodecay_kernel_l1, tube_kernel_l1)
from fiolab.grids import GriddedFunction, GridSpec
from fiolab.partition import TubePiece
from fiolab.phases import make_phase
from fiolab.stats import halton
from fiolab.symbols import default_symbol


@pytest.fixture(scope="session")
def deg_cusp_sweep():
    """Cusp flat-curvature decay series at the 9 standard probe points."""
    ph = make_phase("cusp", 2)
    op = OperatorSpec(ph, default_symbol(2), 0.25, (4, 10), "deg")
    ys = np.vstack([np.zeros(2), 0.8 * (halton(8, 2) - 0.5)])
    return [(y, [(k, deg_kernel_l1(op, k, y)) for k in range(4, 11)])
            for y in ys]


@pytest.fixture(scope="session")
def nodecay_series():
    """Full half-wave row masses, the no-decay scale series."""
    ph = make_phase("halfwave", 2)
    op = OperatorSpec(ph, default_symbol(2), 0.25, (4, 10), "full")
    y = np.array([0.0, 1.0])
    return [(k, nodecay_kernel_l1(op, k, y)) for k in range(4, 11)]


@pytest.fixture(scope="session")
def tube_masses():
    """Half-wave tube-row masses at the central direction, k = 6..10."""
    ph = make_phase("halfwave", 2)
    sym = default_symbol(2)
    y = np.array([0.0, 1.0])
    return {k: tube_kernel_l1(ph, TubePiece(ph, sym, np.zeros(2), 0.0,
                                            k, 0.25), y)
            for k in (6, 7, 8, 9, 10)}


def band_modes(seed, m=8, r_lo=16.5, r_hi=31.5):
    """Random plane-wave sum with frequencies in a closed annulus."""
    rng = np.random.default_rng(seed)
    r = rng.uniform(r_lo, r_hi, m)
    ang = rng.uniform(0.0, 2.0 * np.pi, m)
    freqs = np.stack([r * np.cos(ang), r * np.sin(ang)], axis=-1)
    coeffs = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    return ModeField(freqs, coeffs)


@pytest.fixture(scope="session")
def a_l1_sweep():
    """Averaged-mass ratios for 5 shell-4..5 inputs, with both doublings.

    Each entry carries the baseline ratio |Af|_1 / |f|_1 on the fixed
    evaluation box, the same ratio at doubled grid resolution, and at
    doubled angular quadrature.
    """
    spec = AveragingSpec(make_phase("halfwave", 2), k_range=(4, 5))
    xg1 = GridSpec(2, 256, L=1.75)
    xg2 = GridSpec(2, 512, L=1.75)
    out = []
    for s in range(5):
        mf = band_modes(1000 + s)
        f1 = mf.on_grid(GridSpec(2, 1024, L=4.0))
        f2 = mf.on_grid(GridSpec(2, 2048, L=4.0))
        base = apply_A(spec, f1, x_grid=xg1).l1() / mf.on_grid(xg1).l1()
        res2 = apply_A(spec, f2, x_grid=xg2).l1() / mf.on_grid(xg2).l1()
        quad2 = apply_A(spec, f1, x_grid=xg1, ppw=8.0).l1() / mf.on_grid(xg1).l1()
        out.append({"seed": 1000 + s, "base": base, "res2": res2,
                    "quad2": quad2})
    return out


@pytest.fixture(scope="session")
def parts_identity_report():
    """Shell-sum rearrangement gap on an annulus-confined gridded input."""
    grid = GridSpec(2, 1024, L=4.0)
    rr = np.sqrt(np.sum(grid.freq_mesh() ** 2, axis=-1))
    rng = np.random.default_rng(11)
    F = (rng.standard_normal(rr.shape) + 1j * rng.standard_normal(rr.shape))
    F *= (rr >= 16.0) & (rr <= 64.0)
    f = GriddedFunction.from_spectrum(grid, F)
    spec = AveragingSpec(make_phase("halfwave", 2), k_range=(4, 6))
    return verify_A_summation_by_parts(spec, f, x_grid=GridSpec(2, 64, L=1.75))
