"""Damped arc averaging: orientation pin, shell algebra, mass stability."""

import numpy as np
import pytest

from fiolab.averaging import (AveragingSpec, ModeField, apply_A,
                              default_weight, pin_damping_sign,
                              verify_A_summation_by_parts)
from fiolab.errors import BandError, DomainError
from fiolab.grids import GriddedFunction, GridSpec
from fiolab.phases import make_phase
from fiolab.stats import halton
from fiolab.symbols import DyadicSymbolPiece, default_symbol

from conftest import band_modes

# quadrature-oracle comparison of both quarter-turn orientations at k=8;
# the winner inverts the principal oscillation, the loser misses it by a
# half turn and lands at sqrt(2)
PIN_HALFWAVE = (2.290787e-04, 1.414378)
PIN_VARCOEF = (2.169728e-04, 1.414367)
PIN_K6_PLUS = 4.083458e-03
PIN_K10_PLUS = 5.865732e-05

# exact plane-wave path vs bicubic grid path, shell 5
MODE_GRID_AMAX = 0.58230

# |Af|_1 / |f|_1 on the fixed box, five annulus inputs (shells 4..5)
A_L1_BASE = [0.156596, 0.175675, 0.170017, 0.104387, 0.083842]


def test_spec_validation():
    ph = make_phase("halfwave", 2)
    for eps in (0.0, 1.0, -0.1):
        with pytest.raises(DomainError):
            AveragingSpec(ph, eps=eps)
    with pytest.raises(DomainError):
        AveragingSpec(ph, k_range=(8, 6))
    with pytest.raises(DomainError):
        AveragingSpec(ph, k_range=(0, 6))
    with pytest.raises(DomainError):
        AveragingSpec(ph, sign=0)


def test_default_weight_plateau():
    # identically 1 on the default symbol support, decaying to 0 outside
    w = default_weight(2)
    xs = 0.9 * (2.0 * halton(50, 2) - 1.0)
    oms = 0.24 * (2.0 * halton(50, 1) - 1.0)
    vals = w(xs, oms)
    assert np.all(vals == 1.0)
    assert w(np.array([4.1, 0.0]), np.array([0.0])) == 0.0
    assert w(np.array([0.0, 0.0]), np.array([0.51])) == 0.0
    mid = w(np.array([2.7, 0.0]), np.array([0.38]))
    assert 0.0 < mid < 1.0


def test_mu_signature():
    hw = AveragingSpec(make_phase("halfwave", 2))
    cu = AveragingSpec(make_phase("cusp", 2))
    xs = 2.0 * halton(20, 2) - 1.0
    oms = 0.4 * (2.0 * halton(20, 1) - 1.0)
    assert np.all(hw.mu(xs, oms) == 1.0)
    assert np.all(cu.mu(xs, oms) == np.sign(oms[:, 0]))
    hw3 = AveragingSpec(make_phase("halfwave", 3))
    assert float(hw3.mu(np.zeros(3), np.array([0.1, -0.2]))) == 2.0


def test_gate_matches_nondegenerate_cutoff():
    # the damping gate and the nondegenerate piece cutoff must be the
    # same function of J, or the factorization's remainder stops shrinking
    ph = make_phase("cusp", 2)
    piece = DyadicSymbolPiece(default_symbol(2), ph, 6, 0.25,
                              "nondegenerate")
    spec = AveragingSpec(ph)
    xs = 2.0 * halton(30, 2) - 1.0
    oms = 0.4 * (2.0 * halton(30, 1) - 1.0)
    gap = np.abs(spec.gate(xs, oms, 6) - piece.cutoff(xs, oms))
    assert float(gap.max()) == 0.0


def test_flat_phase_annihilated():
    # J = 0 kills the damping factor, so A of anything is exactly 0
    spec = AveragingSpec(make_phase("linear", 2), k_range=(4, 5))
    mf = band_modes(3)
    out = apply_A(spec, mf, x_grid=GridSpec(2, 16, L=1.0))
    assert float(np.max(np.abs(out.values))) == 0.0


def test_pin_orientation_halfwave():
    rep = pin_damping_sign()
    assert rep["chosen_sign"] == 1
    assert rep["residual_plus"] == pytest.approx(PIN_HALFWAVE[0], rel=1e-4)
    assert rep["residual_minus"] == pytest.approx(PIN_HALFWAVE[1], rel=1e-4)


def test_pin_orientation_varcoef():
    rep = pin_damping_sign(phase=make_phase("varcoef", 2))
    assert rep["chosen_sign"] == 1
    assert rep["residual_plus"] == pytest.approx(PIN_VARCOEF[0], rel=1e-4)
    assert rep["residual_minus"] == pytest.approx(PIN_VARCOEF[1], rel=1e-4)


def test_pin_residual_shrinks_with_shell():
    r6 = pin_damping_sign(k=6)["residual_plus"]
    r10 = pin_damping_sign(k=10)["residual_plus"]
    assert r6 == pytest.approx(PIN_K6_PLUS, rel=1e-4)
    assert r10 == pytest.approx(PIN_K10_PLUS, rel=1e-4)
    assert r10 < r6 / 10.0


def test_mode_path_matches_grid_path():
    mf = band_modes(7)
    spec = AveragingSpec(make_phase("halfwave", 2), k_range=(5, 5))
    xg = GridSpec(2, 64, L=1.75)
    a_grid = apply_A(spec, mf.on_grid(GridSpec(2, 1024, L=4.0)), x_grid=xg)
    a_exact = apply_A(spec, mf, x_grid=xg)
    amax = float(np.max(np.abs(a_exact.values)))
    assert amax == pytest.approx(MODE_GRID_AMAX, rel=1e-3)
    gap = float(np.max(np.abs(a_grid.values - a_exact.values)))
    assert gap <= 8e-3 * amax


def test_parts_identity_at_rounding(parts_identity_report):
    rep = parts_identity_report
    assert rep["rel_gap"] <= 1e-12
    assert rep["k_lo"] == 4 and rep["k_hi"] == 6


def test_parts_identity_preconditions():
    grid = GridSpec(2, 256, L=4.0)
    spec = AveragingSpec(make_phase("halfwave", 2), k_range=(4, 4))
    rng = np.random.default_rng(0)
    # mass below the annulus
    F = np.zeros((256, 256), dtype=complex)
    rr = np.sqrt(np.sum(grid.freq_mesh() ** 2, axis=-1))
    F[(rr > 2.0) & (rr < 8.0)] = 1.0
    with pytest.raises(BandError):
        verify_A_summation_by_parts(
            spec, GriddedFunction.from_spectrum(grid, F),
            x_grid=GridSpec(2, 16, L=1.0))
    # shell beyond the grid band
    f_ok = GriddedFunction(grid, rng.standard_normal((256, 256)))
    with pytest.raises(BandError):
        verify_A_summation_by_parts(
            AveragingSpec(make_phase("halfwave", 2), k_range=(4, 8)), f_ok,
            x_grid=GridSpec(2, 16, L=1.0))


def test_arc_leaves_box_rejected():
    # evaluation box as large as the sample box: arcs of unit length must
    # run out of data
    grid = GridSpec(2, 256, L=2.0)
    f = band_modes(1).on_grid(grid)
    spec = AveragingSpec(make_phase("halfwave", 2), k_range=(4, 5))
    with pytest.raises(DomainError):
        apply_A(spec, f)


def test_band_beyond_grid_rejected():
    grid = GridSpec(2, 256, L=4.0)
    f = band_modes(1).on_grid(grid)
    spec = AveragingSpec(make_phase("halfwave", 2), k_range=(4, 8))
    with pytest.raises(BandError):
        apply_A(spec, f, x_grid=GridSpec(2, 16, L=1.0))


def test_modefield_contracts():
    mf = band_modes(2)
    assert mf.band_mass_outside(4, 5) == 0.0
    assert mf.band_mass_outside(6, 8) > 0.99
    piece = mf.band_piece(9)
    assert not np.any(piece.coeffs)
    with pytest.raises(DomainError):
        ModeField(np.ones((3, 2)), np.ones(2))
    with pytest.raises(DomainError):
        apply_A(AveragingSpec(make_phase("halfwave", 2)), mf)


def test_a_l1_ratios_frozen(a_l1_sweep):
    for entry, expect in zip(a_l1_sweep, A_L1_BASE):
        assert entry["base"] == pytest.approx(expect, rel=2e-3)


def test_a_l1_stable_under_doubling(a_l1_sweep):
    for entry in a_l1_sweep:
        assert abs(entry["res2"] / entry["base"] - 1.0) <= 0.10
        assert abs(entry["quad2"] / entry["base"] - 1.0) <= 0.10
