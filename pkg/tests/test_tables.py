import numpy as np
import pytest

from fiolab.errors import DomainError
from fiolab.grids import GridSpec
from fiolab.oscillatory import (OscIntegralSpec, kernel_row,
                                oscillatory_quadrature, validate_kernel_row)
from fiolab.partition import build_tube_family
from fiolab.phases import make_phase
from fiolab.symbols import default_symbol, dyadic_pieces
from fiolab.tables import RadialTable, row_values, separable_row_parts


def _nondeg_piece(k):
    hw = make_phase("halfwave", 2)
    a = default_symbol(2)
    return hw, dyadic_pieces(a, hw, k, 0.25)[1]


def test_table_nodes_match_direct_sum():
    hw, nd = _nondeg_piece(6)
    chi, radial, angular = separable_row_parts(nd)
    tab = RadialTable.build(radial, 6, 2)
    # rebuild the same midpoint rule by hand at a few table nodes
    r0, r1 = 2.0 ** 5, 2.0 ** 7
    m = int(np.ceil((r1 - r0) * 32 * 48.0 * 2.0 ** -6))
    du = (r1 - r0) / m
    u = r0 + (np.arange(m) + 0.5) * du
    g = radial(u) * u
    scale = float(np.abs(tab.values).max())
    for j in (2, 917, -7):
        idx = j % tab.values.shape[0]
        s = tab.s_lo + idx * tab.ds
        direct = np.sum(g * np.exp(2j * np.pi * u * s)) * du
        got = complex(tab(np.array(s)))
        assert abs(got - direct) <= 1e-10 * scale


def test_table_matches_independent_quadrature():
    for k in (6, 8):
        hw, nd = _nondeg_piece(k)
        chi, radial, angular = separable_row_parts(nd)
        tab = RadialTable.build(radial, k, 2)
        for s in (0.0, 0.01, -0.03, 0.3 * 2.0 ** -k, -17.2 * 2.0 ** -k):
            spec = OscIntegralSpec(
                lambda u, s=s: u[..., 0] * s,
                lambda u: radial(u[..., 0]) * u[..., 0],
                [(2.0 ** (k - 1), 2.0 ** (k + 1))],
                max(abs(s), 32.0 * 2.0 ** -k))
            ref = oscillatory_quadrature(spec)
            got = complex(tab(np.array(s)))
            assert abs(got - ref.value) <= 1e-4 * abs(ref.value)


def test_table_envelope_and_tails():
    hw, nd = _nondeg_piece(6)
    _, radial, _ = separable_row_parts(nd)
    tab = RadialTable.build(radial, 6, 2)
    env = tab.envelope_radius(1e-6) * 2.0 ** 6
    assert 10.0 < env < 40.0
    assert complex(tab(np.array(5.0))) == 0.0


def test_row_separability_detection():
    hw, nd = _nondeg_piece(4)
    assert separable_row_parts(nd) is not None
    vc = make_phase("varcoef", 2)
    vd, vn = dyadic_pieces(default_symbol(2), vc, 4, 0.25)
    assert separable_row_parts(vn) is None


def test_row_against_point_oracle():
    hw, nd = _nondeg_piece(6)
    g = GridSpec(2, N=256, L=8.0)
    rep = validate_kernel_row(hw, nd, (0.1, 0.6), g)
    assert rep["passed"]
    assert rep["max_rel"] <= 1e-4


def test_fast_row_matches_cartesian_lattice_sum():
    # the table path works in polar coordinates off any grid; a plain
    # Cartesian Riemann sum over the frequency lattice is a second,
    # unrelated discretization of the same row.
    hw, nd = _nondeg_piece(3)
    y = np.array([0.125, 0.625])
    x0 = np.linspace(-0.4, 0.7, 16)
    x1 = np.linspace(-0.8, 0.1, 10)
    xs = np.stack(np.meshgrid(x0, x1, indexing="ij"), axis=-1).reshape(-1, 2)
    fast = row_values(hw, nd, xs, y)

    step = 1.0 / 8.0
    ax = step * np.arange(-128, 129)
    xi = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    r = np.linalg.norm(xi, axis=-1)
    xi = xi[(xi[:, 1] > 0) & (r > 3.9) & (r < 16.1)]
    ph = hw.eval(xs[:, None, :], xi[None, :, :]) - xi @ y
    amp = nd.eval(xs[:, None, :], xi[None, :, :])
    lat = np.sum(np.exp(2j * np.pi * ph) * amp, axis=1) * step ** 2

    num = float(np.max(np.abs(fast - lat)))
    den = float(np.max(np.abs(lat)))
    assert num / den <= 1e-4


def test_row_peak_sits_at_the_pullback_point():
    hw, nd = _nondeg_piece(6)
    g = GridSpec(2, N=256, L=8.0)
    y = np.array([0.1, 0.6])
    row = kernel_row(hw, nd, y, g)
    i = np.unravel_index(np.argmax(np.abs(row.values)), row.values.shape)
    peak = g.mesh()[i]
    # mass sits where x + grad p((0,1)) = y, i.e. x = y - (0, 1)
    assert np.linalg.norm(peak - (y - np.array([0.0, 1.0]))) <= 0.05


def test_scale_above_grid_band_is_fine_for_rows():
    hw, nd = _nondeg_piece(10)
    g = GridSpec(2, N=256, L=8.0)   # Nyquist 16, far below the k=10 shell
    row = kernel_row(hw, nd, (0.1, 0.6), g)
    assert np.isfinite(row.values).all()
    assert np.abs(row.values).max() > 1.0


def test_row_values_accepts_scattered_points():
    hw, nd = _nondeg_piece(6)
    rng = np.random.default_rng(2)
    xs = rng.uniform(-1.0, 1.0, size=(64, 2))
    vals = row_values(hw, nd, xs, (0.1, 0.6))
    assert vals.shape == (64,)
    assert np.isfinite(vals).all()


def test_row_values_rejects_nonseparable():
    vc = make_phase("varcoef", 2)
    vd, vn = dyadic_pieces(default_symbol(2), vc, 4, 0.25)
    with pytest.raises(DomainError):
        row_values(vc, vn, np.zeros((4, 2)), (0.0, 0.5))


def test_tube_row_validates_against_oracle():
    hw = make_phase("halfwave", 2)
    fam = build_tube_family(hw, np.zeros(2), 6, 0.25)
    center = fam.nearest_center(np.array([0.05]))
    piece = fam.piece(center, default_symbol(2))
    g = GridSpec(2, N=256, L=8.0)
    rep = validate_kernel_row(hw, piece, (0.1, 0.6), g)
    assert rep["passed"]
    assert rep["max_rel"] <= 1e-4
