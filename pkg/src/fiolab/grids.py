"""Periodic spatial grids, gridded functions, and their file formats.

Conventions: the box is [-L/2, L/2)^n sampled at N points per axis; the dual
lattice has spacing 1/L and axis Nyquist frequency N/(2L).  Spectra are kept
in FFT order and scaled so they approximate the continuum transform
fhat(xi) = int f(x) e^{-2 pi i x.xi} dx.
"""

import struct

import numpy as np

from .errors import BandError, DomainError

DEFAULT_L = 8.0
DEFAULT_N = {2: 512, 3: 128}


class GridSpec:
    """Uniform periodic grid on [-L/2, L/2)^n."""

    def __init__(self, n, N=None, L=DEFAULT_L, k_max=None):
        if n not in (2, 3):
            raise DomainError("only n in {2, 3} supported")
        if N is None:
            N = DEFAULT_N[n]
        N = int(N)
        if N < 16 or N > 2048 or N & (N - 1):
            raise DomainError("N must be a power of two in [16, 2048]")
        if L <= 0:
            raise DomainError("L must be positive")
        self.n = n
        self.N = N
        self.L = float(L)
        if k_max is not None and 2.0 ** (k_max + 1) > self.nyquist:
            raise BandError(
                f"grid Nyquist {self.nyquist:g} cannot hold band k_max={k_max}")
        self.k_max = k_max

    @property
    def h(self):
        return self.L / self.N

    @property
    def cell_volume(self):
        return (self.L / self.N) ** self.n

    @property
    def nyquist(self):
        return self.N / (2.0 * self.L)

    @property
    def max_band(self):
        """Largest dyadic k with the shell |xi| <= 2^{k+1} inside Nyquist."""
        return int(np.floor(np.log2(self.nyquist))) - 1

    def band_ok(self, k):
        return 2.0 ** (k + 1) <= self.nyquist

    def axis(self):
        return (np.arange(self.N) - self.N // 2) * self.h

    def mesh(self):
        axes = [self.axis()] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def freq_axis(self):
        return np.fft.fftfreq(self.N, d=self.h)

    def freq_mesh(self):
        axes = [self.freq_axis()] * self.n
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def index_of(self, z):
        """Lattice index of the cell containing the point z."""
        z = np.asarray(z, dtype=float)
        idx = np.rint(z / self.h).astype(int) + self.N // 2
        if np.any(idx < 0) or np.any(idx >= self.N):
            raise DomainError("point outside the grid box")
        return tuple(idx)

    def __eq__(self, other):
        return (isinstance(other, GridSpec) and self.n == other.n
                and self.N == other.N and self.L == other.L)

    def __repr__(self):
        return f"GridSpec(n={self.n}, N={self.N}, L={self.L})"


class GriddedFunction:
    """Complex samples over a GridSpec lattice."""

    def __init__(self, grid, values):
        values = np.asarray(values)
        if values.shape != (grid.N,) * grid.n:
            raise DomainError("values shape does not match the grid")
        self.grid = grid
        self.values = values.astype(complex, copy=False)

    @classmethod
    def zeros(cls, grid):
        return cls(grid, np.zeros((grid.N,) * grid.n, dtype=complex))

    @classmethod
    def from_callable(cls, grid, fn):
        return cls(grid, fn(grid.mesh()))

    def copy(self):
        return GriddedFunction(self.grid, self.values.copy())

    def l1(self):
        return float(np.sum(np.abs(self.values))) * self.grid.cell_volume

    def l2(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2)
                             * self.grid.cell_volume))

    def linf(self):
        return float(np.max(np.abs(self.values)))

    def spectrum(self):
        """Continuum-scaled DFT, FFT frequency order."""
        return np.fft.fftn(np.fft.ifftshift(self.values)) * self.grid.cell_volume

    @classmethod
    def from_spectrum(cls, grid, F):
        vals = np.fft.fftshift(np.fft.ifftn(F)) * (grid.N / grid.L) ** grid.n
        return cls(grid, vals)


class DeltaApproximant(GriddedFunction):
    """Single-cell unit mass at the cell containing z."""

    def __init__(self, z, grid):
        vals = np.zeros((grid.N,) * grid.n, dtype=complex)
        vals[grid.index_of(z)] = 1.0 / grid.cell_volume
        super().__init__(grid, vals)
        self.center = np.asarray(z, dtype=float)


FIOG_MAGIC = b"FIOG"
FIOG_VERSION = 1
_HEADER = struct.Struct("<4sHHId12x")


def write_fiog(path, gf):
    """Binary grid snapshot: 32-byte header then complex128 C-order data."""
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(FIOG_MAGIC, FIOG_VERSION, gf.grid.n,
                              gf.grid.N, gf.grid.L))
        fh.write(np.ascontiguousarray(gf.values, dtype="<c16").tobytes())


def read_fiog(path):
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) < _HEADER.size:
            raise DomainError("truncated grid file header")
        magic, version, n, N, L = _HEADER.unpack(head)
        if magic != FIOG_MAGIC:
            raise DomainError("not a grid snapshot file")
        if version != FIOG_VERSION:
            raise DomainError(f"unsupported grid file version {version}")
        data = fh.read()
    if len(data) != 16 * N**n:
        raise DomainError("grid file data size does not match header")
    vals = np.frombuffer(data, dtype="<c16")
    grid = GridSpec(n, N, L)
    return GriddedFunction(grid, vals.reshape((N,) * n).copy())


def write_grid_csv(path, gf):
    """Text export: one row per lattice point, coordinates then re, im."""
    mesh = gf.grid.mesh().reshape(-1, gf.grid.n)
    flat = gf.values.reshape(-1)
    cols = [mesh[:, i] for i in range(gf.grid.n)] + [flat.real, flat.imag]
    header = ",".join([f"x{i}" for i in range(gf.grid.n)] + ["re", "im"])
    np.savetxt(path, np.column_stack(cols), delimiter=",", header=header,
               comments="", fmt="%.17g")
